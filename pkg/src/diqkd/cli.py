"""Command-line front end: entropy bounds, key-rate sweeps, thresholds,
certification runs, and attack comparisons as reproducible batch jobs.

Conventions:
  * inputs are plain fractions (q, delta, eta, tolerances); threshold
    outputs additionally report percent values — the conversion happens in
    exactly one place (`_percent`);
  * CSV is comma-separated with '.' decimals, one versioned comment line,
    then a header row; JSON is UTF-8 with sorted keys;
  * identical arguments (including --seed) produce byte-identical output;
  * exit codes: 0 ok, 2 usage, 3 domain error, 4 search failure, 5 refuted.

Angle lists are colon-separated; pass them as --flag=VALUE when the first
angle is negative so the shell token is not mistaken for an option.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .attacks import bias_attack, conjectured_rate_upper_bound, two_basis_attack
from .correlations import CHSH_MAX
from .errors import BracketError, DomainError, RefutedError
from .keyrate import (ProtocolConfig, bias_threshold, optimize_implementation,
                      rate_bias, rate_two_basis, threshold_search)
from .models import Implementation
from .tradeoff import (AffineBound, bias_bound_function, certify_affine,
                       conjectured_envelope_bias, qubit_bound_asym,
                       qubit_bound_bias, qubit_bound_chsh,
                       qubit_bound_two_basis)

CSV_VERSION = "v1"


# ---------------------------------------------------------------------------
# small plumbing


def _percent(x: float) -> float:
    """The single fraction -> percent conversion point for CLI output."""
    return 100.0 * x


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


@dataclass(frozen=True)
class SweepRange:
    """start:stop:steps specification for a swept parameter."""

    start: float
    stop: float
    steps: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


def _parse_sweep(text: str) -> SweepRange:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected start:stop:steps, got {text!r}")
    try:
        start, stop = float(parts[0]), float(parts[1])
        steps = int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if steps < 1:
        raise argparse.ArgumentTypeError("steps must be >= 1")
    return SweepRange(start, stop, steps)


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


@dataclass(frozen=True)
class JobConfig:
    """What was asked for: subcommand plus every parameter that affects output."""

    subcommand: str
    params: tuple[tuple[str, str], ...]
    seed: int = 0

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "JobConfig":
        skip = {"func", "out", "svg", "subcommand"}
        items = []
        for key, val in sorted(vars(args).items()):
            if key in skip or callable(val) or val is None:
                continue
            if isinstance(val, SweepRange):
                val = f"{_fmt(val.start)}:{_fmt(val.stop)}:{val.steps}"
            elif isinstance(val, tuple):
                val = ":".join(_fmt(v) for v in val)
            else:
                val = _fmt(val)
            items.append((key, val))
        return cls(subcommand=args.subcommand,
                   params=tuple(kv for kv in items if kv[0] != "seed"),
                   seed=int(getattr(args, "seed", 0)))

    def line(self) -> str:
        body = " ".join(f"{k}={v}" for k, v in self.params)
        return f"{self.subcommand} seed={self.seed} {body}".rstrip()


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _emit_csv(args, name: str, columns: list[str], rows: list[tuple]) -> None:
    job = JobConfig.from_args(args)
    lines = [f"# diqkd {name} {CSV_VERSION}", f"# job: {job.line()}",
             ",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    _emit("\n".join(lines) + "\n", args.out)
    if getattr(args, "svg", None):
        xs = [float(r[0]) for r in rows]
        series = []
        for j in range(1, len(columns)):
            if rows and isinstance(rows[0][j], (int, float)) \
                    and not isinstance(rows[0][j], bool):
                series.append((columns[j], xs, [float(r[j]) for r in rows]))
        _write_svg(args.svg, f"diqkd {name}", columns[0], series)


def _emit_json(args, report: dict) -> None:
    report = dict(report)
    report["job"] = dict(JobConfig.from_args(args).params)
    report["job"]["seed"] = getattr(args, "seed", 0)
    _emit(json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
          args.out)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# self-contained SVG polyline writer (no plotting dependency)

_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _write_svg(path: str, title: str, xlabel: str, series) -> None:
    W, H, M = 640, 440, 56
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
           if math.isfinite(x) and math.isfinite(y)]
    if not pts:
        return
    xmin, xmax = min(p[0] for p in pts), max(p[0] for p in pts)
    ymin, ymax = min(p[1] for p in pts), max(p[1] for p in pts)
    if xmax - xmin < 1e-300:
        xmax = xmin + 1.0
    if ymax - ymin < 1e-300:
        ymax = ymin + 1.0
    pad = 0.04 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad

    def sx(x):
        return M + (x - xmin) / (xmax - xmin) * (W - 2 * M)

    def sy(y):
        return H - M - (y - ymin) / (ymax - ymin) * (H - 2 * M)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<text x="{W/2:.1f}" y="18" text-anchor="middle">{title}</text>',
             f'<line x1="{M}" y1="{H-M}" x2="{W-M}" y2="{H-M}" stroke="black"/>',
             f'<line x1="{M}" y1="{M}" x2="{M}" y2="{H-M}" stroke="black"/>']
    for i in range(5):
        xv = xmin + i * (xmax - xmin) / 4
        yv = ymin + i * (ymax - ymin) / 4
        parts.append(f'<line x1="{sx(xv):.1f}" y1="{H-M}" x2="{sx(xv):.1f}" '
                     f'y2="{H-M+4}" stroke="black"/>')
        parts.append(f'<text x="{sx(xv):.1f}" y="{H-M+16}" text-anchor="middle">'
                     f'{xv:.4g}</text>')
        parts.append(f'<line x1="{M-4}" y1="{sy(yv):.1f}" x2="{M}" '
                     f'y2="{sy(yv):.1f}" stroke="black"/>')
        parts.append(f'<text x="{M-6}" y="{sy(yv)+3:.1f}" text-anchor="end">'
                     f'{yv:.4g}</text>')
    parts.append(f'<text x="{W/2:.1f}" y="{H-14}" text-anchor="middle">'
                 f'{xlabel}</text>')
    for k, (label, xs, ys) in enumerate(series):
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys)
                          if math.isfinite(x) and math.isfinite(y))
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{W-M-4}" y="{M+14*(k+1)}" text-anchor="end" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def _weight_to_p_prime(p: float) -> float:
    """Invert p = p'^2 / (p'^2 + (1-p')^2) for the basis-choice probability."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"measurement weight p={p!r} outside [0, 1]")
    rp, rq = math.sqrt(p), math.sqrt(1.0 - p)
    return rp / (rp + rq)


def cmd_entropy(args) -> int:
    if args.s is None and args.s_range is None:
        print("error: need --s or --s-range", file=sys.stderr)
        return 2
    svals = [args.s] if args.s is not None else list(args.s_range.values())
    if args.bound == "bias" and args.a1 is None:
        print("error: --bound bias needs --a1", file=sys.stderr)
        return 2

    def value(S: float) -> float:
        if args.bound == "chsh":
            return qubit_bound_chsh(args.q, S)
        if args.bound == "chsh-asym":
            return qubit_bound_asym(args.q, args.alpha, S)
        if args.bound == "two-basis":
            return qubit_bound_two_basis(args.q, args.p, S)
        return qubit_bound_bias(args.q, (args.a1, S))

    vals = _map(value, svals, args.threads)
    _emit_csv(args, "entropy", ["S", "bound"], list(zip(svals, vals)))
    return 0


def cmd_keyrate(args) -> int:
    columns = ["parameter", "rate", "entropy_bound", "H_cond", "certified",
               "epsilon"]
    if args.variant == "two-basis":
        config = ProtocolConfig(variant="two-basis", q=args.q,
                                p_prime=args.p_prime)
        deltas = ([args.delta] if args.delta_range is None
                  else list(args.delta_range.values()))

        def row(d: float):
            res = rate_two_basis(d, config, args.resolution)
            return (d, res.rate, res.entropy_bound, res.H_cond, True, 0.0)

        rows = _map(row, deltas, args.threads)
        _emit_csv(args, "keyrate", columns, rows)
        return 0

    etas = [args.eta] if args.eta_range is None else list(args.eta_range.values())

    def row(eta: float):
        if args.theta is not None:
            if args.phi_a is None or args.phi_b is None:
                raise DomainError("--theta needs --phi-a and --phi-b")
            impl = Implementation(theta=args.theta, phi_a=args.phi_a,
                                  phi_b=args.phi_b, v=1.0 - 2.0 * args.delta,
                                  eta=eta)
            res = rate_bias(impl, args.q, mode=args.mode, epsilon=args.epsilon)
        else:
            _, res = optimize_implementation(
                eta, args.delta, args.q, n_starts=args.n_starts,
                seed=args.seed, mode=args.mode, epsilon=args.epsilon)
        eps = res.meta.get("achieved_epsilon", 0.0) if res.certified else 0.0
        return (eta, res.rate, res.entropy_bound, res.H_cond, res.certified, eps)

    rows = _map(row, etas, args.threads)
    _emit_csv(args, "keyrate", columns, rows)
    return 0


def cmd_threshold(args) -> int:
    if args.variant == "two-basis":
        p_prime = args.p_prime if args.p is None else _weight_to_p_prime(args.p)
        config = ProtocolConfig(variant="two-basis", q=args.q, p_prime=p_prime)
        # normalize by the (1-2q)^2 rate suppression so the positivity floor
        # keeps meaning as q -> 1/2
        scale = max((1.0 - 2.0 * args.q) ** 2, 1e-300)
        if args.mode == "certified":
            def fn(d: float) -> float:
                return rate_two_basis(d, config, args.resolution).rate / scale
        else:
            def fn(d: float) -> float:
                return conjectured_rate_upper_bound(d, args.q, "two-basis",
                                                   p_prime) / scale
        thr = threshold_search(fn, 0.0, 0.25, tol=args.tol)
        report = {
            "variant": "two-basis", "mode": args.mode, "q": args.q,
            "p_prime": p_prime, "threshold_percent": _percent(thr),
            "tol_percent": _percent(args.tol), "rate_floor": 1e-10,
            "normalization": "(1-2q)^-2", "covering": None,
        }
        _emit_json(args, report)
        return 0

    detail = bias_threshold(args.q, delta=args.delta, mode=args.mode,
                            epsilon=args.epsilon, eta_hi=args.eta_hi,
                            seed=args.seed)
    if args.mode == "certified":
        lo, hi = detail["bracket"]
        tol = hi - lo
        covering = detail["confirmation"]
    else:
        tol = 1e-6  # nominal tail-fit accuracy; acceptance margin is 1e-4
        covering = None
    report = {
        "variant": "bias", "mode": args.mode, "q": args.q, "delta": args.delta,
        "threshold_percent": _percent(detail["threshold"]),
        "tol_percent": _percent(tol), "covering": covering,
        "tail_fit": detail["tail_fit"],
    }
    if args.full_path:
        report["path"] = detail["path"]
    _emit_json(args, report)
    return 0


def cmd_certify(args) -> int:
    bound = bias_bound_function(args.q)
    if args.tangent_at is not None:
        if len(args.tangent_at) != 2:
            print("error: --tangent-at needs a1:S", file=sys.stderr)
            return 2
        _, tangent = conjectured_envelope_bias(args.q, tuple(args.tangent_at))
        candidate = dataclasses.replace(tangent, epsilon=args.epsilon)
    elif args.beta is not None:
        candidate = AffineBound(beta=args.beta, alpha=(args.alpha1, args.alpha2),
                                epsilon=args.epsilon)
    else:
        print("error: need --tangent-at or --beta/--alpha1/--alpha2",
              file=sys.stderr)
        return 2
    domain = None
    if args.domain is not None:
        if len(args.domain) != 4:
            print("error: --domain needs a1lo:a1hi:Slo:Shi", file=sys.stderr)
            return 2
        d = args.domain
        domain = ((d[0], d[1]), (d[2], d[3]))
    result = certify_affine(bound, candidate, domain,
                            leaf_budget=args.leaf_budget,
                            max_depth=args.max_depth)
    report = result.as_report()
    _emit_json(args, report)
    if result.status == "certified":
        return 0
    if result.status == "refuted":
        return 5
    return 4  # limit-exceeded: budget or depth ran out before a verdict


def cmd_attack_compare(args) -> int:
    if args.variant == "two-basis":
        config = ProtocolConfig(variant="two-basis", q=args.q,
                                p_prime=args.p_prime)
        deltas = list(args.delta_range.values())

        def row(d: float):
            upper = conjectured_rate_upper_bound(d, args.q, "two-basis",
                                                 args.p_prime)
            lower = rate_two_basis(d, config, args.resolution).rate
            return (d, upper, lower, upper - lower)

        rows = _map(row, deltas, args.threads)
        _emit_csv(args, "attack-compare",
                  ["delta", "upper_rate", "lower_rate", "gap"], rows)
        return 0

    if args.a1 is None:
        print("error: --variant bias needs --a1", file=sys.stderr)
        return 2
    svals = list(args.s_range.values())

    def row(S: float):
        attack = bias_attack(args.q, (args.a1, S)).entropy
        envelope = qubit_bound_bias(args.q, (args.a1, S))
        return (S, attack, envelope, attack - envelope)

    rows = _map(row, svals, args.threads)
    _emit_csv(args, "attack-compare",
              ["S", "attack_entropy", "envelope_bound", "gap"], rows)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diqkd",
        description="Entropy bounds and key rates for device-independent QKD "
                    "with noisy preprocessing.",
        epilog="Inputs are fractions; threshold reports also carry percent "
               "fields. CSV: one '# diqkd <name> v1' line, a '# job:' line, "
               "a header row, then comma-separated data with '.' decimals.")
    sub = parser.add_subparsers(dest="subcommand", metavar="command")

    def common(p, seeded=False):
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--svg", help="also render an SVG polyline chart")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap for sweeps (default 1)")
        if seeded:
            p.add_argument("--seed", type=int, default=0,
                           help="seed for optimizer multistarts (default 0)")

    p = sub.add_parser("entropy", help="tabulate an entropy bound against S")
    p.add_argument("--bound", required=True,
                   choices=["chsh", "chsh-asym", "two-basis", "bias"])
    p.add_argument("--q", type=float, default=0.0, help="flip probability")
    p.add_argument("--p", type=float, default=0.5,
                   help="key-basis measurement weight (two-basis bound)")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="CHSH asymmetry weight (chsh-asym bound)")
    p.add_argument("--a1", type=float, help="Alice marginal (bias bound)")
    p.add_argument("--s", type=float, help="single S value")
    p.add_argument("--s-range", type=_parse_sweep, metavar="START:STOP:STEPS")
    common(p)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("keyrate", help="key-rate evaluations and sweeps")
    p.add_argument("--variant", required=True, choices=["two-basis", "bias"])
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--p-prime", type=float, default=0.5,
                   help="basis-choice probability (two-basis)")
    p.add_argument("--delta", type=float, default=0.0, help="channel error rate")
    p.add_argument("--delta-range", type=_parse_sweep, metavar="START:STOP:STEPS")
    p.add_argument("--resolution", type=int, default=2000,
                   help="tradeoff-curve breakpoints (two-basis)")
    p.add_argument("--eta", type=float, default=1.0,
                   help="detection efficiency (bias)")
    p.add_argument("--eta-range", type=_parse_sweep, metavar="START:STOP:STEPS")
    p.add_argument("--mode", choices=["conjectured", "certified"],
                   default="conjectured")
    p.add_argument("--epsilon", type=float, default=1e-8,
                   help="certification slack (certified mode)")
    p.add_argument("--theta", type=float,
                   help="evaluate this fixed implementation instead of optimizing")
    p.add_argument("--phi-a", type=_parse_floats, metavar="PHI1:PHI2")
    p.add_argument("--phi-b", type=_parse_floats, metavar="PHI1:PHI2:PHI3")
    p.add_argument("--n-starts", type=int, default=16)
    common(p, seeded=True)
    p.set_defaults(func=cmd_keyrate)

    p = sub.add_parser("threshold", help="threshold error rate / efficiency")
    p.add_argument("--variant", required=True, choices=["two-basis", "bias"])
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--p", type=float,
                   help="key-basis weight after sifting (two-basis)")
    p.add_argument("--p-prime", type=float, default=0.5)
    p.add_argument("--mode", choices=["certified", "conjectured"],
                   default="certified")
    p.add_argument("--tol", type=float, default=1e-6,
                   help="bisection tolerance, as a fraction (two-basis)")
    p.add_argument("--resolution", type=int, default=2000)
    p.add_argument("--delta", type=float, default=0.0,
                   help="channel error rate (bias variant)")
    p.add_argument("--epsilon", type=float, default=1e-6,
                   help="certification slack (bias certified mode)")
    p.add_argument("--eta-hi", type=float, default=0.9,
                   help="efficiency where the continuation starts")
    p.add_argument("--full-path", action="store_true",
                   help="include the continuation path in the report")
    common(p, seeded=True)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("certify", help="certify an affine lower bound")
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--tangent-at", type=_parse_floats, metavar="A1:S",
                   help="certify the envelope tangent at this point")
    p.add_argument("--beta", type=float, help="constant term of the candidate")
    p.add_argument("--alpha1", type=float, default=0.0, help="a1 coefficient")
    p.add_argument("--alpha2", type=float, default=0.0, help="S coefficient")
    p.add_argument("--epsilon", type=float, default=1e-8)
    p.add_argument("--leaf-budget", type=float, default=1e7)
    p.add_argument("--max-depth", type=int, default=40)
    p.add_argument("--domain", type=_parse_floats, metavar="A1LO:A1HI:SLO:SHI",
                   help="restrict the certification rectangle")
    common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("attack-compare",
                       help="explicit attack vs certified lower bound")
    p.add_argument("--variant", required=True, choices=["two-basis", "bias"])
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--p-prime", type=float, default=0.5)
    p.add_argument("--delta-range", type=_parse_sweep, default=SweepRange(0.0, 0.12, 61),
                   metavar="START:STOP:STEPS")
    p.add_argument("--resolution", type=int, default=2000)
    p.add_argument("--a1", type=float, help="Alice marginal (bias variant)")
    p.add_argument("--s-range", type=_parse_sweep, default=SweepRange(2.0, CHSH_MAX, 61),
                   metavar="START:STOP:STEPS")
    common(p)
    p.set_defaults(func=cmd_attack_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 2
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 3
    except BracketError as exc:
        print(f"search failure: {exc}", file=sys.stderr)
        return 4
    except RefutedError as exc:
        payload = {"status": "refuted", "witness": list(exc.witness)}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
