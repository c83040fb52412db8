"""Command-line interface.

Subcommands: ``test`` runs the lack-of-fit test on data files,
``simulate``, ``sweep`` and ``powercurve`` run Monte Carlo studies, and
``generate`` writes a synthetic primary/validation pair.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from typing import Sequence

from . import __version__
from .data import load_primary, load_validation, save_primary, save_validation
from .dgp import MODEL_IDS, ModelSpec, generate
from .errors import InputError, InvalidConfig, NumericalError
from .estimators import LINKS
from .kernels import BandwidthPlan
from .mc import (TABLE_TEST_C, McConfig, McResult, bandwidth_sweep, parse_range,
                 power_curve, run_mc, write_plot_script)
from .teststat import REGIME_REQUESTS, run_test

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3
REGIME_CHOICES = tuple(r.replace("_", "-") for r in REGIME_REQUESTS)
CONVENTIONS = ("normal_quantile", "literal_1_65")
REJECTION_RULE = "reject the null hypothesis when the standardized statistic exceeds the critical value"


class _Parser(argparse.ArgumentParser):
    """Argparse parser whose usage errors exit with the input-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _regime(text: str) -> str:
    name = text.replace("-", "_")
    if name not in REGIME_REQUESTS:
        raise argparse.ArgumentTypeError(f"choose from {', '.join(REGIME_CHOICES)}")
    return name


def _tests(text: str) -> tuple[str, ...]:
    out = tuple(_regime(t.strip()) for t in text.split(",") if t.strip())
    if not out:
        raise argparse.ArgumentTypeError("empty test list")
    return out


def _numbers(text: str) -> tuple[float, ...]:
    try:
        out = parse_range(text)
    except InvalidConfig as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _models(text: str) -> tuple[str, ...]:
    out = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in out if m not in MODEL_IDS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"unknown model(s) {bad}; choose from {', '.join(MODEL_IDS)}")
    return out


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser(suppress_defaults: bool = False) -> argparse.ArgumentParser:
    """The full parser. With ``suppress_defaults`` only explicitly given flags appear in the namespace."""

    def d(value):
        return argparse.SUPPRESS if suppress_defaults else value

    parser = _Parser(prog="eivlof", description="Model-adaptive lack-of-fit testing with validation data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False), help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", default=d(None), metavar="PATH",
                       help="flat key=value file of flag values; a key also given on the command line "
                            "with a different value is an error")

    t = sub.add_parser("test", help="run the test on a primary and a validation CSV")
    common(t)
    t.add_argument("--primary", required=not suppress_defaults, default=d(None), metavar="CSV",
                   help="primary sample, header y,w1..wp")
    t.add_argument("--validation", required=not suppress_defaults, default=d(None), metavar="CSV",
                   help="validation sample, header w1..wp,x1..xp")
    t.add_argument("--link", choices=sorted(LINKS), default=d("linear"), help="null link g (default linear)")
    t.add_argument("--alpha", type=float, default=d(0.05), help="level in (0, 0.5] (default 0.05)")
    t.add_argument("--regime", type=_regime, default=d("auto"), metavar="{" + ",".join(REGIME_CHOICES) + "}",
                   help="statistic and standardization; auto picks from N/n (default auto)")
    t.add_argument("--c1", type=_positive_float, default=d(1.6), help="constant of h, > 0 (default 1.6)")
    t.add_argument("--c2", type=_positive_float, default=d(1.6), help="constant of v_N, > 0 (default 1.6)")
    t.add_argument("--convention", choices=CONVENTIONS, default=d("normal_quantile"),
                   help="critical value: normal quantile or the literal 1.65 (alpha = 0.05 only)")
    t.add_argument("--report", default=d(None), metavar="PATH", help="append a JSON-lines report here")

    def model_flags(p):
        p.add_argument("--model", default=d("H11"), metavar="{" + ",".join(MODEL_IDS) + "}",
                       help="data-generating model (default H11)")
        p.add_argument("--p", type=_positive_int, default=d(2), help="covariate dimension >= 1 (default 2)")
        p.add_argument("--n", type=_positive_int, default=d(100), help="primary sample size >= 2 (default 100)")
        p.add_argument("--N", type=_positive_int, default=d(None), help="validation sample size >= 2")
        p.add_argument("--ratio", type=_positive_float, default=d(None),
                       help="validation size as a multiple of n (N = ratio * n); default 4 when --N is absent")
        p.add_argument("--sigma", choices=("identity", "ar03"), default=d("identity"),
                       help="covariance of X: identity or 0.3^|i-j| (default identity)")
        p.add_argument("--sigma-u", type=float, default=d(0.5),
                       help="variance of each measurement-error coordinate, >= 0 (default 0.5)")
        p.add_argument("--seed", type=int, default=d(0), help="master seed, integer >= 0 (default 0)")

    def mc_flags(p, c_help, c_default, a_default, tests_default, c_grid=False):
        model_flags(p)
        p.add_argument("--a", type=_numbers, default=d(a_default), metavar="LIST",
                       help="alternative strength: comma list or start:end:step")
        p.add_argument("--c", type=_numbers if c_grid else _positive_float,
                       default=d(c_default), help=c_help)
        p.add_argument("--reps", type=_positive_int, default=d(500), help="replications per cell >= 1 (default 500)")
        p.add_argument("--tests", type=_tests, default=d(tests_default), metavar="LIST",
                       help="comma list from " + ",".join(REGIME_CHOICES))
        p.add_argument("--alpha", type=float, default=d(0.05), help="level in (0, 0.5] (default 0.05)")
        p.add_argument("--convention", choices=CONVENTIONS, default=d("literal_1_65"),
                       help="critical value convention (default literal_1_65)")
        p.add_argument("--out", required=not suppress_defaults, default=d(None), metavar="CSV",
                       help="where to write the result CSV")
        p.add_argument("--plots", default=d(None), metavar="DIR", help="write a gnuplot script here")
        p.add_argument("--workers", type=_positive_int, default=d(1),
                       help="worker processes >= 1; results do not depend on it (default 1)")

    s = sub.add_parser("simulate", help="empirical size or power over an a grid")
    common(s)
    mc_flags(s, "bandwidth constant c > 0 for h and v_N (default 1.6)", 1.6, (0.0,), ("split",))
    s.add_argument("--c-zheng", type=_positive_float, default=d(TABLE_TEST_C["zheng"]),
                   help=f"bandwidth constant of the zheng test (default {TABLE_TEST_C['zheng']})")
    s.add_argument("--c-small-lambda", type=_positive_float, default=d(TABLE_TEST_C["small_lambda"]),
                   help=f"bandwidth constant of the small-lambda test (default {TABLE_TEST_C['small_lambda']})")

    w = sub.add_parser("sweep", help="empirical size over a grid of bandwidth constants")
    common(w)
    mc_flags(w, "grid of constants c >= 0, start:end:step or comma list (default 0:2:0.1)",
             parse_range("0:2:0.1"), (0.0,), ("split",), c_grid=True)

    pc = sub.add_parser("powercurve", help="power curves for the nonlinear models")
    common(pc)
    mc_flags(pc, "bandwidth constant c > 0 of the adaptive tests (default 1.6)", 1.6,
             parse_range("0:1:0.2"), ("split", "zheng"))
    pc.add_argument("--models", type=_models, default=d(("H16", "H17", "H18", "H19")), metavar="LIST",
                    help="comma list of models; each uses its default dimension (default H16,H17,H18,H19)")
    pc.add_argument("--c-zheng", type=_positive_float, default=d(None),
                    help="bandwidth constant of the zheng test (default 2.7, or 3 for H19)")

    g = sub.add_parser("generate", help="write a synthetic primary and validation CSV")
    common(g)
    model_flags(g)
    g.add_argument("--a", type=float, default=d(0.0), help="alternative strength (default 0)")
    g.add_argument("--out-primary", required=not suppress_defaults, default=d(None), metavar="CSV")
    g.add_argument("--out-validation", required=not suppress_defaults, default=d(None), metavar="CSV")
    return parser


def read_config(path: str) -> list[tuple[str, str]]:
    """Parse a flat key=value file. Blank lines and '#' comments are ignored."""
    items = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfig(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise InvalidConfig(f"{path}:{lineno}: empty key")
        items.append((key.replace("_", "-"), value))
    return items


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    """Parse flags, merge an optional --config file, and reject conflicting values."""
    argv = list(argv)
    args = build_parser().parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    explicit = vars(build_parser(suppress_defaults=True).parse_args(argv))
    tokens = [args.command]
    for key, value in read_config(args.config):
        if key == "config":
            raise InvalidConfig("a config file cannot name another config file")
        tokens += [f"--{key}", value]
    from_file = vars(build_parser(suppress_defaults=True).parse_args(tokens))
    for key, value in from_file.items():
        if key == "command":
            continue
        if key in explicit and explicit[key] != value:
            raise InvalidConfig(f"{key} is {explicit[key]!r} on the command line but {value!r} in {args.config}")
    # command-line flags last so required-flag checks see both sources
    return build_parser().parse_args(tokens + argv[argv.index(args.command) + 1:])


def _validation_size(args) -> dict:
    if args.N is not None and args.ratio is not None:
        raise InvalidConfig("give either --N or --ratio, not both")
    if args.N is not None:
        return {"N": args.N}
    return {"ratio": 4.0 if args.ratio is None else args.ratio}


def _spec(args, model=None, p=None) -> ModelSpec:
    try:
        return ModelSpec(model or args.model, p or args.p, sigma_choice=args.sigma, sigma_u=args.sigma_u)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None


def _print_table(result: McResult, out) -> None:
    header = f"{'test':<16}{'model':<10}{'p':>3}{'n':>6}{'N':>6}{'a':>8}{'c':>7}{'reps':>6}{'rate':>8}{'fail':>6}"
    print(header, file=out)
    for r in result:
        flag = "" if r.valid else "  invalid"
        print(f"{r.test:<16}{r.model:<10}{r.p:>3}{r.n:>6}{r.N:>6}{r.a:>8.3g}{r.c:>7.3g}{r.reps:>6}"
              f"{r.reject_rate:>8.4f}{r.failures:>6}{flag}", file=out)


def cmd_test(args, out=None) -> int:
    out = out or sys.stdout
    primary = load_primary(args.primary)
    validation = load_validation(args.validation, expected_p=primary.p)
    outcome = run_test(primary, validation, LINKS[args.link], BandwidthPlan(args.c1, args.c2), args.alpha,
                       args.regime, args.convention)
    report = {
        "primary": args.primary, "validation": args.validation, "link": args.link, "alpha": args.alpha,
        "regime_request": args.regime, "c1": args.c1, "c2": args.c2, "convention": args.convention,
        "n": primary.n, "N": validation.N, "p": primary.p,
        "statistic": outcome.raw_statistic, "scale_factor": outcome.scale_factor, "bias": outcome.bias_hat,
        "variance": outcome.variance_hat, "standardized": outcome.standardized,
        "critical_value": outcome.critical_value, "regime": outcome.regime, "lambda_hat": outcome.lambda_hat,
        "q_hat": outcome.q_hat, "beta_hat": [float(b) for b in outcome.beta_hat], "h": outcome.h,
        "v_N": outcome.v_N, "reject": outcome.reject, "rule": REJECTION_RULE,
    }
    width = max(len(k) for k in report)
    for key, value in report.items():
        print(f"{key:<{width}}  {value}", file=out)
    if args.report:
        with open(args.report, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(report) + "\n")
    return EXIT_OK


def _mc_config(args, spec: ModelSpec, c_grid, test_c) -> McConfig:
    return McConfig(spec=spec, n=args.n, **_validation_size(args), reps=args.reps, a_grid=tuple(args.a),
                    c_grid=tuple(c_grid), tests=tuple(dict.fromkeys(args.tests)), test_c=test_c,
                    alpha=args.alpha, seed=args.seed, critical_convention=args.convention)


def _finish(args, result: McResult, plot_name: str, x: str, title: str, out) -> int:
    result.to_csv(args.out)
    if args.plots:
        path = write_plot_script(result, args.plots, plot_name, x, title)
        log.info("plot script written to %s", path)
    _print_table(result, out)
    return EXIT_OK


def cmd_simulate(args, out=None) -> int:
    out = out or sys.stdout
    test_c = {"zheng": args.c_zheng, "small_lambda": args.c_small_lambda}
    config = _mc_config(args, _spec(args), (args.c,), test_c)
    return _finish(args, run_mc(config, args.workers), "simulate", "a", "rejection rate against a", out)


def cmd_sweep(args, out=None) -> int:
    out = out or sys.stdout
    config = _mc_config(args, _spec(args), args.c, {})
    return _finish(args, bandwidth_sweep(config, args.workers), "sweep", "c", "empirical size against c", out)


def cmd_powercurve(args, out=None) -> int:
    out = out or sys.stdout
    test_c = {} if args.c_zheng is None else {"zheng": args.c_zheng}
    # the per-model dimension is chosen inside power_curve; the base spec only carries shared settings
    base = _spec(args, model="H16", p=4)
    config = _mc_config(args, base, (args.c,), test_c)
    result = power_curve(config, args.models, args.workers)
    return _finish(args, result, "powercurve", "a", "power against a", out)


def cmd_generate(args, out=None) -> int:
    out = out or sys.stdout
    spec = replace(_spec(args), a=args.a)
    sizes = _validation_size(args)
    N = sizes.get("N") or int(round(sizes["ratio"] * args.n))
    data = generate(spec, args.n, N, args.seed)
    save_primary(data.primary, args.out_primary)
    save_validation(data.validation, args.out_validation)
    print(f"wrote {args.n} primary rows to {args.out_primary} and {N} validation rows to "
          f"{args.out_validation}", file=out)
    return EXIT_OK


COMMANDS = {"test": cmd_test, "simulate": cmd_simulate, "sweep": cmd_sweep, "powercurve": cmd_powercurve,
            "generate": cmd_generate}


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
