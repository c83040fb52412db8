"""Monte Carlo replication of empirical size and power.

A replication is one generated dataset; every (bandwidth constant, test)
cell is evaluated on it, so different cells share random numbers. Dataset
seeds depend on the master seed, the model, its dimension and covariance,
the sample sizes, the value of ``a`` and the replication index, but not on
the bandwidth: a sweep cell at c = 1.6 reproduces a single-point run at
c = 1.6 exactly.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .dgp import MODEL_IDS, ModelSpec, generate
from .errors import InvalidConfig, NumericalError
from .kernels import BandwidthPlan
from .teststat import REGIME_REQUESTS, fit_null, run_test

log = logging.getLogger(__name__)

CSV_HEADER = ("test", "model", "p", "n", "N", "a", "c", "reps", "reject_rate", "mean_stat", "sd_stat",
              "failures")
MAX_FAILURE_FRACTION = 0.01
# Zheng bandwidth constants tuned per model for the nonlinear power curves
POWER_CURVE_ZHENG_C = {"H16": 2.7, "H17": 2.7, "H18": 2.7, "H19": 3.0}
POWER_CURVE_P = {"H16": 4, "H17": 4, "H18": 4, "H19": 8}
# constants used for the comparison tests in the linear-model tables
TABLE_TEST_C = {"zheng": 3.9, "small_lambda": 2.0}


@dataclass(frozen=True)
class McConfig:
    spec: ModelSpec
    n: int
    N: int | None = None
    ratio: float | None = None
    reps: int = 500
    a_grid: tuple[float, ...] = (0.0,)
    c_grid: tuple[float, ...] = (1.6,)
    tests: tuple[str, ...] = ("split",)
    test_c: dict[str, float] = field(default_factory=dict)
    alpha: float = 0.05
    seed: int = 0
    critical_convention: str = "literal_1_65"

    def __post_init__(self):
        if (self.N is None) == (self.ratio is None):
            raise InvalidConfig("give exactly one of N and ratio")
        if self.reps < 1:
            raise InvalidConfig("reps must be at least 1")
        if not self.a_grid or not self.c_grid or not self.tests:
            raise InvalidConfig("a grid, c grid and test list must be nonempty")
        for t in self.tests:
            if t not in REGIME_REQUESTS:
                raise InvalidConfig(f"unknown test {t!r}; choose from {', '.join(REGIME_REQUESTS)}")
        # c = 0 is accepted so that sweep grids may start at zero; such cells
        # have no valid replications and are reported as invalid
        if any(c < 0 for c in self.c_grid) or any(c < 0 for c in self.test_c.values()):
            raise InvalidConfig("bandwidth constants must be nonnegative")
        if self.n < 2 or self.validation_size < 2:
            raise InvalidConfig("need n >= 2 and N >= 2")

    @property
    def validation_size(self) -> int:
        if self.N is not None:
            return int(self.N)
        return int(round(self.ratio * self.n))


@dataclass(frozen=True)
class McRow:
    test: str
    model: str
    p: int
    n: int
    N: int
    a: float
    c: float
    reps: int
    reject_rate: float
    mean_stat: float
    sd_stat: float
    failures: int
    valid: bool = True

    def as_csv_fields(self) -> list[str]:
        return [self.test, self.model, str(self.p), str(self.n), str(self.N), _fmt(self.a), _fmt(self.c),
                str(self.reps), _fmt(self.reject_rate), _fmt(self.mean_stat), _fmt(self.sd_stat),
                str(self.failures)]


def _fmt(v: float) -> str:
    return f"{v:.10g}"


@dataclass
class McResult:
    rows: list[McRow] = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def extend(self, other: "McResult") -> None:
        self.rows.extend(other.rows)

    def select(self, **criteria) -> list[McRow]:
        out = []
        for row in self.rows:
            if all(_matches(getattr(row, k), v) for k, v in criteria.items()):
                out.append(row)
        return out

    def rate(self, **criteria) -> float:
        rows = self.select(**criteria)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows match {criteria}")
        return rows[0].reject_rate

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow(row.as_csv_fields())
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def _matches(value, wanted) -> bool:
    if isinstance(value, float):
        return math.isclose(value, wanted, rel_tol=0, abs_tol=1e-12)
    return value == wanted


def _zigzag(k: int) -> int:
    return 2 * k if k >= 0 else -2 * k - 1


def replication_stream(config: McConfig, a: float, rep: int) -> tuple[int, ...]:
    spec = config.spec
    sigma_code = 0 if spec.sigma_choice == "identity" else 1
    return (MODEL_IDS.index(spec.model_id), spec.p, config.n, config.validation_size,
            _zigzag(int(round(a * 1_000_000))), sigma_code, rep)


def _test_constant(config: McConfig, test: str, c: float) -> float:
    return config.test_c.get(test, c)


def _replicate(job):
    """Run one replication for every (c, test) cell. Returns standardized values (None on failure)."""
    config, a, rep = job
    spec = replace(config.spec, a=a)
    n, N = config.n, config.validation_size
    cells = [(c, t) for c in config.c_grid for t in config.tests]
    data = generate(spec, n, N, config.seed, replication_stream(config, a, rep))
    try:
        fitted = fit_null(data.primary, data.validation, spec.link)
    except NumericalError:
        return [None] * len(cells)
    out = []
    for c, t in cells:
        k = _test_constant(config, t, c)
        if k <= 0:
            out.append(None)
            continue
        try:
            res = run_test(data.primary, data.validation, spec.link, BandwidthPlan(k, k), config.alpha, t,
                           config.critical_convention, fitted=fitted)
            out.append((res.standardized, res.reject))
        except NumericalError:
            out.append(None)
    return out


def _map(jobs: list, workers: int) -> list:
    if workers <= 1:
        return [_replicate(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (8 * workers))))


def run_mc(config: McConfig, workers: int = 1) -> McResult:
    """Empirical rejection rates for every (a, c, test) cell of the config.

    Output depends only on the config: replications are seeded
    individually and aggregated in replication order whatever ``workers`` is.
    """
    jobs = [(config, a, rep) for a in config.a_grid for rep in range(config.reps)]
    outcomes = _map(jobs, workers)
    cells = [(c, t) for c in config.c_grid for t in config.tests]
    spec = config.spec
    result = McResult()
    for ai, a in enumerate(config.a_grid):
        block = outcomes[ai * config.reps:(ai + 1) * config.reps]
        for ci, (c, t) in enumerate(cells):
            vals = [r[ci] for r in block if r[ci] is not None]
            failures = config.reps - len(vals)
            stats_ = np.array([v[0] for v in vals])
            rejections = sum(1 for v in vals if v[1])
            ok = len(vals)
            valid = failures <= MAX_FAILURE_FRACTION * config.reps
            if not valid:
                log.warning("cell test=%s a=%g c=%g has %d failed replications of %d", t, a, c, failures,
                            config.reps)
            result.rows.append(McRow(
                test=t, model=spec.model_id, p=spec.p, n=config.n, N=config.validation_size, a=float(a),
                c=float(_test_constant(config, t, c)), reps=ok,
                reject_rate=rejections / ok if ok else float("nan"),
                mean_stat=float(stats_.mean()) if ok else float("nan"),
                sd_stat=float(stats_.std(ddof=1)) if ok > 1 else 0.0,
                failures=failures, valid=valid,
            ))
    return result


def bandwidth_sweep(config: McConfig, workers: int = 1) -> McResult:
    """Empirical size over the bandwidth-constant grid."""
    if any(a != 0 for a in config.a_grid):
        raise InvalidConfig("a bandwidth sweep measures size: the a grid must be {0}")
    return run_mc(config, workers)


def power_curve(config: McConfig, models: Sequence[str] = ("H16", "H17", "H18", "H19"),
                workers: int = 1) -> McResult:
    """Power over the a grid for each model, at each model's default dimension.

    The Zheng test uses the per-model constant from POWER_CURVE_ZHENG_C
    unless ``config.test_c`` sets one.
    """
    result = McResult()
    for m in models:
        p = POWER_CURVE_P.get(m, config.spec.p)
        spec = replace(config.spec, model_id=m, p=p)
        test_c = dict(config.test_c)
        if m in POWER_CURVE_ZHENG_C:
            test_c.setdefault("zheng", POWER_CURVE_ZHENG_C[m])
        result.extend(run_mc(replace(config, spec=spec, test_c=test_c), workers))
    return result


def parse_range(text: str) -> tuple[float, ...]:
    """Parse ``start:end:step`` (inclusive end) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidConfig(f"expected start:end:step, got {text!r}")
        start, end, step = (float(x) for x in parts)
        if step <= 0 or end < start:
            raise InvalidConfig(f"bad range {text!r}")
        count = int(math.floor((end - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(count))
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise InvalidConfig(f"cannot parse number list {text!r}") from None


def plot_script(result: McResult, x: str, title: str, data_name: str = "curve") -> str:
    """A self-contained gnuplot script drawing one line per (test, model, p, n) group.

    ``x`` is the row attribute on the horizontal axis, "c" or "a".
    """
    if x not in ("c", "a"):
        raise ValueError("x must be 'c' or 'a'")
    groups: dict[tuple, list[McRow]] = {}
    for row in result.rows:
        groups.setdefault((row.test, row.model, row.p, row.n), []).append(row)
    lines = [f"set title {title!r}", f"set xlabel '{x}'", "set ylabel 'rejection rate'",
             "set yrange [0:1]", "set key outside right", ""]
    plots = []
    for k, ((test, model, p, n), rows) in enumerate(groups.items()):
        block = f"${data_name}{k}"
        lines.append(f"{block} << EOD")
        for row in sorted(rows, key=lambda r: getattr(r, x)):
            lines.append(f"{_fmt(getattr(row, x))} {_fmt(row.reject_rate)}")
        lines.append("EOD")
        plots.append(f"{block} using 1:2 with linespoints title '{test} {model} p={p} n={n}'")
    lines.append("")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def write_plot_script(result: McResult, directory, name: str, x: str, title: str) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"{name}.gp")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(plot_script(result, x, title))
    return path


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def rows_for(result: McResult, tests: Iterable[str]) -> list[McRow]:
    wanted = set(tests)
    return [r for r in result.rows if r.test in wanted]
