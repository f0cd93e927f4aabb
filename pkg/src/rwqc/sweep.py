"""Parameter sweeps and the figure grids built from them.

A sweep is a Cartesian product of axes (first axis major) evaluated point by
point with :func:`rwqc.measures.report`.  Points may be farmed out to a process
pool; rows always come back in grid order, so output files are byte-identical
whatever the worker count.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import measures
from .errors import ValidationError
from .spectrum import CosmologyParams, ModeParams

PARAMETERS = ("epsilon", "rho", "mass", "momentum", "chi")
COLUMNS = ("epsilon", "rho", "mass", "momentum", "chi", "gamma_sq", "N_pk", "N_pmk", "I_pk",
           "I_pmk", "S_p", "S_k", "S_pk", "terms_used", "tail_bound")
FORMATS = ("csv", "json")
CANONICAL = {"epsilon": 10.0, "rho": 10.0, "mass": 1.0, "momentum": 1.0, "chi": 1 / math.sqrt(2)}


@dataclass(frozen=True)
class RunConfig:
    tol: float = measures.DEFAULT_TOL
    cutoff_cap: int = 512
    output: str | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.tol <= 1e-2:
            raise ValidationError(f"tol must lie in (0, 1e-2], got {self.tol!r}")
        if not 8 <= self.cutoff_cap <= 4096:
            raise ValidationError(f"cutoff cap must lie in [8, 4096], got {self.cutoff_cap!r}")


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int
    spacing: str = "log"

    def __post_init__(self):
        if self.name not in PARAMETERS:
            raise ValidationError(f"unknown sweep parameter {self.name!r}; expected one of {PARAMETERS}")
        if self.count < 2:
            raise ValidationError(f"axis {self.name}: count must be >= 2, got {self.count}")
        if self.spacing not in ("log", "linear"):
            raise ValidationError(f"axis {self.name}: spacing must be 'log' or 'linear'")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValidationError(f"axis {self.name}: bounds must be finite")
        if self.spacing == "log" and not (self.lo > 0 and self.hi > 0):
            raise ValidationError(f"axis {self.name}: log spacing needs positive bounds")

    @classmethod
    def parse(cls, text: str) -> "Axis":
        """``name:min:max:count[:log|linear]``"""
        parts = text.split(":")
        if len(parts) not in (4, 5):
            raise ValidationError(f"axis {text!r}: expected name:min:max:count[:log|linear]")
        try:
            lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError:
            raise ValidationError(f"axis {text!r}: non-numeric bound or count") from None
        return cls(parts[0], lo, hi, count, parts[4] if len(parts) == 5 else "log")

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)

    def describe(self) -> str:
        return f"{self.name}={self.spacing}[{self.lo!r},{self.hi!r}]x{self.count}"


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple
    fixed: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "csv"

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.axes:
            raise ValidationError("a sweep needs at least one axis")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValidationError(f"axis names repeated: {names}")
        clash = set(names) & set(self.fixed)
        if clash:
            raise ValidationError(f"parameters both swept and fixed: {sorted(clash)}")
        unknown = set(self.fixed) - set(PARAMETERS)
        if unknown:
            raise ValidationError(f"unknown fixed parameters {sorted(unknown)}")
        if self.format not in FORMATS:
            raise ValidationError(f"format must be one of {FORMATS}, got {self.format!r}")

    def points(self):
        """Full parameter dicts in grid order; unset parameters take canonical values."""
        base = dict(CANONICAL)
        base.update(self.fixed)
        grids = [a.values() for a in self.axes]
        for combo in itertools.product(*grids):
            p = dict(base)
            p.update({a.name: float(v) for a, v in zip(self.axes, combo)})
            yield p

    @property
    def size(self) -> int:
        return math.prod(a.count for a in self.axes)


def evaluate_point(params: dict, tol: float) -> tuple:
    mode = ModeParams(params["mass"], params["momentum"], params["chi"])
    cosmo = CosmologyParams(params["epsilon"], params["rho"])
    rep = measures.report(mode, cosmo, tol).to_dict()
    return tuple(rep[c] for c in COLUMNS)


def _evaluate_star(args):
    return evaluate_point(*args)


def worker_count() -> int:
    """Pool size: ``RWQC_THREADS`` if set, else the CPU count."""
    env = os.environ.get("RWQC_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"RWQC_THREADS must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ValidationError(f"RWQC_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def run_sweep(spec: SweepSpec, config: RunConfig = RunConfig(), workers: int | None = None):
    """Rows (tuples ordered as :data:`COLUMNS`) for every grid point, in grid order."""
    workers = worker_count() if workers is None else workers
    jobs = [(p, config.tol) for p in spec.points()]
    if workers <= 1 or len(jobs) < 2 * workers:
        return [_evaluate_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate_star, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def header_comment(spec: SweepSpec, config: RunConfig, rows, title: str = "sweep") -> str:
    fixed = dict(CANONICAL)
    fixed.update(spec.fixed)
    for a in spec.axes:
        fixed.pop(a.name, None)
    terms = [r[COLUMNS.index("terms_used")] for r in rows]
    tails = [r[COLUMNS.index("tail_bound")] for r in rows]
    return (
        f"{title}; axes: {', '.join(a.describe() for a in spec.axes)}; "
        f"fixed: {', '.join(f'{k}={v!r}' for k, v in sorted(fixed.items()))}; "
        f"tol={config.tol!r}; points={len(rows)}; "
        f"max_terms_used={max(terms) if terms else 0}; max_tail_bound={max(tails) if tails else 0.0!r}"
    )


def to_csv(rows, comment: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([repr(v) for v in row])
    return buf.getvalue()


def to_json(rows, comment: str, pretty: bool = False) -> str:
    doc = {"comment": comment, "columns": list(COLUMNS), "rows": [list(r) for r in rows]}
    return json.dumps(doc, indent=2 if pretty else None) + "\n"


def read_csv(path):
    """Parse a file written by :func:`to_csv` into ``(comment, {column: array})``."""
    with open(path, newline="") as fh:
        first = fh.readline()
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return first[2:].rstrip("\n"), {name: arr[:, i] for i, name in enumerate(header)}


# Figure grids.  Axis ranges are not given with the published plots; these are
# the defaults recorded in every file header.
_EPS_RHO = (Axis("epsilon", 0.1, 100.0, 60), Axis("rho", 0.1, 100.0, 60))
_FAMILY = (0.1, 10.0, 3)  # {0.1, 1, 10}


def _k_panels(prefix):
    return {
        f"{prefix}a": SweepSpec((Axis("epsilon", *_FAMILY), Axis("momentum", 0.01, 100.0, 200)),
                                {"rho": 10.0, "mass": 1.0}),
        f"{prefix}b": SweepSpec((Axis("rho", *_FAMILY), Axis("momentum", 0.01, 100.0, 200)),
                                {"epsilon": 10.0, "mass": 1.0}),
    }


def _m_panels(prefix, a="a", b="b"):
    return {
        f"{prefix}{a}": SweepSpec((Axis("epsilon", *_FAMILY), Axis("mass", 0.01, 100.0, 200)),
                                  {"rho": 10.0, "momentum": 1.0}),
        f"{prefix}{b}": SweepSpec((Axis("rho", *_FAMILY), Axis("mass", 0.01, 100.0, 200)),
                                  {"epsilon": 10.0, "momentum": 1.0}),
    }


def figure_specs(figure: int) -> dict:
    """Named sweep panels for figure ``1``..``8``."""
    if figure in (1, 4, 7):
        return {f"fig{figure}": SweepSpec(_EPS_RHO, {"mass": 1.0, "momentum": 1.0})}
    if figure == 2:
        return _k_panels("fig2")
    if figure == 3:
        return _m_panels("fig3")
    if figure in (5, 8):
        panels = _k_panels(f"fig{figure}")
        panels.update(_m_panels(f"fig{figure}", "c", "d"))
        return panels
    if figure == 6:
        return {"fig6": SweepSpec((Axis("chi", 0.0, 1.0, 101, "linear"),),
                                  {"epsilon": 10.0, "rho": 10.0, "momentum": 0.5, "mass": 1.0})}
    raise ValidationError(f"figure id must be in 1..8, got {figure!r}")


def write_figure(figure: int, outdir, config: RunConfig = RunConfig(), workers: int | None = None):
    """Write CSV and JSON mirror for each panel; returns the CSV paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for name, spec in figure_specs(figure).items():
        rows = run_sweep(spec, config, workers)
        comment = header_comment(spec, config, rows, title=name)
        csv_path = os.path.join(outdir, f"{name}.csv")
        with open(csv_path, "w", newline="") as fh:
            fh.write(to_csv(rows, comment))
        with open(os.path.join(outdir, f"{name}.json"), "w") as fh:
            fh.write(to_json(rows, comment))
        paths.append(csv_path)
    return paths
