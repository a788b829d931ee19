"""Scenario runner: exact versus Weyl-type kernels over an h-sweep, fits and tables."""

from __future__ import annotations

import configparser
import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .operators import (CoefficientField, DomainGeometry, OperatorSpec, PointPair, distances,
                        free_operator, linear_potential_operator)
from .spectra import (IntervalBasis, SpectralBasis, TaperSpec, ValidityCapError,
                      exact_projector_kernel, fd_sturm_liouville_basis, separable_2d_basis,
                      tauberian_kernel, tauberian_reach)
from .weyl import (correction_term, leading_magnitude, regime_classify, trivial_bound,
                   weyl_boundary, weyl_term)

SEED = 0x5EED
NA = None


class ConfigError(ValueError):
    pass


class RowError(RuntimeError):
    """A module error raised while computing one (h, pair) cell."""


# --------------------------------------------------------------------------
# scenarios
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    geom: DomainGeometry
    make_operator: Callable[[float], OperatorSpec]
    make_basis: Callable[["ExperimentConfig", float, float], SpectralBasis]

    def operator(self, cfg: "ExperimentConfig") -> OperatorSpec:
        return self.make_operator(cfg.alpha)


def _box_product(L1, L2, bc):
    def make(cfg, h, e_max):
        b1 = IntervalBasis.up_to(L1, bc, h, e_max)
        b2 = IntervalBasis.up_to(L2, bc, h, e_max)
        return separable_2d_basis(b1, b2, e_max)
    return make


def _linear_box(L1, L2, bc):
    def make(cfg, h, e_max):
        V = CoefficientField.linear([cfg.alpha])
        c = (h * cfg.grid_n / L1) ** 2
        # trust only the bottom tenth of the FD spectrum, but never solve for more than needed
        frac = min(0.1, 1.5 * (e_max + 1.0) / (4 * c))
        b1 = fd_sturm_liouville_basis(L1, bc, h, V, cfg.grid_n, cap_fraction=frac)
        b2 = IntervalBasis.up_to(L2, bc, h, e_max)
        return separable_2d_basis(b1, b2, e_max)
    return make


SCENARIOS: dict[str, Scenario] = {}


def _register(s: Scenario) -> None:
    SCENARIOS[s.name] = s


_register(Scenario(
    "free_box", "h^2 Laplacian on the box [0, pi]^2, Dirichlet, closed-form eigenbasis",
    DomainGeometry("box", (math.pi, math.pi), "dirichlet"),
    lambda alpha: free_operator(2), _box_product(math.pi, math.pi, "dirichlet")))
_register(Scenario(
    "free_box_neumann", "h^2 Laplacian on the box [0, pi]^2, Neumann, closed-form eigenbasis",
    DomainGeometry("box", (math.pi, math.pi), "neumann"),
    lambda alpha: free_operator(2), _box_product(math.pi, math.pi, "neumann")))
_register(Scenario(
    "linear_box", "h^2 D_1^2 + alpha x_1 + h^2 D_2^2 on [0, 1.5] x [0, pi], Dirichlet, "
    "finite-difference x closed-form eigenbasis",
    DomainGeometry("box", (1.5, math.pi), "dirichlet"),
    lambda alpha: linear_potential_operator(alpha, 2), _linear_box(1.5, math.pi, "dirichlet")))


def list_scenarios() -> list[tuple[str, str]]:
    return [(s.name, s.description) for s in SCENARIOS.values()]


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    tau: float = 1.0
    h_sweep: tuple = (0.04, 0.02, 0.01, 0.005)
    t_policy: str = "multiple"  # "multiple" (T = t_value * ell) or "fixed" (T = t_value)
    t_value: float = 4.0
    t_floor: float = 8.0  # T >= t_floor * h
    t_cap: Optional[float] = None
    pairs: tuple = ()
    sampler: Optional[str] = None  # interior | near_boundary | graded
    n_pairs: int = 3
    sampler_sigma: float = 0.2
    ell_range: tuple = (0.05, 0.5)
    delta: float = 0.05
    c0: float = 1.0
    alpha: float = 0.5
    grid_n: int = 4000
    eps0: float = 0.1
    c_trivial: Optional[float] = None
    tauberian: bool = True
    correction: bool = True
    output: Optional[str] = None
    format: str = "csv"
    seed: int = SEED
    threads: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; see list-scenarios")
        hs = tuple(float(v) for v in self.h_sweep)
        object.__setattr__(self, "h_sweep", hs)
        if len(hs) < 4:
            raise ConfigError("h_sweep needs at least 4 entries")
        if any(b >= a for a, b in zip(hs, hs[1:])) or hs[-1] <= 0:
            raise ConfigError("h_sweep must be positive and strictly decreasing")
        if self.t_policy not in ("multiple", "fixed"):
            raise ConfigError("t_policy must be 'multiple' or 'fixed'")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if not self.pairs and self.sampler is None:
            raise ConfigError("give explicit pairs or a sampler")
        if self.sampler not in (None, "interior", "near_boundary", "graded"):
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if not 0 < self.delta < 1 / 6:
            raise ConfigError("delta must lie in (0, 1/6)")

    def T_for(self, ell: float, h: float) -> float:
        T = self.t_value * ell if self.t_policy == "multiple" else self.t_value
        T = max(T, self.t_floor * h)
        if self.t_cap is not None:
            T = min(T, self.t_cap)
        return T


def _floats(s: str) -> list[float]:
    return [float(v) for v in s.replace(";", ",").split(",") if v.strip()]


def _parse_pair(s: str) -> tuple:
    parts = s.split(";")
    if len(parts) != 2:
        raise ConfigError(f"pair {s!r} must read 'x1, x2 ; y1, y2'")
    x, y = (_floats(p) for p in parts)
    if len(x) != len(y):
        raise ConfigError(f"pair {s!r} mixes dimensions")
    return (tuple(x), tuple(y))


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


_FIELDS = {
    "scenario": str, "tau": float, "h_sweep": lambda s: tuple(_floats(s)),
    "t_policy": str, "t_value": float, "t_floor": float, "t_cap": float,
    "sampler": str, "n_pairs": int, "sampler_sigma": float,
    "ell_range": lambda s: tuple(_floats(s)), "delta": float, "c0": float,
    "alpha": float, "grid_n": int, "eps0": float, "c_trivial": float,
    "tauberian": _bool, "correction": _bool, "output": str, "format": str,
    "seed": lambda s: int(s, 0), "threads": int,
}


def load_config(path) -> ExperimentConfig:
    """Read a ``key = value`` file with optional [sections]; ``#`` starts a comment.

    Sections only group keys.  Explicit point pairs are keys starting with
    ``pair`` whose values read ``x1, x2 ; y1, y2``.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",),
                                   interpolation=None)
    cp.optionxform = str
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.lstrip().startswith("["):
        text = "[main]\n" + text
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    kw: dict = {}
    pairs = []
    for sec in cp.sections():
        for key, val in cp.items(sec):
            if key.startswith("pair"):
                pairs.append((key, _parse_pair(val)))
            elif key in _FIELDS:
                try:
                    kw[key] = _FIELDS[key](val)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key}: {val!r}") from exc
            else:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
    if pairs:
        kw["pairs"] = tuple(p for _, p in sorted(pairs, key=lambda kv: _pair_order(kv[0])))
    if "scenario" not in kw:
        raise ConfigError("config needs a scenario")
    return ExperimentConfig(**kw)


def _pair_order(key: str):
    digits = "".join(ch for ch in key if ch.isdigit())
    return (int(digits) if digits else 0, key)


# --------------------------------------------------------------------------
# point pairs
# --------------------------------------------------------------------------

def sample_pairs(cfg: ExperimentConfig) -> list[PointPair]:
    """Explicit pairs, or ``n_pairs`` drawn by the configured sampler (seeded)."""
    if cfg.pairs:
        return [PointPair(np.array(x), np.array(y)) for x, y in cfg.pairs]
    geom = SCENARIOS[cfg.scenario].geom
    L = np.asarray(geom.lengths, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.ell_range
    out = []
    for k in range(cfg.n_pairs):
        if cfg.sampler == "graded":
            ell0 = lo * (hi / lo) ** (k / max(cfg.n_pairs - 1, 1))
        else:
            ell0 = rng.uniform(lo, hi)
        ang = rng.uniform(0, 2 * math.pi)
        step = ell0 * np.array([math.cos(ang), math.sin(ang)])
        if cfg.sampler == "near_boundary":
            # both points within sigma * ell of the wall x_1 = 0
            x = np.array([rng.uniform(0, cfg.sampler_sigma * ell0), rng.uniform(1.0, L[1] - 1.0)])
            y = x + np.array([0.0, ell0])
            y[0] = rng.uniform(0, cfg.sampler_sigma * ell0)
        else:
            # both points at least 0.3 from every wall
            x = rng.uniform(0.3 + ell0, L - 0.3 - ell0)
            y = x + step
        out.append(PointPair(x, y))
    return out


# --------------------------------------------------------------------------
# rows
# --------------------------------------------------------------------------

COLUMNS = ["h", "pair", "x1", "x2", "y1", "y2", "ell", "ell0", "nu_x", "nu_y", "regime", "T",
           "e_exact", "e_tauberian", "e_weyl", "e_weyl_boundary", "e_corrected",
           "err_weyl", "err_weyl_boundary", "err_corrected", "err_tauberian",
           "envelope_trivial", "envelope_leading"]


def _row(cfg: ExperimentConfig, scen: Scenario, op: OperatorSpec, basis: SpectralBasis,
         h: float, k: int, pair: PointPair) -> dict:
    geom = scen.geom
    dist = distances(pair, geom)
    tag = regime_classify(pair, h, cfg.delta, geom, cfg.c0)
    tau = cfg.tau
    d = op.d
    interior_ell = dist.ell0 if tag.case.value in ("interior",) else dist.ell
    T = cfg.T_for(dist.ell0, h)
    e = exact_projector_kernel(basis, pair.x, pair.y, tau)
    et = tauberian_kernel(basis, TaperSpec(T), pair.x, pair.y, tau, h) if cfg.tauberian else NA
    ew = weyl_term(op, pair.x, pair.y, tau, h)
    ewb = weyl_boundary(op, pair, tau, h, geom) if geom.has_boundary else NA
    ec = NA
    if cfg.correction and geom.has_boundary and d == 2 and ewb is not NA:
        ec = ewb + _correction(op, pair, tau, h, geom)
    row = {
        "h": h, "pair": k, "x1": float(pair.x[0]), "x2": float(pair.x[1]),
        "y1": float(pair.y[0]), "y2": float(pair.y[1]),
        "ell": dist.ell, "ell0": dist.ell0, "nu_x": dist.nu_x, "nu_y": dist.nu_y,
        "regime": tag.case.value, "T": T,
        "e_exact": e, "e_tauberian": et, "e_weyl": ew, "e_weyl_boundary": ewb, "e_corrected": ec,
        "err_weyl": abs(e - ew),
        "err_weyl_boundary": NA if ewb is NA else abs(e - ewb),
        "err_corrected": NA if ec is NA else abs(e - ec),
        "err_tauberian": NA if et is NA else abs(e - et),
        "envelope_trivial": trivial_bound(interior_ell, h, d),
        "envelope_leading": leading_magnitude(interior_ell, h, d) if interior_ell > 0 else NA,
    }
    return row


def _correction(op, pair, tau, h, geom) -> float:
    """Correction term in the frame of the face nearest the pair."""
    from .weyl import pair_wall
    axis, side = pair_wall(pair, geom)
    m, c = geom.wall_frame(axis, side, op.d)
    # x_old = m x_new + c with m a signed permutation, so x_new = m^T (x_old - c)
    local = PointPair(m.T @ (pair.x - c), m.T @ (pair.y - c))
    return correction_term(op.mapped(m, c), local, tau, h, geom.boundary_condition)


def check_tau(cfg: ExperimentConfig) -> None:
    """Reject configurations whose tau (plus smoothing reach) exceeds the basis range."""
    if cfg.tau <= 0:
        raise ConfigError("tau must be positive")


def _energy_needed(cfg: ExperimentConfig, h: float, pairs) -> float:
    e_max = cfg.tau
    if cfg.tauberian:
        T_min = min(cfg.T_for(float(np.linalg.norm(p.x - p.y)), h) for p in pairs)
        e_max = tauberian_reach(cfg.tau, h, T_min)
    return e_max


def run_scenario(cfg: ExperimentConfig, threads: Optional[int] = None) -> list[dict]:
    """One row per (h, pair), ordered by the h-sweep then pair index."""
    scen = SCENARIOS[cfg.scenario]
    op = scen.operator(cfg)
    pairs = sample_pairs(cfg)
    for k, p in enumerate(pairs):
        if not scen.geom.contains(p.x) or not scen.geom.contains(p.y):
            raise ConfigError(f"pair {k} lies outside the domain")
    check_tau(cfg)
    bases = {}
    for h in cfg.h_sweep:
        e_max = _energy_needed(cfg, h, pairs)
        try:
            bases[h] = scen.make_basis(cfg, h, e_max)
        except ValidityCapError as exc:
            raise ConfigError(f"tau = {cfg.tau} outside basis validity at h = {h}: {exc}") from exc
    cells = [(i, h, k, p) for i, h in enumerate(cfg.h_sweep) for k, p in enumerate(pairs)]

    def work(cell):
        i, h, k, p = cell
        try:
            return (i, k), _row(cfg, scen, op, bases[h], h, k, p)
        except Exception as exc:
            raise RowError(f"row h = {h}, pair {k}: {type(exc).__name__}: {exc}") from exc

    n = threads or cfg.threads or 1
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(c) for c in cells]
    return [row for _, row in sorted(results, key=lambda kv: kv[0])]


# --------------------------------------------------------------------------
# fits and calibration
# --------------------------------------------------------------------------

def fit_slope(xs, ys) -> tuple[float, float, float]:
    """Least squares of log y on log x: (slope, intercept, r^2)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3 or xs.size != ys.size:
        raise ValueError("fit_slope needs at least 3 matching points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("fit_slope needs positive data")
    lx, ly = np.log(xs), np.log(ys)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ np.array([slope, icpt])
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(resid @ resid) / ss_tot
    return float(slope), float(icpt), r2


def calibrate_constant(rows, envelope_field: str = "envelope_trivial",
                       error_field: str = "err_weyl_boundary") -> float:
    """max over rows of |err| / envelope (rows with NA are skipped)."""
    ratios = [r[error_field] / r[envelope_field] for r in rows
              if r.get(error_field) is not NA and r.get(envelope_field) not in (NA, 0)
              and math.isfinite(r[envelope_field])]
    if not rows:
        raise ValueError("no rows to calibrate on")
    return max(ratios, default=0.0)


@dataclass
class InvariantReport:
    passed: bool
    messages: list = field(default_factory=list)
    c_trivial: float = 0.0


def check_invariants(rows, cfg: ExperimentConfig) -> InvariantReport:
    """Finite values, the trivial-bound envelope, the regime column and the Tauberian sandwich."""
    msgs = []
    geom = SCENARIOS[cfg.scenario].geom
    for r in rows:
        for col in COLUMNS:
            v = r[col]
            if isinstance(v, float) and not math.isfinite(v) and col != "envelope_trivial":
                msgs.append(f"h = {r['h']}, pair {r['pair']}: {col} is not finite")
        pair = PointPair(np.array([r["x1"], r["x2"]]), np.array([r["y1"], r["y2"]]))
        if regime_classify(pair, r["h"], cfg.delta, geom, cfg.c0).case.value != r["regime"]:
            msgs.append(f"h = {r['h']}, pair {r['pair']}: regime column inconsistent")
    err_field = "err_weyl_boundary" if geom.has_boundary else "err_weyl"
    c = cfg.c_trivial if cfg.c_trivial is not None else calibrate_constant(rows, error_field=err_field)
    for r in rows:
        if r[err_field] is not NA and r[err_field] > c * r["envelope_trivial"] * (1 + 1e-12):
            msgs.append(f"h = {r['h']}, pair {r['pair']}: trivial bound violated "
                        f"({r[err_field]:.4g} > {c:.4g} x envelope)")
    if cfg.tauberian:
        for k in sorted({r["pair"] for r in rows}):
            # every scenario is two-dimensional, so h^{d-1} = h
            stat = [r["err_tauberian"] * r["T"] * r["h"] for r in rows if r["pair"] == k]
            stat = [s for s in stat if s > 0]
            if len(stat) >= 2 and max(stat) / min(stat) > 4:
                msgs.append(f"pair {k}: Tauberian statistic varies by {max(stat) / min(stat):.2f} > 4")
    return InvariantReport(not msgs, msgs, c)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is NA:
        return "NA"
    if isinstance(v, float):
        return repr(v)  # shortest round-trip representation
    return str(v)


def emit(rows, path, fmt: str = "csv", columns=None) -> None:
    """Write rows as CSV (NA for missing) or a JSON array of objects (null for missing)."""
    if not rows:
        raise ValueError("nothing to emit")
    columns = columns or list(rows[0].keys())
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in columns])
    elif fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([{c: r[c] for c in columns} for r in rows], fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError("format must be csv or json")


def read_csv(path) -> list[dict]:
    """Inverse of ``emit(..., 'csv')`` for numeric tables."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if v == "NA":
                    row[k] = NA
                else:
                    try:
                        row[k] = int(v)
                    except ValueError:
                        try:
                            row[k] = float(v)
                        except ValueError:
                            row[k] = v
            out.append(row)
    return out


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})


def default_output(cfg: ExperimentConfig) -> str:
    return cfg.output or os.path.join(os.getcwd(), f"{cfg.scenario}.{cfg.format}")
