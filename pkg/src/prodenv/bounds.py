"""Rationalizability tests and sharp counterfactual bounds.

Finitely many (price ray, profit) pairs for one productivity type are
rationalizable by some production set exactly when there exist quantity
vectors y_p, one per observed ray, making every observed profit attained and
no cross-ray improvement possible (the weak axiom of profit maximization):

    p . y_p  = pi(p)           for every observed p,
    p*. y_p* >= p* . y_p       for every pair p, p*.

All counterfactual bounds are linear programs over these constraints plus
the counterfactual tuple (p_c, y_c).  Infinite bounds are legitimate
answers (limited price variation cannot always pin profits down) and are
returned as +/-inf with solver certificates, never raised.

The LP engine (HiGHS via scipy) uses a deterministic pivot order, so results
are reproducible across runs; grid sweeps parallelize over rays when the
PRODENV_THREADS environment variable allows it.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import NumericFailure, ValidationError
from .geometry import (FEAS_TOL, HalfspaceEnvelope, PriceRay,
                       free_disposal_hull, support_value)

VALUE_TIE_TOL = 1e-9


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("PRODENV_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class ProfitData:
    """Observed (unit price ray, profit) pairs for one type."""

    e: int
    rays: np.ndarray          # (k, d) unit rows, distinct
    values: np.ndarray        # (k,)

    def __post_init__(self):
        rays = np.atleast_2d(np.asarray(self.rays, dtype=float)).copy()
        values = np.atleast_1d(np.asarray(self.values, dtype=float)).copy()
        if rays.shape[0] != values.size or rays.shape[0] == 0:
            raise ValueError("need one value per ray, at least one pair")
        if np.any(np.abs(np.linalg.norm(rays, axis=1) - 1.0) > 1e-9):
            raise ValueError("price rays must be unit vectors")
        keys = {tuple(np.round(r, 12)) for r in rays}
        if len(keys) != rays.shape[0]:
            raise ValueError("price rays must be distinct")
        rays.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "rays", rays)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_pairs(cls, e: int, pairs: Sequence[tuple]) -> "ProfitData":
        rays = np.vstack([
            p.components if isinstance(p, PriceRay) else np.asarray(p, float)
            for p, _ in pairs])
        vals = np.array([float(v) for _, v in pairs])
        return cls(e=e, rays=rays, values=vals)

    @property
    def k(self) -> int:
        return self.rays.shape[0]

    @property
    def dimension(self) -> int:
        return self.rays.shape[1]

    def envelope(self) -> HalfspaceEnvelope:
        return HalfspaceEnvelope(self.rays, self.values)

    def with_pair(self, ray, value: float) -> "ProfitData":
        rv = ray.components if isinstance(ray, PriceRay) else np.asarray(ray, float)
        return ProfitData(self.e, np.vstack([self.rays, rv]),
                          np.append(self.values, float(value)))

    def index_of(self, ray) -> Optional[int]:
        rv = ray.components if isinstance(ray, PriceRay) else np.asarray(ray, float)
        close = np.all(np.abs(self.rays - rv) < 1e-12, axis=1)
        hits = np.nonzero(close)[0]
        return int(hits[0]) if hits.size else None


def _fmt_bound(v: float):
    if np.isposinf(v):
        return "+inf"
    if np.isneginf(v):
        return "-inf"
    return float(v)


@dataclass(frozen=True)
class BoundResult:
    """Sharp identified interval for one counterfactual question."""

    lower: float
    upper: float
    feasible: bool = True
    lower_certificate: Optional[dict] = None
    upper_certificate: Optional[dict] = None
    argmax_rays: tuple = ()        # lower-bound maximizing rays (ties reported)
    grid_metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.feasible and np.isfinite(self.lower) and np.isfinite(self.upper)
                and self.lower > self.upper + 1e-7):
            raise NumericFailure(
                f"bound inversion: lower {self.lower} > upper {self.upper}")

    def contains(self, v: float, tol: float = 1e-7) -> bool:
        return self.lower - tol <= v <= self.upper + tol

    def to_json_dict(self, question: str = "", e: Optional[int] = None) -> dict:
        def cert(c):
            if c is None:
                return None
            return {k: (list(map(float, np.atleast_1d(v))) if not isinstance(v, str) else v)
                    for k, v in c.items()}
        return {
            "schema": "prodenv.bounds-report/1",
            "type": e,
            "question": question,
            "feasible": self.feasible,
            "lower": _fmt_bound(self.lower),
            "upper": _fmt_bound(self.upper),
            "lower_certificate": cert(self.lower_certificate),
            "upper_certificate": cert(self.upper_certificate),
            "argmax_rays": [list(map(float, r)) for r in self.argmax_rays],
            "grid": self.grid_metadata,
        }


# ---------------------------------------------------------------------------
# WAPM feasibility
# ---------------------------------------------------------------------------


def _wapm_system(data: ProfitData, sign_caps: Sequence[int] = ()):
    """Equality/inequality matrices of the WAPM system in stacked y_p."""
    k, d = data.k, data.dimension
    nv = k * d
    A_eq = np.zeros((k, nv))
    for i in range(k):
        A_eq[i, i * d:(i + 1) * d] = data.rays[i]
    b_eq = data.values.copy()
    rows_ub, rhs_ub = [], []
    for i in range(k):              # p_i . y_j <= pi_i  for j != i
        for j in range(k):
            if i == j:
                continue
            row = np.zeros(nv)
            row[j * d:(j + 1) * d] = data.rays[i]
            rows_ub.append(row)
            rhs_ub.append(data.values[i])
    for coord in sign_caps:         # optional input-sign restriction y[coord] <= 0
        for j in range(k):
            row = np.zeros(nv)
            row[j * d + coord] = 1.0
            rows_ub.append(row)
            rhs_ub.append(0.0)
    A_ub = np.vstack(rows_ub) if rows_ub else None
    b_ub = np.array(rhs_ub) if rows_ub else None
    return A_eq, b_eq, A_ub, b_ub


def wapm_feasible(data: ProfitData, sign_caps: Sequence[int] = ()
                  ) -> tuple[bool, Optional[dict]]:
    """Can any production set generate these profits?  Returns the verdict
    and, when feasible, a certificate assignment {ray index: y_p}."""
    A_eq, b_eq, A_ub, b_ub = _wapm_system(data, sign_caps)
    res = linprog(np.zeros(data.k * data.dimension), A_ub=A_ub, b_ub=b_ub,
                  A_eq=A_eq, b_eq=b_eq,
                  bounds=[(None, None)] * (data.k * data.dimension),
                  method="highs")
    if res.status == 0:
        d = data.dimension
        cert = {i: np.asarray(res.x[i * d:(i + 1) * d]) for i in range(data.k)}
        return True, cert
    if res.status == 2:
        return False, None
    raise NumericFailure(f"WAPM feasibility LP failed: {res.message}")


# ---------------------------------------------------------------------------
# Profit bounds at a counterfactual price
# ---------------------------------------------------------------------------


def profit_bounds(data: ProfitData, p_c, sign_caps: Sequence[int] = ()) -> BoundResult:
    """Sharp bounds on profit at a counterfactual unit price.

    Upper: support of the data envelope at p_c (may be +inf).  Lower: best
    over observed rays p of the least value of p_c . y on the profit-attaining
    face {y : p . y = pi(p)} of the envelope (may be -inf).  For an off-sphere
    counterfactual price, bound at p_c/|p_c| and rescale by |p_c|.
    """
    feasible, _ = wapm_feasible(data, sign_caps)
    if not feasible:
        raise ValidationError("profit data violate WAPM; bounds are undefined")
    pc = p_c.components if isinstance(p_c, PriceRay) else np.asarray(p_c, float)
    env = data.envelope()
    if sign_caps:
        extra = np.zeros((len(sign_caps), data.dimension))
        for r, coord in enumerate(sign_caps):
            extra[r, coord] = 1.0
        env = HalfspaceEnvelope(np.vstack([env.normals, extra]),
                                np.append(env.offsets, np.zeros(len(sign_caps))))

    sup = support_value(env, pc)
    upper = sup.value
    upper_cert = ({"y": sup.maximizer} if sup.finite
                  else {"ray": sup.direction, "note": "unbounded direction"})

    lows = np.empty(data.k)
    lo_certs: list[Optional[dict]] = []
    for i in range(data.k):
        res = linprog(pc, A_ub=env.normals, b_ub=env.offsets,
                      A_eq=data.rays[i][None, :], b_eq=[data.values[i]],
                      bounds=[(None, None)] * data.dimension, method="highs")
        if res.status == 0:
            lows[i] = float(pc @ res.x)
            lo_certs.append({"y": np.asarray(res.x), "ray": data.rays[i]})
        elif res.status == 3:
            lows[i] = -np.inf
            lo_certs.append({"ray": _descent_certificate(env, data.rays[i], pc),
                             "note": "unbounded direction"})
        else:
            raise NumericFailure(f"face LP failed at ray {i}: {res.message}")
    best = float(np.max(lows))
    ties = [i for i in range(data.k) if lows[i] >= best - VALUE_TIE_TOL]
    lower_cert = lo_certs[ties[0]]
    return BoundResult(
        lower=best, upper=upper,
        lower_certificate=lower_cert, upper_certificate=upper_cert,
        argmax_rays=tuple(data.rays[i] for i in ties) if np.isfinite(best) else (),
    )


def _descent_certificate(env: HalfspaceEnvelope, face_ray: np.ndarray,
                         pc: np.ndarray) -> np.ndarray:
    """Feasible direction along the face with the objective decreasing."""
    d = env.dimension
    res = linprog(pc, A_ub=env.normals, b_ub=np.zeros(env.num_constraints),
                  A_eq=face_ray[None, :], b_eq=[0.0],
                  bounds=[(-1.0, 1.0)] * d, method="highs")
    if res.status != 0 or pc @ res.x >= -FEAS_TOL:
        raise NumericFailure("unbounded face LP without a descent certificate")
    w = np.asarray(res.x)
    return w / np.linalg.norm(w)


# ---------------------------------------------------------------------------
# Quantity bounds at a counterfactual price
# ---------------------------------------------------------------------------


def _counterfactual_system(data: ProfitData, pc: np.ndarray,
                           sign_caps: Sequence[int] = (),
                           fixed_coord: Optional[tuple] = None):
    """Constraint system in (y_c, y_p stacked): WAPM on observed rays plus
    the counterfactual bundle dominated at observed rays and maximal at p_c.
    The counterfactual profit p_c . y_c is left free (not pinned)."""
    k, d = data.k, data.dimension
    nv = (k + 1) * d                       # y_c first, then y_p blocks
    A_eq, b_eq = [], []
    for i in range(k):
        row = np.zeros(nv)
        row[(i + 1) * d:(i + 2) * d] = data.rays[i]
        A_eq.append(row)
        b_eq.append(data.values[i])
    rows_ub, rhs_ub = [], []
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            row = np.zeros(nv)
            row[(j + 1) * d:(j + 2) * d] = data.rays[i]
            rows_ub.append(row)
            rhs_ub.append(data.values[i])
    for i in range(k):                     # p_i . y_c <= pi_i
        row = np.zeros(nv)
        row[:d] = data.rays[i]
        rows_ub.append(row)
        rhs_ub.append(data.values[i])
    for j in range(k):                     # p_c . y_j - p_c . y_c <= 0
        row = np.zeros(nv)
        row[(j + 1) * d:(j + 2) * d] = pc
        row[:d] = -pc
        rows_ub.append(row)
        rhs_ub.append(0.0)
    for coord in sign_caps:
        for blk in range(k + 1):
            row = np.zeros(nv)
            row[blk * d + coord] = 1.0
            rows_ub.append(row)
            rhs_ub.append(0.0)
    if fixed_coord is not None:
        coord, val = fixed_coord
        row = np.zeros(nv)
        row[coord] = 1.0
        A_eq.append(row)
        b_eq.append(float(val))
    return np.vstack(A_eq), np.array(b_eq), np.vstack(rows_ub), np.array(rhs_ub), nv


def _solve_pair(c: np.ndarray, A_eq, b_eq, A_ub, b_ub, nv: int
                ) -> tuple[float, float, Optional[np.ndarray], Optional[np.ndarray], bool]:
    """(min, max) of c . v over the system; returns values, optimizers, and
    a feasibility flag.  Unbounded sides come back as -inf/+inf."""
    out = []
    for sign in (1.0, -1.0):
        res = linprog(sign * c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=[(None, None)] * nv, method="highs")
        if res.status == 0:
            out.append((sign * res.fun, np.asarray(res.x)))
        elif res.status == 3:
            out.append((-np.inf if sign > 0 else np.inf, None))
        elif res.status == 2:
            return np.nan, np.nan, None, None, False
        else:
            raise NumericFailure(f"counterfactual LP failed: {res.message}")
    (lo, x_lo), (hi, x_hi) = out
    return float(lo), float(hi), x_lo, x_hi, True


def quantity_bounds(data: ProfitData, p_c, u,
                    sign_caps: Sequence[int] = ()) -> BoundResult:
    """Sharp bounds on u . y_c where y_c is the bundle chosen at the
    counterfactual price p_c (its profit is not pinned)."""
    feasible, _ = wapm_feasible(data, sign_caps)
    if not feasible:
        raise ValidationError("profit data violate WAPM; bounds are undefined")
    pc = p_c.components if isinstance(p_c, PriceRay) else np.asarray(p_c, float)
    uv = np.asarray(u, dtype=float)
    A_eq, b_eq, A_ub, b_ub, nv = _counterfactual_system(data, pc, sign_caps)
    c = np.zeros(nv)
    c[:data.dimension] = uv
    lo, hi, x_lo, x_hi, ok = _solve_pair(c, A_eq, b_eq, A_ub, b_ub, nv)
    if not ok:
        raise NumericFailure("counterfactual system infeasible despite WAPM holding")
    d = data.dimension
    return BoundResult(
        lower=lo, upper=hi,
        lower_certificate={"y_c": x_lo[:d]} if x_lo is not None else None,
        upper_certificate={"y_c": x_hi[:d]} if x_hi is not None else None,
    )


def profit_bounds_fixed_quantity(data: ProfitData, coord: int, ybar: float,
                                 ray_grid: Sequence,
                                 sign_caps: Sequence[int] = ()) -> BoundResult:
    """Bounds on profit when one bundle coordinate is pinned at ybar and the
    counterfactual price is free on a ray grid.

    Each grid ray contributes an LP; the reported interval is the sup of the
    per-ray maxima and the inf of the per-ray minima, a conservative-from-
    below discretization of the quadratic free-price program.  An empty
    feasible set at every grid ray is a legitimate (infeasible) outcome.
    """
    feasible, _ = wapm_feasible(data, sign_caps)
    if not feasible:
        raise ValidationError("profit data violate WAPM; bounds are undefined")
    rays = [r.components if isinstance(r, PriceRay) else np.asarray(r, float)
            for r in ray_grid]
    if not rays:
        raise ValueError("ray grid must be nonempty")

    def solve_one(pc: np.ndarray):
        A_eq, b_eq, A_ub, b_ub, nv = _counterfactual_system(
            data, pc, sign_caps, fixed_coord=(coord, ybar))
        c = np.zeros(nv)
        c[:data.dimension] = pc
        return _solve_pair(c, A_eq, b_eq, A_ub, b_ub, nv)

    cap = thread_cap()
    if cap > 1:
        with ThreadPoolExecutor(max_workers=cap) as pool:
            results = list(pool.map(solve_one, rays))
    else:
        results = [solve_one(pc) for pc in rays]

    best_hi, best_lo = -np.inf, np.inf
    hi_ray = lo_ray = None
    hi_cert = lo_cert = None
    any_feasible = False
    for pc, (lo, hi, x_lo, x_hi, ok) in zip(rays, results):
        if not ok:
            continue
        any_feasible = True
        if hi > best_hi:
            best_hi, hi_ray = hi, pc
            hi_cert = ({"y_c": x_hi[:data.dimension], "p_c": pc}
                       if x_hi is not None else {"p_c": pc, "note": "unbounded"})
        if lo < best_lo:
            best_lo, lo_ray = lo, pc
            lo_cert = ({"y_c": x_lo[:data.dimension], "p_c": pc}
                       if x_lo is not None else {"p_c": pc, "note": "unbounded"})
    meta = {"n_rays": len(rays), "coord": coord, "ybar": ybar,
            "n_feasible": int(sum(1 for r in results if r[4]))}
    if not any_feasible:
        return BoundResult(lower=np.nan, upper=np.nan, feasible=False,
                           grid_metadata=meta)
    return BoundResult(lower=best_lo, upper=best_hi,
                       lower_certificate=lo_cert, upper_certificate=hi_cert,
                       argmax_rays=(hi_ray,) if hi_ray is not None else (),
                       grid_metadata=meta)


# ---------------------------------------------------------------------------
# Brute-force oracle (d = 2, few rays)
# ---------------------------------------------------------------------------


def _face_intervals(data: ProfitData) -> Optional[list[tuple[float, float]]]:
    """Feasible parameter interval per profit-attaining face.

    On face i, y_i(t) = pi_i p_i + t tau_i with tau_i the 90-degree rotation
    of p_i; the cross constraints p_j . y_i <= pi_j are linear in t.  An
    empty interval means no WAPM assignment exists.  Cross constraints do not
    couple faces because each equality pins p_j . y_j at pi_j.
    """
    intervals = []
    for i in range(data.k):
        p_i, v_i = data.rays[i], data.values[i]
        tau = np.array([-p_i[1], p_i[0]])
        base = v_i * p_i
        lo, hi = -np.inf, np.inf
        for j in range(data.k):
            if j == i:
                continue
            a = float(data.rays[j] @ tau)
            rhs = data.values[j] - float(data.rays[j] @ base)
            if abs(a) < 1e-14:
                if rhs < -1e-9:
                    return None
                continue
            if a > 0:
                hi = min(hi, rhs / a)
            else:
                lo = max(lo, rhs / a)
        if lo > hi + 1e-9:
            return None
        intervals.append((lo, hi))
    return intervals


def brute_force_bounds(data: ProfitData, p_c, resolution: int = 50) -> BoundResult:
    """Independent enumeration oracle for profit bounds in d = 2.

    Parametrizes each face by one scalar, enumerates assignments {y_p} on a
    dense product grid (step at most 2/resolution in each parameter), checks
    the WAPM constraints directly, and takes the extremes of the implied
    counterfactual profit max_p (p_c . y_p) -- the support of each
    assignment's free-disposal hull at p_c.
    """
    if data.dimension != 2:
        raise ValueError("brute_force_bounds supports d = 2 only")
    if data.k > 4:
        raise ValueError("brute_force_bounds supports at most 4 rays")
    if resolution < 2:
        raise ValidationError("resolution too coarse for the enumeration oracle")
    pc = p_c.components if isinstance(p_c, PriceRay) else np.asarray(p_c, float)

    intervals = _face_intervals(data)
    if intervals is None:
        return BoundResult(lower=np.nan, upper=np.nan, feasible=False,
                           grid_metadata={"reason": "no feasible assignment found"})

    taus = np.column_stack([-data.rays[:, 1], data.rays[:, 0]])   # (k, 2)
    bases = data.values[:, None] * data.rays                       # (k, 2)
    slopes = taus @ pc                                             # d f_i / d t
    offsets = bases @ pc

    # Analytic per-face extremes of f_i(t) = offsets[i] + slopes[i] * t.
    sups, infs = np.empty(data.k), np.empty(data.k)
    for i, (lo, hi) in enumerate(intervals):
        s = slopes[i]
        cands = []
        for end in (lo, hi):
            if np.isfinite(end):
                cands.append(offsets[i] + s * end)
        sup_i = max(cands) if cands else -np.inf
        inf_i = min(cands) if cands else np.inf
        if s > 1e-14 and np.isposinf(hi):
            sup_i = np.inf
        if s < -1e-14 and np.isneginf(lo):
            sup_i = np.inf
        if s > 1e-14 and np.isneginf(lo):
            inf_i = -np.inf
        if s < -1e-14 and np.isposinf(hi):
            inf_i = -np.inf
        if abs(s) <= 1e-14:
            sup_i = inf_i = offsets[i]
        sups[i], infs[i] = sup_i, inf_i

    # Dense-grid enumeration over the (truncated) box as the direct check;
    # endpoints are on the grid, and each f_i is linear, so finite extremes
    # are hit exactly.
    step = 2.0 / resolution
    grids = []
    span_cap = 4.0 * (1.0 + float(np.max(np.abs(data.values))))
    for (lo, hi) in intervals:
        lo_t = lo if np.isfinite(lo) else min(-span_cap, (hi if np.isfinite(hi) else 0.0) - span_cap)
        hi_t = hi if np.isfinite(hi) else max(span_cap, (lo if np.isfinite(lo) else 0.0) + span_cap)
        n = max(2, int(np.ceil((hi_t - lo_t) / step)) + 1)
        grids.append(np.linspace(lo_t, hi_t, n))
    mesh = np.meshgrid(*grids, indexing="ij")
    tt = np.stack([m.ravel() for m in mesh], axis=1)               # (N, k)
    f = offsets[None, :] + tt * slopes[None, :]                    # (N, k)
    # Feasibility audit of the sampled assignments (belt and braces).
    ok = np.ones(tt.shape[0], dtype=bool)
    for j in range(data.k):
        y_j = bases[j][None, :] + tt[:, j][:, None] * taus[j][None, :]
        ok &= np.all(y_j @ data.rays.T <= data.values[None, :] + 1e-7, axis=1)
    if not np.any(ok):
        return BoundResult(lower=np.nan, upper=np.nan, feasible=False,
                           grid_metadata={"reason": "no feasible assignment found"})
    vals = np.max(f[ok], axis=1)
    emp_hi, emp_lo = float(vals.max()), float(vals.min())
    upper = np.inf if np.any(np.isposinf(sups)) else emp_hi
    lower = -np.inf if np.all(np.isneginf(infs)) else emp_lo

    i_hi = int(np.argmax(vals))
    idx_hi = np.nonzero(ok)[0][i_hi]
    assign_hi = bases + tt[idx_hi][:, None] * taus
    return BoundResult(
        lower=lower, upper=upper,
        upper_certificate={"assignment": assign_hi.ravel()},
        grid_metadata={"resolution": resolution,
                       "grid_sizes": [len(g) for g in grids]},
    )


def project_rationalizable(data: ProfitData, max_iter: int = 10,
                           tol: float = 1e-9) -> tuple[ProfitData, float]:
    """Minimal downward repair of estimated profits onto rationalizability.

    Data are rationalizable exactly when every constraint of their envelope
    is tight (the observed value equals the envelope's support there).
    Estimated tables miss tightness by their recovery error; replacing each
    value with its envelope support and iterating to a fixpoint yields a
    consistent table.  Returns the repaired data and the largest shift.
    """
    values = data.values.copy()
    shift = 0.0
    for _ in range(max_iter):
        env = HalfspaceEnvelope(data.rays, values)
        new = np.array([support_value(env, r).value for r in data.rays])
        if not np.all(np.isfinite(new)):
            raise NumericFailure("projection produced an unbounded support")
        delta = float(np.max(np.abs(new - values)))
        shift = max(shift, float(np.max(np.abs(new - data.values))))
        values = new
        if delta <= tol:
            break
    return ProfitData(data.e, data.rays, values), shift


def sharpness_check(data: ProfitData, p_c, upper: float) -> bool:
    """A finite upper bound is attainable: appending (p_c, upper) keeps the
    dataset rationalizable (its free-disposal hull generates the bound)."""
    if not np.isfinite(upper):
        return True
    feasible, _ = wapm_feasible(data.with_pair(p_c, upper))
    return feasible


def rationalizing_hull(certificate: dict) -> HalfspaceEnvelope:
    """Free-disposal hull of a WAPM certificate's quantity vectors."""
    pts = np.vstack([np.asarray(v) for v in certificate.values()])
    return free_disposal_hull(pts)
