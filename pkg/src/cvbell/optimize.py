"""Search for CHSH-maximizing settings and sweeps over the squeezing parameter.

Every correlation is bilinear in the two measurement directions,
E(a, b) = a . T b with T[i, j] = <s_i (x) s_j>, so the search works on the
3x3 correlation tensor and only the reported values go back through the full
state.  The search result is then put in a canonical form: the optimum of the
CHSH value is a continuous family of settings, and the representative with
the lexicographically smallest canonical angle tuple is constructed in closed
form from the singular value decomposition of T.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import os

import numpy as np
from scipy.optimize import minimize

from cvbell.bell import (
    CIRELSON,
    BellSettings,
    bell_expectation,
    correlation_tensor,
    nopa_max_analytic,
)
from cvbell.fock import MeasurementDirection
from cvbell.states import DEFAULT_TAIL_TOL, TwoModeState, nopa_state_auto

DEGENERACY_TOL = 1e-10
_Z = np.array([0.0, 0.0, 1.0])
_X = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class SearchOptions:
    grid_points: int = 33
    objective_tol: float = 1e-9
    max_evaluations: int = 20_000

    def __post_init__(self):
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if self.objective_tol <= 0:
            raise ValueError("objective_tol must be positive")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be >= 1")


@dataclass(frozen=True)
class OptimumReport:
    settings: BellSettings
    value: float
    analytic_value: float
    gap: float
    r: float | None
    pair_count: int
    evaluations: int
    search_value: float | None = None

    def as_dict(self) -> dict:
        out = {
            "r": self.r,
            "value": self.value,
            "analytic_value": self.analytic_value,
            "gap": self.gap,
            "pair_count": self.pair_count,
            "evaluations": self.evaluations,
            "search_value": self.search_value,
        }
        out.update(self.settings.as_dict())
        return out


@dataclass(frozen=True)
class SweepRow:
    r: float
    K: float
    theta_b_star: float
    bell_max_analytic: float
    bell_max_numeric: float
    pair_count: int
    tail_mass: float

    FIELDS = ("r", "K", "theta_b_star", "bell_max_analytic", "bell_max_numeric", "pair_count", "tail_mass")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


def bell_from_tensor(tensor: np.ndarray, angles) -> float:
    """CHSH value a.T(b + b') + a'.T(b - b') from eight (theta, phi) angles."""
    a, a2, b, b2 = (_unit(angles[2 * i], angles[2 * i + 1]) for i in range(4))
    return float(a @ tensor @ (b + b2) + a2 @ tensor @ (b - b2))


def _unit(theta, phi) -> np.ndarray:
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])


def tensor_bound(tensor: np.ndarray) -> float:
    """Largest CHSH value for any settings: 2 sqrt(s1^2 + s2^2) over singular values of T."""
    s = np.linalg.svd(tensor, compute_uv=False)
    return 2.0 * math.sqrt(s[0] ** 2 + s[1] ** 2)


def _grid_search(tensor: np.ndarray, grid_points: int) -> tuple[np.ndarray, float, int]:
    thetas = np.linspace(0.0, math.pi, grid_points, endpoint=False)
    u = np.stack([np.sin(thetas), np.zeros_like(thetas), np.cos(thetas)], axis=1)
    g = u @ tensor @ u.T  # g[i, j] = E(theta_i, theta_j)
    # chsh[i, k, j, l] = g[i,j] + g[i,l] + g[k,j] - g[k,l]  for (a, a', b, b')
    chsh = (g[:, None, :, None] + g[:, None, None, :] + g[None, :, :, None] - g[None, :, None, :])
    flat = int(np.argmax(chsh))  # first maximum in C order: lexicographically smallest index
    i, k, j, l = np.unravel_index(flat, chsh.shape)
    angles = np.array([thetas[i], 0.0, thetas[k], 0.0, thetas[j], 0.0, thetas[l], 0.0])
    return angles, float(chsh.flat[flat]), chsh.size


def _refine(tensor: np.ndarray, start: np.ndarray, step: float, options: SearchOptions):
    simplex = np.vstack([start] + [start + step * e for e in np.eye(start.size)])
    result = minimize(
        lambda x: -bell_from_tensor(tensor, x),
        start,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "fatol": options.objective_tol,
            "xatol": 1e-10,
            "maxfev": options.max_evaluations,
        },
    )
    return result.x, -float(result.fun), int(result.nfev)


def _lexmin_on_circle(normal: np.ndarray) -> np.ndarray:
    """Unit vector with smallest (theta, phi) on the great circle orthogonal to ``normal``."""
    n = normal / np.linalg.norm(normal)
    w = _Z - (_Z @ n) * n
    if np.linalg.norm(w) > 1e-12:
        return w / np.linalg.norm(w)
    # the circle is the equator; phi = 0 is on it
    w = _X - (_X @ n) * n
    return w / np.linalg.norm(w)


def _key(vectors) -> tuple:
    out = []
    for v in vectors:
        d = MeasurementDirection.from_vector(v)
        out.extend((round(d.theta, 12), round(d.phi, 12)))
    return tuple(out)


def _settings_from_vectors(vectors) -> BellSettings:
    return BellSettings(*(MeasurementDirection.from_vector(v) for v in vectors))


def _normalized(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def lexmin_optimal_settings(tensor: np.ndarray) -> BellSettings:
    """Optimal CHSH settings for correlation tensor T with the smallest angle tuple.

    With T = sum_i s_i u_i v_i^T, any optimum has b + b' along c and b - b'
    along d for an orthonormal pair (c, d) spanning a top-two right singular
    subspace, a along T c and a' along T d.  Choosing a first, then a',
    minimizes the canonical tuple (theta_a, phi_a, theta_a', ...) greedily.
    """
    u, s, vt = np.linalg.svd(tensor)
    v = vt.T
    tol = DEGENERACY_TOL

    if s[1] <= tol:
        # rank <= 1: only one of (a, a') carries weight; the other is free
        if s[0] <= tol:
            return _settings_from_vectors([_Z, _Z, _Z, _Z])
        candidates = []
        for sign in (1.0, -1.0):
            c = sign * v[:, 0]
            candidates.append([sign * u[:, 0], _Z, c, c])
            candidates.append([_Z, sign * u[:, 0], c, -c])
        return _settings_from_vectors(min(candidates, key=_key))

    if s[1] - s[2] > tol:
        # top-two right singular subspace is a unique plane; T maps it onto span(u1, u2)
        a = _lexmin_on_circle(np.cross(u[:, 0], u[:, 1]))
        c = _normalized((u[:, 0] @ a) / s[0] * v[:, 0] + (u[:, 1] @ a) / s[1] * v[:, 1])
        e = _normalized(np.cross(np.cross(v[:, 0], v[:, 1]), c))
        d_options = [e, -e]
    else:
        # s2 == s3 > 0: T is invertible and any direction is reachable by a
        a = _Z
        c = _normalized(np.linalg.solve(tensor, a))
        if s[0] - s[1] > tol:
            # admissible planes contain v1
            e = v[:, 0] - (v[:, 0] @ c) * c
            if np.linalg.norm(e) > 1e-9:
                e = _normalized(e)
                d_options = [e, -e]
            else:
                a_prime = _lexmin_on_circle(np.cross(u[:, 1], u[:, 2]))
                d_options = [_normalized(np.linalg.solve(tensor, a_prime))]
        else:
            # fully degenerate: any d orthogonal to c
            basis = np.linalg.svd(c[None, :])[2][1:]
            a_prime = _lexmin_on_circle(np.cross(tensor @ basis[0], tensor @ basis[1]))
            d_options = [_normalized(np.linalg.solve(tensor, a_prime))]

    candidates = []
    tc = np.linalg.norm(tensor @ c)
    for d in d_options:
        td = np.linalg.norm(tensor @ d)
        a_prime = _normalized(tensor @ d)
        norm = math.hypot(tc, td)
        b = (tc * c + td * d) / norm
        b_prime = (tc * c - td * d) / norm
        candidates.append([a, a_prime, b, b_prime])
    return _settings_from_vectors(min(candidates, key=_key))


def optimize_settings(state: TwoModeState, options: SearchOptions | None = None) -> OptimumReport:
    """Two-stage search over the eight CHSH angles, then canonicalization.

    Stage one scans ``grid_points`` polar angles per direction with azimuths
    at zero; stage two refines all eight angles with Nelder-Mead.  The
    reported settings are the lexicographically smallest optimal ones; they
    replace the refined point only when at least as good.
    """
    options = options or SearchOptions()
    tensor = correlation_tensor(state)
    start, _, grid_evals = _grid_search(tensor, options.grid_points)
    step = math.pi / options.grid_points
    refined, search_value, nfev = _refine(tensor, start, step, options)

    settings = lexmin_optimal_settings(tensor)
    if bell_from_tensor(tensor, settings.angles()) < search_value - options.objective_tol:
        settings = BellSettings.from_angles(*refined[0::2], *refined[1::2])

    value = bell_expectation(state, settings).value
    if state.squeezing is not None:
        analytic = nopa_max_analytic(state.squeezing)
    else:
        analytic = tensor_bound(tensor)
    return OptimumReport(
        settings=settings,
        value=value,
        analytic_value=analytic,
        gap=abs(value - analytic),
        r=state.squeezing,
        pair_count=state.space1.pair_count,
        evaluations=grid_evals + nfev,
        search_value=search_value,
    )


def canonical_optimum(r: float, tail_tol: float = DEFAULT_TAIL_TOL) -> OptimumReport:
    """Closed-form optimum theta_b = arctan K of the canonical family, checked numerically."""
    state = nopa_state_auto(r, tail_tol)
    k = math.tanh(2 * r)
    settings = BellSettings.canonical(math.atan(k))
    value = bell_expectation(state, settings).value
    analytic = nopa_max_analytic(r)
    return OptimumReport(settings, value, analytic, abs(value - analytic), float(r),
                         state.space1.pair_count, evaluations=4)


def _sweep_row(r: float, tail_tol: float) -> SweepRow:
    state = nopa_state_auto(r, tail_tol)
    k = math.tanh(2 * r)
    theta_b = math.atan(k)
    numeric = bell_expectation(state, BellSettings.canonical(theta_b)).value
    return SweepRow(float(r), k, theta_b, nopa_max_analytic(r), numeric,
                    state.space1.pair_count, state.tail_mass)


def worker_count(default: int = 1) -> int:
    raw = os.environ.get("WORKER_COUNT")
    if raw is None or raw == "":
        return default
    n = int(raw)
    if n < 1:
        raise ValueError(f"WORKER_COUNT must be a positive integer, got {raw!r}")
    return n


def violation_curve(r_values, tail_tol: float = DEFAULT_TAIL_TOL, workers: int | None = None) -> list[SweepRow]:
    """One row per r, in input order, truncation chosen per row from ``tail_tol``."""
    r_values = [float(r) for r in r_values]
    for r in r_values:
        if not math.isfinite(r) or r < 0:
            raise ValueError(f"squeezing parameter must be finite and >= 0, got {r}")
    workers = workers or worker_count()
    if workers == 1 or len(r_values) < 2:
        return [_sweep_row(r, tail_tol) for r in r_values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: _sweep_row(r, tail_tol), r_values))


@dataclass(frozen=True)
class LimitPoint:
    r: float
    deficit: float  # 2 sqrt 2 - numeric maximum
    asymptote: float  # 2 sqrt 2 exp(-4r), the leading term of the deficit
    ratio: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ratio", self.deficit / self.asymptote)


def epr_limit(r_values=(1, 2, 3, 4, 5), tail_tol: float = DEFAULT_TAIL_TOL) -> list[LimitPoint]:
    """Distance of the numeric maximum from 2 sqrt 2 along increasing r.

    1 - tanh 2r ~ 2 exp(-4r), so the deficit ~ sqrt(2) (1 - K) ~ 2 sqrt(2) exp(-4r).
    """
    rows = violation_curve(r_values, tail_tol)
    return [LimitPoint(row.r, CIRELSON - row.bell_max_numeric, CIRELSON * math.exp(-4 * row.r)) for row in rows]
