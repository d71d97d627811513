"""Normalized two-mode pure states, chiefly the two-mode squeezed vacuum."""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
import scipy.sparse as sp

from cvbell.fock import FockSpace, make_space

NORM_TOL = 1e-12
DEFAULT_TAIL_TOL = 1e-12
# dimension 2e6 per mode; beyond this a sweep point is refused rather than swapped to disk
MAX_PAIR_COUNT = 1_000_000


@dataclass(frozen=True, eq=False)
class TwoModeState:
    """Coefficient matrix psi[n1, n2] of a normalized pure state.

    ``tail_mass`` is the probability weight discarded by truncation when it is
    known in closed form, else ``None``.  ``squeezing`` records r for states
    built by :func:`nopa_state`.
    """

    coefficients: sp.csr_array
    space1: FockSpace
    space2: FockSpace
    tail_mass: float | None = None
    squeezing: float | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return (self.space1.dimension, self.space2.dimension)

    def toarray(self) -> np.ndarray:
        return self.coefficients.toarray()

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients.data) ** 2)))

    def schmidt_coefficients(self) -> np.ndarray:
        """Singular values of psi, descending (dense; small spaces only)."""
        return np.linalg.svd(self.toarray(), compute_uv=False)

    def vector(self) -> np.ndarray:
        """Flattened state in the |n1> (x) |n2> ordering, n1 most significant."""
        return self.toarray().reshape(-1)


def _frozen_normalized(matrix) -> sp.csr_array:
    m = sp.csr_array(matrix, dtype=np.complex128, copy=True)
    m.sum_duplicates()
    m.eliminate_zeros()
    if m.nnz == 0:
        raise ValueError("state coefficients are identically zero")
    norm = np.sqrt(np.sum(np.abs(m.data) ** 2))
    m = m / norm
    m.data.setflags(write=False)
    return m


def nopa_tail_mass(r: float, pair_count: int) -> float:
    """Weight of the untruncated squeezed vacuum above level 2M: tanh(r)^(4M)."""
    if r == 0:
        return 0.0
    return math.exp(4 * pair_count * _log_tanh(r))


def _log_tanh(r: float) -> float:
    if r < 1.0:
        return math.log(math.tanh(r))
    # tanh r = (1 - q) / (1 + q) with q = exp(-2r); stays accurate when tanh r rounds to 1
    q = math.exp(-2.0 * r)
    return math.log1p(-q) - math.log1p(q)


def _check_r(r: float):
    if not math.isfinite(r) or r < 0:
        raise ValueError(f"squeezing parameter must be finite and >= 0, got {r}")


def required_pair_count(r: float, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    """Smallest M with tanh(r)^(4M) <= tail_tol."""
    _check_r(r)
    if not 0.0 < tail_tol < 1.0:
        raise ValueError(f"tail_tol must lie in (0, 1), got {tail_tol}")
    if r == 0:
        return 1
    log_t = _log_tanh(r)
    m = max(1, math.ceil(math.log(tail_tol) / (4.0 * log_t)))
    # guard the float division at the boundary
    while m > 1 and nopa_tail_mass(r, m - 1) <= tail_tol:
        m -= 1
    while nopa_tail_mass(r, m) > tail_tol:
        m += 1
    return m


def nopa_state(r: float, space1: FockSpace, space2: FockSpace | None = None) -> TwoModeState:
    """Truncated, renormalized sum_n tanh(r)^n / cosh(r) |n, n>."""
    _check_r(r)
    space2 = space1 if space2 is None else space2
    if space1.dimension != space2.dimension:
        raise ValueError(f"NOPA state needs equal spaces, got {space1.dimension} and {space2.dimension}")
    if space1.pair_count > MAX_PAIR_COUNT:
        raise ValueError(f"pair_count {space1.pair_count} exceeds the limit {MAX_PAIR_COUNT}")
    d = space1.dimension
    n = np.arange(d)
    if r == 0:
        diag = np.zeros(d)
        diag[0] = 1.0
    else:
        diag = np.exp(n * _log_tanh(r)) / math.cosh(r)
    coeffs = _frozen_normalized(sp.diags_array(diag.astype(complex), format="csr"))
    return TwoModeState(coeffs, space1, space2, nopa_tail_mass(r, space1.pair_count), float(r))


def nopa_state_auto(r: float, tail_tol: float = DEFAULT_TAIL_TOL) -> TwoModeState:
    space = make_space(required_pair_count(r, tail_tol))
    return nopa_state(r, space, space)


def from_coefficients(matrix, space1: FockSpace, space2: FockSpace) -> TwoModeState:
    """Renormalized copy of ``matrix``; the truncation tail is unknown."""
    if not sp.issparse(matrix):
        matrix = np.asarray(matrix)
    shape = matrix.shape
    if shape != (space1.dimension, space2.dimension):
        raise ValueError(f"coefficient shape {shape} does not match spaces "
                         f"({space1.dimension}, {space2.dimension})")
    return TwoModeState(_frozen_normalized(matrix), space1, space2, None, None)


def fock_product(n1: int, n2: int, space1: FockSpace, space2: FockSpace) -> TwoModeState:
    psi = sp.csr_array(([1.0], ([n1], [n2])), shape=(space1.dimension, space2.dimension))
    return from_coefficients(psi, space1, space2)


def random_state(rng: np.random.Generator, space1: FockSpace, space2: FockSpace) -> TwoModeState:
    """Haar-like random pure state (complex Gaussian coefficients)."""
    shape = (space1.dimension, space2.dimension)
    psi = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return from_coefficients(psi, space1, space2)
