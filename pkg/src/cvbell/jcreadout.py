"""Atom-chain readout of a cavity observable through Jaynes-Cummings steps.

A sequence of two-level atoms crosses the cavity one at a time, each coupled
resonantly for a dimensionless pulse area gt = g t_I.  Composite ordering is
field (x) atom_1 (x) ... (x) atom_N with the field most significant; the atom
basis is (|g>, |e>).

Two atomic approximants to a field observable A are available:

* ``projection``: the normalized partial trace over the field of the full
  Heisenberg-evolved operator, i.e. the Frobenius-closest I (x) M on the
  whole composite space.  Its relative distance is the completeness residual.
* ``subspace``: the Frobenius-closest M on the states the experiment actually
  prepares, |f> (x) |atoms>, found by linear least squares.  This is the
  default readout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp

from cvbell.fock import FockSpace, Operator

ATOM_DIM = 2
GROUND = np.array([1.0, 0.0], dtype=complex)
EXCITED = np.array([0.0, 1.0], dtype=complex)
MAX_ATOMS = 12
MAX_COMPOSITE_DIM = 4096
TRAPPING_TOL = 1e-6
TOP_WEIGHT_TOL = 1e-10
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
ESTIMATORS = ("subspace", "projection")


def _check_chain_size(field_space: FockSpace, n_atoms: int):
    if not 1 <= n_atoms <= MAX_ATOMS:
        raise ValueError(f"atom count must lie in [1, {MAX_ATOMS}], got {n_atoms}")
    dim = field_space.dimension * ATOM_DIM ** n_atoms
    if dim > MAX_COMPOSITE_DIM:
        raise ValueError(f"composite dimension {dim} exceeds the limit {MAX_COMPOSITE_DIM}")


@dataclass(frozen=True, eq=False)
class ReadoutChainConfig:
    atom_count: int
    coupling: float
    field_space: FockSpace
    atom_initial: tuple = None

    def __post_init__(self):
        _check_chain_size(self.field_space, self.atom_count)
        if not (math.isfinite(self.coupling) and self.coupling > 0):
            raise ValueError(f"coupling g*t_I must be finite and > 0, got {self.coupling}")
        initial = self.atom_initial
        if initial is None:
            initial = (GROUND,) * self.atom_count
        initial = tuple(np.asarray(v, dtype=complex).reshape(-1) for v in initial)
        if len(initial) != self.atom_count:
            raise ValueError(f"expected {self.atom_count} atomic states, got {len(initial)}")
        for v in initial:
            if v.shape != (ATOM_DIM,) or abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
                raise ValueError("each atomic initial state must be a normalized 2-vector")
        object.__setattr__(self, "atom_initial", initial)

    def atoms_vector(self, n: int | None = None) -> np.ndarray:
        """Product state of the first ``n`` atoms (all by default)."""
        n = self.atom_count if n is None else n
        out = np.ones(1, dtype=complex)
        for v in self.atom_initial[:n]:
            out = np.kron(out, v)
        return out


@dataclass(frozen=True)
class CompletenessReport:
    observable_label: str
    residuals: list[float]
    m_a_estimates: list[np.ndarray] = field(repr=False)
    trapping_warnings: list[str]


@dataclass(frozen=True)
class ReadoutRow:
    n: int
    estimate: float
    target: float
    abs_error: float
    residual: float
    trapping_flag: bool


def jc_generator(field_space: FockSpace) -> Operator:
    """a^dag sigma + a sigma^dag on field (x) atom, with sigma = |g><e|."""
    d = field_space.dimension
    a = sp.diags_array(np.sqrt(np.arange(1, d, dtype=float)), offsets=1, shape=(d, d))
    sigma = sp.csr_array(np.array([[0.0, 1.0], [0.0, 0.0]]))
    term = sp.kron(a.T, sigma)
    return Operator(term + term.T, (d, ATOM_DIM), "H_JC")


def _step_tensor(field_space: FockSpace, gt: float) -> np.ndarray:
    """exp(-i gt H_JC) as a (d, 2, d, 2) array.

    Excitation sector k couples |k, e> and |k+1, g> with strength sqrt(k+1).
    The top state |d-1, e> has no partner inside the truncation and is left
    unchanged, which is exactly the exponential of the truncated generator.
    """
    d = field_space.dimension
    u = np.zeros((d, ATOM_DIM, d, ATOM_DIM), dtype=complex)
    u[0, 0, 0, 0] = 1.0
    u[d - 1, 1, d - 1, 1] = 1.0
    for k in range(d - 1):
        angle = gt * math.sqrt(k + 1)
        c, s = math.cos(angle), math.sin(angle)
        u[k, 1, k, 1] = c
        u[k + 1, 0, k + 1, 0] = c
        u[k, 1, k + 1, 0] = -1j * s
        u[k + 1, 0, k, 1] = -1j * s
    return u


def jc_step_unitary(field_space: FockSpace, gt: float) -> Operator:
    if not math.isfinite(gt):
        raise ValueError("gt must be finite")
    d = field_space.dimension
    mat = _step_tensor(field_space, gt).reshape(d * ATOM_DIM, d * ATOM_DIM)
    return Operator(mat, (d, ATOM_DIM), f"U_step(gt={gt:g})")


def _chain_stages(field_space: FockSpace, gt: float, n_max: int):
    """Yield the dense chain unitaries U_1, ..., U_{n_max}; atom 1 acts first."""
    d = field_space.dimension
    step = _step_tensor(field_space, gt)
    u = np.eye(d, dtype=complex)
    for n in range(1, n_max + 1):
        prev = ATOM_DIM ** (n - 1)
        u = np.kron(u, np.eye(ATOM_DIM))  # append atom n, initially untouched
        cols = u.shape[1]
        t = u.reshape(d, prev, ATOM_DIM, cols)
        u = np.einsum("asbt,bxtk->axsk", step, t).reshape(d * prev * ATOM_DIM, cols)
        yield u


def _chain_dense(field_space: FockSpace, gt: float, n: int) -> np.ndarray:
    _check_chain_size(field_space, n)
    for u in _chain_stages(field_space, gt, n):
        pass
    return u


def chain_unitary(config: ReadoutChainConfig, reverse_time: bool = False) -> Operator:
    """U_N = S_N ... S_1, each S_j a JC step on the field and atom j.

    ``reverse_time`` gives U_N(-t_I).
    """
    gt = -config.coupling if reverse_time else config.coupling
    u = _chain_dense(config.field_space, gt, config.atom_count)
    return Operator(u, (config.field_space.dimension,) + (ATOM_DIM,) * config.atom_count)


def trapping_warnings(field_space: FockSpace, gt: float, tol: float = TRAPPING_TOL) -> list[str]:
    """Sectors k <= 2M where gt sqrt(k) sits within ``tol`` of a multiple of pi."""
    out = []
    for k in range(1, field_space.dimension + 1):
        angle = abs(gt) * math.sqrt(k)
        distance = abs(angle - math.pi * round(angle / math.pi))
        if distance <= tol and round(angle / math.pi) != 0:
            out.append(f"trapping: k={k}, gt*sqrt(k)={angle:.10g} is {distance:.2e} from "
                       f"{round(angle / math.pi)}*pi")
    return out


def _field_operator(a, field_space: FockSpace) -> np.ndarray:
    mat = a.toarray() if isinstance(a, Operator) else np.asarray(a, dtype=complex)
    d = field_space.dimension
    if mat.shape != (d, d):
        raise ValueError(f"observable has shape {mat.shape}, expected ({d}, {d})")
    if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
        raise ValueError("observable must be Hermitian")
    return mat


def _heisenberg(u: np.ndarray, a: np.ndarray, atoms_dim: int) -> np.ndarray:
    # U^dag (A (x) I) U without forming the Kronecker product
    d = a.shape[0]
    au = np.einsum("ab,bxk->axk", a, u.reshape(d, atoms_dim, -1)).reshape(u.shape)
    return u.conj().T @ au


def _projection(h: np.ndarray, d: int, atoms_dim: int) -> tuple[np.ndarray, float]:
    m = np.einsum("iaib->ab", h.reshape(d, atoms_dim, d, atoms_dim)) / d
    diff = h.reshape(d, atoms_dim, d, atoms_dim) - np.einsum("ij,ab->iajb", np.eye(d), m)
    residual = float(np.linalg.norm(diff) / np.linalg.norm(h)) if np.linalg.norm(h) > 0 else 0.0
    return m, residual


def completeness_residual(field_space: FockSpace, a, gt: float, n_atoms: int,
                          label: str | None = None) -> CompletenessReport:
    """Relative distance of U_n^dag (A (x) I) U_n from the atoms-only operators, n = 1..N."""
    mat = _field_operator(a, field_space)
    _check_chain_size(field_space, n_atoms)
    d = field_space.dimension
    residuals, estimates = [], []
    for n, u in enumerate(_chain_stages(field_space, gt, n_atoms), start=1):
        m, res = _projection(_heisenberg(u, mat, ATOM_DIM ** n), d, ATOM_DIM ** n)
        residuals.append(res)
        estimates.append(m)
    if label is None:
        label = a.label if isinstance(a, Operator) and a.label else "A"
    return CompletenessReport(label, residuals, estimates, trapping_warnings(field_space, gt))


def _subspace_observable(w: np.ndarray, a: np.ndarray, atoms: np.ndarray) -> np.ndarray:
    """Least-squares M with V^dag (I (x) M) V closest to A, V = W (I (x) |atoms>)."""
    d = a.shape[0]
    n_atoms_dim = atoms.size
    v = np.einsum("kfa,a->kf", w.reshape(d * n_atoms_dim, d, n_atoms_dim), atoms)
    v = v.reshape(d, n_atoms_dim, d)  # [field out, atoms out, field in]
    lin = np.einsum("kaf,kbg->fgab", v.conj(), v).reshape(d * d, n_atoms_dim ** 2)
    sol = np.linalg.lstsq(lin, a.reshape(-1), rcond=None)[0].reshape(n_atoms_dim, n_atoms_dim)
    return (sol + sol.conj().T) / 2


def _check_field_state(field_state, field_space: FockSpace) -> np.ndarray:
    f = np.asarray(field_state, dtype=complex).reshape(-1)
    d = field_space.dimension
    if f.shape != (d,):
        raise ValueError(f"field state has length {f.size}, expected {d}")
    if abs(np.linalg.norm(f) - 1.0) > NORM_TOL:
        raise ValueError("field state must be normalized")
    top = float(np.sum(np.abs(f[-2:]) ** 2))
    if top > TOP_WEIGHT_TOL:
        raise ValueError(f"field state has weight {top:.3e} on the top two Fock levels "
                         f"(limit {TOP_WEIGHT_TOL}); enlarge the field space")
    return f


def readout_scan(field_state, a, config: ReadoutChainConfig, estimator: str = "subspace") -> list[ReadoutRow]:
    """Readout estimate of <f|A|f> after n = 1..N atoms.

    Each stage evolves |f> (x) |atoms> by W_n = U_n(-t_I)^dag and evaluates the
    atomic observable I (x) M_A.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
    space = config.field_space
    f = _check_field_state(field_state, space)
    mat = _field_operator(a, space)
    d = space.dimension
    target = float(np.vdot(f, mat @ f).real)
    flagged = bool(trapping_warnings(space, config.coupling))
    rows = []
    for n, u_rev in enumerate(_chain_stages(space, -config.coupling, config.atom_count), start=1):
        atoms_dim = ATOM_DIM ** n
        atoms = config.atoms_vector(n)
        # W (A (x) I) W^dag = U(-t)^dag (A (x) I) U(-t)
        m_proj, residual = _projection(_heisenberg(u_rev, mat, atoms_dim), d, atoms_dim)
        w = u_rev.conj().T
        m = m_proj if estimator == "projection" else _subspace_observable(w, mat, atoms)
        psi = (w @ np.kron(f, atoms)).reshape(d, atoms_dim)
        estimate = float(np.vdot(psi, psi @ m.T).real)
        rows.append(ReadoutRow(n, estimate, target, abs(estimate - target), residual, flagged))
    return rows


def readout_estimate(field_state, a, config: ReadoutChainConfig, estimator: str = "subspace") -> float:
    """Estimate of <f|A|f> from an atomic measurement after ``config.atom_count`` atoms."""
    return readout_scan(field_state, a, config, estimator)[-1].estimate
