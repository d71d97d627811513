"""Truncated single-mode Fock space and the parity-spin operators.

The Hilbert space of one bosonic mode is cut at an even dimension 2M so that
every parity pair {|2n>, |2n+1>} is kept whole.  On such a space the
pseudospin triple (s_x, s_y, s_z) obeys the spin-1/2 algebra exactly, so all
truncation error lives in the states and never in the operators.

Basis ordering is |0>, |1>, ..., |2M-1> throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp

HERMITIAN_TOL = 1e-14


@dataclass(frozen=True)
class FockSpace:
    """Truncated single-mode space of dimension ``2 * pair_count``."""

    pair_count: int

    def __post_init__(self):
        if isinstance(self.pair_count, bool) or not isinstance(self.pair_count, (int, np.integer)):
            raise TypeError(f"pair_count must be an integer, got {self.pair_count!r}")
        if self.pair_count < 1:
            raise ValueError(f"pair_count must be >= 1, got {self.pair_count}")

    @property
    def dimension(self) -> int:
        return 2 * int(self.pair_count)


@dataclass(frozen=True, eq=False)
class Operator:
    """Immutable sparse matrix tagged with its subsystem dimensions.

    ``dims`` lists the tensor factors in order (field first, then atoms for
    the readout chain); the matrix acts on their Kronecker product.
    """

    matrix: sp.csr_array
    dims: tuple[int, ...]
    label: str = ""
    _dense: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        m = sp.csr_array(self.matrix, dtype=np.complex128, copy=True)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.data.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        n = int(np.prod(self.dims))
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match dims {self.dims}")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def toarray(self) -> np.ndarray:
        if not self._dense:
            arr = self.matrix.toarray()
            arr.setflags(write=False)
            self._dense.append(arr)
        return self._dense[0]

    def dagger(self) -> Operator:
        return Operator(self.matrix.conj().T, self.dims, f"{self.label}^dag" if self.label else "")

    def hermitian_residual(self) -> float:
        return max_abs(self.matrix - self.matrix.conj().T)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return self.hermitian_residual() <= tol

    def __matmul__(self, other: Operator) -> Operator:
        _check_dims(self, other)
        return Operator(self.matrix @ other.matrix, self.dims)

    def __add__(self, other: Operator) -> Operator:
        _check_dims(self, other)
        return Operator(self.matrix + other.matrix, self.dims)

    def __sub__(self, other: Operator) -> Operator:
        _check_dims(self, other)
        return Operator(self.matrix - other.matrix, self.dims)

    def __mul__(self, scalar) -> Operator:
        return Operator(self.matrix * complex(scalar), self.dims)

    __rmul__ = __mul__


def _check_dims(a: Operator, b: Operator):
    if a.dims != b.dims:
        raise ValueError(f"operator dimensions differ: {a.dims} vs {b.dims}")


def max_abs(matrix) -> float:
    """Largest entrywise modulus of a dense or sparse matrix (0 for empty)."""
    if sp.issparse(matrix):
        matrix = sp.csr_array(matrix)
        return float(np.abs(matrix.data).max()) if matrix.nnz else 0.0
    matrix = np.asarray(matrix)
    return float(np.abs(matrix).max()) if matrix.size else 0.0


def max_abs_diff(a, b) -> float:
    """Entrywise max |a - b| for operators, sparse or dense matrices."""
    a = a.matrix if isinstance(a, Operator) else a
    b = b.matrix if isinstance(b, Operator) else b
    if sp.issparse(a) and sp.issparse(b):
        return max_abs(a - b)
    return max_abs(_dense(a) - _dense(b))


def _dense(m) -> np.ndarray:
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def kron(*ops: Operator) -> Operator:
    """Tensor product, first factor most significant."""
    mat = ops[0].matrix
    dims = list(ops[0].dims)
    for op in ops[1:]:
        mat = sp.kron(mat, op.matrix, format="csr")
        dims.extend(op.dims)
    return Operator(mat, tuple(dims))


@dataclass(frozen=True)
class MeasurementDirection:
    """Unit vector on the sphere, polar angle ``theta`` and azimuth ``phi``.

    The constructor insists on the canonical ranges; use :meth:`from_angles`
    for arbitrary real angles (e.g. the negative polar angles that appear in
    CHSH settings such as theta_b' = -theta_b).
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError("direction angles must be finite")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not 0.0 <= self.phi < 2 * math.pi:
            raise ValueError(f"phi must lie in [0, 2pi), got {self.phi}")

    @classmethod
    def from_angles(cls, theta: float, phi: float = 0.0) -> MeasurementDirection:
        """Map any real (theta, phi) onto the same unit vector in canonical range."""
        theta = math.fmod(theta, 2 * math.pi)
        if theta < 0:
            theta += 2 * math.pi
        if theta > math.pi:
            theta = 2 * math.pi - theta
            phi += math.pi
        phi = math.fmod(phi, 2 * math.pi)
        if phi < 0:
            phi += 2 * math.pi
        if phi >= 2 * math.pi:
            phi = 0.0
        if theta == 0.0 or theta == math.pi:
            phi = 0.0
        # + 0.0 folds a negative zero into +0.0
        return cls(theta + 0.0, phi + 0.0)

    @classmethod
    def from_vector(cls, vector) -> MeasurementDirection:
        x, y, z = (float(c) for c in vector)
        norm = math.sqrt(x * x + y * y + z * z)
        if norm == 0.0:
            raise ValueError("cannot take the direction of a zero vector")
        rho = math.hypot(x, y)
        theta = math.atan2(rho, z)
        phi = 0.0 if rho == 0.0 else math.atan2(y, x)
        return cls.from_angles(theta, phi)

    @property
    def vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])


def make_space(pair_count: int) -> FockSpace:
    return FockSpace(pair_count)


def identity(space: FockSpace) -> Operator:
    return Operator(sp.identity(space.dimension, format="csr"), (space.dimension,), "I")


def annihilation(space: FockSpace) -> Operator:
    d = space.dimension
    return Operator(sp.diags_array(np.sqrt(np.arange(1, d, dtype=float)), offsets=1, shape=(d, d)), (d,), "a")


def creation(space: FockSpace) -> Operator:
    return annihilation(space).dagger()


def number(space: FockSpace) -> Operator:
    d = space.dimension
    return Operator(sp.diags_array(np.arange(d, dtype=float)), (d,), "N")


def parity(space: FockSpace) -> Operator:
    """(-1)^N."""
    d = space.dimension
    signs = np.where(np.arange(d) % 2 == 0, 1.0, -1.0)
    return Operator(sp.diags_array(signs), (d,), "(-1)^N")


def pseudospin_z(space: FockSpace) -> Operator:
    """s_z = sum_n |2n+1><2n+1| - |2n><2n|, i.e. -(-1)^N."""
    d = space.dimension
    signs = np.where(np.arange(d) % 2 == 0, -1.0, 1.0)
    return Operator(sp.diags_array(signs), (d,), "s_z")


def pseudospin_minus(space: FockSpace) -> Operator:
    """s_- = sum_n |2n><2n+1|."""
    d = space.dimension
    even = np.arange(0, d, 2)
    mat = sp.csr_array((np.ones(even.size), (even, even + 1)), shape=(d, d))
    return Operator(mat, (d,), "s_-")


def pseudospin_plus(space: FockSpace) -> Operator:
    op = pseudospin_minus(space).dagger()
    return Operator(op.matrix, op.dims, "s_+")


def pseudospin_minus_alt(space: FockSpace) -> Operator:
    """s_- rebuilt as (I + (-1)^N) / (2 sqrt(N+1)) a.

    Independent of :func:`pseudospin_minus`; used to cross-check it.
    """
    d = space.dimension
    n = np.arange(d, dtype=float)
    projector = (1.0 + np.where(np.arange(d) % 2 == 0, 1.0, -1.0)) / (2.0 * np.sqrt(n + 1.0))
    mat = sp.diags_array(projector) @ annihilation(space).matrix
    return Operator(mat, (d,), "s_-")


def pseudospin_x(space: FockSpace) -> Operator:
    op = pseudospin_plus(space) + pseudospin_minus(space)
    return Operator(op.matrix, op.dims, "s_x")


def pseudospin_y(space: FockSpace) -> Operator:
    op = (pseudospin_plus(space) - pseudospin_minus(space)) * (-1j)
    return Operator(op.matrix, op.dims, "s_y")


def pseudospin_vector(space: FockSpace) -> tuple[Operator, Operator, Operator]:
    return pseudospin_x(space), pseudospin_y(space), pseudospin_z(space)


def pseudospin_component(space: FockSpace, direction: MeasurementDirection) -> Operator:
    """a.s = s_z cos(theta) + sin(theta) (e^{i phi} s_- + e^{-i phi} s_+)."""
    ct, st = math.cos(direction.theta), math.sin(direction.theta)
    phase = complex(math.cos(direction.phi), math.sin(direction.phi))
    sm = pseudospin_minus(space).matrix
    mat = ct * pseudospin_z(space).matrix + st * (phase * sm + phase.conjugate() * sm.T)
    return Operator(mat, (space.dimension,), f"s(theta={direction.theta:.6g}, phi={direction.phi:.6g})")


def pseudospin_along(space: FockSpace, vector) -> Operator:
    """v.s by linear extension; ``vector`` need not be a unit vector."""
    vx, vy, vz = (float(c) for c in vector)
    sm = pseudospin_minus(space).matrix
    mat = vz * pseudospin_z(space).matrix + complex(vx, -vy) * sm.T + complex(vx, vy) * sm
    return Operator(mat, (space.dimension,))


def random_directions(rng: np.random.Generator, count: int) -> list[MeasurementDirection]:
    """Directions uniform on the sphere."""
    u = rng.random(count)
    v = rng.random(count)
    thetas = np.arccos(np.clip(1.0 - 2.0 * u, -1.0, 1.0))
    phis = 2.0 * np.pi * v
    return [MeasurementDirection.from_angles(float(t), float(p)) for t, p in zip(thetas, phis)]
