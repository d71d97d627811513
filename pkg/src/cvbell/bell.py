"""CHSH correlations and Bell operators built from dichotomic observables.

The same assembler serves the parity-spin (continuous-variable) Bell
operator and the two-qubit Pauli reference, so the one-pair truncation can be
checked against the textbook qubit case entrywise.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from cvbell.fock import (
    FockSpace,
    MeasurementDirection,
    Operator,
    identity,
    kron,
    max_abs_diff,
    pseudospin_along,
    pseudospin_component,
    pseudospin_vector,
)
from cvbell.states import TwoModeState

IMAG_TOL = 1e-12
CIRELSON = 2.0 * math.sqrt(2.0)
# beyond this the Bell operator is not materialized densely for the spectrum
DENSE_SPECTRUM_LIMIT = 4096

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)


@dataclass(frozen=True)
class BellSettings:
    a: MeasurementDirection
    a_prime: MeasurementDirection
    b: MeasurementDirection
    b_prime: MeasurementDirection

    @classmethod
    def from_angles(cls, theta_a, theta_a_prime, theta_b, theta_b_prime,
                    phi_a=0.0, phi_a_prime=0.0, phi_b=0.0, phi_b_prime=0.0) -> BellSettings:
        d = MeasurementDirection.from_angles
        return cls(d(theta_a, phi_a), d(theta_a_prime, phi_a_prime),
                   d(theta_b, phi_b), d(theta_b_prime, phi_b_prime))

    @classmethod
    def canonical(cls, theta_b: float) -> BellSettings:
        """theta_a = 0, theta_a' = pi/2, theta_b' = -theta_b, all azimuths zero."""
        return cls.from_angles(0.0, math.pi / 2, theta_b, -theta_b)

    def angles(self) -> tuple[float, ...]:
        return (self.a.theta, self.a.phi, self.a_prime.theta, self.a_prime.phi,
                self.b.theta, self.b.phi, self.b_prime.theta, self.b_prime.phi)

    def as_dict(self) -> dict[str, float]:
        keys = ("theta_a", "phi_a", "theta_a_prime", "phi_a_prime",
                "theta_b", "phi_b", "theta_b_prime", "phi_b_prime")
        return dict(zip(keys, self.angles()))


@dataclass(frozen=True)
class BellValue:
    value: float
    settings: BellSettings
    method: str  # "numeric" or "analytic"


def random_settings(rng: np.random.Generator) -> BellSettings:
    from cvbell.fock import random_directions

    return BellSettings(*random_directions(rng, 4))


def chsh_combination(a: Operator, a_prime: Operator, b: Operator, b_prime: Operator) -> Operator:
    """A(x)B + A(x)B' + A'(x)B - A'(x)B' for any four involutive observables."""
    return (kron(a, b) + kron(a, b_prime)) + (kron(a_prime, b) - kron(a_prime, b_prime))


def bell_operator(space1: FockSpace, space2: FockSpace, settings: BellSettings) -> Operator:
    return chsh_combination(
        pseudospin_component(space1, settings.a),
        pseudospin_component(space1, settings.a_prime),
        pseudospin_component(space2, settings.b),
        pseudospin_component(space2, settings.b_prime),
    )


def pauli_component(direction: MeasurementDirection) -> Operator:
    """a.sigma in the (up, down) basis, written the same way as the pseudospin."""
    ct, st = math.cos(direction.theta), math.sin(direction.theta)
    phase = complex(math.cos(direction.phi), math.sin(direction.phi))
    mat = ct * PAULI_Z + st * (phase * PAULI_PLUS.T + phase.conjugate() * PAULI_PLUS)
    return Operator(mat, (2,))


def pauli_reference_bell(settings: BellSettings) -> Operator:
    """Two-qubit CHSH operator in the (up, down) (x) (up, down) basis."""
    return chsh_combination(
        pauli_component(settings.a),
        pauli_component(settings.a_prime),
        pauli_component(settings.b),
        pauli_component(settings.b_prime),
    )


def qubit_order_permutation() -> np.ndarray:
    """Index map taking the one-pair Fock basis (|0>,|1>)^2 to (up, down)^2, |1> = up."""
    # single mode: up=|1> is Fock index 1, down=|0> is Fock index 0
    single = [1, 0]
    return np.array([2 * single[i] + single[j] for i in range(2) for j in range(2)])


def product_expectation(state: TwoModeState, op1: Operator, op2: Operator) -> complex:
    """<psi| op1 (x) op2 |psi> without forming the Kronecker product."""
    d1, d2 = state.shape
    if op1.dims != (d1,) or op2.dims != (d2,):
        raise ValueError(f"operator dims {op1.dims}, {op2.dims} do not match state {state.shape}")
    psi = state.coefficients
    # (A (x) B) vec(psi) = vec(A psi B^T) for row-major vec
    image = op1.matrix @ psi @ op2.matrix.T
    return complex(psi.conj().multiply(image).sum())


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > IMAG_TOL:
        raise ArithmeticError(f"{what} has imaginary part {value.imag:.3e} (> {IMAG_TOL})")
    return value.real


def correlation(state: TwoModeState, dir_a: MeasurementDirection, dir_b: MeasurementDirection) -> float:
    """E(a, b) = <(a.s1) (x) (b.s2)>."""
    value = product_expectation(
        state,
        pseudospin_component(state.space1, dir_a),
        pseudospin_component(state.space2, dir_b),
    )
    return _real(value, "correlation")


def correlation_tensor(state: TwoModeState) -> np.ndarray:
    """T[i, j] = <s_i (x) s_j> for i, j over (x, y, z); E(a, b) = a . T b."""
    s1 = pseudospin_vector(state.space1)
    s2 = pseudospin_vector(state.space2)
    t = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            t[i, j] = _real(product_expectation(state, s1[i], s2[j]), "correlation tensor entry")
    return t


def correlation_nopa_analytic(r: float, theta_a: float, theta_b: float) -> float:
    """cos(theta_a) cos(theta_b) + tanh(2r) sin(theta_a) sin(theta_b), azimuths zero."""
    if r < 0:
        raise ValueError(f"squeezing parameter must be >= 0, got {r}")
    return math.cos(theta_a) * math.cos(theta_b) + math.tanh(2 * r) * math.sin(theta_a) * math.sin(theta_b)


def bell_expectation(state: TwoModeState, settings: BellSettings) -> BellValue:
    terms = (
        correlation(state, settings.a, settings.b),
        correlation(state, settings.a, settings.b_prime),
        correlation(state, settings.a_prime, settings.b),
        correlation(state, settings.a_prime, settings.b_prime),
    )
    value = terms[0] + terms[1] + terms[2] - terms[3]
    return BellValue(value, settings, "numeric")


def bell_expectation_canonical_analytic(r: float, theta_b: float) -> BellValue:
    """2 (cos theta_b + K sin theta_b) for the canonical family, K = tanh 2r."""
    if r < 0:
        raise ValueError(f"squeezing parameter must be >= 0, got {r}")
    k = math.tanh(2 * r)
    value = 2.0 * (math.cos(theta_b) + k * math.sin(theta_b))
    return BellValue(value, BellSettings.canonical(theta_b), "analytic")


def nopa_max_analytic(r: float) -> float:
    """2 sqrt(1 + K^2): the canonical-family maximum, reached at theta_b = arctan K."""
    k = math.tanh(2 * r)
    return 2.0 * math.sqrt(1.0 + k * k)


def bell_squared_residual(space1: FockSpace, space2: FockSpace, settings: BellSettings) -> float:
    """max |B^2 - 4I - 4 [(a x a').s1] (x) [(b x b').s2]| entrywise."""
    bell = bell_operator(space1, space2, settings)
    cross_a = np.cross(settings.a.vector, settings.a_prime.vector)
    cross_b = np.cross(settings.b.vector, settings.b_prime.vector)
    correction = kron(pseudospin_along(space1, cross_a), pseudospin_along(space2, cross_b))
    expected = 4.0 * kron(identity(space1), identity(space2)) + 4.0 * correction
    return max_abs_diff(bell @ bell, expected)


def spectral_bound(bell_op: Operator) -> float:
    """Largest |eigenvalue| of a Hermitian operator."""
    if not bell_op.is_hermitian(1e-12):
        raise ValueError("spectral_bound needs a Hermitian operator")
    n = bell_op.dimension
    try:
        if n <= DENSE_SPECTRUM_LIMIT:
            eig = np.linalg.eigvalsh(bell_op.toarray())
            return float(np.max(np.abs(eig)))
        eig = spla.eigsh(bell_op.matrix, k=1, which="LM", return_eigenvectors=False, tol=1e-13)
        return float(np.max(np.abs(eig)))
    except (np.linalg.LinAlgError, spla.ArpackError) as exc:
        raise ArithmeticError(f"eigensolver failed: {exc}") from exc


def permute_two_qubit(op: Operator) -> np.ndarray:
    """Reorder a one-pair two-mode operator into the (up, down)^2 qubit basis."""
    if op.dims != (2, 2):
        raise ValueError("expected an operator on two single-pair modes")
    perm = qubit_order_permutation()
    dense = op.toarray()
    out = np.empty_like(dense)
    out[np.ix_(perm, perm)] = dense
    return out

