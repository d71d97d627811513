import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from cvbell.fock import (
    MeasurementDirection,
    identity,
    make_space,
    pseudospin_component,
    pseudospin_x,
    pseudospin_z,
)
from cvbell.jcreadout import (
    EXCITED,
    GROUND,
    ReadoutChainConfig,
    chain_unitary,
    completeness_residual,
    jc_generator,
    jc_step_unitary,
    readout_estimate,
    readout_scan,
    trapping_warnings,
)

GTS = (0.7, 1.0, 1.3)


def swap_atoms_12(d):
    """Permutation exchanging atom slots 1 and 2 on field (x) atom1 (x) atom2."""
    idx = np.arange(d * 4).reshape(d, 2, 2).transpose(0, 2, 1).reshape(-1)
    return np.eye(d * 4)[idx]


def two_atom_chain_oracle(space, gt):
    step = sla.expm(-1j * gt * jc_generator(space).toarray())
    s1 = np.kron(step, np.eye(2))
    p = swap_atoms_12(space.dimension)
    s2 = p @ s1 @ p
    return s2 @ s1, s1 @ s2


def field_state(space, kind):
    f = np.zeros(space.dimension, dtype=complex)
    if kind == "vacuum":
        f[0] = 1
    else:
        f[:2] = 1 / math.sqrt(2)
    return f


class TestStep:
    def test_zero_coupling_is_identity(self):
        u = jc_step_unitary(make_space(3), 0.0).toarray()
        assert np.array_equal(u, np.eye(12))

    @given(st.integers(1, 5), st.floats(-6, 6))
    def test_matches_matrix_exponential(self, m, gt):
        space = make_space(m)
        expected = sla.expm(-1j * gt * jc_generator(space).toarray())
        assert np.abs(jc_step_unitary(space, gt).toarray() - expected).max() <= 1e-12

    @given(st.integers(1, 5), st.floats(-6, 6))
    def test_unitary(self, m, gt):
        u = jc_step_unitary(make_space(m), gt).toarray()
        assert np.abs(u.conj().T @ u - np.eye(len(u))).max() <= 1e-12

    def test_full_rabi_transfer(self):
        space = make_space(2)
        u = jc_step_unitary(space, math.pi / 2).toarray()
        initial = np.kron(np.eye(4)[0], EXCITED)
        target = np.kron(np.eye(4)[1], GROUND)
        assert np.allclose(u @ initial, -1j * target, atol=1e-15)


class TestChain:
    def test_single_atom_is_step(self):
        space = make_space(2)
        config = ReadoutChainConfig(1, 0.9, space)
        assert np.abs(chain_unitary(config).toarray() - jc_step_unitary(space, 0.9).toarray()).max() == 0

    def test_zero_coupling_limit(self):
        space = make_space(2)
        u = chain_unitary(ReadoutChainConfig(2, 1e-300, space)).toarray()
        assert np.allclose(u, np.eye(16), atol=1e-15)

    @pytest.mark.parametrize("m", [2, 3])
    def test_ordering_against_oracle(self, m):
        space = make_space(m)
        forward, reversed_order = two_atom_chain_oracle(space, 1.0)
        u = chain_unitary(ReadoutChainConfig(2, 1.0, space)).toarray()
        assert np.abs(u - forward).max() <= 1e-12
        # the two orderings genuinely differ
        assert np.abs(u - reversed_order).max() > 1e-6

    @pytest.mark.parametrize("n", [1, 3, 5])
    def test_unitary(self, n):
        u = chain_unitary(ReadoutChainConfig(n, 1.3, make_space(2))).toarray()
        assert np.abs(u.conj().T @ u - np.eye(len(u))).max() <= 1e-12

    def test_time_reversal_inverts_each_step(self):
        space = make_space(2)
        config = ReadoutChainConfig(3, 0.8, space)
        forward = chain_unitary(config).toarray()
        backward = chain_unitary(config, reverse_time=True).toarray()
        # U(-t) = S_3(-t) S_2(-t) S_1(-t); its inverse runs the steps in the other order
        assert not np.allclose(forward @ backward, np.eye(len(forward)))
        assert np.allclose(backward, forward.conj(), atol=1e-14)


class TestConfig:
    def test_guards(self):
        space = make_space(1)
        with pytest.raises(ValueError):
            ReadoutChainConfig(0, 1.0, space)
        with pytest.raises(ValueError):
            ReadoutChainConfig(13, 1.0, space)
        with pytest.raises(ValueError):
            ReadoutChainConfig(10, 1.0, make_space(4))  # 8 * 1024 > 4096
        with pytest.raises(ValueError):
            ReadoutChainConfig(2, 0.0, space)
        with pytest.raises(ValueError):
            ReadoutChainConfig(2, 1.0, space, atom_initial=(GROUND, np.array([1.0, 1.0])))

    def test_atoms_vector(self):
        config = ReadoutChainConfig(2, 1.0, make_space(1), atom_initial=(GROUND, EXCITED))
        assert np.array_equal(config.atoms_vector(), np.kron(GROUND, EXCITED))


class TestTrapping:
    def test_fires_at_pi(self):
        warnings = trapping_warnings(make_space(4), math.pi)
        assert any("k=1," in w for w in warnings)
        assert any("k=4," in w for w in warnings)

    def test_fires_at_truncated_pi(self):
        assert trapping_warnings(make_space(4), 3.14159265)

    @pytest.mark.parametrize("gt", GTS)
    def test_silent_for_generic_coupling(self, gt):
        assert trapping_warnings(make_space(4), gt) == []

    def test_cli_flag(self):
        space = make_space(2)
        rows = readout_scan(field_state(space, "vacuum"), pseudospin_z(space), ReadoutChainConfig(2, math.pi, space))
        assert all(row.trapping_flag for row in rows)


class TestCompleteness:
    def test_identity_is_trivial(self):
        space = make_space(2)
        report = completeness_residual(space, identity(space), 1.0, 4)
        assert max(report.residuals) <= 1e-14

    def test_sz_strictly_decreasing(self):
        space = make_space(4)
        res = completeness_residual(space, pseudospin_z(space), 1.0, 6).residuals
        assert all(b < a for a, b in zip(res, res[1:]))

    @pytest.mark.parametrize("m", [2, 4])
    @pytest.mark.parametrize("gt", GTS)
    @pytest.mark.parametrize("obs", ["sz", "sx", "stheta"])
    def test_non_increasing(self, m, gt, obs):
        space = make_space(m)
        a = {"sz": pseudospin_z, "sx": pseudospin_x,
             "stheta": lambda s: pseudospin_component(s, MeasurementDirection(math.pi / 3))}[obs](space)
        res = completeness_residual(space, a, gt, 6).residuals
        assert all(r >= 0 for r in res)
        assert all(b <= a_ + 1e-12 for a_, b in zip(res, res[1:]))

    @pytest.mark.parametrize("gt", GTS)
    def test_forward_and_reversed_forms_agree(self, gt):
        space = make_space(3)
        for a in (pseudospin_z(space), pseudospin_component(space, MeasurementDirection(0.9))):
            forward = completeness_residual(space, a, gt, 5).residuals
            reverse = completeness_residual(space, a, -gt, 5).residuals
            assert np.allclose(forward, reverse, atol=1e-12)

    def test_rejects_non_hermitian(self):
        space = make_space(1)
        with pytest.raises(ValueError):
            completeness_residual(space, np.array([[0, 1], [0, 0]]), 1.0, 2)

    def test_m_a_hermitian(self):
        space = make_space(2)
        report = completeness_residual(space, pseudospin_x(space), 1.1, 3)
        for m in report.m_a_estimates:
            assert np.abs(m - m.conj().T).max() <= 1e-12


class TestReadout:
    @pytest.mark.parametrize("gt", GTS)
    def test_identity_reads_one(self, gt):
        space = make_space(2)
        config = ReadoutChainConfig(4, gt, space)
        for row in readout_scan(field_state(space, "plus"), identity(space), config):
            assert row.estimate == pytest.approx(1.0, abs=1e-12)

    def test_sz_vacuum_converges(self):
        space = make_space(4)
        rows = readout_scan(field_state(space, "vacuum"), pseudospin_z(space), ReadoutChainConfig(6, 1.0, space))
        assert all(row.target == -1.0 for row in rows)
        errors = [row.abs_error for row in rows]
        assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))
        assert errors[-1] < 1e-10

    def test_stheta_superposition_target(self):
        space = make_space(4)
        a = pseudospin_component(space, MeasurementDirection(math.pi / 4))
        config = ReadoutChainConfig(6, 1.0, space)
        estimate = readout_estimate(field_state(space, "plus"), a, config)
        assert readout_scan(field_state(space, "plus"), a, config)[0].target == pytest.approx(math.sqrt(2) / 2)
        assert estimate == pytest.approx(math.sqrt(2) / 2, abs=1e-8)

    def test_projection_estimator_is_poorer(self):
        # the normalized partial trace is kept for comparison; it does not converge at these sizes
        space = make_space(4)
        config = ReadoutChainConfig(6, 1.0, space)
        f = field_state(space, "vacuum")
        projection = readout_scan(f, pseudospin_z(space), config, "projection")
        subspace = readout_scan(f, pseudospin_z(space), config, "subspace")
        assert projection[-1].abs_error > 0.1
        assert subspace[-1].abs_error < 1e-10
        assert [r.residual for r in projection] == [r.residual for r in subspace]

    def test_unknown_estimator(self):
        space = make_space(1)
        with pytest.raises(ValueError):
            readout_scan(field_state(space, "vacuum"), pseudospin_z(space), ReadoutChainConfig(1, 1.0, space), "magic")

    def test_rejects_weight_near_cutoff(self):
        space = make_space(2)
        f = np.zeros(4, dtype=complex)
        f[2] = 1
        with pytest.raises(ValueError):
            readout_scan(f, pseudospin_z(space), ReadoutChainConfig(1, 1.0, space))

    def test_rejects_unnormalized(self):
        space = make_space(2)
        with pytest.raises(ValueError):
            readout_scan(np.array([1.0, 1.0, 0, 0]), pseudospin_z(space), ReadoutChainConfig(1, 1.0, space))
