import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from ionnet import states as st

from oracles import haar_unitary, random_density, random_pure

RNG = np.random.default_rng


def bell(phase=0.0, labels=("a", "b"), odd=True):
    amps = np.zeros(4, dtype=complex)
    if odd:
        amps[1] = 1.0
        amps[2] = np.exp(1j * phase)
    else:
        amps[0] = 1.0
        amps[3] = np.exp(1j * phase)
    return st.pure_state(amps / math.sqrt(2.0), labels)


class TestConstruction:
    def test_rejects_register_above_cap(self):
        labels = [f"q{i}" for i in range(7)]
        amps = np.zeros(2**7)
        amps[0] = 1.0
        with pytest.raises(st.StateError):
            st.pure_state(amps, labels)

    def test_cap_is_configurable(self):
        labels = [f"q{i}" for i in range(7)]
        amps = np.zeros(2**7)
        amps[0] = 1.0
        s = st.QuantumState(labels, amps, max_subsystems=8)
        assert s.n_subsystems == 7

    def test_rejects_duplicate_labels(self):
        with pytest.raises(st.StateError):
            st.basis_state([0, 0], ["a", "a"])

    def test_rejects_unnormalized_vector(self):
        with pytest.raises(st.StateError):
            st.pure_state([1.0, 1.0], ["a"])

    def test_rejects_non_hermitian(self):
        rho = np.array([[0.5, 0.5], [0.0, 0.5]], dtype=complex)
        with pytest.raises(st.StateError):
            st.mixed_state(rho, ["a"])

    def test_rejects_negative_eigenvalue(self):
        rho = np.array([[1.5, 0.0], [0.0, -0.5]], dtype=complex)
        with pytest.raises(st.StateError):
            st.mixed_state(rho, ["a"])

    def test_rejects_wrong_trace(self):
        with pytest.raises(st.StateError):
            st.mixed_state(np.eye(2, dtype=complex), ["a"])


class TestTensor:
    def test_basis_product(self):
        out = st.tensor(st.basis_state([0], ["a"]), st.basis_state([0], ["b"]))
        assert not out.is_mixed
        np.testing.assert_allclose(out.data, [1, 0, 0, 0], atol=1e-15)

    def test_superposition_distributes(self):
        plus = st.pure_state(np.array([1, 1]) / math.sqrt(2), ["a"])
        one = st.basis_state([1], ["b"])
        out = st.tensor(plus, one)
        np.testing.assert_allclose(
            out.data, [0, 1 / math.sqrt(2), 0, 1 / math.sqrt(2)], atol=1e-15
        )

    def test_mixed_kron_oracle(self):
        rng = RNG(0)
        rho = random_density(2, rng)
        a = st.mixed_state(rho, ["a"])
        b = st.basis_state([0], ["b"])
        out = st.tensor(a, b)
        assert out.is_mixed
        expected = np.kron(rho, np.array([[1, 0], [0, 0]], dtype=complex))
        np.testing.assert_allclose(out.density(), expected, atol=1e-12)
        assert abs(out.density().trace() - 1) < 1e-12

    def test_label_collision_rejected(self):
        with pytest.raises(st.StateError):
            st.tensor(st.basis_state([0], ["a"]), st.basis_state([0], ["a"]))


class TestApplyUnitary:
    def test_identity(self):
        s = st.basis_state([0, 1], ["a", "b"])
        out = st.apply_unitary(s, np.eye(2), ["a"])
        np.testing.assert_allclose(out.data, s.data, atol=1e-15)

    def test_bit_flip_on_second_qubit(self):
        s = st.basis_state([0, 0], ["a", "b"])
        x = np.array([[0, 1], [1, 0]])
        out = st.apply_unitary(s, x, ["b"])
        np.testing.assert_allclose(out.data, st.basis_state([0, 1], ["a", "b"]).data, atol=1e-15)

    def test_hadamard_measure_statistics(self):
        h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
        s = st.apply_unitary(st.basis_state([0, 0], ["a", "b"]), h, ["a"])
        rng = RNG(11)
        n = 10_000
        ones = 0
        probs = st.outcome_probabilities(s, ["a"])
        outcomes = rng.choice(2, size=n, p=probs)
        ones = int(outcomes.sum())
        # binomial 3 sigma around n/2
        assert abs(ones - n / 2) < 3 * math.sqrt(n * 0.25)

    def test_rejects_non_unitary(self):
        s = st.basis_state([0], ["a"])
        with pytest.raises(st.StateError):
            st.apply_unitary(s, np.array([[1, 0], [0, 2.0]]), ["a"])

    def test_rejects_unknown_label(self):
        s = st.basis_state([0], ["a"])
        with pytest.raises(st.StateError):
            st.apply_unitary(s, np.eye(2), ["zz"])

    @pytest.mark.parametrize("n,targets", [(2, ["a"]), (3, ["c", "a"]), (3, ["b"])])
    def test_norm_preserved_random_unitaries(self, n, targets):
        rng = RNG(hash((n, tuple(targets))) % 2**32)
        labels = ["a", "b", "c"][:n]
        psi = random_pure(2**n, rng)
        s = st.pure_state(psi, labels)
        u = haar_unitary(2 ** len(targets), rng)
        out = st.apply_unitary(s, u, targets)
        assert abs(np.linalg.norm(out.data) - 1.0) < 1e-12

    def test_trace_preserved_mixed(self):
        rng = RNG(5)
        s = st.mixed_state(random_density(8, rng), ["a", "b", "c"])
        u = haar_unitary(4, rng)
        out = st.apply_unitary(s, u, ["c", "a"])
        assert abs(out.density().trace().real - 1.0) < 1e-12
        # identity on the non-target: reduced state of b unchanged
        rb_before = st.partial_trace(s, ["b"]).density()
        rb_after = st.partial_trace(out, ["b"]).density()
        np.testing.assert_allclose(rb_before, rb_after, atol=1e-12)


class TestMeasure:
    def test_eigenstate(self):
        bits, collapsed, prob = st.measure(st.basis_state([1], ["a"]), ["a"], RNG(0))
        assert bits == (1,)
        assert prob == pytest.approx(1.0, abs=1e-12)

    def test_bell_collapse(self):
        rng = RNG(3)
        for _ in range(20):
            bits, collapsed, prob = st.measure(bell(), ["a"], rng)
            assert prob == pytest.approx(0.5, abs=1e-12)
            expect = st.basis_state([bits[0], 1 - bits[0]], ["a", "b"])
            assert st.fidelity(collapsed, expect) == pytest.approx(1.0, abs=1e-12)

    def test_werner_distribution_matches_diagonal(self):
        # Werner state: p * Bell + (1 - p) * I/4
        p = 0.3
        rho = p * bell(odd=False).density() + (1 - p) * np.eye(4) / 4
        s = st.mixed_state(rho, ["a", "b"])
        expected = np.diag(rho).real
        rng = RNG(17)
        n = 100_000
        outcomes = rng.choice(4, size=n, p=st.outcome_probabilities(s, ["a", "b"]))
        counts = np.bincount(outcomes, minlength=4)
        for k in range(4):
            sigma = math.sqrt(n * expected[k] * (1 - expected[k]))
            assert abs(counts[k] - n * expected[k]) < 3 * sigma
        # collapse route cross-check on a smaller sample
        sub = 2000
        hits = np.zeros(4)
        for _ in range(sub):
            bits, _, _ = st.measure(s, ["a", "b"], rng)
            hits[bits[0] * 2 + bits[1]] += 1
        for k in range(4):
            sigma = math.sqrt(sub * expected[k] * (1 - expected[k]))
            assert abs(hits[k] - sub * expected[k]) < 4 * sigma

    def test_empty_targets_rejected(self):
        with pytest.raises(st.StateError):
            st.measure(bell(), [], RNG(0))

    def test_chi_square_convergence_to_born(self):
        # chi-square goodness of fit at 3 sigma over >= 1e4 shots
        rng = RNG(41)
        amps = np.array([0.5, 0.5j, -0.5, 0.5]) / 1.0
        s = st.pure_state(amps, ["a", "b"])
        expected = st.outcome_probabilities(s, ["a", "b"])
        n = 20_000
        outcomes = rng.choice(4, size=n, p=expected)
        counts = np.bincount(outcomes, minlength=4)
        chi2 = float(((counts - n * expected) ** 2 / (n * expected)).sum())
        dof = 3
        assert chi2 < dof + 3 * math.sqrt(2 * dof)


class TestFidelity:
    def test_self_fidelity(self):
        rng = RNG(2)
        s = st.pure_state(random_pure(4, rng), ["a", "b"])
        assert st.fidelity(s, s) == pytest.approx(1.0, abs=1e-12)

    def test_overlap_squared(self):
        target = st.pure_state(np.array([1, 0, 0, -1j]) / math.sqrt(2), ["a", "b"])
        s = st.basis_state([0, 0], ["a", "b"])
        assert st.fidelity(s, target) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, 0.25, 0.6, 1.0])
    def test_depolarized_bell(self, p):
        b = bell(odd=False)
        rho = (1 - p) * b.density() + p * np.eye(4) / 4
        s = st.mixed_state(rho, ["a", "b"])
        assert st.fidelity(s, b) == pytest.approx((1 - p) + p / 4, abs=1e-12)

    def test_global_phase_invariance(self):
        s = st.pure_state(np.array([1, 0, 0, 1]) / math.sqrt(2), ["a", "b"])
        t = st.pure_state(np.exp(0.7j) * s.data, ["a", "b"])
        assert st.fidelity(s, t) == pytest.approx(1.0, abs=1e-12)

    def test_mixed_target_rejected(self):
        with pytest.raises(st.StateError):
            st.fidelity(bell(), st.maximally_mixed(["a", "b"]))

    def test_label_mismatch_rejected(self):
        with pytest.raises(st.StateError):
            st.fidelity(bell(), bell(labels=("x", "y")))


class TestParity:
    def test_even_basis(self):
        assert st.parity_expectation(st.basis_state([0, 0], ["a", "b"]), ["a", "b"]) == 1.0

    def test_odd_bell(self):
        assert st.parity_expectation(bell(), ["a", "b"]) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_probability_sum(self):
        rng = RNG(9)
        s = st.mixed_state(random_density(8, rng), ["a", "b", "c"])
        p = st.outcome_probabilities(s, ["a", "c"])
        expect = p[0] + p[3] - p[1] - p[2]
        assert st.parity_expectation(s, ["a", "c"]) == pytest.approx(expect, abs=1e-12)

    def test_distinct_labels_required(self):
        with pytest.raises(st.StateError):
            st.parity_expectation(bell(), ["a", "a"])


class TestPartialTrace:
    def test_product_state(self):
        s = st.tensor(st.basis_state([0], ["a"]), st.basis_state([1], ["b"]))
        out = st.partial_trace(s, ["a"])
        np.testing.assert_allclose(out.density(), [[1, 0], [0, 0]], atol=1e-14)

    def test_bell_reduces_to_mixed(self):
        out = st.partial_trace(bell(), ["a"])
        np.testing.assert_allclose(out.density(), np.eye(2) / 2, atol=1e-14)

    def test_nested_equals_direct(self):
        rng = RNG(21)
        s = st.mixed_state(random_density(8, rng), ["a", "b", "c"])
        direct = st.partial_trace(s, ["a"])
        nested = st.partial_trace(st.partial_trace(s, ["a", "b"]), ["a"])
        np.testing.assert_allclose(direct.density(), nested.density(), atol=1e-12)
        assert abs(direct.density().trace().real - 1.0) < 1e-12

    def test_empty_keep_rejected(self):
        with pytest.raises(st.StateError):
            st.partial_trace(bell(), [])

    def test_tensor_then_trace_recovers_factors(self):
        rng = RNG(31)
        a = st.pure_state(random_pure(2, rng), ["a"])
        b = st.pure_state(random_pure(4, rng), ["b", "c"])
        joint = st.tensor(a, b)
        np.testing.assert_allclose(
            st.partial_trace(joint, ["a"]).density(), a.density(), atol=1e-12
        )
        np.testing.assert_allclose(
            st.partial_trace(joint, ["b", "c"]).density(), b.density(), atol=1e-12
        )


class TestChannels:
    def test_full_depolarize_gives_maximally_mixed(self):
        out = st.depolarize(bell(), ["a", "b"], 1.0)
        np.testing.assert_allclose(out.density(), np.eye(4) / 4, atol=1e-12)

    def test_partial_depolarize_preserves_other_marginal(self):
        rng = RNG(4)
        s = st.mixed_state(random_density(8, rng), ["a", "b", "c"])
        out = st.depolarize(s, ["b"], 0.37)
        np.testing.assert_allclose(
            st.partial_trace(s, ["a", "c"]).density(),
            st.partial_trace(out, ["a", "c"]).density(),
            atol=1e-12,
        )
        np.testing.assert_allclose(
            st.partial_trace(out, ["b"]).density(),
            (1 - 0.37) * st.partial_trace(s, ["b"]).density() + 0.37 * np.eye(2) / 2,
            atol=1e-12,
        )

    def test_dephase_preserves_populations(self):
        rng = RNG(6)
        s = st.mixed_state(random_density(4, rng), ["a", "b"])
        out = st.dephase_pair(s, ["a", "b"], 0.5)
        np.testing.assert_allclose(
            np.diag(out.density()), np.diag(s.density()), atol=1e-14
        )

    def test_dephase_semigroup(self):
        rng = RNG(7)
        s = st.mixed_state(random_density(4, rng), ["a", "b"])
        g1, g2 = 0.8, 0.55
        once = st.dephase_pair(s, ["a", "b"], g1 * g2)
        twice = st.dephase_pair(st.dephase_pair(s, ["a", "b"], g1), ["a", "b"], g2)
        np.testing.assert_allclose(once.density(), twice.density(), atol=1e-12)

    def test_dephase_is_completely_positive(self):
        # Choi matrix of the pair channel must be positive semidefinite.
        gamma = 0.3
        choi = np.zeros((16, 16), dtype=complex)
        for i in range(4):
            for j in range(4):
                e = np.zeros((4, 4), dtype=complex)
                e[i, j] = 1.0
                # channel acts by Schur factors; reuse implementation on a
                # synthetic non-state operator via direct factor formula
                x1, x2 = (i >> 1) & 1, i & 1
                y1, y2 = (j >> 1) & 1, j & 1
                du = (x1 + x2) - (y1 + y2)
                dw = (x2 - x1) - (y2 - y1)
                factor = gamma ** ((du * du + dw * dw) / 4.0)
                choi += np.kron(e, factor * e)
        eigs = np.linalg.eigvalsh(choi)
        assert eigs.min() > -1e-12

    def test_dephase_scales_pair_coherences(self):
        s = bell(phase=0.4)
        gamma = 0.25
        out = st.dephase_pair(s, ["a", "b"], gamma)
        rho_in = s.density()
        rho_out = out.density()
        assert rho_out[1, 2] == pytest.approx(gamma * rho_in[1, 2], abs=1e-14)
        even = bell(odd=False)
        out_even = st.dephase_pair(even, ["a", "b"], gamma)
        assert out_even.density()[0, 3] == pytest.approx(
            gamma * even.density()[0, 3], abs=1e-14
        )


class TestEmbeddedChannels:
    """Cross-checks of the channels on registers larger than their targets."""

    def test_depolarize_matches_uniform_pauli_average(self):
        # (1/16) sum_P P rho P over all two-qubit Paulis equals the
        # replacement channel with p = 1
        rng = RNG(14)
        s = st.mixed_state(random_density(8, rng), ["a", "b", "c"])
        out = st.depolarize(s, ["a", "c"], 1.0)
        i2 = np.eye(2, dtype=complex)
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        y = np.array([[0, -1j], [1j, 0]], dtype=complex)
        z = np.array([[1, 0], [0, -1]], dtype=complex)
        acc = np.zeros((8, 8), dtype=complex)
        for p1 in (i2, x, y, z):
            for p2 in (i2, x, y, z):
                pauli = np.kron(p1, p2)
                twirled = st.apply_unitary(s, pauli, ["a", "c"])
                acc += twirled.density() / 16.0
        np.testing.assert_allclose(out.density(), acc, atol=1e-12)

    def test_depolarize_interpolates(self):
        rng = RNG(15)
        s = st.mixed_state(random_density(8, rng), ["a", "b", "c"])
        p = 0.37
        out = st.depolarize(s, ["b", "c"], p)
        full = st.depolarize(s, ["b", "c"], 1.0)
        expect = (1 - p) * s.density() + p * full.density()
        np.testing.assert_allclose(out.density(), expect, atol=1e-12)

    def test_dephase_pair_order_invariant(self):
        rng = RNG(16)
        s = st.mixed_state(random_density(8, rng), ["a", "b", "c"])
        fwd = st.dephase_pair(s, ["a", "c"], 0.4)
        rev = st.dephase_pair(s, ["c", "a"], 0.4)
        np.testing.assert_allclose(fwd.density(), rev.density(), atol=1e-13)

    def test_unitary_on_reversed_targets_matches_permutation_oracle(self):
        rng = RNG(18)
        s = st.mixed_state(random_density(8, rng), ["a", "b", "c"])
        u = haar_unitary(4, rng)
        out = st.apply_unitary(s, u, ["c", "a"])
        # oracle: swap the tensor factors of u, then act on (a, c) in order
        u_t = u.reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4)
        oracle = st.apply_unitary(s, u_t, ["a", "c"])
        np.testing.assert_allclose(out.density(), oracle.density(), atol=1e-12)

    def test_marginal_ordering(self):
        s = st.basis_state([0, 1, 1], ["a", "b", "c"])
        p_ab = st.outcome_probabilities(s, ["a", "b"])
        p_ba = st.outcome_probabilities(s, ["b", "a"])
        assert p_ab[0b01] == 1.0
        assert p_ba[0b10] == 1.0
        bits, _, _ = st.measure(s, ["c", "a"], RNG(0))
        assert bits == (1, 0)


@given(
    bits=hst.lists(hst.integers(min_value=0, max_value=1), min_size=2, max_size=4),
    seed=hst.integers(min_value=0, max_value=2**31),
)
@settings(max_examples=40, deadline=None)
def test_unitary_roundtrip_property(bits, seed):
    rng = RNG(seed)
    labels = [f"q{i}" for i in range(len(bits))]
    s = st.basis_state(bits, labels)
    u = haar_unitary(2, rng)
    target = labels[int(rng.integers(len(labels)))]
    forward = st.apply_unitary(s, u, [target])
    back = st.apply_unitary(forward, u.conj().T, [target])
    assert st.fidelity(back, s) == pytest.approx(1.0, abs=1e-10)
