import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lculab.errors import (
    BranchAmbiguity,
    CollinearStates,
    NoApproximation,
    NonRealState,
)
from lculab.fracpow import (
    RotationSpec,
    circular_distance,
    eig_unitary,
    evolve,
    frac_power_eig,
    frac_power_iterate,
    frac_power_pe,
    principal_log,
    quantize_phase,
    rotation_generator,
)
from lculab.qcore import (
    CostLedger,
    DenseOp,
    DiagonalOp,
    compose,
    fidelity,
    new_state,
    reflect_about,
    uniform_state,
)


def random_unitary(dim, seed):
    g = np.random.default_rng(seed)
    q, r = np.linalg.qr(g.normal(size=(dim, dim)) + 1j * g.normal(size=(dim, dim)))
    return DenseOp(q * (np.diag(r) / np.abs(np.diag(r))), cost=CostLedger(elementary_ops=1))


def random_pair(dim, seed):
    g = np.random.default_rng(seed)
    return new_state(g.normal(size=dim)), new_state(g.normal(size=dim))


def two_reflections(a, b):
    return compose(reflect_about(b), reflect_about(a)).matrix


pairs = st.tuples(
    st.integers(2, 10),
    st.integers(0, 2**32 - 1),
)


class TestEigen:
    @pytest.mark.parametrize("seed", range(5))
    def test_reconstructs(self, seed):
        U = random_unitary(6, seed)
        dec = eig_unitary(U)
        assert np.allclose(dec.reconstruct(), U.matrix, atol=1e-10)
        assert np.all(dec.phases > -math.pi) and np.all(dec.phases <= math.pi)

    def test_degenerate_eigenspace_orthonormal(self):
        dec = eig_unitary(DiagonalOp([1, 1, 1j, 1j]))
        V = dec.vectors
        assert np.allclose(V.conj().T @ V, np.eye(4), atol=1e-12)

    def test_minus_one_maps_to_pi(self):
        dec = eig_unitary(DiagonalOp([-1, 1]))
        assert sorted(dec.phases) == pytest.approx([0.0, math.pi])

    def test_search_rotation_phases(self):
        # N = 4, one marked item: <a|b> = 1/2, so R rotates its plane by 2 pi/3
        a = uniform_state(4)
        b = new_state([1, 1, -1, 1])
        dec = eig_unitary(DenseOp(two_reflections(a, b)))
        phases = sorted(dec.phases)
        assert phases == pytest.approx([-2 * math.pi / 3, 0, 0, 2 * math.pi / 3], abs=1e-10)


class TestPrincipalLog:
    @pytest.mark.parametrize("seed", range(5))
    def test_exponentiates_back(self, seed):
        U = random_unitary(5, seed)
        A = principal_log(U)
        assert np.allclose(scipy.linalg.expm(-1j * A.matrix), U.matrix, atol=1e-10)
        assert np.all(np.abs(A.eigenvalues()) < math.pi)

    def test_branch_cut(self):
        with pytest.raises(BranchAmbiguity):
            principal_log(DiagonalOp([-1, 1]))

    def test_evolve_matches_expm(self):
        A = principal_log(random_unitary(4, 9))
        assert np.allclose(evolve(A, 0.3).matrix, scipy.linalg.expm(-0.3j * A.matrix), atol=1e-10)


class TestFracPowerEig:
    @pytest.mark.parametrize("seed", range(5))
    def test_fourth_root(self, seed):
        U = random_unitary(8, seed)
        V = frac_power_eig(U, 0.25)
        assert np.linalg.norm(np.linalg.matrix_power(V.matrix, 4) - U.matrix, 2) < 1e-10

    def test_endpoints(self):
        U = random_unitary(4, 1)
        assert np.allclose(frac_power_eig(U, 0).matrix, np.eye(4))
        assert np.allclose(frac_power_eig(U, 1).matrix, U.matrix, atol=1e-10)

    def test_cost_tag(self):
        U = random_unitary(3, 2)
        assert frac_power_eig(U, 0.5, epsilon=0.01).cost.elementary_ops == 100
        assert frac_power_eig(U, 0.5).cost.elementary_ops == 1

    def test_branch_cut(self):
        with pytest.raises(BranchAmbiguity):
            frac_power_eig(DiagonalOp([-1, 1]), 0.5)
        # t = 1 is unambiguous
        assert np.allclose(frac_power_eig(DiagonalOp([-1, 1]), 1).matrix, np.diag([-1, 1]))

    def test_range(self):
        with pytest.raises(ValueError):
            frac_power_eig(random_unitary(2, 0), 1.5)


class TestFracPowerPE:
    def test_quantize(self):
        assert quantize_phase(0.3, 2) == pytest.approx(0.0)
        assert quantize_phase(1.0, 2) == pytest.approx(math.pi / 2)

    @pytest.mark.parametrize("bits", [3, 6, 10])
    def test_error_bound(self, bits):
        U = random_unitary(6, bits)
        t = 0.3
        err = np.linalg.norm(frac_power_pe(U, t, bits).matrix - frac_power_eig(U, t).matrix, 2)
        assert err <= 2 * math.pi * t / 2**bits

    def test_cost(self):
        assert frac_power_pe(random_unitary(3, 0), 0.5, 5).cost.elementary_ops == 32

    def test_bounds(self):
        with pytest.raises(ValueError):
            frac_power_pe(random_unitary(3, 0), 0.5, 0)
        with pytest.raises(ValueError):
            frac_power_pe(random_unitary(3, 0), 1.0, 4)


class TestRotationGenerator:
    @given(pairs)
    @settings(max_examples=50, deadline=None)
    def test_unit_time_is_two_reflections(self, case):
        dim, seed = case
        a, b = random_pair(dim, seed)
        spec = rotation_generator(a, b)
        R = two_reflections(a, b)
        assert np.allclose(spec.power(1).matrix, R, atol=1e-10)
        assert np.allclose(scipy.linalg.expm(-1j * spec.generator.matrix), R, atol=1e-8)

    @given(pairs)
    @settings(max_examples=50, deadline=None)
    def test_quarter_time_reaches_bisector(self, case):
        dim, seed = case
        a, b = random_pair(dim, seed)
        out = new_state(spec_quarter := rotation_generator(a, b).power(0.25).act(a.amplitudes))
        assert spec_quarter is not None
        target = new_state(a.amplitudes + b.amplitudes)
        assert fidelity(out, target) >= 1 - 1e-10

    def test_obtuse_pair_angle_off_principal_branch(self):
        a = uniform_state(64)
        bb = np.ones(64) / 8
        bb[5] *= -1
        b = -new_state(bb)
        spec = rotation_generator(a, b)
        assert spec.angle > math.pi
        out = new_state(spec.power(0.25).act(a.amplitudes))
        assert out.probabilities()[5] == pytest.approx(1.0, abs=1e-12)

    def test_collinear(self):
        a = uniform_state(3)
        with pytest.raises(CollinearStates):
            rotation_generator(a, -a)

    def test_complex_rejected(self):
        with pytest.raises(NonRealState):
            rotation_generator(new_state([1, 1j]), new_state([1, 0]))

    def test_estimated_overlap_scales_angle(self):
        a, b = random_pair(5, 3)
        exact = rotation_generator(a, b)
        est = rotation_generator(a, b, overlap=exact.overlap + 0.05)
        assert isinstance(est, RotationSpec)
        assert est.angle == pytest.approx(2 * math.acos(exact.overlap + 0.05))
        # the generator is built from the estimate, so unit time no longer equals R
        assert not np.allclose(est.power(1).matrix, two_reflections(a, b), atol=1e-4)
        # integer iterates never need the angle
        assert np.allclose(est.iterate(3).matrix, np.linalg.matrix_power(two_reflections(a, b), 3), atol=1e-10)

    def test_quantized_power(self):
        a, b = random_pair(4, 1)
        spec = rotation_generator(a, b)
        q = spec.power(0.5, bits=3)
        assert q.angle == pytest.approx(float(quantize_phase(spec.angle, 3)) * 0.5)


class TestIterate:
    def test_circular_distance(self):
        assert circular_distance(0.1, 2 * math.pi - 0.1) == pytest.approx(0.2)
        assert circular_distance(3.0, 3.0 + 4 * math.pi) == pytest.approx(0.0, abs=1e-12)

    def test_finds_k_within_tolerance(self):
        a, b = random_pair(6, 4)
        spec = rotation_generator(a, b)
        k, err = frac_power_iterate(spec, 0.25, 0.05, 1000)
        assert err <= 0.05
        assert circular_distance(k * spec.angle, 0.25 * spec.angle) == pytest.approx(err)
        # no smaller k qualifies
        assert all(circular_distance(j * spec.angle, 0.25 * spec.angle) > 0.05 for j in range(1, k))

    def test_no_approximation_reports_best(self):
        a, b = random_pair(6, 4)
        spec = rotation_generator(a, b)
        with pytest.raises(NoApproximation) as info:
            frac_power_iterate(spec, 0.25, 1e-9, 5)
        best = min(range(1, 6), key=lambda j: circular_distance(j * spec.angle, 0.25 * spec.angle))
        assert info.value.best_k == best
        assert info.value.payload()["best_error"] == pytest.approx(info.value.best_error)

    def test_search_geometry_relation(self):
        # combining a and -b for N = 64: k solves (4k - 1)/sqrt(N) close to (2m - 1/2) pi
        N = 64
        a = uniform_state(N)
        bb = np.ones(N)
        bb[7] = -1
        spec = rotation_generator(a, -new_state(bb))
        t = math.acos(1 / math.sqrt(N)) / spec.angle
        k, _ = frac_power_iterate(spec, t, math.asin(math.sqrt(0.1)), 2 * 8)
        lhs = (4 * k - 1) / math.sqrt(N)
        assert abs(lhs - 1.5 * math.pi) < 4 / math.sqrt(N)

    @given(arrays(np.float64, 2, elements=st.floats(0.05, 0.95)))
    @settings(max_examples=30, deadline=None)
    def test_iterate_error_within_tol(self, ts):
        a, b = random_pair(4, 11)
        spec = rotation_generator(a, b)
        for t in ts:
            try:
                k, err = frac_power_iterate(spec, float(t), 0.1, 500)
            except NoApproximation:
                continue
            assert err <= 0.1 and 1 <= k <= 500
