import numpy as np
import pytest

from zoflow import (
    AssumptionViolatedError,
    BoundEstimate,
    DegeneratePairError,
    InvalidArgumentError,
    PairSample,
    affine_bound_exact,
    estimate_bound_mc,
    pairwise_ratio,
    proof_interval,
    proof_interval_from_flow,
)

from conftest import affine_flow, effective_map, identity_flow, mixture_flow


def affine_flow_with_eigs(eigs, num_steps=10):
    """Diagonal affine flow whose effective map has the given eigenvalues."""
    eigs = np.asarray(eigs, dtype=float)
    rates = (1.0 - eigs ** (1.0 / num_steps)) / (1.0 / num_steps)
    return affine_flow(np.diag(rates), num_steps=num_steps)


class TestPairwiseRatio:
    def test_scalar_half_map(self):
        flow = affine_flow_with_eigs([0.5])
        ratio, cosine = pairwise_ratio(flow, np.array([1.0]), np.array([-0.3]))
        assert ratio == pytest.approx(2.0, abs=1e-10)
        assert cosine == pytest.approx(1.0, abs=1e-12)

    def test_eigendirection_diag_1_4(self):
        flow = affine_flow_with_eigs([1.0, 4.0])
        np.testing.assert_allclose(effective_map(flow), np.diag([1.0, 4.0]), atol=1e-10)
        u = np.array([0.2, -0.5])
        ratio, cosine = pairwise_ratio(flow, u, u + np.array([0.0, 1.0]))
        assert ratio == pytest.approx(0.25, abs=1e-10)
        assert cosine == pytest.approx(1.0, abs=1e-10)

    def test_identical_points_rejected(self):
        flow = identity_flow()
        with pytest.raises(InvalidArgumentError):
            pairwise_ratio(flow, np.ones(2), np.ones(2))

    def test_collapsing_map_degenerate(self):
        # rate 10 with delta_t = -0.1 zeroes the state in one step
        flow = affine_flow(np.eye(1) * 10.0)
        with pytest.raises(DegeneratePairError):
            pairwise_ratio(flow, np.array([1.0]), np.array([-1.0]))


class TestEstimateBoundMc:
    def test_identity_flow_bound_two(self):
        for seed in (0, 7):
            est = estimate_bound_mc(identity_flow(), num_realizations=50, seed=seed)
            assert est.bound == pytest.approx(2.0, abs=1e-12)
            assert est.beta_min == pytest.approx(1.0, abs=1e-12)
            for m in est.per_alpha_min.values():
                assert m == pytest.approx(1.0, abs=1e-12)

    def test_matches_exact_oracle_d2(self):
        flow = affine_flow_with_eigs([1.3, 1.9])
        exact = affine_bound_exact(effective_map(flow))
        est = estimate_bound_mc(flow, num_realizations=2000, seed=0)
        assert exact <= est.bound <= 1.10 * exact

    def test_deterministic_given_seed(self):
        flow = affine_flow_with_eigs([1.3, 1.9])
        a = estimate_bound_mc(flow, num_realizations=300, seed=3)
        b = estimate_bound_mc(flow.spawn(), num_realizations=300, seed=3)
        assert a.to_json_dict() == b.to_json_dict()

    def test_min_monotone_in_realizations(self):
        flow = affine_flow_with_eigs([1.2, 1.8])
        small = estimate_bound_mc(flow, num_realizations=400, seed=11)
        large = estimate_bound_mc(flow.spawn(), num_realizations=900, seed=11)
        assert large.global_min <= small.global_min
        for a in small.per_alpha_min:
            assert large.per_alpha_min[a] <= small.per_alpha_min[a]

    def test_nfe_accounting(self):
        flow = affine_flow_with_eigs([1.3, 1.9], num_steps=6)
        n, alphas = 150, (0.0, 0.5, 0.9)
        estimate_bound_mc(flow, num_realizations=n, alpha_grid=alphas, seed=0)
        assert flow.nfe_counter.value == 2 * n * len(alphas) * 6

    def test_argument_validation(self):
        flow = identity_flow()
        with pytest.raises(InvalidArgumentError):
            estimate_bound_mc(flow, num_realizations=0)
        with pytest.raises(InvalidArgumentError):
            estimate_bound_mc(flow, alpha_grid=[0.5, 1.0])
        with pytest.raises(InvalidArgumentError):
            estimate_bound_mc(flow, alpha_grid=[])

    def test_negative_map_violates_assumption(self):
        # single-step chain with rate 2 flips the sign of every state
        flow = affine_flow(np.eye(2) * 2.0, num_steps=1)
        with pytest.raises(AssumptionViolatedError):
            estimate_bound_mc(flow, num_realizations=20, seed=0)

    def test_collapsing_map_exhausts_resamples(self):
        flow = affine_flow(np.eye(2) * 10.0)
        with pytest.raises(DegeneratePairError):
            estimate_bound_mc(flow, num_realizations=20, seed=0)

    def test_mixture_min_at_largest_alpha(self):
        # the bundled default mixture attains its per-alpha minimum where the
        # pair distance is smallest
        est = estimate_bound_mc(mixture_flow(), num_realizations=2000, seed=0)
        alphas = sorted(est.per_alpha_min)
        assert min(est.per_alpha_min, key=est.per_alpha_min.get) == alphas[-1]
        assert est.beta_min > 0.0

    def test_conditions_split_realizations(self):
        flow = affine_flow_with_eigs([1.3, 1.9], num_steps=4)
        conds = [flow.condition, flow.condition]
        estimate_bound_mc(flow, num_realizations=100, alpha_grid=(0.5,),
                          conditions=conds, seed=0)
        assert flow.nfe_counter.value == 2 * 100 * 4

    def test_json_dict_keys(self):
        est = estimate_bound_mc(identity_flow(), num_realizations=20, seed=0)
        d = est.to_json_dict()
        assert set(d) == {
            "per_alpha_min", "global_min", "bound", "suggested_eta",
            "beta_min", "num_realizations", "seed",
        }
        assert d["suggested_eta"] == pytest.approx(0.9 * d["bound"], abs=1e-14)

    def test_keep_samples(self):
        est = estimate_bound_mc(identity_flow(), num_realizations=10,
                                alpha_grid=(0.5,), seed=0, keep_samples=True)
        assert len(est.samples) == 10
        assert all(isinstance(s, PairSample) for s in est.samples)


class TestAffineBoundExact:
    def test_identity(self):
        assert affine_bound_exact(np.eye(3)) == 2.0

    def test_diag_half_two(self):
        assert affine_bound_exact(np.diag([0.5, 2.0])) == pytest.approx(1.0, abs=1e-14)

    def test_scalar_contraction(self):
        assert affine_bound_exact(np.array([[0.34867844]])) == pytest.approx(5.7360, abs=1e-4)

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            affine_bound_exact(np.ones((2, 3)))
        with pytest.raises(InvalidArgumentError):
            affine_bound_exact(np.array([[1.0, 0.5], [-0.5, 1.0]]))
        with pytest.raises(InvalidArgumentError):
            affine_bound_exact(np.diag([1.0, -1.0]))


class TestProofInterval:
    def test_identity_flow_small_kappa(self):
        lo, hi = proof_interval_from_flow(identity_flow(), kappa=1e-6,
                                          num_realizations=50)
        assert abs(hi - 2.0) <= 1e-6
        assert abs(lo) <= 1e-6

    def test_kappa_to_zero_converges_to_bound(self):
        # eigendirection samples of M = diag(1, 4)
        samples = [
            PairSample(np.array([1.0, 0.0]), np.zeros(2), 0.0, 1.0, 1.0),
            PairSample(np.array([0.0, 1.0]), np.zeros(2), 0.0, 0.25, 1.0),
        ]
        exact = affine_bound_exact(np.diag([1.0, 4.0]))
        prev_gap = np.inf
        for kappa in (1e-2, 1e-4, 1e-6):
            _, hi = proof_interval(samples, kappa)
            gap = abs(hi - exact)
            assert gap < prev_gap
            prev_gap = gap
        assert prev_gap < 1e-4

    def test_endpoints_order(self):
        samples = [PairSample(np.ones(1), np.zeros(1), 0.0, 0.5, 0.9)]
        lo, hi = proof_interval(samples, 0.5)
        assert 0.0 <= lo <= hi

    def test_validation(self):
        s = [PairSample(np.ones(1), np.zeros(1), 0.0, 1.0, 1.0)]
        with pytest.raises(InvalidArgumentError):
            proof_interval([], 0.5)
        with pytest.raises(InvalidArgumentError):
            proof_interval(s, 0.0)
        with pytest.raises(InvalidArgumentError):
            proof_interval(s, 1.5)

    def test_negative_cosine_rejected(self):
        s = [PairSample(np.ones(1), np.zeros(1), 0.0, 1.0, -0.5)]
        with pytest.raises(AssumptionViolatedError):
            proof_interval(s, 0.5)

    def test_kappa_exceeding_beta_squared(self):
        s = [PairSample(np.ones(1), np.zeros(1), 0.0, 1.0, 0.5)]
        with pytest.raises(InvalidArgumentError):
            proof_interval(s, 1.0)  # kappa / beta^2 = 4 > 1
