import math

import numpy as np
import pytest

from zoflow import (
    Condition,
    InvalidArgumentError,
    conditions_equal,
    make_random_codec,
    codec_roundtrip,
    resolve_eta,
    run_editing_experiment,
    run_inversion_experiment,
    run_step_size_sweep,
    summarize,
)
from zoflow.bound import affine_bound_exact

from conftest import (
    DEFAULT_MIXTURE,
    TARGET_MIXTURE,
    affine_flow,
    effective_map,
    identity_flow,
    mixture_flow,
)


def scalar_suite(eigs=(1.4, 2.0), num_steps=10):
    eigs = np.asarray(eigs, dtype=float)
    rates = (1.0 - eigs ** (1.0 / num_steps)) / (1.0 / num_steps)
    return affine_flow(np.diag(rates), num_steps=num_steps)


class TestConditionsEqual:
    def test_mixture_payloads(self):
        a = Condition("x", DEFAULT_MIXTURE)
        b = Condition("y", DEFAULT_MIXTURE)
        assert conditions_equal(a, b)
        assert not conditions_equal(a, Condition("x", TARGET_MIXTURE))

    def test_mixed_payload_types(self):
        flow = identity_flow()
        assert not conditions_equal(flow.condition, Condition("m", DEFAULT_MIXTURE))


class TestResolveEta:
    def test_numeric_passthrough(self):
        assert resolve_eta(identity_flow(), 0.25) == 0.25

    def test_auto_uses_estimate(self):
        eta = resolve_eta(identity_flow(), "auto",
                          bound_kwargs={"num_realizations": 30, "seed": 0})
        assert eta == pytest.approx(0.9 * 2.0, abs=1e-12)

    def test_none_behaves_like_auto(self):
        eta = resolve_eta(identity_flow(), None,
                          bound_kwargs={"num_realizations": 30, "seed": 0})
        assert eta == pytest.approx(1.8, abs=1e-12)


class TestInversionExperiment:
    def test_nfe_convention(self):
        flow = scalar_suite()
        T = flow.num_steps
        rows = run_inversion_experiment(flow, ["zero-order"], [3, 7], [0, 1], eta=0.3)
        for r in rows:
            assert r["nfe"] == T * (r["n_iters"] + 2)

    def test_naive_row_costs_two_passes(self):
        flow = scalar_suite()
        rows = run_inversion_experiment(flow, ["naive-ode"], [5], [0])
        assert rows[0]["nfe"] == 2 * flow.num_steps
        assert rows[0]["n_iters"] is None

    def test_fixed_point_rows(self):
        flow = scalar_suite()
        T = flow.num_steps
        rows = run_inversion_experiment(flow, ["fixed-point"], [5], [0],
                                        refine_iters=[1, 3])
        assert [r["n_iters"] for r in rows] == [1, 3]
        assert [r["nfe"] for r in rows] == [T * 1 + T, T * 3 + T]

    def test_zero_order_beats_naive(self):
        flow = mixture_flow()
        rows = run_inversion_experiment(flow, ["zero-order", "naive-ode"], [10],
                                        [0, 1, 2], eta=0.4)
        by = {}
        for r in rows:
            by.setdefault(r["method"], []).append(r["rmse"])
        assert np.mean(by["zero-order"]) < np.mean(by["naive-ode"])

    def test_deterministic_per_seed(self):
        flow = scalar_suite()
        a = run_inversion_experiment(flow, ["zero-order"], [4], [3], eta=0.3)
        b = run_inversion_experiment(flow.spawn(), ["zero-order"], [4], [3], eta=0.3)
        assert a == b

    def test_validation(self):
        flow = identity_flow()
        with pytest.raises(InvalidArgumentError):
            run_inversion_experiment(flow, ["newton"], [2], [0])
        with pytest.raises(InvalidArgumentError):
            run_inversion_experiment(flow, ["zero-order"], [2], [])
        with pytest.raises(InvalidArgumentError):
            run_inversion_experiment(flow, ["zero-order"], [2], [0], init="warm")

    def test_random_init_rows(self):
        flow = scalar_suite()
        T = flow.num_steps
        rows = run_inversion_experiment(flow, ["zero-order"], [3], [0], eta=0.3,
                                        init="random")
        # no inversion pass: T per optimization iteration plus the final record
        assert rows[0]["nfe"] == T * (3 + 1)

    def test_codec_floor(self):
        flow = scalar_suite(num_steps=8)
        codec = make_random_codec(2, 1, np.random.default_rng(0))
        rows = run_inversion_experiment(flow, ["zero-order"], [40], [0, 1],
                                        eta=0.3, codec=codec)
        for r in rows:
            assert r["codec_floor"] > 0.0
            # reconstruction of the round-tripped target can be excellent ...
            assert r["rmse"] < 1e-3
            # ... but the pre-codec signal stays floored
            assert r["rmse_to_precodec"] >= 0.9 * r["codec_floor"]


class TestCodec:
    def test_roundtrip_is_projection(self, rng):
        codec = make_random_codec(6, 3, rng)
        x = rng.standard_normal(6)
        once = codec_roundtrip(codec, x)
        twice = codec_roundtrip(codec, once)
        np.testing.assert_allclose(once, twice, atol=1e-12)

    def test_chi_square_residual_expectation(self):
        # ||(I - P) x||^2 ~ chi2(d - k) for standard-normal x
        d, k, n = 8, 4, 1000
        rng = np.random.default_rng(42)
        codec = make_random_codec(d, k, rng)
        x = rng.standard_normal((n, d))
        res_norm = np.linalg.norm(x - codec_roundtrip(codec, x), axis=1)
        rmse = res_norm / math.sqrt(d)
        m = d - k
        expected = math.sqrt(2) * math.gamma((m + 1) / 2) / math.gamma(m / 2) / math.sqrt(d)
        assert rmse.mean() == pytest.approx(expected, rel=0.05)

    def test_validation(self, rng):
        with pytest.raises(InvalidArgumentError):
            make_random_codec(4, 4, rng)
        with pytest.raises(InvalidArgumentError):
            make_random_codec(4, 0, rng)


class TestEditingExperiment:
    def src_flow(self):
        return mixture_flow(DEFAULT_MIXTURE, num_steps=10, tag="src")

    def target(self):
        return Condition("tar", TARGET_MIXTURE)

    def test_equal_conditions_rejected(self):
        flow = self.src_flow()
        with pytest.raises(InvalidArgumentError):
            run_editing_experiment(flow, Condition("tar", DEFAULT_MIXTURE), [2], [0])

    def test_non_mixture_target_rejected(self):
        flow = identity_flow()
        with pytest.raises(InvalidArgumentError):
            run_editing_experiment(flow, affine_flow(np.ones((2, 2))).condition,
                                   [2], [0])

    def test_zero_iters_is_pure_sampling(self):
        flow = self.src_flow()
        rows = run_editing_experiment(flow, self.target(), [0], [0], eta=0.4)
        assert rows[0]["nfe"] == 2 * flow.num_steps  # invert + sample

    def test_similarity_improves_with_budget(self):
        flow = self.src_flow()
        seeds = list(range(10))
        rows = run_editing_experiment(flow, self.target(), [0, 5], seeds, eta=0.4)
        by_n = {}
        for r in rows:
            by_n.setdefault(r["n_iters"], []).append(r["source_similarity"])
        assert np.mean(by_n[5]) < np.mean(by_n[0])

    def test_adherence_is_target_log_density(self):
        flow = self.src_flow()
        rows = run_editing_experiment(flow, self.target(), [2], [0], eta=0.4)
        assert np.isfinite(rows[0]["target_adherence"])


class TestStepSizeSweep:
    def test_classifications(self):
        flow = scalar_suite()
        exact = affine_bound_exact(effective_map(flow))
        curves, classes = run_step_size_sweep(flow, [0.9 * exact, 5.0 * exact],
                                              80, [0], tol=1e-6)
        verdict = {c["eta"]: c["classification"] for c in classes}
        assert verdict[0.9 * exact] == "converged"
        assert verdict[5.0 * exact] == "diverged"

    def test_curve_rows_shape(self):
        flow = scalar_suite()
        exact = affine_bound_exact(effective_map(flow))
        curves, classes = run_step_size_sweep(flow, [0.9 * exact], 20, [0, 1])
        per = {}
        for eta, seed, i, res in curves:
            per.setdefault(seed, []).append((i, res))
        for seed, pts in per.items():
            assert [p[0] for p in pts] == list(range(len(pts)))

    def test_diverged_curve_truncated_not_lost(self):
        flow = scalar_suite()
        exact = affine_bound_exact(effective_map(flow))
        curves, classes = run_step_size_sweep(flow, [20.0 * exact], 500, [0])
        assert classes[0]["classification"] == "diverged"
        assert classes[0]["aborted"]
        assert len(curves) >= 2  # partial trace still reported

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            run_step_size_sweep(identity_flow(), [], 10, [0])
        with pytest.raises(InvalidArgumentError):
            run_step_size_sweep(identity_flow(), [-0.1], 10, [0])


class TestSummarize:
    def test_single_row_identity(self):
        rows = [{"method": "zero-order", "eta": 0.3, "n_iters": 5, "nfe": 70,
                 "rmse": 0.125}]
        out = summarize(rows)
        assert len(out) == 1
        s = out[0]
        assert s["rmse_mean"] == 0.125
        assert s["rmse_stderr"] == 0.0
        assert s["count"] == 1
        assert s["nfe_mean"] == 70.0

    def test_equal_values_zero_stderr(self):
        rows = [
            {"method": "naive-ode", "eta": None, "n_iters": None, "nfe": 20, "rmse": 0.5},
            {"method": "naive-ode", "eta": None, "n_iters": None, "nfe": 20, "rmse": 0.5},
        ]
        assert summarize(rows)[0]["rmse_stderr"] == 0.0

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            summarize([])

    def test_deterministic_order(self):
        rows = [
            {"method": "zero-order", "eta": 0.3, "n_iters": n, "nfe": 10, "rmse": 0.1}
            for n in (10, 2, 5)
        ]
        out = summarize(rows)
        assert [s["n_iters"] for s in out] == [2, 5, 10]

    def test_fifty_seed_affine_mean_matches_recursion(self):
        # closed form: per-seed rmse is |1 - eta m|^N * |m b - 1| * |y| for the
        # scalar chain with forward factor m and naive inverse factor b
        num_steps, n_iters, eta = 10, 6, 0.8
        flow = affine_flow(np.eye(1), num_steps=num_steps)
        m = 0.9**num_steps
        b = 1.1**num_steps
        seeds = list(range(50))
        rows = run_inversion_experiment(flow, ["zero-order"], [n_iters], seeds, eta=eta)
        predicted = []
        for seed in seeds:
            truth = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[0])
            y = m * abs(truth.standard_normal(1)[0])
            predicted.append(abs(1 - eta * m) ** n_iters * abs(m * b - 1) * y)
        got = summarize(rows)[0]["rmse_mean"]
        assert got == pytest.approx(float(np.mean(predicted)), rel=0.01)
