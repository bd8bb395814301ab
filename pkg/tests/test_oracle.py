import numpy as np
import pytest

from specshift import (
    Context,
    EnumerationTooLarge,
    LookaheadConfig,
    RngStream,
    TabularModel,
    best_of_n,
    distortion_scan,
    exact_sequence_law,
    exact_step_ss,
    exact_step_sss,
    make_quartet,
    monte_carlo_law,
    rejection_baseline,
    ss_sequence_law,
    sss_sequence_law,
)
from specshift.models import RewardField, sequence_distribution
from specshift.oracle import (
    analytic_acceptance,
    acceptance_table,
    context_mismatch,
    distortion_report,
    empirical_tv,
    step_table_sss,
)


def single_row_model(row):
    return TabularModel(len(row), 1, {0: np.array([row])})


class TestExactStepSss:
    def test_worked_emitted_is_optimal(self, worked_quartet):
        law = exact_step_sss(worked_quartet, Context(0))
        np.testing.assert_allclose(
            law.emitted.probs, [3 / 19, 12 / 19, 4 / 19], atol=1e-15
        )
        assert law.reject_mass == pytest.approx(6 / 19, abs=1e-15)

    def test_worked_accepted_and_bonus_decomposition(self, worked_quartet):
        # accepted mass = shifted_draft * min(1, target/sft)
        #              = [5/19 * 0.6, 6/19 * 1, 8/19 * 0.5]
        #              = [3/19, 6/19, 4/19]; bonus puts the rejected
        # 6/19 entirely on token 1, reconstituting [3/19, 12/19, 4/19]
        q = worked_quartet
        sh = q.shifted_draft.flat(0)[0]
        acc = sh * np.minimum(1.0, q.target.flat(0)[0] / q.sft.flat(0)[0])
        np.testing.assert_allclose(acc, [3 / 19, 6 / 19, 4 / 19], atol=1e-15)
        law = exact_step_sss(q, Context(0))
        np.testing.assert_allclose(
            law.emitted.probs, acc + law.reject_mass * np.array([0, 1, 0]),
            atol=1e-15,
        )

    def test_matched_recovers_optimal_everywhere(self, quartet_v4):
        q = quartet_v4
        for ctx in q.sft.contexts(0):
            law = exact_step_sss(q, ctx)
            ref = q.optimal.row_array(0, ctx.prefix)
            assert 0.5 * np.abs(law.emitted.probs - ref).sum() < 1e-12

    def test_unmatched_generally_differs(self, unmatched_v4):
        q = unmatched_v4
        gaps = [
            0.5 * np.abs(
                exact_step_sss(q, ctx).emitted.probs
                - q.optimal.row_array(0, ctx.prefix)
            ).sum()
            for ctx in q.sft.contexts(0)
        ]
        assert max(gaps) > 1e-3

    def test_reject_mass_identity(self, quartet_v4):
        # reject mass = 1 - sum shifted * min(1, target/sft)
        q = quartet_v4
        for ctx in list(q.sft.contexts(0))[:10]:
            law = exact_step_sss(q, ctx)
            sh = q.shifted_draft.row_array(0, ctx.prefix)
            ratio = q.target.row_array(0, ctx.prefix) / q.sft.row_array(
                0, ctx.prefix
            )
            expected = 1.0 - float((sh * np.minimum(1.0, ratio)).sum())
            assert law.reject_mass == pytest.approx(expected, abs=1e-15)


class TestExactStepSs:
    def test_emitted_equals_target(self, quartet_v4):
        # the standard rule is exact for any draft/target pair
        q = quartet_v4
        for ctx in q.sft.contexts(0):
            law = exact_step_ss(q.sft, q.target, ctx)
            ref = q.target.row_array(0, ctx.prefix)
            assert 0.5 * np.abs(law.emitted.probs - ref).sum() < 1e-15

    def test_wrong_draft_still_exact(self, unmatched_v4):
        q = unmatched_v4
        for ctx in list(q.sft.contexts(0))[:10]:
            law = exact_step_ss(q.shifted_draft, q.target, ctx)
            ref = q.target.row_array(0, ctx.prefix)
            assert 0.5 * np.abs(law.emitted.probs - ref).sum() < 1e-14

    def test_near_disjoint_support(self):
        draft = single_row_model([1.0 - 1e-9, 1e-9])
        target = single_row_model([1e-9, 1.0 - 1e-9])
        law = exact_step_ss(draft, target, Context(0))
        np.testing.assert_allclose(law.emitted.probs, target.flat(0)[0],
                                   atol=1e-12)
        assert law.reject_mass == pytest.approx(1.0 - 2e-9, abs=1e-12)

    def test_identical_models_degenerate_residual_fallback(self):
        m = single_row_model([0.4, 0.6])
        law = exact_step_ss(m, m, Context(0))
        np.testing.assert_array_equal(law.emitted.probs, m.flat(0)[0])
        assert law.reject_mass == pytest.approx(0.0, abs=1e-15)


class TestSequenceLaws:
    def test_sss_matches_optimal_sequence_law(self, quartet_v4):
        got = sss_sequence_law(quartet_v4, 0)
        ref = sequence_distribution(quartet_v4.optimal, 0)
        assert 0.5 * np.abs(got - ref).sum() < 1e-12

    def test_ss_matches_target_sequence_law(self, quartet_v4):
        got = ss_sequence_law(quartet_v4.sft, quartet_v4.target, 0)
        ref = sequence_distribution(quartet_v4.target, 0)
        assert 0.5 * np.abs(got - ref).sum() < 1e-12

    def test_chained_law_agrees_with_step_fn_enumeration(self, quartet_v4):
        q = quartet_v4
        slow = exact_sequence_law(
            lambda ctx: exact_step_sss(q, ctx), 0, 2, q.vocab_size
        )
        fast = sss_sequence_law(q, 0, 2)
        np.testing.assert_allclose(slow, fast, atol=1e-15)

    def test_enumeration_guard(self, quartet_v4):
        with pytest.raises(EnumerationTooLarge):
            exact_sequence_law(
                lambda ctx: exact_step_sss(quartet_v4, ctx), 0, 40, 4
            )

    def test_laws_sum_to_one(self, unmatched_v4):
        for law in (
            sss_sequence_law(unmatched_v4, 0),
            ss_sequence_law(unmatched_v4.sft, unmatched_v4.target, 0),
        ):
            assert law.sum() == pytest.approx(1.0, abs=1e-9)


class TestMonteCarloLaw:
    def test_determinism(self, quartet_v4):
        cfg = LookaheadConfig(K=2, max_length=3)
        a = monte_carlo_law("shifted", quartet_v4, cfg, 0, 10**4,
                            RngStream(60, 0))
        b = monte_carlo_law("shifted", quartet_v4, cfg, 0, 10**4,
                            RngStream(60, 0))
        np.testing.assert_array_equal(a[1], b[1])
        assert a[2] == b[2]

    def test_minimum_runs_enforced(self, quartet_v4):
        cfg = LookaheadConfig(K=2, max_length=3)
        with pytest.raises(ValueError):
            monte_carlo_law("shifted", quartet_v4, cfg, 0, 100,
                            RngStream(60, 1))

    def test_consistency_ladder(self, quartet_v4):
        # empirical tv to the exact law shrinks roughly like 1/sqrt(n)
        cfg = LookaheadConfig(K=2, max_length=3)
        exact = sss_sequence_law(quartet_v4, 0)
        tvs = []
        for n in (10**4, 4 * 10**4, 16 * 10**4):
            freq, _, _ = monte_carlo_law("shifted", quartet_v4, cfg, 0, n,
                                         RngStream(61, 0))
            tvs.append(empirical_tv(freq, exact))
        assert tvs[2] < tvs[0]
        assert tvs[2] < 0.02

    def test_vanilla_matches_model_law(self, quartet_v4):
        cfg = LookaheadConfig(K=1, max_length=3)
        freq, _, counters = monte_carlo_law(
            "vanilla", quartet_v4.target, cfg, 0, 10**5, RngStream(62, 0)
        )
        exact = sequence_distribution(quartet_v4.target, 0)
        assert empirical_tv(freq, exact) < 0.02
        assert counters["target_calls"] == 3 * 10**5

    def test_standard_matches_target_law(self, quartet_v4):
        cfg = LookaheadConfig(K=2, max_length=3)
        freq, _, _ = monte_carlo_law(
            "standard", (quartet_v4.sft, quartet_v4.target), cfg, 0, 10**5,
            RngStream(63, 0),
        )
        exact = sequence_distribution(quartet_v4.target, 0)
        assert empirical_tv(freq, exact) < 0.02

    def test_counter_arithmetic(self, quartet_v4):
        cfg = LookaheadConfig(K=2, max_length=3)
        n = 10**4
        _, _, c = monte_carlo_law("shifted", quartet_v4, cfg, 0, n,
                                  RngStream(64, 0))
        assert c["emitted"] == n * 3
        assert c["accepted"] <= c["verified"] <= c["proposed"]
        assert c["emitted"] == c["accepted"] + c["bonus"] + c["extra"]
        assert c["extra"] == 0  # shifted rule never emits an extra token


class TestAnalyticAcceptance:
    def test_worked_rates(self, worked_quartet):
        q = worked_quartet
        sft = q.sft.flat(0)[0]
        sh = q.shifted_draft.flat(0)[0]
        t = q.target.flat(0)[0]
        # standard rule with the sft draft: sum min(sft, target) = 0.7
        assert analytic_acceptance(sft, t, sft) == pytest.approx(0.7)
        # shifted rule with the shifted draft: 3/19 + 6/19 + 4/19 = 13/19
        assert analytic_acceptance(sh, t, sft) == pytest.approx(13 / 19)
        # standard rule with the shifted draft (the mismatch the shifted
        # rule repairs): sum min(shifted, target)
        expected = float(np.minimum(sh, t).sum())
        assert analytic_acceptance(sh, t, sh) == pytest.approx(expected)

    def test_acceptance_table_tracks_analytic(self, worked_quartet):
        mean, se, rates = acceptance_table(
            [worked_quartet], "shifted", "shifted_draft", 10**5,
            RngStream(70, 0), K=2,
        )
        assert rates.size == 1
        assert abs(mean - 13 / 19) < 0.01


class TestDistortion:
    def test_matched_mismatch_zero(self, quartet_v4):
        assert context_mismatch(quartet_v4, 0) < 1e-12

    def test_matched_report_clean(self, quartet_v4):
        rep = distortion_report(quartet_v4)
        assert rep.tv_to_optimal < 1e-12
        assert abs(rep.expected_reward_gap) < 1e-10

    def test_unmatched_report_distorted(self, unmatched_v4):
        rep = distortion_report(unmatched_v4)
        assert rep.mismatch > 1e-6
        assert rep.tv_to_optimal > 1e-6

    def test_worked_unmatched_example(self):
        # sft = [0.5, 0.3, 0.2], w = [1, 2, 4] (Z_d = 1.9) against
        # target = [0.4, 0.5, 0.1] (Z_t = 1.8): mismatch = 0.1/1.9
        sft = single_row_model([0.5, 0.3, 0.2])
        reward = RewardField(3, 1, {0: np.log([[1.0, 2.0, 4.0]])}, 1.0)
        target = single_row_model([0.4, 0.5, 0.1])
        from specshift.models import (
            ModelQuartet,
            build_shifted_model,
            rlhf_optimal,
        )
        q = ModelQuartet(
            sft=sft,
            shifted_draft=build_shifted_model(sft, reward),
            target=target,
            optimal=rlhf_optimal(target, reward),
            reward=reward,
        )
        rep = distortion_report(q)
        assert rep.mismatch == pytest.approx(0.1 / 1.9, abs=1e-12)
        assert rep.tv_to_optimal > 1e-3

    def test_scan_sorted_and_monotone_endpoint(self):
        rng = RngStream(71, 0)
        q = make_quartet(4, 2, rng=rng.spawn(1))
        reports = distortion_scan(q.sft, q.reward, [0.0, 0.25, 0.5],
                                  rng.spawn(2))
        mismatches = [r.mismatch for r in reports]
        assert mismatches == sorted(mismatches)
        assert reports[0].mismatch < 1e-12
        assert reports[0].tv_to_optimal < 1e-12
        assert reports[-1].tv_to_optimal > reports[0].tv_to_optimal


class TestBaselines:
    def test_best_of_one_is_vanilla(self, quartet_v4):
        seq, counters = best_of_n(quartet_v4.target, quartet_v4.reward, 1, 3,
                                  0, RngStream(72, 0))
        assert len(seq) == 3
        assert counters["target_calls"] == 3
        assert counters["best_reward"] == pytest.approx(
            quartet_v4.reward.sequence_reward(0, seq)
        )

    def test_call_accounting(self, quartet_v4):
        _, counters = best_of_n(quartet_v4.target, quartet_v4.reward, 10, 128,
                                0, RngStream(72, 1))
        assert counters["target_calls"] == 1280

    def test_reward_improves_with_n(self, quartet_v4):
        rewards = []
        for N in (1, 8, 64):
            vals = [
                best_of_n(quartet_v4.target, quartet_v4.reward, N, 3, 0,
                          RngStream(73, i))[1]["best_reward"]
                for i in range(200)
            ]
            rewards.append(np.mean(vals))
        assert rewards[0] < rewards[1] < rewards[2]

    def test_rejection_trivial_threshold(self, quartet_v4):
        seq, counters = rejection_baseline(
            quartet_v4.target, quartet_v4.reward, -np.inf, 50, 3, 0,
            RngStream(74, 0),
        )
        assert counters["attempts"] == 1
        assert counters["target_calls"] == 3
        assert len(seq) == 3

    def test_rejection_unreachable_threshold_exhausts(self, quartet_v4):
        _, counters = rejection_baseline(
            quartet_v4.target, quartet_v4.reward, np.inf, 7, 3, 0,
            RngStream(74, 1),
        )
        assert counters["attempts"] == 7
        assert counters["target_calls"] == 21

    def test_invalid_args(self, quartet_v4):
        with pytest.raises(ValueError):
            best_of_n(quartet_v4.target, quartet_v4.reward, 0, 3, 0,
                      RngStream(75, 0))
        with pytest.raises(ValueError):
            rejection_baseline(quartet_v4.target, quartet_v4.reward, 0.0, 0,
                               3, 0, RngStream(75, 1))


class TestGammaVariants:
    def test_gamma_one_exact_when_matched(self, quartet_v4):
        # exactness is a gamma = 1 property; other exponents reshape the
        # bonus law and generally perturb the emitted law
        ref = sequence_distribution(quartet_v4.optimal, 0)
        tvs = {
            float(g): 0.5 * np.abs(
                sss_sequence_law(quartet_v4, 0, gamma=float(g)) - ref
            ).sum()
            for g in np.linspace(0.0, 1.0, 11)
        }
        assert tvs[1.0] < 1e-12
        assert min(tvs, key=tvs.get) == 1.0

    def test_gamma_changes_unmatched_law(self, unmatched_v4):
        a = sss_sequence_law(unmatched_v4, 0, gamma=1.0)
        b = sss_sequence_law(unmatched_v4, 0, gamma=0.0)
        assert 0.5 * np.abs(a - b).sum() > 1e-6

    def test_step_table_gamma_rows_normalized(self, unmatched_v4):
        for gamma in (0.0, 0.37, 1.0):
            emitted, reject = step_table_sss(unmatched_v4, 0, gamma)
            np.testing.assert_allclose(emitted.sum(axis=1), 1.0, atol=1e-9)
            assert np.all(reject >= -1e-12)
