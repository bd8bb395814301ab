import numpy as np
import pytest

from specshift import (
    Context,
    DegenerateResidual,
    LookaheadConfig,
    RngStream,
    ZeroDraftMass,
    accept_prob_shifted,
    accept_prob_standard,
    bonus_shifted,
    bonus_standard,
    decode_spec_shifted,
    decode_spec_standard,
    decode_vanilla,
    make_quartet,
)
from specshift.models import TabularModel, n_contexts
from specshift.sampling import apply_temperature, trace_from_lines, trace_to_lines


def single_row_model(row):
    return TabularModel(len(row), 1, {0: np.array([row])})


class TestAcceptProbStandard:
    def test_equal_models(self, quartet_v4):
        m = quartet_v4.target
        for tok in range(m.vocab_size):
            assert accept_prob_standard(m, m, Context(0), tok) == 1.0

    def test_min_clamps(self):
        draft = single_row_model([0.5, 0.5])
        target = single_row_model([0.6, 0.4])
        assert accept_prob_standard(draft, target, Context(0), 0) == 1.0
        assert accept_prob_standard(draft, target, Context(0), 1) == pytest.approx(0.8)

    def test_arithmetic(self):
        draft = single_row_model([0.4, 0.6])
        target = single_row_model([0.1, 0.9])
        assert accept_prob_standard(draft, target, Context(0), 0) == pytest.approx(0.25)

    def test_zero_draft_mass(self):
        draft = single_row_model([1.0, 0.0])
        target = single_row_model([0.5, 0.5])
        with pytest.raises(ZeroDraftMass):
            accept_prob_standard(draft, target, Context(0), 1)


class TestAcceptProbShifted:
    def test_target_equals_sft(self, quartet_v4):
        q = make_quartet(4, 2, reward_scale=0.0, mix=0.0, rng=RngStream(3, 0))
        for tok in range(4):
            assert accept_prob_shifted(q, Context(0), tok) == 1.0

    def test_worked_ratios(self, worked_quartet):
        got = [accept_prob_shifted(worked_quartet, Context(0), t) for t in range(3)]
        assert got == pytest.approx([0.6, 1.0, 0.5], abs=1e-12)

    def test_matched_ratio_identity(self, quartet_v4):
        # min(1, target/sft) == min(1, optimal/shifted_draft) when matched
        q = quartet_v4
        for ctx in list(q.sft.contexts(0))[:10]:
            for tok in range(q.vocab_size):
                lhs = accept_prob_shifted(q, ctx, tok)
                opt = q.optimal.row_array(0, ctx.prefix)[tok]
                sh = q.shifted_draft.row_array(0, ctx.prefix)[tok]
                rhs = min(1.0, opt / sh)
                assert lhs == pytest.approx(rhs, rel=1e-10)


class TestBonusStandard:
    def test_one_sided(self):
        draft = single_row_model([0.4, 0.6])
        target = single_row_model([0.6, 0.4])
        np.testing.assert_allclose(
            bonus_standard(draft, target, Context(0)).probs, [1.0, 0.0]
        )

    def test_degenerate_when_equal(self):
        m = single_row_model([0.5, 0.5])
        with pytest.raises(DegenerateResidual):
            bonus_standard(m, m, Context(0))

    def test_single_positive_entry(self):
        draft = single_row_model([0.2, 0.3, 0.5])
        target = single_row_model([0.5, 0.3, 0.2])
        np.testing.assert_allclose(
            bonus_standard(draft, target, Context(0)).probs, [1.0, 0.0, 0.0]
        )


class TestBonusShifted:
    def test_worked_case(self, worked_quartet):
        got = bonus_shifted(worked_quartet, Context(0), 1.0).probs
        np.testing.assert_allclose(got, [0.0, 1.0, 0.0], atol=1e-15)

    def test_matched_equals_residual(self, quartet_v4):
        q = quartet_v4
        for ctx in list(q.sft.contexts(0))[:8]:
            got = bonus_shifted(q, ctx, 1.0).probs
            res = np.maximum(
                q.optimal.row_array(0, ctx.prefix)
                - q.shifted_draft.row_array(0, ctx.prefix),
                0.0,
            )
            np.testing.assert_allclose(got, res / res.sum(), atol=1e-10)

    def test_gamma_zero_drops_draft_factor(self, worked_quartet):
        q = worked_quartet
        got = bonus_shifted(q, Context(0), 0.0).probs
        ratio = q.target.flat(0)[0] / q.sft.flat(0)[0] - 1.0
        res = np.maximum(ratio, 0.0)
        np.testing.assert_allclose(got, res / res.sum(), atol=1e-15)

    def test_gamma_one_bitwise_matches_explicit_formula(self, quartet_v4):
        q = quartet_v4
        for ctx in list(q.sft.contexts(0))[:8]:
            got = bonus_shifted(q, ctx, 1.0).probs
            sh = q.shifted_draft.row_array(0, ctx.prefix)
            t = q.target.row_array(0, ctx.prefix)
            s = q.sft.row_array(0, ctx.prefix)
            res = np.maximum(sh * (t / s - 1.0), 0.0)
            np.testing.assert_allclose(got, res / res.sum(), rtol=0,
                                       atol=1e-15)


class TestDecodeVanilla:
    def test_point_mass_path(self):
        nc = n_contexts(2, 3)
        rows = np.tile([1.0, 0.0], (nc, 1))
        m = TabularModel(2, 3, {0: rows})
        seq, trace = decode_vanilla(m, LookaheadConfig(K=1, max_length=3), 0,
                                    RngStream(0, 0))
        assert seq == (0, 0, 0)
        assert trace.target_calls == 3
        assert trace.emitted_tokens == 3

    def test_deterministic_replay(self, quartet_v4):
        cfg = LookaheadConfig(K=1, max_length=3)
        a = decode_vanilla(quartet_v4.target, cfg, 0, RngStream(4, 9))
        b = decode_vanilla(quartet_v4.target, cfg, 0, RngStream(4, 9))
        assert a[0] == b[0]


class TestDecodeSpecStandard:
    def test_identical_models_accept_all(self, quartet_v4):
        m = quartet_v4.target
        cfg = LookaheadConfig(K=2, max_length=6)
        _, trace = decode_spec_standard(m, m, cfg, 0, RngStream(5, 0))
        assert trace.accepted_tokens == trace.verified_tokens
        assert all(all(b.accept_flags) for b in trace.blocks)
        # K accepted + 1 extra per block while budget allows
        assert trace.blocks[0].extra_token is not None

    def test_block_structure(self, quartet_v4):
        cfg = LookaheadConfig(K=2, max_length=3)
        for i in range(200):
            _, trace = decode_spec_standard(
                quartet_v4.sft, quartet_v4.target, cfg, 0, RngStream(6, i)
            )
            emitted = 0
            for b in trace.blocks:
                flags = b.accept_flags
                if False in flags:
                    assert all(flags[: flags.index(False)])
                    assert flags.count(False) == 1
                    assert b.bonus_token is not None
                    assert b.extra_token is None
                    emitted += flags.index(False) + 1
                else:
                    assert b.bonus_token is None
                    emitted += len(flags) + (b.extra_token is not None)
            assert emitted == trace.emitted_tokens == 3
            assert trace.target_calls == len(trace.blocks)

    def test_budget_never_exceeded(self, quartet_v4):
        cfg = LookaheadConfig(K=4, max_length=5)
        for i in range(100):
            seq, trace = decode_spec_standard(
                quartet_v4.sft, quartet_v4.target, cfg, 0, RngStream(7, i)
            )
            assert len(seq) == 5


class TestDecodeSpecShifted:
    def test_full_acceptance_emits_exactly_k(self):
        q = make_quartet(4, 4, reward_scale=0.0, mix=0.0, rng=RngStream(8, 0))
        cfg = LookaheadConfig(K=4, max_length=4)
        _, trace = decode_spec_shifted(q, cfg, 0, RngStream(8, 1))
        # zero shift + mix 0 means target == sft: all proposals accepted,
        # and the full-acceptance branch emits K, never K+1
        assert trace.emitted_tokens == 4
        assert len(trace.blocks) == 1
        assert trace.blocks[0].extra_token is None

    def test_never_extra_token(self, quartet_v4):
        cfg = LookaheadConfig(K=2, max_length=6)
        for i in range(200):
            _, trace = decode_spec_shifted(quartet_v4, cfg, 0, RngStream(9, i))
            assert all(b.extra_token is None for b in trace.blocks)

    def test_deterministic(self, quartet_v4):
        cfg = LookaheadConfig(K=2, max_length=3)
        a = decode_spec_shifted(quartet_v4, cfg, 0, RngStream(10, 3))
        b = decode_spec_shifted(quartet_v4, cfg, 0, RngStream(10, 3))
        assert a[0] == b[0]

    def test_counters_consistent(self, quartet_v4):
        cfg = LookaheadConfig(K=3, max_length=6)
        _, trace = decode_spec_shifted(quartet_v4, cfg, 0, RngStream(11, 0))
        assert trace.target_calls == len(trace.blocks)
        assert trace.emitted_tokens == 6
        assert trace.verified_tokens <= trace.proposed_tokens


class TestTemperature:
    def test_identity_at_one(self, quartet_v4):
        assert apply_temperature(quartet_v4.target, 1.0) is quartet_v4.target

    def test_low_temperature_sharpens(self, quartet_v4):
        sharp = apply_temperature(quartet_v4.target, 0.5)
        assert sharp.flat(0).max() > quartet_v4.target.flat(0).max()
        np.testing.assert_allclose(sharp.flat(0).sum(axis=1), 1.0, atol=1e-12)


class TestTraceSerialization:
    def test_roundtrip(self, quartet_v4):
        cfg = LookaheadConfig(K=2, max_length=3)
        _, trace = decode_spec_shifted(quartet_v4, cfg, 0, RngStream(12, 0))
        back = trace_from_lines(trace_to_lines(trace))
        assert back.target_calls == trace.target_calls
        assert back.emitted_tokens == trace.emitted_tokens
        assert len(back.blocks) == len(trace.blocks)
        for a, b in zip(back.blocks, trace.blocks):
            assert a.proposals == b.proposals
            assert a.accept_flags == b.accept_flags
            assert a.bonus_token == b.bonus_token
            assert a.extra_token == b.extra_token


class TestLookaheadConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            LookaheadConfig(K=0)
        with pytest.raises(ValueError):
            LookaheadConfig(max_length=0)
        with pytest.raises(ValueError):
            LookaheadConfig(gamma=1.5)
        with pytest.raises(ValueError):
            LookaheadConfig(temperature=0.0)
