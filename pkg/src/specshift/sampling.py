"""Decoders: vanilla ancestral sampling, standard speculative sampling,
and shifted speculative sampling, with full per-block tracing.

The traced decoders here follow the same uniform-draw schedule as the
batch kernels in ``specshift._kernels``: per block, one draw per
proposed token, then one acceptance draw per proposed token (consumed
even after a rejection or when the acceptance probability is one), then
one draw for the bonus or extra token when applicable.  A traced decode
and a kernel decode fed the same uniform stream therefore emit the same
tokens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    Categorical,
    clamp_normalize,
    inverse_cdf_index,
)
from .errors import DegenerateResidual, ZeroDraftMass, ZeroSftMass
from .models import Context, ModelQuartet, TabularModel
from .rng import RngStream


@dataclass(frozen=True)
class LookaheadConfig:
    """Decoding knobs: lookahead, token budget, bonus exponent,
    temperature."""

    K: int = 2
    max_length: int = 3
    gamma: float = 1.0
    temperature: float = 1.0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.max_length < 1:
            raise ValueError("max_length must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass
class BlockRecord:
    """One draft-propose-then-verify cycle."""

    proposals: list
    accept_flags: list
    uniforms: list
    bonus_token: int | None = None
    extra_token: int | None = None


@dataclass
class DecodeTrace:
    """Per-block records plus aggregate call counters."""

    blocks: list = field(default_factory=list)
    target_calls: int = 0
    draft_calls: int = 0
    emitted_tokens: int = 0
    proposed_tokens: int = 0
    verified_tokens: int = 0
    accepted_tokens: int = 0

    @property
    def acceptance_rate(self) -> float:
        """Accepted / verified proposals (per-verified-token rate)."""
        if self.verified_tokens == 0:
            return float("nan")
        return self.accepted_tokens / self.verified_tokens

    @property
    def tokens_per_target_call(self) -> float:
        if self.target_calls == 0:
            return float("nan")
        return self.emitted_tokens / self.target_calls


def apply_temperature(model: TabularModel, temperature: float) -> TabularModel:
    """Row-wise power-and-renormalize preprocessing transform."""
    if temperature == 1.0:
        return model
    tables = {}
    for pid in model.prompt_ids:
        rows = model.flat(pid) ** (1.0 / temperature)
        tables[pid] = rows / rows.sum(axis=1, keepdims=True)
    return TabularModel(model.vocab_size, model.max_depth, tables,
                        eos_token=model.eos_token)


def accept_prob_standard(draft_model: TabularModel, target: TabularModel,
                         ctx: Context, token: int) -> float:
    """min(1, target(token) / draft(token)) at a context."""
    d = float(draft_model.row_array(ctx.prompt_id, ctx.prefix)[token])
    if d <= 0.0:
        raise ZeroDraftMass(f"draft mass 0 for token {token} at {ctx}")
    t = float(target.row_array(ctx.prompt_id, ctx.prefix)[token])
    return min(1.0, t / d)


def accept_prob_shifted(quartet: ModelQuartet, ctx: Context,
                        token: int) -> float:
    """min(1, target(token) / sft(token)): the denominator is the SFT
    draft although the proposal came from the shifted draft."""
    s = float(quartet.sft.row_array(ctx.prompt_id, ctx.prefix)[token])
    if s <= 0.0:
        raise ZeroSftMass(f"sft mass 0 for token {token} at {ctx}")
    t = float(quartet.target.row_array(ctx.prompt_id, ctx.prefix)[token])
    return min(1.0, t / s)


def bonus_standard(draft_model: TabularModel, target: TabularModel,
                   ctx: Context) -> Categorical:
    """Clamp-normalized pointwise excess of target over draft."""
    d = draft_model.row_array(ctx.prompt_id, ctx.prefix)
    t = target.row_array(ctx.prompt_id, ctx.prefix)
    return clamp_normalize(t - d)


def bonus_shifted(quartet: ModelQuartet, ctx: Context,
                  gamma: float = 1.0) -> Categorical:
    """Clamp-normalized shifted_draft^gamma * (target/sft - 1)."""
    s = quartet.sft.row_array(ctx.prompt_id, ctx.prefix)
    if np.any(s <= 0.0):
        raise ZeroSftMass(f"sft row has zero mass at {ctx}")
    t = quartet.target.row_array(ctx.prompt_id, ctx.prefix)
    sh = quartet.shifted_draft.row_array(ctx.prompt_id, ctx.prefix)
    factor = sh if gamma == 1.0 else sh**gamma
    return clamp_normalize(factor * (t / s - 1.0))


def _next_context(ctx: Context, token: int, model_depth: int) -> Context:
    # long cost-accounting runs cycle the context at model depth
    if len(ctx.prefix) + 1 >= model_depth:
        return Context(ctx.prompt_id, ())
    return ctx.child(token)


def decode_vanilla(model: TabularModel, cfg: LookaheadConfig, prompt_id: int,
                   rng: RngStream):
    """Ancestral sampling to max_length; one target call per token."""
    model = apply_temperature(model, cfg.temperature)
    trace = DecodeTrace()
    ctx = Context(prompt_id)
    seq = []
    for _ in range(cfg.max_length):
        u = rng.uniform()
        row = model.row_array(ctx.prompt_id, ctx.prefix)
        tok = inverse_cdf_index(row, u)
        seq.append(tok)
        trace.blocks.append(BlockRecord([tok], [True], [u]))
        trace.target_calls += 1
        trace.emitted_tokens += 1
        ctx = _next_context(ctx, tok, model.max_depth)
    return tuple(seq), trace


def _decode_speculative(proposal: TabularModel, target: TabularModel,
                        denom: TabularModel, cfg: LookaheadConfig,
                        prompt_id: int, rng: RngStream, *,
                        shifted: bool, quartet: ModelQuartet | None):
    """Shared body of both speculative decoders.

    ``shifted=False`` is the standard rule (extra target token on full
    acceptance); ``shifted=True`` is the shifted rule (no extra token,
    shifted bonus law).
    """
    trace = DecodeTrace()
    ctx = Context(prompt_id)
    seq = []
    t = 0
    L = cfg.max_length
    depth = proposal.max_depth
    while t < L:
        k_eff = min(cfg.K, L - t)
        props, ctxs, draws = [], [], []
        hctx = ctx
        for _ in range(k_eff):
            u = rng.uniform()
            draws.append(u)
            ctxs.append(hctx)
            tok = inverse_cdf_index(
                proposal.row_array(hctx.prompt_id, hctx.prefix), u
            )
            props.append(tok)
            hctx = _next_context(hctx, tok, depth)
        trace.target_calls += 1
        trace.draft_calls += k_eff
        trace.proposed_tokens += k_eff
        accept_draws = [rng.uniform() for _ in range(k_eff)]
        draws.extend(accept_draws)
        flags = []
        rejected_at = -1
        for k in range(k_eff):
            tok = props[k]
            dk = float(denom.row_array(ctxs[k].prompt_id, ctxs[k].prefix)[tok])
            if dk <= 0.0:
                if shifted:
                    raise ZeroSftMass(
                        f"sft mass 0 for proposed token {tok} at {ctxs[k]}"
                    )
                raise ZeroDraftMass(
                    f"draft mass 0 for proposed token {tok} at {ctxs[k]}"
                )
            ratio = float(
                target.row_array(ctxs[k].prompt_id, ctxs[k].prefix)[tok]
            ) / dk
            trace.verified_tokens += 1
            if accept_draws[k] < ratio:
                flags.append(True)
                trace.accepted_tokens += 1
            else:
                flags.append(False)
                rejected_at = k
                break
        block = BlockRecord(list(props), flags, draws)
        if rejected_at >= 0:
            for k in range(rejected_at):
                seq.append(props[k])
                ctx = _next_context(ctx, props[k], depth)
                t += 1
            rctx = ctxs[rejected_at]
            u = rng.uniform()
            block.uniforms.append(u)
            try:
                if shifted:
                    bonus = bonus_shifted(quartet, rctx, cfg.gamma)
                else:
                    bonus = bonus_standard(proposal, target, rctx)
                tok = inverse_cdf_index(bonus.probs, u)
            except DegenerateResidual:
                # residual numerically empty: sample the compensated row
                fallback = (quartet.shifted_draft if shifted else target)
                tok = inverse_cdf_index(
                    fallback.row_array(rctx.prompt_id, rctx.prefix), u
                )
            block.bonus_token = tok
            seq.append(tok)
            ctx = _next_context(ctx, tok, depth)
            t += 1
            trace.emitted_tokens += rejected_at + 1
        else:
            for k in range(k_eff):
                seq.append(props[k])
                ctx = _next_context(ctx, props[k], depth)
                t += 1
            trace.emitted_tokens += k_eff
            if not shifted and t < L:
                u = rng.uniform()
                block.uniforms.append(u)
                tok = inverse_cdf_index(
                    target.row_array(ctx.prompt_id, ctx.prefix), u
                )
                block.extra_token = tok
                seq.append(tok)
                ctx = _next_context(ctx, tok, depth)
                t += 1
                trace.emitted_tokens += 1
        trace.blocks.append(block)
    return tuple(seq), trace


def decode_spec_standard(draft_model: TabularModel, target: TabularModel,
                         cfg: LookaheadConfig, prompt_id: int,
                         rng: RngStream):
    """Standard speculative sampling: accept on target/draft, residual
    bonus on rejection, extra target token on full acceptance."""
    draft_model = apply_temperature(draft_model, cfg.temperature)
    target = apply_temperature(target, cfg.temperature)
    return _decode_speculative(draft_model, target, draft_model, cfg,
                               prompt_id, rng, shifted=False, quartet=None)


def decode_spec_shifted(quartet: ModelQuartet, cfg: LookaheadConfig,
                        prompt_id: int, rng: RngStream):
    """Shifted speculative sampling: proposals from the shifted draft,
    acceptance on target/sft, shifted residual bonus, never an extra
    token on full acceptance."""
    if cfg.temperature != 1.0:
        quartet = ModelQuartet(
            sft=apply_temperature(quartet.sft, cfg.temperature),
            shifted_draft=apply_temperature(quartet.shifted_draft,
                                            cfg.temperature),
            target=apply_temperature(quartet.target, cfg.temperature),
            optimal=apply_temperature(quartet.optimal, cfg.temperature),
            reward=quartet.reward,
            matched=False,
        )
    return _decode_speculative(quartet.shifted_draft, quartet.target,
                               quartet.sft, cfg, prompt_id, rng,
                               shifted=True, quartet=quartet)


# --- trace serialization ----------------------------------------------------


def trace_to_lines(trace: DecodeTrace) -> list:
    """Line-delimited records: one JSON object per block, one trailer
    object with the aggregate counters."""
    lines = []
    for b in trace.blocks:
        lines.append(json.dumps({
            "proposals": b.proposals,
            "flags": [int(f) for f in b.accept_flags],
            "uniforms": b.uniforms,
            "bonus": b.bonus_token,
            "extra": b.extra_token,
        }))
    lines.append(json.dumps({
        "target_calls": trace.target_calls,
        "draft_calls": trace.draft_calls,
        "emitted_tokens": trace.emitted_tokens,
        "proposed_tokens": trace.proposed_tokens,
        "verified_tokens": trace.verified_tokens,
        "accepted_tokens": trace.accepted_tokens,
    }))
    return lines


def trace_from_lines(lines) -> DecodeTrace:
    records = [json.loads(line) for line in lines if line.strip()]
    trailer = records[-1]
    trace = DecodeTrace(
        target_calls=trailer["target_calls"],
        draft_calls=trailer["draft_calls"],
        emitted_tokens=trailer["emitted_tokens"],
        proposed_tokens=trailer["proposed_tokens"],
        verified_tokens=trailer["verified_tokens"],
        accepted_tokens=trailer["accepted_tokens"],
    )
    for rec in records[:-1]:
        trace.blocks.append(BlockRecord(
            proposals=rec["proposals"],
            accept_flags=[bool(f) for f in rec["flags"]],
            uniforms=rec["uniforms"],
            bonus_token=rec["bonus"],
            extra_token=rec["extra"],
        ))
    return trace
