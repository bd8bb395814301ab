"""Ground-truth machinery the acceptance suite judges against.

Closed-form per-step emission laws for both speculative rules, exact
sequence-law enumeration, kernel-backed Monte Carlo estimation,
normalizer-mismatch distortion scans, and the best-of-N / rejection
baselines for call-count comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .distributions import Categorical, EPS_CLAMP
from .errors import EnumerationTooLarge, ZeroSftMass
from .models import (
    Context,
    ModelQuartet,
    RewardField,
    TabularModel,
    gen_matched_target,
    gen_random_model,
    level_offset,
    rlhf_optimal,
    build_shifted_model,
    sequence_distribution,
    sequence_rewards,
)
from .rng import RngStream
from .sampling import LookaheadConfig

#: Chunk size for kernel Monte Carlo batches; fixed so draw order (and
#: therefore every seeded result) is independent of backend and memory.
MC_CHUNK = 4096


@dataclass(frozen=True)
class StepLaw:
    """Exact law of the next emitted token at one context."""

    context: Context
    emitted: Categorical
    reject_mass: float


@dataclass(frozen=True)
class DistortionReport:
    """Distortion of the emitted law when normalizers mismatch."""

    mismatch: float
    tv_to_optimal: float
    expected_reward_gap: float
    kl_to_target: float


def _step_rows_standard(draft_rows: np.ndarray, target_rows: np.ndarray):
    """Vectorized emitted law + reject mass for the standard rule."""
    accepted = np.minimum(draft_rows, target_rows)
    reject = 1.0 - accepted.sum(axis=1)
    residual = np.maximum(target_rows - draft_rows, 0.0)
    rsum = residual.sum(axis=1)
    degenerate = rsum <= EPS_CLAMP
    # documented fallback: sample the target row directly
    bonus = np.where(degenerate[:, None], target_rows,
                     residual / np.where(degenerate, 1.0, rsum)[:, None])
    emitted = accepted + reject[:, None] * bonus
    return emitted, reject


def _step_rows_shifted(shifted_rows, target_rows, sft_rows, gamma):
    """Vectorized emitted law + reject mass for the shifted rule."""
    if np.any(sft_rows <= 0.0):
        raise ZeroSftMass("sft row has zero mass")
    ratio = target_rows / sft_rows
    accepted = shifted_rows * np.minimum(1.0, ratio)
    reject = 1.0 - accepted.sum(axis=1)
    factor = shifted_rows if gamma == 1.0 else shifted_rows**gamma
    residual = np.maximum(factor * (ratio - 1.0), 0.0)
    rsum = residual.sum(axis=1)
    degenerate = rsum <= EPS_CLAMP
    # documented fallback: sample the shifted-draft row directly
    bonus = np.where(degenerate[:, None], shifted_rows,
                     residual / np.where(degenerate, 1.0, rsum)[:, None])
    emitted = accepted + reject[:, None] * bonus
    return emitted, reject


def exact_step_ss(draft_model: TabularModel, target: TabularModel,
                  ctx: Context) -> StepLaw:
    """Closed-form emitted law of standard speculative sampling."""
    d = draft_model.row_array(ctx.prompt_id, ctx.prefix)[None, :]
    t = target.row_array(ctx.prompt_id, ctx.prefix)[None, :]
    emitted, reject = _step_rows_standard(d, t)
    return StepLaw(ctx, Categorical(emitted[0]), float(reject[0]))


def exact_step_sss(quartet: ModelQuartet, ctx: Context,
                   gamma: float = 1.0) -> StepLaw:
    """Closed-form emitted law of shifted speculative sampling."""
    sh = quartet.shifted_draft.row_array(ctx.prompt_id, ctx.prefix)[None, :]
    t = quartet.target.row_array(ctx.prompt_id, ctx.prefix)[None, :]
    s = quartet.sft.row_array(ctx.prompt_id, ctx.prefix)[None, :]
    emitted, reject = _step_rows_shifted(sh, t, s, gamma)
    return StepLaw(ctx, Categorical(emitted[0]), float(reject[0]))


def step_table_ss(draft_model: TabularModel, target: TabularModel,
                  prompt_id: int):
    """Emitted laws for every context of one prompt, as a flat table."""
    return _step_rows_standard(draft_model.flat(prompt_id),
                               target.flat(prompt_id))


def step_table_sss(quartet: ModelQuartet, prompt_id: int,
                   gamma: float = 1.0):
    return _step_rows_shifted(
        quartet.shifted_draft.flat(prompt_id),
        quartet.target.flat(prompt_id),
        quartet.sft.flat(prompt_id),
        gamma,
    )


def exact_sequence_law(step_fn, prompt_id: int, length: int,
                       vocab_size: int) -> np.ndarray:
    """Chain per-context step laws into the full sequence law.

    ``step_fn(ctx) -> StepLaw``.  Valid because each emitted token's law
    given its prefix is independent of lookahead position.
    """
    if vocab_size**length > 10**6:
        raise EnumerationTooLarge(
            f"{vocab_size}^{length} exceeds the enumeration budget"
        )
    from .models import _decode_prefix

    dist = np.ones(1)
    for depth in range(length):
        rows = np.empty((vocab_size**depth, vocab_size))
        for code in range(vocab_size**depth):
            prefix = _decode_prefix(code, depth, vocab_size)
            rows[code] = step_fn(Context(prompt_id, prefix)).emitted.probs
        dist = (dist[:, None] * rows).reshape(-1)
    return dist


def _chain_step_table(emitted_table: np.ndarray, vocab_size: int,
                      length: int) -> np.ndarray:
    """Fast path of exact_sequence_law for a precomputed step table."""
    if vocab_size**length > 10**6:
        raise EnumerationTooLarge(
            f"{vocab_size}^{length} exceeds the enumeration budget"
        )
    dist = np.ones(1)
    for depth in range(length):
        off = level_offset(vocab_size, depth)
        rows = emitted_table[off : off + vocab_size**depth]
        dist = (dist[:, None] * rows).reshape(-1)
    return dist


def sss_sequence_law(quartet: ModelQuartet, prompt_id: int,
                     length: int | None = None,
                     gamma: float = 1.0) -> np.ndarray:
    """Exact sequence law emitted by shifted speculative sampling."""
    L = quartet.max_depth if length is None else int(length)
    emitted, _ = step_table_sss(quartet, prompt_id, gamma)
    return _chain_step_table(emitted, quartet.vocab_size, L)


def ss_sequence_law(draft_model: TabularModel, target: TabularModel,
                    prompt_id: int, length: int | None = None) -> np.ndarray:
    """Exact sequence law emitted by standard speculative sampling."""
    L = draft_model.max_depth if length is None else int(length)
    emitted, _ = step_table_ss(draft_model, target, prompt_id)
    return _chain_step_table(emitted, draft_model.vocab_size, L)


# --- Monte Carlo bridge -----------------------------------------------------


def _run_kernel(kind: str, models, cfg: LookaheadConfig, prompt_id: int,
                n_runs: int, rng: RngStream):
    """Chunked kernel decode; returns (tokens (n, max_len), counters)."""
    L = cfg.max_length
    counters = np.zeros(_kernels.N_COUNTERS, dtype=np.int64)
    tokens = np.empty((n_runs, L), dtype=np.uint8)
    if kind == "vanilla":
        model = models
        n_draws = L
        args = (model.flat(prompt_id), model.vocab_size, model.max_depth)
    elif kind == "standard":
        draft_model, target = models
        n_draws = L * (2 * cfg.K + 1)
        args = (draft_model.flat(prompt_id), target.flat(prompt_id),
                draft_model.vocab_size, draft_model.max_depth)
    elif kind == "shifted":
        q = models
        n_draws = L * (2 * cfg.K + 1)
        args = (q.shifted_draft.flat(prompt_id), q.target.flat(prompt_id),
                q.sft.flat(prompt_id), cfg.gamma,
                q.vocab_size, q.max_depth)
    else:
        raise ValueError(f"unknown decoder kind {kind!r}")
    done = 0
    while done < n_runs:
        m = min(MC_CHUNK, n_runs - done)
        U = rng.uniforms(MC_CHUNK * n_draws)[: m * n_draws].reshape(m, n_draws)
        out = tokens[done : done + m]
        if kind == "vanilla":
            err = _kernels.decode_batch_vanilla(*args, L, U, out)
            counters[0] += m * L  # target_calls
            counters[2] += m * L  # emitted
        elif kind == "standard":
            err = _kernels.decode_batch_standard(*args, L, cfg.K, U, out,
                                                 counters)
        else:
            err = _kernels.decode_batch_shifted(*args, L, cfg.K, U, out,
                                                counters)
        if err == 1:
            from .errors import ZeroDraftMass
            raise ZeroDraftMass("kernel hit a zero-draft-mass proposal")
        if err == 2:
            raise ZeroSftMass("kernel hit a zero-sft-mass proposal")
        done += m
    return tokens, counters


def tokens_to_codes(tokens: np.ndarray, vocab_size: int) -> np.ndarray:
    """Big-endian base-V sequence code per row."""
    L = tokens.shape[1]
    powers = vocab_size ** np.arange(L - 1, -1, -1, dtype=np.int64)
    return tokens.astype(np.int64) @ powers


def tokens_to_rewards(tokens: np.ndarray, reward: RewardField,
                      prompt_id: int) -> np.ndarray:
    """Total sequence reward per row, cycling contexts at model depth."""
    table = reward.flat(prompt_id)
    V, Lm = reward.vocab_size, reward.max_depth
    n, L = tokens.shape
    ctx = np.zeros(n, dtype=np.int64)
    depth = 0
    out = np.zeros(n)
    for t in range(L):
        tok = tokens[:, t].astype(np.int64)
        out += table[ctx, tok]
        if depth + 1 >= Lm:
            ctx = np.zeros(n, dtype=np.int64)
            depth = 0
        else:
            off, noff = level_offset(V, depth), level_offset(V, depth + 1)
            ctx = noff + (ctx - off) * V + tok
            depth += 1
    return out


def counters_dict(counters: np.ndarray) -> dict:
    return dict(zip(_kernels.COUNTER_NAMES, (int(c) for c in counters)))


def monte_carlo_law(kind: str, models, cfg: LookaheadConfig, prompt_id: int,
                    n_runs: int, rng: RngStream):
    """Empirical sequence law (frequency vector over V**L codes) plus
    aggregate trace counters from ``n_runs`` kernel decodes."""
    if n_runs < 10**4:
        raise ValueError("n_runs must be >= 10^4 for stable statistics")
    if kind == "vanilla":
        V = models.vocab_size
    elif kind == "standard":
        V = models[0].vocab_size
    else:
        V = models.vocab_size
    if V**cfg.max_length > 10**6:
        raise EnumerationTooLarge("sequence space too large for a law table")
    tokens, counters = _run_kernel(kind, models, cfg, prompt_id, n_runs, rng)
    codes = tokens_to_codes(tokens, V)
    counts = np.bincount(codes, minlength=V**cfg.max_length)
    return counts / n_runs, counts, counters_dict(counters)


def empirical_tv(freq: np.ndarray, exact: np.ndarray) -> float:
    return 0.5 * float(np.abs(freq - exact).sum())


# --- acceptance-rate accounting --------------------------------------------


def analytic_acceptance(proposal_row, target_row, denom_row) -> float:
    """sum_x proposal(x) * min(1, target(x)/denom(x)) at one context."""
    p = np.asarray(proposal_row, dtype=np.float64)
    t = np.asarray(target_row, dtype=np.float64)
    d = np.asarray(denom_row, dtype=np.float64)
    mask = p > 0
    if np.any(d[mask] <= 0):
        raise ZeroSftMass("zero denominator mass under the proposal support")
    acc = np.zeros_like(p)
    acc[mask] = p[mask] * np.minimum(1.0, t[mask] / d[mask])
    return float(acc.sum())


def acceptance_table(quartets, rule: str, draft_choice: str,
                     n_blocks: int, rng: RngStream, K: int = 2):
    """Mean and standard error of the per-verified-token acceptance rate
    across quartets, for one (rule, draft) configuration.

    rule: 'standard' (accept on target/draft) or 'shifted' (accept on
    target/sft).  draft_choice: 'sft' or 'shifted_draft' selects the
    proposal model.
    """
    if rule not in ("standard", "shifted"):
        raise ValueError("rule must be 'standard' or 'shifted'")
    if draft_choice not in ("sft", "shifted_draft"):
        raise ValueError("draft_choice must be 'sft' or 'shifted_draft'")
    rates = []
    for i, q in enumerate(quartets):
        stream = rng.spawn(rng.stream_id + 1 + i)
        proposal = q.sft if draft_choice == "sft" else q.shifted_draft
        cfg = LookaheadConfig(K=K, max_length=q.max_depth)
        n_runs = max(10**4, n_blocks)
        if rule == "standard":
            _, counters = _run_kernel("standard", (proposal, q.target), cfg,
                                      q.prompt_ids[0], n_runs, stream)
        else:
            # the shifted rule verifies against sft regardless of the
            # proposal model
            synthetic = ModelQuartet(
                sft=q.sft, shifted_draft=proposal, target=q.target,
                optimal=q.optimal, reward=q.reward, matched=False,
            )
            _, counters = _run_kernel("shifted", synthetic, cfg,
                                      q.prompt_ids[0], n_runs, stream)
        cd = counters_dict(counters)
        rates.append(cd["accepted"] / cd["verified"])
    rates = np.asarray(rates)
    se = rates.std(ddof=1) / np.sqrt(rates.size) if rates.size > 1 else 0.0
    return float(rates.mean()), float(se), rates


# --- distortion scans -------------------------------------------------------


def context_mismatch(quartet: ModelQuartet, prompt_id: int) -> float:
    """Mass-weighted mean of per-context |Z_target / Z_sft - 1|.

    Contexts are weighted by their visit probability under the optimal
    model, so the statistic is invariant to vocabulary relabeling.
    """
    w = quartet.reward.weight_table(prompt_id)
    zd = (quartet.sft.flat(prompt_id) * w).sum(axis=1)
    zs = (quartet.target.flat(prompt_id) * w).sum(axis=1)
    per_ctx = np.abs(zs / zd - 1.0)
    V, L = quartet.vocab_size, quartet.max_depth
    opt = quartet.optimal.flat(prompt_id)
    weights = np.empty(per_ctx.size)
    reach = np.ones(1)
    for depth in range(L):
        off = level_offset(V, depth)
        weights[off : off + reach.size] = reach
        reach = (reach[:, None] * opt[off : off + reach.size]).reshape(-1)
    weights /= weights.sum()
    return float(per_ctx @ weights)


def distortion_report(quartet: ModelQuartet, prompt_id: int = 0,
                      gamma: float = 1.0) -> DistortionReport:
    """Distortion metrics of the exact SSS emitted law for one quartet."""
    V, L = quartet.vocab_size, quartet.max_depth
    emitted = sss_sequence_law(quartet, prompt_id, L, gamma)
    optimal = sequence_distribution(quartet.optimal, prompt_id, L)
    target = sequence_distribution(quartet.target, prompt_id, L)
    r = sequence_rewards(quartet.reward, prompt_id, L)
    tv = 0.5 * float(np.abs(emitted - optimal).sum())
    gap = float(optimal @ r) - float(emitted @ r)
    mask = emitted > 0
    kl = float(np.sum(emitted[mask] * np.log(emitted[mask] / target[mask])))
    return DistortionReport(
        mismatch=context_mismatch(quartet, prompt_id),
        tv_to_optimal=tv,
        expected_reward_gap=gap,
        kl_to_target=kl,
    )


def distortion_scan(sft: TabularModel, reward: RewardField, mix_grid,
                    rng: RngStream) -> list:
    """Reports for targets interpolated between matched and random.

    Each grid value m builds target = (1 - m) * matched + m * random,
    so mismatch grows with m; reports come back sorted by |mismatch|.
    """
    matched = gen_matched_target(sft, reward, 0.5, rng)
    reports = []
    for m in mix_grid:
        random_target = gen_random_model(sft.vocab_size, sft.max_depth, 1.0,
                                         rng, n_prompts=len(sft.prompt_ids))
        tables = {
            pid: (1.0 - m) * matched.flat(pid) + m * random_target.flat(pid)
            for pid in sft.prompt_ids
        }
        target = TabularModel(sft.vocab_size, sft.max_depth, tables)
        q = ModelQuartet(
            sft=sft,
            shifted_draft=build_shifted_model(sft, reward),
            target=target,
            optimal=rlhf_optimal(target, reward),
            reward=reward,
            matched=(m == 0.0),
        )
        reports.append(distortion_report(q))
    return sorted(reports, key=lambda rep: abs(rep.mismatch))


# --- simple reward-shifted decoding baselines -------------------------------


def best_of_n(model: TabularModel, reward: RewardField, N: int, L: int,
              prompt_id: int, rng: RngStream):
    """Best-of-N: N vanilla samples, keep the reward argmax.

    Target calls are counted as N * L (one forward pass per token per
    candidate)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    cfg = LookaheadConfig(K=1, max_length=L)
    n_draws = L
    U = rng.uniforms(N * n_draws).reshape(N, n_draws)
    tokens = np.empty((N, L), dtype=np.uint8)
    _kernels.decode_batch_vanilla(model.flat(prompt_id), model.vocab_size,
                                  model.max_depth, L, U, tokens)
    rewards = tokens_to_rewards(tokens, reward, prompt_id)
    best = int(np.argmax(rewards))
    counters = {"target_calls": N * L, "draft_calls": 0,
                "emitted": N * L, "best_reward": float(rewards[best])}
    return tuple(int(t) for t in tokens[best]), counters


def rejection_baseline(model: TabularModel, reward: RewardField,
                       threshold: float, max_attempts: int, L: int,
                       prompt_id: int, rng: RngStream):
    """Sample until the sequence reward clears the threshold; return the
    first success, else the best of all attempts."""
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    best_seq, best_r = None, -np.inf
    attempts = 0
    tokens = np.empty((1, L), dtype=np.uint8)
    for _ in range(max_attempts):
        attempts += 1
        U = rng.uniforms(L).reshape(1, L)
        _kernels.decode_batch_vanilla(model.flat(prompt_id),
                                      model.vocab_size, model.max_depth,
                                      L, U, tokens)
        r = float(tokens_to_rewards(tokens, reward, prompt_id)[0])
        if r > best_r:
            best_seq, best_r = tuple(int(t) for t in tokens[0]), r
        if r >= threshold:
            break
    counters = {"target_calls": attempts * L, "attempts": attempts,
                "best_reward": best_r}
    return best_seq, counters
