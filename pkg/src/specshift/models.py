"""Tabular autoregressive policies and the reward fields linking them.

A :class:`TabularModel` stores one next-token law per context (prompt id
plus token prefix) as a flat ``(n_contexts, vocab)`` array per prompt,
indexed by a fixed base-``V`` enumeration of prefixes.  The same layout
backs :class:`RewardField`, so exponential reward shifts and the
matched-normalizer construction are plain row-wise array arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .distributions import Categorical
from .errors import (
    EnumerationTooLarge,
    NoFeasibleVertex,
    OverflowGuard,
    SupportViolation,
)
from .rng import RngStream

#: Hard ceiling on vocab ** length for exact enumeration.
ENUM_LIMIT = 10**6

#: |r / beta| beyond this overflows exp() in double precision.
EXP_GUARD = 700.0


def n_contexts(vocab_size: int, max_depth: int) -> int:
    """Number of prefixes of length < max_depth: (V^L - 1) / (V - 1)."""
    return (vocab_size**max_depth - 1) // (vocab_size - 1)


def level_offset(vocab_size: int, depth: int) -> int:
    """Row index of the first context with a prefix of given length."""
    return (vocab_size**depth - 1) // (vocab_size - 1)


def context_index(vocab_size: int, prefix) -> int:
    """Flat row index of a prefix in the fixed base-V enumeration."""
    idx = 0
    for tok in prefix:
        if not 0 <= tok < vocab_size:
            raise ValueError(f"token {tok} out of range for vocab {vocab_size}")
        idx = idx * vocab_size + tok
    return level_offset(vocab_size, len(prefix)) + idx


@dataclass(frozen=True)
class Context:
    """Conditioning state of a per-token policy: prompt id and prefix."""

    prompt_id: int
    prefix: tuple = ()

    def child(self, token: int) -> "Context":
        return Context(self.prompt_id, self.prefix + (int(token),))


class TabularModel:
    """A complete map from contexts to next-token categorical laws.

    ``tables[prompt_id]`` is a read-only ``(n_contexts, vocab)`` float64
    array whose rows each sum to one.  ``eos_token``, when set, makes
    contexts that already contain it absorbing.
    """

    def __init__(self, vocab_size: int, max_depth: int, tables: dict,
                 eos_token: int | None = None, validate: bool = True):
        if vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        self.vocab_size = int(vocab_size)
        self.max_depth = int(max_depth)
        self.eos_token = eos_token
        nc = n_contexts(vocab_size, max_depth)
        self.tables = {}
        for pid, arr in tables.items():
            a = np.ascontiguousarray(arr, dtype=np.float64)
            if a.shape != (nc, vocab_size):
                raise ValueError(
                    f"table for prompt {pid} has shape {a.shape}, "
                    f"expected {(nc, vocab_size)}"
                )
            if validate:
                if np.any(a < 0):
                    raise ValueError("negative probability in table")
                if np.max(np.abs(a.sum(axis=1) - 1.0)) > 1e-9:
                    raise ValueError("table rows must sum to 1")
            a = a.copy()
            if eos_token is not None:
                self._make_absorbing(a)
            a.flags.writeable = False
            self.tables[int(pid)] = a

    def _make_absorbing(self, table: np.ndarray) -> None:
        V, L, e = self.vocab_size, self.max_depth, self.eos_token
        for depth in range(1, L):
            off = level_offset(V, depth)
            for code in range(V**depth):
                prefix_has_eos = False
                c = code
                for _ in range(depth):
                    if c % V == e:
                        prefix_has_eos = True
                        break
                    c //= V
                if prefix_has_eos:
                    row = np.zeros(V)
                    row[e] = 1.0
                    table[off + code] = row

    @property
    def prompt_ids(self) -> list:
        return sorted(self.tables)

    @property
    def n_contexts(self) -> int:
        return n_contexts(self.vocab_size, self.max_depth)

    def flat(self, prompt_id: int) -> np.ndarray:
        """The read-only (n_contexts, vocab) table for one prompt."""
        return self.tables[prompt_id]

    def row(self, ctx: Context) -> Categorical:
        """The next-token law at a context."""
        if len(ctx.prefix) >= self.max_depth:
            raise ValueError("prefix length must be < max_depth")
        idx = context_index(self.vocab_size, ctx.prefix)
        return Categorical(self.tables[ctx.prompt_id][idx])

    def row_array(self, prompt_id: int, prefix) -> np.ndarray:
        """Raw probability row without Categorical wrapping (hot path)."""
        return self.tables[prompt_id][context_index(self.vocab_size, prefix)]

    def contexts(self, prompt_id: int) -> Iterator[Context]:
        """All contexts of this prompt in flat-index order."""
        V = self.vocab_size
        for depth in range(self.max_depth):
            for code in range(V**depth):
                prefix = _decode_prefix(code, depth, V)
                yield Context(prompt_id, prefix)


def _decode_prefix(code: int, depth: int, vocab_size: int) -> tuple:
    toks = []
    for _ in range(depth):
        toks.append(code % vocab_size)
        code //= vocab_size
    return tuple(reversed(toks))


class RewardField:
    """Per-context token-level reward increments with inverse temperature.

    ``values[prompt_id]`` matches the model table layout; the sequence
    reward is the sum of increments along the path.
    """

    def __init__(self, vocab_size: int, max_depth: int, values: dict, beta: float):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.vocab_size = int(vocab_size)
        self.max_depth = int(max_depth)
        self.beta = float(beta)
        nc = n_contexts(vocab_size, max_depth)
        self.values = {}
        for pid, arr in values.items():
            a = np.ascontiguousarray(arr, dtype=np.float64)
            if a.shape != (nc, vocab_size):
                raise ValueError("reward table shape mismatch")
            if not np.all(np.isfinite(a)):
                raise ValueError("reward increments must be finite")
            a = a.copy()
            a.flags.writeable = False
            self.values[int(pid)] = a

    def flat(self, prompt_id: int) -> np.ndarray:
        return self.values[prompt_id]

    def increment(self, ctx: Context, token: int) -> float:
        idx = context_index(self.vocab_size, ctx.prefix)
        return float(self.values[ctx.prompt_id][idx, token])

    def sequence_reward(self, prompt_id: int, seq) -> float:
        """Sum of token-level increments along a sequence."""
        total = 0.0
        prefix = []
        V, L = self.vocab_size, self.max_depth
        for tok in seq:
            # long cost-accounting runs cycle the context at max depth
            if len(prefix) >= L:
                prefix = []
            idx = context_index(V, prefix)
            total += float(self.values[prompt_id][idx, int(tok)])
            prefix.append(int(tok))
        return total

    def weight_table(self, prompt_id: int) -> np.ndarray:
        """exp(r / beta) per context row, with an overflow guard."""
        scaled = self.values[prompt_id] / self.beta
        if np.max(np.abs(scaled)) > EXP_GUARD:
            raise OverflowGuard("|r / beta| > 700 would overflow exp()")
        return np.exp(scaled)


def gen_random_model(vocab_size: int, max_depth: int, concentration: float,
                     rng: RngStream, n_prompts: int = 1) -> TabularModel:
    """Independent symmetric-Dirichlet rows for every context."""
    if vocab_size < 2:
        raise ValueError("vocab_size must be >= 2")
    if concentration <= 0:
        raise ValueError("concentration must be positive")
    nc = n_contexts(vocab_size, max_depth)
    tables = {}
    for pid in range(n_prompts):
        rows = rng.generator.dirichlet(
            np.full(vocab_size, concentration), size=nc
        )
        # Dirichlet draws can underflow to exact zero at small
        # concentration; keep rows strictly positive.
        rows = np.clip(rows, 1e-300, None)
        rows /= rows.sum(axis=1, keepdims=True)
        tables[pid] = rows
    return TabularModel(vocab_size, max_depth, tables)


def gen_random_reward(vocab_size: int, max_depth: int, scale: float,
                      beta: float, rng: RngStream,
                      n_prompts: int = 1) -> RewardField:
    """Token-level increments drawn uniform in [-scale, scale]."""
    nc = n_contexts(vocab_size, max_depth)
    values = {
        pid: (rng.generator.random((nc, vocab_size)) * 2.0 - 1.0) * scale
        for pid in range(n_prompts)
    }
    return RewardField(vocab_size, max_depth, values, beta)


def build_shifted_model(base: TabularModel, reward: RewardField) -> TabularModel:
    """Per-context exponential tilt: rows proportional to p * exp(r/beta)."""
    if (base.vocab_size, base.max_depth) != (reward.vocab_size, reward.max_depth):
        raise ValueError("model and reward field shapes differ")
    tables = {}
    for pid in base.prompt_ids:
        w = reward.weight_table(pid)
        rows = base.flat(pid) * w
        rows = rows / rows.sum(axis=1, keepdims=True)
        tables[pid] = rows
    return TabularModel(base.vocab_size, base.max_depth, tables,
                        eos_token=base.eos_token)


def rlhf_optimal(target: TabularModel, reward: RewardField) -> TabularModel:
    """The tilted target: rows proportional to target * exp(r/beta)."""
    return build_shifted_model(target, reward)


def gen_matched_target(sft: TabularModel, reward: RewardField, mix: float,
                       rng: RngStream) -> TabularModel:
    """A target whose per-context tilt normalizer matches the SFT draft's.

    Per context with weights w = exp(r/beta) and Z_d = sum sft_i w_i,
    any distribution q on the hyperplane sum q_i w_i = Z_d is matched.
    We build a vertex of that polytope from one index below and one
    above Z_d, then mix it convexly with the sft row; both endpoints lie
    on the hyperplane, so the output does too (to rounding).
    """
    if not 0.0 <= mix <= 1.0:
        raise ValueError("mix must lie in [0, 1]")
    V = sft.vocab_size
    tables = {}
    for pid in sft.prompt_ids:
        w = reward.weight_table(pid)
        s = sft.flat(pid)
        out = np.empty_like(s)
        for r in range(s.shape[0]):
            wr, sr = w[r], s[r]
            zd = float(sr @ wr)
            if wr.max() - wr.min() <= 1e-12 * max(1.0, wr.max()):
                # constant weights: every distribution is matched
                out[r] = sr
                continue
            lo = np.flatnonzero(wr < zd)
            hi = np.flatnonzero(wr > zd)
            if lo.size == 0 or hi.size == 0:
                raise NoFeasibleVertex(
                    f"Z_d={zd} outside (min w, max w) at row {r}"
                )
            i = int(lo[rng.generator.integers(lo.size)])
            j = int(hi[rng.generator.integers(hi.size)])
            lam = (wr[j] - zd) / (wr[j] - wr[i])
            u = np.zeros(V)
            u[i], u[j] = lam, 1.0 - lam
            out[r] = (1.0 - mix) * sr + mix * u
        tables[pid] = out
    return TabularModel(sft.vocab_size, sft.max_depth, tables,
                        eos_token=sft.eos_token)


@dataclass(frozen=True)
class ModelQuartet:
    """The four policies of one experiment plus their reward field.

    ``matched`` records whether the per-context tilt normalizers of sft
    and target coincide, the regime where shifted speculative sampling
    is exact.
    """

    sft: TabularModel
    shifted_draft: TabularModel
    target: TabularModel
    optimal: TabularModel
    reward: RewardField
    matched: bool = False

    def __post_init__(self):
        shapes = {
            (m.vocab_size, m.max_depth)
            for m in (self.sft, self.shifted_draft, self.target, self.optimal)
        }
        if len(shapes) != 1:
            raise ValueError("quartet models disagree on vocab or depth")

    @property
    def vocab_size(self) -> int:
        return self.sft.vocab_size

    @property
    def max_depth(self) -> int:
        return self.sft.max_depth

    @property
    def prompt_ids(self) -> list:
        return self.sft.prompt_ids

    def normalizer_gap(self, prompt_id: int) -> float:
        """Max per-context |Z_target / Z_sft - 1| for one prompt."""
        w = self.reward.weight_table(prompt_id)
        zd = (self.sft.flat(prompt_id) * w).sum(axis=1)
        zs = (self.target.flat(prompt_id) * w).sum(axis=1)
        return float(np.max(np.abs(zs / zd - 1.0)))

    def validate(self, atol: float = 1e-12) -> None:
        """Check quartet consistency; raises ValueError on failure."""
        shifted_ref = build_shifted_model(self.sft, self.reward)
        optimal_ref = rlhf_optimal(self.target, self.reward)
        for pid in self.prompt_ids:
            for name, got, ref in (
                ("shifted_draft", self.shifted_draft, shifted_ref),
                ("optimal", self.optimal, optimal_ref),
            ):
                gap = np.abs(got.flat(pid) - ref.flat(pid)).sum(axis=1).max()
                if 0.5 * gap > atol:
                    raise ValueError(f"{name} deviates by tv {0.5 * gap}")
            if self.matched and self.normalizer_gap(pid) > atol:
                raise ValueError("matched flag set but normalizers differ")


def make_quartet(vocab_size: int, max_depth: int, *, beta: float = 0.5,
                 reward_scale: float = 1.0, mix: float = 0.5,
                 concentration: float = 1.0, matched: bool = True,
                 rng: RngStream, n_prompts: int = 1) -> ModelQuartet:
    """Random quartet factory, matched or deliberately unmatched."""
    gen = rng
    sft = gen_random_model(vocab_size, max_depth, concentration, gen, n_prompts)
    reward = gen_random_reward(vocab_size, max_depth, reward_scale, beta,
                               gen, n_prompts)
    if matched:
        target = gen_matched_target(sft, reward, mix, gen)
    else:
        target = gen_random_model(vocab_size, max_depth, concentration,
                                  gen, n_prompts)
    return ModelQuartet(
        sft=sft,
        shifted_draft=build_shifted_model(sft, reward),
        target=target,
        optimal=rlhf_optimal(target, reward),
        reward=reward,
        matched=matched,
    )


def worked_example_quartet() -> ModelQuartet:
    """The three-token, depth-one instance used throughout the tests.

    sft = [0.5, 0.3, 0.2], tilt weights [1, 2, 4], target = [0.3, 0.6,
    0.1]; both normalizers equal 1.9, so the quartet is matched.
    """
    V, L = 3, 1
    sft = TabularModel(V, L, {0: np.array([[0.5, 0.3, 0.2]])})
    beta = 1.0
    rvals = np.log(np.array([[1.0, 2.0, 4.0]])) * beta
    reward = RewardField(V, L, {0: rvals}, beta)
    target = TabularModel(V, L, {0: np.array([[0.3, 0.6, 0.1]])})
    return ModelQuartet(
        sft=sft,
        shifted_draft=build_shifted_model(sft, reward),
        target=target,
        optimal=rlhf_optimal(target, reward),
        reward=reward,
        matched=True,
    )


def _check_enum(vocab_size: int, length: int) -> None:
    if vocab_size**length > ENUM_LIMIT:
        raise EnumerationTooLarge(
            f"{vocab_size}^{length} exceeds the {ENUM_LIMIT} enumeration budget"
        )


def sequence_distribution(model: TabularModel, prompt_id: int,
                          length: int | None = None) -> np.ndarray:
    """Exact law over all length-L sequences, as a (V**L,) vector.

    Sequences are indexed by their big-endian base-V code; use
    :func:`sequence_codes` / :func:`decode_sequence` to translate.
    """
    L = model.max_depth if length is None else int(length)
    if L > model.max_depth:
        raise ValueError("length exceeds model depth")
    V = model.vocab_size
    _check_enum(V, L)
    table = model.flat(prompt_id)
    dist = np.ones(1)
    for depth in range(L):
        off = level_offset(V, depth)
        rows = table[off : off + V**depth]
        dist = (dist[:, None] * rows).reshape(-1)
    return dist


def sequence_rewards(reward: RewardField, prompt_id: int,
                     length: int | None = None) -> np.ndarray:
    """Total sequence reward per big-endian sequence code, (V**L,)."""
    L = reward.max_depth if length is None else int(length)
    V = reward.vocab_size
    _check_enum(V, L)
    table = reward.flat(prompt_id)
    acc = np.zeros(1)
    for depth in range(L):
        off = level_offset(V, depth)
        rows = table[off : off + V**depth]
        acc = (acc[:, None] + rows).reshape(-1)
    return acc


def decode_sequence(code: int, length: int, vocab_size: int) -> tuple:
    """Token tuple for a big-endian base-V sequence code."""
    toks = []
    for _ in range(length):
        toks.append(code % vocab_size)
        code //= vocab_size
    return tuple(reversed(toks))


def sequence_law_as_map(dist: np.ndarray, length: int, vocab_size: int) -> dict:
    """Dict view (token tuple -> probability) of a sequence-law vector."""
    return {
        decode_sequence(i, length, vocab_size): float(p)
        for i, p in enumerate(dist)
    }


def rlhf_objective(candidate: TabularModel, target: TabularModel,
                   reward: RewardField, prompt_id: int) -> float:
    """E_candidate[r] - beta * KL(candidate || target) over full sequences."""
    if candidate.vocab_size != target.vocab_size:
        raise ValueError("candidate and target vocab sizes differ")
    L = candidate.max_depth
    pc = sequence_distribution(candidate, prompt_id, L)
    pt = sequence_distribution(target, prompt_id, L)
    r = sequence_rewards(reward, prompt_id, L)
    mask = pc > 0
    if np.any(pt[mask] == 0):
        raise SupportViolation("candidate has mass where target has none")
    kl = float(np.sum(pc[mask] * np.log(pc[mask] / pt[mask])))
    return float(pc @ r) - reward.beta * kl


def rlhf_objective_closed_form(target: TabularModel, reward: RewardField,
                               prompt_id: int) -> float:
    """beta * log sum_y target(y) exp(r(y)/beta), the optimum value."""
    pt = sequence_distribution(target, prompt_id)
    r = sequence_rewards(reward, prompt_id)
    return reward.beta * float(np.log(np.sum(pt * np.exp(r / reward.beta))))


# --- plain-text model serialization -----------------------------------------
#
# One header line:  specshift-model v=<vocab> d=<depth> eos=<tok|->
# then one record per context and prompt:
#   <prompt_id> <prefix tokens comma-separated or -> <p_0> ... <p_{V-1}>
# Probabilities are printed with 17 significant digits so round-trips
# are exact in double precision.


def save_model(model: TabularModel, path) -> None:
    lines = [
        "specshift-model v=%d d=%d eos=%s"
        % (model.vocab_size, model.max_depth,
           "-" if model.eos_token is None else model.eos_token)
    ]
    for pid in model.prompt_ids:
        for ctx in model.contexts(pid):
            row = model.row_array(pid, ctx.prefix)
            prefix = ",".join(map(str, ctx.prefix)) if ctx.prefix else "-"
            probs = " ".join("%.17g" % p for p in row)
            lines.append(f"{pid} {prefix} {probs}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> TabularModel:
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "specshift-model":
            raise ValueError("not a specshift model file")
        fields = dict(kv.split("=") for kv in header[1:])
        V, L = int(fields["v"]), int(fields["d"])
        eos = None if fields["eos"] == "-" else int(fields["eos"])
        nc = n_contexts(V, L)
        tables: dict = {}
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            pid = int(parts[0])
            prefix = () if parts[1] == "-" else tuple(
                int(t) for t in parts[1].split(",")
            )
            row = np.array([float(x) for x in parts[2:]])
            if pid not in tables:
                tables[pid] = np.zeros((nc, V))
            tables[pid][context_index(V, prefix)] = row
    return TabularModel(V, L, tables, eos_token=eos)
