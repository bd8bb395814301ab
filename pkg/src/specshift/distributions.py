"""Exact categorical-distribution arithmetic and statistics.

Everything downstream (models, decoders, oracles) is built on the
operations here: the clamp-normalization operator, total-variation and
KL divergences, deterministic inverse-CDF sampling, and a Pearson
goodness-of-fit test with automatic cell pooling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import (
    DegenerateResidual,
    DimensionMismatch,
    InsufficientSamples,
    SupportViolation,
)
from .rng import RngStream

#: Below this total positive mass a residual counts as numerically empty
#: and the caller's documented fallback branch fires.  Rejection
#: probability equals residual mass, so the fallback is reached with
#: probability <= EPS_CLAMP and cannot bias results measurably.
EPS_CLAMP = 1e-12

#: Construction tolerance on the sum of a probability vector.
SUM_ATOL = 1e-9


@dataclass(frozen=True)
class Categorical:
    """A probability vector over a finite vocabulary.

    Entries are validated (nonnegative, sum within ``SUM_ATOL`` of one,
    length >= 2) and renormalized once at construction; the stored
    vector is immutable afterwards.
    """

    probs: np.ndarray = field()

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("probs must be a vector of length >= 2")
        if np.any(p < 0):
            raise ValueError("probs must be nonnegative")
        total = float(p.sum())
        if abs(total - 1.0) > SUM_ATOL:
            raise ValueError(f"probs sum to {total}, not 1 within {SUM_ATOL}")
        if total != 1.0:
            p = p / total
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def vocab_size(self) -> int:
        return self.probs.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Categorical) and np.array_equal(
            self.probs, other.probs
        )

    def __hash__(self):
        return hash(self.probs.tobytes())


def clamp_normalize(weights) -> Categorical:
    """The operator (f)_+ = max(0, f) / sum max(0, f).

    Entries <= 0 map to exactly 0; positive entries keep their relative
    ratios.  Raises :class:`DegenerateResidual` when no positive mass
    remains, signalling the caller's fallback branch.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size < 2:
        raise ValueError("weights must be a vector of length >= 2")
    pos = np.maximum(w, 0.0)
    total = float(pos.sum())
    if total <= EPS_CLAMP:
        raise DegenerateResidual(f"residual mass {total} <= {EPS_CLAMP}")
    return Categorical(pos / total)


def _check_same_size(p: Categorical, q: Categorical) -> None:
    if p.vocab_size != q.vocab_size:
        raise DimensionMismatch(
            f"vocab sizes differ: {p.vocab_size} vs {q.vocab_size}"
        )


def tv_distance(p: Categorical, q: Categorical) -> float:
    """Total variation distance (1/2) sum |p_i - q_i|, in [0, 1]."""
    _check_same_size(p, q)
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def kl_divergence(p: Categorical, q: Categorical) -> float:
    """KL(p || q) = sum p_i log(p_i / q_i), with 0 log 0 := 0."""
    _check_same_size(p, q)
    pp, qq = p.probs, q.probs
    mask = pp > 0
    if np.any(qq[mask] == 0):
        raise SupportViolation("p has mass where q has none")
    return float(np.sum(pp[mask] * np.log(pp[mask] / qq[mask])))


def inverse_cdf_index(probs: np.ndarray, u: float) -> int:
    """First index i with u < cumsum(probs)[i], clamped to the last cell.

    This fixed left-to-right walk over the stored symbol order is the
    single sampling primitive of the whole library; the compiled kernels
    reproduce it operation-for-operation.
    """
    c = 0.0
    last = probs.size - 1
    for i in range(last):
        c += probs[i]
        if u < c:
            return i
    return last


def sample(p: Categorical, rng: RngStream) -> int:
    """Draw one symbol index by inverse CDF over the stored order."""
    return inverse_cdf_index(p.probs, rng.uniform())


def sample_many(p: Categorical, rng: RngStream, n: int) -> np.ndarray:
    """Vectorized equivalent of ``n`` successive :func:`sample` calls."""
    u = rng.uniforms(n)
    cdf = np.cumsum(p.probs)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, p.vocab_size - 1)


def pool_cells(counts: np.ndarray, expected: np.ndarray, min_expected: float = 5.0):
    """Greedily merge low-expectation cells until all pooled cells pass.

    Cells are sorted by expected count descending; trailing cells are
    merged into one pooled cell, growing it until it reaches the
    minimum.  Raises :class:`InsufficientSamples` when fewer than two
    cells survive.
    """
    order = np.argsort(expected)[::-1]
    exp_sorted = expected[order]
    cnt_sorted = counts[order]
    # find the largest prefix of singleton cells such that both every
    # singleton and the pooled remainder meet the threshold
    k = exp_sorted.size
    while k > 1:
        head_ok = exp_sorted[: k - 1].min() >= min_expected
        tail = float(exp_sorted[k - 1 :].sum())
        if head_ok and tail >= min_expected:
            break
        k -= 1
    if k <= 1:
        if exp_sorted.size >= 2 and exp_sorted.min() >= min_expected:
            return counts.copy(), expected.copy()
        raise InsufficientSamples("pooling cannot reach the minimum expected count")
    if k == exp_sorted.size:
        pooled_cnt = cnt_sorted
        pooled_exp = exp_sorted
    else:
        pooled_cnt = np.concatenate(
            [cnt_sorted[: k - 1], [cnt_sorted[k - 1 :].sum()]]
        )
        pooled_exp = np.concatenate(
            [exp_sorted[: k - 1], [exp_sorted[k - 1 :].sum()]]
        )
    if pooled_exp.size < 2 or pooled_exp.min() < min_expected:
        raise InsufficientSamples("pooling cannot reach the minimum expected count")
    return pooled_cnt, pooled_exp


def chi_square_gof(counts, expected: Categorical, n: int):
    """Pearson chi-square statistic and upper-tail p-value.

    ``counts`` are observed cell counts summing to ``n``; cells whose
    expected count falls below 5 are pooled first.  Degrees of freedom
    are (pooled cells - 1).
    """
    c = np.asarray(counts, dtype=np.int64)
    if c.size != expected.vocab_size:
        raise DimensionMismatch("counts length != vocab size")
    if int(c.sum()) != int(n):
        raise ValueError(f"counts sum to {c.sum()}, expected n={n}")
    exp_counts = expected.probs * float(n)
    pc, pe = pool_cells(c.astype(np.float64), exp_counts)
    # guard against pooling-induced drift between the two totals
    pe = pe * (pc.sum() / pe.sum())
    statistic = float(np.sum((pc - pe) ** 2 / pe))
    dof = pc.size - 1
    pvalue = float(stats.chi2.sf(statistic, dof))
    return statistic, pvalue


def two_sample_chi_square(counts_a, counts_b, min_expected: float = 5.0):
    """Chi-square homogeneity test between two count vectors.

    Used for pairwise concordance of Monte Carlo runs (e.g. different
    lookahead values on the same models).  Cells with small pooled
    expectation are merged before testing.
    """
    a = np.asarray(counts_a, dtype=np.float64)
    b = np.asarray(counts_b, dtype=np.float64)
    if a.size != b.size:
        raise DimensionMismatch("count vectors differ in length")
    tot = a + b
    pooled_a, _ = pool_cells(a, tot, min_expected=2 * min_expected)
    pooled_b, _ = pool_cells(b, tot, min_expected=2 * min_expected)
    table = np.vstack([pooled_a, pooled_b])
    keep = table.sum(axis=0) > 0
    table = table[:, keep]
    if table.shape[1] < 2:
        raise InsufficientSamples("not enough occupied cells")
    res = stats.chi2_contingency(table)
    return float(res.statistic), float(res.pvalue)
