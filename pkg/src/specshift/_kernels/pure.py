"""Pure-Python decode kernels: the fallback backend.

These loops are the reference semantics for the compiled extension in
``specshift._speckern``; the two backends consume uniforms in the same
order and perform floating-point operations in the same sequence, so
their outputs are bit-for-bit identical.

Draw schedule per block (fixed so traces replay across rule variants):
K_eff proposal draws, then K_eff acceptance draws (consumed even when
the acceptance probability is one or a rejection occurs earlier), then
one draw for the bonus or extra token when applicable.

Counter layout (int64[8]):
[0] target_calls  [1] draft_calls  [2] emitted  [3] proposed
[4] verified      [5] accepted     [6] bonus    [7] extra
"""

from __future__ import annotations

EPS_CLAMP = 1e-12

N_COUNTERS = 8
(C_TARGET_CALLS, C_DRAFT_CALLS, C_EMITTED, C_PROPOSED,
 C_VERIFIED, C_ACCEPTED, C_BONUS, C_EXTRA) = range(N_COUNTERS)


def _offsets(vocab, depth):
    offs = [0] * (depth + 1)
    for d in range(depth):
        offs[d + 1] = offs[d] + vocab**d
    return offs


def _invcdf(row, vocab, u):
    c = 0.0
    for i in range(vocab - 1):
        c += row[i]
        if u < c:
            return i
    # u beyond the accumulated mass: last positive cell
    for i in range(vocab - 1, -1, -1):
        if row[i] > 0.0:
            return i
    return vocab - 1


def _advance(ctx, depth, tok, vocab, model_depth, offs):
    if depth + 1 >= model_depth:
        return 0, 0
    return offs[depth + 1] + (ctx - offs[depth]) * vocab + tok, depth + 1


def decode_batch_vanilla(table, vocab, model_depth, max_len, U, tokens_out):
    """Ancestral sampling; one uniform per emitted token."""
    offs = _offsets(vocab, model_depth)
    n = U.shape[0]
    for r in range(n):
        ctx, depth = 0, 0
        for t in range(max_len):
            tok = _invcdf(table[ctx], vocab, U[r, t])
            tokens_out[r, t] = tok
            ctx, depth = _advance(ctx, depth, tok, vocab, model_depth, offs)
    return 0


def _residual_sample(res_row, vocab, u):
    total = 0.0
    for i in range(vocab):
        if res_row[i] > 0.0:
            total += res_row[i]
    if total <= EPS_CLAMP:
        return -1  # degenerate: caller falls back
    thresh = u * total
    c = 0.0
    for i in range(vocab - 1):
        if res_row[i] > 0.0:
            c += res_row[i]
            if thresh < c:
                return i
    for i in range(vocab - 1, -1, -1):
        if res_row[i] > 0.0:
            return i
    return vocab - 1


def decode_batch_standard(draft, target, vocab, model_depth, max_len, K,
                          U, tokens_out, counters):
    """Standard speculative sampling (accept on target/draft ratio,
    residual bonus on rejection, extra target token on full acceptance)."""
    offs = _offsets(vocab, model_depth)
    n = U.shape[0]
    props = [0] * K
    ctxs = [0] * K
    res = [0.0] * vocab
    for r in range(n):
        ctx, depth = 0, 0
        t = 0
        c = 0
        while t < max_len:
            k_eff = K if K < max_len - t else max_len - t
            hctx, hdepth = ctx, depth
            for k in range(k_eff):
                ctxs[k] = hctx
                tok = _invcdf(draft[hctx], vocab, U[r, c])
                c += 1
                props[k] = tok
                hctx, hdepth = _advance(hctx, hdepth, tok, vocab,
                                        model_depth, offs)
            counters[C_TARGET_CALLS] += 1
            counters[C_DRAFT_CALLS] += k_eff
            counters[C_PROPOSED] += k_eff
            u_base = c
            c += k_eff
            rejected_at = -1
            for k in range(k_eff):
                tok = props[k]
                d = draft[ctxs[k]][tok]
                if d <= 0.0:
                    return 1  # zero draft mass on a proposed token
                ratio = target[ctxs[k]][tok] / d
                counters[C_VERIFIED] += 1
                if U[r, u_base + k] < ratio:
                    counters[C_ACCEPTED] += 1
                else:
                    rejected_at = k
                    break
            if rejected_at >= 0:
                for k in range(rejected_at):
                    tokens_out[r, t] = props[k]
                    ctx, depth = _advance(ctx, depth, props[k], vocab,
                                          model_depth, offs)
                    t += 1
                rc = ctxs[rejected_at]
                for i in range(vocab):
                    res[i] = target[rc][i] - draft[rc][i]
                tok = _residual_sample(res, vocab, U[r, c])
                if tok < 0:
                    tok = _invcdf(target[rc], vocab, U[r, c])
                c += 1
                counters[C_BONUS] += 1
                tokens_out[r, t] = tok
                ctx, depth = _advance(ctx, depth, tok, vocab,
                                      model_depth, offs)
                t += 1
            else:
                for k in range(k_eff):
                    tokens_out[r, t] = props[k]
                    ctx, depth = _advance(ctx, depth, props[k], vocab,
                                          model_depth, offs)
                    t += 1
                if t < max_len:
                    tok = _invcdf(target[ctx], vocab, U[r, c])
                    c += 1
                    counters[C_EXTRA] += 1
                    tokens_out[r, t] = tok
                    ctx, depth = _advance(ctx, depth, tok, vocab,
                                          model_depth, offs)
                    t += 1
        counters[C_EMITTED] += t
    return 0


def decode_batch_shifted(shifted, target, sft, gamma, vocab, model_depth,
                         max_len, K, U, tokens_out, counters):
    """Shifted speculative sampling: proposals from the shifted draft,
    acceptance on the target/sft ratio, shifted residual bonus, and no
    extra token on full acceptance."""
    offs = _offsets(vocab, model_depth)
    n = U.shape[0]
    props = [0] * K
    ctxs = [0] * K
    res = [0.0] * vocab
    for r in range(n):
        ctx, depth = 0, 0
        t = 0
        c = 0
        while t < max_len:
            k_eff = K if K < max_len - t else max_len - t
            hctx, hdepth = ctx, depth
            for k in range(k_eff):
                ctxs[k] = hctx
                tok = _invcdf(shifted[hctx], vocab, U[r, c])
                c += 1
                props[k] = tok
                hctx, hdepth = _advance(hctx, hdepth, tok, vocab,
                                        model_depth, offs)
            counters[C_TARGET_CALLS] += 1
            counters[C_DRAFT_CALLS] += k_eff
            counters[C_PROPOSED] += k_eff
            u_base = c
            c += k_eff
            rejected_at = -1
            for k in range(k_eff):
                tok = props[k]
                s = sft[ctxs[k]][tok]
                if s <= 0.0:
                    return 2  # zero sft mass on a proposed token
                ratio = target[ctxs[k]][tok] / s
                counters[C_VERIFIED] += 1
                if U[r, u_base + k] < ratio:
                    counters[C_ACCEPTED] += 1
                else:
                    rejected_at = k
                    break
            if rejected_at >= 0:
                for k in range(rejected_at):
                    tokens_out[r, t] = props[k]
                    ctx, depth = _advance(ctx, depth, props[k], vocab,
                                          model_depth, offs)
                    t += 1
                rc = ctxs[rejected_at]
                for i in range(vocab):
                    s = sft[rc][i]
                    if s <= 0.0:
                        return 2
                    factor = shifted[rc][i] if gamma == 1.0 \
                        else shifted[rc][i] ** gamma
                    res[i] = factor * (target[rc][i] / s - 1.0)
                tok = _residual_sample(res, vocab, U[r, c])
                if tok < 0:
                    tok = _invcdf(shifted[rc], vocab, U[r, c])
                c += 1
                counters[C_BONUS] += 1
                tokens_out[r, t] = tok
                ctx, depth = _advance(ctx, depth, tok, vocab,
                                      model_depth, offs)
                t += 1
            else:
                for k in range(k_eff):
                    tokens_out[r, t] = props[k]
                    ctx, depth = _advance(ctx, depth, props[k], vocab,
                                          model_depth, offs)
                    t += 1
        counters[C_EMITTED] += t
    return 0
