# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled decode kernels: the hot-loop backend.

Operation-for-operation mirror of ``specshift._kernels.pure``; both
backends consume the same uniforms in the same order and produce
bit-identical outputs.  See the pure module for the draw schedule and
the counter layout.
"""

from libc.math cimport pow

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double EPS_CLAMP = 1e-12

cdef enum:
    C_TARGET_CALLS = 0
    C_DRAFT_CALLS = 1
    C_EMITTED = 2
    C_PROPOSED = 3
    C_VERIFIED = 4
    C_ACCEPTED = 5
    C_BONUS = 6
    C_EXTRA = 7


cdef inline int _invcdf(const double* row, int vocab, double u) nogil:
    cdef double c = 0.0
    cdef int i
    for i in range(vocab - 1):
        c += row[i]
        if u < c:
            return i
    for i in range(vocab - 1, -1, -1):
        if row[i] > 0.0:
            return i
    return vocab - 1


cdef inline int _residual_sample(const double* res, int vocab, double u) nogil:
    cdef double total = 0.0
    cdef double thresh, c
    cdef int i
    for i in range(vocab):
        if res[i] > 0.0:
            total += res[i]
    if total <= EPS_CLAMP:
        return -1
    thresh = u * total
    c = 0.0
    for i in range(vocab - 1):
        if res[i] > 0.0:
            c += res[i]
            if thresh < c:
                return i
    for i in range(vocab - 1, -1, -1):
        if res[i] > 0.0:
            return i
    return vocab - 1


cdef void _fill_offsets(long* offs, int vocab, int depth) nogil:
    cdef int d
    cdef long p = 1
    offs[0] = 0
    for d in range(depth):
        offs[d + 1] = offs[d] + p
        p *= vocab


def decode_batch_vanilla(const double[:, ::1] table, int vocab,
                         int model_depth, int max_len,
                         const double[:, ::1] U,
                         unsigned char[:, ::1] tokens_out):
    cdef long[64] offs
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t r
    cdef int t, tok
    cdef long ctx
    cdef int depth
    if model_depth >= 64:
        raise ValueError("model depth too large for kernel")
    _fill_offsets(offs, vocab, model_depth)
    with nogil:
        for r in range(n):
            ctx = 0
            depth = 0
            for t in range(max_len):
                tok = _invcdf(&table[ctx, 0], vocab, U[r, t])
                tokens_out[r, t] = <unsigned char> tok
                if depth + 1 >= model_depth:
                    ctx = 0
                    depth = 0
                else:
                    ctx = offs[depth + 1] + (ctx - offs[depth]) * vocab + tok
                    depth += 1
    return 0


def decode_batch_standard(const double[:, ::1] draft,
                          const double[:, ::1] target,
                          int vocab, int model_depth, int max_len, int K,
                          const double[:, ::1] U,
                          unsigned char[:, ::1] tokens_out,
                          long long[::1] counters):
    cdef long[64] offs
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t r
    cdef int t, c, k, k_eff, tok, i, rejected_at, u_base
    cdef int depth, hdepth
    cdef long ctx, hctx, rc
    cdef double d, ratio
    cdef long[64] ctxs
    cdef int[64] props
    cdef double[64] res
    cdef int err = 0
    if model_depth >= 64 or K > 64 or vocab > 64:
        raise ValueError("kernel limits exceeded (depth, K, vocab <= 64)")
    _fill_offsets(offs, vocab, model_depth)
    with nogil:
        for r in range(n):
            ctx = 0
            depth = 0
            t = 0
            c = 0
            while t < max_len:
                k_eff = K if K < max_len - t else max_len - t
                hctx = ctx
                hdepth = depth
                for k in range(k_eff):
                    ctxs[k] = hctx
                    tok = _invcdf(&draft[hctx, 0], vocab, U[r, c])
                    c += 1
                    props[k] = tok
                    if hdepth + 1 >= model_depth:
                        hctx = 0
                        hdepth = 0
                    else:
                        hctx = offs[hdepth + 1] + (hctx - offs[hdepth]) * vocab + tok
                        hdepth += 1
                counters[C_TARGET_CALLS] += 1
                counters[C_DRAFT_CALLS] += k_eff
                counters[C_PROPOSED] += k_eff
                u_base = c
                c += k_eff
                rejected_at = -1
                for k in range(k_eff):
                    tok = props[k]
                    d = draft[ctxs[k], tok]
                    if d <= 0.0:
                        err = 1
                        break
                    ratio = target[ctxs[k], tok] / d
                    counters[C_VERIFIED] += 1
                    if U[r, u_base + k] < ratio:
                        counters[C_ACCEPTED] += 1
                    else:
                        rejected_at = k
                        break
                if err != 0:
                    break
                if rejected_at >= 0:
                    for k in range(rejected_at):
                        tokens_out[r, t] = <unsigned char> props[k]
                        if depth + 1 >= model_depth:
                            ctx = 0
                            depth = 0
                        else:
                            ctx = offs[depth + 1] + (ctx - offs[depth]) * vocab + props[k]
                            depth += 1
                        t += 1
                    rc = ctxs[rejected_at]
                    for i in range(vocab):
                        res[i] = target[rc, i] - draft[rc, i]
                    tok = _residual_sample(res, vocab, U[r, c])
                    if tok < 0:
                        tok = _invcdf(&target[rc, 0], vocab, U[r, c])
                    c += 1
                    counters[C_BONUS] += 1
                    tokens_out[r, t] = <unsigned char> tok
                    if depth + 1 >= model_depth:
                        ctx = 0
                        depth = 0
                    else:
                        ctx = offs[depth + 1] + (ctx - offs[depth]) * vocab + tok
                        depth += 1
                    t += 1
                else:
                    for k in range(k_eff):
                        tokens_out[r, t] = <unsigned char> props[k]
                        if depth + 1 >= model_depth:
                            ctx = 0
                            depth = 0
                        else:
                            ctx = offs[depth + 1] + (ctx - offs[depth]) * vocab + props[k]
                            depth += 1
                        t += 1
                    if t < max_len:
                        tok = _invcdf(&target[ctx, 0], vocab, U[r, c])
                        c += 1
                        counters[C_EXTRA] += 1
                        tokens_out[r, t] = <unsigned char> tok
                        if depth + 1 >= model_depth:
                            ctx = 0
                            depth = 0
                        else:
                            ctx = offs[depth + 1] + (ctx - offs[depth]) * vocab + tok
                            depth += 1
                        t += 1
            if err != 0:
                break
            counters[C_EMITTED] += t
    return err


def decode_batch_shifted(const double[:, ::1] shifted,
                         const double[:, ::1] target,
                         const double[:, ::1] sft,
                         double gamma,
                         int vocab, int model_depth, int max_len, int K,
                         const double[:, ::1] U,
                         unsigned char[:, ::1] tokens_out,
                         long long[::1] counters):
    cdef long[64] offs
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t r
    cdef int t, c, k, k_eff, tok, i, rejected_at, u_base
    cdef int depth, hdepth
    cdef long ctx, hctx, rc
    cdef double s, ratio, factor
    cdef long[64] ctxs
    cdef int[64] props
    cdef double[64] res
    cdef int err = 0
    if model_depth >= 64 or K > 64 or vocab > 64:
        raise ValueError("kernel limits exceeded (depth, K, vocab <= 64)")
    _fill_offsets(offs, vocab, model_depth)
    with nogil:
        for r in range(n):
            ctx = 0
            depth = 0
            t = 0
            c = 0
            while t < max_len:
                k_eff = K if K < max_len - t else max_len - t
                hctx = ctx
                hdepth = depth
                for k in range(k_eff):
                    ctxs[k] = hctx
                    tok = _invcdf(&shifted[hctx, 0], vocab, U[r, c])
                    c += 1
                    props[k] = tok
                    if hdepth + 1 >= model_depth:
                        hctx = 0
                        hdepth = 0
                    else:
                        hctx = offs[hdepth + 1] + (hctx - offs[hdepth]) * vocab + tok
                        hdepth += 1
                counters[C_TARGET_CALLS] += 1
                counters[C_DRAFT_CALLS] += k_eff
                counters[C_PROPOSED] += k_eff
                u_base = c
                c += k_eff
                rejected_at = -1
                for k in range(k_eff):
                    tok = props[k]
                    s = sft[ctxs[k], tok]
                    if s <= 0.0:
                        err = 2
                        break
                    ratio = target[ctxs[k], tok] / s
                    counters[C_VERIFIED] += 1
                    if U[r, u_base + k] < ratio:
                        counters[C_ACCEPTED] += 1
                    else:
                        rejected_at = k
                        break
                if err != 0:
                    break
                if rejected_at >= 0:
                    for k in range(rejected_at):
                        tokens_out[r, t] = <unsigned char> props[k]
                        if depth + 1 >= model_depth:
                            ctx = 0
                            depth = 0
                        else:
                            ctx = offs[depth + 1] + (ctx - offs[depth]) * vocab + props[k]
                            depth += 1
                        t += 1
                    rc = ctxs[rejected_at]
                    for i in range(vocab):
                        s = sft[rc, i]
                        if s <= 0.0:
                            err = 2
                            break
                        if gamma == 1.0:
                            factor = shifted[rc, i]
                        else:
                            factor = pow(shifted[rc, i], gamma)
                        res[i] = factor * (target[rc, i] / s - 1.0)
                    if err != 0:
                        break
                    tok = _residual_sample(res, vocab, U[r, c])
                    if tok < 0:
                        tok = _invcdf(&shifted[rc, 0], vocab, U[r, c])
                    c += 1
                    counters[C_BONUS] += 1
                    tokens_out[r, t] = <unsigned char> tok
                    if depth + 1 >= model_depth:
                        ctx = 0
                        depth = 0
                    else:
                        ctx = offs[depth + 1] + (ctx - offs[depth]) * vocab + tok
                        depth += 1
                    t += 1
                else:
                    for k in range(k_eff):
                        tokens_out[r, t] = <unsigned char> props[k]
                        if depth + 1 >= model_depth:
                            ctx = 0
                            depth = 0
                        else:
                            ctx = offs[depth + 1] + (ctx - offs[depth]) * vocab + props[k]
                            depth += 1
                        t += 1
            if err != 0:
                break
            counters[C_EMITTED] += t
    return err
