"""Throughput comparison of the decode-kernel backends.

Runs identical seeded Monte Carlo decode batches through the compiled
extension and the pure-Python fallback, verifies the outputs are
bit-for-bit identical, and reports decodes per second for each.

Usage: python benchmarks/bench_backends.py [--runs N] [--vocab V]
"""

import argparse
import time

import numpy as np

from specshift import RngStream, make_quartet
from specshift._kernels import N_COUNTERS, get_backend


def bench(backend, kind, quartet, K, L, U, gamma=1.0):
    n = U.shape[0]
    tokens = np.empty((n, L), dtype=np.uint8)
    counters = np.zeros(N_COUNTERS, dtype=np.int64)
    start = time.perf_counter()
    if kind == "vanilla":
        err = backend.decode_batch_vanilla(
            quartet.target.flat(0), quartet.vocab_size, quartet.max_depth,
            L, U, tokens,
        )
    elif kind == "standard":
        err = backend.decode_batch_standard(
            quartet.sft.flat(0), quartet.target.flat(0),
            quartet.vocab_size, quartet.max_depth, L, K, U, tokens, counters,
        )
    else:
        err = backend.decode_batch_shifted(
            quartet.shifted_draft.flat(0), quartet.target.flat(0),
            quartet.sft.flat(0), gamma, quartet.vocab_size,
            quartet.max_depth, L, K, U, tokens, counters,
        )
    elapsed = time.perf_counter() - start
    assert err == 0
    return elapsed, tokens, counters


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=50_000)
    parser.add_argument("--vocab", type=int, default=8)
    parser.add_argument("--depth", type=int, default=3)
    parser.add_argument("--length", type=int, default=6)
    parser.add_argument("--lookahead", type=int, default=2)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    pure = get_backend("pure")
    try:
        compiled = get_backend("cython")
    except ImportError:
        compiled = None
        print("compiled backend not built; benchmarking pure only")

    quartet = make_quartet(args.vocab, args.depth,
                           rng=RngStream(args.seed, 0))
    K, L = args.lookahead, args.length
    print(f"vocab={args.vocab} depth={args.depth} length={L} "
          f"lookahead={K} runs={args.runs}")
    print(f"{'kind':<10} {'backend':<8} {'seconds':>9} {'decodes/s':>12}")
    for kind in ("vanilla", "standard", "shifted"):
        n_draws = L if kind == "vanilla" else L * (2 * K + 1)
        U = RngStream(args.seed, 1).uniforms(
            args.runs * n_draws
        ).reshape(args.runs, n_draws)
        t_pure, tok_pure, cnt_pure = bench(pure, kind, quartet, K, L, U)
        print(f"{kind:<10} {'pure':<8} {t_pure:9.3f} "
              f"{args.runs / t_pure:12.0f}")
        if compiled is not None:
            # warm-up, then timed run
            bench(compiled, kind, quartet, K, L, U)
            t_c, tok_c, cnt_c = bench(compiled, kind, quartet, K, L, U)
            assert np.array_equal(tok_pure, tok_c), "backend outputs differ"
            assert np.array_equal(cnt_pure, cnt_c), "backend counters differ"
            print(f"{kind:<10} {'cython':<8} {t_c:9.3f} "
                  f"{args.runs / t_c:12.0f}   (x{t_pure / t_c:.0f}, "
                  f"bitwise identical)")


if __name__ == "__main__":
    main()
