"""Benchmark the numba kernels against the pure-numpy fallbacks.

Times each hot kernel at desk-scale sizes, checks that both paths agree
numerically, and prints a table with the speedup. Run from the repo root:

    python3 benchmarks/bench_kernels.py [--repeats 30]
"""

import argparse
import time

import numpy as np

from lexembed.backend import NUMBA_AVAILABLE
from lexembed.kernels import IMPLEMENTATIONS

VOCAB, DIM = 2000, 50
N, BATCH, K, HIDDEN = 3, 128, 20, 100
SCRIPT_LEN, M, H_MAPS = 80, 3, 100


def build_cases(seed=0):
    rng = np.random.default_rng(seed)
    emb = rng.normal(0.0, 0.05, (VOCAB, DIM))
    idx = rng.integers(0, VOCAB, size=(BATCH, N)).astype(np.int64)
    gold = rng.uniform(0, 1, BATCH)
    noisy = rng.integers(2, VOCAB, size=(BATCH, K, N)).astype(np.int64)
    script_idx = rng.integers(0, VOCAB, size=SCRIPT_LEN).astype(np.int64)

    w = rng.normal(0.0, 0.05, N * DIM)
    Wh = rng.normal(0.0, 0.05, (HIDDEN, N * DIM))
    bh = rng.normal(0.0, 0.05, HIDDEN)
    wr = rng.normal(0.0, 0.05, HIDDEN)
    ws = rng.normal(0.0, 0.05, HIDDEN)
    Ws = rng.normal(0.0, 0.05, (H_MAPS, M * DIM))
    bs_ = rng.normal(0.0, 0.05, H_MAPS)
    wreg = rng.normal(0.0, 0.05, H_MAPS)

    def aa_grad_args():
        return (emb, script_idx, Ws, bs_, wreg, 0.01, 0.5,
                np.zeros_like(Ws), np.zeros_like(bs_), np.zeros_like(wreg),
                np.zeros(1), np.zeros_like(emb))

    return {
        "eswe_batch": lambda: (emb, idx, gold, w, 0.01),
        "sswe_batch": lambda: (emb, idx, noisy, gold, Wh, bh, wr, 0.0, ws,
                               0.0, 0.1),
        "aa_forward": lambda: (emb, script_idx, Ws, bs_, wreg, 0.01),
        "aa_grads": aa_grad_args,
    }


def time_kernel(fn, make_args, repeats):
    fn(*make_args())  # warmup (JIT compile / cache load)
    best = float("inf")
    for _ in range(repeats):
        args = make_args()
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def flat_outputs(result):
    if isinstance(result, tuple):
        return [np.asarray(r) for r in result]
    return [np.asarray(result)]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=30)
    args = parser.parse_args()

    if not NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")

    cases = build_cases()
    print(f"{'kernel':<12} {'numpy':>10} {'numba':>10} {'speedup':>8}   agreement")
    for name, make_args in cases.items():
        np_fn = IMPLEMENTATIONS["numpy"][name]
        nb_fn = IMPLEMENTATIONS["numba"][name]

        out_np = flat_outputs(np_fn(*make_args()))
        out_nb = flat_outputs(nb_fn(*make_args()))
        agree = all(np.allclose(a, b, rtol=1e-9, atol=1e-12)
                    for a, b in zip(out_np, out_nb))

        t_np = time_kernel(np_fn, make_args, args.repeats)
        t_nb = time_kernel(nb_fn, make_args, args.repeats)
        print(f"{name:<12} {t_np * 1e3:>8.3f}ms {t_nb * 1e3:>8.3f}ms "
              f"{t_np / t_nb:>7.2f}x   {'ok' if agree else 'MISMATCH'}")


if __name__ == "__main__":
    main()
