"""Timing sweep: delegate/sign/verify medians per scheme, plus signing cost against identity depth.

    python3 scripts/bench.py --iters 100 --epochs 1048576
"""

import argparse
import random
import statistics
import time

from tbids import bbg, hibs
from tbids.cli import run_bench


def depth_sweep(depths, iters):
    rng = random.Random()
    for ell in depths:
        pp = hibs.setup(ell, rng)
        keys = bbg.gen(pp, rng)
        identity = tuple(f"l{i}".encode() for i in range(ell))
        key = bbg.delegate(pp, keys, identity, rng)
        pre = hibs.precompute(pp, identity)
        samples = {"delegate": [], "sign_pre": [], "sign": [], "verify": []}
        for i in range(iters):
            msg = i.to_bytes(4, "big")
            t = time.perf_counter()
            bbg.delegate(pp, keys, identity, rng)
            samples["delegate"].append(time.perf_counter() - t)
            t = time.perf_counter()
            sig = hibs.sign_with_precomputation(pp, key, pre, msg, rng)
            samples["sign_pre"].append(time.perf_counter() - t)
            t = time.perf_counter()
            hibs.sign(pp, key, msg, rng)
            samples["sign"].append(time.perf_counter() - t)
            t = time.perf_counter()
            hibs.verify_deterministic(pp, keys.pk, identity, msg, sig)
            samples["verify"].append(time.perf_counter() - t)
        for op, values in samples.items():
            print(f"depth{ell}.{op}.median_ms={statistics.median(values) * 1000:.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--iters", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=1 << 20)
    ap.add_argument("--depths", type=int, nargs="+", default=[2, 4, 8, 16])
    args = ap.parse_args()
    for name, value in run_bench(args.iters, args.epochs).items():
        print(f"{name}={value:.4f}")
    depth_sweep(args.depths, args.iters)


if __name__ == "__main__":
    main()
