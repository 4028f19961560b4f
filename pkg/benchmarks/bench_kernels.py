"""Compare the GMP extension against the pure-Python kernels.

    python benchmarks/bench_kernels.py --bits 512 1024 2048 --repeat 50
"""

from __future__ import annotations

import argparse
import random
import timeit

from secure_consensus.kernels import available_backends, load_backend
from secure_consensus.paillier import keygen
from secure_consensus.primes import random_prime


def bench(bits: int, repeat: int, seed: int) -> dict[str, dict[str, float]]:
    rng = random.Random(seed)
    pk, sk = keygen(bits, rng)
    n, n2 = pk.n, pk.nsquare
    m, r = rng.randrange(n), rng.randrange(1, n)
    prime = random_prime(bits // 2, rng)  # a prime runs all 40 rounds
    bases = [rng.randrange(2, prime - 1) for _ in range(40)]
    out = {}
    for name in available_backends():
        k = load_backend(name)
        c = k.paillier_encrypt(n, n2, m, r)
        cases = {
            "encrypt": lambda: k.paillier_encrypt(n, n2, m, r),
            "decrypt": lambda: k.paillier_decrypt(c, sk.lam, sk.mu, n, n2),
            "scalar_mul": lambda: k.powmod(c, 65535, n2),
            "miller_rabin": lambda: k.miller_rabin(prime, bases),
        }
        out[name] = {op: min(timeit.repeat(fn, number=repeat, repeat=3)) / repeat for op, fn in cases.items()}
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--bits", type=int, nargs="+", default=[512, 1024, 2048])
    parser.add_argument("--repeat", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    print(f"{'bits':>5} {'op':<13} " + " ".join(f"{b:>12}" for b in available_backends()) + "   speedup")
    for bits in args.bits:
        res = bench(bits, args.repeat, args.seed)
        for op in res["python"]:
            row = " ".join(f"{res[b][op] * 1e6:10.1f}us" for b in res)
            speed = res["python"][op] / res["gmp"][op] if "gmp" in res else 1.0
            print(f"{bits:>5} {op:<13} {row}   {speed:6.1f}x")


if __name__ == "__main__":
    main()
