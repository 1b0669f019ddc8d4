"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel runs on the same inputs under both backends. Outputs are
checked for bitwise equality before any timing is reported.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from vecmap import kernels
from vecmap.geometry import Shape, enumerate_permutations


def cases(rng):
    nv = 20
    preds = rng.random((50, nv, 2))
    gt = rng.random((nv, 2))
    polygon = enumerate_permutations(Shape.POLYGON, nv).permutations
    yield "best_permutation_costs 50x20 polygon", "best_permutation_costs", (preds, gt, polygon)
    a, b = rng.random((100, 2)), rng.random((100, 2))
    yield "chamfer 100x100", "chamfer", (a, b)
    yield "lsa_square 50x50", "lsa_square", (rng.random((50, 50)),)
    yield "lsa_square 200x200", "lsa_square", (rng.random((200, 200)),)


def _same(x, y):
    if isinstance(x, tuple):
        return all(_same(a, b) for a, b in zip(x, y))
    return np.array_equal(np.asarray(x), np.asarray(y))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json", help="also write results here")
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the Python fallback is available", file=sys.stderr)
    rng = np.random.default_rng(args.seed)
    results = []
    print(f"{'kernel':<40}" + "".join(f"{name + ' ms':>14}" for name in sorted(backends)) + f"{'speedup':>10}")
    for label, fn, inputs in cases(rng):
        outputs = {name: getattr(mod, fn)(*inputs) for name, mod in backends.items()}
        ref = outputs["python"]
        if not all(_same(ref, out) for out in outputs.values()):
            raise SystemExit(f"{label}: backends disagree")
        row = {"kernel": label}
        for name, mod in sorted(backends.items()):
            f = getattr(mod, fn)
            n = max(1, int(0.2 / max(timeit.timeit(lambda: f(*inputs), number=1), 1e-6)))
            best = min(timeit.repeat(lambda: f(*inputs), number=n, repeat=args.repeat)) / n
            row[name] = best * 1e3
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        row["speedup"] = speed
        results.append(row)
        print(f"{label:<40}" + "".join(f"{row[name]:>14.4f}" for name in sorted(backends)) + f"{speed:>9.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
