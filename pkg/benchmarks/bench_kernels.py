"""Compare the compiled kernels against the pure-Python fallback.

Micro benchmarks hit the element-wise/paste primitives on 30x30 grids
(the largest task size); the end-to-end benchmark runs a noisy-guided
search, which is where the kernels actually earn their keep.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import random
import time

from gridsynth import kernels
from gridsynth.catalog import default_catalog
from gridsynth.codec import Vocabulary
from gridsynth.guidance import NoisyOracleModel, build_oracle
from gridsynth.kernels import load_impl
from gridsynth.search import SearchConfig, tree_search
from gridsynth.tasks import TASKS_BY_ID, oracle_suite, sample_instance


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def micro_suite(impl, repeat):
    rng = random.Random(0)
    n = 900  # 30x30
    a = [rng.randint(0, 9) for _ in range(n)]
    b = [rng.randint(0, 9) for _ in range(n)]
    cond = [rng.random() < 0.5 for _ in range(n)]
    cells = tuple(rng.randint(0, 9) for _ in range(n))
    xs, ys = impl.coord_lists(30, 30)
    shifted = [x + 1 for x in xs]

    def run_ewise():
        for _ in range(100):
            impl.ewise_int(impl.OP_ADD, a, b)

    def run_cmp_scalar():
        for _ in range(100):
            impl.ewise_cmp_scalar(impl.CMP_EQ, a, 0, False)

    def run_select():
        for _ in range(100):
            impl.select(cond, a, 0, b, 0)

    def run_paste():
        for _ in range(100):
            impl.paste_pixels(cells, 30, 30, shifted, ys, a, 64)

    def run_crop():
        for _ in range(100):
            impl.crop_cells(cells, 30, 30, 29, 29)

    return {
        "ewise_int add (100x900)": timeit(run_ewise, repeat),
        "ewise_cmp ==0 (100x900)": timeit(run_cmp_scalar, repeat),
        "select       (100x900)": timeit(run_select, repeat),
        "paste_pixels (100x900)": timeit(run_paste, repeat),
        "crop_cells   (100x900)": timeit(run_crop, repeat),
    }


def search_suite(repeat):
    catalog = default_catalog()
    vocab = Vocabulary.from_catalog(catalog)
    spec = TASKS_BY_ID["OOD5"]
    instance = sample_instance(
        spec, random.Random(1), n_demos=3
    )

    def run():
        oracle = build_oracle(oracle_suite(), vocab, catalog)
        noisy = NoisyOracleModel(oracle, 0.3, seed=2)
        cfg = SearchConfig(budget_nodes=10_000, floor=0.08, seed=2)
        res = tree_search(instance.inputs(), instance.targets(), noisy, cfg, catalog)
        assert res.found

    return timeit(run, repeat)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    pure = load_impl(pure=True)
    compiled = load_impl(pure=False)
    if compiled.IMPL != "compiled":
        print("compiled kernels are not built; run pip install -e . first")
        return

    print(f"{'kernel':28s} {'pure':>10s} {'compiled':>10s} {'speedup':>9s}")
    pure_times = micro_suite(pure, args.repeat)
    compiled_times = micro_suite(compiled, args.repeat)
    for name in pure_times:
        p, c = pure_times[name], compiled_times[name]
        print(f"{name:28s} {p * 1e3:9.2f}ms {c * 1e3:9.2f}ms {p / c:8.1f}x")

    results = {}
    for label, impl in (("pure", pure), ("compiled", compiled)):
        kernels.use_impl(impl)
        results[label] = search_suite(args.repeat)
    kernels.use_impl(compiled)
    p, c = results["pure"], results["compiled"]
    print(f"{'noisy search (OOD task)':28s} {p * 1e3:9.2f}ms {c * 1e3:9.2f}ms {p / c:8.1f}x")


if __name__ == "__main__":
    main()
