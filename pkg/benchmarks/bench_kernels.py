"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py            # kernels + end-to-end
    python3 benchmarks/bench_kernels.py --kernels  # kernels only

Kernel timings call both implementations directly in one process.
End-to-end timings run each backend in a fresh interpreter, selecting the
fallback with BIBLIORANK_PURE_PYTHON=1.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from bibliorank import _kernels_py

try:
    from bibliorank import _kernels as compiled
except ImportError:
    compiled = None


def kernel_cases(n: int, n_groups: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    values = np.floor(rng.lognormal(1.0, 1.0, n) * 4) / 4  # plenty of ties
    keys = np.sort(values)[::-1].copy()
    group = np.sort(rng.integers(0, n_groups, n)).astype(np.int64)
    quota = rng.integers(0, 6, n_groups).astype(np.int64)
    thr = rng.random(n_groups) * 3
    order = np.lexsort((values, group))
    starts = np.searchsorted(group[order], np.arange(n_groups + 1)).astype(np.int64)
    sorted_vals = values[order].copy()
    other = rng.random(n)
    return {
        "tie_ranks": lambda m: m.tie_ranks(keys),
        "midrank_percentiles": lambda m: m.midrank_percentiles(values[:2000].copy()),
        "pearson": lambda m: m.pearson(values, other),
        "group_sums": lambda m: m.group_sums(group, values, n_groups),
        "first_k_per_group": lambda m: m.first_k_per_group(group, quota),
        "segment_medians": lambda m: m.segment_medians(starts, sorted_vals),
        "count_below": lambda m: m.count_below(group, values, thr, n_groups),
    }


def best_of(fn, repeat: int) -> float:
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10_000:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_kernels(n: int, n_groups: int, repeat: int) -> list[dict]:
    rows = []
    for name, call in kernel_cases(n, n_groups).items():
        t_py = best_of(lambda: call(_kernels_py), repeat)
        t_c = best_of(lambda: call(compiled), repeat) if compiled else float("nan")
        rows.append({"kernel": name, "python_s": t_py, "compiled_s": t_c, "speedup": t_py / t_c})
    return rows


END_TO_END = r"""
import json, time
from bibliorank import BACKEND
from bibliorank.analysis import attribution_noise_experiment, sensitivity_run
from bibliorank.assessment import EvaluationScenario, ShareOfDisciplineOutput
from bibliorank.indicators import quality_scores
from bibliorank.synth import DEFAULT_DISCIPLINES, SynthConfig, generate

shares = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.45, 0.60)
corpora = [generate(SynthConfig(disciplines=DEFAULT_DISCIPLINES[:1], seed=s)) for s in range(10)]
t0 = time.perf_counter()
for c in corpora:
    scs = [EvaluationScenario("PHYS", ShareOfDisciplineOutput(s), label=str(s)) for s in shares]
    sensitivity_run(c, quality_scores(c), scs)
t_sens = time.perf_counter() - t0
corpus = generate(SynthConfig())
t0 = time.perf_counter()
attribution_noise_experiment(corpus, 0.05, 10)
t_noise = time.perf_counter() - t0
print(json.dumps({"backend": BACKEND, "sensitivity_10_seeds_s": t_sens, "noise_10_seeds_s": t_noise}))
"""


def bench_end_to_end() -> list[dict]:
    out = []
    for pure in ("0", "1"):
        env = dict(os.environ, BIBLIORANK_PURE_PYTHON=pure)
        proc = subprocess.run([sys.executable, "-c", END_TO_END], env=env,
                              capture_output=True, text=True, check=True)
        out.append(json.loads(proc.stdout))
    return out


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=50_000, help="items per kernel call")
    p.add_argument("--groups", type=int, default=1_000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--kernels", action="store_true", help="skip the end-to-end runs")
    p.add_argument("--json", action="store_true", help="print machine-readable results")
    args = p.parse_args(argv)

    if compiled is None:
        print("compiled kernels are not built; only the fallback can be timed", file=sys.stderr)
    kernels = bench_kernels(args.n, args.groups, args.repeat)
    e2e = [] if args.kernels else bench_end_to_end()
    if args.json:
        print(json.dumps({"kernels": kernels, "end_to_end": e2e}, indent=2))
        return 0

    print(f"kernels (n={args.n}, groups={args.groups}, best of {args.repeat})")
    print(f"{'kernel':<22}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}")
    for r in kernels:
        print(f"{r['kernel']:<22}{r['python_s'] * 1e3:>12.3f}{r['compiled_s'] * 1e3:>14.3f}{r['speedup']:>9.1f}x")
    if e2e:
        print("\nend to end (seconds)")
        print(f"{'backend':<10}{'sensitivity x10':>17}{'noise x10':>12}")
        for r in e2e:
            print(f"{r['backend']:<10}{r['sensitivity_10_seeds_s']:>17.2f}{r['noise_10_seeds_s']:>12.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
