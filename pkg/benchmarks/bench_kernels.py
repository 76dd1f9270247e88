"""Time the hot paths with numba on and off.

    python benchmarks/bench_kernels.py            # runs both modes in subprocesses
    python benchmarks/bench_kernels.py --worker   # one mode (honours EPSBAI_DISABLE_NUMBA)

The worker warms the jit once before timing, so compile time is excluded.
"""
import json
import os
import subprocess
import sys
import time


def worker():
    import numpy as np

    from epsbai import _jit
    from epsbai.families import Family
    from epsbai.harness import replication_seed, run_replication
    from epsbai.oracle import BanditInstance, characteristic_time
    from epsbai.strategies import StrategyState, glrt_value
    from epsbai.thresholds import ThresholdSpec

    inst = BanditInstance(Family.bernoulli(), (0.2, 0.4, 0.5, 0.55, 0.7), 0.1)
    thr = ThresholdSpec("practical", 0.1, 5)
    rng = np.random.default_rng(0)
    instances = [BanditInstance(inst.family, tuple(np.sort(rng.uniform(0.05, 0.95, 5))), 0.1) for _ in range(50)]
    state = StrategyState.from_counts(inst.family, [30, 40, 50, 60, 70], [0.2, 0.4, 0.5, 0.55, 0.7], 0.1)

    characteristic_time(inst)
    glrt_value(state)
    run_replication(inst, "eps-tas", thr, 1)

    def timed(fn, reps):
        start = time.perf_counter()
        for _ in range(reps):
            fn()
        return (time.perf_counter() - start) / reps

    out = {
        "numba": _jit.USE_NUMBA,
        "oracle_solve_s": timed(lambda: [characteristic_time(i) for i in instances], 3) / len(instances),
        "glrt_s": timed(lambda: glrt_value(state), 200),
        "eps_tas_run_s": timed(lambda: [run_replication(inst, "eps-tas", thr, replication_seed(0, i))
                                        for i in range(5)], 1) / 5,
    }
    print(json.dumps(out))


def main():
    results = {}
    for label, disable in (("numba", False), ("python", True)):
        env = dict(os.environ)
        env.pop("EPSBAI_DISABLE_NUMBA", None)
        if disable:
            env["EPSBAI_DISABLE_NUMBA"] = "1"
        proc = subprocess.run([sys.executable, __file__, "--worker"], env=env,
                              capture_output=True, text=True, check=True)
        results[label] = json.loads(proc.stdout)
    print(f"{'kernel':<16}{'numba':>12}{'python':>12}{'speedup':>10}")
    for key in ("oracle_solve_s", "glrt_s", "eps_tas_run_s"):
        a, b = results["numba"][key], results["python"][key]
        print(f"{key:<16}{a:12.2e}{b:12.2e}{b / a:10.1f}")


if __name__ == "__main__":
    worker() if "--worker" in sys.argv else main()
