"""Smoke test for the dogates extension module.

Build the extension and put it on the path first, for example:

    cargo build -p dogates-python --release --features extension-module
    cp target/release/libdogates.so crates/python/python/dogates.so
    python3 crates/python/python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import dogates


def main():
    data = dogates.simulate("C", n=600, seed=7)
    assert len(data) == 600
    assert data.feature_names[:2] == ["x1", "x2"]
    assert data.validate(5) == []

    res = dogates.run_dogates(data, k=5, b=16, seed=1, trees=40)
    assert len(res.gamma) == 5
    assert all(math.isfinite(g) for g in res.gamma)
    assert all(lo <= hi for lo, hi in zip(res.ci_low, res.ci_high))
    assert all(0.0 <= p <= 1.0 for p in res.p_adjusted)
    assert len(res.gamma_per_split) == 16 - res.failed_splits
    assert sum(res.estimate_counts) == 16 * 300 - 300 * res.failed_splits

    again = dogates.run_dogates(data, k=5, b=16, seed=1, trees=40)
    assert again.gamma == res.gamma

    truth = dogates.true_group_effects(data.tau_true, 5)
    assert truth == sorted(truth)
    assert dogates.assign_groups([3.0, 1.0, 2.0, 4.0], 2) == [1, 0, 0, 1]

    try:
        dogates.Dataset([1.0, 2.0], [0, 2], [[0.0], [1.0]])
    except ValueError:
        pass
    else:
        raise AssertionError("treatment outside {0, 1} was accepted")

    print("gamma     ", [round(g, 3) for g in res.gamma])
    print("truth     ", [round(t, 3) for t in truth])
    print("benchmark ", [round(c, 3) for c in res.cate_benchmark()])
    print("smoke test passed")


if __name__ == "__main__":
    main()
