"""Benchmark the compiled kernels against the pure-Python/numpy fallback.

Runs each workload twice in subprocesses: once with numba enabled and once
with PARSEQA_NO_NUMBA=1.  Prints per-kernel timings and the speedup, and
verifies both paths agree on every instance.

Usage: python3 benchmarks/bench_kernels.py [--sizes 200,500,1000]
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKER = textwrap.dedent(
    """
    import json, random, sys, time

    from parseqa.objective.kernels import USE_NUMBA, levenshtein, tree_edit_distance
    from parseqa.objective.teds import table_tree, tree_distance
    from parseqa.perturb_table import parse_table

    sizes = json.loads(sys.argv[1])
    rng = random.Random(7)
    alphabet = "abcdefgh "

    def rand_str(n):
        return "".join(rng.choice(alphabet) for _ in range(n))

    def rand_table(rows, cols):
        body = "".join(
            "<tr>" + "".join(f"<td>w{rng.randint(0, 9)}</td>" for _ in range(cols)) + "</tr>"
            for _ in range(rows)
        )
        return f"<table>{body}</table>"

    out = {"numba": USE_NUMBA, "lev": [], "ted": []}

    # Warm-up triggers JIT compilation so it is not timed below.
    levenshtein("warm", "up")
    tree_distance(table_tree(parse_table(rand_table(2, 2))),
                  table_tree(parse_table(rand_table(2, 2))))

    for n in sizes:
        pairs = [(rand_str(n), rand_str(n)) for _ in range(5)]
        t0 = time.perf_counter()
        dists = [levenshtein(a, b) for a, b in pairs]
        out["lev"].append({"n": n, "s": time.perf_counter() - t0, "dists": dists})

    for rows in (5, 10, 20):
        pairs = [
            (table_tree(parse_table(rand_table(rows, rows // 2 + 1))),
             table_tree(parse_table(rand_table(rows, rows // 2 + 1))))
            for _ in range(5)
        ]
        t0 = time.perf_counter()
        dists = [tree_distance(a, b) for a, b in pairs]
        out["ted"].append({"rows": rows, "s": time.perf_counter() - t0, "dists": dists})

    print(json.dumps(out))
    """
)


def run(sizes, no_numba):
    env = dict(os.environ)
    if no_numba:
        env["PARSEQA_NO_NUMBA"] = "1"
    else:
        env.pop("PARSEQA_NO_NUMBA", None)
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, json.dumps(sizes)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="200,500,1000")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    fast = run(sizes, no_numba=False)
    slow = run(sizes, no_numba=True)
    if not fast["numba"]:
        print("warning: numba unavailable; both runs use the fallback")

    print(f"{'kernel':<22}{'size':>8}{'numba (s)':>12}{'fallback (s)':>14}{'speedup':>10}")
    for f, s in zip(fast["lev"], slow["lev"]):
        assert f["dists"] == s["dists"], "Levenshtein paths disagree"
        print(
            f"{'levenshtein':<22}{f['n']:>8}{f['s']:>12.4f}{s['s']:>14.4f}"
            f"{s['s'] / max(f['s'], 1e-9):>9.1f}x"
        )
    for f, s in zip(fast["ted"], slow["ted"]):
        assert all(abs(a - b) < 1e-9 for a, b in zip(f["dists"], s["dists"])), (
            "tree edit distance paths disagree"
        )
        print(
            f"{'tree edit distance':<22}{f['rows']:>7}r{f['s']:>12.4f}{s['s']:>14.4f}"
            f"{s['s'] / max(f['s'], 1e-9):>9.1f}x"
        )
    print("both paths produced identical results on every instance")


if __name__ == "__main__":
    main()
