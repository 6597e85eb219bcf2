"""Per-iteration cost of the grid method versus the dense per-individual method.

The dense method factorises an n x n covariance every iteration; the grid
method's cost is set mostly by the grid and grows slowly with n.
"""
from auxsurv.dense import benchmark, loglog_slope

rows = benchmark(dense_sizes=(50, 100, 200, 400, 800), fourier_sizes=(250, 500, 1000, 2000),
                 output_grids=(32,), iterations=50, reps=3)
for r in rows:
    print(f"{r.method:<8} n={r.n:<5} {r.grid:<6} {r.seconds_per_1000_iter:8.3f} s / 1000 iterations")
for method in ("dense", "fourier"):
    sel = [r for r in rows if r.method == method]
    print(f"{method} log-log slope {loglog_slope([r.n for r in sel], [r.seconds_per_1000_iter for r in sel]):.2f}")
