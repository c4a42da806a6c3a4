"""Per-draw cost of the three Gaussian samplers as P grows past N.

Direct sampling factorises a P x P matrix, Bhattacharya an N x N one, and
CG only needs matrix-vector products, paying per iteration.
"""

from cgshrink.bench import run_bench, speedups

grid = [(200, 400, 10), (200, 1000, 10), (200, 2000, 10)]
rows = run_bench(grid, draws=3, seed=0)
for r in rows:
    extra = f" ({r.cg_iterations:.0f} CG iterations)" if r.sampler == "cg" else ""
    print(f"N={r.n} P={r.p:5d} {r.sampler:>13}: {1e3 * r.seconds_per_draw:8.2f} ms{extra}")
for key, ratio in speedups(rows).items():
    print(f"P={key[1]}: direct / CG = {ratio:.1f}x")
