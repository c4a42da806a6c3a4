"""Horseshoe regression by Gibbs sampling with CG coefficient draws.

Twenty signals hidden among 500 predictors, with only 150 observations.
The posterior means pick the signals out and shrink the nulls to near zero.
"""

import numpy as np

from cgshrink import GibbsConfig, ess_report, run_gibbs, synthetic_linear

data, theta = synthetic_linear(150, 500, 20, magnitude=2.0, seed=5)
cfg = GibbsConfig(sampler="cg", preconditioner="prior", warmup=300, samples=700, seed=1)
trace = run_gibbs(data, cfg)

post = trace.select("theta_").mean(axis=0)
signal = theta != 0
print(f"mean |theta| on signals {np.abs(post[signal]).mean():.2f} "
      f"(truth {np.abs(theta[signal]).mean():.2f}), on nulls {np.abs(post[~signal]).mean():.4f}")
top = np.argsort(-np.abs(post))[:20]
print(f"{np.isin(top, np.flatnonzero(signal)).sum()} of the 20 largest posterior means are true signals")
iters = np.asarray(trace.meta["cg_iterations"])
print(f"CG iterations per sweep: median {np.median(iters):.0f}, max {iters.max()} (P = 500)")
rep = ess_report(trace, names=["tau", "sigma2", "theta_1"])
print(f"ESS: tau {rep.ess[0]:.0f}, sigma2 {rep.ess[1]:.0f}, theta_1 {rep.ess[2]:.0f} "
      f"from {trace.n_draws} draws in {trace.total_seconds:.1f}s")
