"""Effective sample size on chains with known autocorrelation.

For an AR(1) chain with coefficient phi the asymptotic ESS is
S (1 - phi) / (1 + phi).  Antithetic chains can beat S and get flagged.
"""

import numpy as np

from cgshrink.diagnostics import ChainTrace, ess_estimate, ess_report

rng = np.random.default_rng(0)
s = 50_000
for phi in (0.0, 0.5, 0.9, 0.99, -0.5):
    x = np.empty(s)
    x[0] = rng.standard_normal() / np.sqrt(1 - phi ** 2)
    e = rng.standard_normal(s)
    for t in range(1, s):
        x[t] = phi * x[t - 1] + e[t]
    est = ess_estimate(x)
    print(f"phi={phi:5.2f}: ESS {est.ess:8.0f}, theory {s * (1 - phi) / (1 + phi):8.0f}"
          + ("  (superefficient)" if est.superefficient else ""))

print("Constant chain:", ess_estimate(np.ones(100)))
chains = [ChainTrace(["x"], rng.standard_normal((1000, 1)), np.full(1000, 1e-4)) for _ in range(4)]
rep = ess_report(chains)
print(f"four iid chains of 1000: ESS {rep.min_ess:.0f}, ESS/s {rep.min_ess_per_second:.0f}")
