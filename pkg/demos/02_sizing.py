"""How the four sizing schemes and the Black-Litterman step turn forecasts into weights."""
import warnings

import numpy as np

from regime_taa.allocate import bl_posterior, mvo_scores, size
from regime_taa.errors import FlatPositionWarning

tickers = ["XLB", "XLE", "XLF", "XLK"]
y = np.array([0.3, -0.2, 0.1, -0.4])
print("forecasts:", dict(zip(tickers, y.tolist())))
for scheme in ("lns", "los", "lo"):
    for l in (1, 2):
        print(f"  {scheme} l={l}: {np.round(size(scheme, y, l), 4)}")

print("\nmx follows the most likely next regime:")
print("  regime 0 likely ->", np.round(size("mx", y, 2, p_next=[0.6, 0.4]), 4))
print("  regime 1 likely ->", np.round(size("mx", y, 2, p_next=[0.3, 0.7]), 4))

with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    w = size("lo", -np.abs(y), 2)
print("\nall forecasts negative, long-only:", w, "warning:", caught[0].category.__name__)
assert issubclass(caught[0].category, FlatPositionWarning)

rng = np.random.default_rng(0)
R = rng.normal(0.005, 0.04, (48, 4))
mu, sigma = R.mean(axis=0), np.cov(R, rowvar=False)
views = np.array([0.02, -0.01, 0.0, 0.01])
post = bl_posterior(mu, sigma, views, tau=0.05)
print("\nsample means   ", np.round(mu, 4))
print("regime views   ", views)
print("posterior means", np.round(post, 4), "(between the two)")
print("lo l=2 on the posterior:", np.round(size("lo", post, 2), 4))
print("mvo tangency scores:", np.round(mvo_scores(mu, sigma), 2))
