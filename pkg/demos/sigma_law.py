"""Draw last passage times exactly and compare them with the closed-form law.

Run with ``python3 demos/sigma_law.py [n]``.
"""
import sys

import numpy as np

from lastpassage.analytic_core import ModelParams, sigma_cdf, sigma_mean
from lastpassage.estimators import ecdf, ks_test
from lastpassage.sampler import RngStream, sample_sigmas


def main(n=20000):
    for seed, (lam, z) in enumerate([(1.0, 1.0), (2.0, 0.5), (0.5, 2.0)]):
        params = ModelParams(lam, z)
        draws = sample_sigmas(params, RngStream(seed), n)
        report = ks_test(ecdf(draws), lambda t: sigma_cdf(params, t))
        se = draws.std(ddof=1) / np.sqrt(n)
        print(f"lambda={lam:<4} z={z:<4} mean={draws.mean():.4f} +/- {se:.4f} "
              f"(closed form {sigma_mean(params):.4f})  KS D={report.statistic:.4f} p={report.p_value_or_error:.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20000)
