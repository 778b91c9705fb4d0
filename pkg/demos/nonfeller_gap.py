"""The transition semigroup of the stopped process does not preserve continuity.

For f(x) = exp(-lam |x - z|) the one-step expectation approaches a value
strictly below f(z) = 1 as the start point approaches z, because paths started
exactly at z are already frozen there.
"""
import numpy as np

from lastpassage.analytic_core import ModelParams, nonfeller_gap
from lastpassage.kernels import transition_expectation


def main():
    params = ModelParams(1.0, 1.0)
    f = lambda y: np.exp(-params.lam * np.abs(np.asarray(y) - params.z))
    limit = nonfeller_gap(params, 1.0)
    print(f"closed-form limit {limit:.12f}, value at z {transition_expectation(params, 1.0, params.z, f):.12f}")
    for offset in [1e-1, 1e-2, 1e-4, 1e-6, 1e-8]:
        left = transition_expectation(params, 1.0, params.z - offset, f)
        right = transition_expectation(params, 1.0, params.z + offset, f)
        print(f"|x - z| = {offset:.0e}:  left {left:.12f}  right {right:.12f}")


if __name__ == "__main__":
    main()
