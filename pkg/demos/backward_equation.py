"""Finite-difference solution of the backward equation against the semigroup.

Prints the sup-node error and observed orders for the upwind and centred
schemes on three nested grids.
"""
from lastpassage import pde
from lastpassage.analytic_core import ModelParams
from lastpassage.kernels import canonical_test_function


def main():
    params = ModelParams.for_kernels(1.0, 0.0)  # the PDE also accepts the level at the origin
    h = canonical_test_function(params)
    for upwind in (True, False):
        study = pde.convergence_study(params, h, 0.5, 8.0, [201, 401, 801], upwind=upwind)
        print("upwind" if upwind else "centred")
        for row in study["rows"]:
            print(f"  n_y={row['n_y']:<5} dy={row['dy']:.3f} sup error={row['sup_error']:.3e}")
        print("  orders", ", ".join(f"{o:.3f}" for o in study["order"]))


if __name__ == "__main__":
    main()
