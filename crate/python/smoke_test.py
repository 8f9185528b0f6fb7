"""Smoke test for the randabc extension module."""

import math

import randabc


def main():
    bx = randabc.LatticeBox(2, 8)
    assert len(bx) == 17 * 17

    g, a = randabc.sample_coefficients(2, 16, seed=3, theta=4.0)
    lo, hi = a.min_max()
    assert 1.0 < lo <= hi < 4.0, (lo, hi)
    assert g.lattice_box.half_width == 16

    ahom, phi, residual = randabc.correctors(a, 8)
    assert residual < 1e-6, residual
    assert len(phi) == 2
    assert ahom[0][0] > 0 and ahom[1][1] > 0

    u = randabc.run_recipe(a, 8, "full")
    assert math.isfinite(u.max_abs())

    green = randabc.green_function(2, 8)
    assert abs(green.at([1, 0]) + 0.25) < 1e-8

    est, tail, converged = randabc.optimality_variance(2, 20.0, 4)
    assert est > 0 and tail >= 0

    slope, stderr, _ = randabc.fit_power_law([(4, 4.0**-3), (8, 8.0**-3), (16, 16.0**-3)])
    assert abs(slope + 3.0) < 1e-9 and stderr < 1e-9

    csv, slopes = randabc.bench("dim = 2\nL = 4, 6\nseeds = 1\ntheta = 4\nrecipes = zero, full\n")
    assert csv.startswith("L,")
    print("records:", len(csv.splitlines()) - 1, "slopes:", dict(slopes))

    try:
        randabc.LatticeBox(4, 2)
    except ValueError:
        pass
    else:
        raise AssertionError("dimension 4 accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
