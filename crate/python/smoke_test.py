"""Smoke test for the compiled `bosonstar` extension module.

Build the extension first (see README), then run:

    python python/smoke_test.py
"""

import math
import tempfile

import bosonstar


def main():
    grid = bosonstar.Grid(40.0, 4095)
    g = bosonstar.RadialFunction.gaussian(grid, 1.0)
    assert abs(g.norm_sq() - 1.0) < 1e-12
    assert abs(g.kinetic(0.0) - 2.0 / math.sqrt(math.pi)) < 1e-6
    assert abs(g.coulomb() - math.sqrt(2.0 / math.pi)) < 1e-6

    coarse = bosonstar.Grid(20.0, 1023)
    sol = bosonstar.solve_optimizer(coarse)
    assert 4.0 / math.pi < sol.a_star < 2.7, sol.a_star
    assert all(abs(x - 1.0) < 1e-4 for x in sol.identities)

    q, lhs_ok = bosonstar.check_gn(sol.q, sol.a_star)
    assert lhs_ok and abs(q - sol.a_star) < 1e-12
    assert bosonstar.check_hardy(sol.q)[2]

    energy, u, converged = bosonstar.minimize_hartree(sol.q, 1.5, 1.0, sol.a_star, p=1.0)
    assert converged and energy > 0.0
    assert abs(bosonstar.hartree_energy(u, 1.5, 1.0, p=1.0)[0] - energy) < 1e-12

    t_min, lam, gap = bosonstar.optimal_t(sol.q, 1.0, 1.0, sol.a_star)
    assert gap <= 1e-10 and abs(lam - bosonstar.collapse_prefactor(sol.q, 1.0, 1.0, sol.a_star)) < 1e-12

    assert bosonstar.count_states(1.0, 1.0, 5.0) == 45

    ed = bosonstar.exact_diagonalization(bosonstar.Grid(16.0, 255), [4, 2], 2, 0.0)
    assert ed.gap == 0.0 and ed.condensate_fraction == 1.0

    try:
        bosonstar.Grid(-1.0, 100)
    except ValueError:
        pass
    else:
        raise AssertionError("negative radius accepted")

    with tempfile.TemporaryDirectory() as out:
        assert bosonstar.run("subcommand = spectrum\nlevels = 5,10\n", out)

    print("smoke test passed: a* = %.10f" % sol.a_star)


if __name__ == "__main__":
    main()
