"""Smoke test for the parthines_py extension module."""

import math

import parthines_py as p


def main():
    assert abs(p.psi(0.0) - 1.0) < 1e-15
    assert abs(p.psi(1e-9) - 1.0) < 1e-9

    stable, margin, _ = p.is_stable(0.5, 0.5, 0.25)
    assert stable and margin > 0
    assert p.stability_boundary_h(-2.0, -2.0, 1.0, 1.0) is None
    h = p.stability_boundary_h(-2.0, -2.0, 2.0, -2.0, method="hines")
    assert abs(h - 1.0) < 1e-10, h
    c = p.recursion_matrix(-1.0, -1.0, 0.0, 0.0, 0.1)
    assert abs(c[0][1]) < 1e-15 and abs(c[1][0]) < 1e-15

    hh = p.Model("hh")
    assert hh.kind == "hh" and hh.t_end == 20.0
    assert p.Model.from_config(hh.to_config()).initial == hh.initial

    run = hh.integrate("modhines", tol=1e-4)
    assert run.t[-1] == hh.t_end and run.fevals > 0
    assert len(run.states) == len(run.t) and len(run.final_state) == 4

    fixed = hh.integrate("cmhines", steps=4000)
    assert len(fixed.t) == 4001

    ref, acc = hh.reference()
    assert acc < 1e-10
    err = p.mixed_error_norm(run.final_state, ref, hh.typical_size())
    assert err < 10 * 1e-4, err

    rows, slope = hh.convergence("hines", [256, 512, 1024, 2048], ref)
    assert len(rows) == 4 and abs(slope - 2.0) < 0.2, slope

    pts = hh.sweep(["modhnew"], ref, tols=[1e-3, 1e-4])
    assert [pt.tol for pt in pts] == [1e-3, 1e-4]
    assert all(not pt.failed and math.isfinite(pt.final_error) for pt in pts)

    try:
        p.Model("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("bad model name accepted")

    bad = p.Model.from_config("model = hh\nI = 1e308\n")
    try:
        bad.integrate("cmhines", steps=10)
    except p.NumericalError:
        pass
    else:
        raise AssertionError("blow-up not reported")

    print("smoke test ok")


if __name__ == "__main__":
    main()
