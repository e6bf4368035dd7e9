"""Smoke test for the cfslab extension module; exits nonzero on failure."""

import math

import cfslab


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    x = cfslab.Operator.diagonal([1.0, -0.5, 0.0], 1)
    y = cfslab.Operator([[0.2, 0.9j, 0], [-0.9j, 0.1, 0], [0, 0, 0]], 1)
    assert x.dim == 3 and x.spin_dim == 1
    assert close(x.trace(), 0.5, 1e-14)
    assert close(cfslab.lagrangian(x, y), cfslab.lagrangian(y, x), 1e-12), "pair Lagrangian is symmetric"
    assert cfslab.lagrangian(x, y) >= 0.0
    assert cfslab.spectral_weight(x, y) >= 0.0
    assert len(cfslab.product_spectrum(x, y)) <= 2

    try:
        cfslab.Operator.diagonal([1.0, 1.0, -1.0], 1)
    except cfslab.CfsError as e:
        assert "signature" in str(e)
    else:
        raise AssertionError("signature violation not reported")

    rho = cfslab.Measure.random(2, 1, 4, trace=0.0, volume=1.0, seed=7)
    assert len(rho) == 4 and close(sum(rho.weights()), 1.0, 1e-12)
    text = rho.to_text(0.0)
    back, c = cfslab.Measure.from_text(text)
    assert c == 0.0 and back.to_text(0.0) == text, "text format round-trips"

    crit, mult, report = cfslab.minimize(rho, volume=1.0, trace=0.0, seed=7, strict=True)
    assert report["converged"], report
    assert crit.action() <= rho.action() + 1e-12, "minimizer does not raise the action"
    res = cfslab.criticality(crit, mult, volume=1.0, seed=7)
    assert res["support_residual"] < 1e-6, res
    assert res["volume_violation"] < 1e-8, res

    reg = cfslab.Regularization(1e-2, 1.0)
    k = reg.kernel([0.5, 0.05, 0.0, 0.0])
    assert len(k) == 4 and all(len(r) == 4 for r in k)
    assert reg.classify([0.5, 0.05, 0.0, 0.0]) == "timelike"
    assert reg.classify([0.05, 0.5, 0.0, 0.0]) == "spacelike"
    assert close(cfslab.Regularization(1e-2, 1.0, lam=3.0).local_trace(), 3.0 * reg.local_trace(), 1e-10)
    sweep = cfslab.scaling_sweep(reg, [1e-3 * 2**k for k in range(5)])
    assert close(sweep["trace_slope"], -2.0, 1e-2), sweep

    for family in ("commuting", "unitary", "abelian"):
        j = cfslab.jacobson(family, 1)
        assert j["defect"] <= 1e-8 * j["scale"], (family, j)
    assert abs(cfslab.jacobson("abelian", 0)["area_change"]) <= 1e-8

    assert "vacuum_ell" in cfslab.relations()
    result, transcript = cfslab.derive("vacuum_ell", 6, 1, 1)
    assert result and "relation: vacuum_ell" in transcript
    assert cfslab.closed_form("kappa_bound")
    assert cfslab.units_consistent()
    assert cfslab.matter_vs_vacuum(6, 1, 1)["verdict"]

    assert not math.isnan(mult.s_param)
    try:
        cfslab.minimize(cfslab.Measure.random(3, 1, 8, trace=0.5, seed=7), trace=0.5, kappa=0.2, max_iters=50, strict=True)
    except cfslab.NonConvergence:
        pass
    else:
        raise AssertionError("stalled run not reported")
    print("smoke test passed")


if __name__ == "__main__":
    main()
