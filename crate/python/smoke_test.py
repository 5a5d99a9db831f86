"""Quick end-to-end check of the Python extension."""

import math

import enso_mz


def main():
    p = enso_mz.PhysicalParams()
    s = p.scale()
    print(p)
    print(s)
    assert 0 < s.alpha < 2 and 0 < s.gamma < 1 and s.delta > 0
    assert p["theta"] == 3.0
    assert p.replace(A0=0.3)["A0"] == 0.3
    assert enso_mz.PhysicalParams.from_json(p.to_json())["y_n"] == p["y_n"]

    try:
        enso_mz.PhysicalParams(not_a_key=1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown key accepted")

    traj = enso_mz.simulate_dde("voc", 0.93, 0.49, 4.8, t_end=200.0)
    est = traj.period()
    print("voc:", est)
    assert est["classification"] == "oscillating"
    assert est["period"] > 4.8
    assert math.isclose(traj(0.0), 0.1)

    eq = enso_mz.equilibria(0.9, 0.49)
    assert any(abs(v) < 1e-12 for v in eq) and len(eq) == 3

    hopf = enso_mz.hopf_curve("voc", 0.49, 0.05, 3.0, n=20)
    assert hopf and all(abs(h[3]) < 1e-6 for h in hopf)

    taus = [0.1 * k for k in range(80)]
    k = enso_mz.memory_kernel(p, taus)
    assert len(k) == len(taus) and any(v != 0.0 for v in k)
    delays = enso_mz.discrete_delays(p)
    print("first delays:", delays[:2])

    t, te = enso_mz.simulate_pde(p, 1.0, n=128)
    assert len(t) == len(te) and all(math.isfinite(v) for v in te)

    lags, kfd = enso_mz.pod_kernel(p, n=128, t_end=2.0)
    assert len(lags) == len(kfd)

    print("smoke test passed")


if __name__ == "__main__":
    main()
