"""Quick end-to-end check of the pyfaraday bindings.

    pip install --no-build-isolation ./crates/python
    python python/smoke_test.py
"""

import math

import pyfaraday as pf


def main():
    p = pf.Params()
    print(p)

    angle, delta, warn = pf.max_rotation(p)
    print(f"max rotation {math.degrees(abs(angle)):.3f} deg at {pf.to_mhz(delta):+.3f} MHz")
    assert abs(math.degrees(abs(angle)) - 21.1) < 0.1
    assert not warn

    for d in (-2.0, 0.0, 1.3):
        exact = pf.transmittance(pf.mhz(d), p)
        master = pf.master_transmittance(pf.mhz(d), 0.0, p)
        assert abs(master - exact) < 1e-6 * abs(exact)

    assert pf.rotation_angle(0.0, p, g=0.0) == 0.0

    t = pf.transmittance(pf.mhz(-1.1), p)
    post, click = pf.conditional_population(0.5, math.pi / 2, t)
    assert abs(post - 1.0) < 1e-12 and click > 0

    m = pf.kraus(0.3, 0.7)
    assert abs(abs(m[0]) ** 2 - math.cos(0.7) ** 2) < 1e-12

    ens = pf.sample_selected(p, 300, seed=1)
    avg = ens.average_rotation([pf.mhz(x) for x in (-1.0, -0.5, 0.5, 1.0)], p)
    peak = max(abs(a) for a in avg)
    print(f"{len(ens)} atoms from {ens.tried} candidates, averaged peak {math.degrees(peak):.2f} deg")
    assert 0 < peak < abs(angle)

    scan = pf.scan_length([100e-6, 150e-6, 300e-6])
    print("length scan", [(round(r[0] * 1e6), round(math.degrees(r[1]), 2)) for r in scan])

    try:
        pf.Params(kappa_mhz=-1.0)
    except pf.FaradayError as e:
        print("rejected:", e)
    else:
        raise AssertionError("negative kappa accepted")

    print("ok")


if __name__ == "__main__":
    main()
