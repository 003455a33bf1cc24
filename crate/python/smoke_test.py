"""Quick check that the compiled extension loads and agrees with known values.

Build first, either with `maturin develop -m crates/py/pyproject.toml` or
`cargo build -p blockfade-py` followed by copying
`target/debug/libpyblockfade.so` to `pyblockfade.so` somewhere on PYTHONPATH.
"""

import math

import pyblockfade as bf


def main():
    q = bf.Profile("qpsk")
    assert q.max_rate == 2.0
    assert abs(q.mi(0.0)) < 1e-12
    assert abs(q.mmse(0.0) - 1.0) < 1e-12
    assert q.gsv_max_deviation() < 1e-3
    rho = q.inv_mi(1.0)
    assert abs(q.mi(rho) - 1.0) < 1e-9

    gamma = [1.0, 0.25]
    p = bf.allocate(q, gamma, 1.0)
    assert abs(sum(p) / 2 - 1.0) < 1e-9
    assert p[0] > p[1]
    uniform = bf.instantaneous_mi(q, [1.0, 1.0], gamma)
    assert bf.instantaneous_mi(q, p, gamma) >= uniform - 1e-12

    w = bf.min_power(q, [1.0], 1.0)
    assert abs(w[0] / rho - 1.0) < 1e-8

    assert bf.singleton_bound(4, 2, 1.0) == 3
    assert bf.predict_dlt(0.5) == 1.0
    assert math.isinf(bf.predict_dlt(2.0))

    curve = bf.estimate_outage(q, "uniform", 1.0, [0.0, 10.0, 20.0], 2000, 7)
    out = curve["outage"]
    assert out[0] >= out[1] >= out[2]
    again = bf.estimate_outage(q, "uniform", 1.0, [0.0, 10.0, 20.0], 2000, 7)
    assert again["outage"] == out
    try:
        bf.allocate(q, gamma, 1.0, scheme="twf")
    except ValueError:
        pass
    else:
        raise AssertionError("twf without beta must fail")
    print("pyblockfade smoke test: ok")


if __name__ == "__main__":
    main()
