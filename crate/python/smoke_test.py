"""Quick end-to-end check of the pynlirf bindings.

Build the extension and put it on the path first, e.g.

    cargo build -p nlirf-py --release --features extension-module
    cp target/release/libpynlirf.so python/pynlirf.so
    python3 python/smoke_test.py
"""

import json
import math

import pynlirf


def close(a, b, tol):
    return all(abs(x - y) <= tol for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def main():
    print("pynlirf", pynlirf.__version__)

    var = pynlirf.Model.from_json(json.dumps({
        "family": "gaussian_var1",
        "n": 2,
        "params": {"phi": [[0.5, 0.0], [0.0, 0.5]], "d": [[1.0, 0.5], [0.0, 1.0]]},
    }))
    assert var.n == 2 and var.family == "gaussian_var1"

    states, eps = var.simulate([0.0, 0.0], 200, 7)
    assert len(states) == 200
    # D is not lower triangular, so the extracted innovations are a rotation
    # of the simulated ones; the path is still recovered exactly
    back = var.extract_innovations([0.0, 0.0], states)
    assert close(var.reconstruct([0.0, 0.0], back), states, 1e-10)

    lower = pynlirf.Model.zoo("gaussian_var1")
    states, eps = lower.simulate([0.0, 0.0], 200, 7)
    assert close(lower.extract_innovations([0.0, 0.0], states), eps, 1e-10)

    mc = var.eirf([0.3, -0.7], [1.0, 0.0], 8, 500, 1)
    exact = pynlirf.var1_irf_closed_form([[0.5, 0.0], [0.0, 0.5]], [[1.0, 0.5], [0.0, 1.0]], [1.0, 0.0], 8)
    assert close(mc["mean"], exact, 1e-10)

    value, direction = pynlirf.max_irf([[0.5, 0.0], [0.0, 0.5]], [[1.0, 0.5], [0.0, 1.0]], [1.0, 0.0], 2)
    assert abs(sum(d * d for d in direction) - 1.0) < 1e-12 and value > 0

    q = pynlirf.skew_exp([[0.0, -0.3, 0.1], [0.3, 0.0, 0.2], [-0.1, -0.2, 0.0]])
    qtq = [[sum(q[k][i] * q[k][j] for k in range(3)) for j in range(3)] for i in range(3)]
    assert close(qtq, [[1, 0, 0], [0, 1, 0], [0, 0, 1]], 1e-12)

    r = pynlirf.radial_rotation([0.6, -1.1])
    assert abs(math.hypot(*r) - math.hypot(0.6, -1.1)) < 1e-12
    u = pynlirf.radial_rotation_uniform([0.2, 0.9], "constant", 0.4)
    assert all(0.0 < x < 1.0 for x in u)
    assert pynlirf.grid_svg(segments=20).startswith("<svg")

    dar = pynlirf.Model.zoo("dar1")
    lyap = pynlirf.lyapunov_check(0.5, 0.5, 20000, 3)
    assert lyap["stationary"] and lyap["estimate"] < 0

    path, _ = dar.simulate([0.0], 500, 11)
    markov = pynlirf.markov_test(path, 1, resamples=49)
    assert 0.0 <= markov["p_value"] <= 1.0
    z = dar.extract_innovations([0.0], path)
    wn = pynlirf.strong_white_noise_test(z, 2, resamples=49)
    assert 0.0 <= wn["p_value"] <= 1.0

    try:
        pynlirf.Model.zoo("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown zoo name accepted")
    try:
        pynlirf.Model.from_json('{"family": "dar1", "n": 1, "params": {"gamma": 0.5, "alpha": -1, "beta": 0.5}}')
    except (pynlirf.NlirfError, ValueError):
        pass
    else:
        raise AssertionError("negative alpha accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
