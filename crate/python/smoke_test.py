"""Smoke test for the pyimpdde bindings.

Build and install first:
    pip install --no-build-isolation ./crates/python
"""
import json
import math

import pyimpdde


def main():
    ids = pyimpdde.zoo_ids()
    assert "scalar_nicholson" in ids and "planar_autonomous" in ids, ids

    s = pyimpdde.System.zoo("scalar_nicholson")
    assert s.n == 1 and abs(s.omega - math.pi) < 1e-15
    r = json.loads(s.certify("T3_3_average", search_v=True, epsilon=0.1))
    assert r["pass"], r["margin"]

    # round trip through TOML keeps the digest
    t = pyimpdde.System.from_toml(s.to_toml())
    assert t.digest == s.digest

    p = pyimpdde.System.zoo("planar_autonomous", eta=0.2, omega=math.log(2) / 2)
    b = json.loads(p.bounds())
    assert abs(b[0]["m1"] - 1.0 / (2 - 1.2)) < 1e-12
    fp = json.loads(p.solve())
    assert fp["converged"] and fp["positivity_floor"] > 0
    assert len(fp["solution"]["left"]) == 2
    sim = json.loads(p.simulate(20.0))
    assert min(sim["long_run_floor"]) > 0.5 and len(sim["events"]) > 0

    assert not json.loads(pyimpdde.System.zoo("planar_autonomous", eta=0.4).certify("T4_2_planar"))["pass"]

    try:
        pyimpdde.System.from_toml('omega = 1.0\n[[component]]\ndeath = 0.0\n'
                                  'nonlinearity = { kind = "nicholson_discrete", terms = [{ beta = 2.0, tau = 0.5 }] }\n')
    except ValueError as e:
        assert "H4" in str(e), e
    else:
        raise AssertionError("zero death rate accepted")

    code, out, _ = pyimpdde.run_cli(["report", "zoo:scalar_nicholson", "--json"])
    assert code == 0 and json.loads(out)["outputs"]["verdict"] == "certified+computed"
    print("pyimpdde smoke test OK")


if __name__ == "__main__":
    main()
