"""Smoke test for the ccid extension module.

Build and run from the repository root:

    cargo build --release -p ccid-python --features extension-module
    cp target/release/libccid.so python/ccid.so
    python3 python/smoke_test.py
"""

import json
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

import ccid  # noqa: E402


def main():
    assert len(ccid.THEOREMS) == 11, ccid.THEOREMS

    report = ccid.counterexample()
    assert report["available_laws_equal"] and report["distinct"]
    or1 = Fraction(int(report["or1"]["numerator"]), int(report["or1"]["denominator"]))
    assert or1 == Fraction(587791, 167166), or1
    print("counterexample ok:", or1)

    spec = ccid.Spec.fixture("reference")
    for tid in ccid.THEOREMS:
        rec = spec.verify(tid)
        assert rec["equal"], (tid, rec["lhs_exact"], rec["rhs_exact"])
    print("exact checks ok:", spec)

    confounded = ccid.Spec.fixture("confounded").verify("T1")
    assert not confounded["equal"] and confounded["abs_diff"] > 0.01
    print("negative control ok: |diff| = %.4f" % confounded["abs_diff"])

    study = spec.draw("T1", 20000, 7)
    est = study.estimate("T1")
    boot = study.bootstrap("T1", 50, 7)
    truth = spec.verify("T1")["lhs"]
    assert abs(est["value"] - truth) < 4 * boot["se"], (est["value"], truth, boot["se"])
    print("estimate ok: %.4f (truth %.4f, se %.4f)" % (est["value"], truth, boot["se"]))

    logistic = json.dumps({"type": "logistic", "terms": ["first", "l", "first*l", "a_prev", "a_prev*l"]})
    pp = spec.draw("T6", 20000, 7).estimate("T6", logistic)
    print("per-protocol estimate: %.4f" % pp["value"])

    with tempfile.TemporaryDirectory() as d:
        manifest = study.export(d, "t1")
        assert (Path(d) / "t1.csv").exists() and manifest["seed"] == 7

    fit = ccid.clr_fit(1, [([1.0], [[0.0]], 2.0), ([0.0], [[1.0]], 1.0)])
    assert fit["converged"] and abs(fit["beta"][0] - 0.6931471805599453) < 1e-8, fit
    print("clr ok: beta =", fit["beta"])

    try:
        ccid.Spec.from_json("{}")
    except ccid.CcidError as e:
        print("error path ok:", str(e)[:60])
    else:
        raise AssertionError("expected CcidError")

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
