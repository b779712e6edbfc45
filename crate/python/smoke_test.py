"""Smoke test for the Python bindings.

Build the module first, for example:

    cargo build --release -p urysohn-py --features extension-module
    cp target/release/liburysohn_py.so python/urysohn_py.so
    python3 python/smoke_test.py
"""

import json
import os
import sys
from fractions import Fraction

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import urysohn_py as u


def main():
    b = u.UrysohnBuilder(height=4)
    b.run_bookkeeping(60)
    assert len(b) > 1 and b.is_metric()

    d = b.distance(0, 1)
    y = b.realize([0, 1], [d, d])
    assert b.distance(0, y) == d and b.distance(1, y) == d
    assert b.is_metric()
    again = u.UrysohnBuilder.from_json(b.to_json())
    assert len(again) == len(b)

    level = u.Space("real-line").level(1)
    masses = [Fraction(m) for m in level.mu('"1/2"')]
    assert masses == [Fraction(1, 2), Fraction(1, 2)], masses
    assert sum(Fraction(m) for m in u.Space().level(9).mu('"2/7"')) == 1

    assert u.parse_type("(V1,V2)->V1") == "((V1,V2)->V1)"
    assert u.parse_type("V1->V2->V1", curried=True) == "((V1,V2)->V1)"

    for suite in ("selection", "lift", "observation"):
        report = json.loads(u.check(suite, trials=20))
        assert report["passed"], report

    text, ok = u.run_cli(["select", "--level", "3", "--point", "1/3"])
    assert ok and json.loads(text)
    print("smoke test passed")


if __name__ == "__main__":
    main()
