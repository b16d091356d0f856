"""Smoke test for the ris_crn Python bindings.

Uses an installed ``ris_crn`` module when available (``maturin develop`` in
crates/py); otherwise loads the library built by
``cargo build --release -p ris-crn-py``.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys


def load():
    try:
        import ris_crn

        return ris_crn
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parents[1]
    for profile in ("release", "debug"):
        for name in ("libris_crn_py.so", "libris_crn_py.dylib", "ris_crn_py.dll"):
            path = root / "target" / profile / name
            if path.exists():
                loader = importlib.machinery.ExtensionFileLoader("ris_crn", str(path))
                spec = importlib.util.spec_from_file_location("ris_crn", path, loader=loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                sys.modules["ris_crn"] = module
                return module
    sys.exit("ris_crn not found: run `cargo build --release -p ris-crn-py` first")


def main():
    rc = load()
    assert rc.vertical_attenuation_db(-30.0, -30.0) == 0.0
    assert rc.vertical_attenuation_db(-30.0, -40.0) == -12.0

    s = rc.Scenario.reference_default()
    s.n_ris = 8
    s.generation = "iid"
    ch = rc.Channels.generate(s, 1)
    r = rc.run_algorithm1(ch, s, seed=1)
    print(r)
    assert r.feasible and math.isfinite(r.se) and r.se > 0
    se, leak = rc.evaluate(ch, s, r.w_s, r.phases, r.tilt_deg)
    assert abs(se - r.se) <= 1e-9 * max(se, 1.0)
    assert leak <= s.gamma_w * (1 + 1e-6)

    spec = '{"kind": "elements", "grid": [4, 8], "trials": 3, "methods": ["proposed", "random_phase"]}'
    csv = rc.run_sweep(spec, s, workers=1)
    print(csv, end="")
    assert len(csv.strip().splitlines()) == 5
    print("smoke test ok")


if __name__ == "__main__":
    main()
