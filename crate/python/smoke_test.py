#!/usr/bin/env python3
"""Smoke test for the websym_py extension module.

Builds the cdylib with cargo, stages it under the right module name in a
temporary directory, imports it and exercises the main entry points.

Usage: python3 python/smoke_test.py [--profile release|debug]
"""

import argparse
import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build(profile: str) -> Path:
    cmd = ["cargo", "build", "-p", "websym-py"]
    if profile == "release":
        cmd.append("--release")
    subprocess.run(cmd, cwd=ROOT, check=True)
    libdir = ROOT / "target" / profile
    for name in ("libwebsym_py.so", "libwebsym_py.dylib", "websym_py.dll"):
        candidate = libdir / name
        if candidate.exists():
            return candidate
    raise SystemExit(f"built library not found under {libdir}")


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--profile", choices=["release", "debug"], default="release")
    args = ap.parse_args()

    lib = build(args.profile)
    stage = Path(tempfile.mkdtemp(prefix="websym-py-"))
    shutil.copy(lib, stage / "websym_py.so")
    sys.path.insert(0, str(stage))

    import websym_py  # noqa: E402

    print(f"websym_py {websym_py.__version__} loaded from {lib}")

    # a parallelizable web: dimension n + 1
    report = json.loads(
        websym_py.analyze(
            json.dumps(
                {"n": 3, "f": "x1 + x2 + x3", "base": [0, 0, 0], "order": 8}
            )
        )
    )
    assert report["solver"]["dim"] == 4, report["solver"]
    assert report["parallelizability"]["verdict"] == "parallelizable-to-order-8"
    print("analyze: linear web has dimension 4 and is parallelizable")

    # the Web class round trip
    web = websym_py.Web(3, "x1 + (x2 - x3) + (x2 - x3)^3", ["0", "0", "0"])
    assert web.validate() == ["1", "1", "-1"]
    assert web.dimension() == 2
    print(f"Web class: {web!r} -> dimension 2")

    # an explicit certificate: the shifted Chevalley triple kills the
    # 4-variable tangent integral
    web_json = json.dumps(
        {
            "n": 4,
            "f": "(3 + x1*x2 - x1 - 3*x2 + x4 + 3*x3 + x3*x4 - x3*x1 - x2*x4)"
            " / (4 + x1*x2 - 2*x1 - 2*x2 + 2*x4 + 2*x3 + x3*x4 - x3*x2 - x1*x4)",
            "base": [0, 0, 0, 0],
            "order": 8,
        }
    )
    field_json = json.dumps(
        {"components": [[0, 0, 1], [1, 2, 1], [4, 4, 1], [9, 6, 1]]}
    )
    cert = json.loads(websym_py.verify_field(web_json, field_json))
    assert cert["passed"] and cert["xf_is_zero"] and cert["xf_zero_exact"], cert
    print("verify_field: E kills the tangent integral exactly")

    # normal form of x + y + xy is linear to the working order
    nf = json.loads(
        websym_py.normal_form(
            json.dumps({"n": 2, "f": "x1 + x2 + x1*x2", "base": [0, 0], "order": 8})
        )
    )
    assert nf["linear_to_order"] == 8, nf
    print("normal_form: x + y + xy linearizes")

    # one catalogue verification
    entry = json.loads(websym_py.atlas_verify("n-exp-n4"))
    assert entry["status"] == "confirmed", entry["diffs"]
    cl = entry["classification"]
    assert (cl["s"], cl["n"], cl["c"]) == (0, 1, 2)
    assert cl["routes_agree"]
    print("atlas_verify: n-exp-n4 confirmed with factor counts (0, 1, 2)")

    bad = False
    try:
        websym_py.analyze(json.dumps({"n": 3, "f": "x1 + x2*x3", "base": [0, 0, 0]}))
    except ValueError:
        bad = True
    assert bad, "invalid web must raise ValueError"
    print("error mapping: invalid web raises ValueError")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
