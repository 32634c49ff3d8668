#!/usr/bin/env python3
"""Regenerate the committed test fixtures (golden container + decoy manifests).

Run from the repository root:

    python3 tools/make_fixtures.py
"""

import struct
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from bsb.synthetic import (  # noqa: E402
    make_missing_part_instance,
    make_planted_instance,
    write_instance_bundle,
    write_manifest,
)

FIXTURES = ROOT / "tests" / "fixtures"


def make_golden():
    values = np.array([[1.5, -2.25, 0.0], [3.75, 65504.0, -0.5]], dtype=np.float32)
    raw = b"BSBT" + struct.pack("<III", 1, 1, 2) + struct.pack("<QQ", 2, 3) + values.tobytes()
    (FIXTURES / "golden.bsbt").write_bytes(raw)
    print(f"golden.bsbt: {len(raw)} bytes")


def make_decoy_family():
    """One manifest per decoy count; each manifest carries several cases.

    Within a manifest every case plants the same number of decoy vertices in
    front of the true part, so plain nearest-neighbor matching fails exactly
    when decoys > 0 while filtered matching recovers once k clears the decoys.
    """
    out = FIXTURES / "decoys"
    for count in (0, 1, 2, 4):
        directory = out / f"decoys{count}"
        cases = []
        for i in range(6):
            inst = make_planted_instance(
                seed=100 * count + i,
                width=18,
                height=18,
                dim=8,
                parts=3,
                verts_per_part=5,
                decoys=count,
                click_part=1 + (i % 3),
                noise=0.02,
            )
            cases.append(write_instance_bundle(inst, directory, f"case{i}"))
        write_manifest(directory, cases)
        print(f"decoys{count}: {len(cases)} cases")


def make_missing_manifest():
    directory = FIXTURES / "missing"
    cases = []
    for i in range(4):
        inst = make_missing_part_instance(seed=500 + i, width=16, height=16, noise=0.02)
        cases.append(write_instance_bundle(inst, directory, f"case{i}"))
    write_manifest(directory, cases)
    print(f"missing: {len(cases)} cases")


if __name__ == "__main__":
    FIXTURES.mkdir(parents=True, exist_ok=True)
    make_golden()
    make_decoy_family()
    make_missing_manifest()
