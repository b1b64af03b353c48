"""Smoke test for the Python extension.

Builds the extension, imports it and checks each bound function against the
command-line tool on the same input.

    python3 python/smoke_test.py
"""

import json
import shutil
import struct
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "dfrkit-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    subprocess.run(["cargo", "build", "--release", "-p", "dfrkit"], cwd=ROOT, check=True)
    lib = ROOT / "target" / "release" / "libdfrkit_py.so"
    out = Path(tempfile.mkdtemp()) / "dfrkit.so"
    shutil.copy(lib, out)
    sys.path.insert(0, str(out.parent))
    return ROOT / "target" / "release" / "dfrkit"


def write_fmat(path, h, rate=80.0):
    header = b"FMAT" + struct.pack("<HHQQd", 1, 0, h.shape[0], h.shape[1], rate)
    path.write_bytes(header + h.astype("<f4").tobytes())


def cli(binary, *args):
    return subprocess.run([str(binary), *map(str, args)], check=True, capture_output=True, text=True).stdout


def main():
    binary = build()
    import dfrkit

    rng = np.random.default_rng(0)
    h = rng.standard_normal((160, 8)).astype(np.float32)
    work = Path(tempfile.mkdtemp())
    feats = work / "h.fmat"
    write_fmat(feats, h)

    segments, score = dfrkit.schedule(h, rate=2.0, max_seg=4)
    native = json.loads(cli(binary, "schedule", "--input", feats))
    assert segments == native["segments"], "schedule differs from CLI"
    assert sum(segments) == 160 and len(segments) == 80

    rows = dfrkit.downsample(h, segments)
    assert rows.shape == (80, 8) and rows.dtype == np.float32
    start = 0
    for k, s in enumerate(segments):
        assert np.allclose(rows[k], h[start : start + s].mean(axis=0), atol=1e-6)
        start += s
    expanded = dfrkit.downsample(h, segments, mode="expanded")
    assert np.allclose(expanded.mean(axis=0), h.mean(axis=0), atol=1e-6)

    codes = dfrkit.fsq_quantize_seq(rows, [5, 5, 3, 3, 3, 3, 3, 3])
    assert all(0 <= c < 18225 for c in codes)
    blob = dfrkit.pack(codes, segments, 18225)
    back = dfrkit.unpack(blob)
    assert back["codes"] == codes and back["durations"] == segments and back["frames"] == 160

    scheme_path = work / "scheme.json"
    scheme_path.write_text(json.dumps(native))
    code_path = work / "codes.json"
    code_path.write_text(
        json.dumps({"levels": [5, 5, 3, 3, 3, 3, 3, 3], "K": 18225, "base_rate_hz": 80.0, "codes": codes})
    )
    cli(binary, "pack", "--codes", code_path, "--scheme", scheme_path, "--out", work / "t.dfrt")
    assert (work / "t.dfrt").read_bytes() == bytes(blob), "pack differs from CLI"

    draws = dfrkit.melt_sample(100_000, n=2000, seed=1)
    kept = [d for d in draws if d is not None]
    mean = np.mean(kept, axis=0)
    assert np.all(np.abs(mean - [0.1, 0.45, 0.25, 0.2]) <= 0.03), mean

    try:
        dfrkit.schedule(h, rate=8.0, max_seg=2)
    except ValueError as e:
        assert "160" in str(e)
    else:
        raise AssertionError("infeasible schedule accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
