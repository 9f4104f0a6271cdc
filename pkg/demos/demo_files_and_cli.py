"""Round-tripping tables and clouds through files and the command line.

The .lut container is a little-endian binary header plus float32 node
data; bundles are json with base64 weight blobs. Everything the library
does is also reachable through `python -m lutimlp ...`, which this
script drives in-process so the printed commands are copy-pasteable.

Run:  python demos/demo_files_and_cli.py
"""
import tempfile
from pathlib import Path

import numpy as np

from lutimlp import cli, data, io, lattice, luti, tinynet


def run(argv):
    print("$ python -m lutimlp " + " ".join(argv))
    rc = cli.main(argv)
    if rc:
        raise SystemExit(f"command failed with {rc}")


def main():
    work = Path(tempfile.mkdtemp(prefix="lutimlp_demo_"))
    print(f"working in {work}\n")

    # write a cloud the loaders understand
    cloud = data.synth_shapes(seed=2, n_per_class=1, n_points=128)[1]
    xyz = work / "cube.xyz"
    with open(xyz, "w") as fh:
        for p in cloud.points:
            fh.write(" ".join(repr(float(v)) for v in p) + "\n")

    # binary table round-trip is bit exact
    mlp = tinynet.fold_batchnorm(tinynet.init_mlp((3, 32, 16), seed=1))
    tbl = luti.bake(mlp, lattice.Lattice(d=4, lo=-1.0, hi=1.0))
    lut_path = work / "demo.lut"
    io.write_lut(tbl, lut_path, mode_hint=1)
    back = io.read_lut(lut_path)
    assert np.array_equal(back.data, tbl.data.astype(np.float32))
    print(f"wrote {lut_path.name}: {lut_path.stat().st_size} bytes, "
          f"round-trip bit exact\n")

    # the same flows through the command line
    run(["mem-estimate", "--d", "4", "--m", "3", "--k", "16",
         "--bytes", "4"])
    print()
    model_out = work / "model"
    run(["train", "--dataset", "synth", "--variant", "luti_irr_e2e",
         "--d", "4", "--k", "32", "--epochs", "30", "--batch-size", "8",
         "--n-per-class", "8", "--n-points", "128", "--seed", "4",
         "--out", str(model_out)])
    print()
    run(["eval", "--model", str(model_out),
         "--lut", str(model_out) + ".lut",
         "--dataset", "synth", "--n-per-class", "2", "--n-points", "64",
         "--seed", "5"])
    print()
    emb_out = work / "cube_embedded.txt"
    run(["embed", "--lut", str(lut_path), "--cloud", str(xyz),
         "--mode", "nearest", "--out", str(emb_out)])
    first = emb_out.read_text().splitlines()[0].split()
    print(f"  first row, first 4 of {len(first)} channels: "
          + " ".join(f"{float(v):.4f}" for v in first[:4]))
    print()
    # register the cube against a shifted copy of itself
    shifted = work / "cube_shifted.xyz"
    with open(shifted, "w") as fh:
        for p in cloud.points + np.array([0.05, -0.03, 0.02]):
            fh.write(" ".join(repr(float(v)) for v in p) + "\n")
    run(["register", "--lut", str(model_out) + ".lut",
         "--source", str(xyz), "--target", str(shifted),
         "--jac", "analytic-luti", "--mode", "irregular"])
    print("\nall commands exited 0")


if __name__ == "__main__":
    main()
