"""End-to-end command line tests, run in-process via cli.main(argv)."""

import numpy as np
import pytest

from lutimlp import cli, geom3, io, luti, tinynet


def write_xyz(path, pts):
    with open(path, "w", encoding="utf-8") as fh:
        for p in pts:
            fh.write(" ".join(repr(float(v)) for v in p) + "\n")


@pytest.fixture()
def model_path(tmp_path):
    path = str(tmp_path / "model.json")
    io.write_model(tinynet.embedding_mlp(k=8, seed=0), path)
    return path


@pytest.fixture()
def cloud_path(tmp_path):
    rng = np.random.default_rng(1)
    pts = rng.uniform(-0.8, 0.8, (50, 3))
    path = str(tmp_path / "cloud.xyz")
    write_xyz(path, pts)
    return path


def parse_record(line):
    # values never contain spaces (paths in tmp_path, comma-joined lists)
    return dict(tok.split("=", 1) for tok in line.strip().split())


# ------------------------------------------------------------- basic wiring

def test_no_command_is_usage_error(capsys):
    assert cli.main([]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0


def test_unknown_flag_exits_one():
    with pytest.raises(SystemExit) as exc:
        cli.main(["mem-estimate", "--d", "4", "--m", "3", "--k", "8",
                  "--sideways"])
    assert exc.value.code == 1


def test_mem_estimate_exact_output(capsys):
    assert cli.main(["mem-estimate", "--d", "4", "--m", "3",
                     "--k", "1024"]) == 0
    assert capsys.readouterr().out == "262144 bytes (0.25 MB)\n"


def test_mem_estimate_rejects_bad_values(capsys):
    assert cli.main(["mem-estimate", "--d", "0", "--m", "3", "--k", "8"]) == 2
    assert "error" in capsys.readouterr().err


# -------------------------------------------------------- bake/embed/register

def test_bake_embed_register_flow(tmp_path, model_path, cloud_path, capsys):
    lut_path = str(tmp_path / "table.lut")
    assert cli.main(["bake", "--model", model_path, "--d", "4",
                     "--out", lut_path]) == 0
    rec = parse_record(capsys.readouterr().out)
    assert rec["d"] == "4" and rec["k"] == "8" and rec["nodes"] == "64"

    emb_path = str(tmp_path / "z.txt")
    assert cli.main(["embed", "--lut", lut_path, "--cloud", cloud_path,
                     "--mode", "irregular", "--out", emb_path]) == 0
    rec = parse_record(capsys.readouterr().out)
    assert rec["points"] == "50" and rec["mode"] == "irregular"
    with open(emb_path, encoding="utf-8") as fh:
        rows = [[float(v) for v in line.split()] for line in fh]
    tbl = io.read_lut(lut_path)
    pts = np.loadtxt(cloud_path)
    want = luti.embed_batch(tbl, pts, mode="irregular")
    assert np.array_equal(np.array(rows), want)   # repr round-trips exactly

    # registration smoke on a small rigid offset
    g = geom3.se3_exp(np.array([0.0, 0.05, 0.0, 0.02, -0.01, 0.0]))
    src_path = str(tmp_path / "src.xyz")
    write_xyz(src_path, geom3.transform_points(geom3.inverse(g), pts))
    assert cli.main(["register", "--lut", lut_path, "--source", src_path,
                     "--target", cloud_path, "--jac", "analytic-luti"]) == 0
    rec = parse_record(capsys.readouterr().out)
    assert rec["jac"] == "analytic-luti"
    pose = np.array([float(v) for v in rec["pose"].split(",")])
    assert pose.shape == (16,) and np.isfinite(pose).all()
    assert int(rec["iterations"]) >= 1


def test_register_fdm_mlp_needs_model(tmp_path, model_path, cloud_path,
                                      capsys):
    assert cli.main(["register", "--source", cloud_path,
                     "--target", cloud_path, "--jac", "fdm-mlp"]) == 1
    assert "usage error" in capsys.readouterr().err
    assert cli.main(["register", "--source", cloud_path,
                     "--target", cloud_path, "--jac", "fdm-mlp",
                     "--model", model_path]) == 0
    rec = parse_record(capsys.readouterr().out)
    assert rec["converged"] in ("True", "False")


def test_register_table_jacobians_need_lut(cloud_path, capsys):
    assert cli.main(["register", "--source", cloud_path,
                     "--target", cloud_path]) == 1
    assert "usage error" in capsys.readouterr().err


def test_embed_missing_lut_is_data_error(tmp_path, cloud_path, capsys):
    missing = str(tmp_path / "nope.lut")
    assert cli.main(["embed", "--lut", missing, "--cloud", cloud_path,
                     "--out", str(tmp_path / "z.txt")]) == 2


def test_embed_corrupt_lut_is_data_error(tmp_path, cloud_path, capsys):
    bad = str(tmp_path / "bad.lut")
    with open(bad, "wb") as fh:
        fh.write(b"NOTL" + b"\x00" * 100)
    assert cli.main(["embed", "--lut", bad, "--cloud", cloud_path,
                     "--out", str(tmp_path / "z.txt")]) == 2
    assert "error" in capsys.readouterr().err


# ------------------------------------------------------------ train and eval

def make_dataset_dir(tmp_path, seed=3, n_files=3, n_points=40):
    root = tmp_path / "shapes"
    rng = np.random.default_rng(seed)
    for cls, scale in (("disk", [1.0, 1.0, 0.05]), ("rod", [0.05, 0.05, 1.0])):
        cdir = root / cls
        cdir.mkdir(parents=True)
        for i in range(n_files):
            pts = rng.normal(0.0, 1.0, (n_points, 3)) * scale
            write_xyz(str(cdir / f"{cls}_{i}.xyz"), pts)
    return f"dir:{root}"


TRAIN_ARGS = ["--d", "2", "--k", "8", "--epochs", "2", "--batch-size", "4",
              "--n-points", "32", "--seed", "5"]


def test_train_and_eval_on_directory_dataset(tmp_path, capsys):
    spec = make_dataset_dir(tmp_path)
    out = str(tmp_path / "bundle")
    assert cli.main(["train", "--variant", "luti_uni_e2e", "--dataset", spec,
                     "--out", out] + TRAIN_ARGS) == 0
    rec = parse_record(capsys.readouterr().out)
    assert rec["variant"] == "luti_uni_e2e"
    assert rec["bundle"] == out
    assert rec["lut"] == out + ".lut"
    assert rec["history"] == out + ".history"
    assert 0.0 <= float(rec["final_train_acc"]) <= 1.0
    hist = io.read_records(out + ".history")
    assert len(hist) == 2 and hist[0]["epoch"] == "0"

    assert cli.main(["eval", "--model", out, "--lut", out + ".lut",
                     "--dataset", spec, "--n-points", "32"]) == 0
    rec = parse_record(capsys.readouterr().out)
    assert rec["variant"] == "luti_uni_e2e"
    assert 0.0 <= float(rec["accuracy"]) <= 1.0
    assert len(rec["per_class"].split(",")) == 2


def test_train_mlp_baseline_emits_no_lut(tmp_path, capsys):
    spec = make_dataset_dir(tmp_path)
    out = str(tmp_path / "base")
    assert cli.main(["train", "--variant", "mlp_baseline", "--dataset", spec,
                     "--out", out] + TRAIN_ARGS) == 0
    rec = parse_record(capsys.readouterr().out)
    assert "lut" not in rec
    assert cli.main(["eval", "--model", out, "--dataset", spec,
                     "--n-points", "32"]) == 0


def test_eval_table_variant_requires_lut(tmp_path, capsys):
    spec = make_dataset_dir(tmp_path)
    out = str(tmp_path / "bundle")
    cli.main(["train", "--variant", "lut_e2e", "--dataset", spec,
              "--out", out] + TRAIN_ARGS)
    capsys.readouterr()
    assert cli.main(["eval", "--model", out, "--dataset", spec,
                     "--n-points", "32"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_train_is_byte_reproducible(tmp_path, capsys):
    spec = make_dataset_dir(tmp_path)
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    args = ["train", "--variant", "luti_irr_e2e", "--dataset", spec] \
        + TRAIN_ARGS
    assert cli.main(args + ["--out", out_a]) == 0
    assert cli.main(args + ["--out", out_b]) == 0
    capsys.readouterr()
    with open(out_a + ".lut", "rb") as fh:
        lut_a = fh.read()
    with open(out_b + ".lut", "rb") as fh:
        lut_b = fh.read()
    assert lut_a == lut_b
    with open(out_a + ".history", encoding="utf-8") as fh:
        hist_a = fh.read()
    with open(out_b + ".history", encoding="utf-8") as fh:
        hist_b = fh.read()
    assert hist_a == hist_b


def test_embed_stdout_is_reproducible(tmp_path, model_path, cloud_path,
                                      capsys):
    lut_path = str(tmp_path / "table.lut")
    cli.main(["bake", "--model", model_path, "--d", "3", "--out", lut_path])
    capsys.readouterr()
    outs = []
    for name in ("e1.txt", "e2.txt"):
        cli.main(["embed", "--lut", lut_path, "--cloud", cloud_path,
                  "--out", str(tmp_path / name)])
        outs.append(capsys.readouterr().out.replace(name, "SAME"))
    assert outs[0] == outs[1]
    with open(tmp_path / "e1.txt", "rb") as fh:
        b1 = fh.read()
    with open(tmp_path / "e2.txt", "rb") as fh:
        b2 = fh.read()
    assert b1 == b2


def test_train_rejects_bad_dataset_spec(tmp_path, capsys):
    assert cli.main(["train", "--variant", "mlp_baseline",
                     "--dataset", "ftp://nope", "--epochs", "1",
                     "--out", str(tmp_path / "x")]) == 1
    assert cli.main(["train", "--variant", "mlp_baseline",
                     "--dataset", f"dir:{tmp_path / 'empty'}", "--epochs", "1",
                     "--out", str(tmp_path / "x")]) == 2


# --------------------------------------------------------- dump-slice, bench

def test_dump_slice_output_shape(tmp_path, model_path, capsys):
    lut_path = str(tmp_path / "table.lut")
    cli.main(["bake", "--model", model_path, "--d", "5", "--out", lut_path])
    capsys.readouterr()
    assert cli.main(["dump-slice", "--lut", lut_path, "--res", "5",
                     "--channels", "0,2"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0] == "x y ch0 ch2"
    assert len(lines) == 26
    assert cli.main(["dump-slice", "--lut", lut_path, "--channels", "99"]) == 2
    assert cli.main(["dump-slice", "--lut", lut_path, "--channels", ""]) == 1


def test_bench_smoke(capsys):
    assert cli.main(["bench", "--suite", "embedding", "--k", "8", "--d", "2",
                     "--n", "32", "--reps", "30"]) == 0
    captured = capsys.readouterr()
    lines = captured.out.strip().split("\n")
    assert len(lines) == 3
    recs = [parse_record(line) for line in lines]
    assert [r["kernel"] for r in recs] == ["mlp", "luti_uni", "luti_irr"]
    assert "median_us" in captured.err
