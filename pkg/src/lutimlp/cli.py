"""Command line entry point.

Subcommands: bake, embed, register, train, eval, bench, dump-slice,
mem-estimate.  Machine-readable output goes to stdout, diagnostics to
stderr.  Exit codes: 0 success, 1 usage error, 2 data/model error.
Seeded subcommands print byte-identical stdout across runs on the same
machine (timing diagnostics only ever go to stderr).
"""

from __future__ import annotations

import argparse
import sys

from . import bench, data, io, luti, pipeline, registration, tinynet
from .lattice import Lattice

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _log(msg):
    print(msg, file=sys.stderr)


def _load_cloud(path):
    if str(path).lower().endswith(".off"):
        return data.load_off(path)
    return data.load_xyz(path)


def _load_dataset(spec, seed, n_per_class, n_points):
    if spec == "synth":
        return data.synth_shapes(seed, n_per_class, n_points)
    if spec.startswith("dir:"):
        root = spec[4:]
        import os
        classes = sorted(e for e in os.listdir(root)
                         if os.path.isdir(os.path.join(root, e)))
        if not classes:
            raise ValueError(f"{root}: no class subdirectories")
        out = []
        for ci, cls in enumerate(classes):
            cdir = os.path.join(root, cls)
            files = sorted(f for f in os.listdir(cdir)
                           if f.lower().endswith((".off", ".xyz")))
            for fi, fname in enumerate(files):
                cloud = _load_cloud(os.path.join(cdir, fname))
                cloud = data.sample_n(cloud, n_points, [seed, ci, fi])
                cloud = data.normalize_unit_sphere(cloud)
                cloud.label = ci
                out.append(cloud)
        if not out:
            raise ValueError(f"{root}: no .off/.xyz files found")
        return out
    raise UsageError(f"--dataset must be 'synth' or 'dir:PATH', got {spec!r}")


def build_parser():
    p = _Parser(prog="lutimlp",
                description="Tabulated point-embedding toolkit: bake MLPs "
                            "onto lattices, embed, register, train, bench.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    fmt = argparse.ArgumentDefaultsHelpFormatter

    sp = sub.add_parser("bake", formatter_class=fmt,
                        help="evaluate a model at lattice nodes, write a LUT")
    sp.add_argument("--model", required=True, help="model JSON path")
    sp.add_argument("--d", type=int, required=True, help="nodes per axis")
    sp.add_argument("--out", required=True, help="output .lut path")

    sp = sub.add_parser("embed", formatter_class=fmt,
                        help="embed a cloud through a LUT")
    sp.add_argument("--lut", required=True)
    sp.add_argument("--cloud", required=True, help=".xyz or .off file")
    sp.add_argument("--mode", choices=luti.EMBED_MODES, default="uniform")
    sp.add_argument("--out", required=True,
                    help="output text path, one K-vector row per point")

    sp = sub.add_parser("register", formatter_class=fmt,
                        help="register source onto target "
                             "(clouds assumed unit-sphere normalized)")
    sp.add_argument("--lut", help="LUT path (table-based Jacobians)")
    sp.add_argument("--source", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--jac", choices=("fdm-mlp", "fdm-luti", "analytic-luti"),
                    default="analytic-luti")
    sp.add_argument("--model", help="model JSON (required for --jac fdm-mlp)")
    sp.add_argument("--mode", choices=("uniform", "irregular"),
                    default="irregular", help="embedding mode")
    sp.add_argument("--iters", type=int, default=10)
    sp.add_argument("--t", type=float, default=0.01, help="FDM step")
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("train", formatter_class=fmt,
                        help="train a classification variant")
    sp.add_argument("--variant", required=True, choices=pipeline.VARIANT_NAMES)
    sp.add_argument("--d", type=int, default=4)
    sp.add_argument("--k", type=int, default=256)
    sp.add_argument("--epochs", type=int, default=60)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dataset", default="synth", help="synth or dir:PATH")
    sp.add_argument("--lambda-tv", type=float, default=1.0)
    sp.add_argument("--pretrain-frac", type=float, default=0.0)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--n-per-class", type=int, default=250)
    sp.add_argument("--n-points", type=int, default=512)
    sp.add_argument("--out", required=True,
                    help="bundle path; tables land at OUT.lut, "
                         "history at OUT.history")

    sp = sub.add_parser("eval", formatter_class=fmt,
                        help="evaluate a trained bundle")
    sp.add_argument("--model", required=True, help="bundle path from train")
    sp.add_argument("--lut", help="LUT path for table-backed variants")
    sp.add_argument("--dataset", default="synth")
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--n-per-class", type=int, default=50)
    sp.add_argument("--n-points", type=int, default=512)

    sp = sub.add_parser("bench", formatter_class=fmt,
                        help="timing harness (records on stdout, table on "
                             "stderr)")
    sp.add_argument("--suite", choices=("embedding", "jacobian"),
                    required=True)
    sp.add_argument("--d", type=int, default=4)
    sp.add_argument("--k", type=int, default=1024)
    sp.add_argument("--n", type=int, default=1024)
    sp.add_argument("--reps", type=int, default=30)

    sp = sub.add_parser("dump-slice", formatter_class=fmt,
                        help="sample channels on a z=const plane")
    sp.add_argument("--lut", required=True)
    sp.add_argument("--z", type=float, default=0.0)
    sp.add_argument("--channels", default="0", help="comma-separated ids")
    sp.add_argument("--res", type=int, default=33)
    sp.add_argument("--mode", choices=luti.EMBED_MODES, default="uniform")

    sp = sub.add_parser("mem-estimate", formatter_class=fmt,
                        help="table footprint D^M * K * bytes")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--bytes", type=int, default=4)

    return p


def cmd_bake(args):
    mlp = io.read_model(args.model)
    tbl = luti.bake(mlp, Lattice(args.d))
    io.write_lut(tbl, args.out)
    print(io.format_record({"d": args.d, "k": tbl.k,
                            "nodes": tbl.lattice.n_nodes, "out": args.out}))
    return EXIT_OK


def cmd_embed(args):
    tbl = io.read_lut(args.lut)
    cloud = _load_cloud(args.cloud)
    z = luti.embed_batch(tbl, cloud.points, mode=args.mode)
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in z:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    print(io.format_record({"points": cloud.n, "k": tbl.k,
                            "mode": args.mode, "out": args.out}))
    return EXIT_OK


def cmd_register(args):
    jac_mode = args.jac.replace("-", "_")
    if jac_mode == "fdm_mlp":
        if not args.model:
            raise UsageError("--jac fdm-mlp needs --model")
        model = io.read_model(args.model)
    else:
        if not args.lut:
            raise UsageError(f"--jac {args.jac} needs --lut")
        model = io.read_lut(args.lut)
    cfg = registration.RegistrationConfig(max_iter=args.iters,
                                          jac_mode=jac_mode,
                                          fdm_step=args.t,
                                          embed_mode=args.mode)
    src = _load_cloud(args.source)
    tgt = _load_cloud(args.target)
    res = registration.register(model, src, tgt, cfg)
    pose = ",".join(repr(float(v)) for v in res.g_est.as_matrix().ravel())
    print(io.format_record({
        "seed": args.seed, "jac": args.jac,
        "iterations": res.iterations_used, "converged": res.converged,
        "damped": res.damped, "residual": res.residual_norms[-1],
        "pose": pose}))
    return EXIT_OK


def cmd_train(args):
    dataset = _load_dataset(args.dataset, args.seed, args.n_per_class,
                            args.n_points)
    variant = pipeline.Variant(args.variant, d=args.d, k=args.k,
                               lambda_tv=args.lambda_tv)
    cfg = pipeline.TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                               seed=args.seed,
                               pretrain_frac=args.pretrain_frac)
    _log(f"training {args.variant} on {len(dataset)} clouds "
         f"({args.epochs} epochs)")
    model = pipeline.train(variant, dataset, cfg)
    io.write_bundle(args.out, {"name": variant.name, "d": variant.d,
                               "k": variant.k,
                               "lambda_tv": variant.lambda_tv},
                    model.head, model.embed_mlp)
    outputs = {"bundle": args.out}
    if model.table is not None:
        lut_path = args.out + ".lut"
        hint = 1 if variant.embed_mode == "irregular" else 0
        io.write_lut(luti.BasisTable(model.lattice, model.table.data),
                     lut_path, mode_hint=hint)
        outputs["lut"] = lut_path
    if model.history:
        io.write_records(model.history, args.out + ".history")
        outputs["history"] = args.out + ".history"
    rec = {"variant": variant.name, "d": variant.d, "k": variant.k,
           "epochs": args.epochs, "seed": args.seed}
    if model.history:
        rec["final_loss"] = model.history[-1]["loss"]
        rec["final_train_acc"] = model.history[-1]["train_acc"]
    rec.update(outputs)
    print(io.format_record(rec))
    return EXIT_OK


def cmd_eval(args):
    fields, head, embed_mlp = io.read_bundle(args.model)
    variant = pipeline.Variant(fields["name"], d=int(fields["d"]),
                               k=int(fields["k"]),
                               lambda_tv=float(fields["lambda_tv"]))
    table = None
    lat = None
    if variant.name != "mlp_baseline":
        if not args.lut:
            raise UsageError(f"variant {variant.name} needs --lut")
        table = io.read_lut(args.lut)
        lat = table.lattice
    model = pipeline.TrainedModel(variant, head, embed_mlp, table, lat)
    dataset = _load_dataset(args.dataset, args.seed, args.n_per_class,
                            args.n_points)
    report = pipeline.evaluate(model, dataset)
    print(io.format_record({
        "variant": variant.name, "n": report.n,
        "accuracy": report.accuracy,
        "per_class": ",".join(f"{v:.4f}" for v in report.per_class)}))
    return EXIT_OK


def cmd_bench(args):
    _log(f"building k={args.k} model and d={args.d} table")
    mlp = tinynet.fold_batchnorm(tinynet.embedding_mlp(args.k, seed=0))
    tbl = luti.bake(mlp, Lattice(args.d))
    if args.suite == "embedding":
        report = bench.bench_embedding(mlp, tbl, args.n, args.reps)
    else:
        report = bench.bench_jacobian(mlp, tbl, args.n, args.reps)
    for rec in report.records():
        print(io.format_record(rec))
    _log(report.table())
    return EXIT_OK


def cmd_dump_slice(args):
    tbl = io.read_lut(args.lut)
    channels = [int(c) for c in args.channels.split(",") if c != ""]
    if not channels:
        raise UsageError("--channels needs at least one id")
    bad = [c for c in channels if not 0 <= c < tbl.k]
    if bad:
        raise ValueError(f"channel ids {bad} out of range for k={tbl.k}")
    sys.stdout.write(pipeline.dump_slice(tbl, z_plane=args.z,
                                         channels=channels,
                                         resolution=args.res,
                                         mode=args.mode))
    return EXIT_OK


def cmd_mem_estimate(args):
    print(bench.memory_estimate(args.d, args.m, args.k, args.bytes).describe())
    return EXIT_OK


_DISPATCH = {
    "bake": cmd_bake,
    "embed": cmd_embed,
    "register": cmd_register,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "dump-slice": cmd_dump_slice,
    "mem-estimate": cmd_mem_estimate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _DISPATCH[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
