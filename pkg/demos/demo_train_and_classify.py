"""Train a table-embedding classifier on synthetic shapes, end to end.

The embedding MLP only ever sees lattice nodes during training, so its
weights and the table are two views of the same function. After training
we evaluate the baked table on held-out clouds and print the confusion
matrix, then dump a z-slice of one channel to show what the learned
feature field looks like.

Run:  python demos/demo_train_and_classify.py
"""
import numpy as np

from lutimlp import data, pipeline


def main():
    rng_seed = 7
    clouds = data.synth_shapes(seed=rng_seed, n_per_class=40, n_points=256)
    per_class = 40
    train_set, test_set = [], []
    for ci in range(len(data.CLASS_NAMES)):
        block = clouds[ci * per_class:(ci + 1) * per_class]
        train_set += block[:32]
        test_set += block[32:]
    print(f"dataset: {len(train_set)} train / {len(test_set)} test clouds, "
          f"{len(data.CLASS_NAMES)} classes")

    variant = pipeline.Variant("luti_irr_e2e", d=4, k=64)
    cfg = pipeline.TrainConfig(epochs=30, batch_size=16, seed=rng_seed)
    print(f"training {variant.name} (d={variant.d}, k={variant.k}) "
          f"for {cfg.epochs} epochs ...")
    model = pipeline.train(variant, train_set, cfg)
    print(f"  final epoch loss {model.history[-1]['loss']:.4f}, "
          f"train acc {model.history[-1]['acc']:.3f}")

    report = pipeline.evaluate(model, test_set)
    print(f"\ntest accuracy: {report.accuracy:.3f}  ({report.n} clouds)")
    print("per-class accuracy:")
    for name, acc in zip(data.CLASS_NAMES, report.per_class):
        print(f"  {name:10s} {acc:.3f}")
    print("confusion matrix (rows = truth):")
    print(report.confusion)

    # a coarse look at channel 0 of the learned field on the z=0 plane
    lines = pipeline.dump_slice(model.table, z_plane=0.0, channels=(0,),
                                resolution=9, mode="irregular")
    print("\nchannel 0 on the z=0 plane (9x9 grid, sign pattern):")
    vals = np.array([[float(t) for t in ln.split()] for ln in lines])
    grid = vals[:, 2].reshape(9, 9)
    for row in np.sign(grid).astype(int):
        print("  " + "".join("+" if v > 0 else "-" if v < 0 else "0"
                             for v in row))


if __name__ == "__main__":
    main()
