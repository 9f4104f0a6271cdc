"""Latency and memory of table lookups versus running the MLP.

Embedding a point through the table is a locate + gather + blend of 8
rows, independent of the MLP depth that produced it. This script times
the three embedding kernels and the four pose-Jacobian kernels on the
same inputs, then prints the memory model that says when a table stops
being cheap.

Run:  python demos/demo_benchmarks.py
"""
from lutimlp import bench, lattice, luti, tinynet


def main():
    k = 512
    mlp = tinynet.init_mlp((3, 64, 64, k), seed=0)
    mlp = tinynet.fold_batchnorm(mlp)
    lat = lattice.Lattice(d=4, lo=-1.0, hi=1.0)
    tbl = luti.bake(mlp, lat)

    print(f"embedding 4096 points, K={k}, d=4 (30 reps, median):")
    rep = bench.bench_embedding(mlp, tbl, n_points=4096, reps=30, seed=1)
    base = rep.median_ns("mlp")
    for name in ("mlp", "luti_uni", "luti_irr"):
        ns = rep.median_ns(name)
        print(f"  {name:9s} {ns / 1e6:9.3f} ms   ({base / ns:6.1f}x vs mlp)")

    print(f"\npose Jacobian, 1024 points (30 reps, median):")
    rep = bench.bench_jacobian(mlp, tbl, n_points=1024, reps=30, seed=2)
    slow = rep.median_ns("fdm_mlp")
    for name in ("fdm_mlp", "fdm_luti", "analyt_mlp", "analyt_luti"):
        ns = rep.median_ns(name)
        print(f"  {name:11s} {ns / 1e6:9.3f} ms   "
              f"({slow / ns:6.1f}x vs fdm_mlp)")

    print("\ntable memory is K * d^3 * bytes, so resolution is the knob "
          "that bites:")
    for d in (2, 4, 8, 16, 64, 1024):
        est = bench.memory_estimate(d=d, m=3, k=k, bytes_per_param=4)
        print(f"  d={d:5d}: {est.describe()}")
    print("a d=2 table of K=512 float32 channels costs 16 KB and already "
          "carries\nthe full end-to-end accuracy in the shape experiments.")


if __name__ == "__main__":
    main()
