"""Timing harness for embedding/Jacobian kernels and the memory model.

Timings are medians over >= 30 reps with warm-up excluded, run
single-threaded (BLAS pools pinned via threadpoolctl) so the MLP/table
comparison measures arithmetic, not parallelism.  Ratios, not absolute
latencies, are the contract: this is CPU wall time on whatever machine
runs it.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import jacobian, luti, tinynet

INT64_MAX = 2 ** 63 - 1


def thread_budget():
    """Threads allowed for benchmarks (env LUTI_THREADS, default 1)."""
    return max(1, int(os.environ.get("LUTI_THREADS", "1")))


@dataclass
class KernelTiming:
    name: str
    reps: int
    median_ns: int
    p10_ns: int
    p90_ns: int
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.reps < 30:
            raise ValueError(f"need >= 30 reps, got {self.reps}")
        if not self.p10_ns <= self.median_ns <= self.p90_ns:
            raise ValueError("median outside [p10, p90]")


@dataclass
class BenchReport:
    name: str
    kernels: list[KernelTiming]

    def median_ns(self, kernel_name):
        for k in self.kernels:
            if k.name == kernel_name:
                return k.median_ns
        raise KeyError(kernel_name)

    def records(self):
        out = []
        for k in self.kernels:
            rec = {"bench": self.name, "kernel": k.name, "reps": k.reps,
                   "median_ns": k.median_ns, "p10_ns": k.p10_ns,
                   "p90_ns": k.p90_ns}
            rec.update(k.config)
            out.append(rec)
        return out

    def table(self):
        lines = [f"# {self.name} (median of reps, warm-up excluded)",
                 f"{'kernel':<14} {'median_us':>12} {'p10_us':>12} "
                 f"{'p90_us':>12} {'reps':>6}  config"]
        for k in self.kernels:
            cfg = " ".join(f"{key}={val}" for key, val in k.config.items())
            lines.append(f"{k.name:<14} {k.median_ns / 1e3:>12.1f} "
                         f"{k.p10_ns / 1e3:>12.1f} {k.p90_ns / 1e3:>12.1f} "
                         f"{k.reps:>6}  {cfg}")
        return "\n".join(lines) + "\n"


def _time_kernel(fn, reps, warmup=3):
    for _ in range(warmup):
        fn()
    samples = np.empty(reps)
    for i in range(reps):
        t0 = time.perf_counter_ns()
        fn()
        samples[i] = time.perf_counter_ns() - t0
    return (int(np.median(samples)), int(np.percentile(samples, 10)),
            int(np.percentile(samples, 90)))


def _folded(mlp):
    if any(layer.bn is not None for layer in mlp.layers):
        raise ValueError("fold batch norm before benchmarking the MLP path")
    return mlp


def bench_embedding(mlp, tbl, n_points=1024, reps=30, seed=0):
    """Full-cloud embedding medians for {mlp, luti_uni, luti_irr}.

    All kernels see the identical cloud; the table paths write into a
    preallocated buffer.
    """
    _folded(mlp)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(n_points, 3))
    out = np.empty((n_points, tbl.k))
    threads = thread_budget()
    base_cfg = {"d": tbl.lattice.d, "k": tbl.k, "n": n_points,
                "threads": threads}
    kernels = []
    with threadpool_limits(limits=threads):
        for name, fn, mode in (
                ("mlp", lambda: tinynet.mlp_forward(mlp, pts), "eval"),
                ("luti_uni", lambda: luti.embed_batch(tbl, pts, "uniform", out),
                 "uniform"),
                ("luti_irr", lambda: luti.embed_batch(tbl, pts, "irregular", out),
                 "irregular")):
            med, p10, p90 = _time_kernel(fn, reps)
            kernels.append(KernelTiming(name, reps, med, p10, p90,
                                        dict(base_cfg, mode=mode)))
    return BenchReport("embedding", kernels)


def bench_jacobian(mlp, tbl, n_points=1024, reps=30, seed=0, fdm_step=1e-2,
                   mode="irregular"):
    """Global-feature Jacobian medians for the four kernel flavors."""
    _folded(mlp)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(n_points, 3))
    threads = thread_budget()
    cfg = {"d": tbl.lattice.d, "k": tbl.k, "n": n_points, "mode": mode,
           "threads": threads}

    def mlp_embed(p):
        return tinynet.mlp_forward(mlp, p)

    def tbl_pool(p):
        return luti.embed_max(tbl, p, mode)

    jobs = (
        ("fdm_mlp", lambda: jacobian.dglobal_dxi_fdm(mlp_embed, pts, fdm_step)),
        ("fdm_luti", lambda: jacobian.dglobal_dxi_fdm(tbl_pool, pts, fdm_step)),
        ("analyt_mlp", lambda: jacobian.mlp_analytic_jacobian(mlp, pts)),
        ("analyt_luti", lambda: jacobian.dglobal_dxi_analytic(tbl, pts, mode)),
    )
    kernels = []
    with threadpool_limits(limits=threads):
        for name, fn in jobs:
            med, p10, p90 = _time_kernel(fn, reps,
                                         warmup=1 if name == "analyt_mlp" else 3)
            kernels.append(KernelTiming(name, reps, med, p10, p90, dict(cfg)))
    return BenchReport("jacobian", kernels)


@dataclass(frozen=True)
class MemoryEstimate:
    total_bytes: int   # exact (python int, never clamped)
    saturated: bool    # true when the count does not fit in int64

    @property
    def mb(self):
        """Mebibytes; the table-footprint figures use MB = 2^20 bytes."""
        return self.total_bytes / float(1 << 20)

    def describe(self):
        return f"{self.total_bytes} bytes ({format_mb(self.total_bytes)} MB)" \
            + (" [saturated]" if self.saturated else "")


def format_mb(n_bytes):
    value = n_bytes / float(1 << 20)
    if value >= 1000 or (value < 0.01 and value > 0):
        return f"{value:.3g}"
    return f"{value:.6g}"


def memory_estimate(d, m, k, bytes_per_param):
    """Exact table footprint D^M * K * bytes.

    The count is kept exact even past int64 range; ``saturated`` warns
    consumers that would pack it into a fixed-width integer.
    """
    for name, val in (("D", d), ("M", m), ("K", k),
                      ("bytes_per_param", bytes_per_param)):
        if val < 1:
            raise ValueError(f"{name} must be >= 1, got {val}")
    total = (d ** m) * k * bytes_per_param
    return MemoryEstimate(int(total), total > INT64_MAX)
