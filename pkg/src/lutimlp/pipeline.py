"""Classification pipeline: max aggregation, variants, training, eval.

Variants wire the same classifier head to different embedding paths:

    mlp_baseline   plain MLP embedding (no lattice)
    luti_uni_e2e   train through trilinear interpolation
    luti_irr_e2e   train through the min-reversed interpolation
    lut_e2e        train through nearest-node lookup
    lut_approx     bake a frozen baseline, nearest lookup, no training
    luti_approx    bake a frozen baseline, trilinear lookup, no training
    lut_direct     train the table itself, nearest lookup, TV-regularized
    luti_direct    train the table itself, trilinear, TV-regularized

E2E variants are baked after training; by the interpolation exactness
contract the baked table reproduces the training-time embedding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import luti, tinynet
from .lattice import Lattice
from .luti import BasisTable, DirectTable

E2E_MODES = {"luti_uni_e2e": "uniform", "luti_irr_e2e": "irregular",
             "lut_e2e": "nearest"}
APPROX_MODES = {"lut_approx": "nearest", "luti_approx": "uniform"}
DIRECT_MODES = {"lut_direct": "nearest", "luti_direct": "uniform"}
VARIANT_NAMES = ("mlp_baseline",) + tuple(E2E_MODES) + tuple(APPROX_MODES) \
    + tuple(DIRECT_MODES)


@dataclass(frozen=True)
class Variant:
    name: str
    d: int = 4
    k: int = 256
    lambda_tv: float = 1.0      # consumed by direct variants only

    def __post_init__(self):
        if self.name not in VARIANT_NAMES:
            raise ValueError(f"unknown variant {self.name!r}")
        if self.name != "mlp_baseline" and self.d < 2:
            raise ValueError(f"lattice variants need d >= 2, got {self.d}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    @property
    def embed_mode(self):
        for table in (E2E_MODES, APPROX_MODES, DIRECT_MODES):
            if self.name in table:
                return table[self.name]
        return None


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 32
    lr: float = 1e-3
    lr_decay: float = 0.5
    lr_decay_every: int = 20
    seed: int = 0
    pretrain_frac: float = 0.0   # fraction of epochs as plain MLP first
    tv_p: int = 2


@dataclass(frozen=True)
class GlobalFeature:
    a: np.ndarray            # (k,)
    argmax_ids: np.ndarray   # (k,) point index per channel


def aggregate_max(embeddings):
    """Channel-wise max over points; ties pick the lowest point index."""
    z = np.asarray(embeddings, dtype=float)
    if z.ndim != 2 or z.shape[0] < 1:
        raise ValueError(f"need a non-empty (N, K) array, got {z.shape}")
    ids = np.argmax(z, axis=0)
    return GlobalFeature(z[ids, np.arange(z.shape[1])], ids)


def aggregate_max_batch(z):
    """(B, N, K) -> (a (B, K), ids (B, K))."""
    ids = np.argmax(z, axis=1)
    a = np.take_along_axis(z, ids[:, None, :], axis=1)[:, 0, :]
    return a, ids


def active_point_count(embeddings):
    """Number of distinct points that win at least one channel."""
    return int(np.unique(aggregate_max(embeddings).argmax_ids).size)


@dataclass
class TrainedModel:
    variant: Variant
    head: tinynet.MlpParams
    embed_mlp: tinynet.MlpParams | None
    table: BasisTable | DirectTable | None
    lattice: Lattice | None
    history: list = field(default_factory=list)

    def embed_points(self, pts, via_mlp=False):
        """Eval-mode embedding of an (N, 3) array.

        via_mlp runs e2e models through train_forward on the MLP
        instead of the baked table (they agree by the exactness
        contract; the flag exists so that can be tested).
        """
        if self.variant.name == "mlp_baseline":
            return tinynet.mlp_forward(self.embed_mlp, pts, mode="eval")
        if via_mlp:
            if self.embed_mlp is None:
                raise ValueError("no MLP behind this variant")
            z, _ = luti.train_forward(self.embed_mlp, self.lattice, pts,
                                      mode=self.variant.embed_mode,
                                      bn_mode="eval")
            return z
        return luti.embed_batch(self.table, pts, mode=self.variant.embed_mode)

    def classify(self, pts, via_mlp=False):
        feat = aggregate_max(self.embed_points(pts, via_mlp=via_mlp))
        logits = tinynet.mlp_forward(self.head, feat.a[None, :], mode="eval")
        return int(np.argmax(logits[0]))


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy and its gradient wrt the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    n = logits.shape[0]
    loss = -float(log_p[np.arange(n), labels].mean())
    grad = np.exp(log_p)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def _stack_dataset(dataset):
    if not dataset:
        raise ValueError("empty dataset")
    sizes = {c.n for c in dataset}
    if len(sizes) != 1:
        raise ValueError("training needs equal-size clouds")
    x = np.stack([c.points for c in dataset])
    labels = [c.label for c in dataset]
    if any(lbl is None or lbl < 0 for lbl in labels):
        raise ValueError("training needs labeled clouds")
    return x, np.array(labels, dtype=np.int64)


def train(variant, dataset, cfg=None, pretrained=None):
    """Train one variant; deterministic for a fixed cfg.seed.

    Approx variants do no training at all: they bake ``pretrained``
    (an mlp_baseline TrainedModel, trained here when not supplied) and
    reuse its head.
    """
    cfg = cfg or TrainConfig()
    x, y = _stack_dataset(dataset)
    n_classes = int(y.max()) + 1
    name = variant.name

    if name in APPROX_MODES:
        if pretrained is None:
            base = Variant("mlp_baseline", k=variant.k)
            pretrained = train(base, dataset, cfg)
        lat = Lattice(variant.d)
        table = luti.bake(pretrained.embed_mlp, lat)
        return TrainedModel(variant, pretrained.head, pretrained.embed_mlp,
                            table, lat, history=[])

    lat = Lattice(variant.d) if name != "mlp_baseline" else None
    head = tinynet.classifier_head(variant.k, n_classes, seed=cfg.seed + 1)
    embed_mlp = None
    table = None
    if name in DIRECT_MODES:
        init_rng = np.random.default_rng([cfg.seed, 4])
        table = DirectTable(lat, init_rng.normal(0.0, 0.1,
                                                 (lat.n_nodes, variant.k)))
        params = [table.data] + tinynet.param_arrays(head)
    else:
        embed_mlp = tinynet.embedding_mlp(variant.k, seed=cfg.seed)
        params = tinynet.param_arrays(embed_mlp) + tinynet.param_arrays(head)

    adam = tinynet.Adam(params, lr=cfg.lr)
    shuffle_rng = np.random.default_rng([cfg.seed, 2])
    dropout_rng = np.random.default_rng([cfg.seed, 3])
    pretrain_epochs = int(round(cfg.pretrain_frac * cfg.epochs)) \
        if name in E2E_MODES else 0

    n, n_pts = x.shape[0], x.shape[1]
    history = []
    for epoch in range(cfg.epochs):
        adam.lr = cfg.lr * (cfg.lr_decay ** (epoch // cfg.lr_decay_every))
        order = shuffle_rng.permutation(n)
        as_mlp = epoch < pretrain_epochs
        loss_sum = 0.0
        hit = 0
        seen = 0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            if idx.size < 2:        # batch-norm needs at least two rows
                continue
            xb = x[idx].reshape(-1, 3)
            yb = y[idx]
            b = idx.size

            if name == "mlp_baseline" or as_mlp:
                z_flat, cache = tinynet.mlp_forward(embed_mlp, xb, mode="train",
                                                    rng=dropout_rng,
                                                    want_cache=True)
            elif name in E2E_MODES:
                z_flat, cache = luti.train_forward(embed_mlp, lat, xb,
                                                   mode=variant.embed_mode,
                                                   bn_mode="train",
                                                   rng=dropout_rng)
            else:
                z_flat, cache = luti.direct_forward(table, xb,
                                                    mode=variant.embed_mode)
            z = z_flat.reshape(b, n_pts, -1)
            a, ids = aggregate_max_batch(z)
            logits, head_cache = tinynet.mlp_forward(head, a, mode="train",
                                                     rng=dropout_rng,
                                                     want_cache=True)
            loss, d_logits = cross_entropy(logits, yb)
            head_grads = tinynet.mlp_backward(head, head_cache, d_logits)
            d_z = np.zeros_like(z)
            np.put_along_axis(d_z, ids[:, None, :],
                              head_grads.d_input[:, None, :], axis=1)
            d_z_flat = d_z.reshape(-1, z.shape[2])

            if name == "mlp_baseline" or as_mlp:
                embed_grads = tinynet.mlp_backward(embed_mlp, cache, d_z_flat)
                grads = tinynet.grad_arrays(embed_grads) \
                    + tinynet.grad_arrays(head_grads)
            elif name in E2E_MODES:
                embed_grads = luti.train_backward(cache, d_z_flat)
                grads = tinynet.grad_arrays(embed_grads) \
                    + tinynet.grad_arrays(head_grads)
            else:
                d_table = luti.direct_backward(cache, d_z_flat)
                tv_val, tv_grad = luti.tv_regularizer(table, cfg.tv_p)
                d_table += variant.lambda_tv * tv_grad
                loss += variant.lambda_tv * tv_val
                grads = [d_table] + tinynet.grad_arrays(head_grads)
            adam.step(grads)

            loss_sum += loss * b
            hit += int((np.argmax(logits, axis=1) == yb).sum())
            seen += b
        history.append({"epoch": epoch, "lr": adam.lr,
                        "loss": loss_sum / max(seen, 1),
                        "train_acc": hit / max(seen, 1)})

    if name in E2E_MODES:
        table = luti.bake(embed_mlp, lat)
    return TrainedModel(variant, head, embed_mlp, table, lat, history)


@dataclass
class EvalReport:
    accuracy: float
    per_class: np.ndarray    # (C,) recall per class
    confusion: np.ndarray    # (C, C), rows true, cols predicted
    n: int


def evaluate(model, dataset, n_classes=None, chunk=64, via_mlp=False):
    """Deterministic accuracy + per-class breakdown over labeled clouds."""
    if not dataset:
        raise ValueError("empty dataset")
    y = np.array([c.label for c in dataset], dtype=np.int64)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    preds = np.empty(len(dataset), dtype=np.int64)
    pos = 0
    while pos < len(dataset):
        group = [dataset[pos]]
        while (len(group) < chunk and pos + len(group) < len(dataset)
               and dataset[pos + len(group)].n == group[0].n):
            group.append(dataset[pos + len(group)])
        b, n_pts = len(group), group[0].n
        flat = np.concatenate([c.points for c in group])
        z = model.embed_points(flat, via_mlp=via_mlp).reshape(b, n_pts, -1)
        a, _ = aggregate_max_batch(z)
        logits = tinynet.mlp_forward(model.head, a, mode="eval")
        preds[pos:pos + b] = np.argmax(logits, axis=1)
        pos += b
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (y, preds), 1)
    totals = confusion.sum(axis=1)
    per_class = np.divide(np.diag(confusion), totals,
                          out=np.zeros(n_classes), where=totals > 0)
    return EvalReport(float(np.trace(confusion)) / len(dataset), per_class,
                      confusion, len(dataset))


def dump_slice(source, z_plane=0.0, channels=(0,), resolution=33,
               mode="uniform", lo=-1.0, hi=1.0):
    """Sample channels on the z = z_plane plane as tabular text.

    source is a table (bounds come from its lattice) or an MlpParams
    (bounds come from lo/hi).  Rows are ``x y value...`` with full
    float precision; the first line names the columns.
    """
    if hasattr(source, "lattice"):
        lox, loy = source.lattice.lo[0], source.lattice.lo[1]
        hix, hiy = source.lattice.hi[0], source.lattice.hi[1]
    else:
        lox = loy = lo
        hix = hiy = hi
    xs = np.linspace(lox, hix, resolution)
    ys = np.linspace(loy, hiy, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(),
                    np.full(gx.size, float(z_plane))], axis=1)
    if hasattr(source, "lattice"):
        vals = luti.embed_batch(source, pts, mode=mode)
    else:
        vals = tinynet.mlp_forward(source, pts, mode="eval")
    channels = list(channels)
    lines = ["x y " + " ".join(f"ch{c}" for c in channels)]
    for row, p in enumerate(pts):
        cells = " ".join(repr(float(vals[row, c])) for c in channels)
        lines.append(f"{float(p[0])!r} {float(p[1])!r} {cells}")
    return "\n".join(lines) + "\n"
