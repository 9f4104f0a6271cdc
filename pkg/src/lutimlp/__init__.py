"""Tabulated point-feature embeddings.

A small MLP maps 3-D points to a K-channel feature; evaluating it on
the nodes of a coarse lattice and interpolating reproduces the network
exactly on the lattice (and is an order of magnitude faster per cloud).
The package covers training through the interpolation, the irregular
min-reversal variant that frees per-channel maxima from lattice nodes,
analytic Jacobians for pose registration, a classification pipeline,
and serialization plus a CLI around all of it.
"""

from . import bench, cli, data, geom3, io, jacobian, lattice, luti, pipeline, \
    registration, tinynet
from .bench import BenchReport, bench_embedding, bench_jacobian, memory_estimate
from .data import PointCloud, load_off, load_xyz, normalize_unit_sphere, \
    sample_n, synth_shapes
from .geom3 import RigidTransform, se3_exp, transform_points
from .jacobian import dglobal_dxi_analytic, dglobal_dxi_fdm, dphi_dp_irregular, \
    dphi_dp_uniform, mlp_analytic_jacobian
from .lattice import Lattice
from .luti import BasisTable, DirectTable, bake, channel_reverse, embed_batch, \
    embed_max, train_backward, train_forward, tv_regularizer
from .pipeline import TrainConfig, TrainedModel, Variant, aggregate_max, \
    active_point_count, dump_slice, evaluate, train
from .registration import RegistrationConfig, RegistrationResult, register, \
    run_trials
from .tinynet import MlpParams, classifier_head, embedding_mlp, fold_batchnorm, \
    init_mlp, mlp_backward, mlp_forward

__version__ = "0.1.0"
