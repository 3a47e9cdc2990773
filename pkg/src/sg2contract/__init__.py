"""Small-gain certificates for 2-contraction of interconnected systems."""
from .compound import additive_compound_2, build_L, build_M, build_Q, kron_sum, skew_vec, vec
from .decomposition import BlockPartition, PartitionedMatrix, assemble_block_generator
from .gains import GainTable, InterconnectionModel, compute_gain_table
from .odesim import classify, empirical_l2_gain, integrate
from .sdp import minimize_gain
from .smallgain import CertificationReport, certify_model, spectral_radius

__all__ = [
    "BlockPartition",
    "CertificationReport",
    "GainTable",
    "InterconnectionModel",
    "PartitionedMatrix",
    "additive_compound_2",
    "assemble_block_generator",
    "build_L",
    "build_M",
    "build_Q",
    "certify_model",
    "classify",
    "compute_gain_table",
    "empirical_l2_gain",
    "integrate",
    "kron_sum",
    "minimize_gain",
    "skew_vec",
    "spectral_radius",
    "vec",
]
