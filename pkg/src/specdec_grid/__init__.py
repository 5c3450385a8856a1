"""Speculative decoding over 2D token grids, with an exact enumeration oracle."""

from .acceptance import (
    AcceptanceRule, NeighborhoodMass, Variant, build_bounded_neighborhood, exact_accept_prob,
    pooled_ratio_accept_prob, relaxed_distribution, residual_distribution, threshold_accept,
)
from .core import (
    Categorical, Codebook, ContractError, GridShape, RandomSource, TokenGrid, coord_to_raster,
    nearest_neighbors, raster_to_coord, sample, tvd,
)
from .engine import (
    ConfigError, DecodeConfig, DecodeTrace, Decoder, Models, decode_baseline, decode_lantern,
    decode_mulosd, decode_specdec, run_decoder,
)
from .locality import RejectionMode, expand_rejections, neighborhood
from .metrics import CostModel, RunSummary, consistency_check, summarize, theoretical_speedup
from .models import (
    Conditioning, ToyBlockSampler, ToyMarkovModel, build_block_sampler, build_toy_model,
    derive_drafter, down_sample, up_sample,
)

__version__ = "0.1.0"
