"""Spatio-temporal fusion toolkit (Python bindings)."""

from ._xfuse import (
    IoError,
    ValidationError,
    aad,
    add_poisson,
    bayes_reconstruct,
    bin_spatial,
    calibrate_b0,
    condition_mid,
    gen_phantom,
    mse,
    nearest_rank_percentile,
    normalize_attention,
    normalize_sequence,
    psnr,
    read_sequence,
    run_grid,
    ssim,
    upsample_bicubic,
    write_sequence,
)

__all__ = [
    "IoError",
    "ValidationError",
    "aad",
    "add_poisson",
    "bayes_reconstruct",
    "bin_spatial",
    "calibrate_b0",
    "condition_mid",
    "gen_phantom",
    "mse",
    "nearest_rank_percentile",
    "normalize_attention",
    "normalize_sequence",
    "psnr",
    "read_sequence",
    "run_grid",
    "ssim",
    "upsample_bicubic",
    "write_sequence",
]
