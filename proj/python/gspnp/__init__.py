"""Gradient-step and proximal plug-and-play image restoration.

Images are float64 arrays of shape (H, W, C) with values in [0, 1].
"""

from ._gspnp import (
    ConfigError,
    Denoiser,
    DimensionError,
    Error,
    Fidelity,
    InvalidArgument,
    IoError,
    NumericalFailure,
    Params,
    UnsupportedOperation,
    add_noise,
    gaussian_kernel,
    kernel,
    psnr,
    random_mask,
    read_image,
    restore,
    run,
    write_image,
)

__all__ = [
    "ConfigError",
    "Denoiser",
    "DimensionError",
    "Error",
    "Fidelity",
    "InvalidArgument",
    "IoError",
    "NumericalFailure",
    "Params",
    "UnsupportedOperation",
    "add_noise",
    "gaussian_kernel",
    "kernel",
    "psnr",
    "random_mask",
    "read_image",
    "restore",
    "run",
    "write_image",
]
