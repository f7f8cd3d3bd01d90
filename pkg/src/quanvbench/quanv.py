"""Quanvolutional layer: patch encoding, circuit execution, feature decoding.

Images are (H, W, C) float arrays, row-major.  A kernel_size x kernel_size
patch is flattened row-major and pixel i drives qubit i through an angle
encoding phi_i = pi * x_i applied as R_y(phi_i) to |0>.  After the filter
circuit runs, channel q of the output pixel is the exact expectation <Z_q>,
so feature maps take values in [-1, 1] and have kernel_size^2 channels.

Input gradients use the parameter-shift rule for R_y (exact, two circuit
evaluations per pixel); finite differences exist only as a test oracle.

Raw inputs live in [0, 1] and are range-checked by default.  Adversarially
perturbed images may leave that interval when attack clamping is disabled;
callers quanvolving such data pass ``validate=False`` (the encoding itself
is defined for any real value).

Feature maps can be cached on disk in the QNVF container: little-endian
header (magic "QNVF", version u32, count u32, H u32, W u32, C u32, metadata
hash u64) followed by the maps as row-major float32.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .qsim import Circuit, apply_circuit_batch, expect_z_batch

QNVF_MAGIC = b"QNVF"
QNVF_VERSION = 1
_QNVF_HEADER = struct.Struct("<4sIIIIIQ")


@dataclass(frozen=True)
class QuanvConfig:
    """Filter circuit plus patch geometry; kernel_size^2 must equal n_qubits.

    Feature channels are raw <Z> expectations in [-1, 1] by default;
    rescale_unit remaps them to [0, 1] for pipelines that want pixel-like
    feature ranges.
    """

    circuit: Circuit
    kernel_size: int = 2
    stride: int = 2
    rescale_unit: bool = False

    def __post_init__(self):
        if self.kernel_size < 1:
            raise ValueError(f"kernel_size must be >= 1, got {self.kernel_size}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.kernel_size**2 != self.circuit.n_qubits:
            raise ValueError(
                f"kernel_size^2 = {self.kernel_size**2} must equal circuit qubit "
                f"count {self.circuit.n_qubits}"
            )


def output_shape(height: int, width: int, cfg: QuanvConfig) -> tuple[int, int, int]:
    k, s = cfg.kernel_size, cfg.stride
    if height < k or width < k:
        raise ValueError(f"image {height}x{width} smaller than kernel {k}")
    return ((height - k) // s + 1, (width - k) // s + 1, k * k)


def _encode_angles(angles: np.ndarray) -> np.ndarray:
    """Product state from per-qubit R_y angles; angles shape (B, n) -> (B, 2^n)."""
    half = angles / 2.0
    qubit_states = np.stack([np.cos(half), np.sin(half)], axis=-1)  # (B, n, 2)
    amps = np.ones((angles.shape[0], 1), dtype=complex)
    for i in range(angles.shape[1]):
        amps = (amps[:, :, None] * qubit_states[:, i, None, :]).reshape(
            angles.shape[0], -1
        )
    return amps


def encode_patch(patch: np.ndarray, validate: bool = True):
    """Angle-encode one flattened patch: tensor product of R_y(pi*x_i)|0>."""
    from .qsim import StateVector

    patch = np.asarray(patch, dtype=float).reshape(-1)
    if validate and (np.any(patch < 0.0) or np.any(patch > 1.0)):
        raise ValueError("patch values must lie in [0, 1]")
    amps = _encode_angles(np.pi * patch[None, :])[0]
    return StateVector(len(patch), amps)


def _extract_patches(image: np.ndarray, cfg: QuanvConfig) -> np.ndarray:
    """(H, W, 1) image -> (rows, cols, k*k) row-major patch matrix."""
    k, s = cfg.kernel_size, cfg.stride
    plane = image[:, :, 0]
    windows = np.lib.stride_tricks.sliding_window_view(plane, (k, k))[::s, ::s]
    rows, cols = windows.shape[:2]
    return windows.reshape(rows, cols, k * k)


def _check_image(image: np.ndarray, validate: bool) -> np.ndarray:
    image = np.asarray(image, dtype=float)
    if image.ndim != 3 or image.shape[2] != 1:
        raise ValueError(f"expected single-channel (H, W, 1) image, got {image.shape}")
    if validate and (np.any(image < 0.0) or np.any(image > 1.0)):
        raise ValueError("image values must lie in [0, 1]")
    return image


def quanvolve_image(
    image: np.ndarray, cfg: QuanvConfig, validate: bool = True
) -> np.ndarray:
    """Feature map of shape ((H-k)//s+1, (W-k)//s+1, k^2) with <Z_q> channels."""
    image = _check_image(image, validate)
    rows, cols, n = output_shape(image.shape[0], image.shape[1], cfg)
    patches = _extract_patches(image, cfg).reshape(-1, n)
    amps = apply_circuit_batch(_encode_angles(np.pi * patches), cfg.circuit)
    features = np.stack(
        [expect_z_batch(amps, q, cfg.circuit.n_qubits) for q in range(n)], axis=-1
    )
    if cfg.rescale_unit:
        features = (features + 1.0) / 2.0
    return features.reshape(rows, cols, n)


def quanvolve_dataset(
    images: np.ndarray, cfg: QuanvConfig, validate: bool = True
) -> np.ndarray:
    """Quanvolve every image; order preserved."""
    out = [quanvolve_image(img, cfg, validate) for img in images]
    if not out:
        rows, cols, n = 0, 0, cfg.kernel_size**2
        return np.zeros((0, rows, cols, n))
    return np.stack(out)


def input_gradient(
    image: np.ndarray,
    cfg: QuanvConfig,
    upstream: np.ndarray,
    validate: bool = True,
) -> np.ndarray:
    """Exact d(sum(upstream * features))/d(pixel), via the parameter-shift rule.

    For pixel x in a patch, d<Z_q>/dx = pi * (<Z_q>(phi + pi/2) -
    <Z_q>(phi - pi/2)) / 2 with phi = pi * x.  Patch gradients are
    accumulated into their source pixels; pixels outside every patch get 0.
    """
    image = _check_image(image, validate)
    rows, cols, n = output_shape(image.shape[0], image.shape[1], cfg)
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != (rows, cols, n):
        raise ValueError(
            f"upstream shape {upstream.shape} does not match feature map "
            f"shape {(rows, cols, n)}"
        )

    patches = _extract_patches(image, cfg).reshape(-1, n)
    up_flat = upstream.reshape(-1, n)
    angles = np.pi * patches
    nq = cfg.circuit.n_qubits

    patch_grad = np.zeros_like(patches)
    for i in range(n):
        shifted = {}
        for sign in (1.0, -1.0):
            a = angles.copy()
            a[:, i] += sign * np.pi / 2.0
            amps = apply_circuit_batch(_encode_angles(a), cfg.circuit)
            shifted[sign] = np.stack(
                [expect_z_batch(amps, q, nq) for q in range(n)], axis=-1
            )
        dfeat_dpix = np.pi * (shifted[1.0] - shifted[-1.0]) / 2.0  # (P, n)
        if cfg.rescale_unit:
            dfeat_dpix *= 0.5
        patch_grad[:, i] = np.sum(up_flat * dfeat_dpix, axis=1)

    grad = np.zeros_like(image)
    k, s = cfg.kernel_size, cfg.stride
    pg = patch_grad.reshape(rows, cols, k, k)
    for r in range(rows):
        for c in range(cols):
            grad[r * s : r * s + k, c * s : c * s + k, 0] += pg[r, c]
    return grad


def write_qnvf(path, maps: np.ndarray, meta_hash: int = 0) -> None:
    """Serialize feature maps (N, H, W, C) as a QNVF container."""
    maps = np.asarray(maps)
    if maps.ndim != 4:
        raise ValueError(f"expected (N, H, W, C) maps, got shape {maps.shape}")
    count, height, width, channels = maps.shape
    header = _QNVF_HEADER.pack(
        QNVF_MAGIC, QNVF_VERSION, count, height, width, channels, meta_hash
    )
    data = np.ascontiguousarray(maps, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_qnvf(path) -> tuple[np.ndarray, int]:
    """Read a QNVF container; returns (float32 maps, metadata hash)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _QNVF_HEADER.size:
        raise ValueError(f"{path}: truncated QNVF header")
    magic, version, count, height, width, channels, meta = _QNVF_HEADER.unpack_from(raw)
    if magic != QNVF_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != QNVF_VERSION:
        raise ValueError(f"{path}: unsupported QNVF version {version}")
    expected = count * height * width * channels * 4
    body = raw[_QNVF_HEADER.size :]
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, got {len(body)}")
    maps = np.frombuffer(body, dtype="<f4").reshape(count, height, width, channels)
    return maps.copy(), meta
