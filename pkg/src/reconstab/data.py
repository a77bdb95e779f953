"""Synthetic two-block datasets, sample masking, noise-frame images, file I/O.

Samples are rows z = [x, y]: x carries the label information, y is noise the
attacker knows. Both blocks are drawn uniformly on their spheres (Gaussian
rescaled to exact radius), which satisfies the normalized-norm, centered, and
concentration requirements exactly rather than approximately.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, DimensionOverflow, TruncatedFile, ZeroBlock

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
MATRIX_MAGIC = b"GLMA"

_ROLE_X = 0
_ROLE_Y = 1


@dataclass(eq=False)
class LabeledDataset:
    """Training rows with labels and the x/y block split.

    g is a vector of +-1 labels (sign readout) or an N x c one-hot matrix
    (argmax readout).
    """

    z: np.ndarray
    g: np.ndarray
    d_x: int
    d_y: int

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def d(self) -> int:
        return self.d_x + self.d_y

    @property
    def alpha(self) -> float:
        return self.d_y / self.d

    @property
    def label_mode(self) -> str:
        return "argmax" if self.g.ndim == 2 else "sign"

    def x_block(self) -> np.ndarray:
        return self.z[:, : self.d_x]

    def y_block(self) -> np.ndarray:
        return self.z[:, self.d_x :]

    def drop_row(self, i: int) -> "LabeledDataset":
        keep = np.arange(self.n) != i
        return LabeledDataset(z=self.z[keep], g=self.g[keep], d_x=self.d_x, d_y=self.d_y)


@dataclass(frozen=True)
class TeacherVector:
    """Unit vector defining the labeling rule g(x) = sign(u . x)."""

    u: np.ndarray
    seed: int

    def label(self, x: np.ndarray) -> float:
        return 1.0 if float(self.u @ x) >= 0.0 else -1.0

    def labels(self, x_rows: np.ndarray) -> np.ndarray:
        vals = np.atleast_2d(x_rows) @ self.u
        return np.where(vals >= 0.0, 1.0, -1.0)


@dataclass(frozen=True)
class MaskStrategy:
    """How the informative x-block is removed from a query.

    "resample" replaces x with a fresh draw from the same sphere; "zero"
    writes zeros. The y-block is always preserved bit-exactly.
    """

    kind: str
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("resample", "zero"):
            raise ValueError(f"unknown mask kind {self.kind!r}")


def sample_teacher(d_x: int, seed: int) -> TeacherVector:
    rng = np.random.default_rng([seed, 0x7EAC])
    u = rng.standard_normal(d_x)
    return TeacherVector(u=u / np.linalg.norm(u), seed=seed)


def _sphere_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """n rows uniform on the sphere of radius sqrt(dim)."""
    rows = rng.standard_normal((n, dim))
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    # resample the measure-zero all-zero rows rather than dividing by 0
    while np.any(norms == 0.0):
        bad = norms[:, 0] == 0.0
        rows[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / norms * np.sqrt(dim)


def generate_synthetic(
    n: int,
    d_x: int,
    d_y: int,
    teacher: TeacherVector,
    seed: int,
    y_seed: int | None = None,
) -> LabeledDataset:
    """Draw n rows [x_i, y_i] with exact block norms and labels sign(u . x_i).

    x and y come from independent substreams; passing a different y_seed
    regenerates the noise blocks without touching x or the labels.
    """
    if n < 1 or d_x < 1 or d_y < 1:
        raise ValueError("n, d_x, d_y must be >= 1")
    rng_x = np.random.default_rng([seed, _ROLE_X])
    rng_y = np.random.default_rng([seed if y_seed is None else y_seed, _ROLE_Y])
    x = _sphere_rows(rng_x, n, d_x)
    y = _sphere_rows(rng_y, n, d_y)
    return LabeledDataset(z=np.hstack([x, y]), g=teacher.labels(x), d_x=d_x, d_y=d_y)


def mask_sample(z: np.ndarray, d_x: int, strategy: MaskStrategy, index: int = 0) -> np.ndarray:
    """Masked copy of one row: y-block kept bit-exactly, x-block replaced.

    index salts the resampling stream so distinct rows of a batch get
    independent fresh x draws while staying reproducible.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < d_x:
        raise ValueError("z must be a row of length >= d_x")
    out = z.copy()
    if strategy.kind == "zero":
        out[:d_x] = 0.0
    else:
        rng = np.random.default_rng([strategy.seed, index])
        out[:d_x] = _sphere_rows(rng, 1, d_x)[0]
    return out


def add_noise_frame(
    image: np.ndarray, frame_width: int, seed: int
) -> tuple[np.ndarray, int, int]:
    """Surround an H x W x C image with a frame of uniform noise pixels.

    Returns (z, d_x, d_y) with z laid out block-wise: the original pixels
    (x-block, bit-exact) followed by the frame pixels (y-block), so masking
    the first d_x entries blanks exactly the picture content.
    """
    if frame_width < 1:
        raise ValueError("frame_width must be >= 1")
    image = np.asarray(image, dtype=float)
    if image.ndim == 2:
        image = image[:, :, None]
    h, w, c = image.shape
    d_x = h * w * c
    hp, wp = h + 2 * frame_width, w + 2 * frame_width
    d_y = hp * wp * c - d_x
    rng = np.random.default_rng([seed, 0xF7A3])
    padded = rng.uniform(0.0, 1.0, size=(hp, wp, c))
    interior = np.zeros((hp, wp), dtype=bool)
    interior[frame_width : frame_width + h, frame_width : frame_width + w] = True
    frame_vals = padded[~interior].ravel()
    return np.concatenate([image.ravel(), frame_vals]), d_x, d_y


def normalize_split(z: np.ndarray, d_x: int) -> np.ndarray:
    """Rescale the two blocks to their exact sphere radii sqrt(d_x), sqrt(d_y)."""
    z = np.asarray(z, dtype=float)
    d_y = z.size - d_x
    x, y = z[:d_x], z[d_x:]
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx < 1e-12 or ny < 1e-12:
        raise ZeroBlock("cannot normalize a block with near-zero norm")
    return np.concatenate([x * (np.sqrt(d_x) / nx), y * (np.sqrt(d_y) / ny)])


def frame_dataset(
    images: np.ndarray,
    labels: np.ndarray,
    frame_width: int,
    seed: int,
    n_classes: int | None = None,
) -> LabeledDataset:
    """Noise-framed image dataset: center blocks by the set-wide block means,
    normalize each block per row, and one-hot encode the labels.

    Real images satisfy the normalization assumptions only approximately; the
    residual pre-normalization spread is recorded on the result as
    normalization_residual instead of rejecting the data.
    """
    rows = []
    d_x = d_y = 0
    for i, img in enumerate(images):
        z, d_x, d_y = add_noise_frame(img, frame_width, seed=seed + i)
        rows.append(z)
    z_all = np.asarray(rows)
    z_all -= z_all.mean(axis=0, keepdims=True)
    pre_norms = np.linalg.norm(z_all[:, :d_x], axis=1)
    residual = float(np.std(pre_norms) / max(np.mean(pre_norms), 1e-12))
    z_all = np.asarray([normalize_split(z, d_x) for z in z_all])
    labels = np.asarray(labels, dtype=int)
    c = int(n_classes if n_classes is not None else labels.max() + 1)
    onehot = np.zeros((labels.size, c))
    onehot[np.arange(labels.size), labels] = 1.0
    ds = LabeledDataset(z=z_all, g=onehot, d_x=d_x, d_y=d_y)
    ds.normalization_residual = residual
    return ds


def _read_be_i32(f, what: str) -> int:
    raw = f.read(4)
    if len(raw) < 4:
        raise TruncatedFile(f"file ended while reading {what}")
    return struct.unpack(">i", raw)[0]


def load_idx(path) -> np.ndarray:
    """Load an IDX file: images (count x rows x cols) or labels (count,)."""
    with open(path, "rb") as f:
        magic = _read_be_i32(f, "magic")
        if magic == IDX_LABELS_MAGIC:
            dims = [_read_be_i32(f, "count")]
        elif magic == IDX_IMAGES_MAGIC:
            dims = [_read_be_i32(f, name) for name in ("count", "rows", "cols")]
        else:
            raise BadMagic(f"unexpected magic 0x{magic & 0xFFFFFFFF:08x}")
        total = 1
        for dim in dims:
            if dim < 0:
                raise DimensionOverflow(f"negative dimension {dim}")
            total *= dim
        if total > 2**31:
            raise DimensionOverflow(f"{total} entries exceed the supported size")
        payload = f.read(total)
        if len(payload) < total:
            raise TruncatedFile(f"expected {total} bytes, got {len(payload)}")
        return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def save_matrix(path, matrix: np.ndarray) -> None:
    """Write the internal matrix format: GLMA magic, u32 LE rows/cols, f64 LE row-major."""
    matrix = np.ascontiguousarray(np.atleast_2d(matrix), dtype="<f8")
    rows, cols = matrix.shape
    with open(path, "wb") as f:
        f.write(MATRIX_MAGIC)
        f.write(struct.pack("<II", rows, cols))
        f.write(matrix.tobytes())


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(4)
        if len(magic) < 4:
            raise TruncatedFile("file shorter than its magic")
        if magic != MATRIX_MAGIC:
            raise BadMagic(f"expected {MATRIX_MAGIC!r}, got {magic!r}")
        header = f.read(8)
        if len(header) < 8:
            raise TruncatedFile("file ended inside the header")
        rows, cols = struct.unpack("<II", header)
        if rows * cols > 2**31:
            raise DimensionOverflow(f"{rows}x{cols} exceeds the supported size")
        payload = f.read(rows * cols * 8)
        if len(payload) < rows * cols * 8:
            raise TruncatedFile(f"expected {rows * cols * 8} payload bytes")
        return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()


def write_metadata(path, meta: dict) -> None:
    """Plain-text key=value sidecar."""
    with open(path, "w") as f:
        for key, value in meta.items():
            f.write(f"{key}={value}\n")


def read_metadata(path) -> dict:
    meta = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                key, _, value = line.partition("=")
                meta[key] = value
    return meta
