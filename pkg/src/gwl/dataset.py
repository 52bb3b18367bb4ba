"""MNIST-style IDX files and the binarised low-resolution "toy" images derived from them.

IDX layout (big-endian)::

    images: magic 0x00000803, count, rows, cols, then count*rows*cols bytes
    labels: magic 0x00000801, count, then count bytes
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxError(ValueError):
    pass


class BadMagic(IdxError):
    pass


class Truncated(IdxError):
    pass


class TrailingBytes(IdxError):
    pass


@dataclass
class IdxImages:
    pixels: np.ndarray  # (count, rows, cols) uint8

    @property
    def count(self) -> int:
        return self.pixels.shape[0]

    @property
    def rows(self) -> int:
        return self.pixels.shape[1]

    @property
    def cols(self) -> int:
        return self.pixels.shape[2]

    def to_bytes(self) -> bytes:
        head = struct.pack(">IIII", IMAGES_MAGIC, self.count, self.rows, self.cols)
        return head + self.pixels.astype(np.uint8).tobytes()


@dataclass
class IdxLabels:
    labels: np.ndarray  # (count,) uint8

    @property
    def count(self) -> int:
        return len(self.labels)

    def to_bytes(self) -> bytes:
        return struct.pack(">II", LABELS_MAGIC, self.count) + self.labels.astype(np.uint8).tobytes()


def parse_idx(data: bytes) -> IdxImages | IdxLabels:
    if len(data) < 4:
        raise Truncated("file shorter than the magic number")
    (magic,) = struct.unpack(">I", data[:4])
    if magic == IMAGES_MAGIC:
        if len(data) < 16:
            raise Truncated("image header needs 16 bytes")
        _, n, r, c = struct.unpack(">IIII", data[:16])
        need, head = n * r * c, 16
    elif magic == LABELS_MAGIC:
        if len(data) < 8:
            raise Truncated("label header needs 8 bytes")
        _, n = struct.unpack(">II", data[:8])
        need, head = n, 8
    else:
        raise BadMagic(f"unknown IDX magic 0x{magic:08x}")
    body = len(data) - head
    if body < need:
        raise Truncated(f"payload has {body} bytes, header promises {need}")
    if body > need:
        raise TrailingBytes(f"{body - need} bytes after the declared payload")
    payload = np.frombuffer(data, dtype=np.uint8, offset=head).copy()
    if magic == IMAGES_MAGIC:
        return IdxImages(payload.reshape(n, r, c))
    return IdxLabels(payload)


def read_idx(path) -> IdxImages | IdxLabels:
    path = Path(path)
    data = path.read_bytes()
    if path.suffix == ".gz":
        import gzip

        data = gzip.decompress(data)
    return parse_idx(data)


def _edges(n: int, parts: int) -> list[int]:
    return [round(k * n / parts) for k in range(parts + 1)]


def derive_toy(
    images: IdxImages, labels: IdxLabels, side: int = 5, crop: int = 20, strict: bool = False
):
    """Center-crop, average-pool to ``side x side`` and binarise at the image mean.

    Only samples labelled 0 or 1 are kept, duplicates included.  Pooled cells
    below the mean become 0 and the rest 1, so a constant image is all ones;
    ``strict=True`` instead requires a cell to exceed the mean (constant image
    -> all zeros).  Returns a list of ``(config, label)`` with flat
    ``side*side`` configs.
    """
    if images.rows != 28 or images.cols != 28:
        raise ValueError(f"expected 28x28 images, got {images.rows}x{images.cols}")
    if labels.count != images.count:
        raise ValueError("image and label counts differ")
    if side < 1 or side > crop:
        raise ValueError(f"side must be in [1, {crop}]")
    off = (28 - crop) // 2
    edges = _edges(crop, side)
    out = []
    for img, lab in zip(images.pixels, labels.labels):
        if lab not in (0, 1):
            continue
        cropped = img[off:off + crop, off:off + crop].astype(np.float64)
        pooled = np.array([
            [cropped[edges[i]:edges[i + 1], edges[j]:edges[j + 1]].mean() for j in range(side)]
            for i in range(side)
        ])
        above = pooled > pooled.mean() if strict else pooled >= pooled.mean()
        config = above.astype(np.int64).ravel()
        out.append((config, int(lab)))
    return out


def toy_csv(data) -> str:
    if not data:
        return "label\n"
    d = len(data[0][0])
    buf = io.StringIO()
    buf.write(",".join(["label"] + [f"v{i}" for i in range(d)]) + "\n")
    for config, lab in data:
        buf.write(",".join([str(lab)] + [str(int(v)) for v in config]) + "\n")
    return buf.getvalue()


def synthetic_digits(count: int, seed: int = 0) -> tuple[IdxImages, IdxLabels]:
    """Crude 28x28 zeros (rings) and ones (vertical strokes) with jitter and noise.

    A stand-in for MNIST when the real files are not at hand.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:28, 0:28].astype(np.float64)
    imgs = np.zeros((count, 28, 28), dtype=np.uint8)
    labs = np.zeros(count, dtype=np.uint8)
    for k in range(count):
        lab = int(rng.integers(2))
        cy, cx = 13.5 + rng.normal(0, 1.5, size=2)
        if lab == 0:
            ry, rx = rng.uniform(6, 9), rng.uniform(4, 7)
            r = np.sqrt(((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2)
            ink = np.exp(-((r - 1.0) ** 2) / 0.04)
        else:
            tilt = rng.normal(0, 0.15)
            half = rng.uniform(7, 10)
            dx = xx - (cx + tilt * (yy - cy))
            ink = np.exp(-(dx**2) / rng.uniform(1.5, 4.0)) * (np.abs(yy - cy) < half)
        ink = ink + rng.normal(0, 0.05, size=ink.shape)
        imgs[k] = np.clip(ink * 255, 0, 255).astype(np.uint8)
        labs[k] = lab
    return IdxImages(imgs), IdxLabels(labs)
