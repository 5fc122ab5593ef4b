"""Dataset ingestion: images, manifests, splits and a synthetic generator.

ETH-80 is read from a user-supplied directory laid out as
``<root>/<class>/<object>/<image>``; no images ship with the package.
Random numbers come from numpy's PCG64 generator (``default_rng``), seeded
from integer lists so that every sample has its own reproducible stream.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .errors import DatasetError, ShapeError
from .tensor import dump_tensor, parse_tensor
from .tucker import TuckerNetwork, reconstruct

__all__ = [
    "ManifestEntry",
    "DatasetManifest",
    "IMAGE_SUFFIXES",
    "load_image",
    "save_image",
    "load_sample",
    "downsample",
    "scan_image_tree",
    "load_dataset",
    "split",
    "split_indices",
    "synth_dataset",
    "write_manifest",
    "read_manifest",
    "export_dataset",
]

IMAGE_SUFFIXES = (".png", ".ppm", ".pnm", ".jpg", ".jpeg", ".bmp")
TENSOR_SUFFIX = ".tensor"


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    label: str
    object_id: str
    path: str


@dataclass
class DatasetManifest:
    entries: list
    seed: int | None = None
    train_fraction: float | None = None

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.sample_id in seen:
                raise DatasetError(f"duplicate sample id {e.sample_id!r} in manifest")
            seen.add(e.sample_id)

    def __len__(self):
        return len(self.entries)

    @property
    def ids(self) -> list:
        return [e.sample_id for e in self.entries]

    @property
    def labels(self) -> list:
        return [e.label for e in self.entries]

    @property
    def classes(self) -> list:
        return sorted(set(self.labels))


def load_image(path) -> np.ndarray:
    """Decode an RGB raster into an ``H x W x 3`` array scaled to ``[0, 1]``."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            data = np.asarray(img)
    except (OSError, ValueError) as exc:
        raise DatasetError(f"{path}: cannot read image ({exc})") from None
    if mode != "RGB":
        raise DatasetError(f"{path}: expected an RGB image, got mode {mode!r}")
    return data.astype(np.float64) / 255.0


def save_image(img, path) -> None:
    """Write an ``H x W x 3`` array in ``[0, 1]`` as an 8-bit RGB file (format from suffix)."""
    arr = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def load_sample(path) -> np.ndarray:
    """Read a tensor dump (``.tensor``) or an image, depending on the suffix."""
    path = Path(path)
    if path.suffix == TENSOR_SUFFIX:
        return parse_tensor(path.read_text())
    return load_image(path)


def _area_weights(src, dst):
    """``dst x src`` matrix averaging source pixels by overlap with each output cell."""
    edges = np.arange(dst + 1) * (src / dst)
    lo, hi = edges[:-1, None], edges[1:, None]
    p = np.arange(src)[None, :]
    overlap = np.clip(np.minimum(hi, p + 1) - np.maximum(lo, p), 0.0, None)
    return overlap / overlap.sum(1, keepdims=True)


def downsample(img, target: Sequence[int] = (32, 32)) -> np.ndarray:
    """Area-weighted resampling of an ``H x W x C`` image to ``target`` pixels.

    When the size is divisible this is plain box averaging.  Each channel is
    shifted by its minimum before averaging, so constant images come back
    exactly unchanged.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3:
        raise ShapeError(f"expected an H x W x C image, got shape {img.shape}")
    th, tw = (int(t) for t in target)
    h, w = img.shape[:2]
    if th > h or tw > w:
        raise ShapeError(f"cannot downsample a {h}x{w} image to {th}x{tw}")
    if (th, tw) == (h, w):
        return img.copy()
    ref = img.min(axis=(0, 1))
    out = np.einsum("ip,pqc,jq->ijc", _area_weights(h, th), img - ref, _area_weights(w, tw))
    return out + ref


def scan_image_tree(root) -> DatasetManifest:
    """Manifest of ``<root>/<class>/<object>/<image>`` files, sorted by path.

    Files whose stem ends in ``-map`` (segmentation masks) are ignored.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset directory {root} does not exist")
    entries = []
    for cls in sorted(p for p in root.iterdir() if p.is_dir()):
        for obj in sorted(p for p in cls.iterdir() if p.is_dir()):
            for f in sorted(obj.iterdir()):
                if f.is_file() and f.suffix.lower() in IMAGE_SUFFIXES and not f.stem.endswith("-map"):
                    entries.append(ManifestEntry(f"{cls.name}/{obj.name}/{f.stem}", cls.name,
                                                 obj.name, str(f)))
    if not entries:
        raise DatasetError(f"no images found under {root} (expected <class>/<object>/<image>)")
    return DatasetManifest(entries)


def load_dataset(manifest: DatasetManifest, size: Sequence[int] | None = (32, 32)):
    """Load every manifest entry; images are downsampled to `size`.

    Returns ``(samples, labels)``.  All samples must end up with one shape.
    """
    samples = []
    shape = None
    for e in manifest.entries:
        try:
            t = load_sample(e.path)
        except (OSError, ValueError) as exc:
            raise DatasetError(f"{e.path}: {exc}") from None
        if size is not None and t.ndim == 3 and Path(e.path).suffix != TENSOR_SUFFIX:
            t = downsample(t, size)
        if shape is None:
            shape = t.shape
        elif t.shape != shape:
            raise ShapeError(f"{e.path}: sample shape {t.shape} differs from {shape}")
        samples.append(t)
    return samples, manifest.labels


def split_indices(labels, train_fraction: float, seed: int):
    """Stratified random split of positions ``0..len(labels)-1``.

    Each class contributes ``round(fraction * size)`` training items.  For a
    fraction below one every class of size >= 2 keeps at least one item in
    each split.  Both index lists come back in ascending order.
    """
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError(f"train fraction must be in (0, 1], got {train_fraction}")
    labels = list(labels)
    if not labels:
        raise DatasetError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    train = []
    for cls in sorted(set(labels)):
        members = np.array([k for k, lab in enumerate(labels) if lab == cls])
        n = len(members)
        n_train = int(np.floor(train_fraction * n + 0.5))
        if train_fraction < 1.0 and n >= 2:
            n_train = min(max(n_train, 1), n - 1)
        train.extend(members[rng.permutation(n)[:n_train]].tolist())
    train_set = set(train)
    return sorted(train), [k for k in range(len(labels)) if k not in train_set]


def split(manifest: DatasetManifest, train_fraction: float, seed: int):
    """Train and test sample ids, each in manifest order."""
    tr, te = split_indices(manifest.labels, train_fraction, seed)
    ids = manifest.ids
    manifest.seed, manifest.train_fraction = seed, train_fraction
    return [ids[k] for k in tr], [ids[k] for k in te]


def _orthonormal(m):
    q, r = np.linalg.qr(m)
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def synth_dataset(k: int = 8, per_class: int = 41, shape: Sequence[int] = (32, 32, 3),
                  ranks: Sequence[int] = (3, 3, 3), noise: float = 0.05, seed: int = 0,
                  core_spread: float = 0.5, shared: float = 0.0):
    """Synthetic classes with Tucker structure.

    Class ``c`` has a template network with orthonormal factors and a
    standard normal core.  Each of its samples reconstructs the template
    factors with the template core perturbed by ``core_spread * N(0, 1)``,
    plus i.i.d. Gaussian noise of scale `noise`.

    With ``shared > 0`` the class factors are orthonormalized from
    ``shared * S_n + E_{c,n}``, where ``S_n`` is one Gaussian matrix common
    to all classes, so the class subspaces overlap.  ``shared=0`` gives
    independent random subspaces.

    Returns ``(samples, labels)`` with labels ``"class0", "class1", ...``.
    """
    shape = tuple(int(s) for s in shape)
    ranks = tuple(int(r) for r in ranks)
    if len(shape) != len(ranks) or any(not 1 <= r <= d for r, d in zip(ranks, shape)):
        raise ValueError(f"ranks {ranks} are not valid for shape {shape}")
    samples, labels = [], []
    shared_rng = np.random.default_rng([seed, 2])
    shared_f = [shared_rng.standard_normal((d, r)) for d, r in zip(shape, ranks)]
    for c in range(k):
        trng = np.random.default_rng([seed, 0, c])
        factors = tuple(_orthonormal(shared * sf + trng.standard_normal((d, r)))
                        for sf, d, r in zip(shared_f, shape, ranks))
        core = trng.standard_normal(ranks)
        for i in range(per_class):
            srng = np.random.default_rng([seed, 1, c, i])
            sample_core = core + core_spread * srng.standard_normal(ranks)
            x = reconstruct(TuckerNetwork(sample_core, factors))
            if noise:
                x = x + noise * srng.standard_normal(shape)
            samples.append(x)
            labels.append(f"class{c}")
    return samples, labels


def write_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "label", "object", "path"])
        for e in manifest.entries:
            w.writerow([e.sample_id, e.label, e.object_id, e.path])


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["id", "label", "object", "path"]:
        raise DatasetError(f"{path}: manifest header must be id,label,object,path")
    entries = []
    for r in rows[1:]:
        if len(r) != 4:
            raise DatasetError(f"{path}: malformed manifest row {r}")
        p = Path(r[3])
        if not p.is_absolute():
            p = path.parent / p
        entries.append(ManifestEntry(r[0], r[1], r[2], str(p)))
    return DatasetManifest(entries)


def export_dataset(samples, labels, directory) -> DatasetManifest:
    """Write samples as tensor dumps plus ``manifest.csv`` (relative paths)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    counters = {}
    for t, lab in zip(samples, labels):
        idx = counters.get(lab, 0)
        counters[lab] = idx + 1
        name = f"{lab}_{idx:04d}{TENSOR_SUFFIX}"
        (directory / name).write_text(dump_tensor(t))
        entries.append(ManifestEntry(f"{lab}/{idx:04d}", lab, lab, name))
    manifest = DatasetManifest(entries)
    write_manifest(manifest, directory / "manifest.csv")
    return manifest
