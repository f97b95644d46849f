"""Dataset construction: noise/dot sources, image corpora, frame sequences,
and the chained transform pipeline that produces training and evaluation images.

Each source image is transformed exactly once per chain length (the transform
powers are composed analytically), then center-cropped and downscaled to the
network's resolution, so no compounding resampling blur enters the data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .configfile import format_kv, parse_kv, write_kv
from .geometry import PolarGeometry, polar_geometry
from .imaging import (
    GrayImage,
    PolarImage,
    Rotate,
    Scale,
    TransformSpec,
    Translate,
    compose,
    downscale_bilinear,
    from_polar,
    power,
    threshold,
    to_polar,
    transform_center_crop,
    upscale_nearest,
    write_image,
)

__all__ = [
    "DataError",
    "RandomNoise",
    "HighResNoise",
    "RandomDot",
    "HighResDot",
    "ImageDir",
    "ImageDirBW",
    "FrameSequence",
    "SourceKind",
    "SamplePair",
    "EvalSample",
    "DatasetSpec",
    "generate_source",
    "make_sample",
    "build_dataset",
    "ingest_frames",
    "write_manifest",
    "read_manifest",
    "materialize_dataset",
]

log = logging.getLogger(__name__)

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff")

# Ranges for the random per-sample initial transform: full angular coverage
# for rotation; translation and scaling stay small enough that 5X-chained
# content remains inside the high-res center crop.
_R_TRANSLATE_MAX = 3.0
_R_SCALE_RANGE = (0.8, 1.15)


class DataError(ValueError):
    """A dataset cannot be built from the given sources."""


@dataclass(frozen=True)
class RandomNoise:
    """Low-res uniform noise (side/10 squared) block-upscaled by 10."""


@dataclass(frozen=True)
class HighResNoise:
    """Per-pixel uniform noise at full source resolution."""


@dataclass(frozen=True)
class RandomDot:
    """Low-res binary noise block-upscaled by 10."""


@dataclass(frozen=True)
class HighResDot:
    """Per-pixel binary noise at full source resolution."""


@dataclass(frozen=True)
class ImageDir:
    path: str


@dataclass(frozen=True)
class ImageDirBW(ImageDir):
    """Image corpus whose network-resolution samples are rounded to {0, 1}."""


@dataclass(frozen=True)
class FrameSequence:
    path: str


SourceKind = Union[
    RandomNoise, HighResNoise, RandomDot, HighResDot, ImageDir, ImageDirBW, FrameSequence
]


@dataclass(frozen=True)
class SamplePair:
    """One network-resolution training pair (input, target)."""

    input: object
    target: object


@dataclass(frozen=True)
class EvalSample:
    """Chained ground truth for one source: input plus targets at 1X, 2X, 5X."""

    input: object
    target_1: object
    target_2: object
    target_5: object

    def target(self, j: int):
        try:
            return {1: self.target_1, 2: self.target_2, 5: self.target_5}[j]
        except KeyError:
            raise ValueError(f"no target stored for chain length {j}") from None


@dataclass(frozen=True)
class DatasetSpec:
    source: SourceKind
    transform: TransformSpec
    train_count: int = 250
    test_count: int = 50
    network_height: int = 16
    network_width: int = 16
    polar: Optional[PolarGeometry] = None
    seed: int = 0
    bw: bool = False
    source_size: int = 320
    crop_size: int = 160

    def __post_init__(self):
        if self.train_count < 0 or self.test_count < 0:
            raise ValueError("sample counts must be non-negative")
        if self.crop_size > self.source_size:
            raise ValueError(
                f"crop {self.crop_size} exceeds source size {self.source_size}"
            )
        if isinstance(self.source, (RandomNoise, RandomDot)) and self.source_size % 10:
            raise ValueError("block-upscaled sources need a source size divisible by 10")
        if self.polar is None:
            if self.network_height > self.crop_size or self.network_width > self.crop_size:
                raise ValueError("network dimensions exceed the crop size")
        elif self.polar.source_size > self.crop_size:
            raise ValueError("polar source size exceeds the crop size")

    @property
    def grid_dims(self) -> tuple:
        if self.polar is not None:
            return (self.polar.rings, self.polar.wedges)
        return (self.network_height, self.network_width)

    @property
    def wants_bw(self) -> bool:
        return self.bw or isinstance(self.source, ImageDirBW)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _list_images(path) -> list:
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"not a directory: {root}")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
    readable = []
    for f in files:
        try:
            with Image.open(f) as im:
                im.verify()
            readable.append(f)
        except (OSError, UnidentifiedImageError) as exc:
            log.warning("skipping unreadable image %s: %s", f, exc)
    if not readable:
        raise DataError(f"no readable images in {root}")
    return readable


def _load_square(path, size: Optional[int] = None) -> GrayImage:
    """Grayscale, center-crop to square, resize to size x size (None = keep side)."""
    with Image.open(path) as im:
        gray = im.convert("L")
        side = min(gray.size)
        left = (gray.width - side) // 2
        top = (gray.height - side) // 2
        gray = gray.crop((left, top, left + side, top + side))
        if size is not None and gray.width != size:
            gray = gray.resize((size, size), Image.BILINEAR)
        arr = np.asarray(gray, dtype=np.float64) / 255.0
    return GrayImage(arr)


def generate_source(kind: SourceKind, rng: np.random.Generator, source_size: int = 320) -> GrayImage:
    """One high-resolution source image for the given kind."""
    if isinstance(kind, RandomNoise):
        low = rng.random((source_size // 10, source_size // 10))
        return upscale_nearest(GrayImage(low), 10)
    if isinstance(kind, HighResNoise):
        return GrayImage(rng.random((source_size, source_size)))
    if isinstance(kind, RandomDot):
        low = rng.integers(0, 2, (source_size // 10, source_size // 10)).astype(np.float64)
        return upscale_nearest(GrayImage(low), 10)
    if isinstance(kind, HighResDot):
        return GrayImage(rng.integers(0, 2, (source_size, source_size)).astype(np.float64))
    if isinstance(kind, (ImageDir, FrameSequence)):
        files = _list_images(kind.path)
        return _load_square(files[int(rng.integers(0, len(files)))], source_size)
    raise TypeError(f"unsupported source kind: {kind!r}")


def _identity_like(t: TransformSpec) -> TransformSpec:
    return power(t, 0)


def _random_initial(t: TransformSpec, rng: np.random.Generator) -> TransformSpec:
    """The per-source random transform of the same type as the learned one."""
    if isinstance(t, Rotate):
        return Rotate(float(rng.uniform(0.0, 360.0)))
    if isinstance(t, Translate):
        return Translate(
            float(rng.uniform(-_R_TRANSLATE_MAX, _R_TRANSLATE_MAX)),
            float(rng.uniform(-_R_TRANSLATE_MAX, _R_TRANSLATE_MAX)),
        )
    if isinstance(t, Scale):
        return Scale(float(rng.uniform(*_R_SCALE_RANGE)))
    raise TypeError(f"not a transform: {t!r}")


def _network_frame_size(spec: DatasetSpec) -> int:
    return spec.polar.source_size if spec.polar is not None else spec.network_width


def _pipeline(source: GrayImage, total: TransformSpec, spec: DatasetSpec):
    """transform -> center crop -> downscale (-> polar conversion) (-> threshold)."""
    scale_ratio = spec.crop_size / _network_frame_size(spec)
    hi = transform_center_crop(source, total, scale_ratio, spec.crop_size, spec.crop_size)
    if spec.polar is not None:
        mid = downscale_bilinear(hi, spec.polar.source_size, spec.polar.source_size)
        out = to_polar(mid, spec.polar)
    else:
        out = downscale_bilinear(hi, spec.network_width, spec.network_height)
    if spec.wants_bw:
        out = threshold(out, 0.5)
    return out


def _make_images(source, t, r, spec, chain_lengths):
    return {j: _pipeline(source, compose(power(t, j), r), spec) for j in chain_lengths}


def make_sample(source: GrayImage, t: TransformSpec, r: TransformSpec, spec: DatasetSpec) -> EvalSample:
    """Chained images I_j for j in {0, 1, 2, 5}, each resampled exactly once."""
    if type(t) is not type(r):
        raise ValueError(
            f"initial transform {type(r).__name__} does not match {type(t).__name__}"
        )
    imgs = _make_images(source, t, r, spec, (0, 1, 2, 5))
    return EvalSample(imgs[0], imgs[1], imgs[2], imgs[5])


def build_dataset(spec: DatasetSpec):
    """Training pairs and chained evaluation samples for a dataset spec.

    Generated sources are fresh per sample; directory corpora are partitioned
    into disjoint train/test file sets by a seeded shuffle.  Each sample draws
    an independent initial transform.  Training pairs are shuffled once here
    and meant to be iterated in order afterwards.
    """
    t = spec.transform
    train_files = test_files = None
    if isinstance(spec.source, ImageDir):
        files = _list_images(spec.source.path)
        need = spec.train_count + spec.test_count
        if len(files) < need:
            raise DataError(
                f"corpus {spec.source.path} has {len(files)} images, need {need}"
            )
        order = _rng(spec.seed, 99).permutation(len(files))
        train_files = [files[i] for i in order[: spec.train_count]]
        test_files = [files[i] for i in order[spec.train_count : need]]

    def source_for(split: int, index: int, rng) -> GrayImage:
        if train_files is not None:
            file = (train_files if split == 0 else test_files)[index]
            return _load_square(file, spec.source_size)
        return generate_source(spec.source, rng, spec.source_size)

    train_pairs = []
    for i in range(spec.train_count):
        rng = _rng(spec.seed, 0, i)
        src = source_for(0, i, rng)
        r = _random_initial(t, rng)
        imgs = _make_images(src, t, r, spec, (0, 1))
        train_pairs.append(SamplePair(imgs[0], imgs[1]))

    test_samples = []
    for i in range(spec.test_count):
        rng = _rng(spec.seed, 1, i)
        src = source_for(1, i, rng)
        r = _random_initial(t, rng)
        test_samples.append(make_sample(src, t, r, spec))

    order = _rng(spec.seed, 98).permutation(len(train_pairs))
    train_pairs = [train_pairs[i] for i in order]
    return train_pairs, test_samples


def ingest_frames(path, train_count: int, test_count: int, height: int, width: int):
    """Consecutive-frame pairs with a temporal train/test split (no shuffling).

    Pair k is (frame_k, frame_{k+1}); the first ``train_count`` pairs train
    and the next ``test_count`` pairs test.
    """
    frames = _list_images(path)
    need = train_count + test_count + 1
    if len(frames) < need:
        raise DataError(
            f"frame directory {path} has {len(frames)} frames, need at least {need}"
        )
    processed = []
    for f in frames[:need]:
        img = _load_square(f)
        if img.width < width or img.height < height:
            raise DataError(f"frame {f} is smaller than the network {height}x{width}")
        processed.append(downscale_bilinear(img, width, height))
    pairs = [SamplePair(processed[k], processed[k + 1]) for k in range(need - 1)]
    return pairs[:train_count], pairs[train_count : train_count + test_count]


_SOURCE_NAMES = {
    RandomNoise: "random_noise",
    HighResNoise: "highres_noise",
    RandomDot: "random_dot",
    HighResDot: "highres_dot",
}


def source_kind_name(kind: SourceKind) -> str:
    if type(kind) in _SOURCE_NAMES:
        return _SOURCE_NAMES[type(kind)]
    if isinstance(kind, ImageDirBW):
        return f"image_dir_bw:{kind.path}"
    if isinstance(kind, ImageDir):
        return f"image_dir:{kind.path}"
    if isinstance(kind, FrameSequence):
        return f"frames:{kind.path}"
    raise TypeError(f"unsupported source kind: {kind!r}")


def parse_source_kind(name: str) -> SourceKind:
    flat = {v: k for k, v in _SOURCE_NAMES.items()}
    if name in flat:
        return flat[name]()
    for prefix, cls in (("image_dir_bw:", ImageDirBW), ("image_dir:", ImageDir),
                        ("frames:", FrameSequence)):
        if name.startswith(prefix):
            return cls(name[len(prefix):])
    raise ValueError(f"unknown source kind {name!r}")


def _transform_fields(t: TransformSpec) -> dict:
    if isinstance(t, Translate):
        return {"transform": "translate", "dx": repr(t.dx), "dy": repr(t.dy)}
    if isinstance(t, Rotate):
        return {"transform": "rotate", "degrees": repr(t.degrees)}
    if isinstance(t, Scale):
        return {"transform": "scale", "factor": repr(t.factor)}
    raise TypeError(f"not a transform: {t!r}")


def _transform_from_fields(fields: dict) -> TransformSpec:
    kind = fields["transform"]
    if kind == "translate":
        return Translate(float(fields["dx"]), float(fields["dy"]))
    if kind == "rotate":
        return Rotate(float(fields["degrees"]))
    if kind == "scale":
        return Scale(float(fields["factor"]))
    raise ValueError(f"unknown transform kind {kind!r}")


def manifest_fields(spec: DatasetSpec) -> dict:
    fields = {"source": source_kind_name(spec.source)}
    fields.update(_transform_fields(spec.transform))
    fields.update(
        train_count=str(spec.train_count),
        test_count=str(spec.test_count),
        seed=str(spec.seed),
        bw=str(spec.bw).lower(),
        source_size=str(spec.source_size),
        crop_size=str(spec.crop_size),
    )
    if spec.polar is not None:
        fields.update(
            topology="polar",
            rings=str(spec.polar.rings),
            wedges=str(spec.polar.wedges),
            polar_source=str(spec.polar.source_size),
        )
    else:
        fields.update(
            topology="cartesian",
            height=str(spec.network_height),
            width=str(spec.network_width),
        )
    return fields


def write_manifest(spec: DatasetSpec, path) -> None:
    write_kv(manifest_fields(spec), path, header="dataset manifest")


def read_manifest(path) -> DatasetSpec:
    with open(path) as fh:
        fields = parse_kv(fh.read())
    polar = None
    height = width = 16
    if fields.get("topology") == "polar":
        polar = polar_geometry(
            int(fields["polar_source"]), int(fields["rings"]), int(fields["wedges"])
        )
    else:
        height, width = int(fields["height"]), int(fields["width"])
    return DatasetSpec(
        source=parse_source_kind(fields["source"]),
        transform=_transform_from_fields(fields),
        train_count=int(fields["train_count"]),
        test_count=int(fields["test_count"]),
        network_height=height,
        network_width=width,
        polar=polar,
        seed=int(fields["seed"]),
        bw=fields.get("bw", "false") == "true",
        source_size=int(fields["source_size"]),
        crop_size=int(fields["crop_size"]),
    )


def _writable(img) -> GrayImage:
    if isinstance(img, PolarImage):
        return from_polar(img, img.geometry.source_size)
    return img


def materialize_dataset(train, test, spec: DatasetSpec, outdir) -> None:
    """Write every sample as PNGs plus the manifest, for inspection."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(spec, out / "manifest.txt")
    for i, pair in enumerate(train):
        write_image(_writable(pair.input), out / f"train_{i:04d}_in.png")
        write_image(_writable(pair.target), out / f"train_{i:04d}_target.png")
    for i, sample in enumerate(test):
        write_image(_writable(sample.input), out / f"test_{i:04d}_in.png")
        for j in (1, 2, 5):
            write_image(_writable(sample.target(j)), out / f"test_{i:04d}_target{j}x.png")
