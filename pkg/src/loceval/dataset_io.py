"""Serialization of score maps, annotations, and split manifests.

File formats (all little-endian / UTF-8):

Scorepack (binary, extension ``.wsep``)
    header:  magic ``WSEP`` (4 bytes) | version u16 = 1 | flags u16 = 0 |
             record_count u64
    record:  id_len u16 | id UTF-8 bytes | height u32 | width u32 |
             height*width float32 values, row-major
    Values are stored as float32; reading is streaming (one record in
    memory at a time).

Manifest (text, CSV): header ``image_id,category_id,width,height``, one
    entry per line. Image ids and category ids are opaque comma-free
    strings.

Box file (text, CSV): header ``image_id,x0,y0,x1,y1``, one line per box,
    half-open integer coordinates, multiple lines per image allowed.

Masks: one 8-bit grayscale PNG or PGM per image under a root directory,
    named ``<image_id>.png`` (or ``.pgm``); pixel values 0 = background,
    255 = foreground, 128 = ignore.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set

import numpy as np
from PIL import Image

from .boxes import Box
from .errors import (
    AnnotationError,
    BadMagic,
    DimensionMismatch,
    DuplicateId,
    InvalidMaskValue,
    MalformedLine,
    MissingMask,
    OutOfBounds,
    ScoreMapError,
    TruncatedRecord,
    UnknownImage,
    UnsupportedVersion,
)
from .maskmetrics import BACKGROUND, FOREGROUND, IGNORE, TernaryMask
from .scoremap import ScoreMap

PACK_MAGIC = b"WSEP"
PACK_VERSION = 1
SPLIT_NAMES = ("train-weaksup", "train-fullsup", "test-fullsup")

_HEADER = struct.Struct("<4sHHQ")
_ID_LEN = struct.Struct("<H")
_DIMS = struct.Struct("<II")


def write_scorepack(maps: Iterable[ScoreMap], path) -> int:
    """Write maps to a scorepack; returns the record count.

    Values are converted to float32. Non-finite values and duplicate ids
    are rejected.
    """
    path = Path(path)
    seen: Set[str] = set()
    count = 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(PACK_MAGIC, PACK_VERSION, 0, 0))
        for smap in maps:
            if smap.image_id in seen:
                raise DuplicateId(f"duplicate image id {smap.image_id!r}")
            seen.add(smap.image_id)
            values = np.ascontiguousarray(smap.values, dtype="<f4")
            if not np.isfinite(values).all():
                raise ScoreMapError(
                    f"{smap.image_id}: refusing to write non-finite values"
                )
            id_bytes = smap.image_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise ScoreMapError(f"image id too long ({len(id_bytes)} bytes)")
            fh.write(_ID_LEN.pack(len(id_bytes)))
            fh.write(id_bytes)
            fh.write(_DIMS.pack(smap.height, smap.width))
            fh.write(values.tobytes())
            count += 1
        fh.seek(8)  # record_count lives after magic+version+flags
        fh.write(struct.pack("<Q", count))
    return count


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedRecord(f"file ended while reading {what}")
    return buf


def read_scorepack(path) -> Iterator[ScoreMap]:
    """Stream maps out of a scorepack, one record in memory at a time."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic, version, _flags, count = _HEADER.unpack(
            _read_exact(fh, _HEADER.size, "header")
        )
        if magic != PACK_MAGIC:
            raise BadMagic(f"{path}: not a scorepack (magic {magic!r})")
        if version != PACK_VERSION:
            raise UnsupportedVersion(f"{path}: version {version}, expected {PACK_VERSION}")
        seen: Set[str] = set()
        for i in range(count):
            (id_len,) = _ID_LEN.unpack(_read_exact(fh, _ID_LEN.size, f"record {i} id length"))
            image_id = _read_exact(fh, id_len, f"record {i} id").decode("utf-8")
            if image_id in seen:
                raise DuplicateId(f"{path}: duplicate image id {image_id!r}")
            seen.add(image_id)
            height, width = _DIMS.unpack(_read_exact(fh, _DIMS.size, f"record {i} dims"))
            n_bytes = height * width * 4
            raw = _read_exact(fh, n_bytes, f"record {i} values ({image_id!r})")
            values = np.frombuffer(raw, dtype="<f4").reshape(height, width)
            yield ScoreMap(image_id, values.copy())
        if fh.read(1):
            raise TruncatedRecord(
                f"{path}: trailing bytes after the {count} records promised by the header"
            )


@dataclass
class ManifestEntry:
    image_id: str
    category_id: str
    width: int
    height: int


@dataclass
class SplitManifest:
    """Image ids, categories, and image sizes for one dataset split."""

    entries: List[ManifestEntry]
    split_name: Optional[str] = None
    _by_id: Dict[str, ManifestEntry] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.split_name is not None and self.split_name not in SPLIT_NAMES:
            raise AnnotationError(
                f"unknown split name {self.split_name!r}; expected one of {SPLIT_NAMES}"
            )
        by_id: Dict[str, ManifestEntry] = {}
        for e in self.entries:
            if e.width < 1 or e.height < 1:
                raise AnnotationError(
                    f"{e.image_id}: image size {e.width}x{e.height} must be positive"
                )
            if e.image_id in by_id:
                raise AnnotationError(f"duplicate image id {e.image_id!r} in manifest")
            by_id[e.image_id] = e
        self._by_id = by_id

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id

    def get(self, image_id: str) -> ManifestEntry:
        try:
            return self._by_id[image_id]
        except KeyError:
            raise UnknownImage(f"image id {image_id!r} not in manifest") from None

    def image_ids(self) -> Set[str]:
        return set(self._by_id)

    def categories(self) -> Set[str]:
        return {e.category_id for e in self.entries}


_MANIFEST_HEADER = "image_id,category_id,width,height"
_BOXES_HEADER = "image_id,x0,y0,x1,y1"


def read_manifest(path, split_name: Optional[str] = None) -> SplitManifest:
    path = Path(path)
    entries: List[ManifestEntry] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if lineno == 1:
                if line != _MANIFEST_HEADER:
                    raise MalformedLine(
                        path, 1, f"expected header {_MANIFEST_HEADER!r}, got {line!r}"
                    )
                continue
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise MalformedLine(path, lineno, f"expected 4 fields, got {len(parts)}")
            image_id, category_id, w_s, h_s = parts
            try:
                width, height = int(w_s), int(h_s)
            except ValueError:
                raise MalformedLine(path, lineno, f"non-integer size {w_s!r},{h_s!r}") from None
            if not image_id:
                raise MalformedLine(path, lineno, "empty image id")
            entries.append(ManifestEntry(image_id, category_id, width, height))
    try:
        return SplitManifest(entries, split_name)
    except AnnotationError as exc:
        raise AnnotationError(f"{path}: {exc}") from None


def write_manifest(manifest: SplitManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_MANIFEST_HEADER + "\n")
        for e in manifest.entries:
            fh.write(f"{e.image_id},{e.category_id},{e.width},{e.height}\n")


def read_boxes(path, manifest: SplitManifest) -> Dict[str, List[Box]]:
    """Ground-truth boxes per image, validated against manifest bounds."""
    path = Path(path)
    out: Dict[str, List[Box]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if lineno == 1:
                if line != _BOXES_HEADER:
                    raise MalformedLine(
                        path, 1, f"expected header {_BOXES_HEADER!r}, got {line!r}"
                    )
                continue
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise MalformedLine(path, lineno, f"expected 5 fields, got {len(parts)}")
            image_id = parts[0]
            try:
                x0, y0, x1, y1 = (int(p) for p in parts[1:])
            except ValueError:
                raise MalformedLine(path, lineno, "non-integer coordinate") from None
            if x0 < 0 or y0 < 0 or x1 <= x0 or y1 <= y0:
                raise MalformedLine(
                    path, lineno, f"invalid box ({x0}, {y0}, {x1}, {y1})"
                )
            if image_id not in manifest:
                raise UnknownImage(f"{path}:{lineno}: image id {image_id!r} not in manifest")
            entry = manifest.get(image_id)
            if x1 > entry.width or y1 > entry.height:
                raise OutOfBounds(
                    f"{path}:{lineno}: box ({x0}, {y0}, {x1}, {y1}) exceeds "
                    f"{image_id!r} extent {entry.width}x{entry.height}"
                )
            out.setdefault(image_id, []).append(Box(x0, y0, x1, y1))
    return out


_MASK_DECODE = {0: BACKGROUND, 255: FOREGROUND, 128: IGNORE}


def read_mask_file(path, entry: ManifestEntry) -> TernaryMask:
    with Image.open(path) as img:
        if img.mode != "L":
            raise InvalidMaskValue(
                f"{path}: expected 8-bit grayscale, got mode {img.mode!r}"
            )
        raw = np.asarray(img, dtype=np.uint8)
    if raw.shape != (entry.height, entry.width):
        raise DimensionMismatch(
            f"{path}: mask is {raw.shape[1]}x{raw.shape[0]}, manifest says "
            f"{entry.width}x{entry.height} for {entry.image_id!r}"
        )
    labels = np.full(raw.shape, 255, dtype=np.uint8)
    for value, label in _MASK_DECODE.items():
        labels[raw == value] = label
    bad = np.nonzero(labels == 255)
    if len(bad[0]):
        y, x = int(bad[0][0]), int(bad[1][0])
        raise InvalidMaskValue(
            f"{path}: pixel value {int(raw[y, x])} at (x={x}, y={y}); "
            "expected 0 (background), 255 (foreground), or 128 (ignore)"
        )
    return TernaryMask(labels)


def mask_path_for(root, image_id: str) -> Path:
    root = Path(root)
    for ext in (".png", ".pgm"):
        candidate = root / f"{image_id}{ext}"
        if candidate.exists():
            return candidate
    raise MissingMask(f"no mask file for {image_id!r} under {root}")


def read_masks(root, manifest: SplitManifest) -> Dict[str, TernaryMask]:
    """Load every manifest image's ternary mask from a directory tree."""
    return {
        e.image_id: read_mask_file(mask_path_for(root, e.image_id), e)
        for e in manifest.entries
    }


@dataclass
class ValidationReport:
    """Outcome of checking the three-split protocol."""

    violations: List[str]
    warnings: List[str]
    per_category_counts: Dict[str, Dict[str, int]]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": self.violations,
            "warnings": self.warnings,
            "per_category_counts": self.per_category_counts,
        }


def validate_splits(
    train_weaksup: SplitManifest,
    train_fullsup: SplitManifest,
    test_fullsup: SplitManifest,
    annotated_ids: Optional[Set[str]] = None,
) -> ValidationReport:
    """Check split disjointness, category coverage, and (optionally) that
    every fully-supervised image has an annotation."""
    named = [
        ("train-weaksup", train_weaksup),
        ("train-fullsup", train_fullsup),
        ("test-fullsup", test_fullsup),
    ]
    violations: List[str] = []
    warnings: List[str] = []

    for i in range(len(named)):
        for j in range(i + 1, len(named)):
            name_a, a = named[i]
            name_b, b = named[j]
            shared = sorted(a.image_ids() & b.image_ids())
            if shared:
                sample = ", ".join(shared[:5])
                violations.append(
                    f"{name_a} and {name_b} share {len(shared)} image id(s): {sample}"
                )

    weak_cats = train_weaksup.categories()
    for name, manifest in named[1:]:
        missing = sorted(manifest.categories() - weak_cats)
        if missing:
            warnings.append(
                f"categories in {name} absent from train-weaksup: {', '.join(missing)}"
            )

    if annotated_ids is not None:
        for name, manifest in named[1:]:
            missing = sorted(manifest.image_ids() - annotated_ids)
            if missing:
                sample = ", ".join(missing[:5])
                violations.append(
                    f"{len(missing)} {name} image(s) lack annotations: {sample}"
                )

    counts: Dict[str, Dict[str, int]] = {}
    for name, manifest in named:
        per_cat: Dict[str, int] = {}
        for e in manifest.entries:
            per_cat[e.category_id] = per_cat.get(e.category_id, 0) + 1
        counts[name] = dict(sorted(per_cat.items()))

    return ValidationReport(violations, warnings, counts)
