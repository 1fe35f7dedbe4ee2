"""Dataset ingestion: manifests, stem-paired directories, video sequences.

Two image/mask layouts are supported — an explicit JSON-lines manifest and
the common ``images/`` + ``masks/`` directory pair matched by filename stem —
plus numbered video frame directories for the efficiency benchmark. Loaders
validate that every referenced file exists and that image/mask dimensions
agree before any evaluation starts, so failures surface at load time with
the offending row or file named.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DatasetError
from .masks import read_image, read_mask

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")

_INDEX_RE = re.compile(r"\d+")


def _image_size(path: Path) -> tuple[int, int]:
    """(width, height) from the file header, without decoding pixel data."""
    try:
        with Image.open(path) as img:
            return img.size
    except (OSError, UnidentifiedImageError) as exc:
        raise DatasetError(f"cannot read image header of {path}: {exc}") from None


def _check_pair_dims(image_path: Path, mask_path: Path, context: str) -> None:
    iw, ih = _image_size(image_path)
    mw, mh = _image_size(mask_path)
    if (iw, ih) != (mw, mh):
        raise DatasetError(
            f"{context}: image {image_path.name} is {iw}x{ih} "
            f"but mask {mask_path.name} is {mw}x{mh}"
        )


@dataclass(frozen=True)
class ManifestEntry:
    """One dataset row: an image, its optional mask, and a split tag."""

    image_path: Path
    mask_path: Path | None = None
    split: str = "all"

    def load(self) -> tuple[np.ndarray, np.ndarray | None]:
        image = read_image(self.image_path)
        mask = read_mask(self.mask_path) if self.mask_path is not None else None
        return image, mask


@dataclass(frozen=True)
class DatasetManifest:
    """An immutable, order-deterministic collection of dataset entries."""

    entries: tuple[ManifestEntry, ...]
    root: Path
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def with_split(self, split: str) -> "DatasetManifest":
        """Entries whose split tag matches (no-op for the 'all' pseudo-tag)."""
        if split == "all":
            return self
        kept = tuple(e for e in self.entries if e.split == split)
        return DatasetManifest(kept, self.root, self.skipped)


@dataclass(frozen=True)
class VideoSequence:
    """Frame paths ordered by the first integer in each filename."""

    frame_paths: tuple[Path, ...]
    mask_paths: tuple[Path, ...] | None = None
    fps_hint: float | None = None

    def __len__(self) -> int:
        return len(self.frame_paths)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a JSON-lines manifest of {image, mask?, split?} records.

    Relative paths resolve against the manifest's directory. Every
    referenced file must exist, and masks must match their image's
    dimensions; violations raise DatasetError naming the row.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"manifest {path} does not exist")
    root = path.resolve().parent
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed row: {exc}") from None
            if not isinstance(record, dict) or "image" not in record:
                raise DatasetError(f"{path}:{lineno}: row needs an 'image' field")
            image_path = root / record["image"]
            if not image_path.is_file():
                raise DatasetError(f"{path}:{lineno}: image {image_path} not found")
            mask_path = None
            if record.get("mask") is not None:
                mask_path = root / record["mask"]
                if not mask_path.is_file():
                    raise DatasetError(f"{path}:{lineno}: mask {mask_path} not found")
                _check_pair_dims(image_path, mask_path, f"{path}:{lineno}")
            entries.append(
                ManifestEntry(image_path, mask_path, str(record.get("split", "all")))
            )
    return DatasetManifest(tuple(entries), root)


def write_manifest(entries, path: str | Path) -> Path:
    """Write entries as JSON lines (inverse of load_manifest, paths as given)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            record = {"image": str(entry.image_path)}
            if entry.mask_path is not None:
                record["mask"] = str(entry.mask_path)
            record["split"] = entry.split
            fh.write(json.dumps(record) + "\n")
    return path


def _files_by_stem(directory: Path, what: str) -> dict[str, Path]:
    files: dict[str, Path] = {}
    for candidate in sorted(directory.iterdir()):
        if not candidate.is_file() or candidate.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        stem = candidate.stem
        if stem in files:
            raise DatasetError(
                f"duplicate {what} stem {stem!r}: {files[stem].name} vs {candidate.name}"
            )
        files[stem] = candidate
    return files


def pair_by_stem(images_dir: str | Path, masks_dir: str | Path) -> DatasetManifest:
    """Pair images with masks by filename stem (extension-insensitive).

    Images without a matching mask are skipped and counted in the result's
    `skipped` field; an empty intersection is an error.
    """
    images_dir = Path(images_dir)
    masks_dir = Path(masks_dir)
    for directory in (images_dir, masks_dir):
        if not directory.is_dir():
            raise DatasetError(f"directory {directory} does not exist")
    images = _files_by_stem(images_dir, "image")
    masks = _files_by_stem(masks_dir, "mask")
    if not images:
        raise DatasetError(f"no images found in {images_dir}")
    entries = []
    skipped = 0
    for stem in sorted(images):
        if stem not in masks:
            skipped += 1
            log.warning("image %s has no mask; skipping", images[stem].name)
            continue
        _check_pair_dims(images[stem], masks[stem], str(images_dir))
        entries.append(ManifestEntry(images[stem], masks[stem]))
    if not entries:
        raise DatasetError(
            f"no image/mask stems in common between {images_dir} and {masks_dir}"
        )
    if skipped:
        log.warning("%d image(s) had no matching mask", skipped)
    return DatasetManifest(tuple(entries), images_dir, skipped)


def _frame_index(path: Path) -> int | None:
    match = _INDEX_RE.search(path.stem)
    return int(match.group()) if match else None


def _indexed_files(directory: Path, what: str) -> dict[int, Path]:
    indexed: dict[int, Path] = {}
    for candidate in sorted(directory.iterdir()):
        if not candidate.is_file() or candidate.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        index = _frame_index(candidate)
        if index is None:
            log.warning("%s %s has no numeric index; skipping", what, candidate.name)
            continue
        if index in indexed:
            raise DatasetError(
                f"duplicate {what} index {index}: "
                f"{indexed[index].name} vs {candidate.name}"
            )
        indexed[index] = candidate
    return indexed


def load_video(
    frames_dir: str | Path,
    masks_dir: str | Path | None = None,
    fps_hint: float | None = None,
) -> VideoSequence:
    """Load a frame directory ordered by the first integer in each stem.

    Numeric order, never lexical: frame_2 sorts before frame_10. Duplicate
    indices (e.g. the same frame under two extensions) are a hard error.
    When masks_dir is given, every frame index must have a mask there.
    """
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise DatasetError(f"directory {frames_dir} does not exist")
    frames = _indexed_files(frames_dir, "frame")
    if not frames:
        raise DatasetError(f"no numbered frames found in {frames_dir}")
    order = sorted(frames)
    frame_paths = tuple(frames[i] for i in order)

    mask_paths = None
    if masks_dir is not None:
        masks_dir = Path(masks_dir)
        if not masks_dir.is_dir():
            raise DatasetError(f"directory {masks_dir} does not exist")
        masks = _indexed_files(masks_dir, "mask")
        missing = [i for i in order if i not in masks]
        if missing:
            raise DatasetError(
                f"masks missing for frame indices {missing[:5]} in {masks_dir}"
            )
        for i in order:
            _check_pair_dims(frames[i], masks[i], str(frames_dir))
        mask_paths = tuple(masks[i] for i in order)
    return VideoSequence(frame_paths, mask_paths, fps_hint)
