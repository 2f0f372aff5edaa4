"""Skeleton sequence ingestion, clip encoding, splits and synthetic data.

Sequences are labeled arrays of per-frame, per-person, per-joint 3D
coordinates. Encoding turns a sequence into a pair of fixed-size image-like
tensors: a position stream [P, 3, T, K] (coordinates as channels, frames as
height, joints as width) and a motion stream of adjacent-frame differences.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SBU_JOINTS = 15
SBU_PERSONS = 2
SBU_FIELDS_PER_ROW = 1 + SBU_PERSONS * SBU_JOINTS * 3

#: Canonical clip sizes: (frames T, joints K).
SBU_CLIP_SIZE = (16, 15)
NTU_CLIP_SIZE = (32, 25)


@dataclass
class SkeletonSequence:
    """A labeled skeleton sequence with coords of shape [F, P, K, 3]."""

    id: str
    label: int
    coords: np.ndarray
    group: str | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 4 or self.coords.shape[3] != 3:
            raise ValueError(
                f"sequence {self.id!r}: coords must be [F, P, K, 3], got {self.coords.shape}"
            )
        if self.coords.shape[0] < 2:
            raise ValueError(f"sequence {self.id!r}: needs at least 2 frames")
        if not np.isfinite(self.coords).all():
            raise ValueError(f"sequence {self.id!r}: coords contain non-finite values")
        if self.label < 0:
            raise ValueError(f"sequence {self.id!r}: label must be >= 0")

    @property
    def frames(self) -> int:
        return self.coords.shape[0]

    @property
    def persons(self) -> int:
        return self.coords.shape[1]

    @property
    def joints(self) -> int:
        return self.coords.shape[2]


@dataclass
class ClipTensors:
    """Encoded network input: position and motion streams, each [P, 3, T, K]."""

    position: np.ndarray
    motion: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.motion = np.asarray(self.motion, dtype=np.float64)
        if self.position.shape != self.motion.shape:
            raise ValueError("position and motion streams must share one shape")
        if self.position.ndim != 4 or self.position.shape[1] != 3:
            raise ValueError(
                f"clip streams must be [P, 3, T, K], got {self.position.shape}"
            )


@dataclass
class ManifestEntry:
    id: str
    label: int
    group: str | None = None


@dataclass
class DatasetManifest:
    """Index of a dataset: entries, class names and skeleton geometry."""

    entries: list[ManifestEntry]
    class_names: list[str]
    joints: int
    persons: int

    def __post_init__(self):
        labels = sorted({e.label for e in self.entries})
        if self.entries and labels != list(range(len(self.class_names))):
            missing = set(range(len(self.class_names))) - set(labels)
            extra = set(labels) - set(range(len(self.class_names)))
            raise ValueError(
                f"labels must be dense in [0, {len(self.class_names)}): "
                f"missing {sorted(missing)}, unexpected {sorted(extra)}"
            )

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"id": e.id, "label": e.label, "group": e.group} for e in self.entries
            ],
            "class_names": list(self.class_names),
            "joints": self.joints,
            "persons": self.persons,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetManifest":
        entries = [
            ManifestEntry(e["id"], int(e["label"]), e.get("group"))
            for e in doc["entries"]
        ]
        return cls(entries, list(doc["class_names"]), int(doc["joints"]),
                   int(doc["persons"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def manifest_from_sequences(seqs: list[SkeletonSequence],
                            class_names: list[str] | None = None) -> DatasetManifest:
    """Build a manifest covering the given sequences."""
    if not seqs:
        raise ValueError("cannot build a manifest from an empty sequence list")
    n_classes = max(s.label for s in seqs) + 1
    if class_names is None:
        class_names = [f"class{c}" for c in range(n_classes)]
    entries = [ManifestEntry(s.id, s.label, s.group) for s in seqs]
    return DatasetManifest(entries, class_names, seqs[0].joints, seqs[0].persons)


# ---------------------------------------------------------------------------
# Parsers
# ---------------------------------------------------------------------------

def parse_sbu(path, *, id: str | None = None, label: int = 0,
              group: str | None = None) -> SkeletonSequence:
    """Parse an SBU-layout text file: one row per frame, a frame index plus
    90 comma-separated floats (2 persons x 15 joints x 3 coords)."""
    path = Path(path)
    rows = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f for f in line.split(",")]
            if len(fields) != SBU_FIELDS_PER_ROW:
                raise ValueError(
                    f"{path}: row {lineno} has {len(fields)} fields, "
                    f"expected {SBU_FIELDS_PER_ROW}"
                )
            try:
                rows.append([float(f) for f in fields[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}: row {lineno}: {exc}") from None
    if len(rows) < 2:
        raise ValueError(f"{path}: needs at least 2 frames, found {len(rows)}")
    coords = np.array(rows, dtype=np.float64).reshape(
        len(rows), SBU_PERSONS, SBU_JOINTS, 3
    )
    return SkeletonSequence(id or path.stem, label, coords, group=group)


def write_sbu(seq: SkeletonSequence, path) -> None:
    """Write a 2-person, 15-joint sequence in the SBU row layout."""
    if seq.persons != SBU_PERSONS or seq.joints != SBU_JOINTS:
        raise ValueError(
            f"SBU layout requires {SBU_PERSONS} persons x {SBU_JOINTS} joints, "
            f"got {seq.persons} x {seq.joints}"
        )
    lines = []
    for f in range(seq.frames):
        values = seq.coords[f].reshape(-1)
        lines.append(",".join([str(f + 1)] + [f"{v:.17g}" for v in values]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_sbu_dir(root, *, group_map: dict[str, str] | None = None
                 ) -> tuple[list[SkeletonSequence], DatasetManifest]:
    """Walk an SBU-style tree ``<root>/<pair>/<action>/<take>/skeleton_pos.txt``.

    Action directory names (sorted) define the class labels; participant-pair
    directories become group tags, optionally remapped through ``group_map``
    (e.g. the published 5-group assignment).
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"SBU dataset directory not found: {root}")
    files = sorted(root.glob("*/*/*/skeleton_pos.txt"))
    if not files:
        raise ValueError(f"no skeleton_pos.txt files under {root}")
    actions = sorted({p.parent.parent.name for p in files})
    label_of = {a: i for i, a in enumerate(actions)}
    seqs = []
    for p in files:
        take = p.parent.name
        action = p.parent.parent.name
        pair = p.parent.parent.parent.name
        group = group_map.get(pair, pair) if group_map else pair
        seqs.append(
            parse_sbu(p, id=f"{pair}/{action}/{take}", label=label_of[action],
                      group=group)
        )
    manifest = manifest_from_sequences(seqs, class_names=actions)
    return seqs, manifest


def parse_jsonl(path, *, expected_joints: int | None = None,
                expected_persons: int | None = None) -> list[SkeletonSequence]:
    """Parse sequences from JSONL: one object per line with keys
    ``id``, ``label``, optional ``group`` and ``frames`` [[[x,y,z] x K] x P] x F."""
    path = Path(path)
    seqs = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                coords = np.asarray(doc["frames"], dtype=np.float64)
                seq = SkeletonSequence(
                    str(doc["id"]), int(doc["label"]), coords,
                    group=doc.get("group"),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
            if expected_joints is not None and seq.joints != expected_joints:
                raise ValueError(
                    f"{path}: line {lineno}: sequence has {seq.joints} joints, "
                    f"manifest expects {expected_joints}"
                )
            if expected_persons is not None and seq.persons != expected_persons:
                raise ValueError(
                    f"{path}: line {lineno}: sequence has {seq.persons} persons, "
                    f"manifest expects {expected_persons}"
                )
            seqs.append(seq)
    return seqs


def write_jsonl(seqs: list[SkeletonSequence], path) -> None:
    lines = []
    for s in seqs:
        doc = {"id": s.id, "label": int(s.label), "frames": s.coords.tolist()}
        if s.group is not None:
            doc["group"] = s.group
        lines.append(json.dumps(doc, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def resample(seq: SkeletonSequence, t_frames: int) -> SkeletonSequence:
    """Linearly interpolate per-joint coordinates at ``t_frames`` uniform time
    points spanning [0, F-1]; endpoints are preserved exactly."""
    if t_frames < 2:
        raise ValueError(f"resample target must be >= 2 frames, got {t_frames}")
    f = seq.frames
    if t_frames == f:
        return SkeletonSequence(seq.id, seq.label, seq.coords.copy(), group=seq.group)
    pos = np.linspace(0.0, f - 1, t_frames)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, f - 1)
    w = (pos - i0)[:, None, None, None]
    # lo + w*(hi - lo) keeps constant trajectories exactly constant
    lo = seq.coords[i0]
    coords = lo + w * (seq.coords[i1] - lo)
    return SkeletonSequence(seq.id, seq.label, coords, group=seq.group)


def random_crop(seq: SkeletonSequence, ratio: float,
                rng: np.random.Generator) -> SkeletonSequence:
    """Contiguous sub-sequence of length floor(ratio * F) at a uniformly
    random start offset."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"crop ratio must lie in (0, 1], got {ratio}")
    length = int(np.floor(ratio * seq.frames))
    if length < 2:
        raise ValueError(
            f"crop of ratio {ratio} on {seq.frames} frames leaves {length} < 2 frames"
        )
    start = int(rng.integers(0, seq.frames - length + 1))
    coords = seq.coords[start:start + length].copy()
    return SkeletonSequence(seq.id, seq.label, coords, group=seq.group)


def compute_motion(position: np.ndarray) -> np.ndarray:
    """Adjacent-frame differences along the time axis of [P, 3, T, K];
    the final frame is zero-padded."""
    position = np.asarray(position, dtype=np.float64)
    if position.ndim != 4 or position.shape[2] < 2:
        raise ValueError(
            f"position must be [P, 3, T>=2, K], got shape {position.shape}"
        )
    motion = np.zeros_like(position)
    motion[:, :, :-1] = position[:, :, 1:] - position[:, :, :-1]
    return motion


def encode_clip(seq: SkeletonSequence, t_frames: int, joints: int,
                center: bool = False) -> ClipTensors:
    """Resample to ``t_frames`` and lay the sequence out as image-like streams
    [P, 3, T, K]: coordinates become channels, frames height, joints width.

    ``center`` subtracts the first frame's person-0 joint-0 position from
    every coordinate (off by default).
    """
    if seq.joints != joints:
        raise ValueError(
            f"sequence {seq.id!r} has {seq.joints} joints, encoder expects {joints}"
        )
    resampled = resample(seq, t_frames)
    coords = resampled.coords
    if center:
        coords = coords - coords[0, 0, 0]
    position = np.ascontiguousarray(coords.transpose(1, 3, 0, 2))
    return ClipTensors(position, compute_motion(position))


def stack_clips(clips: list[ClipTensors]) -> np.ndarray:
    """Stack clips into a batch array [N, 2, P, 3, T, K], position stream at
    index 0 and motion at index 1 along axis 1."""
    if not clips:
        raise ValueError("cannot stack an empty clip list")
    shapes = {c.position.shape for c in clips}
    if len(shapes) != 1:
        raise ValueError(f"clips disagree on shape: {sorted(shapes)}")
    return np.stack([np.stack([c.position, c.motion]) for c in clips])


def encode_batch(seqs: list[SkeletonSequence], t_frames: int, joints: int,
                 center: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Encode sequences into a clip batch [N, 2, P, 3, T, K] plus labels [N]."""
    batch = stack_clips([encode_clip(s, t_frames, joints, center) for s in seqs])
    labels = np.array([s.label for s in seqs], dtype=np.intp)
    return batch, labels


# ---------------------------------------------------------------------------
# Cross-validation splits
# ---------------------------------------------------------------------------

@dataclass
class FoldSplit:
    """One fold of a k-fold partition: held-out fold index plus the shared
    id -> fold assignment map."""

    fold: int
    assignments: dict[str, int]

    @property
    def test_ids(self) -> list[str]:
        return [i for i, f in self.assignments.items() if f == self.fold]

    @property
    def train_ids(self) -> list[str]:
        return [i for i, f in self.assignments.items() if f != self.fold]


def kfold_splits(manifest: DatasetManifest, k: int, seed: int) -> list[FoldSplit]:
    """Partition the manifest into k folds.

    With group tags present, whole groups go to folds (greedy size
    balancing); otherwise assignment is stratified by class. Deterministic
    under ``seed``.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if not manifest.entries:
        raise ValueError("cannot split an empty manifest")
    rng = np.random.default_rng(seed)
    assignments: dict[str, int] = {}

    has_groups = any(e.group is not None for e in manifest.entries)
    if has_groups:
        groups: dict[str, list[str]] = {}
        for e in manifest.entries:
            groups.setdefault(e.group if e.group is not None else e.id, []).append(e.id)
        if k > len(groups):
            raise ValueError(f"k={k} exceeds the {len(groups)} available groups")
        names = sorted(groups)
        rng.shuffle(names)
        names.sort(key=lambda g: -len(groups[g]))
        sizes = [0] * k
        for g in names:
            fold = int(np.argmin(sizes))
            sizes[fold] += len(groups[g])
            for i in groups[g]:
                assignments[i] = fold
    else:
        by_class: dict[int, list[str]] = {}
        for e in manifest.entries:
            by_class.setdefault(e.label, []).append(e.id)
        cursor = 0
        for label in sorted(by_class):
            ids = sorted(by_class[label])
            rng.shuffle(ids)
            for i in ids:
                assignments[i] = cursor % k
                cursor += 1
    return [FoldSplit(f, assignments) for f in range(k)]


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

@dataclass
class SynthConfig:
    """Parametric generator: each class is a distinct family of per-joint
    sinusoidal trajectories plus Gaussian noise."""

    classes: int = 8
    sequences_per_class: int = 20
    joints: int = 15
    persons: int = 2
    frames: int = 40
    noise_sigma: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("at least 2 classes required")
        if self.frames < 2 or self.joints < 1 or self.persons < 1:
            raise ValueError("frames >= 2, joints >= 1 and persons >= 1 required")


def synth_generate(config: SynthConfig
                   ) -> tuple[list[SkeletonSequence], DatasetManifest]:
    """Deterministically generate a labeled synthetic dataset."""
    rng = np.random.default_rng(config.seed)
    p, k, f = config.persons, config.joints, config.frames

    base = rng.uniform(-1.0, 1.0, size=(p, k, 3))
    patterns = []
    for _ in range(config.classes):
        amplitude = rng.uniform(0.5, 1.5, size=(p, k, 3))
        frequency = rng.uniform(0.5, 3.0, size=(p, k, 3))
        phase = rng.uniform(0.0, 2.0 * np.pi, size=(p, k, 3))
        patterns.append((amplitude, frequency, phase))

    t = np.arange(f, dtype=np.float64)[:, None, None, None] / f
    seqs = []
    for label, (amplitude, frequency, phase) in enumerate(patterns):
        clean = base + amplitude * np.sin(2.0 * np.pi * frequency * t + phase)
        for i in range(config.sequences_per_class):
            noise = rng.normal(0.0, 1.0, size=clean.shape) * config.noise_sigma
            seqs.append(
                SkeletonSequence(f"synth-{label}-{i:03d}", label, clean + noise)
            )
    manifest = manifest_from_sequences(seqs)
    return seqs, manifest
