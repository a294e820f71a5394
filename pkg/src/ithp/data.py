"""Multimodal embedding datasets, fold splits and a planted-signal generator.

A manifest is a UTF-8 JSON file; relative paths resolve against its folder::

    {
      "name": "mustard",
      "sample_count": 690,
      "modalities": [
        {"id": "video", "dim": 2048, "file": "video.f32", "dtype": "float32"},
        {"id": "text",  "dim": 768,  "file": "text.csv",  "dtype": "csv"},
        {"id": "audio", "dim": 283,  "file": "audio.f32", "dtype": "float32",
         "kind": "continuous"}
      ],
      "labels": {"file": "labels.txt", "kind": "binary"}
    }

Modalities are listed prime-first. ``float32`` files are header-less
little-endian row-major arrays; ``csv`` files hold one sample per line.
Label files hold one value per line.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

DTYPES = ("float32", "csv")
LABEL_KINDS = ("binary", "real")


class DataError(ValueError):
    pass


@dataclass
class ModalitySpec:
    id: str
    dim: int
    file: str
    dtype: str = "float32"
    kind: str = "continuous"


@dataclass
class DatasetManifest:
    name: str
    modalities: list[ModalitySpec]
    label_file: str
    label_kind: str
    sample_count: int

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        raw = json.loads(text)
        try:
            mods = [ModalitySpec(**m) for m in raw["modalities"]]
            manifest = cls(
                name=raw.get("name", "dataset"),
                modalities=mods,
                label_file=raw["labels"]["file"],
                label_kind=raw["labels"].get("kind", "binary"),
                sample_count=int(raw["sample_count"]),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed manifest: {exc}") from exc
        for m in mods:
            if m.dim < 1:
                raise DataError(f"modality {m.id}: dim must be positive")
            if m.dtype not in DTYPES:
                raise DataError(f"modality {m.id}: dtype must be one of {DTYPES}")
        if manifest.label_kind not in LABEL_KINDS:
            raise DataError(f"label kind must be one of {LABEL_KINDS}")
        return manifest

    def to_json(self) -> str:
        return json.dumps(
            {
                "name": self.name,
                "sample_count": self.sample_count,
                "modalities": [asdict(m) for m in self.modalities],
                "labels": {"file": self.label_file, "kind": self.label_kind},
            },
            indent=2,
        )


@dataclass
class Dataset:
    modalities: list[np.ndarray]
    labels: np.ndarray
    ids: list[str] = field(default_factory=list)
    label_kind: str = "binary"
    detector_kinds: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.modalities = [np.asarray(m, dtype=np.float64) for m in self.modalities]
        self.labels = np.asarray(self.labels, dtype=np.float64).ravel()
        if not self.ids:
            self.ids = [f"m{i}" for i in range(len(self.modalities))]
        if not self.detector_kinds:
            self.detector_kinds = ["continuous"] * max(len(self.modalities) - 1, 0)
        n = self.labels.size
        for mid, m in zip(self.ids, self.modalities):
            if m.ndim != 2 or m.shape[0] != n:
                raise DataError(f"modality {mid} has shape {m.shape}, expected ({n}, d)")
        if not np.all(np.isfinite(self.labels)):
            raise DataError("labels contain non-finite values")
        if self.label_kind == "binary" and not np.isin(self.labels, (0.0, 1.0)).all():
            raise DataError("binary labels must be 0 or 1")

    def __len__(self):
        return self.labels.size

    @property
    def dims(self) -> list[int]:
        return [m.shape[1] for m in self.modalities]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            [m[idx] for m in self.modalities], self.labels[idx],
            list(self.ids), self.label_kind, list(self.detector_kinds),
        )

    def select(self, order) -> "Dataset":
        """Reorder (or restrict) modalities by position."""
        order = list(order)
        return Dataset(
            [self.modalities[i] for i in order], self.labels, [self.ids[i] for i in order],
            self.label_kind,
        )


# file io


def _read_matrix(path: Path, spec: ModalitySpec, n: int) -> np.ndarray:
    if not path.exists():
        raise DataError(f"missing modality file {path}")
    if spec.dtype == "float32":
        raw = np.fromfile(path, dtype="<f4")
        if raw.size != n * spec.dim:
            raise DataError(f"{path}: {raw.size} values, expected {n} x {spec.dim}")
        mat = raw.reshape(n, spec.dim).astype(np.float64)
    else:
        rows = [line for line in path.read_text().splitlines() if line.strip()]
        if len(rows) != n:
            raise DataError(f"{path}: {len(rows)} rows, expected {n}")
        mat = np.empty((n, spec.dim))
        for i, line in enumerate(rows):
            try:
                vals = [float(v) for v in line.split(",")]
            except ValueError as exc:
                raise DataError(f"{path}: row {i}: {exc}") from exc
            if len(vals) != spec.dim:
                raise DataError(f"{path}: row {i} has {len(vals)} columns, expected {spec.dim}")
            mat[i] = vals
    bad = np.nonzero(~np.isfinite(mat).all(axis=1))[0]
    if bad.size:
        raise DataError(f"{path}: non-finite value in row {int(bad[0])}")
    return mat


def load_dataset(manifest_path) -> Dataset:
    manifest_path = Path(manifest_path)
    manifest = DatasetManifest.from_json(manifest_path.read_text(encoding="utf-8"))
    root = manifest_path.parent
    n = manifest.sample_count
    mats = [_read_matrix(root / m.file, m, n) for m in manifest.modalities]
    label_path = root / manifest.label_file
    if not label_path.exists():
        raise DataError(f"missing label file {label_path}")
    lines = [line for line in label_path.read_text().splitlines() if line.strip()]
    if len(lines) != n:
        raise DataError(f"{label_path}: {len(lines)} labels, expected {n}")
    labels = np.array([float(v) for v in lines])
    bad = np.nonzero(~np.isfinite(labels))[0]
    if bad.size:
        raise DataError(f"{label_path}: non-finite label in row {int(bad[0])}")
    return Dataset(
        mats, labels, [m.id for m in manifest.modalities], manifest.label_kind,
        [m.kind for m in manifest.modalities[1:]],
    )


def write_dataset(ds: Dataset, out_dir, name: str = "dataset", dtype: str = "float32") -> Path:
    """Write ``ds`` as manifest + files under ``out_dir``; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = []
    kinds = ["continuous", *ds.detector_kinds]
    for mid, mat, kind in zip(ds.ids, ds.modalities, kinds):
        if dtype == "float32":
            fname = f"{mid}.f32"
            mat.astype("<f4").tofile(out_dir / fname)
        else:
            fname = f"{mid}.csv"
            np.savetxt(out_dir / fname, mat, delimiter=",", fmt="%.17g")
        specs.append(ModalitySpec(mid, mat.shape[1], fname, dtype, kind))
    fmt = "%d" if ds.label_kind == "binary" else "%.17g"
    np.savetxt(out_dir / "labels.txt", ds.labels, fmt=fmt)
    manifest = DatasetManifest(name, specs, "labels.txt", ds.label_kind, len(ds))
    path = out_dir / "manifest.json"
    path.write_text(manifest.to_json(), encoding="utf-8")
    return path


# splits


def kfold(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle then contiguous chunks; the first ``n % k`` folds get one extra."""
    if k < 2:
        raise DataError("k must be at least 2")
    if n < k:
        raise DataError(f"cannot split {n} samples into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    bounds = np.cumsum([0, *sizes])
    return [np.sort(perm[bounds[i] : bounds[i + 1]]) for i in range(k)]


def train_test_split(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    n_test = max(1, int(round(n * test_fraction)))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


# synthetic benchmark


@dataclass
class SynthSpec:
    """Planted-signal generator settings.

    A binary label picks the sign of a ``signal_dim``-dimensional class
    centre. Each modality embeds the noisy signal through its own random
    mixing and adds isotropic noise plus a modality-specific, label-free
    distractor living in a random ``nuisance_dims`` subspace and scaled by
    ``nuisance_scales[i]`` (relative to ``noise``). The signal gain falls by
    ``snr_decay`` per modality index. Every column is standardised.
    ``label_flip`` corrupts that share of the observed labels.
    """

    n: int = 2000
    dims: list[int] = field(default_factory=lambda: [32, 16, 8])
    signal_dim: int = 4
    signal_strength: float = 1.0
    noise: float = 1.0
    snr_decay: float = 0.7
    nuisance_dims: int = 0
    nuisance_scales: list[float] = field(default_factory=list)  # empty: no distractors
    label_flip: float = 0.0
    test_fraction: float = 0.2
    seed: int = 0
    # suggested ITHPConfig / TrainConfig overrides for runs on this data
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def default_synth_spec() -> SynthSpec:
    text = resources.files("ithp").joinpath("synth_default.json").read_text(encoding="utf-8")
    return SynthSpec.from_dict(json.loads(text))


def resolve_synth(arg: str) -> SynthSpec:
    """``"default"`` or a path to a JSON file of :class:`SynthSpec` fields."""
    if arg == "default":
        return default_synth_spec()
    return SynthSpec.from_dict(json.loads(Path(arg).read_text(encoding="utf-8")))


def synth_make(spec: SynthSpec) -> Dataset:
    if any(d < 1 for d in spec.dims):
        raise DataError(f"dims must be positive: {spec.dims}")
    scales = spec.nuisance_scales or [0.0] * len(spec.dims)
    if len(scales) != len(spec.dims):
        raise DataError("nuisance_scales needs one entry per modality")
    rng = np.random.default_rng(spec.seed)
    n, k = spec.n, spec.signal_dim
    y = rng.integers(0, 2, size=n).astype(np.float64)
    centre = rng.standard_normal(k)
    centre /= np.linalg.norm(centre)
    signal = spec.signal_strength * np.outer(2.0 * y - 1.0, centre) + spec.noise * rng.standard_normal((n, k))
    mods = []
    for i, d in enumerate(spec.dims):
        gain = spec.snr_decay**i
        mix = rng.standard_normal((k, d)) / np.sqrt(k)
        x = gain * signal @ mix + spec.noise * rng.standard_normal((n, d))
        q = min(spec.nuisance_dims, d)
        if q and scales[i]:
            basis = rng.standard_normal((q, d)) / np.sqrt(q)
            x += spec.noise * scales[i] * rng.standard_normal((n, q)) @ basis
        sd = x.std(axis=0)
        mods.append((x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0))
    flips = rng.random(n) < spec.label_flip
    y_obs = np.where(flips, 1.0 - y, y)
    return Dataset(mods, y_obs, [f"m{i}" for i in range(len(spec.dims))], "binary")
