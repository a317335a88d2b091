"""Dataset ingestion, synthetic two-domain generation, minibatch sampling.

On-disk format: a JSON manifest naming one raw little-endian float32 signal
file per class plus how many windows to cut from it. The synthetic generator
builds class-specific line spectra (sums of sinusoids at characteristic bins)
so a measurable domain gap can be created on demand by shifting those bins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import as_generator
from .spectrum import (SPECTRUM_LEN, WINDOW_LEN, SpectrumSample, make_spectrum,
                       window_signal)


class ManifestError(ValueError):
    """Malformed manifest content."""


class ManifestFileError(ManifestError):
    """A signal file referenced by a manifest is missing or unreadable."""


class ManifestSignalError(ManifestError):
    """A referenced signal file is too short to window."""


@dataclass
class DomainDataset:
    """Immutable labeled spectrum collection from one working condition."""

    samples: list[SpectrumSample]
    num_classes: int
    name: str
    amplitudes: np.ndarray = field(init=False, repr=False)
    labels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.samples:
            raise ValueError(f"dataset {self.name!r} is empty")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        domains = {s.domain_label for s in self.samples}
        if len(domains) != 1:
            raise ValueError("all samples in a dataset must share one domain label")
        for s in self.samples:
            if not 1 <= s.class_label <= self.num_classes:
                raise ValueError(
                    f"class label {s.class_label} outside 1..{self.num_classes}")
        # stacked copies for fast batched math; samples stay the reference
        self.amplitudes = np.stack([s.amplitudes for s in self.samples])
        self.labels = np.array([s.class_label for s in self.samples], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def domain_label(self) -> int:
        return self.samples[0].domain_label


# --- manifest loading ---------------------------------------------------------

MANIFEST_FIELDS = {"version", "domain", "sample_rate", "seed", "entries"}
ENTRY_FIELDS = {"class_label", "path", "windows"}


@dataclass(frozen=True)
class ManifestEntry:
    class_label: int
    path: str
    windows: int


@dataclass(frozen=True)
class Manifest:
    version: int
    domain: str
    sample_rate: float
    seed: int
    entries: tuple[ManifestEntry, ...]


def parse_manifest(obj: dict, source: str = "<manifest>") -> Manifest:
    """Validate a decoded manifest dict; unknown fields are rejected."""
    if not isinstance(obj, dict):
        raise ManifestError(f"{source}: manifest must be a JSON object")
    unknown = set(obj) - MANIFEST_FIELDS
    if unknown:
        raise ManifestError(f"{source}: unknown manifest fields {sorted(unknown)}")
    missing = MANIFEST_FIELDS - set(obj)
    if missing:
        raise ManifestError(f"{source}: missing manifest fields {sorted(missing)}")
    entries = []
    for i, raw in enumerate(obj["entries"]):
        if not isinstance(raw, dict) or set(raw) != ENTRY_FIELDS:
            raise ManifestError(
                f"{source}: entry {i} must have exactly fields {sorted(ENTRY_FIELDS)}")
        entries.append(ManifestEntry(int(raw["class_label"]), str(raw["path"]),
                                     int(raw["windows"])))
    if not entries:
        raise ManifestError(f"{source}: manifest has no entries")
    labels = sorted({e.class_label for e in entries})
    if labels != list(range(1, len(labels) + 1)):
        raise ManifestError(
            f"{source}: class labels must cover a contiguous 1..K, got {labels}")
    for e in entries:
        if e.windows < 1:
            raise ManifestError(
                f"{source}: entry for class {e.class_label} has windows < 1")
    return Manifest(int(obj["version"]), str(obj["domain"]),
                    float(obj["sample_rate"]), int(obj["seed"]), tuple(entries))


def read_signal_file(path: Path) -> np.ndarray:
    """Raw little-endian float32 samples, converted to float64."""
    if not path.is_file():
        raise ManifestFileError(f"signal file not found: {path}")
    raw = np.fromfile(path, dtype="<f4")
    return raw.astype(np.float64)


def load_domain(manifest_path, domain_label: int = 0) -> DomainDataset:
    """Windows and spectra for every manifest entry, deterministically.

    Each entry's windows are cut with a child stream of the manifest seed, so
    reloading the same manifest reproduces the dataset bit for bit.
    """
    manifest_path = Path(manifest_path)
    try:
        obj = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ManifestFileError(f"manifest not found: {manifest_path}")
    except json.JSONDecodeError as e:
        raise ManifestError(f"{manifest_path}: invalid JSON ({e})")
    manifest = parse_manifest(obj, source=str(manifest_path))

    base = manifest_path.parent
    seeds = np.random.SeedSequence(manifest.seed).spawn(len(manifest.entries))
    samples: list[SpectrumSample] = []
    for entry, entry_seed in zip(manifest.entries, seeds):
        signal = read_signal_file(base / entry.path)
        if signal.shape[0] < WINDOW_LEN:
            raise ManifestSignalError(
                f"{entry.path}: {signal.shape[0]} samples, need >= {WINDOW_LEN}")
        for window in window_signal(signal, entry.windows, entry_seed):
            samples.append(make_spectrum(window, entry.class_label, domain_label))
    k = max(e.class_label for e in manifest.entries)
    return DomainDataset(samples, k, manifest.domain)


# --- synthetic domains --------------------------------------------------------

@dataclass(frozen=True)
class ClassSignature:
    """Characteristic spectrum of one fault class: bins and relative weights."""

    bins: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.bins) != len(self.weights) or not self.bins:
            raise ValueError("bins and weights must be equal-length and non-empty")


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings for one synthetic domain.

    `domain_shift` displaces every characteristic bin, `amplitude_scale`
    scales the sinusoids against the fixed-variance noise floor; together
    they emulate a change of operating condition.
    """

    classes: tuple[ClassSignature, ...]
    domain_shift: int = 0
    amplitude_scale: float = 1.0
    noise_sigma: float = 0.0
    samples_per_class: int = 100
    seed: int = 0

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def __post_init__(self):
        if not self.classes:
            raise ValueError("at least one class signature required")
        if self.amplitude_scale <= 0:
            raise ValueError("amplitude_scale must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be positive")
        for c, sig in enumerate(self.classes, start=1):
            for b in sig.bins:
                if not 0 <= b + self.domain_shift < SPECTRUM_LEN:
                    raise ValueError(
                        f"class {c}: shifted bin {b + self.domain_shift} "
                        f"outside [0, {SPECTRUM_LEN - 1}]")


def default_class_signatures(k: int) -> tuple[ClassSignature, ...]:
    """Well-separated three-line signatures for k classes."""
    if not 1 <= k <= 10:
        raise ValueError("default signatures support 1..10 classes")
    sigs = []
    for c in range(k):
        base = 64 + 128 * c
        sigs.append(ClassSignature((base, base + 640, base + 200),
                                   (1.0, 0.55, 0.3)))
    return tuple(sigs)


def synth_config_from_dict(obj: dict) -> SynthConfig:
    """Decode the JSON mirror of SynthConfig."""
    known = {"classes", "domain_shift", "amplitude_scale", "noise_sigma",
             "samples_per_class", "seed"}
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"unknown synthetic-config fields {sorted(unknown)}")
    raw_classes = obj.get("classes")
    if isinstance(raw_classes, int):
        classes = default_class_signatures(raw_classes)
    else:
        classes = tuple(
            ClassSignature(tuple(int(b) for b in c["bins"]),
                           tuple(float(w) for w in c["weights"]))
            for c in raw_classes)
    return SynthConfig(
        classes=classes,
        domain_shift=int(obj.get("domain_shift", 0)),
        amplitude_scale=float(obj.get("amplitude_scale", 1.0)),
        noise_sigma=float(obj.get("noise_sigma", 0.0)),
        samples_per_class=int(obj.get("samples_per_class", 100)),
        seed=int(obj.get("seed", 0)),
    )


def synth_signal(sig: ClassSignature, cfg: SynthConfig,
                 rng: np.random.Generator, length: int = WINDOW_LEN) -> np.ndarray:
    """One time-domain realization of a class signature under cfg."""
    n = np.arange(length)
    x = np.zeros(length)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(sig.bins))
    for b, w, ph in zip(sig.bins, sig.weights, phases):
        freq = b + cfg.domain_shift
        x += cfg.amplitude_scale * w * np.cos(2.0 * np.pi * freq * n / WINDOW_LEN + ph)
    if cfg.noise_sigma > 0:
        x += rng.normal(0.0, cfg.noise_sigma, size=length)
    return x


def synth_domain(cfg: SynthConfig, domain_label: int = 0) -> DomainDataset:
    """Synthesize a labeled domain dataset from class signatures.

    The domain label only tags the samples; the spectral content is a pure
    function of the config, so two calls differing in domain_label alone
    yield identical amplitude arrays.
    """
    rng = as_generator(np.random.SeedSequence(cfg.seed))
    samples = []
    for c, sig in enumerate(cfg.classes, start=1):
        for _ in range(cfg.samples_per_class):
            window = synth_signal(sig, cfg, rng)
            samples.append(make_spectrum(window, c, domain_label))
    name = f"synth(shift={cfg.domain_shift},scale={cfg.amplitude_scale}," \
           f"sigma={cfg.noise_sigma},seed={cfg.seed})"
    return DomainDataset(samples, cfg.num_classes, name)


# --- minibatch sampling ---------------------------------------------------------

def draw_indices(dataset: DomainDataset, m: int, rng: np.random.Generator) -> np.ndarray:
    """m indices drawn uniformly with replacement."""
    if m < 1:
        raise ValueError(f"batch size must be positive, got {m}")
    return rng.integers(0, len(dataset), size=m)


def sample_minibatch(dataset: DomainDataset, m: int,
                     rng: np.random.Generator) -> list[SpectrumSample]:
    """m samples drawn uniformly with replacement from the seeded stream."""
    return [dataset.samples[i] for i in draw_indices(dataset, m, rng)]
