"""The four network components and their wiring.

A `FeatureExtractor` maps a 2048-bin spectrum to a 10-dimensional feature
vector through five conv+pool blocks and two dense layers (wide first kernel,
small later ones). A `Discriminator` is a three-layer MLP on those features.
`TiedPair` couples a frozen source extractor with a target extractor whose
trailing parameter groups are untied for adaptation while the leading groups
share storage with the source.

Model file layout (stable; version field guards it):

    bytes 0..7    little-endian uint64, header length H
    bytes 8..8+H  UTF-8 JSON header: format_version, kind, layer specs,
                  untie_count, phase, array shapes in payload order
    rest          little-endian float32 parameter arrays, concatenated in
                  layer order, weights before biases

Parameters are float64 in memory; serialization quantizes to float32.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .rng import as_generator
from .spectrum import SPECTRUM_LEN, SpectrumSample

NUM_CLASSES = 10
FEATURE_DIM = NUM_CLASSES
_FORWARD_CHUNK = 128  # rows per batched forward pass in whole-dataset sweeps


class LayerStack:
    """An ordered list of layer specs with their parameters."""

    def __init__(self, specs, params):
        specs = tuple(specs)
        params = list(params)
        if len(specs) != len(params):
            raise ValueError("specs and params length mismatch")
        self.specs = specs
        self.params = params
        self.group_layers = tuple(i for i, s in enumerate(specs) if s.has_params)

    @property
    def num_groups(self) -> int:
        return len(self.group_layers)

    def group_params(self, group: int) -> nn.LayerParams:
        return self.params[self.group_layers[group]]

    def arrays(self, groups=None) -> list[np.ndarray]:
        """Flat parameter arrays (weights, biases per group) in group order."""
        if groups is None:
            groups = range(self.num_groups)
        out: list[np.ndarray] = []
        for g in groups:
            out.extend(self.params[self.group_layers[g]].arrays())
        return out


class FeatureExtractor(LayerStack):
    """Seven parameter groups: five conv blocks, then two dense layers."""


class Discriminator(LayerStack):
    """Dense 10 -> 500 -> 500 -> 1 domain classifier emitting a raw logit."""


def extractor_specs() -> tuple[nn.LayerSpec, ...]:
    """The fixed layer chain for 2048 x 1 inputs and 10 output logits."""
    blocks = [
        (32, 2, 1, 8),    # wide first kernel suppresses high-frequency noise
        (16, 2, 8, 16),
        (8, 2, 16, 32),
        (8, 2, 32, 32),
        (3, 2, 32, 64),
    ]
    specs: list[nn.LayerSpec] = []
    for kernel, stride, c_in, c_out in blocks:
        specs.append(nn.conv1d(kernel, stride, c_in, c_out))
        specs.append(nn.relu())
        specs.append(nn.maxpool1d(2, 2, c_out))
    specs.append(nn.dense(64, 500))
    specs.append(nn.relu())
    specs.append(nn.dense(500, NUM_CLASSES))
    return tuple(specs)


def discriminator_specs(in_dim: int = FEATURE_DIM,
                        hidden: tuple[int, int] = (500, 500)) -> tuple[nn.LayerSpec, ...]:
    return (
        nn.dense(in_dim, hidden[0]),
        nn.relu(),
        nn.dense(hidden[0], hidden[1]),
        nn.relu(),
        nn.dense(hidden[1], 1),
    )


def _init_stack(specs, seed) -> list[nn.LayerParams]:
    rng = as_generator(seed)
    return [nn.init_params(s, rng) for s in specs]


def build_extractor(seed) -> FeatureExtractor:
    """Fresh extractor; `seed` may be an int or a numpy Generator."""
    specs = extractor_specs()
    return FeatureExtractor(specs, _init_stack(specs, seed))


def build_discriminator(seed, in_dim: int = FEATURE_DIM,
                        hidden: tuple[int, int] = (500, 500)) -> Discriminator:
    specs = discriminator_specs(in_dim, hidden)
    return Discriminator(specs, _init_stack(specs, seed))


# --- forward / backward over stacks -------------------------------------------

def stack_forward(stack: LayerStack, x: np.ndarray, want_caches: bool = False):
    """Run the whole stack; returns (output, caches or None)."""
    h = x
    caches = [] if want_caches else None
    for spec, params in zip(stack.specs, stack.params):
        h, cache = nn.layer_forward(spec, params, h)
        if want_caches:
            caches.append(cache)
    return h, caches


def stack_backward(stack: LayerStack, caches, upstream: np.ndarray,
                   need_groups=None, need_input_grad: bool = False):
    """Backpropagate through the stack from its output gradient.

    `need_groups` selects the parameter groups whose gradients are wanted
    (default all); propagation stops as soon as nothing further down is
    needed. Returns (grads dict group -> GradientBundle, input_grad or None).
    """
    if need_groups is None:
        need_groups = range(stack.num_groups)
    need_layers = {stack.group_layers[g] for g in need_groups}
    lowest = min(need_layers) if need_layers else len(stack.specs)
    grads: dict[int, nn.GradientBundle] = {}
    layer_to_group = {li: g for g, li in enumerate(stack.group_layers)}

    g_up = upstream
    input_grad = None
    for i in range(len(stack.specs) - 1, -1, -1):
        if i < lowest and not need_input_grad:
            break
        descend = need_input_grad or i > lowest
        dx, pg = nn.layer_backward(stack.specs[i], stack.params[i], caches[i],
                                   g_up, need_input_grad=descend)
        if i in need_layers:
            grads[layer_to_group[i]] = pg
        if not descend:
            break
        g_up = dx
        if i == 0:
            input_grad = g_up
    return grads, input_grad


def grads_to_arrays(stack: LayerStack, grads: dict, groups=None) -> list[np.ndarray]:
    """Gradient arrays ordered to match stack.arrays(groups)."""
    if groups is None:
        groups = range(stack.num_groups)
    out: list[np.ndarray] = []
    for g in groups:
        out.extend(grads[g].arrays())
    return out


# --- feature extraction and prediction ----------------------------------------

def _amplitude_matrix(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        a = np.asarray(samples, dtype=np.float64)
        return a[None, :] if a.ndim == 1 else a
    return np.stack([s.amplitudes for s in samples])


def extract_features(extractor: FeatureExtractor, sample) -> np.ndarray:
    """10-dimensional feature vector (raw logits) for one spectrum sample."""
    a = sample.amplitudes if isinstance(sample, SpectrumSample) else np.asarray(sample)
    if a.shape != (SPECTRUM_LEN,):
        raise ValueError(f"expected {SPECTRUM_LEN} amplitudes, got shape {a.shape}")
    y, _ = stack_forward(extractor, a.reshape(SPECTRUM_LEN, 1))
    return y.reshape(-1)


def extract_features_batch(extractor: FeatureExtractor, samples) -> np.ndarray:
    """Feature matrix (n, 10) for stacked amplitudes or sample lists."""
    amps = _amplitude_matrix(samples)
    outs = []
    for start in range(0, amps.shape[0], _FORWARD_CHUNK):
        chunk = amps[start:start + _FORWARD_CHUNK]
        y, _ = stack_forward(extractor, chunk[..., None])
        outs.append(y.reshape(chunk.shape[0], -1))
    return np.concatenate(outs, axis=0)


def predict_label(extractor: FeatureExtractor, sample) -> tuple[int, np.ndarray]:
    """(1-based class, posterior vector); ties break to the lowest index."""
    posterior = nn.softmax(extract_features(extractor, sample))
    return int(np.argmax(posterior)) + 1, posterior


def predict_batch(extractor: FeatureExtractor, samples) -> tuple[np.ndarray, np.ndarray]:
    """(labels (n,), posteriors (n, K)) over stacked amplitudes or samples."""
    features = extract_features_batch(extractor, samples)
    posteriors = nn.softmax(features, axis=-1)
    return np.argmax(posteriors, axis=-1) + 1, posteriors


# --- partial tying --------------------------------------------------------------

@dataclass
class TiedPair:
    """Source/target extractors sharing their leading parameter groups.

    The first (num_groups - untie_count) groups are the same LayerParams
    objects in both stacks; the trailing untie_count groups of the target are
    independent copies.
    """

    source: FeatureExtractor
    target: FeatureExtractor
    untie_count: int

    @property
    def tied_groups(self) -> range:
        return range(self.source.num_groups - self.untie_count)

    @property
    def untied_groups(self) -> range:
        return range(self.source.num_groups - self.untie_count,
                     self.source.num_groups)


def init_target_from_source(source: FeatureExtractor, untie_count: int) -> TiedPair:
    """Clone the trailing `untie_count` groups; share the rest by storage."""
    if not 1 <= untie_count <= source.num_groups:
        raise ValueError(
            f"untie count must be in 1..{source.num_groups}, got {untie_count}")
    first_untied_layer = source.group_layers[source.num_groups - untie_count]
    params: list[nn.LayerParams] = []
    for i, p in enumerate(source.params):
        if not source.specs[i].has_params:
            params.append(nn.LayerParams())
        elif i < first_untied_layer:
            params.append(p)          # shared storage
        else:
            params.append(p.copy())   # independently trainable
    return TiedPair(source, FeatureExtractor(source.specs, params), untie_count)


# --- discriminator passes --------------------------------------------------------

def discriminator_forward(disc: Discriminator, feature: np.ndarray):
    """(raw logit, caches) for one feature vector."""
    f = np.asarray(feature, dtype=np.float64)
    in_dim = disc.specs[0].in_dim
    if f.shape != (in_dim,):
        raise ValueError(f"expected a feature vector of length {in_dim}, got {f.shape}")
    y, caches = stack_forward(disc, f.reshape(in_dim, 1), want_caches=True)
    return float(y.reshape(())), caches


def discriminator_forward_batch(disc: Discriminator, features: np.ndarray,
                                want_caches: bool = False):
    """(logits (n,), caches) for a feature matrix."""
    f = np.asarray(features, dtype=np.float64)
    y, caches = stack_forward(disc, f[..., None], want_caches=want_caches)
    return y.reshape(f.shape[0]), caches


def discriminator_input_grad(disc: Discriminator, caches,
                             dlogits: np.ndarray) -> np.ndarray:
    """Gradient of the loss in the discriminator's input features."""
    upstream = np.asarray(dlogits, dtype=np.float64).reshape(-1, 1, 1)
    _, input_grad = stack_backward(disc, caches, upstream, need_groups=(),
                                   need_input_grad=True)
    return input_grad.reshape(upstream.shape[0], -1)


# --- serialization ----------------------------------------------------------------

FORMAT_VERSION = 1

_KIND_FACTORIES = {
    "conv1d": lambda d: nn.conv1d(d["kernel"], d["stride"],
                                  d["in_channels"], d["out_channels"]),
    "maxpool1d": lambda d: nn.maxpool1d(d["kernel"], d["stride"], d["channels"]),
    "relu": lambda d: nn.relu(),
    "dense": lambda d: nn.dense(d["in_dim"], d["out_dim"]),
}


def _spec_to_dict(spec: nn.LayerSpec) -> dict:
    k = spec.kind
    if k is nn.LayerKind.CONV1D:
        return {"kind": "conv1d", "kernel": spec.kernel, "stride": spec.stride,
                "in_channels": spec.in_channels, "out_channels": spec.out_channels}
    if k is nn.LayerKind.MAXPOOL1D:
        return {"kind": "maxpool1d", "kernel": spec.kernel, "stride": spec.stride,
                "channels": spec.in_channels}
    if k is nn.LayerKind.RELU:
        return {"kind": "relu"}
    return {"kind": "dense", "in_dim": spec.in_dim, "out_dim": spec.out_dim}


def save_model(path, extractor: FeatureExtractor, untie_count: int | None = None,
               phase: str = "pretrained") -> None:
    """Write the extractor to the versioned binary model format."""
    arrays = extractor.arrays()
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "feature_extractor",
        "layers": [_spec_to_dict(s) for s in extractor.specs],
        "untie_count": untie_count,
        "phase": phase,
        "array_shapes": [list(a.shape) for a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_model(path) -> tuple[FeatureExtractor, dict]:
    """Read a model file back; returns (extractor, metadata)."""
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValueError(f"{path}: not a model file (truncated)")
    (hlen,) = struct.unpack("<Q", raw[:8])
    if len(raw) < 8 + hlen:
        raise ValueError(f"{path}: truncated model header")
    header = json.loads(raw[8:8 + hlen].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported format version {header.get('format_version')!r}")
    specs = tuple(_KIND_FACTORIES[d["kind"]](d) for d in header["layers"])

    shapes = [tuple(s) for s in header["array_shapes"]]
    payload = raw[8 + hlen:]
    expected = sum(int(np.prod(s)) for s in shapes) * 4
    if len(payload) != expected:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, expected {expected}")

    params: list[nn.LayerParams] = []
    offset = 0
    it = iter(shapes)
    for spec in specs:
        if not spec.has_params:
            params.append(nn.LayerParams())
            continue
        w_shape, b_shape = next(it), next(it)
        expected_shapes = nn.param_shapes(spec)
        if (w_shape, b_shape) != expected_shapes:
            raise ValueError(f"{path}: array shapes {w_shape}/{b_shape} do not "
                             f"match layer spec {expected_shapes}")
        n_w = int(np.prod(w_shape))
        n_b = int(np.prod(b_shape))
        w = np.frombuffer(payload, dtype="<f4", count=n_w,
                          offset=offset).astype(np.float64).reshape(w_shape)
        offset += n_w * 4
        b = np.frombuffer(payload, dtype="<f4", count=n_b,
                          offset=offset).astype(np.float64).reshape(b_shape)
        offset += n_b * 4
        params.append(nn.LayerParams(w, b))
    meta = {"untie_count": header.get("untie_count"), "phase": header.get("phase")}
    return FeatureExtractor(specs, params), meta
