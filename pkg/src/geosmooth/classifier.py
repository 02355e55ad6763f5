"""Pluggable base classifiers and dataset ingestion.

Three interchangeable backends sit behind one batch interface: a dense MLP
evaluated in-process, a nearest-centroid model, and an external child process
speaking line-delimited JSON over stdin/stdout.  All backends are
deterministic; batch evaluation equals elementwise evaluation, and argmax
ties break toward the lowest class index.
"""

from __future__ import annotations

import gzip
import json
import select
import shlex
import subprocess
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .errors import BackendError, DomainError, FormatError
from .geometry import GridGeometry
from .imageops import Image

_ACTIVATIONS = ("relu", "none")


@dataclass(frozen=True)
class MlpLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str


@dataclass(frozen=True)
class MlpWeights:
    layers: tuple
    num_classes: int

    def __post_init__(self):
        if not self.layers:
            raise FormatError("model needs at least one layer", "layers")
        prev = None
        for i, layer in enumerate(self.layers):
            w, b = layer.weights, layer.bias
            loc = f"layers[{i}]"
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise FormatError("weights/bias shapes disagree", loc)
            if prev is not None and w.shape[1] != prev:
                raise FormatError(
                    f"input width {w.shape[1]} != previous output {prev}", loc
                )
            if layer.activation not in _ACTIVATIONS:
                raise FormatError(f"unknown activation {layer.activation!r}", loc)
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise FormatError("non-finite parameter", loc)
            prev = w.shape[0]
        if prev != self.num_classes:
            raise FormatError(
                f"final width {prev} != num_classes {self.num_classes}", "layers[-1]"
            )


def load_mlp_weights(path) -> MlpWeights:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e}", str(path)) from e
    if not isinstance(doc, dict) or "layers" not in doc or "num_classes" not in doc:
        raise FormatError("expected object with 'layers' and 'num_classes'", "$")
    layers = []
    for i, entry in enumerate(doc["layers"]):
        loc = f"$.layers[{i}]"
        if not isinstance(entry, dict):
            raise FormatError("layer must be an object", loc)
        for key in ("weights", "bias", "activation"):
            if key not in entry:
                raise FormatError(f"missing {key!r}", loc)
        try:
            w = np.asarray(entry["weights"], dtype=np.float64)
            b = np.asarray(entry["bias"], dtype=np.float64)
        except ValueError as e:
            raise FormatError(f"ragged array: {e}", loc) from e
        layers.append(MlpLayer(w, b, entry["activation"]))
    try:
        return MlpWeights(tuple(layers), int(doc["num_classes"]))
    except FormatError as e:
        raise FormatError(e.message, f"$.{e.location}") from e


def save_mlp_weights(path, model: MlpWeights):
    doc = {
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in model.layers
        ],
        "num_classes": model.num_classes,
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def _stack(batch) -> np.ndarray:
    arrs = [b.pixels if isinstance(b, Image) else np.asarray(b) for b in batch]
    return np.stack(arrs).astype(np.float64)


class ClassifierHandle:
    """Shared surface: deterministic labels, optional logits."""

    backend = "abstract"
    num_classes: int
    input_shape: GridGeometry

    def logits_batch(self, images: np.ndarray):
        raise NotImplementedError

    def classify_batch(self, batch) -> np.ndarray:
        images = batch if isinstance(batch, np.ndarray) else _stack(batch)
        logits = self.logits_batch(images)
        return np.argmax(logits, axis=1).astype(np.int64)

    def close(self):
        pass


class MlpClassifier(ClassifierHandle):
    backend = "mlp"

    def __init__(self, model: MlpWeights, input_shape: GridGeometry):
        d = input_shape.channels * input_shape.height * input_shape.width
        if model.layers[0].weights.shape[1] != d:
            raise FormatError(
                f"first layer expects {model.layers[0].weights.shape[1]} inputs, "
                f"images have {d}",
                "layers[0]",
            )
        self.model = model
        self.num_classes = model.num_classes
        self.input_shape = input_shape

    def logits_batch(self, images: np.ndarray) -> np.ndarray:
        x = images.reshape(images.shape[0], -1)
        for layer in self.model.layers:
            x = x @ layer.weights.T + layer.bias
            if layer.activation == "relu":
                x = np.maximum(x, 0.0)
        return x


class CentroidClassifier(ClassifierHandle):
    """Nearest centroid; logits are negated squared distances."""

    backend = "centroid"

    def __init__(self, prototypes: np.ndarray, input_shape: GridGeometry):
        protos = np.asarray(prototypes, dtype=np.float64)
        d = input_shape.channels * input_shape.height * input_shape.width
        if protos.ndim != 2 or protos.shape[1] != d:
            raise FormatError(
                f"expected (K, {d}) prototypes, got {protos.shape}", "prototypes"
            )
        self.prototypes = protos
        self.num_classes = protos.shape[0]
        self.input_shape = input_shape

    def logits_batch(self, images: np.ndarray) -> np.ndarray:
        x = images.reshape(images.shape[0], -1)
        d2 = (
            np.sum(x * x, axis=1, keepdims=True)
            - 2.0 * x @ self.prototypes.T
            + np.sum(self.prototypes * self.prototypes, axis=1)
        )
        return -d2


def fit_centroid(data: Dataset, num_classes: int | None = None) -> np.ndarray:
    k = num_classes if num_classes is not None else data.num_classes
    d = int(np.prod(data.images.shape[1:]))
    protos = np.zeros((k, d))
    for c in range(k):
        members = data.images[data.labels == c]
        if members.shape[0] == 0:
            raise DomainError(f"class {c} has no training samples")
        protos[c] = members.reshape(members.shape[0], -1).mean(axis=0)
    return protos


def save_centroid(path, prototypes: np.ndarray, input_shape: GridGeometry):
    doc = {
        "shape": [input_shape.channels, input_shape.height, input_shape.width],
        "prototypes": np.asarray(prototypes).tolist(),
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_centroid(path) -> CentroidClassifier:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e}", str(path)) from e
    if "shape" not in doc or "prototypes" not in doc:
        raise FormatError("expected 'shape' and 'prototypes'", "$")
    c, h, w = (int(v) for v in doc["shape"])
    return CentroidClassifier(np.asarray(doc["prototypes"]), GridGeometry(w, h, c))


class ExternalClassifier(ClassifierHandle):
    """Child process behind the line-delimited JSON protocol.

    Request:  {"id": n, "shape": [h, w, c], "images": [[row-major floats]]}
    Response: {"id": n, "labels": [ints], "scores": [[floats]] (optional)}
    One response line per request, in order.  The child is a serialized
    resource; callers share it through this handle only.
    """

    backend = "external"

    def __init__(self, command, num_classes: int, input_shape: GridGeometry,
                 timeout: float = 60.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True
        )
        self.num_classes = num_classes
        self.input_shape = input_shape
        self.timeout = timeout
        self._next_id = 0
        self._last_scores = None

    def _roundtrip(self, images: np.ndarray) -> dict:
        req_id = self._next_id
        self._next_id += 1
        g = self.input_shape
        # to (N, H, W, C) row-major, flattened per image
        hwc = np.moveaxis(images, 1, 3)
        req = {
            "id": req_id,
            "shape": [g.height, g.width, g.channels],
            "images": [im.ravel().tolist() for im in hwc],
        }
        try:
            self.proc.stdin.write(json.dumps(req) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, ValueError) as e:
            raise BackendError(f"backend process not accepting input: {e}") from e
        ready, _, _ = select.select([self.proc.stdout], [], [], self.timeout)
        if not ready:
            self.proc.kill()
            raise BackendError(f"backend timed out after {self.timeout}s")
        line = self.proc.stdout.readline()
        if not line:
            raise BackendError("backend closed its output stream")
        try:
            resp = json.loads(line)
        except json.JSONDecodeError as e:
            raise BackendError(f"backend sent invalid JSON: {e}", payload=line) from e
        if resp.get("id") != req_id:
            raise BackendError(
                f"response id {resp.get('id')} != request id {req_id}", payload=line
            )
        labels = resp.get("labels")
        if not isinstance(labels, list) or len(labels) != images.shape[0]:
            raise BackendError("response 'labels' missing or wrong length",
                               payload=line)
        return resp

    def classify_batch(self, batch) -> np.ndarray:
        images = batch if isinstance(batch, np.ndarray) else _stack(batch)
        resp = self._roundtrip(images)
        scores = resp.get("scores")
        self._last_scores = (
            np.asarray(scores, dtype=np.float64) if scores is not None else None
        )
        return np.asarray(resp["labels"], dtype=np.int64)

    def logits_batch(self, images: np.ndarray):
        """Scores from the extended response field; None when the backend
        does not provide them (attacks then fall back to 0/1 loss)."""
        self.classify_batch(images)
        return self._last_scores

    def close(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                self.proc.kill()


def classify_batch(handle: ClassifierHandle, batch) -> np.ndarray:
    return handle.classify_batch(batch)


# ---------------------------------------------------------------------------
# IDX ingestion (big-endian, optionally gzipped)

_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def _read_idx(path, expect_magic: int) -> np.ndarray:
    with open(path, "rb") as f:
        head = f.read(2)
        f.seek(0)
        raw = gzip.open(f).read() if head == b"\x1f\x8b" else f.read()
    if len(raw) < 4:
        raise FormatError("file shorter than magic number", f"{path}:0")
    magic = int.from_bytes(raw[0:4], "big")
    if magic != expect_magic:
        raise FormatError(
            f"bad magic 0x{magic:08x}, expected 0x{expect_magic:08x}", f"{path}:0"
        )
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise FormatError("truncated dimension header", f"{path}:{len(raw)}")
    dims = [
        int.from_bytes(raw[4 + 4 * i : 8 + 4 * i], "big") for i in range(ndim)
    ]
    count = int(np.prod(dims))
    if len(raw) < header_end + count:
        raise FormatError(
            f"expected {count} data bytes, file ends early",
            f"{path}:{len(raw)}",
        )
    data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=header_end)
    return data.reshape(dims)


def load_mnist_idx(images_path, labels_path) -> Dataset:
    """Load an IDX image/label pair as a dataset scaled to [0, 1]."""
    images = _read_idx(images_path, _IDX_IMAGES_MAGIC)
    labels = _read_idx(labels_path, _IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(
            f"{images.shape[0]} images vs {labels.shape[0]} labels",
            f"{labels_path}:4",
        )
    return Dataset(
        images.astype(np.float64)[:, None, :, :] / 255.0,
        labels.astype(np.int64),
    )
