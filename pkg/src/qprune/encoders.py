"""Classical-to-quantum input encodings.

Implements threshold pruning of pixel grids (mask construction from the two
class-average images and mask application), angle encoding (one RX(pi*x) per
pixel), amplitude encoding (pixels as normalized statevector amplitudes),
single-qubit Z-Y-Z encoding, and a PCA front end that feeds angle encoding.

An encoded input is either a circuit prefix acting on the data qubits or a
ready-made register state (amplitude encoding).  `EncoderPipeline` bundles an
encoder choice with its fitted artifacts (mask, PCA model) so the rest of the
package can encode images without threading those artifacts separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, EncodingError
from .qsim import Circuit, GateOp, Statevector, rx

ANGLE_PREFIX = "angle-circuit-prefix"
AMPLITUDE_STATE = "amplitude-state"
SQE_PREFIX = "sqe-circuit-prefix"

# transform-time width below which a PCA coordinate's recorded range is
# treated as degenerate and mapped to 0.0
_RANGE_EPS = 1e-12


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ImageGrid:
    """Square grid of pixel intensities in [0, 1]."""

    side: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.side < 1:
            raise EncodingError(f"grid side must be >= 1, got {self.side}")
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.shape != (self.side, self.side):
            raise EncodingError(
                f"expected {self.side}x{self.side} pixels, got shape {px.shape}"
            )
        if not np.all((px >= 0.0) & (px <= 1.0)):
            raise EncodingError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", _readonly(px))

    def flatten(self) -> np.ndarray:
        """Row-major pixel vector of length side**2."""
        return self.pixels.ravel().copy()

    @classmethod
    def from_flat(cls, values, side: int) -> "ImageGrid":
        arr = np.asarray(values, dtype=np.float64).reshape(side, side)
        return cls(side, arr)


@dataclass(frozen=True)
class PruneMask:
    """Boolean keep/prune grid produced by `build_mask`."""

    side: int
    keep: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.keep, dtype=bool)
        if k.shape != (self.side, self.side):
            raise EncodingError(
                f"expected {self.side}x{self.side} mask, got shape {k.shape}"
            )
        object.__setattr__(self, "keep", _readonly(k))

    def kept_count(self) -> int:
        return int(np.count_nonzero(self.keep))


@dataclass(frozen=True)
class EncodedInput:
    """Either a circuit prefix over the data qubits or a prepared register
    state.  `positions` records, for circuit prefixes, which flat pixel index
    each rotation consumed (used by input-gradient computations)."""

    kind: str
    payload: object
    positions: tuple = ()

    def __post_init__(self):
        if self.kind not in (ANGLE_PREFIX, AMPLITUDE_STATE, SQE_PREFIX):
            raise EncodingError(f"unknown encoded-input kind: {self.kind!r}")
        if self.kind == ANGLE_PREFIX:
            circ = self.payload
            if len(circ.ops) != circ.n_qubits or any(
                op.kind != "RX" or op.targets != (q,)
                for q, op in enumerate(circ.ops)
            ):
                raise EncodingError("angle prefix needs exactly one RX per qubit")

    @property
    def n_data_qubits(self) -> int:
        return self.payload.n_qubits


def class_average(images, labels, cls) -> ImageGrid:
    """Element-wise mean image over the samples labeled `cls`."""
    if len(images) != len(labels):
        raise DataError(
            f"{len(images)} images but {len(labels)} labels"
        )
    picked = [im for im, lab in zip(images, labels) if lab == cls]
    if not picked:
        raise DataError(f"no samples with label {cls!r}")
    side = picked[0].side
    for im in picked:
        if im.side != side:
            raise EncodingError("images have mixed grid sides")
    acc = np.zeros((side, side))
    for im in picked:
        acc += im.pixels
    return ImageGrid(side, acc / len(picked))


def build_mask(avg0: ImageGrid, avg1: ImageGrid, tau: float) -> PruneMask:
    """Keep a position unless BOTH class averages fall strictly below tau."""
    if tau < 0:
        raise EncodingError(f"prune threshold must be >= 0, got {tau}")
    if avg0.side != avg1.side:
        raise EncodingError("class averages have different sides")
    prune = (avg0.pixels < tau) & (avg1.pixels < tau)
    return PruneMask(avg0.side, ~prune)


def apply_mask(image: ImageGrid, mask: PruneMask) -> ImageGrid:
    """Zero the pruned positions, copy the kept ones verbatim."""
    if image.side != mask.side:
        raise EncodingError(
            f"image side {image.side} does not match mask side {mask.side}"
        )
    return ImageGrid(image.side, np.where(mask.keep, image.pixels, 0.0))


def angle_encode_values(values) -> EncodedInput:
    """One RX(pi * v) per value, each on its own data qubit."""
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        raise EncodingError("cannot angle-encode zero values")
    if not np.all((vals >= 0.0) & (vals <= 1.0)):
        raise EncodingError("angle-encoded values must lie in [0, 1]")
    ops = tuple(rx(q, math.pi * float(v)) for q, v in enumerate(vals))
    circ = Circuit(len(ops), ops)
    return EncodedInput(ANGLE_PREFIX, circ, tuple(range(vals.size)))


def angle_encode(
    image: ImageGrid, mask: PruneMask | None = None, compact: bool = False
) -> EncodedInput:
    """Angle-encode a grid, one data qubit per pixel in row-major order.

    With a mask, pruned pixels encode as zero-angle rotations (the default)
    or, with compact=True, are dropped so only kept pixels get qubits.
    """
    if compact and mask is None:
        raise EncodingError("compact angle encoding needs a mask")
    if mask is not None:
        image = apply_mask(image, mask)
    flat = image.flatten()
    if compact:
        kept = np.flatnonzero(mask.keep.ravel())
        if kept.size == 0:
            raise EncodingError("compact encoding with an all-prune mask")
        ops = tuple(
            rx(q, math.pi * float(flat[p])) for q, p in enumerate(kept)
        )
        return EncodedInput(
            ANGLE_PREFIX, Circuit(len(ops), ops), tuple(int(p) for p in kept)
        )
    return angle_encode_values(flat)


def amplitude_encode(values, n_qubits: int) -> EncodedInput:
    """Normalize `values` into the amplitudes of an n_qubit register."""
    vals = np.asarray(values, dtype=np.float64).ravel()
    if n_qubits < 1:
        raise EncodingError(f"need at least one qubit, got {n_qubits}")
    dim = 2**n_qubits
    if vals.size > dim:
        raise EncodingError(
            f"{vals.size} values exceed the {dim} amplitudes of {n_qubits} qubits"
        )
    norm = float(np.linalg.norm(vals))
    if norm == 0.0:
        raise EncodingError("cannot amplitude-encode an all-zero vector")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[: vals.size] = vals / norm
    return EncodedInput(AMPLITUDE_STATE, Statevector(n_qubits, amps))


def min_amplitude_qubits(n_values: int) -> int:
    """Smallest register that can hold n_values amplitudes."""
    if n_values < 1:
        raise EncodingError("need at least one value")
    return max(1, math.ceil(math.log2(n_values)))


def sqe_encode(image: ImageGrid) -> EncodedInput:
    """Single-qubit encoding: row-major pixel triples become Z-Y-Z rotations.

    Each triple (a, b, c) emits RZ(pi*a), RY(pi*b), RZ(pi*c) on the one data
    qubit; a trailing partial triple emits only its available rotations.
    """
    flat = image.flatten()
    axis_cycle = ("RZ", "RY", "RZ")
    ops = tuple(
        GateOp(axis_cycle[i % 3], (0,), math.pi * float(v))
        for i, v in enumerate(flat)
    )
    circ = Circuit(1, ops)
    return EncodedInput(SQE_PREFIX, circ, tuple(range(flat.size)))


@dataclass(frozen=True)
class PcaModel:
    """Mean, top-k components, and training projection ranges for rescaling."""

    side: int
    k: int
    mean: np.ndarray
    components: np.ndarray  # (k, side**2); degenerate rows are all zero
    lo: np.ndarray  # per-component training projection minima
    hi: np.ndarray

    def __post_init__(self):
        d = self.side * self.side
        object.__setattr__(self, "mean", _readonly(np.asarray(self.mean, float)))
        object.__setattr__(
            self, "components", _readonly(np.asarray(self.components, float))
        )
        object.__setattr__(self, "lo", _readonly(np.asarray(self.lo, float)))
        object.__setattr__(self, "hi", _readonly(np.asarray(self.hi, float)))
        if self.mean.shape != (d,) or self.components.shape != (self.k, d):
            raise EncodingError("PCA model arrays do not match side/k")
        if self.lo.shape != (self.k,) or self.hi.shape != (self.k,):
            raise EncodingError("PCA range arrays must have length k")


def pca_fit(train_images, k: int) -> PcaModel:
    """Fit mean + top-k covariance eigenvectors on the training grids.

    Components come in descending eigenvalue order with the sign fixed so
    each one's largest-magnitude entry is positive.  If the covariance has
    fewer than k positive eigenvalues the missing components are zero rows
    (their projections are 0 and rescale to 0).
    """
    if len(train_images) < 2:
        raise DataError(f"PCA needs at least 2 samples, got {len(train_images)}")
    side = train_images[0].side
    for im in train_images:
        if im.side != side:
            raise EncodingError("images have mixed grid sides")
    d = side * side
    if not 1 <= k <= d:
        raise EncodingError(f"component count {k} outside [1, {d}]")
    flat = np.stack([im.flatten() for im in train_images])
    mean = flat.mean(axis=0)
    centered = flat - mean
    cov = centered.T @ centered / (len(train_images) - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    components = np.zeros((k, d))
    for row, idx in enumerate(order[:k]):
        if evals[idx] <= 1e-12:
            continue  # degenerate direction stays a zero row
        vec = evecs[:, idx]
        if vec[np.argmax(np.abs(vec))] < 0:
            vec = -vec
        components[row] = vec
    proj = centered @ components.T
    return PcaModel(
        side=side,
        k=k,
        mean=mean,
        components=components,
        lo=proj.min(axis=0),
        hi=proj.max(axis=0),
    )


def pca_transform(model: PcaModel, image: ImageGrid) -> np.ndarray:
    """Project onto the fitted components and min-max rescale into [0, 1].

    Rescaling uses the ranges recorded at fit time and clamps; a degenerate
    (zero-width) range maps to 0.0.
    """
    if image.side != model.side:
        raise EncodingError(
            f"image side {image.side} does not match model side {model.side}"
        )
    proj = model.components @ (image.flatten() - model.mean)
    out = np.zeros(model.k)
    for i in range(model.k):
        width = model.hi[i] - model.lo[i]
        if width < _RANGE_EPS:
            continue
        out[i] = min(1.0, max(0.0, (proj[i] - model.lo[i]) / width))
    return out


@dataclass(frozen=True)
class EncoderPipeline:
    """An encoder choice plus the fitted artifacts it needs.

    kind: one of angle, atp, amplitude, sqe, pca.  atp is angle encoding
    behind a prune mask; pca feeds its rescaled projections to angle
    encoding.  `encode` turns an image into the model's input.
    """

    kind: str
    mask: PruneMask | None = None
    pca: PcaModel | None = None
    n_amplitude_qubits: int | None = None
    compact: bool = False

    def __post_init__(self):
        if self.kind not in ("angle", "atp", "amplitude", "sqe", "pca"):
            raise EncodingError(f"unknown encoder kind: {self.kind!r}")
        if self.kind == "atp" and self.mask is None:
            raise EncodingError("atp encoding needs a prune mask")
        if self.kind == "pca" and self.pca is None:
            raise EncodingError("pca encoding needs a fitted model")

    def encode(self, image: ImageGrid) -> EncodedInput:
        if self.kind == "angle":
            return angle_encode(image)
        if self.kind == "atp":
            return angle_encode(image, mask=self.mask, compact=self.compact)
        if self.kind == "amplitude":
            flat = image.flatten()
            n = self.n_amplitude_qubits or min_amplitude_qubits(flat.size)
            return amplitude_encode(flat, n)
        if self.kind == "sqe":
            return sqe_encode(image)
        return angle_encode_values(pca_transform(self.pca, image))

    def data_qubits(self, side: int) -> int:
        """Data-register width this pipeline produces for side x side grids."""
        if self.kind in ("angle",):
            return side * side
        if self.kind == "atp":
            return self.mask.kept_count() if self.compact else side * side
        if self.kind == "amplitude":
            return self.n_amplitude_qubits or min_amplitude_qubits(side * side)
        if self.kind == "sqe":
            return 1
        return self.pca.k


def mask_to_jsonable(mask: PruneMask) -> dict:
    return {"side": mask.side, "keep": mask.keep.astype(int).ravel().tolist()}


def mask_from_jsonable(obj: dict) -> PruneMask:
    side = int(obj["side"])
    keep = np.asarray(obj["keep"], dtype=bool).reshape(side, side)
    return PruneMask(side, keep)


def pca_to_jsonable(model: PcaModel) -> dict:
    return {
        "side": model.side,
        "k": model.k,
        "mean": model.mean.tolist(),
        "components": model.components.tolist(),
        "lo": model.lo.tolist(),
        "hi": model.hi.tolist(),
    }


def pca_from_jsonable(obj: dict) -> PcaModel:
    return PcaModel(
        side=int(obj["side"]),
        k=int(obj["k"]),
        mean=np.asarray(obj["mean"], float),
        components=np.asarray(obj["components"], float),
        lo=np.asarray(obj["lo"], float),
        hi=np.asarray(obj["hi"], float),
    )


def pipeline_to_jsonable(pipe: EncoderPipeline) -> dict:
    return {
        "kind": pipe.kind,
        "mask": None if pipe.mask is None else mask_to_jsonable(pipe.mask),
        "pca": None if pipe.pca is None else pca_to_jsonable(pipe.pca),
        "n_amplitude_qubits": pipe.n_amplitude_qubits,
        "compact": pipe.compact,
    }


def pipeline_from_jsonable(obj: dict) -> EncoderPipeline:
    return EncoderPipeline(
        kind=obj["kind"],
        mask=None if obj.get("mask") is None else mask_from_jsonable(obj["mask"]),
        pca=None if obj.get("pca") is None else pca_from_jsonable(obj["pca"]),
        n_amplitude_qubits=obj.get("n_amplitude_qubits"),
        compact=bool(obj.get("compact", False)),
    )
