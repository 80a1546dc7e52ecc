"""Encoding tests: pruning masks, angle/amplitude/SQE encoders, PCA."""

import math

import numpy as np
import pytest

import oracles
from qprune.encoders import (
    EncodedInput,
    EncoderPipeline,
    ImageGrid,
    PruneMask,
    amplitude_encode,
    angle_encode,
    angle_encode_values,
    apply_mask,
    build_mask,
    class_average,
    mask_from_jsonable,
    mask_to_jsonable,
    min_amplitude_qubits,
    pca_fit,
    pca_from_jsonable,
    pca_to_jsonable,
    pca_transform,
    pipeline_from_jsonable,
    pipeline_to_jsonable,
    sqe_encode,
)
from qprune.errors import DataError, EncodingError
from qprune.qsim import Statevector, run_circuit


def grid(rows):
    arr = np.asarray(rows, dtype=float)
    return ImageGrid(arr.shape[0], arr)


def random_grid(rng, side):
    return ImageGrid(side, rng.uniform(0, 1, size=(side, side)))


def test_image_grid_validation():
    with pytest.raises(EncodingError):
        ImageGrid(2, np.zeros((3, 3)))
    with pytest.raises(EncodingError):
        grid([[0.5, 1.2], [0.0, 0.0]])
    with pytest.raises(EncodingError):
        grid([[-0.1, 0.2], [0.0, 0.0]])
    g = grid([[0.0, 1.0], [0.5, 0.25]])
    with pytest.raises(ValueError):
        g.pixels[0, 0] = 0.3


def test_class_average_of_identical_images():
    g = grid([[0.2, 0.4], [0.6, 0.8]])
    avg = class_average([g, g], [1, 1], 1)
    assert np.allclose(avg.pixels, g.pixels)


def test_class_average_arithmetic_mean():
    a = grid([[0.0, 0.0], [0.0, 0.0]])
    b = grid([[1.0, 1.0], [1.0, 1.0]])
    avg = class_average([a, b], [0, 0], 0)
    assert np.allclose(avg.pixels, 0.5)


def test_class_average_uses_only_matching_labels():
    rng = np.random.default_rng(3)
    images = [random_grid(rng, 3) for _ in range(10)]
    labels = [i % 2 for i in range(10)]
    for cls in (0, 1):
        avg = class_average(images, labels, cls)
        # per-pixel loop oracle
        want = np.zeros((3, 3))
        count = 0
        for im, lab in zip(images, labels):
            if lab == cls:
                want += im.pixels
                count += 1
        assert np.allclose(avg.pixels, want / count, atol=1e-12)


def test_class_average_empty_class():
    g = grid([[0.1, 0.1], [0.1, 0.1]])
    with pytest.raises(DataError):
        class_average([g], [0], 1)


def test_build_mask_tau_zero_keeps_everything():
    z = grid([[0.0, 0.0], [0.0, 0.0]])
    mask = build_mask(z, z, 0.0)
    assert mask.keep.all()


def test_build_mask_prunes_when_both_below():
    z = grid([[0.0, 0.0], [0.0, 0.0]])
    mask = build_mask(z, z, 0.1)
    assert not mask.keep.any()


def test_build_mask_requires_both_averages_below():
    a = grid([[0.05, 0.05], [0.05, 0.05]])
    b = grid([[0.2, 0.2], [0.2, 0.2]])
    mask = build_mask(a, b, 0.1)
    assert mask.keep.all()


def test_build_mask_strict_inequality():
    # pixels exactly at tau are not below it, so they survive
    a = grid([[0.1, 0.0], [0.1, 0.0]])
    mask = build_mask(a, a, 0.1)
    assert mask.keep[0, 0] and mask.keep[1, 0]
    assert not mask.keep[0, 1] and not mask.keep[1, 1]


def test_build_mask_negative_tau():
    z = grid([[0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(EncodingError):
        build_mask(z, z, -0.01)


def test_mask_monotone_in_tau():
    rng = np.random.default_rng(5)
    a, b = random_grid(rng, 4), random_grid(rng, 4)
    taus = sorted(rng.uniform(0, 1, size=8))
    prev = build_mask(a, b, taus[0])
    for tau in taus[1:]:
        cur = build_mask(a, b, tau)
        # keep-set only shrinks as tau grows
        assert np.all(prev.keep | ~cur.keep)
        prev = cur


def test_apply_mask_all_keep_and_all_prune():
    rng = np.random.default_rng(7)
    img = random_grid(rng, 3)
    keep_all = PruneMask(3, np.ones((3, 3), bool))
    prune_all = PruneMask(3, np.zeros((3, 3), bool))
    assert np.array_equal(apply_mask(img, keep_all).pixels, img.pixels)
    assert np.all(apply_mask(img, prune_all).pixels == 0.0)


def test_apply_mask_matches_per_pixel_loop():
    rng = np.random.default_rng(9)
    img = random_grid(rng, 3)
    mask = PruneMask(3, rng.uniform(size=(3, 3)) < 0.5)
    out = apply_mask(img, mask)
    for i in range(3):
        for j in range(3):
            want = img.pixels[i, j] if mask.keep[i, j] else 0.0
            assert out.pixels[i, j] == want


def test_apply_mask_idempotent():
    rng = np.random.default_rng(11)
    img = random_grid(rng, 4)
    mask = PruneMask(4, rng.uniform(size=(4, 4)) < 0.6)
    once = apply_mask(img, mask)
    twice = apply_mask(once, mask)
    assert np.array_equal(once.pixels, twice.pixels)


def test_apply_mask_side_mismatch():
    with pytest.raises(EncodingError):
        apply_mask(grid([[0.1]]), PruneMask(2, np.ones((2, 2), bool)))


def test_angle_encode_angles_and_layout():
    img = grid([[0.5, 0.0], [1.0, 0.25]])
    enc = angle_encode(img)
    assert enc.n_data_qubits == 4
    circ = enc.payload
    assert [op.kind for op in circ.ops] == ["RX"] * 4
    assert [op.targets for op in circ.ops] == [(0,), (1,), (2,), (3,)]
    angles = [op.theta for op in circ.ops]
    assert angles == pytest.approx(
        [math.pi / 2, 0.0, math.pi, math.pi / 4]
    )


def test_angle_encode_pixel_one_flips_qubit():
    enc = angle_encode(grid([[1.0]]))
    out = run_circuit(Statevector.zero(1), enc.payload)
    assert np.allclose(out.amps, [0.0, -1.0j], atol=1e-12)


def test_angle_encode_all_zero_image_fixes_ground_state():
    enc = angle_encode(grid([[0.0, 0.0], [0.0, 0.0]]))
    out = run_circuit(Statevector.zero(4), enc.payload)
    want = np.zeros(16)
    want[0] = 1.0
    assert np.allclose(out.amps, want, atol=1e-12)


def test_fully_pruned_image_encodes_to_ground_state():
    rng = np.random.default_rng(13)
    img = random_grid(rng, 2)
    mask = PruneMask(2, np.zeros((2, 2), bool))
    enc = angle_encode(img, mask=mask)
    out = run_circuit(Statevector.zero(4), enc.payload)
    assert abs(out.amps[0] - 1.0) < 1e-12


def test_angle_encode_compact_drops_pruned_qubits():
    img = grid([[0.5, 0.3], [0.7, 0.9]])
    mask = PruneMask(2, np.array([[True, False], [False, True]]))
    enc = angle_encode(img, mask=mask, compact=True)
    assert enc.n_data_qubits == 2
    assert enc.positions == (0, 3)
    assert [op.theta for op in enc.payload.ops] == pytest.approx(
        [math.pi * 0.5, math.pi * 0.9]
    )
    with pytest.raises(EncodingError):
        angle_encode(img, compact=True)  # compact needs a mask
    with pytest.raises(EncodingError):
        angle_encode(img, mask=PruneMask(2, np.zeros((2, 2), bool)), compact=True)


def test_amplitude_encode_examples():
    enc = amplitude_encode([1, 0, 0, 0], 2)
    assert np.allclose(enc.payload.amps, [1, 0, 0, 0])
    enc = amplitude_encode([1, 1, 1, 1], 2)
    assert np.allclose(enc.payload.amps, [0.5, 0.5, 0.5, 0.5])
    enc = amplitude_encode([3, 4], 1)
    assert np.allclose(enc.payload.amps, [0.6, 0.8])


def test_amplitude_encode_pads_and_normalizes():
    rng = np.random.default_rng(17)
    for _ in range(200):
        n_vals = int(rng.integers(1, 9))
        vals = rng.uniform(0, 1, size=n_vals)
        if np.linalg.norm(vals) == 0:
            continue
        enc = amplitude_encode(vals, 3)
        assert abs(np.linalg.norm(enc.payload.amps) - 1.0) < 1e-10
        assert np.allclose(enc.payload.amps[n_vals:], 0.0)


def test_amplitude_encode_errors():
    with pytest.raises(EncodingError):
        amplitude_encode([0.0, 0.0], 1)
    with pytest.raises(EncodingError):
        amplitude_encode([1, 2, 3], 1)
    with pytest.raises(EncodingError):
        amplitude_encode([1.0], 0)


def test_min_amplitude_qubits():
    assert min_amplitude_qubits(1) == 1
    assert min_amplitude_qubits(2) == 1
    assert min_amplitude_qubits(3) == 2
    assert min_amplitude_qubits(16) == 4
    assert min_amplitude_qubits(17) == 5


def test_sqe_encode_triples():
    img = grid([[0.5, 0.5], [0.5, 0.25]])
    enc = sqe_encode(img)
    circ = enc.payload
    assert circ.n_qubits == 1
    assert [op.kind for op in circ.ops] == ["RZ", "RY", "RZ", "RZ"]
    assert [op.theta for op in circ.ops] == pytest.approx(
        [math.pi / 2, math.pi / 2, math.pi / 2, math.pi / 4]
    )


def test_sqe_single_pixel_partial_triple():
    enc = sqe_encode(grid([[1.0]]))
    assert [op.kind for op in enc.payload.ops] == ["RZ"]
    assert enc.payload.ops[0].theta == pytest.approx(math.pi)


def test_sqe_zero_image_is_identity():
    enc = sqe_encode(grid([[0.0, 0.0], [0.0, 0.0]]))
    out = run_circuit(Statevector.zero(1), enc.payload)
    assert np.allclose(out.amps, [1.0, 0.0], atol=1e-12)


def test_sqe_triple_matches_dense_product():
    # Bloch vector from RZ RY RZ at pi/2 each, against the 2x2 matrix product
    enc = sqe_encode(grid([[0.5, 0.5, 0.5], [0, 0, 0], [0, 0, 0]]))
    first_three = enc.payload.ops[:3]
    out = Statevector.zero(1)
    for op in first_three:
        from qprune.qsim import apply_gate

        out = apply_gate(out, op)
    u = (
        oracles.one_qubit_matrix("RZ", math.pi / 2)
        @ oracles.one_qubit_matrix("RY", math.pi / 2)
        @ oracles.one_qubit_matrix("RZ", math.pi / 2)
    )
    assert np.allclose(out.amps, u @ np.array([1, 0], complex), atol=1e-12)


def test_encoded_input_validation():
    with pytest.raises(EncodingError):
        EncodedInput("mystery", None)


def test_pca_rank_one_axis():
    # samples vary along a single pixel: the lone component picks that axis
    images = [
        grid([[0.1, 0.5], [0.5, 0.5]]),
        grid([[0.9, 0.5], [0.5, 0.5]]),
        grid([[0.3, 0.5], [0.5, 0.5]]),
    ]
    model = pca_fit(images, 1)
    want = np.zeros(4)
    want[0] = 1.0  # sign fix makes the big entry positive
    assert np.allclose(model.components[0], want, atol=1e-10)


def test_pca_transform_of_mean_image():
    rng = np.random.default_rng(19)
    images = [random_grid(rng, 3) for _ in range(12)]
    model = pca_fit(images, 4)
    mean_img = ImageGrid(3, model.mean.reshape(3, 3))
    out = pca_transform(model, mean_img)
    # zero projection lands at 0's position inside each recorded range
    for i in range(4):
        width = model.hi[i] - model.lo[i]
        want = 0.0 if width < 1e-12 else (0.0 - model.lo[i]) / width
        assert out[i] == pytest.approx(min(1.0, max(0.0, want)), abs=1e-12)


def test_pca_matches_svd_oracle():
    rng = np.random.default_rng(23)
    images = [random_grid(rng, 4) for _ in range(10)]
    model = pca_fit(images, 3)
    flat = np.stack([im.flatten() for im in images])
    centered = flat - flat.mean(axis=0)
    # independent route: right singular vectors of the centered data matrix
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    for i in range(3):
        vec = vt[i]
        if vec[np.argmax(np.abs(vec))] < 0:
            vec = -vec
        assert np.allclose(model.components[i], vec, atol=1e-8)
    # projections agree too
    for im in images:
        got = model.components @ (im.flatten() - flat.mean(axis=0))
        want = vt[:3] @ (im.flatten() - flat.mean(axis=0))
        signs = [
            1.0 if vt[i][np.argmax(np.abs(vt[i]))] > 0 else -1.0 for i in range(3)
        ]
        assert np.allclose(got, np.asarray(signs) * want, atol=1e-8)


def test_pca_components_orthonormal():
    rng = np.random.default_rng(29)
    images = [random_grid(rng, 4) for _ in range(20)]
    model = pca_fit(images, 6)
    gram = model.components @ model.components.T
    assert np.allclose(gram, np.eye(6), atol=1e-8)


def test_pca_transform_clamps_and_stays_in_unit_interval():
    rng = np.random.default_rng(31)
    images = [random_grid(rng, 3) for _ in range(8)]
    model = pca_fit(images, 3)
    for _ in range(20):
        out = pca_transform(model, random_grid(rng, 3))
        assert np.all(out >= 0.0) and np.all(out <= 1.0)
    # training images never clamp below 0/above 1 up to float error
    for im in images:
        out = pca_transform(model, im)
        assert np.all(out >= 0.0) and np.all(out <= 1.0)


def test_pca_degenerate_covariance_zero_pads():
    # two identical samples plus one: rank 1, ask for 3 components
    a = grid([[0.2, 0.2], [0.2, 0.2]])
    b = grid([[0.8, 0.8], [0.8, 0.8]])
    model = pca_fit([a, b, a], 3)
    assert np.allclose(model.components[1], 0.0)
    assert np.allclose(model.components[2], 0.0)
    out = pca_transform(model, b)
    assert out[1] == 0.0 and out[2] == 0.0


def test_pca_errors():
    rng = np.random.default_rng(37)
    images = [random_grid(rng, 2) for _ in range(4)]
    with pytest.raises(EncodingError):
        pca_fit(images, 5)
    with pytest.raises(EncodingError):
        pca_fit(images, 0)
    with pytest.raises(DataError):
        pca_fit(images[:1], 1)
    model = pca_fit(images, 2)
    with pytest.raises(EncodingError):
        pca_transform(model, random_grid(rng, 3))


def test_pipeline_dispatch():
    rng = np.random.default_rng(41)
    img = random_grid(rng, 2)
    images = [random_grid(rng, 2) for _ in range(6)]
    mask = PruneMask(2, np.array([[True, True], [False, True]]))

    assert EncoderPipeline("angle").encode(img).n_data_qubits == 4
    atp = EncoderPipeline("atp", mask=mask).encode(img)
    assert atp.n_data_qubits == 4
    assert atp.payload.ops[2].theta == 0.0  # pruned pixel, zero angle
    compact = EncoderPipeline("atp", mask=mask, compact=True).encode(img)
    assert compact.n_data_qubits == 3
    amp = EncoderPipeline("amplitude").encode(img)
    assert amp.n_data_qubits == 2
    assert EncoderPipeline("sqe").encode(img).n_data_qubits == 1
    model = pca_fit(images, 3)
    assert EncoderPipeline("pca", pca=model).encode(img).n_data_qubits == 3

    assert EncoderPipeline("angle").data_qubits(2) == 4
    assert EncoderPipeline("atp", mask=mask).data_qubits(2) == 4
    assert EncoderPipeline("atp", mask=mask, compact=True).data_qubits(2) == 3
    assert EncoderPipeline("amplitude").data_qubits(2) == 2
    assert EncoderPipeline("sqe").data_qubits(2) == 1
    assert EncoderPipeline("pca", pca=model).data_qubits(2) == 3


def test_pipeline_validation():
    with pytest.raises(EncodingError):
        EncoderPipeline("fourier")
    with pytest.raises(EncodingError):
        EncoderPipeline("atp")
    with pytest.raises(EncodingError):
        EncoderPipeline("pca")


def test_mask_and_pca_round_trip_json():
    rng = np.random.default_rng(43)
    mask = PruneMask(3, rng.uniform(size=(3, 3)) < 0.5)
    back = mask_from_jsonable(mask_to_jsonable(mask))
    assert np.array_equal(back.keep, mask.keep)

    images = [random_grid(rng, 3) for _ in range(7)]
    model = pca_fit(images, 4)
    back = pca_from_jsonable(pca_to_jsonable(model))
    assert np.allclose(back.components, model.components)
    assert np.allclose(back.mean, model.mean)
    assert np.allclose(back.lo, model.lo)
    assert np.allclose(back.hi, model.hi)

    pipe = EncoderPipeline("atp", mask=mask, compact=True)
    back = pipeline_from_jsonable(pipeline_to_jsonable(pipe))
    assert back.kind == "atp" and back.compact
    assert np.array_equal(back.mask.keep, mask.keep)

    import json

    blob = json.dumps(pipeline_to_jsonable(EncoderPipeline("pca", pca=model)))
    back = pipeline_from_jsonable(json.loads(blob))
    img = random_grid(rng, 3)
    assert np.allclose(
        back.encode(img).payload.ops[0].theta,
        EncoderPipeline("pca", pca=model).encode(img).payload.ops[0].theta,
    )
