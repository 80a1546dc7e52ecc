"""Session fixtures behind the acceptance tests.

The heavy records (digit runs, the noise-band sweep) are produced once per
session through the command-line entry point, exactly as a user would, and
shared by every test that asserts on them.
"""

import json
import os
import struct
import time

import numpy as np
import pytest

from qprune.cli import main as cli_main

from toyset import make_noise_band

SEEDS = [0, 1, 2, 3, 4]
TABLE_TRAIN = {"epochs": 2, "batch_size": 24, "learning_rate": 0.5}
ROBUST_TRAIN = {"epochs": 4, "batch_size": 8, "learning_rate": 0.5}
NOISE_BLOCK = {"ps": [0.03, 0.05, 0.1], "trajectories": 200, "seed": 0}
ATTACK_BLOCK = {"epsilon": 0.3, "adversarial_fraction": 0.5}


def _write_idx(images_path, labels_path, images, labels):
    n, side = len(labels), images.shape[1]
    with open(images_path, "wb") as f:
        f.write(struct.pack(">iiii", 0x803, n, side, side))
        f.write(np.ascontiguousarray(images, dtype=np.uint8).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">ii", 0x801, n))
        f.write(np.ascontiguousarray(labels, dtype=np.uint8).tobytes())


@pytest.fixture(scope="session")
def digit_data(tmp_path_factory):
    """IDX image/label files plus split sizes for the 0-vs-1 digit task.

    When QPRUNE_MNIST_DIR is set it must hold train-images-idx3-ubyte and
    train-labels-idx1-ubyte, and the full 200/200 split applies.  The
    sandbox fallback renders the 8x8 sklearn digits into the same IDX
    layout (0..16 rescaled to the 0..255 byte range) at 160/160, the
    largest balanced split the two digit classes support.
    """
    env = os.environ.get("QPRUNE_MNIST_DIR")
    if env:
        return {
            "images": os.path.join(env, "train-images-idx3-ubyte"),
            "labels": os.path.join(env, "train-labels-idx1-ubyte"),
            "n_train": 200,
            "n_test": 200,
        }
    from sklearn.datasets import load_digits

    digits = load_digits()
    images = np.round(digits.images * (255.0 / 16.0)).astype(np.uint8)
    root = tmp_path_factory.mktemp("digit-idx")
    paths = str(root / "images-idx3-ubyte"), str(root / "labels-idx1-ubyte")
    _write_idx(*paths, images, digits.target.astype(np.uint8))
    return {"images": paths[0], "labels": paths[1], "n_train": 160, "n_test": 160}


def _digit_config(data, encoder, train):
    cfg = {
        "dataset": "mnist",
        "images": data["images"],
        "labels": data["labels"],
        "class_pair": [0, 1],
        "side": 3,
        "n_train": data["n_train"],
        "n_test": data["n_test"],
        "balanced": True,
        "encoder": encoder,
        "train": dict(train),
        "seeds": list(SEEDS),
    }
    if encoder == "atp":
        cfg["compact"] = True
        cfg["threshold"] = {}
    return cfg


def _run_cli(root, name, cfg):
    cfg = dict(cfg, output=str(root / f"{name}.out"))
    cfg_path = root / f"{name}.json"
    cfg_path.write_text(json.dumps(cfg, indent=1))
    t0 = time.perf_counter()
    rc = cli_main(["run", "--config", str(cfg_path)])
    elapsed = time.perf_counter() - t0
    assert rc == 0, f"run {name} exited {rc}"
    record = json.loads((root / f"{name}.out.json").read_text())
    return {
        "config_path": str(cfg_path),
        "json_path": str(root / f"{name}.out.json"),
        "csv_path": str(root / f"{name}.out.csv"),
        "record": record,
        "seconds": elapsed,
    }


@pytest.fixture(scope="session")
def table_runs(digit_data, tmp_path_factory):
    """Angle and threshold-pruned digit records with the noise sweep attached."""
    root = tmp_path_factory.mktemp("table-runs")
    out = {}
    for encoder in ("angle", "atp"):
        cfg = _digit_config(digit_data, encoder, TABLE_TRAIN)
        cfg["noise"] = dict(NOISE_BLOCK)
        out[encoder] = _run_cli(root, encoder, cfg)
    return out


@pytest.fixture(scope="session")
def robust_runs(digit_data, tmp_path_factory):
    """Digit records trained long enough for adversarial hardening to show."""
    root = tmp_path_factory.mktemp("robust-runs")
    out = {}
    for encoder in ("angle", "atp"):
        cfg = _digit_config(digit_data, encoder, ROBUST_TRAIN)
        cfg["attack"] = dict(ATTACK_BLOCK)
        out[encoder] = _run_cli(root, encoder, cfg)
    return out


@pytest.fixture(scope="session")
def noise_band(tmp_path_factory):
    """The 4x4 noise-band CSV plus the experiment config that runs on it."""
    root = tmp_path_factory.mktemp("noise-band")
    csv = make_noise_band(root / "noise_band.csv")
    config = {
        "dataset": "gray-csv",
        "csv": str(csv),
        "class_pair": [0, 1],
        "side": 4,
        "n_train": 8,
        "n_test": 16,
        "balanced": True,
        "encoder": "atp",
        "compact": True,
        "threshold": {},
        "train": {"epochs": 6, "batch_size": 4, "learning_rate": 0.8},
        "seeds": [0],
    }
    return {"root": root, "csv": str(csv), "config": config}


@pytest.fixture(scope="session")
def noise_band_sweep(noise_band):
    """Product-path 101-point threshold sweep over the noise-band set."""
    root = noise_band["root"]
    cfg = dict(noise_band["config"], output=str(root / "sweep.out"))
    cfg_path = root / "sweep.json"
    cfg_path.write_text(json.dumps(cfg, indent=1))
    taus = ",".join(f"{i / 100:.2f}" for i in range(101))
    t0 = time.perf_counter()
    rc = cli_main(["sweep", "--config", str(cfg_path), "--taus", taus])
    elapsed = time.perf_counter() - t0
    assert rc == 0, f"sweep exited {rc}"
    record = json.loads((root / "sweep.out.json").read_text())
    return {
        "config_path": str(cfg_path),
        "record": record,
        "csv_path": str(root / "sweep.out.csv"),
        "seconds": elapsed,
    }


@pytest.fixture(scope="session")
def noise_band_grid(noise_band):
    """Independent 101-point grid: per-pixel keep rule re-derived from raw
    class averages, one direct training per distinct mask."""
    from qprune.data import SplitSpec, filter_pair, load_gray_csv
    from qprune.encoders import EncoderPipeline, PruneMask
    from qprune.qnn import TrainConfig, fit_eval

    cfg = noise_band["config"]
    raw = load_gray_csv(cfg["csv"], cfg["side"])
    train, test = filter_pair(
        raw,
        *cfg["class_pair"],
        SplitSpec(cfg["n_train"], cfg["n_test"], seed=cfg["seeds"][0]),
        side=cfg["side"],
    )
    labels = np.asarray(train.labels)
    pixels = np.stack([im.pixels for im in train.images])
    avg0 = pixels[labels == -1].mean(axis=0)
    avg1 = pixels[labels == 1].mean(axis=0)
    train_config = TrainConfig(
        epochs=cfg["train"]["epochs"],
        batch_size=cfg["train"]["batch_size"],
        learning_rate=cfg["train"]["learning_rate"],
        seed=cfg["seeds"][0],
    )
    by_mask = {}
    rows = []
    for i in range(101):
        tau = i / 100
        keep = ~((avg0 < tau) & (avg1 < tau))
        key = keep.tobytes()
        if key not in by_mask:
            pipeline = EncoderPipeline(
                "atp",
                mask=PruneMask(cfg["side"], keep),
                compact=bool(keep.any()),
            )
            report = fit_eval(train, test, train_config, pipeline=pipeline)
            by_mask[key] = report.test_accuracy
        rows.append((tau, by_mask[key]))
    return rows
