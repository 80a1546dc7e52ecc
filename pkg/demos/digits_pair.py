"""Angle encoding versus adaptive pruning on a real digit pair.

Downsampled 0-vs-1 digit images, five seeds per encoder, then the
`table` subcommand cross-tabulates accuracy and readout entanglement
entropy from the result files.  Uses scikit-learn's bundled digits;
point QPRUNE_MNIST_DIR at a directory with train-images-idx3-ubyte and
train-labels-idx1-ubyte to run on MNIST instead.  A couple of minutes
on one core.
"""

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from qprune.cli import main as cli_main


def write_idx(dirpath):
    from sklearn.datasets import load_digits

    digits = load_digits()
    images = np.round(digits.images * (255.0 / 16.0)).astype(np.uint8)
    labels = digits.target.astype(np.uint8)
    n, side = images.shape[0], images.shape[1]
    img_path = dirpath / "train-images-idx3-ubyte"
    with open(img_path, "wb") as fh:
        fh.write(struct.pack(">iiii", 0x803, n, side, side))
        fh.write(images.tobytes())
    lab_path = dirpath / "train-labels-idx1-ubyte"
    with open(lab_path, "wb") as fh:
        fh.write(struct.pack(">ii", 0x801, n))
        fh.write(labels.tobytes())
    return dirpath, 160, 160


def main():
    root = Path(tempfile.mkdtemp(prefix="qprune-demo-"))
    mnist_dir = os.environ.get("QPRUNE_MNIST_DIR")
    if mnist_dir:
        data_dir, n_train, n_test = Path(mnist_dir), 200, 200
    else:
        data_dir, n_train, n_test = write_idx(root)
    images = data_dir / "train-images-idx3-ubyte"
    labels = data_dir / "train-labels-idx1-ubyte"

    results = []
    for encoder in ("angle", "atp"):
        config = {
            "dataset": "mnist",
            "images": str(images),
            "labels": str(labels),
            "class_pair": [0, 1],
            "side": 3,
            "n_train": n_train,
            "n_test": n_test,
            "balanced": True,
            "encoder": encoder,
            "train": {"epochs": 2, "batch_size": 24, "learning_rate": 0.5},
            "seeds": [0, 1, 2, 3, 4],
            "output": str(root / encoder),
        }
        if encoder == "atp":
            config["compact"] = True
            config["threshold"] = {}
        cfg_path = root / f"{encoder}.config.json"
        cfg_path.write_text(json.dumps(config, indent=1))
        assert cli_main(["run", "--config", str(cfg_path)]) == 0
        results.append(str(root / f"{encoder}.json"))

    print("\ntest accuracy, mean over 5 seeds:")
    cli_main(["table", *results])
    print("readout entanglement entropy:")
    cli_main(["table", "--entropy", *results])

    sidecar = json.loads((root / "atp.params.json").read_text())
    mask = sidecar["per_seed"][0]["pipeline"]["mask"]
    kept = sum(mask["keep"])
    taus = [e["tau_star"] for e in json.loads(
        (root / "atp.json").read_text())["per_seed"]]
    print(f"seed 0 keeps {kept}/{len(mask['keep'])} pixels; "
          f"tau* per seed: {[round(t, 3) for t in taus]}")
    print(f"artifacts under {root}")


if __name__ == "__main__":
    main()
