"""FGSM attacks, adversarial training, and depolarizing noise.

Trains a pruned-encoding model on the digit pair, reports clean versus
single-step gradient-attack accuracy before and after mixing
adversarial examples into training, then replays the saved model
through the `noise` subcommand at three depolarizing strengths.  One
seed to keep it quick; expect a minute or two on one core.
"""

import json
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
    with open(dirpath / "train-images-idx3-ubyte", "wb") as fh:
        fh.write(struct.pack(">iiii", 0x803, n, side, side))
        fh.write(images.tobytes())
    with open(dirpath / "train-labels-idx1-ubyte", "wb") as fh:
        fh.write(struct.pack(">ii", 0x801, n))
        fh.write(labels.tobytes())


def main():
    root = Path(tempfile.mkdtemp(prefix="qprune-demo-"))
    write_idx(root)
    base = {
        "dataset": "mnist",
        "images": str(root / "train-images-idx3-ubyte"),
        "labels": str(root / "train-labels-idx1-ubyte"),
        "class_pair": [0, 1],
        "side": 3,
        "n_train": 160,
        "n_test": 160,
        "balanced": True,
        "encoder": "atp",
        "compact": True,
        "threshold": {},
        "train": {"epochs": 4, "batch_size": 8, "learning_rate": 0.5},
        "seeds": [0],
    }

    run_cfg = dict(base)
    run_cfg["attack"] = {"epsilon": 0.3, "adversarial_fraction": 0.5}
    run_cfg["output"] = str(root / "run")
    (root / "run.config.json").write_text(json.dumps(run_cfg, indent=1))
    assert cli_main(["run", "--config", str(root / "run.config.json")]) == 0

    entry = json.loads((root / "run.json").read_text())["per_seed"][0]
    print(f"\nclean accuracy          {entry['accuracy']:.3f}")
    print(f"FGSM eps=0.3            {entry['attack_accuracy']:.3f}")
    print("after adversarial training (half of each batch attacked):")
    print(f"  clean                 {entry['adversarial_clean_accuracy']:.3f}")
    print(f"  FGSM eps=0.3          {entry['adversarial_attack_accuracy']:.3f}")

    noise_cfg = dict(base)
    noise_cfg["params_path"] = str(root / "run.params.json")
    noise_cfg["noise"] = {"ps": [0.03, 0.05, 0.1], "trajectories": 200, "seed": 0}
    noise_cfg["output"] = str(root / "noise")
    (root / "noise.config.json").write_text(json.dumps(noise_cfg, indent=1))
    assert cli_main(["noise", "--config", str(root / "noise.config.json")]) == 0

    curve = json.loads((root / "noise.json").read_text())["per_seed"][0]
    print("\ndepolarizing noise, 200 trajectories per sample:")
    for p, acc in sorted(curve["noise_accuracy"].items(), key=lambda kv: float(kv[0])):
        print(f"  p={float(p):<5g} accuracy {acc:.3f}")
    print(f"artifacts under {root}")


if __name__ == "__main__":
    main()
