"""Config-driven experiment pipelines behind the command-line interface.

A single JSON config names the dataset, class pair, encoder, training
settings, and optional threshold/noise/attack blocks.  Every run is a pure
function of the config plus its seed list: each seed re-splits the data,
trains, and evaluates, so rerunning a config reproduces the result file
byte for byte apart from the wall-time field.

Result files carry a schema_version, the config echo, per-seed entries,
and aggregates recomputable from those entries; the CSV mirror prints the
same numbers through repr so the two formats agree exactly.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from .data import RawDataset, SplitSpec, filter_pair, load_gray_csv, load_idx
from .encoders import EncoderPipeline, pca_fit, pipeline_from_jsonable, pipeline_to_jsonable
from .errors import ConfigError
from .qnn import (
    TrainConfig,
    evaluate,
    fit_eval,
    init_params,
    params_from_jsonable,
    params_to_jsonable,
)
from .robustness import (
    AdvTrainConfig,
    AttackConfig,
    NoiseConfig,
    adversarial_train,
    fgsm_accuracy,
    noisy_evaluate,
)
from .threshold import ThresholdProblem, _Objective, optimize_threshold
from .encoders import mask_to_jsonable

SCHEMA_VERSION = 1

DATASETS = ("mnist", "fashion", "gray-csv")
ENCODERS = ("angle", "amplitude", "atp", "pca", "sqe")


@dataclass(frozen=True)
class ThresholdSettings:
    tau_max: float = 1.0
    grad_step: float = 0.02
    grad_tol: float = 1e-3
    max_iters: int = 25
    history_size: int = 5


@dataclass(frozen=True)
class NoiseSettings:
    ps: tuple
    trajectories: int = 200
    seed: int = 0
    scope: str = "all"


@dataclass(frozen=True)
class AttackSettings:
    epsilon: float = 0.3
    clip: bool = True
    adversarial_fraction: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    class_pair: tuple
    encoder: str
    train: TrainConfig
    seeds: tuple
    side: int = 3
    n_train: int = 200
    n_test: int = 200
    balanced: bool = True
    images: str | None = None
    labels: str | None = None
    csv: str | None = None
    compact: bool = False
    pca_components: int | None = None
    threshold: ThresholdSettings | None = None
    noise: NoiseSettings | None = None
    attack: AttackSettings | None = None
    output: str | None = None
    params_path: str | None = None
    echo: dict = dataclasses.field(default_factory=dict, compare=False, repr=False)


def _check_keys(obj: dict, allowed, context: str):
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{context}: unknown field {key!r}")


def _get(obj: dict, key: str, kind, context: str, default=_check_keys):
    if key not in obj:
        if default is _check_keys:
            raise ConfigError(f"{context}.{key}: required")
        return default
    value = obj[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    bad_bool = isinstance(value, bool) and kind is not bool
    if bad_bool or not isinstance(value, kind):
        raise ConfigError(
            f"{context}.{key}: expected {kind.__name__}, got {value!r}"
        )
    return value


def _parse_train(obj, context="train") -> TrainConfig:
    if not isinstance(obj, dict):
        raise ConfigError(f"{context}: expected an object")
    if "seed" in obj:
        raise ConfigError(
            f"{context}.seed: set per-run seeds via the top-level seeds list"
        )
    _check_keys(obj, ("epochs", "batch_size", "learning_rate"), context)
    return TrainConfig(
        epochs=_get(obj, "epochs", int, context, TrainConfig.epochs),
        batch_size=_get(obj, "batch_size", int, context, TrainConfig.batch_size),
        learning_rate=_get(
            obj, "learning_rate", float, context, TrainConfig.learning_rate
        ),
        seed=0,
    )


def _parse_threshold(obj, context="threshold") -> ThresholdSettings:
    if not isinstance(obj, dict):
        raise ConfigError(f"{context}: expected an object")
    d = ThresholdSettings()
    _check_keys(
        obj,
        ("tau_max", "grad_step", "grad_tol", "max_iters", "history_size"),
        context,
    )
    return ThresholdSettings(
        tau_max=_get(obj, "tau_max", float, context, d.tau_max),
        grad_step=_get(obj, "grad_step", float, context, d.grad_step),
        grad_tol=_get(obj, "grad_tol", float, context, d.grad_tol),
        max_iters=_get(obj, "max_iters", int, context, d.max_iters),
        history_size=_get(obj, "history_size", int, context, d.history_size),
    )


def _parse_noise(obj, context="noise") -> NoiseSettings:
    if not isinstance(obj, dict):
        raise ConfigError(f"{context}: expected an object")
    _check_keys(obj, ("p", "ps", "trajectories", "seed", "scope"), context)
    if ("p" in obj) == ("ps" in obj):
        raise ConfigError(f"{context}: give exactly one of p or ps")
    if "p" in obj:
        ps = [_get(obj, "p", float, context)]
    else:
        ps = obj["ps"]
        if not isinstance(ps, list) or not ps:
            raise ConfigError(f"{context}.ps: expected a non-empty list")
        ps = [float(p) for p in ps]
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"{context}: probability {p} outside [0, 1]")
    settings = NoiseSettings(
        ps=tuple(ps),
        trajectories=_get(obj, "trajectories", int, context, 200),
        seed=_get(obj, "seed", int, context, 0),
        scope=_get(obj, "scope", str, context, "all"),
    )
    # constructing one validates trajectories and scope early
    NoiseConfig(
        p=ps[0],
        trajectories=settings.trajectories,
        seed=settings.seed,
        scope=settings.scope,
    )
    return settings


def _parse_attack(obj, context="attack") -> AttackSettings:
    if not isinstance(obj, dict):
        raise ConfigError(f"{context}: expected an object")
    _check_keys(obj, ("epsilon", "clip", "adversarial_fraction"), context)
    settings = AttackSettings(
        epsilon=_get(obj, "epsilon", float, context, 0.3),
        clip=_get(obj, "clip", bool, context, True),
        adversarial_fraction=_get(
            obj, "adversarial_fraction", float, context, None
        ),
    )
    AttackConfig(epsilon=settings.epsilon, clip=settings.clip)
    if settings.adversarial_fraction is not None and not (
        0.0 <= settings.adversarial_fraction <= 1.0
    ):
        raise ConfigError(
            f"{context}.adversarial_fraction: "
            f"{settings.adversarial_fraction} outside [0, 1]"
        )
    return settings


_TOP_FIELDS = (
    "dataset",
    "images",
    "labels",
    "csv",
    "class_pair",
    "side",
    "n_train",
    "n_test",
    "balanced",
    "encoder",
    "compact",
    "pca_components",
    "train",
    "threshold",
    "noise",
    "attack",
    "seeds",
    "output",
    "params_path",
)


def config_from_jsonable(obj: dict) -> ExperimentConfig:
    """Validate a loaded config; every complaint names its field."""
    if not isinstance(obj, dict):
        raise ConfigError("config: expected a JSON object")
    _check_keys(obj, _TOP_FIELDS, "config")

    dataset = _get(obj, "dataset", str, "config")
    if dataset not in DATASETS:
        raise ConfigError(
            f"config.dataset: expected one of {DATASETS}, got {dataset!r}"
        )
    if dataset == "gray-csv":
        csv = _get(obj, "csv", str, "config")
        images = labels = None
        if "images" in obj or "labels" in obj:
            raise ConfigError(
                "config.images/labels: not valid with a gray-csv dataset"
            )
    else:
        images = _get(obj, "images", str, "config")
        labels = _get(obj, "labels", str, "config")
        csv = None
        if "csv" in obj:
            raise ConfigError(f"config.csv: not valid with a {dataset} dataset")

    pair = obj.get("class_pair")
    if (
        not isinstance(pair, list)
        or len(pair) != 2
        or not all(isinstance(c, int) and not isinstance(c, bool) for c in pair)
    ):
        raise ConfigError("config.class_pair: expected two integer labels")
    if pair[0] == pair[1]:
        raise ConfigError("config.class_pair: labels must be distinct")

    encoder = _get(obj, "encoder", str, "config")
    if encoder not in ENCODERS:
        raise ConfigError(
            f"config.encoder: expected one of {ENCODERS}, got {encoder!r}"
        )

    compact = _get(obj, "compact", bool, "config", False)
    if compact and encoder != "atp":
        raise ConfigError("config.compact: only valid with the atp encoder")

    pca_components = _get(obj, "pca_components", int, "config", None)
    if encoder == "pca":
        if pca_components is None:
            raise ConfigError(
                "config.pca_components: required when encoder is \"pca\""
            )
        if pca_components < 1:
            raise ConfigError(
                f"config.pca_components: must be >= 1, got {pca_components}"
            )
    elif pca_components is not None:
        raise ConfigError(
            "config.pca_components: only valid with the pca encoder"
        )

    if encoder == "atp":
        if "threshold" not in obj:
            raise ConfigError(
                "config.threshold: required when encoder is \"atp\""
            )
        threshold = _parse_threshold(obj["threshold"])
    elif "threshold" in obj:
        raise ConfigError("config.threshold: only valid with the atp encoder")
    else:
        threshold = None

    noise = _parse_noise(obj["noise"]) if "noise" in obj else None
    attack = _parse_attack(obj["attack"]) if "attack" in obj else None
    if attack is not None and encoder == "amplitude":
        raise ConfigError(
            "config.attack: amplitude encoding has no input gradients"
        )

    seeds = obj.get("seeds", [0])
    if (
        not isinstance(seeds, list)
        or not seeds
        or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds)
    ):
        raise ConfigError("config.seeds: expected a non-empty integer list")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("config.seeds: seeds must be unique")

    side = _get(obj, "side", int, "config", 3)
    if side < 1:
        raise ConfigError(f"config.side: must be >= 1, got {side}")

    return ExperimentConfig(
        dataset=dataset,
        images=images,
        labels=labels,
        csv=csv,
        class_pair=(pair[0], pair[1]),
        side=side,
        n_train=_get(obj, "n_train", int, "config", 200),
        n_test=_get(obj, "n_test", int, "config", 200),
        balanced=_get(obj, "balanced", bool, "config", True),
        encoder=encoder,
        compact=compact,
        pca_components=pca_components,
        train=_parse_train(obj.get("train", {})),
        threshold=threshold,
        noise=noise,
        attack=attack,
        seeds=tuple(seeds),
        output=_get(obj, "output", str, "config", None),
        params_path=_get(obj, "params_path", str, "config", None),
        echo=obj,
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path} ({exc})")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON ({exc})")
    return config_from_jsonable(obj)


# gray CSV files carry side^2 pixels per row at the config's grid size;
# IDX files are downscaled from their native size by filter_pair
def _load_raw(config: ExperimentConfig) -> RawDataset:
    if config.dataset == "gray-csv":
        return load_gray_csv(config.csv, config.side)
    return load_idx(config.images, config.labels)


def _split(config: ExperimentConfig, raw: RawDataset, seed: int):
    spec = SplitSpec(
        n_train=config.n_train,
        n_test=config.n_test,
        seed=seed,
        balanced=config.balanced,
    )
    c0, c1 = config.class_pair
    return filter_pair(raw, c0, c1, spec, side=config.side)


def _train_config(config: ExperimentConfig, seed: int) -> TrainConfig:
    return dataclasses.replace(config.train, seed=seed)


def _threshold_problem(
    config: ExperimentConfig, train_set, test_set, seed: int, trace_path=None
) -> ThresholdProblem:
    ts = config.threshold
    return ThresholdProblem(
        train_set=train_set,
        test_set=test_set,
        train_config=_train_config(config, seed),
        tau_max=ts.tau_max,
        grad_step=ts.grad_step,
        grad_tol=ts.grad_tol,
        max_iters=ts.max_iters,
        history_size=ts.history_size,
        compact=config.compact,
        trace_path=trace_path,
    )


def _derived_seed(*stream) -> int:
    return int(np.random.default_rng(list(stream)).integers(0, 2**31))


def _run_one_seed(config: ExperimentConfig, raw: RawDataset, seed: int):
    """Train and evaluate one seed; returns (entry dict, params, pipeline)."""
    train_set, test_set = _split(config, raw, seed)
    tcfg = _train_config(config, seed)
    entry = {"seed": seed}
    if config.encoder == "atp":
        result = optimize_threshold(
            _threshold_problem(config, train_set, test_set, seed)
        )
        params = result.params_at_star
        # mirror the objective: an all-pruned winner falls back to the
        # plain layout, compact cannot host zero data qubits
        compact = config.compact and result.mask_at_star.kept_count() > 0
        pipeline = EncoderPipeline(
            "atp", mask=result.mask_at_star, compact=compact
        )
        entry["accuracy"] = result.best_accuracy
        entry["entropy"] = result.entropy_at_star
        entry["tau_star"] = result.tau_star
        entry["train_accuracy"] = None
    else:
        if config.encoder == "pca":
            model = pca_fit(train_set.images, config.pca_components)
            pipeline = EncoderPipeline("pca", pca=model)
        elif config.encoder == "amplitude":
            pipeline = EncoderPipeline("amplitude")
        else:
            pipeline = EncoderPipeline(config.encoder)
        report = fit_eval(train_set, test_set, tcfg, pipeline=pipeline)
        params = report.final_params
        entry["accuracy"] = report.test_accuracy
        entry["entropy"] = report.mean_entropy
        entry["train_accuracy"] = report.train_accuracy

    if config.noise is not None:
        ns = config.noise
        entry["noise_accuracy"] = {
            _p_key(p): noisy_evaluate(
                params,
                test_set,
                NoiseConfig(
                    p=p,
                    trajectories=ns.trajectories,
                    seed=_derived_seed(ns.seed, seed),
                    scope=ns.scope,
                ),
                pipeline=pipeline,
            )
            for p in ns.ps
        }

    if config.attack is not None:
        at = config.attack
        attack = AttackConfig(epsilon=at.epsilon, clip=at.clip)
        entry["attack_accuracy"] = fgsm_accuracy(
            params, test_set, attack, pipeline=pipeline
        )
        if at.adversarial_fraction is not None:
            hardened = adversarial_train(
                init_params(pipeline.data_qubits(config.side), seed),
                train_set,
                AdvTrainConfig(tcfg, attack, at.adversarial_fraction),
                pipeline=pipeline,
            )
            adv_clean, _ = evaluate(
                hardened.final_params, test_set, pipeline=pipeline
            )
            entry["adversarial_clean_accuracy"] = adv_clean
            entry["adversarial_attack_accuracy"] = fgsm_accuracy(
                hardened.final_params, test_set, attack, pipeline=pipeline
            )
    return entry, params, pipeline


def _p_key(p: float) -> str:
    return repr(float(p))


def _mean_std(values) -> dict:
    vals = np.asarray(values, dtype=float)
    return {"mean": float(vals.mean()), "stddev": float(vals.std(ddof=0))}


def aggregate_entries(per_seed) -> dict:
    """Mean and population stddev for every metric present on all seeds."""
    out = {}
    scalar_keys = [
        k
        for k in per_seed[0]
        if k != "seed"
        and not isinstance(per_seed[0][k], dict)
        and all(isinstance(e.get(k), (int, float)) for e in per_seed)
    ]
    for k in scalar_keys:
        out[k] = _mean_std([e[k] for e in per_seed])
    if "noise_accuracy" in per_seed[0]:
        out["noise_accuracy"] = {
            p: _mean_std([e["noise_accuracy"][p] for e in per_seed])
            for p in per_seed[0]["noise_accuracy"]
        }
    return out


def run_experiment(config: ExperimentConfig):
    """Full multi-seed run; returns (record, sidecar) ready to serialize."""
    t0 = time.perf_counter()
    raw = _load_raw(config)
    per_seed = []
    saved = []
    for seed in config.seeds:
        entry, params, pipeline = _run_one_seed(config, raw, seed)
        per_seed.append(entry)
        saved.append(
            {
                "seed": seed,
                "params": params_to_jsonable(params),
                "pipeline": pipeline_to_jsonable(pipeline),
            }
        )
    record = {
        "schema_version": SCHEMA_VERSION,
        "config": config.echo,
        "per_seed": per_seed,
        "aggregate": aggregate_entries(per_seed),
        "wall_time": time.perf_counter() - t0,
    }
    sidecar = {"schema_version": SCHEMA_VERSION, "per_seed": saved}
    return record, sidecar


def sweep_experiment(config: ExperimentConfig, taus):
    """Accuracy/entropy per threshold, first config seed, memoized masks."""
    if config.encoder != "atp":
        raise ConfigError(
            "config.encoder: a threshold sweep needs the atp encoder"
        )
    tau_max = config.threshold.tau_max
    for tau in taus:
        if not 0.0 <= tau <= tau_max:
            raise ConfigError(f"taus: {tau} outside [0, {tau_max}]")
    raw = _load_raw(config)
    seed = config.seeds[0]
    train_set, test_set = _split(config, raw, seed)
    objective = _Objective(
        _threshold_problem(config, train_set, test_set, seed)
    )
    rows = []
    for tau in taus:
        objective(float(tau))
        row = objective.row_for(float(tau))
        rows.append(
            {
                "tau": float(tau),
                "accuracy": row["accuracy"],
                "entropy": row["entropy"],
            }
        )
    return rows


def optimize_experiment(config: ExperimentConfig, trace_path=None):
    """One threshold optimization on the first config seed."""
    if config.encoder != "atp":
        raise ConfigError(
            "config.encoder: threshold optimization needs the atp encoder"
        )
    t0 = time.perf_counter()
    raw = _load_raw(config)
    seed = config.seeds[0]
    train_set, test_set = _split(config, raw, seed)
    if trace_path is not None and os.path.exists(trace_path):
        os.remove(trace_path)  # the trace appends; start each run clean
    result = optimize_threshold(
        _threshold_problem(config, train_set, test_set, seed, trace_path)
    )
    record = {
        "schema_version": SCHEMA_VERSION,
        "config": config.echo,
        "seed": seed,
        "tau_star": result.tau_star,
        "best_accuracy": result.best_accuracy,
        "entropy_at_star": result.entropy_at_star,
        "converged": result.converged,
        "used_fallback": result.used_fallback,
        "evaluations": [[t, f] for t, f in result.evaluations],
        "mask": mask_to_jsonable(result.mask_at_star),
        "params": params_to_jsonable(result.params_at_star),
        "wall_time": time.perf_counter() - t0,
    }
    return record, result


def _load_sidecar(config: ExperimentConfig) -> dict:
    if config.params_path is None:
        raise ConfigError(
            "config.params_path: required to evaluate a saved model"
        )
    with open(config.params_path, "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    by_seed = {e["seed"]: e for e in sidecar.get("per_seed", [])}
    for seed in config.seeds:
        if seed not in by_seed:
            raise ConfigError(
                f"config.seeds: seed {seed} not present in "
                f"{config.params_path}"
            )
    return by_seed


def attack_experiment(config: ExperimentConfig):
    """FGSM evaluation of saved per-seed models on their test splits."""
    if config.attack is None:
        raise ConfigError("config.attack: required for the attack command")
    by_seed = _load_sidecar(config)
    raw = _load_raw(config)
    attack = AttackConfig(
        epsilon=config.attack.epsilon, clip=config.attack.clip
    )
    t0 = time.perf_counter()
    per_seed = []
    for seed in config.seeds:
        _, test_set = _split(config, raw, seed)
        params = params_from_jsonable(by_seed[seed]["params"])
        pipeline = pipeline_from_jsonable(by_seed[seed]["pipeline"])
        clean, _ = evaluate(params, test_set, pipeline=pipeline)
        per_seed.append(
            {
                "seed": seed,
                "clean_accuracy": clean,
                "attack_accuracy": fgsm_accuracy(
                    params, test_set, attack, pipeline=pipeline
                ),
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config.echo,
        "per_seed": per_seed,
        "aggregate": aggregate_entries(per_seed),
        "wall_time": time.perf_counter() - t0,
    }


def noise_experiment(config: ExperimentConfig):
    """Noise sweep of saved per-seed models on their test splits."""
    if config.noise is None:
        raise ConfigError("config.noise: required for the noise command")
    by_seed = _load_sidecar(config)
    raw = _load_raw(config)
    ns = config.noise
    t0 = time.perf_counter()
    per_seed = []
    for seed in config.seeds:
        _, test_set = _split(config, raw, seed)
        params = params_from_jsonable(by_seed[seed]["params"])
        pipeline = pipeline_from_jsonable(by_seed[seed]["pipeline"])
        clean, _ = evaluate(params, test_set, pipeline=pipeline)
        per_seed.append(
            {
                "seed": seed,
                "clean_accuracy": clean,
                "noise_accuracy": {
                    _p_key(p): noisy_evaluate(
                        params,
                        test_set,
                        NoiseConfig(
                            p=p,
                            trajectories=ns.trajectories,
                            seed=_derived_seed(ns.seed, seed),
                            scope=ns.scope,
                        ),
                        pipeline=pipeline,
                    )
                    for p in ns.ps
                },
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config.echo,
        "per_seed": per_seed,
        "aggregate": aggregate_entries(per_seed),
        "wall_time": time.perf_counter() - t0,
    }


# ------------------------------------------------------------------- output


def write_json_atomic(path: str, obj):
    """Serialize then rename into place so readers never see partial files."""
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    os.replace(tmp, path)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv_atomic(path: str, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def per_seed_csv(record) -> tuple:
    """(header, rows) mirroring the record's per-seed entries."""
    per_seed = record["per_seed"]
    scalar_keys = sorted(
        k
        for k in per_seed[0]
        if k != "seed" and not isinstance(per_seed[0][k], dict)
    )
    noise_keys = []
    if "noise_accuracy" in per_seed[0]:
        noise_keys = sorted(
            per_seed[0]["noise_accuracy"], key=lambda s: float(s)
        )
    header = ["seed"] + scalar_keys + [f"noise_{p}" for p in noise_keys]
    rows = []
    for e in per_seed:
        row = [e["seed"]]
        row += [e[k] for k in scalar_keys]
        row += [e["noise_accuracy"][p] for p in noise_keys]
        rows.append(row)
    return header, rows


def table_from_records(records, entropy: bool = False):
    """Class-pair rows by encoder columns of aggregate means.

    Returns (csv header+rows, aligned text).  Mixing grid sides or giving
    two results for one cell is refused.
    """
    if not records:
        raise ConfigError("table: needs at least one result file")
    metric = "entropy" if entropy else "accuracy"
    sides = set()
    cells = {}
    for rec in records:
        if not isinstance(rec, dict) or "aggregate" not in rec or "config" not in rec:
            raise ConfigError(
                "table: an input is not a result file "
                "(missing config or aggregate)"
            )
        cfg = rec["config"]
        side = cfg.get("side", 3)
        sides.add(side)
        if len(sides) > 1:
            raise ConfigError(
                f"table: incompatible results, grid sides {sorted(sides)}"
            )
        pair = tuple(cfg.get("class_pair", ("?", "?")))
        encoder = cfg.get("encoder", "?")
        agg = rec.get("aggregate", {})
        if metric not in agg:
            raise ConfigError(
                f"table: a result for {pair}/{encoder} has no {metric} aggregate"
            )
        key = (pair, encoder)
        if key in cells:
            raise ConfigError(
                f"table: duplicate results for class pair {pair} "
                f"with encoder {encoder!r}"
            )
        cells[key] = agg[metric]["mean"]
    pairs = sorted({pair for pair, _ in cells})
    encoders = sorted({enc for _, enc in cells})
    header = ["class_pair"] + encoders
    rows = []
    for pair in pairs:
        label = f"{pair[0]}-{pair[1]}"
        rows.append(
            [label]
            + [cells.get((pair, enc)) for enc in encoders]
        )
    width = max(
        len(h) for h in header + [r[0] for r in rows]
    )
    num_w = max([len(_cell(v)) for r in rows for v in r[1:]] + [8])
    text_lines = [
        header[0].ljust(width)
        + "".join(h.rjust(num_w + 2) for h in header[1:])
    ]
    for row in rows:
        text_lines.append(
            str(row[0]).ljust(width)
            + "".join(_cell(v).rjust(num_w + 2) for v in row[1:])
        )
    return (header, rows), "\n".join(text_lines)
