"""End-to-end subcommand behavior through main(): files written, exit codes."""

import json

import pytest

from qprune.cli import main

from toyset import config_dict, make_toy_csv, write_config


@pytest.fixture(scope="module")
def toy_csv(tmp_path_factory):
    return make_toy_csv(tmp_path_factory.mktemp("toy") / "toy.csv")


def run_cli(*argv):
    return main(list(argv))


def test_run_writes_json_csv_and_sidecar(toy_csv, tmp_path, capsys):
    out = tmp_path / "run.json"
    cfg = write_config(
        tmp_path / "cfg.json", config_dict(toy_csv, output=str(out))
    )
    assert run_cli("run", "--config", cfg) == 0
    assert out.exists()
    assert (tmp_path / "run.csv").exists()
    assert (tmp_path / "run.params.json").exists()
    record = json.loads(out.read_text())
    assert record["schema_version"] == 1
    assert "wrote" in capsys.readouterr().out


def test_out_flag_overrides_config_output(toy_csv, tmp_path):
    cfg = write_config(tmp_path / "cfg.json", config_dict(toy_csv))
    out = tmp_path / "elsewhere.json"
    assert run_cli("run", "--config", cfg, "--out", str(out)) == 0
    assert out.exists()


def test_missing_output_is_a_config_error(toy_csv, tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", config_dict(toy_csv))
    assert run_cli("run", "--config", cfg) == 2
    assert "output" in capsys.readouterr().err


def test_seeds_flag_overrides_config(toy_csv, tmp_path):
    out = tmp_path / "run.json"
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(toy_csv, seeds=[0], output=str(out)),
    )
    assert run_cli("run", "--config", cfg, "--seeds", "2,3") == 0
    record = json.loads(out.read_text())
    assert [e["seed"] for e in record["per_seed"]] == [2, 3]
    assert record["config"]["seeds"] == [2, 3]


def test_bad_seeds_flag_is_a_config_error(toy_csv, tmp_path, capsys):
    cfg = write_config(
        tmp_path / "cfg.json", config_dict(toy_csv, output="x.json")
    )
    assert run_cli("run", "--config", cfg, "--seeds", "1,one") == 2
    assert "--seeds" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert run_cli("run", "--config", str(tmp_path / "absent.json")) == 2
    assert "config" in capsys.readouterr().err


def test_invalid_config_json_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert run_cli("run", "--config", str(cfg)) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_atp_without_threshold_exits_2_naming_the_block(
    toy_csv, tmp_path, capsys
):
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(toy_csv, encoder="atp", output="x.json"),
    )
    assert run_cli("run", "--config", cfg) == 2
    assert "config.threshold" in capsys.readouterr().err


def test_missing_dataset_file_exits_3(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(tmp_path / "absent.csv", output=str(tmp_path / "o.json")),
    )
    assert run_cli("run", "--config", cfg) == 3
    assert "data error" in capsys.readouterr().err


def test_malformed_dataset_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1,2\n")  # wrong field count for side 2
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(bad, output=str(tmp_path / "o.json")),
    )
    assert run_cli("run", "--config", cfg) == 3
    assert "expected 5 fields" in capsys.readouterr().err


def test_insufficient_samples_exit_3(toy_csv, tmp_path):
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(toy_csv, n_train=600, output=str(tmp_path / "o.json")),
    )
    assert run_cli("run", "--config", cfg) == 3


def test_corrupt_sidecar_exits_4(toy_csv, tmp_path, capsys):
    sidecar = tmp_path / "p.json"
    sidecar.write_text(
        json.dumps(
            {
                "schema_version": 1,
                "per_seed": [
                    {
                        "seed": 0,
                        "params": {"thetas": [[1.0]]},
                        "pipeline": {"kind": "angle"},
                    }
                ],
            }
        )
    )
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(
            toy_csv,
            attack={"epsilon": 0.2},
            params_path=str(sidecar),
            output=str(tmp_path / "o.json"),
        ),
    )
    assert run_cli("attack", "--config", cfg) == 4
    assert "error" in capsys.readouterr().err


def test_unknown_subcommand_raises_system_exit():
    with pytest.raises(SystemExit):
        main(["plot"])


# ------------------------------------------------------------------- sweep


def test_sweep_writes_rows_in_flag_order(toy_csv, tmp_path):
    out = tmp_path / "sweep.json"
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(toy_csv, encoder="atp", threshold={}, output=str(out)),
    )
    assert run_cli("sweep", "--config", cfg, "--taus", "0.5,0,0.25") == 0
    lines = (tmp_path / "sweep.csv").read_text().strip().split("\n")
    assert lines[0] == "tau,accuracy,entropy"
    assert [line.split(",")[0] for line in lines[1:]] == ["0.5", "0.0", "0.25"]
    record = json.loads(out.read_text())
    assert [r["tau"] for r in record["rows"]] == [0.5, 0.0, 0.25]


def test_sweep_csv_and_json_agree_exactly(toy_csv, tmp_path):
    out = tmp_path / "sweep.json"
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(toy_csv, encoder="atp", threshold={}, output=str(out)),
    )
    assert run_cli("sweep", "--config", cfg, "--taus", "0,0.3") == 0
    record = json.loads(out.read_text())
    lines = (tmp_path / "sweep.csv").read_text().strip().split("\n")
    for row, line in zip(record["rows"], lines[1:]):
        tau, acc, ent = line.split(",")
        assert tau == json.dumps(row["tau"])
        assert acc == json.dumps(row["accuracy"])
        assert ent == json.dumps(row["entropy"])


def test_sweep_tau_out_of_range_exits_2(toy_csv, tmp_path, capsys):
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(
            toy_csv,
            encoder="atp",
            threshold={"tau_max": 0.5},
            output=str(tmp_path / "o.json"),
        ),
    )
    assert run_cli("sweep", "--config", cfg, "--taus", "0.9") == 2
    assert "outside" in capsys.readouterr().err


def test_sweep_bad_taus_flag_exits_2(toy_csv, tmp_path):
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(
            toy_csv, encoder="atp", threshold={}, output=str(tmp_path / "o.json")
        ),
    )
    assert run_cli("sweep", "--config", cfg, "--taus", "0.1,zero") == 2


# ---------------------------------------------------------------- optimize


def test_optimize_writes_record_and_fresh_trace(toy_csv, tmp_path):
    out = tmp_path / "opt.json"
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(
            toy_csv,
            encoder="atp",
            threshold={"max_iters": 3},
            output=str(out),
        ),
    )
    assert run_cli("optimize", "--config", cfg) == 0
    record = json.loads(out.read_text())
    assert 0.0 <= record["tau_star"] <= 1.0
    trace = tmp_path / "opt.trace.jsonl"
    count = len(trace.read_text().strip().split("\n"))
    assert count == len(record["evaluations"])
    # rerunning replaces the trace rather than appending to it
    assert run_cli("optimize", "--config", cfg) == 0
    assert len(trace.read_text().strip().split("\n")) == count


def test_optimize_rerun_is_byte_identical_modulo_wall_time(toy_csv, tmp_path):
    out = tmp_path / "opt.json"
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(
            toy_csv,
            encoder="atp",
            threshold={"max_iters": 2},
            output=str(out),
        ),
    )
    assert run_cli("optimize", "--config", cfg) == 0
    first = json.loads(out.read_text())
    assert run_cli("optimize", "--config", cfg) == 0
    second = json.loads(out.read_text())
    first.pop("wall_time")
    second.pop("wall_time")
    assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)


# ----------------------------------------------------- attack, noise, table


@pytest.fixture(scope="module")
def saved_run_files(toy_csv, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("saved")
    out = out_dir / "base.json"
    cfg = write_config(
        out_dir / "cfg.json", config_dict(toy_csv, output=str(out))
    )
    assert main(["run", "--config", cfg]) == 0
    return out_dir


def test_attack_subcommand_round_trip(toy_csv, saved_run_files, tmp_path):
    out = tmp_path / "attacked.json"
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(
            toy_csv,
            attack={"epsilon": 0.2},
            params_path=str(saved_run_files / "base.params.json"),
            output=str(out),
        ),
    )
    assert run_cli("attack", "--config", cfg) == 0
    record = json.loads(out.read_text())
    base = json.loads((saved_run_files / "base.json").read_text())
    assert (
        record["per_seed"][0]["clean_accuracy"]
        == base["per_seed"][0]["accuracy"]
    )
    assert (tmp_path / "attacked.csv").exists()


def test_noise_subcommand_round_trip(toy_csv, saved_run_files, tmp_path):
    out = tmp_path / "noised.json"
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(
            toy_csv,
            noise={"ps": [0.0, 0.05], "trajectories": 20},
            params_path=str(saved_run_files / "base.params.json"),
            output=str(out),
        ),
    )
    assert run_cli("noise", "--config", cfg) == 0
    record = json.loads(out.read_text())
    entry = record["per_seed"][0]
    assert entry["noise_accuracy"]["0.0"] == entry["clean_accuracy"]
    header = (tmp_path / "noised.csv").read_text().split("\n")[0]
    assert header == "seed,clean_accuracy,noise_0.0,noise_0.05"


def test_table_from_run_files(toy_csv, saved_run_files, tmp_path, capsys):
    atp_out = tmp_path / "atp.json"
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(
            toy_csv,
            encoder="atp",
            threshold={"max_iters": 2},
            output=str(atp_out),
        ),
    )
    assert run_cli("run", "--config", cfg) == 0
    table_csv = tmp_path / "table.csv"
    assert (
        run_cli(
            "table",
            str(saved_run_files / "base.json"),
            str(atp_out),
            "--out",
            str(table_csv),
        )
        == 0
    )
    lines = table_csv.read_text().strip().split("\n")
    assert lines[0] == "class_pair,angle,atp"
    assert lines[1].startswith("0-1,")
    text = capsys.readouterr().out
    assert "angle" in text and "atp" in text

    assert run_cli("table", str(saved_run_files / "base.json"), "--entropy") == 0
    entropy_text = capsys.readouterr().out
    base = json.loads((saved_run_files / "base.json").read_text())
    assert repr(base["aggregate"]["entropy"]["mean"]) in entropy_text


def test_table_glob_pattern_expands(saved_run_files, capsys):
    pattern = str(saved_run_files / "base.js*n")
    assert run_cli("table", pattern) == 0
    assert "angle" in capsys.readouterr().out


def test_table_missing_file_exits_3(tmp_path):
    assert run_cli("table", str(tmp_path / "absent.json")) == 3


def test_table_non_result_json_exits_2(tmp_path):
    bad = tmp_path / "notes.json"
    bad.write_text(json.dumps({"hello": 1}))
    assert run_cli("table", str(bad)) == 2


def test_run_rerun_byte_identical_modulo_wall_time(toy_csv, tmp_path):
    out = tmp_path / "run.json"
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(
            toy_csv,
            seeds=[0, 1],
            noise={"ps": [0.05], "trajectories": 20},
            output=str(out),
        ),
    )
    assert run_cli("run", "--config", cfg) == 0
    first = out.read_text()
    first_csv = (tmp_path / "run.csv").read_text()
    assert run_cli("run", "--config", cfg) == 0
    second = out.read_text()
    assert (tmp_path / "run.csv").read_text() == first_csv

    a, b = json.loads(first), json.loads(second)
    a.pop("wall_time")
    b.pop("wall_time")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_run_csv_agrees_with_json_exactly(toy_csv, tmp_path):
    out = tmp_path / "run.json"
    cfg = write_config(
        tmp_path / "cfg.json",
        config_dict(
            toy_csv,
            seeds=[0, 1],
            noise={"ps": [0.05], "trajectories": 20},
            output=str(out),
        ),
    )
    assert run_cli("run", "--config", cfg) == 0
    record = json.loads(out.read_text())
    lines = (tmp_path / "run.csv").read_text().strip().split("\n")
    header = lines[0].split(",")
    for entry, line in zip(record["per_seed"], lines[1:]):
        cells = line.split(",")
        for key, cell in zip(header, cells):
            if key.startswith("noise_"):
                want = entry["noise_accuracy"][key[len("noise_") :]]
            else:
                want = entry[key]
            if want is None:
                assert cell == ""
            else:
                assert cell == json.dumps(want)
