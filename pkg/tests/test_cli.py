"""End-to-end checks of the command-line surface.

Each command is driven in-process through main(argv) so exit codes, artifact
layout, and the resolved-config echo can be asserted quickly; one subprocess
smoke test covers the installed entry point.
"""

import csv
import json
import subprocess
import sys

import pytest

from dglight.cli import main
from dglight.critic import CriticConfig, init_critic_params, load_critic, save_critic
from dglight.policy import init_mock_params, load_mock_params, save_mock_params
from dglight.rollout import load_records
from dglight.sim import load_flow, load_network

SMALL = {"embed_dim": 8, "heads": 2, "head_dim": 4, "q_hidden": 8}

CSV_COLUMNS = ["controller", "dataset", "seed", "att", "aql", "awt"]


def run_cli(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def write_config(tmp_path, name="config.json", **body):
    path = tmp_path / name
    path.write_text(json.dumps(body))
    return path


# -- gen-net --------------------------------------------------------------------------


def test_gen_net_writes_loadable_artifacts(tmp_path):
    out = tmp_path / "gen"
    assert run_cli("gen-net", "--grid", "2x2", "--seed", 7, "--out", out) == 0

    net = load_network(out / "network.json")
    flow = load_flow(out / "flow.json")
    assert len(net.real_ids) == 4
    assert len(flow.entries) > 0

    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["command"] == "gen-net"
    assert resolved["seed"] == 7
    assert resolved["grid"] == "2x2"


def test_gen_net_requires_grid(tmp_path, capsys):
    assert run_cli("gen-net", "--out", tmp_path / "x") == 1
    assert "gen-net needs --grid" in capsys.readouterr().err


def test_gen_net_rejects_malformed_grid(tmp_path, capsys):
    assert run_cli("gen-net", "--grid", "3by4", "--out", tmp_path / "x") == 1
    assert "RxC" in capsys.readouterr().err


def test_default_out_dir_is_runs_command(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run_cli("gen-net", "--grid", "1x1") == 0
    assert (tmp_path / "runs" / "gen-net" / "network.json").exists()


# -- import-cityflow ------------------------------------------------------------------


def cityflow_files(tmp_path):
    def pt(x, y):
        return {"x": x, "y": y}

    inters = [{"id": "center", "point": pt(0, 0), "virtual": False}]
    roads = []
    for arm, (x, y) in (("east", (300, 0)), ("west", (-300, 0)),
                        ("north", (0, 300)), ("south", (0, -300))):
        inters.append({"id": arm, "point": pt(x, y), "virtual": True})
        roads.append({"id": f"road_{arm}_in", "startIntersection": arm,
                      "endIntersection": "center",
                      "points": [pt(x, y), pt(0, 0)], "lanes": [{"width": 3.0}] * 3})
        roads.append({"id": f"road_{arm}_out", "startIntersection": "center",
                      "endIntersection": arm,
                      "points": [pt(0, 0), pt(x, y)], "lanes": [{"width": 3.0}] * 3})
    roadnet = tmp_path / "roadnet.json"
    roadnet.write_text(json.dumps({"intersections": inters, "roads": roads}))

    flow = tmp_path / "cityflow_flow.json"
    flow.write_text(json.dumps([{
        "vehicle": {"length": 5.0},
        "route": ["road_east_in", "road_west_out"],
        "interval": 30.0,
        "startTime": 0.0,
        "endTime": 60.0,
    }]))
    return roadnet, flow


def test_import_cityflow_converts_to_native_format(tmp_path, capsys):
    roadnet, flow = cityflow_files(tmp_path)
    out = tmp_path / "imported"
    assert run_cli("import-cityflow", "--network", roadnet, "--flow", flow,
                   "--out", out) == 0

    net = load_network(out / "network.json")
    native_flow = load_flow(out / "flow.json")
    assert len(net.real_ids) == 1
    assert len(native_flow.entries) == 1
    assert "imported 1 intersections" in capsys.readouterr().out


def test_import_cityflow_needs_both_files(tmp_path, capsys):
    roadnet, _ = cityflow_files(tmp_path)
    assert run_cli("import-cityflow", "--network", roadnet, "--out", tmp_path / "x") == 1
    assert "needs --network ROADNET --flow FLOW" in capsys.readouterr().err


# -- baseline / eval ------------------------------------------------------------------


def test_baseline_writes_metrics_bundle(tmp_path):
    out = tmp_path / "base"
    assert run_cli("baseline", "--controller", "fixedtime", "--grid", "1x1",
                   "--episode", 300, "--interval", 30, "--seed", 3, "--out", out) == 0

    rows = read_csv(out / "metrics.csv")
    assert rows[0] == CSV_COLUMNS
    assert rows[1][:3] == ["fixedtime", "grid1x1", "3"]
    assert float(rows[1][3]) > 0.0  # ATT

    text = (out / "metrics.txt").read_text()
    assert "average travel time" in text
    assert (out / "resolved_config.json").exists()


def test_baseline_rejects_learned_controllers(tmp_path, capsys):
    assert run_cli("baseline", "--controller", "critic-greedy", "--grid", "1x1",
                   "--out", tmp_path / "x") == 1
    assert "must be one of fixedtime, maxpressure, random" in capsys.readouterr().err


def test_eval_requires_some_controller(tmp_path, capsys):
    assert run_cli("eval", "--grid", "1x1", "--out", tmp_path / "x") == 1
    assert "must be one of" in capsys.readouterr().err


def test_eval_repeat_runs_are_byte_identical(tmp_path):
    args = ("eval", "--controller", "maxpressure", "--grid", "1x2",
            "--episode", 300, "--interval", 30, "--seed", 5)
    assert run_cli(*args, "--out", tmp_path / "a") == 0
    assert run_cli(*args, "--out", tmp_path / "b") == 0
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == \
        (tmp_path / "b" / "metrics.csv").read_bytes()


def test_eval_replays_from_resolved_config(tmp_path):
    out1 = tmp_path / "first"
    assert run_cli("eval", "--controller", "random", "--grid", "1x1",
                   "--episode", 300, "--interval", 30, "--seed", 9, "--out", out1) == 0

    # the echoed config alone must reproduce the run bit for bit
    out2 = tmp_path / "second"
    assert run_cli("eval", "--config", out1 / "resolved_config.json", "--out", out2) == 0
    assert (out1 / "metrics.csv").read_bytes() == (out2 / "metrics.csv").read_bytes()


def test_eval_critic_greedy_from_checkpoint(tmp_path):
    ccfg = CriticConfig(**SMALL)
    save_critic(tmp_path / "critic.json", init_critic_params(ccfg, seed=0), ccfg)
    out = tmp_path / "greedy"
    assert run_cli("eval", "--controller", "critic-greedy",
                   "--critic", tmp_path / "critic.json", "--grid", "1x1",
                   "--episode", 150, "--interval", 30, "--out", out) == 0
    assert (out / "metrics.csv").exists()


def test_eval_critic_greedy_needs_checkpoint(tmp_path, capsys):
    assert run_cli("eval", "--controller", "critic-greedy", "--grid", "1x1",
                   "--out", tmp_path / "x") == 1
    assert "needs --critic" in capsys.readouterr().err


def test_eval_mock_policy_with_saved_params(tmp_path):
    save_mock_params(tmp_path / "params.json", init_mock_params())
    out = tmp_path / "mock"
    assert run_cli("eval", "--controller", "mock-policy", "--params",
                   tmp_path / "params.json", "--grid", "1x1",
                   "--episode", 150, "--interval", 30, "--out", out) == 0
    rows = read_csv(out / "metrics.csv")
    assert rows[1][0] == "mock-policy"


def test_eval_on_saved_scenario_files(tmp_path):
    gen = tmp_path / "gen"
    assert run_cli("gen-net", "--grid", "1x1", "--seed", 2, "--out", gen) == 0
    out = tmp_path / "run"
    assert run_cli("eval", "--controller", "fixedtime",
                   "--network", gen / "network.json", "--flow", gen / "flow.json",
                   "--episode", 300, "--interval", 30, "--out", out) == 0
    rows = read_csv(out / "metrics.csv")
    assert rows[1][1] == "network"  # dataset label from the file stem


# -- scenario and config resolution ---------------------------------------------------


def test_grid_and_network_are_mutually_exclusive(tmp_path, capsys):
    assert run_cli("eval", "--controller", "random", "--grid", "1x1",
                   "--network", "whatever.json", "--out", tmp_path / "x") == 1
    assert "exactly one of --grid or --network" in capsys.readouterr().err


def test_missing_network_file_reported(tmp_path, capsys):
    assert run_cli("eval", "--controller", "random",
                   "--network", tmp_path / "nope.json", "--out", tmp_path / "x") == 1
    assert "network file not found" in capsys.readouterr().err


def test_config_file_settings_apply_and_flags_win(tmp_path):
    cfg = write_config(tmp_path, grid="1x1", seed=9, episode=150, interval=30,
                       controller="random")
    out = tmp_path / "from_config"
    assert run_cli("eval", "--config", cfg, "--out", out) == 0
    assert json.loads((out / "resolved_config.json").read_text())["seed"] == 9

    out2 = tmp_path / "flag_override"
    assert run_cli("eval", "--config", cfg, "--seed", 11, "--out", out2) == 0
    resolved = json.loads((out2 / "resolved_config.json").read_text())
    assert resolved["seed"] == 11
    assert resolved["episode"] == 150


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, grid="1x1", turbo=True)
    assert run_cli("eval", "--config", cfg, "--controller", "random",
                   "--out", tmp_path / "x") == 1
    assert "unknown config keys: ['turbo']" in capsys.readouterr().err


def test_non_json_config_rejected(tmp_path, capsys):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{not json")
    assert run_cli("eval", "--config", cfg, "--out", tmp_path / "x") == 1
    assert "config is not valid JSON" in capsys.readouterr().err


# -- train-critic ---------------------------------------------------------------------


def test_train_critic_writes_checkpoint_and_history(tmp_path):
    cfg = write_config(tmp_path, critic_config=SMALL)
    out = tmp_path / "critic_run"
    assert run_cli("train-critic", "--config", cfg, "--grid", "1x1",
                   "--episode", 120, "--interval", 30, "--rounds", 2,
                   "--out", out) == 0

    critic = load_critic(out / "critic.json", None)
    assert critic.config == CriticConfig(**SMALL)

    rows = read_csv(out / "losses.csv")
    assert rows[0] == ["round", "epsilon", "loss_mean", "updates", "buffer", "eval_att"]
    assert len(rows) == 3
    assert [r[0] for r in rows[1:]] == ["0", "1"]


def test_train_critic_bad_config_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, critic_config={"embed_dim": 8, "bogus_knob": 1})
    assert run_cli("train-critic", "--config", cfg, "--grid", "1x1",
                   "--rounds", 1, "--out", tmp_path / "x") == 1
    assert "bad critic_config" in capsys.readouterr().err


# -- rollout --------------------------------------------------------------------------


def test_rollout_writes_one_record_per_step(tmp_path):
    cfg = write_config(tmp_path, critic_config=SMALL)
    out = tmp_path / "roll"
    assert run_cli("rollout", "--config", cfg, "--grid", "1x1",
                   "--episode", 600, "--interval", 30, "--out", out) == 0

    lines = (out / "records.jsonl").read_text().splitlines()
    assert len(lines) == 21  # schema header + one record per decision step
    records = load_records(out / "records.jsonl")
    assert len(records) == 20
    assert all(len(r.candidates) == 4 for r in records)


def test_rollout_with_trained_critic_checkpoint(tmp_path):
    ccfg = CriticConfig(**SMALL)
    save_critic(tmp_path / "critic.json", init_critic_params(ccfg, seed=1), ccfg)
    out = tmp_path / "roll2"
    assert run_cli("rollout", "--grid", "1x1", "--critic", tmp_path / "critic.json",
                   "--episode", 150, "--interval", 30, "--k", 2, "--out", out) == 0
    records = load_records(out / "records.jsonl")
    assert len(records) == 5
    assert all(len(r.candidates) == 2 for r in records)


# -- jsgrpo-rollout -------------------------------------------------------------------


def test_jsgrpo_rollout_records_carry_meta(tmp_path):
    out = tmp_path / "js"
    assert run_cli("jsgrpo-rollout", "--grid", "1x1", "--episode", 150,
                   "--interval", 30, "--k", 2, "--horizon", 2, "--gamma", 0.5,
                   "--alpha", 0.5, "--beta", 0.2, "--out", out) == 0

    records = load_records(out / "records.jsonl")
    assert len(records) == 5
    for r in records:
        assert r.js_meta == {"horizon": 2, "gamma": 0.5, "alpha": 0.5, "beta": 0.2}


# -- grpo-train -----------------------------------------------------------------------


def test_grpo_train_full_artifact_set(tmp_path):
    cfg = write_config(tmp_path, critic_config=SMALL)
    roll = tmp_path / "roll"
    assert run_cli("rollout", "--config", cfg, "--grid", "1x1",
                   "--episode", 300, "--interval", 30, "--out", roll) == 0

    out = tmp_path / "train"
    assert run_cli("grpo-train", "--records", roll / "records.jsonl",
                   "--out", out) == 0

    params = load_mock_params(out / "mock_policy.json")
    assert params.weight.shape[1] == 4
    assert params.bias.shape == (4,)

    rows = read_csv(out / "diagnostics.csv")
    assert rows[0] == ["epoch", "batch", "records", "completions", "surrogate",
                       "kl", "mean_ratio", "clipped_fraction"]
    assert len(rows) >= 2

    lines = (out / "dataset.jsonl").read_text().splitlines()
    header = json.loads(lines[0])
    assert "schema" in header
    body = json.loads(lines[1])
    assert set(body) == {"prompt", "q_values", "r_invalid", "provenance"}
    assert len(lines) == 1 + 10  # 10 records from a 300 s episode


def test_grpo_train_resumes_from_params(tmp_path):
    cfg = write_config(tmp_path, critic_config=SMALL)
    roll = tmp_path / "roll"
    assert run_cli("rollout", "--config", cfg, "--grid", "1x1",
                   "--episode", 150, "--interval", 30, "--out", roll) == 0
    save_mock_params(tmp_path / "start.json", init_mock_params())

    out = tmp_path / "resume"
    assert run_cli("grpo-train", "--records", roll / "records.jsonl",
                   "--params", tmp_path / "start.json", "--out", out) == 0
    assert (out / "mock_policy.json").exists()


def test_grpo_train_needs_records(tmp_path, capsys):
    assert run_cli("grpo-train", "--out", tmp_path / "x") == 1
    assert "needs --records" in capsys.readouterr().err


def test_grpo_train_bad_grpo_config(tmp_path, capsys):
    cfg = write_config(tmp_path, grpo_config={"warp_speed": 9}, critic_config=SMALL)
    roll = tmp_path / "roll"
    assert run_cli("rollout", "--grid", "1x1", "--episode", 150, "--interval", 30,
                   "--config", write_config(tmp_path, "c2.json", critic_config=SMALL),
                   "--out", roll) == 0
    assert run_cli("grpo-train", "--config", cfg,
                   "--records", roll / "records.jsonl", "--out", tmp_path / "x") == 1
    assert "bad grpo_config" in capsys.readouterr().err


# -- entry point ----------------------------------------------------------------------


def test_module_entry_point_subprocess(tmp_path):
    out = tmp_path / "sub"
    proc = subprocess.run(
        [sys.executable, "-m", "dglight.cli", "gen-net", "--grid", "1x1",
         "--out", str(out)],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "network.json").exists()


def test_unknown_subcommand_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
