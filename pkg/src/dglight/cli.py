"""Command-line orchestration.

Every run resolves its settings from built-in defaults, then an optional
JSON config file, then command-line flags (flags win), and echoes the
resolved values into the output directory so the run can be reproduced
from that file alone.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import run as runners
from .critic import CriticConfig, freeze, init_critic_params, load_critic, save_critic, train_critic
from .grpo import GRPOConfig, export_dataset, grpo_train
from .jsgrpo import JSConfig, collect_episode_js
from .policy import (
    EndpointConfig,
    LlmPolicy,
    MockPolicy,
    endpoint_from_env,
    init_mock_params,
    load_mock_params,
    save_mock_params,
)
from .rollout import RolloutConfig, collect_episode, load_records, persist_records
from .sim import (
    SimConfig,
    build_grid_network,
    build_sim,
    import_cityflow,
    load_flow,
    load_network,
    save_flow,
    save_network,
    synthetic_flow,
)

CONTROLLERS = ("fixedtime", "maxpressure", "random", "critic-greedy", "mock-policy", "llm")
BASELINE_CONTROLLERS = ("fixedtime", "maxpressure", "random")
CSV_COLUMNS = ("controller", "dataset", "seed", "att", "aql", "awt")

_DEFAULTS = {
    "seed": 0,
    "grid": None,
    "network": None,
    "flow": None,
    "episode": 3600,
    "interval": 30,
    "controller": None,
    "k": 4,
    "horizon": 3,
    "gamma": 0.8,
    "alpha": 0.6,
    "beta": 0.3,
    "llm_url": None,
    "rounds": 20,
    "critic": None,
    "params": None,
    "records": None,
    "out": None,
    "critic_config": {},
    "grpo_config": {},
}


class CliError(Exception):
    pass


def _resolve(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    cfg = dict(_DEFAULTS)
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as f:
                file_cfg = json.load(f)
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise CliError(f"config is not valid JSON: {exc}") from exc
        unknown = set(file_cfg) - set(cfg) - {"command"}
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: v for k, v in file_cfg.items() if k != "command"})
    for key in cfg:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    return cfg


def _out_dir(cfg: dict, command: str) -> Path:
    out = Path(cfg["out"] or f"runs/{command}")
    out.mkdir(parents=True, exist_ok=True)
    cfg["out"] = str(out)
    return out


def _echo_config(cfg: dict, command: str, out: Path) -> None:
    body = {"command": command}
    body.update(cfg)
    with open(out / "resolved_config.json", "w", encoding="utf-8") as f:
        json.dump(body, f, indent=1, sort_keys=True)
        f.write("\n")


def _parse_grid(spec: str) -> tuple[int, int]:
    try:
        rows, cols = spec.lower().split("x")
        return int(rows), int(cols)
    except ValueError as exc:
        raise CliError(f"--grid wants RxC, got {spec!r}") from exc


def _resolve_scenario(cfg: dict):
    """(network, flow, dataset label); exactly one network source."""
    if bool(cfg["grid"]) == bool(cfg["network"]):
        raise CliError("exactly one of --grid or --network is required")
    if cfg["grid"]:
        rows, cols = _parse_grid(cfg["grid"])
        network = build_grid_network(rows, cols)
        dataset = f"grid{rows}x{cols}"
    else:
        path = Path(cfg["network"])
        if not path.exists():
            raise CliError(f"network file not found: {path}")
        network = load_network(path)
        dataset = path.stem
    if cfg["flow"]:
        fpath = Path(cfg["flow"])
        if not fpath.exists():
            raise CliError(f"flow file not found: {fpath}")
        flow = load_flow(fpath)
    else:
        flow = synthetic_flow(network, cfg["seed"])
    return network, flow, dataset


def _make_policy(cfg: dict):
    choice = cfg["controller"] or "mock-policy"
    if choice == "mock-policy":
        params = load_mock_params(cfg["params"]) if cfg["params"] else init_mock_params()
        return MockPolicy(params)
    if choice == "llm":
        endpoint = (EndpointConfig(base_url=cfg["llm_url"]) if cfg["llm_url"]
                    else endpoint_from_env())
        return LlmPolicy(endpoint)
    raise CliError(f"generation needs --controller mock-policy or llm, got {choice!r}")


def _make_controller(cfg: dict, network):
    name = cfg["controller"]
    if name == "fixedtime":
        return runners.make_fixed_time()
    if name == "maxpressure":
        return runners.make_max_pressure()
    if name == "random":
        return runners.make_random(cfg["seed"])
    if name == "critic-greedy":
        if not cfg["critic"]:
            raise CliError("--controller critic-greedy needs --critic CHECKPOINT")
        return runners.make_critic_greedy(load_critic(cfg["critic"], network))
    if name in ("mock-policy", "llm"):
        return runners.make_policy_controller(_make_policy(cfg), cfg["seed"])
    raise CliError(f"unknown controller {name!r}")


def _write_metrics(out: Path, cfg: dict, dataset: str, report) -> None:
    with open(out / "metrics.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_COLUMNS)
        w.writerow([cfg["controller"], dataset, cfg["seed"],
                    repr(report.att_s), repr(report.aql_veh), repr(report.awt_s)])
    with open(out / "metrics.txt", "w", encoding="utf-8") as f:
        f.write(f"controller: {cfg['controller']}\n"
                f"dataset: {dataset}\n"
                f"seed: {cfg['seed']}\n"
                f"average travel time [s]: {report.att_s:.3f}\n"
                f"average queue length [veh]: {report.aql_veh:.3f}\n"
                f"average waiting time [s]: {report.awt_s:.3f}\n"
                f"vehicles entered/departed: {report.vehicles_entered}/{report.vehicles_departed}\n")
    print(f"{cfg['controller']} on {dataset} seed {cfg['seed']}: "
          f"ATT {report.att_s:.2f}s AQL {report.aql_veh:.2f} AWT {report.awt_s:.2f}s")


def _critic_config(cfg: dict) -> CriticConfig:
    try:
        return CriticConfig(**cfg["critic_config"])
    except TypeError as exc:
        raise CliError(f"bad critic_config: {exc}") from exc


def _grpo_config(cfg: dict) -> GRPOConfig:
    body = dict(cfg["grpo_config"])
    body.setdefault("seed", cfg["seed"])
    try:
        return GRPOConfig(**body)
    except TypeError as exc:
        raise CliError(f"bad grpo_config: {exc}") from exc


# -- subcommands --------------------------------------------------------------------


def _cmd_gen_net(cfg: dict, out: Path) -> None:
    if not cfg["grid"]:
        raise CliError("gen-net needs --grid RxC")
    rows, cols = _parse_grid(cfg["grid"])
    network = build_grid_network(rows, cols)
    flow = synthetic_flow(network, cfg["seed"])
    save_network(network, out / "network.json")
    save_flow(flow, out / "flow.json")
    print(f"wrote {out / 'network.json'} and {out / 'flow.json'}")


def _cmd_import_cityflow(cfg: dict, out: Path) -> None:
    if not cfg["network"] or not cfg["flow"]:
        raise CliError("import-cityflow needs --network ROADNET --flow FLOW")
    network, flow, warnings = import_cityflow(cfg["network"], cfg["flow"])
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    save_network(network, out / "network.json")
    save_flow(flow, out / "flow.json")
    print(f"imported {len(network.real_ids)} intersections, {len(flow.entries)} flow entries")


def _cmd_run_controller(cfg: dict, out: Path, allowed: tuple[str, ...]) -> None:
    if cfg["controller"] not in allowed:
        raise CliError(f"--controller must be one of {', '.join(allowed)}")
    network, flow, dataset = _resolve_scenario(cfg)
    state = build_sim(network, flow, SimConfig(), seed=cfg["seed"])
    controller = _make_controller(cfg, network)
    report = runners.run_episode(state, controller, cfg["episode"], cfg["interval"])
    _write_metrics(out, cfg, dataset, report)


def _cmd_train_critic(cfg: dict, out: Path) -> None:
    network, flow, dataset = _resolve_scenario(cfg)
    ccfg = _critic_config(cfg)

    def factory():
        return build_sim(network, flow, SimConfig(), seed=cfg["seed"])

    params, history = train_critic(factory, ccfg, rounds=cfg["rounds"], seed=cfg["seed"],
                                   episode_s=cfg["episode"], interval_s=cfg["interval"])
    save_critic(out / "critic.json", params, ccfg)
    with open(out / "losses.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["round", "epsilon", "loss_mean", "updates", "buffer", "eval_att"])
        for row in history:
            w.writerow([row["round"], row["epsilon"], row["loss_mean"],
                        row["updates"], row["buffer"], row["eval_att"]])
    last = history[-1] if history else {}
    print(f"trained critic on {dataset}: {cfg['rounds']} rounds, "
          f"final eval ATT {last.get('eval_att')}")


def _cmd_rollout(cfg: dict, out: Path) -> None:
    network, flow, dataset = _resolve_scenario(cfg)
    state = build_sim(network, flow, SimConfig(), seed=cfg["seed"])
    ccfg = _critic_config(cfg)
    if cfg["critic"]:
        critic = load_critic(cfg["critic"], network)
    else:
        # untrained critic; fine for plumbing runs, poor for control quality
        critic = freeze(init_critic_params(ccfg, cfg["seed"]), network, ccfg)
    policy = _make_policy(cfg)
    rcfg = RolloutConfig(k=cfg["k"], episode_s=cfg["episode"],
                         interval_s=cfg["interval"], seed=cfg["seed"])
    result = collect_episode(state, policy, critic, rcfg)
    persist_records(result.records, out / "records.jsonl",
                    truncated=result.truncated, error=result.error)
    status = "truncated" if result.truncated else "complete"
    print(f"{len(result.records)} records ({status}) on {dataset}; "
          f"episode ATT {result.metrics.att_s:.2f}s")


def _cmd_jsgrpo_rollout(cfg: dict, out: Path) -> None:
    network, flow, dataset = _resolve_scenario(cfg)
    state = build_sim(network, flow, SimConfig(), seed=cfg["seed"])
    policy = _make_policy(cfg)
    jcfg = JSConfig(horizon=cfg["horizon"], gamma=cfg["gamma"],
                    alpha=cfg["alpha"], beta=cfg["beta"])
    rcfg = RolloutConfig(k=cfg["k"], episode_s=cfg["episode"],
                         interval_s=cfg["interval"], seed=cfg["seed"])
    result = collect_episode_js(state, policy, jcfg, rcfg)
    persist_records(result.records, out / "records.jsonl",
                    truncated=result.truncated, error=result.error)
    status = "truncated" if result.truncated else "complete"
    print(f"{len(result.records)} joint-scored records ({status}) on {dataset}; "
          f"episode ATT {result.metrics.att_s:.2f}s")


def _cmd_grpo_train(cfg: dict, out: Path) -> None:
    if not cfg["records"]:
        raise CliError("grpo-train needs --records FILE")
    records = load_records(cfg["records"])
    params = load_mock_params(cfg["params"]) if cfg["params"] else init_mock_params()
    gcfg = _grpo_config(cfg)
    trained, rows = grpo_train(records, params, gcfg)
    save_mock_params(out / "mock_policy.json", trained)
    with open(out / "diagnostics.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "batch", "records", "completions", "surrogate",
                    "kl", "mean_ratio", "clipped_fraction"])
        for r in rows:
            w.writerow([r["epoch"], r["batch"], r["records"], r["completions"],
                        r["surrogate"], r["kl"], r["mean_ratio"], r["clipped_fraction"]])
    export_dataset(records, out / "dataset.jsonl", r_invalid=gcfg.r_invalid)
    print(f"trained mock policy on {len(records)} records, {len(rows)} updates")


# -- argument parsing ----------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dglight",
                                     description="Traffic-signal control laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override file values")
        p.add_argument("--seed", type=int)
        p.add_argument("--grid", help="grid scenario, rows x cols, e.g. 3x4")
        p.add_argument("--network", help="network file (native JSON, or CityFlow roadnet for import)")
        p.add_argument("--flow", help="flow file (native JSON, or CityFlow flow for import)")
        p.add_argument("--episode", type=int, help="episode length in seconds")
        p.add_argument("--interval", type=int, help="action interval in seconds")
        p.add_argument("--out", help="output directory (default runs/<command>)")

    p = sub.add_parser("gen-net", help="generate a grid network and synthetic flow")
    common(p)

    p = sub.add_parser("import-cityflow", help="convert CityFlow roadnet/flow files")
    common(p)

    for name, help_text in (("baseline", "run a classical controller"),
                            ("eval", "evaluate any controller")):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--controller", choices=CONTROLLERS)
        p.add_argument("--critic", help="critic checkpoint (critic-greedy)")
        p.add_argument("--params", help="mock-policy checkpoint (mock-policy)")
        p.add_argument("--llm-url", dest="llm_url", help="completion endpoint (llm)")

    p = sub.add_parser("train-critic", help="DQN pretraining of the critic")
    common(p)
    p.add_argument("--rounds", type=int, help="training rounds (default 20)")

    p = sub.add_parser("rollout", help="collect critic-scored candidate records")
    common(p)
    p.add_argument("--controller", choices=("mock-policy", "llm"))
    p.add_argument("--critic", help="frozen critic checkpoint (default: fresh init)")
    p.add_argument("--params", help="mock-policy checkpoint")
    p.add_argument("--k", type=int, help="candidates per intersection")
    p.add_argument("--llm-url", dest="llm_url")

    p = sub.add_parser("jsgrpo-rollout", help="collect joint-scored records")
    common(p)
    p.add_argument("--controller", choices=("mock-policy", "llm"))
    p.add_argument("--params", help="mock-policy checkpoint")
    p.add_argument("--k", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--llm-url", dest="llm_url")

    p = sub.add_parser("grpo-train", help="train the mock policy on stored records")
    common(p)
    p.add_argument("--records", help="record file from rollout")
    p.add_argument("--params", help="initial mock-policy checkpoint")

    return parser


_HANDLERS = {
    "gen-net": _cmd_gen_net,
    "import-cityflow": _cmd_import_cityflow,
    "train-critic": _cmd_train_critic,
    "rollout": _cmd_rollout,
    "jsgrpo-rollout": _cmd_jsgrpo_rollout,
    "grpo-train": _cmd_grpo_train,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
        out = _out_dir(cfg, args.command)
        if args.command == "baseline":
            _cmd_run_controller(cfg, out, BASELINE_CONTROLLERS)
        elif args.command == "eval":
            _cmd_run_controller(cfg, out, CONTROLLERS)
        else:
            _HANDLERS[args.command](cfg, out)
        _echo_config(cfg, args.command, out)
    except (CliError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
