"""Command-line harness: batch runs, sweeps, reference tables, rollouts.

The CLI drives the package in-process; ``serve`` starts the HTTP service
that exposes the same operations to remote clients.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from uansim import __version__
from uansim.ber import PilotChannelSpec, ber_analytic, ber_pilot_estimate, ber_threshold, ebn0_from_snr
from uansim.core import ConfigError, EventFault
from uansim.mobility import trajectory_rows
from uansim.network import JsonlTraceSink
from uansim.packets import header_sizes
from uansim.propagation import CoverageError
from uansim.rlenv import make_env
from uansim.scenario import build_mobility, load_scenario, NodeSpec, run_scenario

METRIC_COLUMNS = ("generated", "delivered", "delivery_ratio", "throughput_bps",
                  "delay_mean_s", "delay_median_s", "delay_p95_s", "collisions",
                  "energy_total_j")

#: (protocol, label, kind) rows of the header-size reference table; FIXED is
#: the legacy single-layout mode where every kind pays the worst-case size.
TABLE1_ROWS = [
    ("goal", "REQ", "goal_req"), ("goal", "REP", "goal_rep"),
    ("goal", "DATA", "goal_data"), ("goal", "ACK", "goal_ack"),
    ("goal", "FIXED", "goal_req"),
    ("sfama", "RTS", "sfama_rts"), ("sfama", "CTS", "sfama_cts"),
    ("sfama", "DATA", "sfama_data"), ("sfama", "ACK", "sfama_ack"),
    ("sfama", "FIXED", "sfama_rts"),
    ("vbf", "INTEREST", "vbf_interest"), ("vbf", "READY", "vbf_ready"),
    ("vbf", "DATA", "vbf_data"), ("vbf", "FIXED", "vbf_data"),
]


def table1_rows(rate_bps: float = 500.0) -> list[dict]:
    rows = []
    for protocol, label, kind in TABLE1_ROWS:
        size = header_sizes(kind, fixed_mode=(label == "FIXED"))
        rows.append({"protocol": protocol, "kind": label, "header_bytes": size,
                     "tx_delay_s": round(size * 8 / rate_bps, 2)})
    return rows


def parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        out[key] = _parse_scalar(value)
    return out


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _write_metrics_csv(path, rows: list[dict], extra_cols=()):
    cols = list(extra_cols) + ["scenario", "seed"] + list(METRIC_COLUMNS)
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(str(row.get(c, "")) for c in cols))
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _metrics_row(cfg, report) -> dict:
    row = {"scenario": cfg.name, "seed": cfg.seed}
    for col in METRIC_COLUMNS:
        row[col] = report.metrics[col]
    return row


def cmd_run(args) -> int:
    overrides = parse_overrides(args.set)
    if args.seed is not None:
        overrides["scenario.seed"] = args.seed
    if args.propagation:
        overrides["propagation.model"] = args.propagation
    cfg = load_scenario(args.scenario, overrides=overrides)
    sink = None
    trace_fh = None
    if args.trace:
        trace_fh = open(args.trace, "w", encoding="utf-8")
        sink = JsonlTraceSink(trace_fh)
    try:
        _, report = run_scenario(cfg, trace_sink=sink)
    finally:
        if trace_fh:
            trace_fh.close()
    _write_metrics_csv(args.metrics, [_metrics_row(cfg, report)])
    return 0


def cmd_sweep(args) -> int:
    values = [_parse_scalar(v) for v in args.values.split(",")]
    rows = []
    for value in values:
        overrides = parse_overrides(args.set)
        overrides[args.param] = value
        if args.seed is not None:
            overrides["scenario.seed"] = args.seed
        cfg = load_scenario(args.scenario, overrides=overrides)
        _, report = run_scenario(cfg)
        row = {"param": args.param, "value": value}
        row.update(_metrics_row(cfg, report))
        rows.append(row)
    _write_metrics_csv(args.metrics, rows, extra_cols=("param", "value"))
    return 0


def cmd_ber_sweep(args) -> int:
    modes = args.modes.split(",")
    methods = args.methods.split(",")
    lo, hi, step = (float(v) for v in args.snr.split(":"))
    snrs = []
    snr = lo
    while snr <= hi + 1e-9:
        snrs.append(round(snr, 6))
        snr += step
    spec = PilotChannelSpec(seed=args.seed)
    lines = ["snr_db,mode,method,ber"]
    for mode in modes:
        for method in methods:
            for snr_db in snrs:
                if method == "threshold":
                    ber = ber_threshold(snr_db, args.threshold_db).ber
                elif method == "analytic":
                    ber = ber_analytic(mode, ebn0_from_snr(snr_db, mode)).ber
                elif method in ("ls", "mmse"):
                    ber = ber_pilot_estimate(spec, method, snr_db, args.trials).ber
                else:
                    raise ConfigError(f"unknown ber method {method!r}")
                lines.append(f"{snr_db},{mode},{method},{ber}")
    text = "\n".join(lines) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def cmd_table1(args) -> int:
    lines = ["protocol,kind,header_bytes,tx_delay_s"]
    for row in table1_rows(args.rate):
        lines.append(f"{row['protocol']},{row['kind']},{row['header_bytes']},"
                     f"{row['tx_delay_s']:.2f}")
    print("\n".join(lines))
    return 0


def cmd_trajectory(args) -> int:
    with open(args.config, "rb") as fh:
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        raw = tomllib.load(fh)
    section = raw.get("mobility")
    if not section:
        raise ConfigError(f"{args.config}: needs a [mobility] section")
    start = section.pop("start", [0.0, 0.0, 0.0])
    duration = float(section.pop("duration_s", 60.0))
    dt = float(section.pop("dt_s", 1.0))
    model = build_mobility(NodeSpec(id=1, position=tuple(start), mobility=section))
    rows = trajectory_rows(model, duration, dt)
    lines = ["t,x,y,z"] + [f"{t},{x},{y},{z}" for t, x, y, z in rows]
    text = "\n".join(lines) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def cmd_env_rollout(args) -> int:
    from uansim.rlenv import random_actions, scripted_rollout

    env = make_env(args.scenario, overrides=parse_overrides(args.set), seed=args.seed)
    n_agents = len(env.action_spec()["agents"])
    if args.actions:
        actions = []
        for lineno, line in enumerate(Path(args.actions).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                actions.append([int(v) for v in line.replace(",", " ").split()])
            except ValueError:
                raise ConfigError(f"{args.actions}:{lineno}: actions are integers") from None
    else:
        actions = random_actions(args.seed or 0, args.steps, n_agents)
    result = scripted_rollout(env, actions)
    result["scenario"] = str(args.scenario)
    result["seed"] = args.seed
    text = json.dumps(result)
    if args.out in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from uansim.service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level=args.log_level)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uansim",
                                     description="underwater acoustic network simulator")
    parser.add_argument("--version", action="version", version=f"uansim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--trace", help="write JSONL trace to this path")
    p.add_argument("--metrics", help="write metrics CSV here (default stdout)")
    p.add_argument("--propagation", choices=["range", "thorp", "table"],
                   help="override the propagation model")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a scenario key (dotted path)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="run a scenario over a parameter grid")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, help="dotted config key, e.g. phy.mode")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seed", type=int)
    p.add_argument("--metrics")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("ber-sweep", help="emit snr_db,mode,method,ber CSV")
    p.add_argument("--modes", default="bpsk,qpsk,qam8,qam16,qam64")
    p.add_argument("--methods", default="threshold,analytic")
    p.add_argument("--snr", default="0:20:1", metavar="LO:HI:STEP")
    p.add_argument("--threshold-db", type=float, default=5.0)
    p.add_argument("--trials", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_ber_sweep)

    p = sub.add_parser("table1", help="header size / transmission delay reference table")
    p.add_argument("--rate", type=float, default=500.0,
                   help="bit rate used for the header delay column")
    p.set_defaults(fn=cmd_table1)

    p = sub.add_parser("trajectory", help="sample a mobility model to CSV")
    p.add_argument("config", help="TOML file with a [mobility] section")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_trajectory)

    p = sub.add_parser("env-rollout", help="scripted-policy environment rollout")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--actions", help="file with one action row per step")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_env_rollout)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--log-level", default="warning")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, CoverageError, EventFault, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
