"""Experiment runner.

Exit codes: 0 all checked properties pass, 1 a property was violated in an
admissible run, 2 configuration or usage error.
"""

from __future__ import annotations

import concurrent.futures
import json
import pathlib
import sys

import click
import yaml

from . import checker as hc
from .adversary import Strategy, make_strategy
from .engine import Directive, RandomWorkload, RunResult, run, tightness_demo
from .model import ConfigError, ModelId, lookup, make_config

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2


def _load_config_file(path):
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    return data


def _load_workload(workload_spec, rounds):
    """'random[:rate[:read_ratio]]' or a YAML/JSON file of directives."""
    if (workload_spec is None or workload_spec == "random"
            or workload_spec.startswith("random:")):
        parts = workload_spec.split(":") if workload_spec else []
        rate = float(parts[1]) if len(parts) > 1 else 0.2
        ratio = float(parts[2]) if len(parts) > 2 else 0.5
        return RandomWorkload(op_rate=rate, read_ratio=ratio)
    path = pathlib.Path(workload_spec)
    if not path.exists():
        raise ConfigError(f"workload file {workload_spec} does not exist")
    with open(path) as fh:
        entries = yaml.safe_load(fh) or []
    directives = []
    for e in entries:
        directives.append(Directive(round=int(e["round"]), client=int(e["client"]),
                                    op=e["op"], value=e.get("value")))
    return directives


def _write_artifacts(result: RunResult, verdicts, out_dir, trace_out, report_out):
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = pathlib.Path(trace_out) if trace_out else out / "trace.jsonl"
    trace_path.write_text(result.trace_lines())
    (out / "history.jsonl").write_text(
        "".join(json.dumps(rec.as_dict(), sort_keys=True, default=str) + "\n"
                for rec in result.history))
    probe_report = {
        "rounds": result.rounds,
        "seed": result.seed,
        "min_support": result.min_support,
        "violations": result.violations,
        "protocol_failures": result.protocol_failures,
        "probes": result.probes,
    }
    (out / "probe_report.json").write_text(
        json.dumps(probe_report, indent=2, sort_keys=True, default=str) + "\n")
    verdict_path = pathlib.Path(report_out) if report_out else out / "verdicts.json"
    if verdicts is not None:
        verdict_path.write_text(json.dumps(
            {name: {"passed": v.passed, "witness": v.witness}
             for name, v in verdicts.items()},
            indent=2, sort_keys=True, default=str) + "\n")


def _run_one(model, n, f, rounds, seed, clients, workload_spec, adversary,
             allow_inadmissible, record_messages, do_check):
    config = make_config(model, n, f)
    strategy = make_strategy(adversary)
    workload = _load_workload(workload_spec, rounds)
    result = run(config, strategy, workload, rounds=rounds, seed=seed,
                 n_clients=clients, allow_inadmissible=allow_inadmissible,
                 record_messages=record_messages)
    verdicts = None
    if do_check:
        ops = hc.history_from_records(result.history)
        verdicts = hc.check_all(ops, result.crashed_clients)
    return result, verdicts


@click.group()
def main():
    """Mobile-Byzantine-tolerant atomic register simulator and checker."""


@main.command("run")
@click.option("--config", "config_file", type=click.Path(exists=True),
              help="YAML config; flags override its keys.")
@click.option("--model", default=None, help="garay|bonnet|sasaki|buhrman (or m1..m4)")
@click.option("--n", "n", type=int, default=None, help="server count")
@click.option("--f", "f", type=int, default=None, help="fault budget per round")
@click.option("--rounds", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--clients", type=int, default=None)
@click.option("--workload", default=None,
              help="'random[:rate[:ratio]]' or a directives file")
@click.option("--adversary", default=None, help="none|stationary|sweep|random")
@click.option("--allow-inadmissible", is_flag=True, default=False)
@click.option("--trace-out", default=None)
@click.option("--report-out", default=None)
@click.option("--out-dir", default=".")
@click.option("--check/--no-check", "do_check", default=True)
@click.option("--trace-messages", is_flag=True, default=False,
              help="record per-message send/deliver events")
def cmd_run(config_file, model, n, f, rounds, seed, clients, workload, adversary,
            allow_inadmissible, trace_out, report_out, out_dir, do_check,
            trace_messages):
    """Run one simulation, write artifacts, and check the register properties."""
    file_cfg = _load_config_file(config_file) if config_file else {}

    def pick(flag, key, default):
        return flag if flag is not None else file_cfg.get(key, default)

    try:
        model = pick(model, "model", "garay")
        n = int(pick(n, "n", 7))
        f = int(pick(f, "f", 2))
        rounds = int(pick(rounds, "rounds", 100))
        seed = int(pick(seed, "seed", 0))
        clients = int(pick(clients, "clients", 3))
        workload = pick(workload, "workload", "random")
        adversary = pick(adversary, "adversary", "random")
        allow_inadmissible = allow_inadmissible or bool(
            file_cfg.get("allow_inadmissible", False))
        result, verdicts = _run_one(
            model, n, f, rounds, seed, clients, workload, adversary,
            allow_inadmissible, trace_messages, do_check)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    _write_artifacts(result, verdicts, out_dir, trace_out, report_out)

    failed = list(result.violations)
    if verdicts:
        for name, v in verdicts.items():
            status = "pass" if v.passed else "FAIL"
            click.echo(f"{name}: {status}")
            if not v.passed:
                failed.append(name)
    if result.violations:
        click.echo(f"agreement probe: FAIL ({len(result.violations)} rounds)")
    elif result.probes:
        click.echo(f"agreement probe: pass (min support {result.min_support})")
    click.echo(f"history: {len(result.history)} operations over {rounds} rounds")
    sys.exit(EXIT_VIOLATION if (failed and make_config(model, n, f).admissible)
             else EXIT_OK)


@main.command("tightness")
@click.option("--model", required=True, help="garay|bonnet|sasaki|buhrman (or m1..m4)")
@click.option("--f", "f", type=int, default=2)
@click.option("--seed", type=int, default=0)
@click.option("--report-out", default=None)
def cmd_tightness(model, f, seed, report_out):
    """Reproduce the boundary indistinguishability scenario for one model."""
    try:
        mid = ModelId.parse(model)
        report = tightness_demo(mid, f, seed=seed)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"model {report['model']}: n={report['n']} f={report['f']} "
               f"(boundary, threshold {report['threshold']})")
    click.echo(f"reader reply support: "
               + ", ".join(f"{v!r}x{c}" for v, c in report["reply_counts"])
               + (f", {report['silent']} silent" if report["silent"] else ""))
    click.echo("protocol failure emitted: "
               + ("yes" if report["failure_emitted"] else "NO"))
    if report_out:
        pathlib.Path(report_out).write_text(
            json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")
    sys.exit(EXIT_OK)


def _sweep_cell(args):
    model, f, seed, rounds, clients = args
    params = lookup(ModelId.parse(model))
    n = params.alpha * f + 1
    result, verdicts = _run_one(model, n, f, rounds, seed, clients,
                                "random", "random", False, False, True)
    ok = not result.violations and all(v.passed for v in verdicts.values())
    return {"model": model, "f": f, "n": n, "seed": seed,
            "pass": ok, "min_support": result.min_support,
            "probe_violations": len(result.violations),
            "ops": len(result.history)}


@main.command("sweep")
@click.option("--models", default="garay,bonnet,sasaki,buhrman",
              help="comma-separated model names")
@click.option("--f-values", default="1,2", help="comma-separated fault budgets")
@click.option("--seeds", default="0,1,2,3,4", help="comma-separated seeds")
@click.option("--rounds", type=int, default=100)
@click.option("--clients", type=int, default=3)
@click.option("--jobs", type=int, default=1)
@click.option("--out", "out_path", default=None, help="write the TSV table here")
def cmd_sweep(models, f_values, seeds, rounds, clients, jobs, out_path):
    """Run a models x f x seeds grid at n = alpha*f + 1; emit a summary table."""
    try:
        model_list = [m.strip() for m in models.split(",") if m.strip()]
        f_list = [int(x) for x in f_values.split(",") if x.strip()]
        seed_list = [int(x) for x in seeds.split(",") if x.strip()]
        if not model_list or not f_list or not seed_list:
            raise ConfigError("models, f-values, and seeds must all be nonempty")
        for m in model_list:
            ModelId.parse(m)
    except (ConfigError, ValueError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    cells = [(m, f, s, rounds, clients)
             for m in model_list for f in f_list for s in seed_list]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]

    header = ["model", "f", "n", "seed", "pass", "min_support",
              "probe_violations", "ops"]
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(str(row[h]) for h in header))
    table = "\n".join(lines) + "\n"
    click.echo(table, nl=False)
    if out_path:
        pathlib.Path(out_path).write_text(table)
    sys.exit(EXIT_OK if all(r["pass"] for r in rows) else EXIT_VIOLATION)


@main.command("check")
@click.argument("history_file", type=click.Path(exists=True))
@click.option("--crashed", default="", help="comma-separated crashed client ids")
def cmd_check(history_file, crashed):
    """Check a standalone history file (one JSON operation record per line)."""
    records = []
    with open(history_file) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    crashed_ids = {int(x) for x in crashed.split(",") if x.strip()}
    try:
        ops = hc.history_from_records(records)
        verdicts = hc.check_all(ops, crashed_ids)
    except hc.CheckerInputError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    ok = True
    for name, v in verdicts.items():
        click.echo(f"{name}: {'pass' if v.passed else 'FAIL'}")
        if not v.passed:
            ok = False
            click.echo(f"  witness: {json.dumps(v.witness, default=str)}")
    sys.exit(EXIT_OK if ok else EXIT_VIOLATION)


if __name__ == "__main__":
    main()
