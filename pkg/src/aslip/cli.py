"""Command-line client of the planning service.

Requests go to ``--server`` when given, otherwise to the same FastAPI app run
in-process. The client only reads inputs, posts JSON and writes the answers.

Exit codes: 0 when every requested task completed (converged or cleanly
classified), 1 when a gradient check fails, 2 on harness errors (bad config,
I/O, service errors).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

EXIT_OK, EXIT_CHECK_FAILED, EXIT_HARNESS = 0, 1, 2


class HarnessError(RuntimeError):
    pass


class Client:
    def __init__(self, server: str | None = None, timeout: float = 3600.0):
        if server:
            import httpx
            self._http = httpx.Client(base_url=server, timeout=timeout)
        else:
            import warnings
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # starlette nags about httpx2
                from fastapi.testclient import TestClient
            from .service import app
            self._http = TestClient(app, raise_server_exceptions=True)

    def post(self, path: str, payload: dict) -> dict:
        resp = self._http.post(path, json=payload)
        if resp.status_code != 200:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise HarnessError(f"{path}: HTTP {resp.status_code}: {detail}")
        return resp.json()


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise HarnessError(f"cannot read {path}: {exc}") from exc


def _write(out: Path, name: str, text: str) -> Path:
    try:
        out.mkdir(parents=True, exist_ok=True)
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        return path
    except OSError as exc:
        raise HarnessError(f"cannot write {out / name}: {exc}") from exc


def _dump(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True)


def _task(args) -> dict:
    return {"y0": args.y0, "xd0": args.xd0, "yf": args.yf, "xdf": args.xdf}


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text}") from exc


def _csv_rows(header: list, rows: list) -> str:
    import csv
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- subcommands -------------------------------------------------------------

def cmd_optimize(args, client: Client, config: dict, method: str) -> int:
    res = client.post(f"/optimize/{method}",
                      {"task": _task(args), "config": config, "seedless": args.seedless})
    log = res["log"]
    out = Path(args.out)
    if res["plan"] is not None:
        path = _write(out, f"plan_{method}.json", json.dumps(res["plan"], indent=1))
        print(f"{method}: {log['status']} in {log['iterations']} iterations, plan -> {path}")
    else:
        print(f"{method}: {log['status']} ({log['message']}); no plan written")
    if args.format == "csv":
        keys = ["method", "status", "iterations", "seconds", "violation", "objective", "message"]
        _write(out, f"solve_{method}.csv", _csv_rows(keys, [[log[k] for k in keys]]))
    else:
        _write(out, f"solve_{method}.json", _dump(log))
    return EXIT_OK


def cmd_simulate(args, client: Client, config: dict) -> int:
    payload = {"plan": _read_json(args.plan), "ground": args.ground, "config": config,
               "series": args.series, "samples": args.samples}
    if args.height is not None:
        payload["height"] = args.height
    if args.speed is not None:
        payload["speed"] = args.speed
    res = client.post("/simulate", payload)
    apex = res["apex"]
    msg = f"{res['status']}"
    if apex:
        msg += f": apex height {apex['y']:.6f}, speed {apex['xdot']:.6f}"
    print(msg)
    for d in res["diagnostics"]:
        print(f"  note: {d}")
    out = Path(args.out)
    series = res.pop("series")
    if args.format == "csv":
        rows = [[e["time"], e["kind"], *[e["state"][k] for k in
                                          ("x", "y", "xdot", "ydot", "r0", "r0dot", "rp")]]
                for e in res["events"]]
        _write(out, "events.csv", _csv_rows(["time", "kind", "x", "y", "xdot", "ydot", "r0",
                                             "r0dot", "rp"], rows))
        if series is not None:
            cols = list(series)
            _write(out, "series.csv", _csv_rows(cols, list(zip(*(series[c] for c in cols)))))
    else:
        _write(out, "simulation.json", _dump(res))
        if series is not None:
            _write(out, "series.json", _dump(series))
    return EXIT_OK


def cmd_grid(args, client: Client, config: dict) -> int:
    methods = ["min-effort", "robust"] if args.method == "both" else [args.method]
    out = Path(args.out)
    for method in methods:
        res = client.post("/grid", {"method": method, "config": config, "jobs": args.jobs,
                                    "seedless": args.seedless})
        for rel, doc in res["plans"].items():
            _write(out, rel, json.dumps(doc, indent=1))
        _write(out, f"log_{method}.json", json.dumps(res["log"], indent=1))
        tasks = res["log"]["tasks"]
        ok = sum(t["plan_file"] is not None for t in tasks)
        print(f"{method}: {ok}/{len(tasks)} tasks planned -> {out}")
    return EXIT_OK


def _archive_items(archive: Path):
    items, diags = [], []
    for method in ("min-effort", "robust"):
        log_file = archive / f"log_{method}.json"
        if not log_file.exists():
            continue
        for entry in _read_json(log_file)["tasks"]:
            if not entry.get("plan_file"):
                continue
            try:
                plan = json.loads((archive / entry["plan_file"]).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                diags.append(f"skipping {entry['plan_file']}: {exc}")
                continue
            items.append({"index": entry["index"], "method": method, "task": entry["task"],
                          "plan": plan})
    if not items and not diags:
        raise HarnessError(f"no plan archive logs under {archive}")
    return items, diags


def _emit(client: Client, report: dict, fmt: str, out: Path):
    files = client.post("/report", {"report": report, "format": fmt})["files"]
    return [_write(out, name, text) for name, text in files.items()]


def _print_summary(report: dict):
    s = report["summary"]
    for m, row in s["methods"].items():
        print(f"{m}: {row['failures']}/{row['cases']} failures, mean height error "
              f"{row['mean_height_error']}, mean speed error {row['mean_speed_error']}")
    r = s["ratios"]
    print(f"mutual cases {s['mutual_cases']}; error ratios height {r['height'] or 'NA'}, "
          f"speed {r['speed'] or 'NA'}")


def cmd_sweep(args, client: Client, config: dict) -> int:
    archive = Path(args.archive or args.out)
    items, diags = _archive_items(archive)
    for d in diags:
        print(f"  note: {d}", file=sys.stderr)
    payload = {"plans": items, "config": config, "jobs": args.jobs, "diagnostics": diags}
    if args.disturbances is not None:
        payload["disturbances"] = args.disturbances
    report = client.post("/sweep", payload)["report"]
    out = Path(args.out)
    _write(out, "sweep_report.json", _dump(report))
    if args.format == "csv":
        _emit(client, report, "csv", out)
    _print_summary(report)
    return EXIT_OK


def cmd_report(args, client: Client, config: dict) -> int:
    report = _read_json(args.input)
    paths = _emit(client, report, args.format, Path(args.out))
    _print_summary(report)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_check_gradients(args, client: Client, config: dict) -> int:
    problems = ["min-effort", "robust"] if args.problem == "both" else [args.problem]
    if args.nodes:
        config = {**config, "node_counts": args.nodes}
    failed = False
    docs = {}
    for prob in problems:
        res = client.post("/check-gradients", {"problem": prob, "task": _task(args),
                                               "config": config, "points": args.points,
                                               "seed": args.seed, "tolerance": args.tolerance})
        docs[prob] = res
        verdict = "pass" if res["passed"] else "FAIL"
        print(f"{prob}: {res['variables']} variables, {res['constraints']} constraints, "
              f"max relative error {res['max_rel_error']:.3e} over {len(res['results'])} points "
              f"[{verdict}]")
        failed |= not res["passed"]
    out = Path(args.out)
    if args.format == "csv":
        rows = [[p, i, r["max_rel_error"], r["worst_label"], r["gradient_rel_error"],
                 r["pattern_violations"]]
                for p, d in docs.items() for i, r in enumerate(d["results"])]
        _write(out, "gradients.csv", _csv_rows(["problem", "point", "max_rel_error", "worst_row",
                                                "gradient_rel_error", "pattern_violations"], rows))
    else:
        _write(out, "gradients.json", _dump(docs))
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# -- parser ------------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="JSON experiment config")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory")
    p.add_argument("--jobs", metavar="N", type=int, default=1, help="worker processes")
    p.add_argument("--seedless", action="store_true",
                   help="deterministic guesses only (no jittered restarts)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--server", metavar="URL", help="planning service URL (default: in-process)")


def _task_args(p: argparse.ArgumentParser):
    p.add_argument("--y0", type=float, default=1.15, help="initial apex height [l0]")
    p.add_argument("--xd0", type=float, default=0.8, help="initial apex speed [sqrt(g l0)]")
    p.add_argument("--yf", type=float, default=1.15, help="goal apex height [l0]")
    p.add_argument("--xdf", type=float, default=0.8, help="goal apex speed [sqrt(g l0)]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aslip", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (("optimize-min", "minimum-effort plan for one task"),
                           ("optimize-robust", "disturbance-aware plan for one task")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _task_args(p)

    p = sub.add_parser("simulate", help="run a plan open loop to the next apex")
    _common(p)
    p.add_argument("--plan", required=True, metavar="PATH")
    p.add_argument("--height", type=float, help="start apex height (default: plan's task)")
    p.add_argument("--speed", type=float, help="start apex speed (default: plan's task)")
    p.add_argument("--ground", type=float, default=0.0, help="ground height offset [l0]")
    p.add_argument("--series", action="store_true", help="also emit sampled time series")
    p.add_argument("--samples", type=int, default=400)

    p = sub.add_parser("grid", help="plan every task of the configured grid")
    _common(p)
    p.add_argument("--method", choices=("min-effort", "robust", "both"), default="both")

    p = sub.add_parser("sweep", help="simulate an archive under ground disturbances")
    _common(p)
    p.add_argument("--archive", metavar="DIR", help="plan archive (default: --out)")
    p.add_argument("--disturbances", type=_floats, help="comma-separated ground offsets")

    p = sub.add_parser("check-gradients", help="finite-difference derivative check")
    _common(p)
    _task_args(p)
    p.add_argument("--problem", choices=("min-effort", "robust", "both"), default="both")
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--nodes", type=lambda t: [int(v) for v in t.split(",")],
                   help="node counts per phase, e.g. 15,25,15")

    p = sub.add_parser("report", help="render a saved sweep report")
    _common(p)
    p.add_argument("--input", required=True, metavar="PATH", help="sweep_report.json")
    return parser


COMMANDS = {
    "optimize-min": lambda a, c, cfg: cmd_optimize(a, c, cfg, "min-effort"),
    "optimize-robust": lambda a, c, cfg: cmd_optimize(a, c, cfg, "robust"),
    "simulate": cmd_simulate,
    "grid": cmd_grid,
    "sweep": cmd_sweep,
    "check-gradients": cmd_check_gradients,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise HarnessError("--jobs must be at least 1")
        config = _read_json(args.config) if args.config else {}
        client = Client(args.server)
        return COMMANDS[args.command](args, client, config)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HARNESS


if __name__ == "__main__":
    sys.exit(main())
