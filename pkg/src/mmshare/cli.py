"""Command line front end: ``mmshare {simulate,sweep,game,region,replay}``.

Each run writes a result file and a sibling ``<out>.manifest.json`` holding the
resolved configuration, the subcommand parameters and timestamps. ``replay``
re-executes a manifest and reproduces the result file byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

from mmshare import __version__, duopoly, simengine
from mmshare.config import Config, digest, dump_config, load_config, parse_config, with_market, with_sim
from mmshare.errors import InvalidParameterError
from mmshare.scheduler import Regime

log = logging.getLogger("mmshare")

SCHEMA_VERSION = 1
SIM_COLUMNS = (
    "regime",
    "psi1",
    "nsp",
    "avg_user_tput_bps",
    "ci_user",
    "avg_cell_tput_bps",
    "ci_cell",
    "total_cell_tput_bps",
    "ci_total",
    "drops",
    "slots",
)
SIM_HEADER = ",".join(SIM_COLUMNS)
REGION_COLUMNS = ("n1", "n2", "psi_min", "psi_max", "psi_max_raw", "beneficial")
REGION_HEADER = ",".join(REGION_COLUMNS)

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _num(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def metrics_rows(m: simengine.SimMetrics) -> list[list[str]]:
    psi = "" if m.psi1 is None else _num(m.psi1)
    common = [_num(m.total_cell_tput), _num(m.ci_total), str(m.num_drops), str(m.slots_per_drop)]
    rows = []
    for k in range(2):
        rows.append(
            [m.regime, psi, str(k + 1), _num(m.user_tput[k]), _num(m.ci_user[k]),
             _num(m.cell_tput[k]), _num(m.ci_cell[k]), *common]
        )
    rows.append([m.regime, psi, "total", "", "", _num(m.total_cell_tput), _num(m.ci_total), *common])
    return rows


def region_rows(points) -> list[list[str]]:
    return [
        [_num(p.n1), _num(p.n2), _num(p.psi_min), _num(p.psi_max), _num(p.psi_max_raw),
         "yes" if p.beneficial else "no"]
        for p in points
    ]


# --- subcommand bodies: (config, params) -> result text ---------------------------


def _sim_regimes(cfg: Config, params: dict) -> list:
    labels = [params["regime"]] if params.get("regime") else list(cfg.sim.regimes)
    return [simengine.regime_from_label(lbl, cfg.sim.psi1) for lbl in labels]


def do_simulate(cfg: Config, params: dict) -> str:
    regimes = _sim_regimes(cfg, params)
    log.info("simulating %s over %d drops", [r.label for r in regimes], cfg.sim.num_drops)
    rows = []
    for m in simengine.run_campaigns(cfg.sim, regimes):
        rows.extend(metrics_rows(m))
    return _csv_text(SIM_COLUMNS, rows)


def do_sweep(cfg: Config, params: dict) -> str:
    log.info("sweeping psi1 over %s with %d drops", cfg.sim.psi_grid, cfg.sim.num_drops)
    sweep = simengine.sweep_psi(cfg.sim)
    rows = []
    for m in sweep.all_metrics():
        rows.extend(metrics_rows(m))
    return _csv_text(SIM_COLUMNS, rows)


def do_game(cfg: Config, params: dict) -> str:
    regime = Regime.parse(params.get("regime") or "weighted")
    market = cfg.market
    result = duopoly.solve(market, regime)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config_digest": digest(cfg),
        "market": {k: getattr(market, k) for k in market.__dataclass_fields__},
        "outcome": result.to_dict(),
    }
    if params.get("verify"):
        g = duopoly.numeric_equilibrium(market, regime, cfg.game.grid_resolution)
        doc["verify"] = {
            "grid_resolution": cfg.game.grid_resolution,
            "grid_p1": g.p1,
            "grid_p2": g.p2,
            "delta_p1": result.p1 - g.p1,
            "delta_p2": result.p2 - g.p2,
            "within_two_steps": bool(
                abs(result.p1 - g.p1) <= 2 * g.step and abs(result.p2 - g.p2) <= 2 * g.step
            ),
        }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def do_region(cfg: Config, params: dict) -> str:
    res = params.get("resolution") or cfg.game.region_resolution
    return _csv_text(REGION_COLUMNS, region_rows(duopoly.mutual_benefit_region(res)))


COMMANDS = {"simulate": do_simulate, "sweep": do_sweep, "game": do_game, "region": do_region}
DEFAULT_OUT = {
    "simulate": "simulate.csv",
    "sweep": "sweep.csv",
    "game": "game.json",
    "region": "region.csv",
}


def manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def execute(command: str, cfg: Config, params: dict, out: Path) -> Path:
    """Run ``command``, write its result to ``out`` and the manifest beside it."""
    started = datetime.now(timezone.utc).isoformat()
    text = COMMANDS[command](cfg, params)
    data = text.encode("utf-8")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(data)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool": "mmshare",
        "tool_version": __version__,
        "subcommand": command,
        "parameters": params,
        "seed": cfg.sim.base_seed,
        "config_digest": digest(cfg),
        "config": dump_config(cfg),
        "output": out.name,
        "output_sha256": hashlib.sha256(data).hexdigest(),
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
    }
    mpath = manifest_path(out)
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("wrote %s and %s", out, mpath)
    return out


def replay(manifest_file: Path, out: Path | None = None) -> Path:
    m = json.loads(Path(manifest_file).read_text(encoding="utf-8"))
    if m.get("subcommand") not in COMMANDS:
        raise InvalidParameterError(f"{manifest_file}: unknown subcommand {m.get('subcommand')!r}")
    cfg = parse_config(m["config"], source=f"{manifest_file}:config")
    if digest(cfg) != m["config_digest"]:
        raise InvalidParameterError(f"{manifest_file}: configuration digest mismatch")
    target = out if out is not None else Path(manifest_file).with_name(m["output"])
    return execute(m["subcommand"], cfg, m["parameters"], target)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mmshare", description="mmWave base-station sharing simulator and duopoly solver")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, sim=True):
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="log progress to stderr")
        p.add_argument("--config", type=Path, help="configuration file (defaults apply when omitted)")
        p.add_argument("--out", type=Path, help="result file path")
        if sim:
            p.add_argument("--seed", type=int, help="base seed of the drop streams")
            p.add_argument("--drops", type=int, help="number of drops per campaign")
            p.add_argument("--slots", type=int, help="slots per drop")
            p.add_argument("--noise-limited", action="store_true", help="ignore inter-cell interference")
            p.add_argument("--workers", type=int, help="parallel drop workers")

    p = sub.add_parser("simulate", help="run campaigns for one or all regimes")
    common(p)
    p.add_argument("--regime", choices=[r.value for r in Regime])
    p.add_argument("--psi1", type=float, help="NSP 1 scheduler weight for weighted sharing")

    p = sub.add_parser("sweep", help="weighted sharing over the psi1 grid plus baselines")
    common(p)

    p = sub.add_parser("game", help="solve the pricing game for one regime")
    common(p, sim=False)
    p.add_argument("--regime", choices=[r.value for r in Regime], default="weighted")
    p.add_argument("--psi1", type=float, help="NSP 1 scheduler weight")
    p.add_argument("--verify", action="store_true", help="cross-check against grid backward induction")

    p = sub.add_parser("region", help="mutual-benefit region over (n1, n2)")
    common(p, sim=False)
    p.add_argument("--resolution", type=float, help="grid step in n1 and n2")

    p = sub.add_parser("replay", help="re-run a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, help="result path (defaults to the manifest's output)")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="log progress to stderr")
    return parser


def _resolve(args) -> tuple[Config, dict]:
    cfg = load_config(args.config)
    params: dict = {}
    sim_changes = {}
    for flag, attr in (("seed", "base_seed"), ("drops", "num_drops"), ("slots", "slots_per_drop"), ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            sim_changes[attr] = value
    if getattr(args, "noise_limited", False):
        sim_changes["interference_mode"] = "noise_limited"
    if args.command == "simulate":
        if args.psi1 is not None:
            sim_changes["psi1"] = args.psi1
        params["regime"] = args.regime
    if args.command == "game":
        if args.psi1 is not None:
            cfg = with_market(cfg, psi1=args.psi1)
        params["regime"] = args.regime
        params["verify"] = bool(args.verify)
    if args.command == "region":
        params["resolution"] = args.resolution
    if sim_changes:
        cfg = with_sim(cfg, **sim_changes)
    return cfg, params


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "replay":
            path = replay(args.manifest, args.out)
        else:
            cfg, params = _resolve(args)
            path = execute(args.command, cfg, params, args.out or Path(DEFAULT_OUT[args.command]))
    except InvalidParameterError as exc:
        print(f"mmshare: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        where = f" ({exc.filename})" if exc.filename else ""
        print(f"mmshare: I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"mmshare: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
