"""Command-line front end.

Usage::

    causalsel simulate --config run.cfg --out DIR
    causalsel fit      --config run.cfg --data series.csv --out DIR
    causalsel select   --config run.cfg --data series.csv --out DIR
    causalsel mc       --config run.cfg --out DIR

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Data outputs are deterministic; the wall-clock timestamp lives in
``run_metadata.json`` only. ``CAUSALSEL_WORKERS`` sets the number of worker
processes used by ``mc``.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .config import RunConfig, parse_config
from .errors import ConfigError, DataError, NumericalError
from .io import ingest_csv, write_json, write_table, write_trajectory_csv
from .montecarlo import ExperimentConfig, lil_summary, overfit_gap_summary, run_experiment
from .qmle import fit
from .selection import fit_collection, score
from .simulate import simulate

log = logging.getLogger("causalsel")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _load(args, subcommand: str) -> RunConfig:
    path = Path(args.config)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), subcommand)


def _fit_dict(res) -> dict:
    return {
        "model": res.spec.name,
        "family": res.spec.family.kind,
        "orders": list(res.spec.family.orders),
        "active": list(res.spec.active),
        "coordinates": list(res.spec.family.coord_names),
        "theta_hat": res.theta_hat.values.tolist(),
        "l_hat": res.l_hat,
        "n": res.n,
        "n_evals": res.n_evals,
        "converged": res.converged,
        "at_boundary": res.at_boundary,
        "starts_used": res.starts_used,
    }


def cmd_simulate(cfg: RunConfig, out: Path, args) -> None:
    cfg.require("model", "simulate")
    s = cfg.simulate
    traj = simulate(
        cfg.model, cfg.theta, s.n, s.burn_in, s.law, cfg.seed, r=s.r, allow_nonstationary=s.allow_nonstationary
    )
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_json(traj.meta, out / "trajectory_meta.json")
    log.info("wrote %d values to %s", traj.n, out / "trajectory.csv")


def _data(args):
    if not args.data:
        raise ConfigError("--data is required for this command")
    return ingest_csv(args.data)


def cmd_fit(cfg: RunConfig, out: Path, args) -> None:
    cfg.require("model")
    x = _data(args)
    res = fit(cfg.model, x, cfg.optimizer)
    write_json(_fit_dict(res), out / "fit.json")
    log.info("%s: l_hat = %r", res.spec.name, res.l_hat)


def cmd_select(cfg: RunConfig, out: Path, args) -> None:
    cfg.require("collection")
    x = _data(args)
    collection = cfg.collection.build()
    fits = fit_collection(collection, x, cfg.optimizer)
    reports = [score(collection, fits, pen, x.n).to_dict() for pen in cfg.penalties]
    write_json({"reports": reports}, out / "selection.json")
    for rep in reports:
        log.info("%s selects %s", rep["penalty"], rep["chosen_name"])


def cmd_mc(cfg: RunConfig, out: Path, args) -> None:
    cfg.require("model", "collection", "mc")
    sim = cfg.simulate
    kwargs = {}
    if sim is not None:
        kwargs.update(law=sim.law, burn_in=sim.burn_in)
    exp = ExperimentConfig(
        truth=cfg.model,
        theta_star=cfg.theta,
        collection=tuple(cfg.collection.build()),
        penalties=cfg.penalties,
        n_grid=cfg.mc.n_grid,
        replications=cfg.mc.replications,
        master_seed=cfg.seed if cfg.mc.master_seed is None else cfg.mc.master_seed,
        fit_options=cfg.optimizer,
        **kwargs,
    )
    report = run_experiment(exp)
    doc = report.to_dict()
    if len(exp.n_grid) >= 3:
        doc["diagnostics"] = {
            "lil": lil_summary(report).to_dict(),
            "overfit_gap": {k: v.to_dict() for k, v in overfit_gap_summary(report).items()},
        }
    write_json(doc, out / "experiment.json")
    for stem, rows in report.csv_tables().items():
        write_table(rows, out / f"{stem}.csv")
    log.info("P(m_hat = m*) per penalty and n: %s", report.prob_true().tolist())


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "select": cmd_select, "mc": cmd_mc}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causalsel", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key-value configuration file")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        if name in ("fit", "select"):
            p.add_argument("--data", required=True, help="single-column CSV series")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args, args.command)
        logging.basicConfig(
            level={0: logging.WARNING, 1: logging.INFO}.get(cfg.verbosity, logging.DEBUG),
            format="%(levelname)s %(name)s: %(message)s",
        )
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, args)
        write_json(
            {
                "command": args.command,
                "config": str(args.config),
                "version": __version__,
                "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            },
            out / "run_metadata.json",
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
