"""Command line front end.

Every `RunConfig` key is also a flag (``--omega 21``, ``--gamma-eps 0``);
flag values are parsed as TOML values, so lists are written
``--gamma-grid "[[0.01, 0.9], [0, 0]]"``.  Errors end the process with the
exit code of their category and one JSON line on stderr.
"""
import argparse
import csv
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import KEYS, RunConfig, config_from_mapping, load_config, tomllib
from .errors import MaxinvError, ValidationError
from .io import load_trace, save_trace

COMMANDS = ("generate-data", "reconstruct", "gradcheck", "adjointcheck", "regsearch", "run-case")


def _flag(key):
    return "--" + key.replace("_", "-")


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run file")
    grp = common.add_argument_group("run settings")
    for f in fields(RunConfig):
        if f.name == "mode":
            continue
        grp.add_argument(_flag(f.name), dest=f"set_{f.name}", metavar="VALUE",
                         help=f"default {f.default!r}")
    p = argparse.ArgumentParser(prog="maxinv", description="Time-domain reconstruction of "
                                "permittivity and permeability from boundary observations.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate-data", parents=[common],
                   help="simulate clean and noisy observations")
    sub.add_parser("reconstruct", parents=[common],
                   help="reconstruct from the trace given by --data (generated if absent)")
    sub.add_parser("gradcheck", parents=[common],
                   help="compare adjoint gradients with finite differences")
    sub.add_parser("adjointcheck", parents=[common], help="duality test of the backward sweep")
    sub.add_parser("regsearch", parents=[common],
                   help="reconstruct for every pair in --gamma-grid")
    rc = sub.add_parser("run-case", parents=[common],
                        help="run one of the noise cases; the case fixes omega and the noise level")
    rc.add_argument("case", choices=sorted(ex.CASES))
    return p


def _file_keys(path):
    with open(path, "rb") as fh:
        return set(tomllib.load(fh))


def resolve_config(args):
    """Defaults, then the ``--config`` file, then flags.

    ``run-case`` starts from the searched case weights `experiments.CASE_GAMMA`
    unless a file or flag sets a weight.
    """
    base = load_config(args.config) if args.config else RunConfig()
    explicit = _file_keys(args.config) if args.config else set()
    updates = {"mode": args.command}
    for key in KEYS:
        val = getattr(args, f"set_{key}", None)
        if val is not None:
            updates[key] = _parse_value(val)
    explicit |= set(updates)
    if args.command == "run-case" and not explicit & {"gamma_eps", "gamma_mu"}:
        updates["gamma_eps"], updates["gamma_mu"] = ex.CASE_GAMMA
    return config_from_mapping(updates, base)


def _outdir(cfg):
    out = Path(cfg.workdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _progress(state):
    print(f"iter {state.m:4d}  F={state.F[-1]:.6e}  max eps={state.coef.eps.max():.3f}  "
          f"max mu={state.coef.mu.max():.3f}", file=sys.stderr, flush=True)


def cmd_generate(cfg):
    out = _outdir(cfg)
    clean = ex.generate_data(cfg)
    obs = ex.noisy(cfg, clean)
    save_trace(clean, out / "trace_clean.npz")
    save_trace(obs, out / "trace_noisy.npz")
    ex.write_manifest(cfg, out)
    return {"clean": str(out / "trace_clean.npz"), "noisy": str(out / "trace_noisy.npz"),
            "levels": clean.N + 1, "nodes": clean.n_nodes}


def cmd_reconstruct(cfg):
    out = _outdir(cfg)
    obs = load_trace(cfg.data) if cfg.data else ex.noisy(cfg, ex.generate_data(cfg))
    setup = ex.Setup.coarse(cfg)
    if obs.data.shape[1] != setup.bmap.observation.size or obs.N != round(cfg.T / cfg.tau):
        raise ValidationError("data", f"trace shape {obs.data.shape} does not fit the grid")
    res = ex.run_reconstruction(cfg, obs, setup, callback=_progress)
    ex.write_manifest(cfg, out)
    ex.write_fields(out, "reconstruction", res.coef, setup.grid)
    with open(out / "log.csv", "w", newline="") as fh:
        fh.write(res.log)
    report = ex.reconstruction_report(cfg, res, setup)
    with open(out / "report.json", "w", newline="") as fh:
        fh.write(ex.dumps(report))
    return report


def cmd_gradcheck(cfg):
    rows = []
    for cmp_ in ex.gradcheck(cfg):
        rows.append({"param": cmp_.param, "relative_error": cmp_.relative_error,
                     "nodes": [list(n) for n in cmp_.nodes],
                     "node_errors": list(cmp_.node_errors)})
    return rows


def cmd_regsearch(cfg):
    out = _outdir(cfg)
    obs = load_trace(cfg.data) if cfg.data else None
    rows = ex.regsearch(cfg, obs=obs, callback=lambda r: print(json.dumps(r), file=sys.stderr))
    with open(out / "regsearch.csv", "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        wr.writeheader()
        wr.writerows(rows)
    return rows


def cmd_run_case(cfg, case):
    rep = ex.run_case(case, cfg.workdir, base=cfg, callback=_progress)
    rep.pop("_result")
    return rep


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(type(obj).__name__)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "generate-data":
            out = cmd_generate(cfg)
        elif args.command == "reconstruct":
            out = cmd_reconstruct(cfg)
        elif args.command == "gradcheck":
            out = cmd_gradcheck(cfg)
        elif args.command == "adjointcheck":
            out = ex.adjointcheck(cfg)
        elif args.command == "regsearch":
            out = cmd_regsearch(cfg)
        else:
            out = cmd_run_case(cfg, args.case)
    except MaxinvError as exc:
        err = {"category": exc.category, "error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ValidationError):
            err["field"] = exc.field
        print(json.dumps(err), file=sys.stderr)
        return exc.exit_code
    print(json.dumps(out, indent=2, sort_keys=True, default=_jsonable))
    return 0


if __name__ == "__main__":
    sys.exit(main())
