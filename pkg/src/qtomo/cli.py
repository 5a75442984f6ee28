"""Command line interface.

Subcommands: ``presets`` (write the named true states), ``simulate``
(sample a count file), ``estimate`` (fit a count file at a fixed rank or by
rank selection), ``fisher`` (Fisher report), ``bound`` (error bound for an
exposure), and ``experiment`` (Monte Carlo report from a config file).
Exit codes: 0 success, 1 contract/usage errors, 2 I/O errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ContractError, TomographyError
from .estimate import FitOptions, maice_fit, mle_fit, write_fit_report
from .harness import PRESET_NAMES, ExperimentConfig, emit_report, make_preset, run_experiment
from .infogeo import cr_bound_bures, fisher_bundle
from .measure import ProjectorSet, default_projectors, read_count_file, sample_counts, write_count_file
from .param import RankKParams, project_to_rank
from .qstate import DensityMatrix, characterize


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}error: {message}")


def _load_state(path) -> DensityMatrix:
    with open(path) as fh:
        obj = json.load(fh)
    if isinstance(obj, dict) and "rho" in obj:
        obj = obj["rho"]
    return DensityMatrix.from_json(obj)


def _state_from_args(args) -> DensityMatrix:
    if getattr(args, "preset", None):
        return make_preset(args.preset).rho
    if getattr(args, "state", None):
        return _load_state(args.state)
    raise ContractError("one of --preset or --state is required")


def _projectors_from_args(args) -> ProjectorSet:
    if getattr(args, "projectors", None):
        return ProjectorSet.load(args.projectors)
    return default_projectors()


def _write_json(obj, out) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_presets(args) -> int:
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    for name in PRESET_NAMES:
        preset = make_preset(name)
        path = os.path.join(outdir, f"{name.lower()}.json")
        with open(path, "w") as fh:
            json.dump(preset.to_json(), fh, indent=2)
            fh.write("\n")
        print(path)
    return 0


def _cmd_simulate(args) -> int:
    rho = _state_from_args(args)
    ps = _projectors_from_args(args)
    rec = sample_counts(rho, args.c_rate, args.t, ps, args.seed)
    out = args.out or "counts.csv"
    write_count_file(rec, ps, out)
    print(out)
    return 0


def _cmd_estimate(args) -> int:
    ps = _projectors_from_args(args)
    rec, _ = read_count_file(args.counts, ps)
    opts = FitOptions(n_starts=args.starts, seed=args.seed)
    if args.rank == "maice":
        result = maice_fit(rec, ps, opts)
    else:
        result = mle_fit(rec, ps, int(args.rank), opts)
    out = args.out or "fit_report.json"
    write_fit_report(result, out)
    print(out)
    return 0


def _params_from_args(args) -> RankKParams:
    if getattr(args, "params", None):
        return RankKParams.load(args.params)
    rho = _state_from_args(args)
    k = args.rank if getattr(args, "rank", None) else characterize(rho).rank
    return project_to_rank(rho, int(k))


def _cmd_fisher(args) -> int:
    ps = _projectors_from_args(args)
    p0 = _params_from_args(args)
    bundle = fisher_bundle(p0, ps, args.ct)
    _write_json(bundle.to_json(), args.out)
    return 0


def _cmd_bound(args) -> int:
    ps = _projectors_from_args(args)
    p0 = _params_from_args(args)
    value = cr_bound_bures(p0, ps, args.ct)
    print(f"{value:.17e}")
    return 0


def _cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.projectors and cfg.projector_file is None:
        cfg = ExperimentConfig(
            preset=cfg.preset, rho=cfg.rho, C=cfg.C, t_grid=cfg.t_grid, r=cfg.r,
            master_seed=cfg.master_seed, strategies=cfg.strategies,
            projector_file=args.projectors,
        )
    report = run_experiment(cfg)
    out = args.out or "report.csv"
    emit_report(report, out)
    print(out)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="qtomo", description="Two-qubit tomography simulator and estimator")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--projectors", help="projector set JSON file (default: standard 16)")
    common.add_argument("--out", help="output path")

    p = sub.add_parser("presets", parents=[common], help="write the preset true states")
    p.set_defaults(func=_cmd_presets)

    p = sub.add_parser("simulate", parents=[common], help="sample a coincidence count file")
    p.add_argument("--preset", choices=PRESET_NAMES)
    p.add_argument("--state", help="density matrix JSON file")
    p.add_argument("--c-rate", type=float, default=500.0, help="coincidence rate C (default 500)")
    p.add_argument("--t", type=float, default=1.0, help="acquisition time in seconds")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="fit a count file")
    p.add_argument("--counts", required=True, help="count CSV written by simulate")
    p.add_argument("--rank", default="maice", choices=["1", "2", "3", "4", "maice"])
    p.add_argument("--starts", type=int, default=5, help="multi-start count (default 5)")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("fisher", parents=[common], help="Fisher report at a parameter point")
    p.add_argument("--params", help="parameter JSON file")
    p.add_argument("--preset", choices=PRESET_NAMES)
    p.add_argument("--state", help="density matrix JSON file")
    p.add_argument("--rank", type=int, choices=[1, 2, 3, 4], help="model rank for --state/--preset")
    p.add_argument("--ct", type=float, required=True, help="exposure C*t")
    p.set_defaults(func=_cmd_fisher)

    p = sub.add_parser("bound", parents=[common], help="Bures-distance error bound")
    p.add_argument("--params", help="parameter JSON file")
    p.add_argument("--preset", choices=PRESET_NAMES)
    p.add_argument("--state", help="density matrix JSON file")
    p.add_argument("--rank", type=int, choices=[1, 2, 3, 4])
    p.add_argument("--ct", type=float, required=True, help="exposure C*t")
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("experiment", parents=[common], help="Monte Carlo error-scaling run")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except TomographyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
