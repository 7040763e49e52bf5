"""Command-line entry points."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments as ex
from .config import ConfigError, ExperimentConfig, default_config_text, load_config, parse_config
from .estimators import richardson_lyapunov
from .measure import MeasureError

COMMANDS = ("check-model", "estimate", "spectrum", "be", "llt", "ld", "pipeline-check", "report")


class HardFailure(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rmplab", description="Limit theorems for coefficients of random matrix products.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="experiment config (default: built-in benchmark)")
    p.add_argument("--out", type=Path, help="output directory (overrides `output` in the config)")
    p.add_argument("--seed", type=lambda s: int(s, 0), help="unsigned 64-bit seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--exact", action="store_true", help="force exact enumeration")
    p.add_argument("--strict", action="store_true", help="exit 2 when an assumption check fails")
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else parse_config(default_config_text(), "<benchmark>")
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", key="--seed", source="<command line>")
        cfg = cfg.with_overrides(seed=args.seed)
    if args.out is not None:
        cfg = cfg.with_overrides(output=str(args.out))
    return cfg


def _check(cfg: ExperimentConfig, strict: bool, announce: bool = False) -> None:
    rep = ex.assumption_report(cfg.measure())
    if announce:
        print(rep.summary())
    elif rep.hard_failure or rep.proximal_witness is None:
        print("warning: " + rep.summary().replace("\n", "\n  "), file=sys.stderr)
    if strict and rep.hard_failure:
        raise HardFailure("assumption check failed (strong irreducibility)")


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
        out = Path(cfg.output)
        cmd = args.command
        if cmd == "report":
            print(ex.build_report(out), end="")
            return 0
        _check(cfg, args.strict, announce=cmd == "check-model")
        if cmd == "check-model":
            return 0
        out.mkdir(parents=True, exist_ok=True)
        if cmd == "estimate":
            est = ex.run_estimate(cfg, out, args.workers)
            print(f"gamma_hat = {est.gamma!r} +- {est.gamma_se!r}")
            print(f"rho_sq_hat = {est.rho_sq!r} +- {est.rho_sq_se!r}")
        elif cmd == "spectrum":
            ex.run_spectrum(cfg, out)
            print((out / "spectrum.txt").read_text(encoding="utf-8"), end="")
        elif cmd == "be":
            rep = ex.run_be_experiment(cfg, ex.load_estimates(out), out, args.workers, args.exact)
            print(rep.summary())
            if rep.verdict != "ok":
                return 1
        elif cmd == "llt":
            rep = ex.run_llt_experiment(cfg, ex.load_estimates(out), out, args.workers, args.exact)
            print(rep.summary())
            if rep.verdict != "ok":
                return 1
        elif cmd == "ld":
            print(ex.run_ld_experiment(cfg, ex.load_estimates(out), out, args.workers).summary())
        elif cmd == "pipeline-check":
            try:
                gamma = ex.load_estimates(out).gamma
            except ex.MissingEstimatesError:
                gamma = richardson_lyapunov(cfg.measure(), cfg.x_point)
                print(f"no cached estimates; centering with the extrapolated exact mean {gamma!r}")
            rep = ex.fn_pipeline_check(cfg, gamma, out=out)
            print(rep.summary())
            if not rep.ok:
                return 1
        return 0
    except HardFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, MeasureError, ex.MissingEstimatesError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
