"""Command-line entry point: ``rfic <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import experiments as ex
from .disorder import DisorderLaw, FieldSource, LawError, anchored_walk, replica_seed
from .extrema import EXTREMA_HEADER, FISHER_HEADER, ExtremaError, fisher_plus, gamma_extrema_one_sided
from .oracle import MAX_SITES, groundstate_check, oracle_check
from .reflected import proximity_sample
from .rg import CHAIN_HEADER, rg_run, rg_vs_extrema_sampled

log = logging.getLogger("rfic")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

# Fallbacks for flags left unset on the command line and in --config.
DEFAULTS = {
    "law": "gauss:1",
    "replicas": 1000,
    "threads": 1,
    "format": "csv",
    "tol": 1e-10,
    "trials": 200,
    "samples": 200,
    "bin_width": None,
    "window": None,
    "constant": 10.0,
    "kind": "gibbs",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


@dataclass
class Invocation:
    command: str
    args: argparse.Namespace
    law: DisorderLaw
    seed: int


def _floats(text: str, name: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in str(text).split(","))
    except ValueError:
        raise UsageError(f"--{name} expects a number or comma-separated numbers, got {text!r}") from None
    if any(not (v > 0 and np.isfinite(v)) for v in vals):
        raise UsageError(f"--{name} values must be positive and finite, got {text!r}")
    return vals


def _ints(text: str, name: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(x) for x in str(text).split(","))
    except ValueError:
        raise UsageError(f"--{name} expects an integer or comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in vals):
        raise UsageError(f"--{name} values must be positive, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--law", help="disorder law, e.g. gauss:1, twopoint:1, uniform:0.5")
    common.add_argument("--gamma", help="Gamma = 2J; comma-separated for sweeps")
    common.add_argument("--J", dest="J", help="coupling; comma-separated for sweeps")
    common.add_argument("--n", help="window length (comma-separated for dn)")
    common.add_argument("--replicas", type=int)
    common.add_argument("--seed", type=int, help="master seed (default: $RFIC_SEED, else 0)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--threads", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--config", help="JSON file of flag values; flags given here win")

    p = _Parser(prog="rfic", description="Random-field Ising chain experiments")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("oracle-check", parents=[common], help="transfer matrices against enumeration") \
        .add_argument("--trials", type=int)
    e = sub.add_parser("extrema", parents=[common], help="Gamma-extrema and Fisher configuration")
    e.add_argument("--fisher-out", help="also write the Fisher configuration here")
    sub.add_parser("rg", parents=[common], help="decimation against the extrema (JSON report)")
    d = sub.add_parser("discrepancy", parents=[common], help="discrepancy density sweep")
    d.add_argument("--kind", choices=("gibbs", "sign"),
                   help="gibbs: P(sigma_0 != s_F); sign: P(sign m_0 != s_F)")
    sub.add_parser("dn", parents=[common], help="D_N variance over Gibbs samples") \
        .add_argument("--samples", type=int)
    sub.add_parser("invhist", parents=[common], help="invariant-law histogram of the l-chain") \
        .add_argument("--bin-width", dest="bin_width", type=float)
    sub.add_parser("scaling", parents=[common], help="gap and spacing statistics per Gamma")
    sub.add_parser("free-energy", parents=[common], help="quenched free energy per J")
    pr = sub.add_parser("proximity", parents=[common], help="|l_0 - l_hat_0| tail per Gamma")
    pr.add_argument("--window", type=int)
    pr.add_argument("--constant", type=float)
    sub.add_parser("groundstate-check", parents=[common], help="maximizers against the extrema family") \
        .add_argument("--trials", type=int)
    return p


def _resolve(args: argparse.Namespace) -> Invocation:
    conf = {}
    if args.config:
        try:
            with open(args.config) as fh:
                conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"cannot read config {args.config}: {err}") from None
        if not isinstance(conf, dict):
            raise UsageError("config file must hold a JSON object")
    for key, val in vars(args).items():
        if val is None:
            setattr(args, key, conf.get(key.replace("_", "-"), conf.get(key, DEFAULTS.get(key))))
    if args.seed is None:
        env = os.environ.get("RFIC_SEED")
        try:
            args.seed = int(env) if env else 0
        except ValueError:
            raise UsageError(f"RFIC_SEED must be an integer, got {env!r}") from None
    if int(args.replicas) < 1 or int(args.threads) < 1:
        raise UsageError("--replicas and --threads must be at least 1")
    try:
        law = DisorderLaw.parse(str(args.law))
    except LawError as err:
        raise UsageError(str(err)) from None
    return Invocation(args.command, args, law, int(args.seed))


def _gammas(inv: Invocation) -> tuple[float, ...]:
    a = inv.args
    if a.gamma is not None and a.J is not None:
        raise UsageError("give either --gamma or --J, not both")
    if a.J is not None:
        return tuple(2.0 * j for j in _floats(a.J, "J"))
    return _floats(a.gamma if a.gamma is not None else "5", "gamma")


def _n(inv: Invocation, default: int) -> int:
    return _ints(inv.args.n, "n")[0] if inv.args.n is not None else default


def _emit(inv: Invocation, text: str) -> None:
    if inv.args.out:
        with open(inv.args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(inv: Invocation, sweep, **kw) -> ex.ExperimentConfig:
    a = inv.args
    return ex.ExperimentConfig(inv.law, tuple(sweep), replicas=int(a.replicas), seed=inv.seed,
                               threads=int(a.threads), **kw)


def cmd_oracle_check(inv: Invocation) -> int:
    n = _n(inv, 12)
    if n > MAX_SITES:
        raise UsageError(f"oracle-check enumerates 2^n configurations; use --n {MAX_SITES} or less")
    s = oracle_check(n, int(inv.args.trials), inv.seed)
    print(f"max_rel_err={s.max_rel_err:.3e}")
    print(f"max_marginal_err={s.max_marginal_err:.3e}")
    return EXIT_OK if max(s.max_rel_err, s.max_marginal_err) <= inv.args.tol else EXIT_VIOLATION


def cmd_extrema(inv: Invocation) -> int:
    gamma = _gammas(inv)[0]
    n = _n(inv, 10_000)
    walk = anchored_walk(FieldSource(inv.law, inv.seed).field(1, n))
    seq = gamma_extrema_one_sided(walk, gamma)
    _emit(inv, ex.render(EXTREMA_HEADER, seq.csv_rows(), inv.args.format))
    if inv.args.fisher_out:
        with open(inv.args.fisher_out, "w", newline="") as fh:
            fh.write(ex.render(FISHER_HEADER, fisher_plus(walk, gamma, seq).csv_rows(), inv.args.format))
    return EXIT_OK


def cmd_rg(inv: Invocation) -> int:
    gamma = _gammas(inv)[0]
    n = _n(inv, 10_000)
    source = FieldSource(inv.law, inv.seed)
    report = rg_vs_extrema_sampled(source, gamma, n)
    print(json.dumps(report.as_dict()))
    if inv.args.out:
        chain, _ = rg_run(source.field(1, n), gamma)
        with open(inv.args.out, "w", newline="") as fh:
            fh.write(ex.render(CHAIN_HEADER, chain.csv_rows(), "csv"))
    if not report.containment:
        log.warning("some extremum up to N is not a breakpoint (edge records: see containment_flanked)")
    return EXIT_OK if report.containment_flanked else EXIT_VIOLATION


def cmd_discrepancy(inv: Invocation) -> int:
    cfg = _config(inv, _gammas(inv))
    rows = ex.estimate_D_Gamma(cfg) if inv.args.kind == "gibbs" else ex.sm_vs_sf_density(cfg)
    _emit(inv, ex.render(ex.DISCREPANCY_HEADER, ex.discrepancy_rows(rows), inv.args.format))
    return EXIT_OK


def cmd_dn(inv: Invocation) -> int:
    sizes = _ints(inv.args.n, "n") if inv.args.n is not None else (1_000, 10_000, 100_000)
    cfg = _config(inv, _gammas(inv)[:1], samples=int(inv.args.samples))
    rows = ex.dn_trajectory(cfg, sizes)
    _emit(inv, ex.render(ex.DN_HEADER, ex.dn_rows(rows), inv.args.format))
    return EXIT_OK


def cmd_invhist(inv: Invocation) -> int:
    gamma = _gammas(inv)[0]
    steps = _n(inv, 1_000_000)
    hist = ex.invariant_histogram(inv.law, gamma, steps, inv.seed, inv.args.bin_width)
    best, worst = hist.interval_ratio(np.log(np.log(gamma)) if gamma > np.e else 1.0)
    log.info("burn-in %d steps; interval mass ratio max %.4g min %.4g", hist.burn_in, best, worst)
    _emit(inv, ex.render(ex.HISTOGRAM_HEADER, hist.rows(), inv.args.format))
    return EXIT_OK


def cmd_scaling(inv: Invocation) -> int:
    rows = ex.scaling_sweep(_config(inv, _gammas(inv)))
    _emit(inv, ex.render(ex.SCALING_HEADER, ex.scaling_rows(rows), inv.args.format))
    return EXIT_OK


def cmd_free_energy(inv: Invocation) -> int:
    Js = tuple(g / 2.0 for g in _gammas(inv)) if inv.args.gamma is not None or inv.args.J is not None else (4.0,)
    rows = ex.free_energy(_config(inv, Js, n=_n(inv, 1_000_000)))
    _emit(inv, ex.render(ex.FREE_ENERGY_HEADER, ex.free_energy_rows(rows), inv.args.format))
    return EXIT_OK


def cmd_proximity(inv: Invocation) -> int:
    a = inv.args
    rows = []
    for k, gamma in enumerate(_gammas(inv)):
        rep = proximity_sample(inv.law, gamma, int(a.replicas), replica_seed(inv.seed, k),
                               float(a.constant), a.window, int(a.threads))
        gaps = rep.gaps if rep.gaps.size else np.array([np.nan])
        rows.append((gamma, rep.kept, rep.dropped, rep.threshold, rep.exceedance,
                     float(np.median(gaps)), float(np.max(gaps))))
    _emit(inv, ex.render(ex.PROXIMITY_HEADER, rows, a.format))
    return EXIT_OK


def cmd_groundstate_check(inv: Invocation) -> int:
    n = _n(inv, 14)
    if n > 14:
        raise UsageError("groundstate-check enumerates 2^n configurations; use --n 14 or less")
    s = groundstate_check(n, int(inv.args.trials), inv.seed)
    print(f"cases={s.cases} structure_failures={s.structure_failures} sign_failures={s.sign_failures}")
    if not s.ok:
        log.error("first failure: %s", s.first_failure)
    return EXIT_OK if s.ok else EXIT_VIOLATION


COMMANDS = {
    "oracle-check": cmd_oracle_check,
    "extrema": cmd_extrema,
    "rg": cmd_rg,
    "discrepancy": cmd_discrepancy,
    "dn": cmd_dn,
    "invhist": cmd_invhist,
    "scaling": cmd_scaling,
    "free-energy": cmd_free_energy,
    "proximity": cmd_proximity,
    "groundstate-check": cmd_groundstate_check,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as stop:
        return int(stop.code or 0)
    try:
        inv = _resolve(args)
        return COMMANDS[inv.command](inv)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"rfic: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ExtremaError) as err:
        log.error("%s", err)
        return EXIT_USAGE
    except AssertionError as err:
        log.error("identity violated: %s", err)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
