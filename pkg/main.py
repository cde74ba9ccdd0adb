"""
Toda ℏ-expansion engine - command line entry point.

Subcommands run the stages solve -> wkb -> tau -> verify and write their
artifacts under the output directory.
"""

import argparse
import logging
import os
import sys
import tempfile
from dataclasses import dataclass

from config_manager import initialize_config
from errors import CheckFailure, ConfigError, TodaError
from presets import AVAILABLE_PRESETS, ExpressionPreset, get_preset
from reports import check_report_frame, cnm_frame, failed, lax_frame, render, tau_frame
from rhsolver import run as solve_triple
from serialization import (load_triple, phases_record, phases_text, tau_record, tau_text, triple_record,
                           triple_text, write_artifacts)
from symbols import Truncation
from tau import assemble
from verify import dress_lax, lax_coefficients, oracle_battery, run_battery
from wkb import triple_phases

COMMAND_STAGES = {
    "solve": ("solve",),
    "wkb": ("solve", "wkb"),
    "tau": ("solve", "wkb", "tau"),
    "verify": ("solve", "verify"),
    "all": ("solve", "wkb", "tau", "verify"),
}

EXPRESSION_FLAGS = ("f", "g", "fbar", "gbar")
SEED_FLAGS = ("seed_x0", "seed_xbar0", "seed_phi0")


@dataclass(frozen=True)
class RunConfig:
    """
    Everything one run needs, after flags and settings are merged.

    ``preset`` is None when the RH data comes from ``expressions``.
    """

    command: str
    stages: tuple
    truncation: Truncation
    preset: str = "c1-string"
    expressions: tuple = ()
    seeds: tuple = ()
    window_pad: tuple = None
    max_iterations: int = 64
    output_format: str = "json"
    out_dir: str = "out"
    input_path: str = None
    flows: int = 2
    oracle_pairs: int = 20


def build_parser():
    """Argument parser with one subcommand per stage group."""
    common = argparse.ArgumentParser(add_help=False)
    data = common.add_argument_group("RH data")
    data.add_argument("--preset", choices=sorted(AVAILABLE_PRESETS), help="Built-in RH datum")
    for flag in EXPRESSION_FLAGS:
        data.add_argument(f"--{flag}", help=f"Expression for {flag} (E = shift, s, hbar, t[n], tbar[n])")
    data.add_argument("--seed-x0", dest="seed_x0", help="Seed X0 (order-0 expression)")
    data.add_argument("--seed-xbar0", dest="seed_xbar0", help="Seed Xbar0 (order-0 expression)")
    data.add_argument("--seed-phi0", dest="seed_phi0", help="Seed phi0 (scalar; l = log(1-s))")

    trunc = common.add_argument_group("truncation")
    trunc.add_argument("--hbar-order", dest="hbar_order", type=int, help="Highest ℏ-order n_hbar")
    trunc.add_argument("--xi-lo", dest="xi_lo", type=int, help="Lowest ξ-exponent (default -xi_hi)")
    trunc.add_argument("--xi-hi", dest="xi_hi", type=int, help="Highest ξ-exponent")
    trunc.add_argument("--t-deg", dest="t_deg", type=int, help="Degree cap in t")
    trunc.add_argument("--tbar-deg", dest="tbar_deg", type=int, help="Degree cap in tbar")

    run = common.add_argument_group("run")
    run.add_argument("--window-pad", dest="window_pad", help="Working window pad: 'k' or 'lo,hi'")
    run.add_argument("--max-iterations", dest="max_iterations", type=int, help="Guard for terminating series")
    run.add_argument("--format", dest="output_format", choices=("json", "text"), help="Artifact format")
    run.add_argument("--out", dest="out_dir", help="Output directory")
    run.add_argument("--config", dest="config_path", help="settings.ini to read")
    run.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")

    parser = argparse.ArgumentParser(prog="todahbar", description="Exact ℏ-expansion of the Toda hierarchy")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("solve", parents=[common], help="Solve the RH problem for (X, Xbar, phi)")
    for name, text in (("wkb", "WKB phases S, Sbar"), ("tau", "Tau expansion F_n"),
                       ("verify", "Hierarchy checks"), ("all", "Every stage")):
        sub = commands.add_parser(name, parents=[common], help=text)
        if name != "all":
            sub.add_argument("--input", dest="input_path", help="triple.json to start from instead of solving")
        if name in ("verify", "all"):
            sub.add_argument("--flows", type=int, default=2, help="Number of Lax flows checked")
            sub.add_argument("--oracle-pairs", dest="oracle_pairs", type=int, default=20,
                             help="Random operator pairs for the ∘-product oracle (0 skips it)")
    return parser


def _parse_pad(value):
    if value is None or value == "":
        return None
    if isinstance(value, int):
        return (value, value)
    parts = [p.strip() for p in str(value).split(",")]
    try:
        numbers = [int(p) for p in parts]
    except ValueError:
        raise ConfigError(f"Window pad must be 'k' or 'lo,hi', got {value!r}") from None
    if len(numbers) == 1:
        numbers *= 2
    if len(numbers) != 2 or min(numbers) < 0:
        raise ConfigError(f"Window pad must be 'k' or 'lo,hi' with k >= 0, got {value!r}")
    return tuple(numbers)


def _pick(flag, config, section, option, default):
    if flag is not None:
        return flag
    return config.get_int(section, option, default)


def build_run_config(args, config):
    """
    Merge command-line flags over settings over defaults.

    Parameters:
    -----------
    args : argparse.Namespace
    config : ConfigManager

    Returns:
    --------
    RunConfig
    """
    n_hbar = _pick(args.hbar_order, config, 'truncation', 'n_hbar', 2)
    xi_hi = _pick(args.xi_hi, config, 'truncation', 'xi_hi', 6)
    xi_lo = _pick(args.xi_lo, config, 'truncation', 'xi_lo', -xi_hi)
    t_deg = _pick(args.t_deg, config, 'truncation', 't_deg', 2)
    tbar_deg = _pick(args.tbar_deg, config, 'truncation', 'tbar_deg', 0)
    if t_deg < 0 or tbar_deg < 0:
        raise ConfigError("Degree caps must be non-negative")
    truncation = Truncation(n_hbar, xi_lo, xi_hi, t_deg, tbar_deg)

    expressions = tuple((key, getattr(args, key)) for key in EXPRESSION_FLAGS if getattr(args, key))
    seeds = tuple((key[5:], getattr(args, key)) for key in SEED_FLAGS if getattr(args, key))
    if expressions and args.preset:
        raise ConfigError("--preset cannot be combined with --f/--g/--fbar/--gbar")
    if seeds and not expressions:
        raise ConfigError("Seed expressions need custom RH data (--f/--g/--fbar/--gbar)")
    preset = None if expressions else (args.preset or config.get('solver', 'preset', 'c1-string'))

    window_pad = _parse_pad(args.window_pad if args.window_pad is not None else config.get('solver', 'window_pad'))
    max_iterations = _pick(args.max_iterations, config, 'solver', 'max_iterations', 64)
    output_format = args.output_format or config.get('output', 'format', 'json')
    if output_format not in ("json", "text"):
        raise ConfigError(f"[output] format must be json or text, got {output_format!r}")
    out_dir = args.out_dir or str(config.get('output', 'out_dir', 'out'))

    input_path = getattr(args, "input_path", None)
    stages = COMMAND_STAGES[args.command]
    if input_path:
        stages = tuple(stage for stage in stages if stage != "solve")
    return RunConfig(
        command=args.command,
        stages=stages,
        truncation=truncation,
        preset=preset,
        expressions=expressions,
        seeds=seeds,
        window_pad=window_pad,
        max_iterations=max_iterations,
        output_format=output_format,
        out_dir=out_dir,
        input_path=input_path,
        flows=getattr(args, "flows", 2),
        oracle_pairs=getattr(args, "oracle_pairs", 20),
    )


def setup_logging(config, level=None):
    """
    Log to a file in the configured directory and to standard error.

    Falls back to the system temp directory when the log directory is not
    writable; returns the log file path.
    """
    level = (level or config.get('logging', 'level', 'INFO') or 'INFO').upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        raise ConfigError(f"Unknown log level {level!r}")
    log_dir = config.get('logging', 'log_directory') or os.path.join(config.app_dir, 'logs')
    log_file = os.path.join(str(log_dir), config.get('logging', 'log_file', 'todahbar.log'))
    try:
        os.makedirs(os.path.dirname(log_file), exist_ok=True)
        with open(log_file, 'a'):
            pass
    except OSError:
        log_file = os.path.join(tempfile.gettempdir(), "todahbar.log")

    logging.basicConfig(
        level=getattr(logging, level),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_file, encoding='utf-8'),
            logging.StreamHandler(sys.stderr)
        ],
        force=True
    )
    logging.debug(f"Logging initialized. Log file: {log_file}")
    return log_file


def resolve_preset(config, recorded=None):
    """
    RH data for a run.

    ``recorded`` is the preset name stored in a triple read with --input;
    it takes precedence over the configured preset. A triple solved from
    custom data needs the expressions again.
    """
    if config.preset is None:
        return ExpressionPreset(dict(config.expressions), dict(config.seeds), recorded or "custom")
    if recorded is None:
        return get_preset(config.preset)
    if recorded not in AVAILABLE_PRESETS:
        raise ConfigError(f"Triple '{recorded}' was solved from custom RH data; "
                          f"pass --f/--g/--fbar/--gbar to verify it")
    if recorded != config.preset:
        logging.info(f"Using preset '{recorded}' recorded in the input triple instead of '{config.preset}'")
    return get_preset(recorded)


def _oracle_truncation(trunc):
    return Truncation(min(trunc.n_hbar, 3), -4, 4, min(trunc.t_deg, 2), 0)


def _verify(config, preset, data, triple, artifacts):
    pack = dress_lax(triple, n_max=config.flows, max_iterations=config.max_iterations)
    reports = run_battery(pack, data, extra=lambda p: preset.extra_checks(p, triple))
    if config.oracle_pairs:
        reports.extend(oracle_battery(_oracle_truncation(triple.trunc), config.oracle_pairs,
                                      max(config.oracle_pairs // 2, 1)))
    table = preset.cnm_table(triple)
    if table is not None:
        reports.append(table.report)
        artifacts["cnm"] = render(cnm_frame(table), f"# c_(n,m) for '{preset.name}'")
    artifacts["verify"] = (render(check_report_frame(reports), f"# checks for '{preset.name}'")
                           + "\n" + render(lax_frame(lax_coefficients(pack)), "# Lax coefficients"))
    return reports


def run_pipeline(config):
    """
    Execute the stages of ``config`` and write their artifacts.

    Returns:
    --------
    tuple
        (exit status, dict of artifacts)

    Raises:
    -------
    CheckFailure
        After the artifacts are written, when any verify check failed

    Artifacts of completed stages are written even when a later stage raises.
    """
    trunc = config.truncation
    artifacts = {}
    data = preset = None
    if "solve" in config.stages:
        preset = resolve_preset(config)
        data = preset.load(trunc, config.max_iterations)
        triple = solve_triple(data, trunc, config.window_pad, config.max_iterations)
        name = preset.name
        artifacts["triple"] = triple_record(triple, name)
        artifacts["triple_text"] = triple_text(triple, name)
        for n, value in enumerate(triple.phi):
            print(f"phi_{n} = {value.to_text()}")
    else:
        triple, name = load_triple(config.input_path)
        trunc = triple.trunc

    reports = []
    try:
        if "wkb" in config.stages:
            unbar, bar = triple_phases(triple)
            artifacts["wkb"] = phases_record(unbar, bar, trunc)
            artifacts["wkb_text"] = phases_text(unbar, bar)

        if "tau" in config.stages:
            tables, grad, expansion = assemble(unbar, bar, trunc)
            artifacts["tau"] = tau_record(tables, grad, expansion, trunc)
            artifacts["tau_text"] = tau_text(expansion) + "\n" + render(tau_frame(grad), "# gradients")
            for n, value in sorted(expansion.F.items()):
                print(f"F_{n} = {value.to_text()}")

        if "verify" in config.stages:
            if preset is None:
                preset = resolve_preset(config, name)
            if data is None:
                data = preset.load(trunc, config.max_iterations)
            reports = _verify(config, preset, data, triple, artifacts)
            for report in reports:
                print(report.summary())
    finally:
        write_artifacts(config.out_dir, artifacts, config.output_format)
    failures = failed(reports)
    if failures:
        raise CheckFailure(f"{len(failures)} check(s) failed, first: {failures[0].name}", failures[0])
    return 0, artifacts


def main(argv=None):
    """Main program entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config_manager = initialize_config(args.config_path)
        setup_logging(config_manager, args.log_level)
        config = build_run_config(args, config_manager)
        logging.info(f"Running '{config.command}' with truncation {config.truncation.describe()}")
        status, _ = run_pipeline(config)
        return status
    except TodaError as e:
        logging.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logging.error(f"Unexpected error: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
