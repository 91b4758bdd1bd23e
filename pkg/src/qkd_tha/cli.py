"""Command-line sweeps of key rate versus distance.

Usage::

    qkd-tha run --config sweep.ini --out rates.csv [--preset fig2] [--threads 4]

A config is an INI file. ``[run]`` holds the distance grid and search
settings, ``[channel]`` and ``[protocol]`` the shared physics, and every
``[scenario NAME]`` section one curve. A preset is loaded first and the
``--config`` file (if any) overrides it key by key.

Exit status: 0 on success, 1 on a usage, config or output-path error, 2 if
any row failed.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources

from .channel_model import ChannelParams
from .config import BB84_APPLICATIONS, LT_APPLICATIONS, EpsilonBudget, ExperimentConfig
from .decoy_lp import PoissonSource
from .optimizer import PIPELINES, SearchSettings, WarmStart, pipeline_function

log = logging.getLogger("qkd_tha")

PRESETS = ("fig2", "fig3", "fig5", "fig6a", "fig6b")
THREADS_ENV = "QKD_THA_THREADS"
COLUMNS = (
    "scenario", "distance_km", "rate", "l", "m1_lower", "mph1_upper", "eph_upper",
    "mu0", "mu1", "p_z", "p_mu0", "error",
)
SECTION_KEYS = {
    "run": {"distances", "optimize", "grid_points", "tol"},
    "channel": {"p_d", "eta_d", "alpha_db", "phi_mis_deg"},
    "protocol": {"n_total", "intensities", "intensity_probs", "p_z", "f_e", "eps_s", "eps_c", "n_cut"},
    "scenario": {"pipeline", "delta", "i_max", "kappa", "n_it", "n_total", "asymptotic"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    pipeline: str
    template: ExperimentConfig
    settings: SearchSettings
    optimize: bool


@dataclass(frozen=True)
class SweepPlan:
    distances: tuple[float, ...]
    scenarios: tuple[Scenario, ...]


def _get(section: configparser.SectionProxy, key: str, conv, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"[{section.name}] missing required key '{key}'")
        return default
    try:
        return conv(section[key])
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] key '{key}': {exc}") from None


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "yes", "true", "on"):
        return True
    if lowered in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_distances(text: str) -> tuple[float, ...]:
    """Comma/space separated values, or ``start:stop:step`` with ``stop`` included."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValueError("range must be start:stop:step with step > 0 and stop >= start")
        start, stop, step = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + i * step for i in range(count))
    values = _floats(text)
    if any(v < 0 for v in values):
        raise ValueError("distances must be non-negative")
    return values


def _check_keys(parser: configparser.ConfigParser) -> None:
    for name in parser.sections():
        kind = "scenario" if name.startswith("scenario ") else name
        if kind not in SECTION_KEYS:
            raise ConfigError(f"unknown section [{name}]")
        for key in parser[name]:
            if key not in SECTION_KEYS[kind]:
                raise ConfigError(f"[{name}] unknown key '{key}'")


def load_parser(preset: str | None, config_path: str | None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}'")
        parser.read_string(resources.files("qkd_tha.presets").joinpath(f"{preset}.ini").read_text(), f"<{preset}>")
    if config_path is not None:
        try:
            with open(config_path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
    return parser


def build_plan(parser: configparser.ConfigParser) -> SweepPlan:
    _check_keys(parser)
    for name in ("run", "channel", "protocol"):
        if not parser.has_section(name):
            parser.add_section(name)
    run, chan, proto = parser["run"], parser["channel"], parser["protocol"]
    distances = _get(run, "distances", parse_distances, ())
    do_opt = _get(run, "optimize", _bool, True)
    grid = _get(run, "grid_points", int, 8)
    tol = _get(run, "tol", float, 1e-3)

    try:
        channel = ChannelParams(
            p_d=_get(chan, "p_d", float, 7.2e-8),
            eta_d=_get(chan, "eta_d", float, 0.65),
            alpha_db=_get(chan, "alpha_db", float, 0.2),
            phi_mis=math.radians(_get(chan, "phi_mis_deg", float, 6.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"[channel] {exc}") from None
    try:
        source = PoissonSource(
            _get(proto, "intensities", _floats, (0.5, 0.1, 1e-4)),
            _get(proto, "intensity_probs", _floats, (0.5, 0.25, 0.25)),
            _get(proto, "n_cut", int, 12),
        )
    except ValueError as exc:
        raise ConfigError(f"[protocol] intensities/intensity_probs/n_cut: {exc}") from None
    eps_s = _get(proto, "eps_s", float, 1e-10)
    eps_c = _get(proto, "eps_c", float, 1e-10)
    n_total = _get(proto, "n_total", float, 1e10)
    p_z = _get(proto, "p_z", float, 0.9)
    f_e = _get(proto, "f_e", float, 1.2)

    scenarios = []
    for name in parser.sections():
        if not name.startswith("scenario "):
            continue
        sec = parser[name]
        label = name[len("scenario "):].strip()
        pipeline = _get(sec, "pipeline", str, "bb84")
        if pipeline not in PIPELINES:
            raise ConfigError(f"[{name}] key 'pipeline': expected one of {', '.join(PIPELINES)}")
        delta = _get(sec, "delta", float, math.nan)
        i_max = _get(sec, "i_max", float, math.nan)
        n_apps = LT_APPLICATIONS if pipeline == "lt" else BB84_APPLICATIONS
        try:
            template = ExperimentConfig(
                n_total=_get(sec, "n_total", float, n_total),
                channel=channel,
                source=source,
                p_z_a=p_z,
                p_z_b=p_z,
                delta=None if math.isnan(delta) else delta,
                i_max=None if math.isnan(i_max) else i_max,
                kappa=_get(sec, "kappa", float, 1.0),
                f_e=f_e,
                budget=EpsilonBudget.from_secrecy(eps_s, eps_c, n_apps),
            )
            settings = SearchSettings(
                grid_points=grid,
                tol=tol,
                mu_weak=source.intensities[-1],
                n_it=_get(sec, "n_it", int, 16),
                asymptotic=_get(sec, "asymptotic", _bool, False),
            )
            pipeline_function(pipeline, settings.n_it, settings.asymptotic)
        except ValueError as exc:
            raise ConfigError(f"[{name}] {exc}") from None
        scenarios.append(Scenario(label, pipeline, template, settings, do_opt))
    return SweepPlan(distances, tuple(scenarios))


def _fmt(x: float) -> str:
    return format(float(x), ".16e")


def _row(scenario: str, distance: float, result, cfg: ExperimentConfig, error: str = "") -> list[str]:
    mus, probs = cfg.source.intensities, cfg.source.intensity_probs
    return [
        scenario, _fmt(distance), _fmt(result.rate), _fmt(result.l), _fmt(result.m1_lower),
        _fmt(result.mph1_upper), _fmt(result.eph_upper), _fmt(mus[0]), _fmt(mus[1] if len(mus) > 1 else math.nan),
        _fmt(cfg.p_z_a), _fmt(probs[0]), error,
    ]


def _failed_row(scenario: str, distance: float, cfg: ExperimentConfig, error: str) -> list[str]:
    zeros = [_fmt(0.0)] * 4 + [_fmt(0.5)]
    mus = cfg.source.intensities
    return [scenario, _fmt(distance), *zeros, _fmt(mus[0]), _fmt(mus[1] if len(mus) > 1 else math.nan),
            _fmt(cfg.p_z_a), _fmt(cfg.source.intensity_probs[0]), error]


def run_scenario(scenario: Scenario, distances: tuple[float, ...]) -> list[list[str]]:
    """Rows for one curve; distances run in order so each warm-starts the next."""
    rows = []
    warm = WarmStart()
    evaluate = pipeline_function(scenario.pipeline, scenario.settings.n_it, scenario.settings.asymptotic)
    for d in distances:
        cfg = scenario.template.replace(channel=scenario.template.channel.at_distance(d))
        try:
            if scenario.optimize:
                res = warm.optimize(cfg, scenario.pipeline, scenario.settings)
                rows.append(_row(scenario.name, d, res.result, res.cfg))
            else:
                rows.append(_row(scenario.name, d, evaluate(cfg), cfg))
        except Exception as exc:  # reported per row; the sweep continues
            log.error("scenario %s at %s km failed: %s", scenario.name, d, exc)
            rows.append(_failed_row(scenario.name, d, cfg, f"{type(exc).__name__}: {exc}"))
    return rows


def thread_count(cli_value: int | None) -> int:
    if cli_value is not None:
        return max(1, cli_value)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"environment variable {THREADS_ENV} must be an integer, got {env!r}") from None
    return 1


def run_sweep(plan: SweepPlan, out_path: str, threads: int = 1) -> int:
    """Write the CSV; returns the exit status."""
    t0 = time.perf_counter()
    for sc in plan.scenarios:
        b = sc.template.budget
        log.info(
            "scenario %s: pipeline=%s eps_s=%g eps_c=%g eps_2=%g eps_pa=%g varepsilon=%g bounds=%d eps_kato=%g",
            sc.name, sc.pipeline, b.eps_s, b.eps_c, b.eps_2, b.eps_pa, b.varepsilon, b.n_applications, b.eps_kato,
        )
    if threads > 1 and len(plan.scenarios) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(run_scenario, plan.scenarios, [plan.distances] * len(plan.scenarios)))
    else:
        blocks = [run_scenario(sc, plan.distances) for sc in plan.scenarios]
    failed = 0
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for block in blocks:
            for row in block:
                failed += bool(row[-1])
                writer.writerow(row)
    log.info("wrote %s rows to %s in %.1f s", sum(map(len, blocks)), out_path, time.perf_counter() - t0)
    return 2 if failed else 0


class _ArgParser(argparse.ArgumentParser):
    # usage errors share exit status 1 with config errors; 2 is reserved for failed rows
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_arg_parser() -> argparse.ArgumentParser:
    parser = _ArgParser(prog="qkd-tha", description="Finite-key rates under Trojan-horse attacks")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgParser)
    run = sub.add_parser("run", help="sweep key rate over distance and write a CSV")
    run.add_argument("--config", help="INI file; overrides the preset key by key")
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--preset", choices=PRESETS, help="start from a bundled figure configuration")
    run.add_argument("--threads", type=int, default=None, help=f"worker processes (default ${THREADS_ENV} or 1)")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    if args.config is None and args.preset is None:
        log.error("config error: give --config, --preset, or both")
        return 1
    try:
        plan = build_plan(load_parser(args.preset, args.config))
        threads = thread_count(args.threads)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 1
    try:
        return run_sweep(plan, args.out, threads)
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
