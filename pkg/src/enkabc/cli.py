"""Command-line entry points for the estimator studies."""
from __future__ import annotations

import pathlib
import sys

import click

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .experiments import (
    PRESETS,
    ConfigError,
    config_from_mapping,
    dump_schedule,
    run_study,
)

_STUDY_OF_COMMAND = {
    "gaussian-ml": "gaussian_ml",
    "lv-sd": "lv_sd",
    "lv-mcmc": "lv_mcmc",
}


def _load_config(command, config, preset, seed, workers, out_dir, replicates, n_iters):
    mapping = {"study": _STUDY_OF_COMMAND[command]}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; choose from {', '.join(sorted(PRESETS))}"
            )
        mapping.update(PRESETS[preset])
        if mapping["study"] != _STUDY_OF_COMMAND[command]:
            raise ConfigError(
                f"preset {preset!r} belongs to study {mapping['study']!r}"
            )
    if config is not None:
        with open(config, "rb") as fh:
            try:
                mapping.update(tomllib.load(fh))
            except tomllib.TOMLDecodeError as err:
                raise ConfigError(f"config file {config}: {err}") from err
    if seed is not None:
        mapping["seed"] = seed
    if workers is not None:
        mapping["workers"] = workers
    if out_dir is not None:
        mapping["out_dir"] = out_dir
    if replicates is not None:
        mapping["replicates"] = replicates
    if n_iters is not None:
        mapping["n_iters"] = n_iters
    cfg = config_from_mapping(mapping)
    pathlib.Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    return cfg


def _study_options(fn):
    for deco in (
        click.option("--config", type=click.Path(exists=True), default=None,
                     help="TOML experiment configuration."),
        click.option("--preset", default=None, help="Named built-in configuration."),
        click.option("--seed", type=int, default=None),
        click.option("--workers", type=int, default=None),
        click.option("--out-dir", type=click.Path(), default=None),
        click.option("--replicates", type=int, default=None,
                     help="Override the replicate count."),
        click.option("--n-iters", type=int, default=None,
                     help="Override the chain length (MCMC study)."),
    ):
        fn = deco(fn)
    return fn


@click.group()
def main():
    """Simulation-based likelihood estimator studies."""


def _run(command, **kwargs):
    try:
        cfg = _load_config(command, **kwargs)
        run_study(cfg)
    except ConfigError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(2)
    click.echo(f"wrote CSV output to {cfg.out_dir}")


@main.command("gaussian-ml")
@_study_options
def gaussian_ml(**kwargs):
    """Toy-model accuracy sweep over tolerance, ensemble size, and steps."""
    _run("gaussian-ml", **kwargs)


@main.command("lv-sd")
@_study_options
def lv_sd(**kwargs):
    """Predator-prey estimator standard deviation study."""
    _run("lv-sd", **kwargs)


@main.command("lv-mcmc")
@_study_options
def lv_mcmc(**kwargs):
    """Predator-prey pseudo-marginal MCMC study."""
    _run("lv-mcmc", **kwargs)


@main.command("schedule-dump")
@click.option("--eps", type=float, required=True, help="Target tolerance.")
@click.option("--kappa", type=float, required=True, help="Initial spread ratio.")
@click.option("-T", "--steps", "steps", type=int, required=True)
@click.option("--out-dir", type=click.Path(), default=".")
def schedule_dump(eps, kappa, steps, out_dir):
    """Write the closed-form tolerance/temperature schedule as CSV."""
    pathlib.Path(out_dir).mkdir(parents=True, exist_ok=True)
    out = pathlib.Path(out_dir) / "schedule.csv"
    dump_schedule(eps, kappa, steps, out)
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
