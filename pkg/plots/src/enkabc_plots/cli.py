"""Command-line interface: one command per figure kind."""
from __future__ import annotations

import sys

import click

from .figures import FigureSpec, MissingColumnsError, render


def _figure_command(name, kind, input_help):
    @click.command(name)
    @click.argument("inputs", nargs=-1, required=True,
                    type=click.Path(exists=True))
    @click.option("--out", required=True, type=click.Path(),
                  help="Output image path.")
    @click.option("--method", "methods", multiple=True,
                  help="Restrict to these methods (repeatable); default all.")
    def command(inputs, out, methods):
        try:
            render(FigureSpec(inputs=inputs, kind=kind, output=out,
                              methods=methods))
        except (MissingColumnsError, ValueError) as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(2)
        click.echo(f"wrote {out}")

    command.help = input_help
    return command


@click.group()
def main():
    """Figures from experiment CSV output."""


main.add_command(_figure_command(
    "rmse-vs-eps", "rmse_vs_eps",
    "Log RMSE against log tolerance from summary CSV(s).",
))
main.add_command(_figure_command(
    "rmse-vs-t", "rmse_vs_T",
    "Log RMSE against the number of steps from summary CSV(s).",
))
main.add_command(_figure_command(
    "sd-vs-eps", "sd_vs_eps",
    "Log estimator SD against log tolerance from summary CSV(s).",
))
main.add_command(_figure_command(
    "posterior-panels", "posterior_panels",
    "Per-component posterior density panels from chain CSV(s).",
))


if __name__ == "__main__":
    main()
