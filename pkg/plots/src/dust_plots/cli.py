"""Command line entry: ``plots render --spec fig.toml``."""

import click

from .render import SchemaError, load_spec, render


@click.group()
def main():
    """Figure rendering for dust-coalescent CSV/JSON artifacts."""


@main.command(name="render")
@click.option("--spec", "spec_path", required=True,
              type=click.Path(exists=True), help="TOML figure spec.")
def render_cmd(spec_path):
    try:
        out = render(load_spec(spec_path))
    except SchemaError as exc:
        raise click.ClickException(str(exc))
    click.echo(out)


if __name__ == "__main__":
    main()
