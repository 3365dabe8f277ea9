import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

from dust_plots import FigureSpec, SchemaError, load_spec, render
from dust_plots.cli import main
from dust_plots.render import read_table

GOLDEN = Path(__file__).resolve().parents[1] / "golden"
VERSION = "# dust-coalescent v1"


def _write_csv(path, header, rows):
    lines = [VERSION, header] + rows
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def sample_csv(tmp_path):
    path = tmp_path / "runs.csv"
    rows = [f"100,0.{i},{1.0 + 0.1 * i},{5 + i}" for i in range(40)]
    _write_csv(path, "n,seed,tau,X", rows)
    return path


def test_read_table_requires_version_header(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("n,tau\n1,0.0\n")
    with pytest.raises(SchemaError):
        read_table(bad)


def test_missing_columns_reported_by_name(sample_csv, tmp_path):
    spec = FigureSpec(kind="bars", csv=str(sample_csv),
                      out=str(tmp_path / "o.png"))
    with pytest.raises(SchemaError) as err:
        render(spec)
    assert "m" in str(err.value) and "mass" in str(err.value)


def test_unknown_kind_rejected(sample_csv, tmp_path):
    with pytest.raises(SchemaError):
        FigureSpec(kind="pie", csv=str(sample_csv), out=str(tmp_path / "o.png"))


def test_missing_input_rejected(tmp_path):
    spec = FigureSpec(kind="trend", csv=str(tmp_path / "absent.csv"),
                      out=str(tmp_path / "o.png"))
    with pytest.raises(SchemaError):
        spec.validate()


def test_hist_with_verdict_constants(sample_csv, tmp_path):
    verdict = tmp_path / "verdict.json"
    verdict.write_text(json.dumps(
        {"results": [{"n": 100, "a_n": 0.5, "b_n": 2.0}]}))
    out = tmp_path / "hist.png"
    spec = FigureSpec(kind="hist-vs-ref", csv=str(sample_csv), column="tau",
                      select_n=100, verdict_json=str(verdict),
                      reference="normal", out=str(out))
    render(spec)
    assert out.stat().st_size > 0


def test_hist_empty_selection_rejected(sample_csv, tmp_path):
    spec = FigureSpec(kind="hist-vs-ref", csv=str(sample_csv), column="tau",
                      select_n=999, out=str(tmp_path / "o.png"))
    with pytest.raises(SchemaError):
        render(spec)


def test_trend_with_scaling(sample_csv, tmp_path):
    out = tmp_path / "trend.png"
    spec = FigureSpec(kind="trend", csv=str(sample_csv), column="X",
                      x_column="n", scale_by_x_power=0.5, ref_line=1.0,
                      out=str(out))
    render(spec)
    assert out.stat().st_size > 0


def test_bars_with_reference(tmp_path):
    sim = tmp_path / "occ.csv"
    ref = tmp_path / "ref.csv"
    _write_csv(sim, "m,mass", ["0,0.1", "1,0.5", "2,0.4"])
    _write_csv(ref, "m,mass", ["1,0.55", "2,0.45"])
    out = tmp_path / "bars.png"
    render(FigureSpec(kind="bars", csv=str(sim), ref_csv=str(ref),
                      out=str(out)))
    assert out.stat().st_size > 0


def test_ecf_needs_grid(sample_csv, tmp_path):
    spec = FigureSpec(kind="ecf", csv=str(sample_csv), column="tau",
                      out=str(tmp_path / "o.png"))
    with pytest.raises(SchemaError):
        render(spec)


def test_ecf_with_reference_curve(sample_csv, tmp_path):
    out = tmp_path / "ecf.png"
    spec = FigureSpec(kind="ecf", csv=str(sample_csv), column="tau",
                      z_grid=[-1.0, -0.5, 0.5, 1.0],
                      ref_re=[0.5, 0.8, 0.8, 0.5],
                      ref_im=[0.1, 0.05, -0.05, -0.1],
                      out=str(out))
    render(spec)
    assert out.stat().st_size > 0


def test_cli_render(sample_csv, tmp_path):
    fig = tmp_path / "fig.toml"
    fig.write_text(
        'kind = "trend"\ncsv = "runs.csv"\ncolumn = "X"\n'
        'out = "trend.png"\n'
    )
    runner = CliRunner()
    result = runner.invoke(main, ["render", "--spec", str(fig)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "trend.png").stat().st_size > 0


def test_cli_reports_schema_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("not,a,versioned\nfile,0,0\n")
    fig = tmp_path / "fig.toml"
    fig.write_text('kind = "bars"\ncsv = "bad.csv"\nout = "o.png"\n')
    runner = CliRunner()
    result = runner.invoke(main, ["render", "--spec", str(fig)])
    assert result.exit_code != 0
    assert "version header" in result.output


# ---------------------------------------------------------------------------
# golden figure specs rendered from real pipeline artifacts


def _cli(args, **kw):
    proc = subprocess.run(["dust-coalescent", *args], capture_output=True,
                          text=True, **kw)
    assert proc.returncode == 0, proc.stderr or proc.stdout
    return proc


@pytest.fixture(scope="module")
def golden_dir(tmp_path_factory):
    """Golden specs plus the pipeline artifacts they reference."""
    root = tmp_path_factory.mktemp("golden")
    data = root / "data"
    data.mkdir()
    for f in GOLDEN.glob("*.toml"):
        shutil.copy(f, root / f.name)
    _cli(["simulate", "--measure", "beta:a=2.5,b=1", "--n", "10000",
          "--replicates", "300", "--seed", "5", "--jobs", "2",
          "--out", str(data / "tau.csv")])
    _cli(["verify-tau", "--measure", "beta:a=2.5,b=1", "--n", "10000",
          "--replicates", "300", "--seed", "5", "--jobs", "2",
          "--ks-tol", "0.5", "--out", str(data / "tau_verdict.json")])
    _cli(["simulate", "--measure", "beta:a=1.5,b=1", "--n", "1000,10000",
          "--replicates", "200", "--seed", "3", "--jobs", "2",
          "--out", str(data / "collisions.csv")])
    _cli(["vchain", "--measure", "lebesgue", "--horizon", "3000",
          "--burn-in", "300", "--out", str(data / "v_occupation.csv")])
    _cli(["verify-stationary", "--measure", "lebesgue", "--horizon", "3000",
          "--burn-in", "300", "--ref-out", str(data / "v_reference.csv"),
          "--out", str(data / "v_verdict.json")])
    return root


@pytest.mark.parametrize("name", [
    "tau_hist.toml", "collisions_trend.toml", "v_stationary_bars.toml",
])
def test_golden_specs_render(golden_dir, name):
    spec = load_spec(golden_dir / name)
    out = render(spec)
    assert Path(out).stat().st_size > 0
