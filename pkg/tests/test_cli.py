import pytest
from click.testing import CliRunner

from rayforge import __version__
from rayforge.cli import cli


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(cli, list(args) + ["--config", str(tmp_path / "absent.yaml"),
                                                "--output-dir", str(tmp_path / "out")])

    return invoke


def test_version():
    result = CliRunner().invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_geodesic_csv(run, tmp_path):
    out = tmp_path / "g.csv"
    result = run("geodesic", "-s", "euclid-disk-b05", "--theta", "0.3", "--alpha", "0.2", "-h", "0.01",
                 "--t0", "1.5", "-o", str(out))
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines[0] == "s,x1,x2,v1,v2,t"
    assert lines[1].split(",")[-1] == "1.5"


def test_geodesic_default_output_name(run, tmp_path):
    result = run("geodesic", "-s", "euclid-disk-b0", "-h", "0.05", "--format", "rayf")
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "euclid-disk-b0_geodesic.rayf").exists()


def test_xray_is_reproducible_across_thread_counts(run, tmp_path):
    first, second = tmp_path / "a.rsin", tmp_path / "b.rsin"
    common = ["xray", "-s", "euclid-disk-b0", "--n-theta", "8", "--n-alpha", "4", "-h", "0.01", "--csv"]
    assert run(*common, "-o", str(first), "-j", "1").exit_code == 0
    assert run(*common, "-o", str(second), "-j", "3").exit_code == 0
    assert first.read_bytes() == second.read_bytes()
    assert first.with_suffix(".csv").read_text().startswith("theta,alpha,re,im")


def test_invert_refuses_a_foreign_sinogram(run, tmp_path):
    y = tmp_path / "y.rsin"
    assert run("xray", "-s", "euclid-disk-b0", "--n-theta", "8", "--n-alpha", "4", "-h", "0.01",
               "-o", str(y)).exit_code == 0
    result = run("invert", "-y", str(y), "-s", "euclid-disk-b05")
    assert result.exit_code == 2
    assert "cache-mismatch" in result.output


def test_invert_writes_its_artifacts(run, tmp_path):
    y = tmp_path / "y.rsin"
    assert run("xray", "-s", "euclid-disk-b0", "--n-theta", "8", "--n-alpha", "4", "-h", "0.01",
               "-o", str(y)).exit_code == 0
    rec = tmp_path / "rec.rayf"
    result = run("invert", "-y", str(y), "-s", "euclid-disk-b0", "--nodes", "16", "--iters", "5",
                 "--truth", "-o", str(rec))
    assert result.exit_code == 0, result.output
    assert rec.exists()
    assert (tmp_path / "rec_00.pgm").exists()
    assert (tmp_path / "rec_report.csv").read_text().startswith("iteration,residual,normal_residual")


def test_beam_verify_minkowski(run, tmp_path):
    result = run("beam-verify", "-o", str(tmp_path / "beams.csv"))
    assert result.exit_code == 0, result.output
    assert "PASS" in result.output
    assert (tmp_path / "beams.csv").read_text().startswith("quantity,value,tolerance,pass")


def test_unknown_scene_is_an_input_error(run):
    result = run("xray", "-s", "no-such-scene")
    assert result.exit_code == 2
    assert "file-format" in result.output


def test_invalid_scene_exits_with_validation_code(run, tmp_path):
    scene = tmp_path / "strong.ini"
    scene.write_text("[omega]\nkind = constant-field\nstrength = 2.0\n")
    result = run("geodesic", "-s", str(scene))
    assert result.exit_code == 3
    assert "scene-invalid" in result.output


def test_slice_requires_a_frequency(run):
    assert run("slice", "-s", "euclid-disk-b0").exit_code == 2


def test_validate_reports_the_margin(run, tmp_path):
    report = tmp_path / "valid.csv"
    result = run("validate", "-s", "euclid-disk-b05", "--probe-rays", "20", "-o", str(report))
    assert result.exit_code == 0, result.output
    rows = report.read_text().splitlines()
    assert rows[0] == "quantity,value"
    name, value = rows[1].split(",")
    assert name == "convexity_margin"
    assert float(value) == pytest.approx(0.5, abs=1e-12)


def test_validate_rejects_a_trapping_field(run, tmp_path):
    scene = tmp_path / "strong.ini"
    scene.write_text("[omega]\nkind = constant-field\nstrength = 2.0\n")
    result = run("validate", "-s", str(scene))
    assert result.exit_code == 3
