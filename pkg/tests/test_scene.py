import hashlib

import numpy as np
import pytest

from rayforge.core.errors import FileFormatError, SceneSyntaxError, SceneValidationError
from rayforge.core.fileio import fnv1a64, write_rayf
from rayforge.core.scene import builtin_scenes, load_scene, parse_scene, parse_scene_text, validate_scene

FIELD_SCENE = """
[domain]
kind = disk

[omega]
kind = constant-field
strength = {b}

[connection]
kind = constant-diagonal
diagonal = 0.4j, -0.7j
"""


def write_scene(tmp_path, text, name="scene.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_builtin_scenes():
    assert builtin_scenes() == ["euclid-disk-b0", "euclid-disk-b03-su2", "euclid-disk-b05",
                                "gaussian-bump", "hyperbolic-disk", "superellipse-swirl"]


@pytest.mark.parametrize("name", ["euclid-disk-b0", "hyperbolic-disk", "superellipse-swirl", "gaussian-bump"])
def test_builtin_scenes_validate(scenes, name):
    report = validate_scene(scenes(name), probe_rays=50)
    assert report.margin > 0.0
    assert report.sup_omega < 1.0
    assert report.min_metric_eigenvalue > 0.0
    assert [row["quantity"] for row in report.rows()][0] == "convexity_margin"


def test_disk_margins(scenes):
    assert validate_scene(scenes("euclid-disk-b0"), probe_rays=20).margin == pytest.approx(1.0, abs=1e-12)
    assert validate_scene(scenes("euclid-disk-b05"), probe_rays=20).margin == pytest.approx(0.5, abs=1e-12)


def test_empty_connection_section_is_scalar(scenes):
    scene = scenes("euclid-disk-b0")
    assert scene.size == 1
    assert scene.name == "euclid-disk-b0"
    assert scene.potential(32).evaluator is not None
    assert scene.potential(32, analytic=False).evaluator is None


def test_hash_ignores_comments_and_layout():
    base = parse_scene_text(FIELD_SCENE.format(b=0.5))
    noisy = parse_scene_text("# a comment\n" + FIELD_SCENE.format(b="0.50").replace("kind = disk",
                                                                                   "kind   =  disk  ; inline"))
    assert base.hash == noisy.hash
    assert base.canonical == noisy.canonical
    assert parse_scene_text(FIELD_SCENE.format(b=0.4)).hash != base.hash


def test_builtin_hash_is_stable():
    assert parse_scene("euclid-disk-b05").hash == parse_scene("euclid-disk-b05").hash
    assert parse_scene("euclid-disk-b05").hash != parse_scene("euclid-disk-b0").hash


def test_unknown_key_reports_its_position():
    with pytest.raises(SceneSyntaxError) as info:
        parse_scene_text("[domain]\nkind = disk\n\n[omega]\nstrenght = 0.5\n")
    assert info.value.line == 5
    assert info.value.column == 12
    assert info.value.exit_code == 2


def test_syntax_errors():
    with pytest.raises(SceneSyntaxError):
        parse_scene_text("[lighting]\nkind = soft\n")
    with pytest.raises(SceneSyntaxError):
        parse_scene_text("[domain]\nradius = wide\n")
    with pytest.raises(SceneSyntaxError):
        parse_scene_text("kind = disk\n")


def test_range_errors():
    with pytest.raises(SceneValidationError):
        parse_scene_text("[domain]\nradius = -1\n")
    with pytest.raises(SceneValidationError):
        parse_scene_text("[metric]\nkind = spherical\n")
    with pytest.raises(SceneValidationError):
        parse_scene_text("[fan]\nglancing_margin = 2.0\n")


def test_strong_field_is_not_convex(tmp_path):
    path = write_scene(tmp_path, FIELD_SCENE.format(b=2.0))
    with pytest.raises(SceneValidationError) as info:
        load_scene(path)
    assert info.value.exit_code == 3
    assert "convex" in str(info.value)


def test_flat_super_ellipse_is_rejected(tmp_path):
    path = write_scene(tmp_path, "[domain]\nkind = super-ellipse\nexponent = 4\nsemi_axis_2 = 0.75\n")
    with pytest.raises(SceneValidationError):
        load_scene(path)


def test_hyperbolic_metric_needs_a_small_domain(tmp_path):
    path = write_scene(tmp_path, "[metric]\nkind = hyperbolic\n")
    with pytest.raises(SceneValidationError):
        load_scene(path, validate=False)


def test_connection_size_must_match(tmp_path):
    path = write_scene(tmp_path, "[connection]\nkind = su2-gaussian\nsize = 3\n")
    with pytest.raises(SceneValidationError):
        load_scene(path, validate=False)


def test_solver_section_overrides_the_step(tmp_path):
    path = write_scene(tmp_path, "[solver]\nstep = 0.005\n")
    scene = load_scene(path, validate=False)
    assert scene.config["flow"]["step"] == 0.005
    assert scene.flow().step == 0.005


def test_missing_scene():
    with pytest.raises(FileFormatError) as info:
        parse_scene("no-such-scene")
    assert "euclid-disk-b0" in str(info.value)


def test_grid_potential_file_enters_the_hash(tmp_path):
    values = np.zeros((20, 20, 1, 1), dtype=complex)
    write_rayf(tmp_path / "q.rayf", values)
    path = write_scene(tmp_path, "[potential]\nkind = grid\npath = q.rayf\n")
    scene = load_scene(path, validate=False)
    assert scene.potential().grid.shape == (20, 20)
    first = scene.hash

    values[10, 10] = 1.0 + 0.5j
    write_rayf(tmp_path / "q.rayf", values)
    scene = load_scene(path, validate=False)
    assert scene.hash != first
    assert scene.potential().values[10, 10, 0, 0] == 1.0 + 0.5j


def test_data_files_are_digested_before_hashing(tmp_path):
    write_rayf(tmp_path / "q.rayf", np.zeros((20, 20, 1, 1), dtype=complex))
    path = write_scene(tmp_path, "[potential]\nkind = grid\npath = q.rayf\n")
    spec = parse_scene(path)
    digest = hashlib.sha256((tmp_path / "q.rayf").read_bytes()).hexdigest()
    assert f"path = sha256:{digest}" in spec.canonical
    assert spec.hash == fnv1a64(spec.canonical.encode("utf-8"))


def test_grid_potential_with_the_wrong_shape(tmp_path):
    write_rayf(tmp_path / "q.rayf", np.zeros((20, 20, 2, 2), dtype=complex))
    path = write_scene(tmp_path, "[potential]\nkind = grid\npath = q.rayf\n")
    with pytest.raises(FileFormatError):
        load_scene(path, validate=False)


def test_missing_data_file(tmp_path):
    path = write_scene(tmp_path, "[potential]\nkind = grid\npath = absent.rayf\n")
    with pytest.raises(FileFormatError):
        parse_scene(path)
