import math

import pytest
from pydantic import ValidationError

from qtraj.commands.common import scalar_product_of
from qtraj.config import RunConfig, Subcommand, WignerState, load_run_config
from qtraj.exceptions import ConfigError
from qtraj.models.targets import TargetKind


def test_defaults_without_a_file():
    config = load_run_config()
    assert config.subcommand is Subcommand.SYNTHESIZE
    assert config.physics.L == 40.0
    assert config.grid.nodes_per_panel == 8
    assert config.window == pytest.approx(40.0 - 1.5 * math.pi)


def test_toml_file_is_loaded(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        'subcommand = "wigner"\n'
        'state = "free-gaussian"\n'
        'time = 2.0\n'
        '[physics]\n'
        'dx0 = 0.5\n'
        '[grid]\n'
        'n_phase = 256\n',
        encoding="utf-8",
    )
    config = load_run_config(path)
    assert config.subcommand is Subcommand.WIGNER
    assert config.state is WignerState.FREE_GAUSSIAN
    assert config.physics.dx0 == 0.5
    assert config.grid.n_phase == 256
    assert config.time == 2.0


def test_overrides_win_over_the_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('target = "reflected"\n[physics]\nv = 2.0\nN = 12\n', encoding="utf-8")
    config = load_run_config(path, {"target": "transmitted", "physics": {"v": 0.5}})
    assert config.target is TargetKind.TRANSMITTED
    assert config.physics.v == 0.5
    assert config.physics.N == 12


def test_missing_file_raises(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.toml")


def test_unknown_keys_are_rejected(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("nodes = 3\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_run_config(path)


def test_nonpositive_width_is_rejected():
    with pytest.raises(ValidationError):
        load_run_config(overrides={"physics": {"dx": 0.0}})


def test_single_mode_basis_is_rejected():
    with pytest.raises(ValidationError):
        load_run_config(overrides={"physics": {"N": 0}})


def test_window_must_keep_the_packet_in_the_box():
    with pytest.raises(ValidationError):
        load_run_config(overrides={"subcommand": "synthesize", "physics": {"L": 10.0}, "scalar_product": {"T": 9.0}})


def test_window_is_not_checked_for_unrelated_subcommands():
    config = load_run_config(overrides={"subcommand": "basis", "physics": {"L": 10.0}, "scalar_product": {"T": 9.0}})
    assert config.window == 9.0


def test_run_config_dumps_plain_values():
    config = RunConfig(subcommand="mixture", physics={"k": 2.0})
    dumped = config.model_dump(mode="json")
    assert dumped["subcommand"] == "mixture"
    assert dumped["physics"]["k"] == 2.0
    assert dumped["output_dir"] == "artifacts"


@pytest.mark.parametrize(("target", "mask", "expected"), [
    ("transmitted", None, True),
    ("reflected", None, False),
    ("transmitted", False, False),
    ("reflected", True, True),
])
def test_mask_defaults_to_the_barrier_strip_for_transmitted_runs(target, mask, expected):
    overrides = {"subcommand": "synthesize", "target": target}
    if mask is not None:
        overrides["scalar_product"] = {"mask": mask}
    spec = scalar_product_of(load_run_config(overrides=overrides))
    assert spec.mask is expected
    if expected:
        assert spec.active_mask == pytest.approx((3.0 * math.pi, 1.5 * math.pi))
    else:
        assert spec.active_mask == (0.0, 0.0)
