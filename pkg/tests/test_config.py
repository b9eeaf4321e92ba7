import dataclasses

import pytest

from bgattack import ConfigError
from bgattack.config import (RunConfig, build_attack_config, build_dataset,
                             build_detector, parse_config, serialize_config)
from bgattack.losses import BidirAnchor, TvMode


def test_empty_sections_fill_documented_defaults():
    rc = parse_config("[attack]\n")
    assert rc.attack.epochs == 50
    assert rc.attack.alpha0 == 0.03
    assert rc.losses.eta == 9.0
    assert rc.losses.lam == 0.01
    assert rc.eval.conf_threshold == 0.25
    assert rc.eval.iou_threshold == 0.5


def test_defaults_from_empty_document():
    rc = parse_config("")
    assert rc == RunConfig()


def test_full_round_trip():
    text = """
[dataset]
scenes = 6
canvas_h = 48
canvas_w = 48
sprites = disk:12:0, checker:8:1
seed = 11

[detector]
cell_size = 12
num_classes = 2
init = random

[attack]
epochs = 3
batch_size = 2
lr_mode = poly
lr_exponent = 0.5
grid_n = 4
phase_mode = literal

[losses]
eta = 4.5
lambda = 0.02
tv_mode = adaptive

[pa]
noise_sigma = 0.0
contrast_lo = 1.0
contrast_hi = 1.0

[eval]
conf_threshold = 0.3

[output]
dir = results
checkpoint_every = 2
"""
    rc = parse_config(text)
    assert rc.dataset.sprites[1].shape == "checker"
    assert rc.losses.tv_mode is TvMode.ADAPTIVE
    assert rc.losses.bidir_anchor is BidirAnchor.SUCCESSOR
    rc2 = parse_config(serialize_config(rc))
    assert rc2 == rc


def test_unknown_key_and_section_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("[attack]\nepochz = 3\n")
    assert "epochz" in str(err.value)
    with pytest.raises(ConfigError):
        parse_config("[attacks]\n")
    with pytest.raises(ConfigError):
        parse_config("orphan = 1\n")
    with pytest.raises(ConfigError):
        parse_config("[attack]\nepochs = 3\nepochs = 4\n")


def test_type_errors_name_key():
    with pytest.raises(ConfigError) as err:
        parse_config("[attack]\nepochs = soon\n")
    assert "epochs" in str(err.value)
    with pytest.raises(ConfigError):
        parse_config("[losses]\ntv_mode = fancy\n")
    with pytest.raises(ConfigError):
        parse_config("[dataset]\nsprites = disk:12\n")


def test_constraint_violations():
    with pytest.raises(ConfigError):
        parse_config("[losses]\neta = -1\n")
    with pytest.raises(ConfigError):
        parse_config("[attack]\nepochs = 0\n")
    with pytest.raises(ConfigError):
        parse_config("[eval]\nconf_threshold = 1.5\n")
    with pytest.raises(ConfigError):
        parse_config("[dataset]\nsprites = disk:70:0\n")
    with pytest.raises(ConfigError):
        parse_config("[pa]\ncontrast_lo = 1.3\ncontrast_hi = 0.9\n")


def test_comments_and_blank_lines():
    rc = parse_config("# heading\n\n[attack]\n; note\nepochs = 7\n")
    assert rc.attack.epochs == 7


def test_builders_produce_consistent_objects():
    rc = parse_config("[dataset]\nscenes = 3\n[attack]\nepochs = 2\ngrid_n = 4\n")
    scenes = build_dataset(rc)
    assert len(scenes) == 3
    assert scenes[0].image.shape == (64, 64, 3)
    det = build_detector(rc)
    assert det.cell_size == rc.detector.cell_size
    cfg = build_attack_config(rc)
    assert cfg.epochs == 2
    assert cfg.ensemble is not None and cfg.ensemble.grid_n == 4
    assert cfg.loss_weights == rc.losses


def test_model_b_seed_builds_second_detector():
    rc = parse_config("[attack]\ngrid_n = 4\nmodel_b_seed = 77\n")
    cfg = build_attack_config(rc)
    assert cfg.ensemble.model_b is not None
    rc2 = parse_config("[attack]\ngrid_n = 4\n")
    assert build_attack_config(rc2).ensemble.model_b is None


def test_serialize_default_equals_default():
    rc = RunConfig()
    assert parse_config(serialize_config(rc)) == rc
    again = dataclasses.replace(rc)
    assert again == rc
