from pathlib import Path

import numpy as np
import pytest
import yaml

from zonalmc.config import SCHEMA, ScenarioConfig, corrupted
from zonalmc.errors import ConfigError
from zonalmc.invariants import metric_definiteness
from zonalmc.manifolds import Ellipsoid3DChart, Sphere2Chart

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
PROFILE = "flow: {profile: {family: constant, value: 1}}\n"


@pytest.mark.parametrize("text,path,line,fragment", [
    ("manifold: {kind: sphere2}\nflow:\n  profile: {family: constant, value: 1}\n  colour: red\n",
     "flow.colour", 4, "unknown key"),
    ("manifold:\n  kind: ellipsoid3d\n  a: two\n" + PROFILE, "manifold.a", 3, "expected a number"),
    ("manifold: {kind: cube}\n" + PROFILE, "manifold.kind", 1, "unknown manifold kind"),
    ("manifold: {kind: sphere2}\n" + PROFILE + "perturbation: {mode: magic}\n", "perturbation.mode", 3,
     "unknown mode"),
    ("manifold: {kind: ellipsoid3d, a: 2}\n" + PROFILE + "perturbation: {mode: bump}\n", "perturbation", 3,
     "needs a 'bump' section"),
    ("manifold: {kind: sphere2}\nflow: {profile: {family: bump, center: 0.2}}\n", "flow.profile", 2,
     "half_width"),
    ("manifold: {kind: ellipsoid3d, a: 2}\n" + PROFILE + "quadrature: {resolution: [1, 2]}\n",
     "quadrature.resolution", 3, "expected 3 positive integers"),
    ("manifold: {kind: ellipsoid3d, a: -2}\n" + PROFILE, "manifold.a", 1, "positive"),
    ("manifold: {kind: sphere2}\n" + PROFILE + "quadrature: {collar: 0.7}\n", "quadrature.collar", 3, "collar"),
])
def test_errors_carry_path_and_line(text, path, line, fragment):
    with pytest.raises(ConfigError) as info:
        ScenarioConfig.from_text(text, "s.yaml")
    assert info.value.path == path
    assert info.value.line == line
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"line {line}: ")


def test_missing_section_and_syntax_errors():
    with pytest.raises(ConfigError, match="flow.profile"):
        ScenarioConfig.from_text("manifold: {kind: ellipsoid3d}\n")
    with pytest.raises(ConfigError, match="YAML syntax error"):
        ScenarioConfig.from_text("manifold: [\n", "s.yaml")
    with pytest.raises(ConfigError, match="mapping"):
        ScenarioConfig.from_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        ScenarioConfig.from_file(SCENARIOS / "missing.yaml")


def test_defaults_are_filled():
    cfg = ScenarioConfig.from_text("manifold: {kind: ellipsoid3d, a: 2}\n" + PROFILE)
    tree = cfg.to_dict()
    assert set(tree) == set(SCHEMA)
    assert tree["perturbation"]["mode"] == "search" and tree["perturbation"]["budget"] == 200
    assert tree["quadrature"]["collar"] == 1e-3
    assert tree["flow"]["p"] == 1.0 and tree["flow"]["q"] == 0.0


@pytest.mark.parametrize("name", sorted(p.name for p in SCENARIOS.glob("*.yaml")))
def test_shipped_scenarios_round_trip(name):
    cfg = ScenarioConfig.from_file(SCENARIOS / name)
    again = ScenarioConfig.from_text(cfg.dumps())
    assert again.to_dict() == cfg.to_dict()
    assert again.digest() == cfg.digest()
    assert ScenarioConfig.from_dict(yaml.safe_load(cfg.dumps())).to_dict() == cfg.to_dict()


def test_digest_tracks_content():
    a = ScenarioConfig.from_text("manifold: {kind: ellipsoid3d, a: 2}\n" + PROFILE)
    b = ScenarioConfig.from_text("manifold: {kind: ellipsoid3d, a: 3}\n" + PROFILE)
    assert a.digest() != b.digest()


def test_resolution_defaults_and_scale():
    cfg = ScenarioConfig.from_file(SCENARIOS / "certified.yaml")
    chart = cfg.chart()
    assert isinstance(chart, Ellipsoid3DChart) and chart.a == 2.0
    assert cfg.resolution(chart) == (32, 32, 96)
    assert cfg.resolution(chart, 0.5) == (16, 16, 48)
    sphere = ScenarioConfig.from_file(SCENARIOS / "sphere2.yaml")
    assert sphere.resolution(sphere.chart()) == (96, 32)


def test_corrupted_chart_is_indefinite():
    cfg = ScenarioConfig.from_file(SCENARIOS / "corrupted.yaml")
    chart = cfg.chart()
    pts = Sphere2Chart().sample(20, np.random.default_rng(0), 1e-2)
    assert metric_definiteness(chart, pts) > 0
    assert metric_definiteness(corrupted(Sphere2Chart()), pts) > 0
    assert metric_definiteness(Sphere2Chart(), pts) < 0
