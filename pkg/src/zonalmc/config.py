"""Scenario files: a YAML key/value tree, validated against a fixed schema.

Every key is documented in ``SCHEMA`` with its unit. Unknown keys and type
errors are reported with the dotted path and the line of the offending entry.
``ScenarioConfig.to_dict`` returns the fully resolved tree (defaults filled),
and parsing that tree again gives the same tree.

Example::

    manifold:
      kind: ellipsoid3d        # ellipsoid2d | sphere2 | ellipsoid3d | flat-torus
      a: 2.0                   # aspect ratio (dimensionless)
    flow:
      p: 1
      q: 0
      profile: {family: bump, center: 0.65, half_width: 0.3}
    perturbation:
      mode: bump
      bump: {center_t: 0.0, center_chi: 0.5, radius: 0.12, t_radius: 2.5}
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import yaml

from .errors import ArgumentError, ConfigError

# key -> (type, default, unit / meaning); a dict value is a nested section
REQUIRED = object()

PROFILE_KEYS = {
    "bump": {"center": (float, REQUIRED, "radians"), "half_width": (float, REQUIRED, "radians"),
             "amplitude": (float, 1.0, "velocity scale")},
    "raised-cosine": {"center": (float, REQUIRED, "radians"), "half_width": (float, REQUIRED, "radians"),
                      "amplitude": (float, 1.0, "velocity scale")},
    "poly-cos2": {"coeffs": (list, REQUIRED, "polynomial coefficients in cos^2, lowest first")},
    "table": {"x": (list, REQUIRED, "radians, strictly increasing"), "y": (list, REQUIRED, "profile values"),
              "degree": (int, 3, "spline degree")},
    "constant": {"value": (float, REQUIRED, "velocity scale")},
}

SCHEMA = {
    "manifold": {
        "kind": (str, REQUIRED, "ellipsoid2d | sphere2 | ellipsoid3d | flat-torus"),
        "a": (float, 1.0, "aspect ratio, dimensionless"),
        "profile_resolution": (int, 257, "nodes of the arclength table (2D only)"),
        "corrupt": (str, "none", "none | negate-g22 (testing the verify command)"),
    },
    "flow": {
        "p": (float, 1.0, "coefficient of d_xi (3D)"),
        "q": (float, 0.0, "coefficient of d_mu (3D)"),
        "rational": (bool, True, "p, q are integers (S1 flow); false flags q/p irrational"),
        "profile": (dict, REQUIRED, "profile family and parameters"),
    },
    "perturbation": {
        "mode": (str, "search", "search | bump | rotational | flow | none"),
        "budget": (int, 200, "mc evaluations for mode=search"),
        "t_radius": (float, 2.5, "radians, t half-width for mode=search"),
        "margin": (float, 0.01, "radians, distance kept from the edge of U+"),
        "weighted": (bool, True, "divide the bump by the volume density (false breaks div Y = 0)"),
        "bump": (dict, None, "center_t, center_chi, radius [radians], amplitude, t_radius [radians]"),
        "rotational": (dict, None, "axes, center, radius, amplitude, cutoff_axis, cutoff_center, cutoff_radius"),
    },
    "quadrature": {
        "resolution": (list, None, "nodes per axis; default 32 periodic, 96 bounded"),
        "collar": (float, 1e-3, "radians excluded at coordinate singularities"),
        "richardson": (bool, True, "estimate the error by doubling the resolution"),
        "samples": (int, 400, "random points for pointwise checks"),
    },
    "output": {
        "dir": (str, "out", "directory for report.json, integrand.csv, profile.csv"),
        "csv": (bool, True, "write integrand.csv and profile.csv"),
    },
}

BUMP_KEYS = {"center_t": (float, 0.0, "radians"), "center_chi": (float, REQUIRED, "radians"),
             "radius": (float, REQUIRED, "radians"), "amplitude": (float, 1.0, "scale"),
             "t_radius": (float, None, "radians")}
ROTATIONAL_KEYS = {"axes": (list, REQUIRED, "two axis indices"), "center": (list, REQUIRED, "radians"),
                   "radius": (float, REQUIRED, "radians"), "amplitude": (float, 1.0, "scale"),
                   "cutoff_axis": (int, None, "axis index"), "cutoff_center": (float, 0.0, "radians"),
                   "cutoff_radius": (float, 1.0, "radians")}

KINDS = ("ellipsoid2d", "sphere2", "ellipsoid3d", "flat-torus")
MODES = ("search", "bump", "rotational", "flow", "none")


def _line_map(text: str) -> dict:
    """Dotted key path -> 1-based line number, from the YAML node tree."""
    lines: dict = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = f"{path}.{k.value}" if path else str(k.value)
                lines[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                p = f"{path}[{i}]"
                lines[p] = v.start_mark.line + 1
                walk(v, p)

    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if root is not None:
        walk(root, "")
    return lines


class _Validator:
    def __init__(self, lines: dict):
        self.lines = lines

    def fail(self, path, msg):
        line = self.lines.get(path)
        while line is None and "." in path:
            path_up = path.rsplit(".", 1)[0]
            line = self.lines.get(path_up)
            path = path_up
        raise ConfigError(msg, path=path, line=line)

    def coerce(self, path, typ, value):
        if value is None:
            return None
        if typ is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self.fail(path, f"expected a number, got {value!r}")
            return float(value)
        if typ is int:
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(path, f"expected an integer, got {value!r}")
            return value
        if typ is bool:
            if not isinstance(value, bool):
                self.fail(path, f"expected true/false, got {value!r}")
            return value
        if typ is str:
            if not isinstance(value, str):
                self.fail(path, f"expected a string, got {value!r}")
            return value
        if typ is list:
            if not isinstance(value, list):
                self.fail(path, f"expected a list, got {value!r}")
            return value
        if typ is dict:
            if not isinstance(value, dict):
                self.fail(path, f"expected a mapping, got {value!r}")
            return value
        raise TypeError(typ)

    def section(self, path, data, schema):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            self.fail(path, f"expected a mapping, got {data!r}")
        out = {}
        for key in data:
            if key not in schema:
                self.fail(f"{path}.{key}" if path else str(key),
                          f"unknown key {key!r}; allowed: {', '.join(schema)}")
        for key, spec in schema.items():
            sub = f"{path}.{key}" if path else key
            if isinstance(spec, dict):
                out[key] = self.section(sub, data.get(key), spec)
                continue
            typ, default, _unit = spec
            if key in data:
                out[key] = self.coerce(sub, typ, data[key])
            elif default is REQUIRED:
                self.fail(path, f"missing required key {sub!r}")
            else:
                out[key] = copy.deepcopy(default)
        return out


def _numbers(v: _Validator, path, seq, typ=float):
    return [v.coerce(f"{path}[{i}]", typ, x) for i, x in enumerate(seq)]


def resolve(data, lines=None) -> dict:
    """Validate a raw tree and fill defaults."""
    v = _Validator(lines or {})
    if not isinstance(data, dict):
        v.fail("", "scenario file must be a mapping at top level")
    out = v.section("", data, SCHEMA)
    man = out["manifold"]
    if man["kind"] not in KINDS:
        v.fail("manifold.kind", f"unknown manifold kind {man['kind']!r}; expected one of {KINDS}")
    if not man["a"] > 0:
        v.fail("manifold.a", "a must be positive")
    if man["corrupt"] not in ("none", "negate-g22"):
        v.fail("manifold.corrupt", f"unknown corruption {man['corrupt']!r}")

    prof = out["flow"]["profile"]
    fam = prof.get("family")
    if fam not in PROFILE_KEYS:
        v.fail("flow.profile.family" if "family" in prof else "flow.profile",
               f"profile family must be one of {tuple(PROFILE_KEYS)}, got {fam!r}")
    body = {k: val for k, val in prof.items() if k != "family"}
    resolved = v.section("flow.profile", body, PROFILE_KEYS[fam])
    for key in ("coeffs", "x", "y"):
        if key in resolved:
            resolved[key] = _numbers(v, f"flow.profile.{key}", resolved[key])
    out["flow"]["profile"] = {"family": fam, **resolved}

    pert = out["perturbation"]
    if pert["mode"] not in MODES:
        v.fail("perturbation.mode", f"unknown mode {pert['mode']!r}; expected one of {MODES}")
    if pert["bump"] is not None:
        pert["bump"] = v.section("perturbation.bump", pert["bump"], BUMP_KEYS)
    elif pert["mode"] == "bump":
        v.fail("perturbation", "mode=bump needs a 'bump' section")
    if pert["rotational"] is not None:
        rot = v.section("perturbation.rotational", pert["rotational"], ROTATIONAL_KEYS)
        rot["axes"] = _numbers(v, "perturbation.rotational.axes", rot["axes"], int)
        rot["center"] = _numbers(v, "perturbation.rotational.center", rot["center"])
        pert["rotational"] = rot
    elif pert["mode"] == "rotational":
        v.fail("perturbation", "mode=rotational needs a 'rotational' section")

    quad = out["quadrature"]
    if quad["resolution"] is not None:
        quad["resolution"] = _numbers(v, "quadrature.resolution", quad["resolution"], int)
        dim = 3 if man["kind"] == "ellipsoid3d" else 2
        if len(quad["resolution"]) != dim or min(quad["resolution"]) < 1:
            v.fail("quadrature.resolution", f"expected {dim} positive integers, got {quad['resolution']}")
    if not 0 < quad["collar"] < 0.5:
        v.fail("quadrature.collar", "collar must lie in (0, 0.5)")
    return out


@dataclass
class ScenarioConfig:
    tree: dict
    source: str | None = None

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> "ScenarioConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", path=source,
                              line=None if mark is None else mark.line + 1) from None
        return cls(resolve(data, _line_map(text)), source)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read scenario file: {exc}", path=str(path)) from None
        return cls.from_text(text, str(path))

    @classmethod
    def from_dict(cls, tree: dict) -> "ScenarioConfig":
        return cls(resolve(copy.deepcopy(tree)))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.tree)

    def dumps(self) -> str:
        return yaml.safe_dump(self.tree, sort_keys=False)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.tree, sort_keys=True).encode()).hexdigest()

    def __getitem__(self, key):
        return self.tree[key]

    # -- builders ---------------------------------------------------------

    def chart(self):
        from .manifolds import make_chart
        m = self.tree["manifold"]
        kw = {"profile_resolution": m["profile_resolution"]} if m["kind"] in ("ellipsoid2d", "sphere2") else {}
        chart = make_chart(m["kind"], m["a"], **kw)
        if m["corrupt"] == "negate-g22":
            chart = corrupted(chart)
        return chart

    def profile(self):
        from .profiles import Profile
        p = dict(self.tree["flow"]["profile"])
        try:
            return Profile.from_dict(p)
        except (ArgumentError, ValueError) as exc:
            raise ConfigError(str(exc), path="flow.profile") from None

    def resolution(self, chart, scale: float = 1.0) -> tuple:
        res = self.tree["quadrature"]["resolution"]
        if res is None:
            res = [32 if ax.periodic else 96 for ax in chart.axes]
        if len(res) != chart.dim:
            raise ConfigError(f"resolution needs {chart.dim} entries", path="quadrature.resolution")
        return tuple(max(1, int(round(n * scale))) for n in res)


def corrupted(chart):
    """Copy of ``chart`` with g22 negated, used to exercise failure reporting."""
    import copy as _copy
    bad = _copy.copy(chart)
    good = chart._metric_fn

    def metric(x):
        g = [list(row) for row in good(x)]
        g[1][1] = -g[1][1]
        return g

    bad._metric_fn = metric
    bad.christoffel_closed_form = lambda x: None
    bad.name = chart.name + "[g22 negated]"
    return bad
