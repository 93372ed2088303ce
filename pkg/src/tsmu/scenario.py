"""Scenario configuration and the canonical boxed two-slit setup.

A scenario is one JSON document, strictly validated (unknown keys are
errors) and fully deterministic: no randomness is used anywhere in the
pipeline.  Loading resolves every derived quantity - default barrier
height, step size, transit and arrival times - so the echoed configuration
in a run manifest is explicit and reproduces the run byte for byte.

The resolved scenario builds a ScenarioRuntime, which lazily constructs
and caches the propagator plan, the canonical run checkpoints, projector
families, history trees and decoherence functionals, sharing the expensive
unitary legs between history sets that branch at the same times.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import dynamics, histories, oracle
from .errors import ConfigError, PartitionError
from .grid import (
    GridSpec,
    Projector,
    WaveFunction,
    make_projector_family,
)

SCHEMA_VERSION = 1

#: Desk-scale defaults: a unit box, a packet that crosses the screen about a
#: quarter of the way in and arrives near the far wall, ~2000 steps total.
_DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "mode": "numeric",
    "epsilon": 1e-6,
    "lethal_slit": None,
    "grid": {"nx": 512, "ny": 512, "lx": 1.0, "ly": 1.0},
    "packet": {"x0": 0.17, "sigma_x": 0.045, "k_x": 150.0, "start": "left"},
    "screen": {
        "x": 0.35,
        "thickness": 0.008,
        "v0": None,
        "slit_center_y": 0.5,
        "slit_separation": 0.2,
        "slit_width": 0.03,
    },
    "coupling": {"theta": math.pi / 2, "lambda_u": 0.04, "lambda_l": 0.06},
    "schedule": {
        "t0": 0.0,
        "n_steps": 2000,
        "dt": None,
        "t_s": None,
        "t_d": None,
        "arrival_x": 0.8,
    },
    "bins": {"delta": 1.0 / 32.0},
    "oracle": {"width": 0.008},
    "report": {"arrival_split_x": 0.55, "central_window": 0.1, "figures": True},
}

_SECTION_ORDER = (
    "schema_version",
    "mode",
    "epsilon",
    "lethal_slit",
    "grid",
    "packet",
    "screen",
    "coupling",
    "schedule",
    "bins",
    "oracle",
    "report",
)


def _merge_strict(defaults: Mapping[str, Any], data: Mapping[str, Any], path: str) -> dict:
    out = {}
    for key in data:
        if key not in defaults:
            raise ConfigError(f"unknown configuration key {path}{key!r}")
    for key, default in defaults.items():
        if isinstance(default, Mapping):
            sub = data.get(key, {})
            if not isinstance(sub, Mapping):
                raise ConfigError(f"{path}{key} must be an object")
            out[key] = _merge_strict(default, sub, f"{path}{key}.")
        else:
            out[key] = data.get(key, default)
    return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _as_float(value, name: str, allow_none: bool = False) -> float | None:
    if value is None:
        _require(allow_none, f"{name} must be a number")
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def _as_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return value


@dataclass(frozen=True)
class ScenarioConfig:
    """A fully validated and resolved scenario description."""

    data: dict

    def __getitem__(self, key: str):
        return self.data[key]

    def section(self, name: str) -> dict:
        return self.data[name]

    def to_dict(self) -> dict:
        """Echo in canonical key order; JSON-serializable."""
        return {k: (dict(self.data[k]) if isinstance(self.data[k], dict) else self.data[k]) for k in _SECTION_ORDER}

    def with_overrides(
        self,
        mode: str | None = None,
        theta: float | None = None,
        epsilon: float | None = None,
    ) -> "ScenarioConfig":
        raw = self.to_dict()
        if mode is not None:
            raw["mode"] = mode
        if theta is not None:
            raw["coupling"]["theta"] = theta
        if epsilon is not None:
            raw["epsilon"] = epsilon
        return resolve_config(raw)


def resolve_config(raw: Mapping[str, Any]) -> ScenarioConfig:
    """Validate a raw configuration mapping, fill defaults, resolve derived
    values, and cross-check the geometry.  Errors name the offending field."""
    cfg = _merge_strict(_DEFAULTS, raw, "")

    _require(cfg["schema_version"] == SCHEMA_VERSION, f"schema_version must be {SCHEMA_VERSION}")
    _require(cfg["mode"] in ("numeric", "analytic"), "mode must be 'numeric' or 'analytic'")
    cfg["epsilon"] = _as_float(cfg["epsilon"], "epsilon")
    _require(cfg["epsilon"] > 0, "epsilon must be positive")
    _require(cfg["lethal_slit"] in (None, "U", "L"), "lethal_slit must be null, 'U' or 'L'")

    g = cfg["grid"]
    g["nx"] = _as_int(g["nx"], "grid.nx")
    g["ny"] = _as_int(g["ny"], "grid.ny")
    _require(g["nx"] >= 8 and g["ny"] >= 8, "grid.nx and grid.ny must be at least 8")
    g["lx"] = _as_float(g["lx"], "grid.lx")
    g["ly"] = _as_float(g["ly"], "grid.ly")
    _require(g["lx"] > 0 and g["ly"] > 0, "grid.lx and grid.ly must be positive")
    dx = g["lx"] / g["nx"]
    dy = g["ly"] / g["ny"]

    p = cfg["packet"]
    p["x0"] = _as_float(p["x0"], "packet.x0")
    p["sigma_x"] = _as_float(p["sigma_x"], "packet.sigma_x")
    p["k_x"] = _as_float(p["k_x"], "packet.k_x")
    _require(p["sigma_x"] > 0, "packet.sigma_x must be positive")
    _require(p["k_x"] > 0, "packet.k_x must be positive")
    _require(p["start"] in ("left", "post-slit"), "packet.start must be 'left' or 'post-slit'")

    s = cfg["screen"]
    for key in ("x", "thickness", "slit_center_y", "slit_separation", "slit_width"):
        s[key] = _as_float(s[key], f"screen.{key}")
    s["v0"] = _as_float(s["v0"], "screen.v0", allow_none=True)
    if s["v0"] is None:
        # default barrier: 50x the packet kinetic energy, validated by the
        # solid-screen transmission check in the dynamics tests
        s["v0"] = 50.0 * (p["k_x"] ** 2 / 2.0)
    _require(s["v0"] > 0, "screen.v0 must be positive")
    _require(0 < s["x"] < g["lx"], "screen.x must lie inside the box")
    _require(s["thickness"] >= dx, "screen.thickness must cover at least one grid column")
    _require(s["slit_width"] >= 0, "screen.slit_width must be nonnegative")
    _require(s["slit_separation"] > s["slit_width"], "screen.slit_separation must exceed slit_width")
    half_span = (s["slit_separation"] + s["slit_width"]) / 2
    _require(
        0 < s["slit_center_y"] - half_span and s["slit_center_y"] + half_span < g["ly"],
        "screen slit apertures must lie inside the box height",
    )
    if p["start"] == "left":
        _require(
            p["x0"] + 3 * p["sigma_x"] < s["x"] - s["thickness"] / 2,
            "packet.x0 + 3 sigma_x must stay left of the screen",
        )

    c = cfg["coupling"]
    c["theta"] = _as_float(c["theta"], "coupling.theta")
    _require(0.0 <= c["theta"] <= math.pi / 2, "coupling.theta must lie in [0, pi/2]")
    c["lambda_u"] = _as_float(c["lambda_u"], "coupling.lambda_u")
    c["lambda_l"] = _as_float(c["lambda_l"], "coupling.lambda_l")
    _require(c["lambda_u"] > 0 and c["lambda_l"] > 0, "coupling wavelengths must be positive")

    sch = cfg["schedule"]
    sch["t0"] = _as_float(sch["t0"], "schedule.t0")
    sch["n_steps"] = _as_int(sch["n_steps"], "schedule.n_steps")
    _require(sch["n_steps"] >= 1, "schedule.n_steps must be at least 1")
    sch["arrival_x"] = _as_float(sch["arrival_x"], "schedule.arrival_x")
    _require(
        s["x"] + s["thickness"] / 2 < sch["arrival_x"] < g["lx"],
        "schedule.arrival_x must lie between the screen and the far wall",
    )
    for key in ("dt", "t_s", "t_d"):
        sch[key] = _as_float(sch[key], f"schedule.{key}", allow_none=True)

    # Transit and arrival are kinematic: the incident packet center crosses
    # the screen plane at t_s and reaches the arrival plane at t_d.  (The
    # center of mass of the full state never crosses a mostly-reflecting
    # screen, so the nominal ballistic crossing is the meaningful marker.)
    flight = (sch["arrival_x"] - s["x"]) / p["k_x"]
    if p["start"] == "post-slit":
        approach = 0.0
    else:
        approach = (s["x"] - p["x0"]) / p["k_x"]
        _require(approach > 0, "packet must start left of the screen")
    if sch["dt"] is None:
        sch["dt"] = (approach + flight) / sch["n_steps"]
    _require(sch["dt"] > 0, "schedule.dt must be positive")
    if sch["t_s"] is None:
        sch["t_s"] = sch["t0"] + round(approach / sch["dt"]) * sch["dt"]
    if sch["t_d"] is None:
        sch["t_d"] = sch["t_s"] + round(flight / sch["dt"]) * sch["dt"]
    try:
        dynamics.Schedule(sch["t0"], sch["t_s"], sch["t_d"], sch["dt"])
    except Exception as exc:
        raise ConfigError(f"schedule: {exc}") from exc

    b = cfg["bins"]
    b["delta"] = _as_float(b["delta"], "bins.delta")
    k = b["delta"] / dy
    _require(
        b["delta"] > 0 and abs(k - round(k)) <= 1e-9 * max(1.0, abs(k)) and round(k) >= 1,
        "bins.delta must be a positive integer multiple of the grid row height dy",
    )

    o = cfg["oracle"]
    o["width"] = _as_float(o["width"], "oracle.width")
    _require(o["width"] > 0, "oracle.width must be positive")

    r = cfg["report"]
    r["arrival_split_x"] = _as_float(r["arrival_split_x"], "report.arrival_split_x")
    _require(
        s["x"] + s["thickness"] / 2 < r["arrival_split_x"] < sch["arrival_x"],
        "report.arrival_split_x must lie between the screen and the arrival plane",
    )
    r["central_window"] = _as_float(r["central_window"], "report.central_window")
    _require(r["central_window"] > 0, "report.central_window must be positive")
    _require(isinstance(r["figures"], bool), "report.figures must be true or false")

    return ScenarioConfig(cfg)


def load_config(path: str | Path | None) -> ScenarioConfig:
    """Read, validate and resolve a scenario file; None loads the defaults."""
    if path is None:
        return resolve_config({})
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"configuration file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a JSON object")
    return resolve_config(raw)


def save_config(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------


class ScenarioRuntime:
    """Lazily built, cached machinery for one resolved scenario.

    History trees that branch at the canonical times share the expensive
    unitary legs: the approach leg is computed once (the run checkpoints)
    and each slit branch is flown to t_d once, however many sets slice it
    by arrival interval afterwards.
    """

    def __init__(self, config: ScenarioConfig):
        self.config = config
        g = config.section("grid")
        self.grid = GridSpec(g["nx"], g["ny"], g["lx"], g["ly"])
        s = config.section("screen")
        self.potential = dynamics.two_slit_potential(
            self.grid, s["x"], s["thickness"], s["v0"],
            s["slit_center_y"], s["slit_separation"], s["slit_width"],
        )
        sch = config.section("schedule")
        self.schedule = dynamics.Schedule(sch["t0"], sch["t_s"], sch["t_d"], sch["dt"])
        c = config.section("coupling")
        upper, lower = dynamics.half_space_windows(self.grid, s["slit_center_y"])
        self.coupling = dynamics.DetectorCoupling(
            c["theta"], upper, lower, c["lambda_u"], c["lambda_l"]
        )
        self.epsilon = float(config["epsilon"])
        self._plan: dynamics.PropagatorPlan | None = None
        self._psi0: WaveFunction | None = None
        self._states: dynamics.RunStates | None = None
        self._families: dict[str, list[Projector]] = {}
        self._slit_branches: dict[str, WaveFunction] = {}
        self._trees: dict[str, histories.HistoryTree] = {}
        self._dfuncs: dict[str, histories.DecoherenceFunctional] = {}

    # -- ingredients --------------------------------------------------------

    @property
    def plan(self) -> dynamics.PropagatorPlan:
        if self._plan is None:
            self._plan = dynamics.build_propagator(self.grid, self.potential, self.schedule.dt)
        return self._plan

    @property
    def psi0(self) -> WaveFunction:
        if self._psi0 is None:
            p = self.config.section("packet")
            s = self.config.section("screen")
            if p["start"] == "post-slit":
                self._psi0 = dynamics.two_blob_packet(
                    self.grid,
                    s["x"] + s["thickness"],
                    p["sigma_x"],
                    p["k_x"],
                    (
                        s["slit_center_y"] + s["slit_separation"] / 2,
                        s["slit_center_y"] - s["slit_separation"] / 2,
                    ),
                    self.config.section("oracle")["width"],
                )
            else:
                self._psi0 = dynamics.gaussian_packet(
                    self.grid, dynamics.PacketSpec(p["x0"], p["sigma_x"], p["k_x"])
                )
        return self._psi0

    def family(self, name: str) -> list[Projector]:
        if name not in self._families:
            s = self.config.section("screen")
            delta = self.config.section("bins")["delta"]
            split = self.config.section("report")["arrival_split_x"]
            builders = {
                "ybins": ("y-bins", {"delta": delta}),
                "detector": ("detector-levels", {}),
                "slit": ("slit-sides", {"y_split": s["slit_center_y"]}),
                "arrival": ("arrival-split", {"x_split": split}),
                "arrived-ybins": ("arrived-y-bins", {"x_split": split, "delta": delta}),
                "record-ybins": ("record-y-bins", {"delta": delta}),
                "identity": ("identity", {}),
            }
            if name not in builders:
                raise PartitionError(f"unknown projector family {name!r}")
            kind, params = builders[name]
            self._families[name] = make_projector_family(self.grid, kind, **params)
        return self._families[name]

    # -- canonical run ------------------------------------------------------

    def states(self) -> dynamics.RunStates:
        if self._states is None:
            self._states = dynamics.run_tsmu(self)
        return self._states

    def norm_drift(self) -> float:
        from .grid import norm_sq

        return abs(norm_sq(self.states().psi_at_td) - norm_sq(self.psi0))

    def slit_branch(self, label: str) -> WaveFunction:
        """The slit-side branch state flown to t_d, shared across sets."""
        if label not in self._slit_branches:
            from .grid import apply_projector

            proj = {p.label: p for p in self.family("slit")}[label]
            branch = apply_projector(proj, self.states().psi_at_ts_plus)
            self._slit_branches[label] = dynamics.propagate(
                self.plan, branch, self.schedule.t_s, self.schedule.t_d
            )
        return self._slit_branches[label]

    # -- history sets -------------------------------------------------------

    def tree(self, name: str) -> histories.HistoryTree:
        """Builtin history sets, built against the shared cached legs.

        The leaf states are identical to what the generic schema walker
        produces (verified in tests); only the common unitary legs are
        shared rather than recomputed.
        """
        if name in self._trees:
            return self._trees[name]
        from .grid import apply_projector

        leaves: list[histories.BranchLeaf] = []
        if name in ("ybins", "arrived-ybins", "record-ybins", "identity"):
            psi_td = self.states().psi_at_td
            for proj in self.family(name):
                leaves.append(
                    histories.BranchLeaf((proj.label,), apply_projector(proj, psi_td))
                )
        elif name == "slit-ybins":
            for slit_label in ("U", "L"):
                branch = self.slit_branch(slit_label)
                for proj in self.family("ybins"):
                    leaves.append(
                        histories.BranchLeaf(
                            (slit_label, proj.label), apply_projector(proj, branch)
                        )
                    )
        elif name == "adaptive-upper":
            branch_u = self.slit_branch("U")
            for proj in self.family("ybins"):
                leaves.append(
                    histories.BranchLeaf(("U", proj.label), apply_projector(proj, branch_u))
                )
            leaves.append(histories.BranchLeaf(("L",), self.slit_branch("L")))
        else:
            raise PartitionError(f"unknown builtin history set {name!r}")
        tree = histories.HistoryTree(self.grid, self.schedule.t_d, tuple(leaves), name)
        self._trees[name] = tree
        return tree

    def evolve_schema(self, schema: histories.SchemaNode, description: str = "") -> histories.HistoryTree:
        """Realize an arbitrary declarative schema with the generic walker."""
        families = {
            key: self.family(key)
            for key in ("ybins", "detector", "slit", "arrival", "arrived-ybins", "record-ybins", "identity")
        }
        return histories.evolve_branch_tree(
            schema, self.plan, self.coupling, self.schedule, self.psi0, families, description
        )

    def dfunc(self, name: str) -> histories.DecoherenceFunctional:
        if name not in self._dfuncs:
            self._dfuncs[name] = histories.decoherence_functional(self.tree(name))
        return self._dfuncs[name]

    def verdict(self, name: str = "slit-ybins") -> histories.DecoherenceVerdict:
        return histories.is_decoherent(self.dfunc(name), self.epsilon)

    # -- arrival tables and diagnostics --------------------------------------

    def bin_edges(self) -> np.ndarray:
        delta = self.config.section("bins")["delta"]
        k = round(delta / self.grid.dy)
        edges = [min(b * k, self.grid.ny) * self.grid.dy for b in range(math.ceil(self.grid.ny / k) + 1)]
        return np.asarray(edges)

    def bin_centers(self) -> np.ndarray:
        e = self.bin_edges()
        return 0.5 * (e[:-1] + e[1:])

    def total_table(self) -> dict[str, float]:
        """p(Y) of the full state at t_d, one entry per arrival interval."""
        return histories.state_bin_table(self.states().psi_at_td, self.family("ybins"))

    def record_table(self) -> dict[str, float]:
        """p(Y and detector level) of the full state at t_d."""
        return histories.state_bin_table(self.states().psi_at_td, self.family("record-ybins"))

    def arrival_conditioned(self) -> dict[str, float]:
        """p(Y | past the split plane): the pattern of what actually arrives."""
        from .inference import condition

        raw = histories.state_bin_table(self.states().psi_at_td, self.family("arrived-ybins"))
        table = {(label,): p for label, p in raw.items()}
        cond = condition(table, lambda label: label[0] != "blocked")
        out = {}
        for (label,), p in cond.items():
            if label != "blocked":
                out[label.split("&")[1]] = p
        return out

    def p_arrived(self) -> float:
        raw = histories.state_bin_table(self.states().psi_at_td, self.family("arrival"))
        return raw["arrived"]

    def central_window(self) -> tuple[float, float]:
        s = self.config.section("screen")
        half = self.config.section("report")["central_window"]
        return (s["slit_center_y"] - half, s["slit_center_y"] + half)

    def visibility(self) -> float:
        from .inference import fringe_visibility

        cond = self.arrival_conditioned()
        centers = self.bin_centers()
        labels = [p.label for p in self.family("ybins")]
        table = [(centers[i], cond[label]) for i, label in enumerate(labels)]
        return fringe_visibility(table, self.central_window())

    def fine_marginal(self) -> tuple[np.ndarray, np.ndarray]:
        from .inference import arrival_marginal

        return arrival_marginal(
            self.states().psi_at_td, self.config.section("report")["arrival_split_x"]
        )

    def fringe_period_estimate(self) -> float | None:
        """Measured fringe spacing of the fine arrival pattern, or None when
        the pattern has fewer than two maxima (no fringes to speak of)."""
        from .errors import UsageError
        from .inference import fringe_period

        y, dens = self.fine_marginal()
        expected = self.oracle_spec().fringe_period
        s = self.config.section("screen")
        half = min(2.2 * expected, s["slit_center_y"], self.grid.ly - s["slit_center_y"])
        try:
            return fringe_period(y, dens, (s["slit_center_y"] - half, s["slit_center_y"] + half))
        except UsageError:
            return None

    # -- the closed-form route ----------------------------------------------

    def oracle_spec(self) -> oracle.OracleSpec:
        s = self.config.section("screen")
        sch = self.config.section("schedule")
        return oracle.OracleSpec(
            slit_center_y=s["slit_center_y"],
            separation=s["slit_separation"],
            width=self.config.section("oracle")["width"],
            flight_length=sch["arrival_x"] - s["x"],
            k_x=self.config.section("packet")["k_x"],
            flight_time=self.schedule.t_d - self.schedule.t_s,
        )

    def oracle_table(self, coherent: bool) -> oracle.OracleTable:
        return oracle.oracle_distribution(self.oracle_spec(), coherent, self.bin_edges())


def build_runtime(config: ScenarioConfig) -> ScenarioRuntime:
    return ScenarioRuntime(config)
