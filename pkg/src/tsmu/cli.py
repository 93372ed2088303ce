"""Batch command line interface.

    tsmu simulate|dfunc|conditional|sweep --config scenario.json [options]

Every command writes its delimited data files, SVG figures rendered from
the same tables, and a manifest.json echoing the fully resolved
configuration; identical configurations produce byte-identical artifacts.
Floats are emitted in shortest round-trip decimal form.  Wall-clock timing
goes to stderr only, never into the artifacts.

Exit codes: 0 success, 2 configuration/validation error, 3 consistency
(non-decoherence) error, 4 conditioning error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    ConditioningError,
    ConfigError,
    ConsistencyError,
    TsmuError,
)
from .histories import (
    BUILTIN_SCHEMAS,
    SchemaNode,
    branch_probabilities,
)
from .inference import condition
from .oracle import binned_components, oracle_distribution
from .scenario import ScenarioConfig, ScenarioRuntime, build_runtime, load_config

MANIFEST_VERSION = 1
_SENTINEL = float("nan")

DEFAULT_SWEEP_THETAS = (0.0, math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2)


# ---------------------------------------------------------------------------
# deterministic serialization helpers


def _fmt(value) -> str:
    """Shortest round-trip decimal for floats; plain str for ints/bools."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    return value


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def _write_json(path: Path, payload: Mapping[str, Any]) -> None:
    _atomic_write(path, (json.dumps(_jsonable(payload), indent=2) + "\n").encode())


def _artifact_entries(out_dir: Path, names: Sequence[str]) -> list[dict]:
    entries = []
    for name in names:
        data = (out_dir / name).read_bytes()
        entries.append(
            {"name": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()}
        )
    return entries


def _labels_text(labels) -> list[str]:
    return ["/".join(label) for label in labels]


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _decoherence_section(runtime: ScenarioRuntime) -> tuple[dict, bool]:
    verdict = runtime.verdict("slit-ybins")
    section = {
        "set": "slit-ybins",
        "verdict": "decoherent" if verdict.decoherent else "not decoherent",
        "max_off_diagonal": verdict.max_off_diagonal,
        "threshold": verdict.threshold,
        "epsilon": verdict.epsilon,
        "worst_pair": None if verdict.decoherent else _labels_text(verdict.worst_pair),
        "warning": None
        if verdict.decoherent
        else "slit-resolving histories interfere; no which-slit probabilities emitted",
    }
    return section, verdict.decoherent


def _analytic_columns(runtime: ScenarioRuntime):
    """Arrival columns for the closed-form route.  The cross term carries
    the cos(theta)^2 record suppression; endpoint angles reuse the plain
    oracle distribution code path exactly."""
    spec = runtime.oracle_spec()
    edges = runtime.bin_edges()
    theta = runtime.config.section("coupling")["theta"]
    cos2 = math.cos(theta) ** 2
    sin2 = math.sin(theta) ** 2
    u_up, u_lo, cross = binned_components(spec, edges)
    if cos2 == 1.0:
        p_total = oracle_distribution(spec, True, edges).probabilities
    elif cos2 < 1e-30:
        p_total = oracle_distribution(spec, False, edges).probabilities
    else:
        blend = u_up + u_lo + cos2 * cross
        p_total = blend / blend.sum()
    z = float((u_up + u_lo + cos2 * cross).sum())
    p_upper = sin2 * u_up / z
    p_lower = sin2 * u_lo / z

    diag_max = float(max(u_up.max(), u_lo.max()))
    off_max = float(cos2 * np.max(np.abs(cross)))
    decoherent = off_max <= runtime.epsilon * diag_max
    section = {
        "set": "slit-ybins (analytic model)",
        "verdict": "decoherent" if decoherent else "not decoherent",
        "max_off_diagonal": off_max / float((u_up + u_lo).sum()),
        "threshold": runtime.epsilon * diag_max / float((u_up + u_lo).sum()),
        "epsilon": runtime.epsilon,
        "worst_pair": None,
        "warning": None
        if decoherent
        else "slit-resolving histories interfere; no which-slit probabilities emitted",
    }
    return p_total, p_upper, p_lower, section, decoherent


def _analytic_visibility(runtime: ScenarioRuntime, p_total: np.ndarray) -> float:
    from .inference import fringe_visibility

    centers = runtime.bin_centers()
    table = list(zip(centers.tolist(), p_total.tolist()))
    return fringe_visibility(table, runtime.central_window())


def _numeric_arrival_products(runtime: ScenarioRuntime):
    """Everything simulate/sweep needs from one numeric run."""
    labels = [p.label for p in runtime.family("ybins")]
    p_total = np.array([runtime.total_table()[lab] for lab in labels])
    section, decoherent = _decoherence_section(runtime)
    if decoherent:
        probs = branch_probabilities(runtime.dfunc("slit-ybins"), runtime.epsilon)
        p_upper = np.array([probs[("U", lab)] for lab in labels])
        p_lower = np.array([probs[("L", lab)] for lab in labels])
    else:
        p_upper = np.full(len(labels), _SENTINEL)
        p_lower = np.full(len(labels), _SENTINEL)
    cond = runtime.arrival_conditioned()
    p_cond = np.array([cond[lab] for lab in labels])
    return labels, p_total, p_upper, p_lower, p_cond, section, decoherent


def _base_manifest(command: str, config: ScenarioConfig) -> dict:
    sch = config.section("schedule")
    return {
        "format_version": MANIFEST_VERSION,
        "command": command,
        "config": config.to_dict(),
        "resolved_schedule": {
            "dt": sch["dt"],
            "t_s": sch["t_s"],
            "t_d": sch["t_d"],
            "n_steps_total": round((sch["t_d"] - sch["t0"]) / sch["dt"]),
        },
    }


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(config: ScenarioConfig, out_dir: Path) -> None:
    runtime = build_runtime(config)
    manifest = _base_manifest("simulate", config)
    centers = runtime.bin_centers()
    theta = config.section("coupling")["theta"]
    s = config.section("screen")

    if config["mode"] == "analytic":
        p_total, p_upper, p_lower, section, decoherent = _analytic_columns(runtime)
        p_cond = p_total  # nothing reflects in the closed-form model
        manifest["norm_drift"] = None
        visibility = _analytic_visibility(runtime, p_total)
        period = _analytic_period(runtime)
        p_arrived = None
    else:
        _, p_total, p_upper, p_lower, p_cond, section, decoherent = _numeric_arrival_products(runtime)
        manifest["norm_drift"] = runtime.norm_drift()
        visibility = runtime.visibility()
        period = runtime.fringe_period_estimate()
        p_arrived = runtime.p_arrived()

    if decoherent:
        p_other = np.maximum(p_total - p_upper - p_lower, 0.0)
    else:
        p_other = np.full(len(p_total), _SENTINEL)

    rows = [
        (i, float(centers[i]), float(p_total[i]), float(p_upper[i]), float(p_lower[i]), float(p_other[i]))
        for i in range(len(centers))
    ]
    _write_csv(
        out_dir / "arrival.csv",
        ("y_index", "y_center", "p_total", "p_upper", "p_lower", "p_other"),
        rows,
    )
    artifacts = ["arrival.csv"]

    if config.section("report")["figures"]:
        from . import report

        report.arrival_figure(
            out_dir / "arrival.svg",
            centers,
            p_total,
            p_cond,
            (
                s["slit_center_y"] + s["slit_separation"] / 2,
                s["slit_center_y"] - s["slit_separation"] / 2,
            ),
            theta,
        )
        artifacts.append("arrival.svg")

    manifest["decoherence"] = section
    manifest["diagnostics"] = {
        "p_arrived": p_arrived,
        "visibility_central": visibility,
        "fringe_period_measured": period,
        "fringe_period_two_source": runtime.oracle_spec().fringe_period,
    }
    manifest["artifacts"] = _artifact_entries(out_dir, artifacts)
    _write_json(out_dir / "manifest.json", manifest)


def _analytic_period(runtime: ScenarioRuntime) -> float | None:
    from .errors import UsageError
    from .inference import fringe_period

    spec = runtime.oracle_spec()
    theta = runtime.config.section("coupling")["theta"]
    coherent = math.cos(theta) ** 2 >= 0.5
    table = runtime.oracle_table(coherent)
    s = runtime.config.section("screen")
    half = min(2.2 * spec.fringe_period, s["slit_center_y"])
    try:
        return fringe_period(
            table.sample_y, table.sample_density, (s["slit_center_y"] - half, s["slit_center_y"] + half)
        )
    except UsageError:
        return None


def _parse_schema(data, where: str = "schema") -> SchemaNode:
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    allowed = {"time", "family", "refine", "refine_default"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{where} has unknown keys {sorted(unknown)}")
    if "time" not in data or "family" not in data:
        raise ConfigError(f"{where} needs 'time' and 'family'")
    refine = None
    if data.get("refine") is not None:
        if not isinstance(data["refine"], dict):
            raise ConfigError(f"{where}.refine must map labels to schemas")
        refine = {
            label: (None if sub is None else _parse_schema(sub, f"{where}.refine[{label!r}]"))
            for label, sub in data["refine"].items()
        }
    default = data.get("refine_default")
    if default is not None:
        default = _parse_schema(default, f"{where}.refine_default")
    return SchemaNode(data["time"], data["family"], refine, default)


def cmd_dfunc(config: ScenarioConfig, schema_arg: str, out_dir: Path) -> None:
    if config["mode"] != "numeric":
        raise ConfigError("dfunc requires numeric mode")
    runtime = build_runtime(config)
    if schema_arg in BUILTIN_SCHEMAS:
        set_name = schema_arg
        dfunc = runtime.dfunc(schema_arg)
    else:
        path = Path(schema_arg)
        if not path.exists():
            raise ConfigError(
                f"--schema must be one of {sorted(BUILTIN_SCHEMAS)} or a JSON schema file"
            )
        set_name = "custom"
        schema = _parse_schema(json.loads(path.read_text()))
        from .histories import decoherence_functional

        dfunc = decoherence_functional(runtime.evolve_schema(schema, "custom"))

    hermiticity = float(np.max(np.abs(dfunc.matrix - dfunc.matrix.conj().T)))
    if hermiticity > 1e-12:
        raise ConsistencyError(f"decoherence functional not Hermitian: {hermiticity:.3e}")
    from .histories import is_decoherent

    verdict = is_decoherent(dfunc, runtime.epsilon)
    payload = {
        "format_version": MANIFEST_VERSION,
        "set": set_name,
        "labels": _labels_text(dfunc.labels),
        "epsilon": verdict.epsilon,
        "verdict": "decoherent" if verdict.decoherent else "not decoherent",
        "max_off_diagonal": verdict.max_off_diagonal,
        "threshold": verdict.threshold,
        "worst_pair": None if verdict.decoherent else _labels_text(verdict.worst_pair),
        "trace": dfunc.trace(),
        "matrix": [
            [[v.real, v.imag] for v in row] for row in dfunc.matrix
        ],
    }
    _write_json(out_dir / "dfunc.json", payload)
    artifacts = ["dfunc.json"]

    if config.section("report")["figures"]:
        from . import report

        report.dfunc_figure(out_dir / "dfunc.svg", _labels_text(dfunc.labels), dfunc.matrix)
        artifacts.append("dfunc.svg")

    manifest = _base_manifest("dfunc", config)
    manifest["norm_drift"] = runtime.norm_drift()
    manifest["decoherence"] = {
        "set": set_name,
        "verdict": payload["verdict"],
        "max_off_diagonal": verdict.max_off_diagonal,
        "threshold": verdict.threshold,
        "epsilon": verdict.epsilon,
        "worst_pair": payload["worst_pair"],
        "warning": None,
    }
    manifest["artifacts"] = _artifact_entries(out_dir, artifacts)
    _write_json(out_dir / "manifest.json", manifest)


def cmd_conditional(config: ScenarioConfig, condition_arg: str, out_dir: Path) -> None:
    if config["mode"] != "numeric":
        raise ConfigError("conditional requires numeric mode")
    runtime = build_runtime(config)
    labels = [p.label for p in runtime.family("ybins")]
    centers = runtime.bin_centers()
    manifest = _base_manifest("conditional", config)
    manifest["norm_drift"] = runtime.norm_drift()
    summary: dict[str, Any] = {"condition": condition_arg}

    if condition_arg in ("U", "L"):
        from .inference import label_component_event, verify_reduction_equivalence

        table = branch_probabilities(runtime.dfunc("slit-ybins"), runtime.epsilon)
        cond = condition(table, label_component_event(condition_arg))
        p_cond = np.array([cond[(condition_arg, lab)] for lab in labels])
        discrepancy = verify_reduction_equivalence(runtime, condition_arg)
        header = ("y_index", "y_center", "p_conditional", "reduction_discrepancy")
        rows = [
            (i, float(centers[i]), float(p_cond[i]), discrepancy) for i in range(len(labels))
        ]
        summary["p_condition"] = sum(
            p for lab, p in table.items() if condition_arg in lab
        )
        summary["reduction_max_discrepancy"] = discrepancy
    elif condition_arg == "alive" or condition_arg.startswith("m="):
        record = runtime.record_table()  # keys "m=K&Y=bb"
        if condition_arg == "alive":
            lethal = config["lethal_slit"]
            dead_level = {"U": "m=1", "L": "m=2", None: None}[lethal]
            alive = lambda key: dead_level is None or not key.startswith(dead_level + "&")
        else:
            level = condition_arg
            if level not in ("m=0", "m=1", "m=2"):
                raise ConfigError("condition must be U, L, alive, or m=0|1|2")
            alive = lambda key: key.startswith(level + "&")
        wrapped = {(key,): p for key, p in record.items()}
        cond = condition(wrapped, lambda label: alive(label[0]))
        p_cond = np.zeros(len(labels))
        for (key,), p in cond.items():
            p_cond[labels.index(key.split("&")[1])] += p
        header = ("y_index", "y_center", "p_conditional")
        rows = [(i, float(centers[i]), float(p_cond[i])) for i in range(len(labels))]
        if condition_arg == "alive":
            # survivor's view of the record: exactly 1 for the safe slit
            # when the record is perfect and the other slit is lethal
            s_alive = sum(p for key, p in record.items() if alive(key))
            for level, name in (("m=1", "p_saw_upper_radiation"), ("m=2", "p_saw_lower_radiation")):
                s_level = sum(p for key, p in record.items() if key.startswith(level + "&") and alive(key))
                summary[name] = s_level / s_alive
            summary["p_condition"] = s_alive
    else:
        raise ConfigError("condition must be U, L, alive, or m=0|1|2")

    _write_csv(out_dir / "conditional.csv", header, rows)
    artifacts = ["conditional.csv"]
    if config.section("report")["figures"]:
        from . import report

        report.conditional_figure(out_dir / "conditional.svg", centers, p_cond, condition_arg)
        artifacts.append("conditional.svg")

    manifest["conditional"] = summary
    manifest["artifacts"] = _artifact_entries(out_dir, artifacts)
    _write_json(out_dir / "manifest.json", manifest)


def cmd_sweep(config: ScenarioConfig, thetas: Sequence[float], out_dir: Path) -> None:
    rows = []
    patterns = []
    visibilities = []
    centers = None
    for theta in thetas:
        if not (0.0 <= theta <= math.pi / 2):
            raise ConfigError("sweep thetas must lie in [0, pi/2]")
        cfg = config.with_overrides(theta=float(theta))
        runtime = build_runtime(cfg)
        centers = runtime.bin_centers()
        if cfg["mode"] == "analytic":
            p_total, _, _, section, decoherent = _analytic_columns(runtime)
            vis = _analytic_visibility(runtime, p_total)
            pattern = p_total
            off = section["max_off_diagonal"]
            p_arrived = _SENTINEL
        else:
            _, _, _, _, pattern, section, decoherent = _numeric_arrival_products(runtime)
            vis = runtime.visibility()
            off = section["max_off_diagonal"]
            p_arrived = runtime.p_arrived()
        rows.append((float(theta), vis, off, decoherent, p_arrived))
        patterns.append((float(theta), pattern))
        visibilities.append((float(theta), vis))
        print(f"[tsmu] sweep theta={theta:.6f} visibility={vis:.4f}", file=sys.stderr)

    _write_csv(
        out_dir / "sweep.csv",
        ("theta", "visibility", "max_off_diagonal", "decoherent", "p_arrived"),
        rows,
    )
    artifacts = ["sweep.csv"]
    if config.section("report")["figures"]:
        from . import report

        report.sweep_figures(
            out_dir / "sweep_overlays.svg",
            out_dir / "sweep_visibility.svg",
            centers,
            patterns,
            visibilities,
        )
        artifacts.extend(["sweep_overlays.svg", "sweep_visibility.svg"])

    manifest = _base_manifest("sweep", config)
    manifest["thetas"] = [float(t) for t in thetas]
    manifest["artifacts"] = _artifact_entries(out_dir, artifacts)
    _write_json(out_dir / "manifest.json", manifest)


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsmu",
        description="closed-box two-slit universe: simulate, test decoherence, condition",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None, help="scenario JSON (defaults used if omitted)")
        p.add_argument("--mode", choices=("numeric", "analytic"), default=None)
        p.add_argument("--epsilon", type=float, default=None, help="decoherence tolerance override")
        p.add_argument("--out", type=str, default="tsmu-out", help="output directory")

    p_sim = sub.add_parser("simulate", help="arrival distribution and run manifest")
    common(p_sim)
    p_sim.add_argument("--theta", type=float, default=None, help="coupling angle override (rad)")

    p_df = sub.add_parser("dfunc", help="decoherence functional of a history set")
    common(p_df)
    p_df.add_argument("--theta", type=float, default=None)
    p_df.add_argument(
        "--schema",
        type=str,
        default="slit-ybins",
        help=f"builtin set {sorted(BUILTIN_SCHEMAS)} or a JSON schema file",
    )

    p_cond = sub.add_parser("conditional", help="first-person (conditional) arrival distribution")
    common(p_cond)
    p_cond.add_argument("--theta", type=float, default=None)
    p_cond.add_argument("--condition", type=str, required=True, help="U | L | alive | m=K")

    p_sweep = sub.add_parser("sweep", help="record-strength sweep")
    common(p_sweep)
    p_sweep.add_argument(
        "--theta",
        type=float,
        action="append",
        default=None,
        help="repeatable; defaults to 0, pi/6, pi/4, pi/3, pi/2",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        config = load_config(args.config)
        theta = getattr(args, "theta", None)
        if args.command == "sweep":
            thetas = theta if theta else list(DEFAULT_SWEEP_THETAS)
            config = config.with_overrides(mode=args.mode, epsilon=args.epsilon)
        else:
            config = config.with_overrides(mode=args.mode, theta=theta, epsilon=args.epsilon)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            cmd_simulate(config, out_dir)
        elif args.command == "dfunc":
            cmd_dfunc(config, args.schema, out_dir)
        elif args.command == "conditional":
            cmd_conditional(config, args.condition, out_dir)
        elif args.command == "sweep":
            cmd_sweep(config, thetas, out_dir)
    except ConsistencyError as exc:
        print(f"tsmu: consistency error: {exc}", file=sys.stderr)
        return 3
    except ConditioningError as exc:
        print(f"tsmu: conditioning error: {exc}", file=sys.stderr)
        return 4
    except TsmuError as exc:
        print(f"tsmu: error: {exc}", file=sys.stderr)
        return 2
    print(f"[tsmu] {args.command}: wall {time.perf_counter() - started:.1f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
