"""Command-line front end: scenario files in, CSV datasets and SVG plots out.

Commands: run, compare, sweep, plot.  Exit codes are a stable contract for
scripting: 0 success (and PASS verdicts), 1 FAIL verdicts, 2 usage or schema
errors, 3 runtime failures (vanishing outcome probability).

Scenario files are JSON with complex numbers as [re, im] pairs and kets given
either as amplitude lists or as 'u'/'d' label strings.  Exactly two of
{gamma, tau, omega} must be given (or all three, consistent within 1e-12).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from .exact import VanishingProbabilityError
from .experiments import (ComparisonReport, Scenario, compare_scenario,
                          convergence_sweep, run_method)
from .model import (HamiltonianSpec, InitialState, basis_ket,
                    heisenberg3_hamiltonian, measurement_from_kets,
                    swap_hamiltonian)
from .trajectory import Trajectory

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class ScenarioError(ValueError):
    """Scenario file violates the schema."""


# ---------------------------------------------------------------------------
# Scenario file parsing.


def _fail(key: str, reason: str):
    raise ScenarioError(f"scenario key '{key}': {reason}")


def _parse_complex_matrix(key: str, node) -> np.ndarray:
    try:
        arr = np.asarray(node, dtype=float)
    except (TypeError, ValueError):
        _fail(key, "expected a matrix of [re, im] pairs")
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        _fail(key, "expected a square matrix of [re, im] pairs")
    return arr[:, :, 0] + 1j * arr[:, :, 1]


def _parse_ket(key: str, node) -> np.ndarray:
    if isinstance(node, str):
        try:
            return basis_ket(node)
        except ValueError as err:
            _fail(key, str(err))
    try:
        arr = np.asarray(node, dtype=float)
    except (TypeError, ValueError):
        _fail(key, "expected a label string or a list of [re, im] pairs")
    if arr.ndim != 2 or arr.shape[1] != 2:
        _fail(key, "expected a label string or a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def _parse_state(key: str, node) -> np.ndarray:
    """Density matrix from {'ket': ...} or {'matrix': ...}."""
    if not isinstance(node, dict):
        _fail(key, "expected an object with a 'ket' or 'matrix' entry")
    if "ket" in node:
        psi = _parse_ket(f"{key}.ket", node["ket"])
        n = np.linalg.norm(psi)
        if n <= 0:
            _fail(key, "ket must be non-zero")
        psi = psi / n
        return np.outer(psi, psi.conj())
    if "matrix" in node:
        return _parse_complex_matrix(f"{key}.matrix", node["matrix"])
    _fail(key, "expected a 'ket' or 'matrix' entry")


def _parse_hamiltonian(node, gamma: float) -> HamiltonianSpec:
    if not isinstance(node, dict):
        _fail("hamiltonian", "expected an object")
    if "builder" in node:
        builder = node["builder"]
        if builder == "swap":
            return swap_hamiltonian(gamma)
        if builder == "heisenberg3":
            field = node.get("field", "local_xyz")
            try:
                return heisenberg3_hamiltonian(gamma, field)
            except ValueError as err:
                _fail("hamiltonian.field", str(err))
        _fail("hamiltonian.builder", f"unknown builder {builder!r}")
    if "terms" in node:
        terms = []
        for k, term in enumerate(node["terms"]):
            if not isinstance(term, dict) or "a" not in term or "b" not in term:
                _fail(f"hamiltonian.terms[{k}]", "expected {'a': ..., 'b': ...}")
            terms.append((_parse_complex_matrix(f"hamiltonian.terms[{k}].a", term["a"]),
                          _parse_complex_matrix(f"hamiltonian.terms[{k}].b", term["b"])))
        try:
            return HamiltonianSpec(gamma, tuple(terms))
        except ValueError as err:
            _fail("hamiltonian.terms", str(err))
    _fail("hamiltonian", "expected a 'builder' or 'terms' entry")


def _resolve_rates(doc) -> tuple[float, float]:
    """(gamma, tau) from any consistent two of gamma / tau / omega."""
    have = {k: float(doc[k]) for k in ("gamma", "tau", "omega") if k in doc}
    if "tau" in have and have["tau"] <= 0:
        _fail("tau", "must be positive")
    if "omega" in have and have["omega"] < 0:
        _fail("omega", "must be non-negative")
    if len(have) < 2:
        _fail("gamma/tau/omega", "exactly two of the three are required")
    if len(have) == 3:
        if abs(have["gamma"] ** 2 * have["tau"] - have["omega"]) > 1e-12:
            _fail("omega", "inconsistent with gamma^2 * tau")
        return have["gamma"], have["tau"]
    if "gamma" in have and "tau" in have:
        return have["gamma"], have["tau"]
    if "omega" in have and "tau" in have:
        return float(math.sqrt(have["omega"] / have["tau"])), have["tau"]
    if have["gamma"] == 0:
        _fail("gamma", "cannot derive tau from omega when gamma is zero")
    return have["gamma"], have["omega"] / have["gamma"] ** 2


def scenario_from_dict(doc) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    for key in ("name", "mode", "hamiltonian", "projectors", "initial_sys",
                "initial_pr", "t_max", "grid_points"):
        if key not in doc:
            _fail(key, "missing required key")
    gamma, tau = _resolve_rates(doc)
    ham = _parse_hamiltonian(doc["hamiltonian"], gamma)

    projs = doc["projectors"]
    if not isinstance(projs, list) or not projs:
        _fail("projectors", "expected a non-empty list of ket lists")
    groups = []
    for i, group in enumerate(projs):
        if not isinstance(group, list) or not group:
            _fail(f"projectors[{i}]", "expected a non-empty ket list")
        groups.append([_parse_ket(f"projectors[{i}][{j}]", k)
                       for j, k in enumerate(group)])
    selected = doc.get("selected_index")
    if selected is not None and not isinstance(selected, int):
        _fail("selected_index", "expected an integer")
    try:
        meas = measurement_from_kets(groups, selected)
    except ValueError as err:
        _fail("projectors", str(err))

    try:
        init = InitialState(_parse_state("initial_sys", doc["initial_sys"]),
                            _parse_state("initial_pr", doc["initial_pr"]))
    except ValueError as err:
        _fail("initial_sys/initial_pr", str(err))

    outputs = doc.get("outputs", ["p_up"])
    if not isinstance(outputs, list) or not all(isinstance(o, str) for o in outputs):
        _fail("outputs", "expected a list of output names")
    tolerances = doc.get("tolerances")
    if tolerances is not None and not isinstance(tolerances, dict):
        _fail("tolerances", "expected an object")
    methods = doc.get("methods")
    if methods is not None and (not isinstance(methods, list)
                                or not all(isinstance(m, str) for m in methods)):
        _fail("methods", "expected a list of method names")
    try:
        return Scenario(
            name=str(doc["name"]),
            hamiltonian=ham,
            measurement=meas,
            initial=init,
            tau=tau,
            t_max=float(doc["t_max"]),
            grid_points=int(doc["grid_points"]),
            mode=str(doc["mode"]),
            outputs=tuple(outputs),
            tolerances=tolerances,
            methods_spec=tuple(methods) if methods is not None else None,
        )
    except ValueError as err:
        raise ScenarioError(f"scenario invalid: {err}")


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as err:
        raise ScenarioError(f"cannot read scenario file: {err}")
    except json.JSONDecodeError as err:
        raise ScenarioError(f"scenario file is not valid JSON "
                            f"(line {err.lineno}, column {err.colno}): {err.msg}")
    return scenario_from_dict(doc)


# ---------------------------------------------------------------------------
# CSV emission and parsing.


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def trajectory_columns(traj: Trajectory, outputs) -> tuple[list[str], list[list[float]]]:
    """Column names and per-sample rows for the requested outputs."""
    names: list[str] = ["t"]
    series: list[np.ndarray] = [np.asarray(traj.times, dtype=float)]

    def add(name, values):
        names.append(name)
        series.append(np.asarray(values, dtype=float))

    if "p_up" in outputs:
        add("p_up", traj.p_up())
    if "bloch" in outputs:
        bl = traj.bloch()
        for k in range(3):
            add(f"r{k + 1}", bl[:, k])
    if "purity" in outputs:
        add("purity", traj.purities())
    if "trace" in outputs:
        add("trace_unnormalized", traj.norms)
    if "p_err" in outputs:
        add("p_err", traj.p_err)
    if "matrix" in outputs:
        d = traj.sys_states[0].shape[0]
        for i in range(d):
            for j in range(d):
                add(f"re_{i}_{j}", [s[i, j].real for s in traj.sys_states])
                add(f"im_{i}_{j}", [s[i, j].imag for s in traj.sys_states])
    rows = [[series[c][k] for c in range(len(series))] for k in range(len(traj))]
    return names, rows


def write_trajectory_csv(path: str, traj: Trajectory, outputs, method: str) -> None:
    names, rows = trajectory_columns(traj, outputs)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names + ["method"]) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + f",{method}\n")


def read_csv(path: str) -> tuple[list[str], list[dict]]:
    """Parse a trajectory CSV back into float columns plus the method tag."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ValueError("CSV file is empty")
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ValueError("CSV row width does not match header")
        row = {}
        for name, value in zip(header, parts):
            row[name] = value if name == "method" else float(value)
        rows.append(row)
    return header, rows


# ---------------------------------------------------------------------------
# SVG rendering.

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H, _MARGIN = 640, 480, 60


def _svg_scale(lo: float, hi: float, extent: int):
    span = hi - lo if hi > lo else 1.0

    def to_px(v: float) -> float:
        return _MARGIN + (v - lo) / span * (extent - 2 * _MARGIN)

    return to_px


def render_chart(series, x_label: str, y_label: str) -> str:
    """Standalone SVG line chart; series is a list of (label, xs, ys)."""
    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    x_px = _svg_scale(float(xs_all.min()), float(xs_all.max()), _W)
    y_px = _svg_scale(float(ys_all.min()), float(ys_all.max()), _H)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_MARGIN}" y1="{_H - _MARGIN}" x2="{_W - _MARGIN}" '
        f'y2="{_H - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
        f'y2="{_H - _MARGIN}" stroke="black"/>',
        f'<text x="{_W // 2}" y="{_H - 16}" text-anchor="middle" '
        f'font-size="14">{x_label}</text>',
        f'<text x="16" y="{_H // 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 16 {_H // 2})">{y_label}</text>',
    ]
    for bound in np.linspace(float(xs_all.min()), float(xs_all.max()), 5):
        parts.append(f'<text x="{x_px(bound):.6g}" y="{_H - _MARGIN + 18}" '
                     f'text-anchor="middle" font-size="11">{bound:.4g}</text>')
    for bound in np.linspace(float(ys_all.min()), float(ys_all.max()), 5):
        parts.append(f'<text x="{_MARGIN - 8}" y="{_H - y_px(bound):.6g}" '
                     f'text-anchor="end" font-size="11">{bound:.4g}</text>')
    for idx, (label, xs, ys) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(f"{x_px(float(x)):.6g},{_H - y_px(float(y)):.6g}"
                       for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{_W - _MARGIN + 4}" y="{_MARGIN + 16 * idx + 4}" '
                     f'font-size="12" fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Commands.


def cmd_run(scenario_path: str, out_dir: str, grid_points: int | None = None) -> int:
    sc = load_scenario(scenario_path)
    if grid_points is not None:
        sc = replace(sc, grid_points=grid_points)
    os.makedirs(out_dir, exist_ok=True)
    for method in sc.methods:
        traj = run_method(sc, method)
        path = os.path.join(out_dir, f"{sc.name}_{method}.csv")
        write_trajectory_csv(path, traj, sc.outputs, method)
        print(f"wrote {path}")
    return EXIT_OK


def _write_compare_csv(path: str, report: ComparisonReport) -> None:
    case = report.cases[0]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,deviation,deviation_trace\n")
        for t, d, dt_ in zip(case.times, case.deviation, case.deviation_trace):
            fh.write(f"{_fmt(t)},{_fmt(d)},{_fmt(dt_)}\n")


def cmd_compare(scenario_path: str, out_dir: str,
                tolerance: float | None = None) -> int:
    sc = load_scenario(scenario_path)
    if len(sc.methods) < 2:
        print("compare requires a scenario with at least two methods "
              "(mode 'compare')", file=sys.stderr)
        return EXIT_USAGE
    report = compare_scenario(sc)
    tol = tolerance if tolerance is not None else sc.tolerance
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{sc.name}_compare.csv")
    _write_compare_csv(path, report)
    verdict = "PASS" if report.max_deviation <= tol else "FAIL"
    print(f"{sc.name}: methods {'/'.join(sc.methods)}, metric {report.metric}")
    print(f"max deviation {report.max_deviation:.6g} vs tolerance {tol:g}: {verdict}")
    print(f"wrote {path}")
    return EXIT_OK if verdict == "PASS" else EXIT_FAIL


def cmd_sweep(scenario_path: str, taus, out_dir: str) -> int:
    if len(taus) < 2:
        print("sweep requires at least two tau values", file=sys.stderr)
        return EXIT_USAGE
    sc = load_scenario(scenario_path)
    if len(sc.methods) < 2:
        print("sweep requires a comparison scenario (mode 'compare')",
              file=sys.stderr)
        return EXIT_USAGE
    report = convergence_sweep(sc, taus)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{sc.name}_sweep.csv")
    ratios = report.convergence_ratios or ()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("tau,max_deviation,ratio_to_previous\n")
        for k, (tau, dev) in enumerate(report.convergence):
            ratio = "" if k == 0 else _fmt(ratios[k - 1])
            fh.write(f"{_fmt(tau)},{_fmt(dev)},{ratio}\n")
    decreasing = report.strictly_decreasing
    print(f"{sc.name}: sweep over tau = {', '.join(f'{t:g}' for t, _ in report.convergence)}")
    for tau, dev in report.convergence:
        print(f"  tau={tau:g}  max deviation {dev:.6g}")
    print(f"strictly decreasing: {'yes' if decreasing else 'no'}")
    print(f"wrote {path}")
    return EXIT_OK if decreasing else EXIT_FAIL


def cmd_plot(csv_path: str, out_svg: str) -> int:
    try:
        header, rows = read_csv(csv_path)
    except (OSError, ValueError) as err:
        print(f"cannot plot {csv_path}: {err}", file=sys.stderr)
        return EXIT_USAGE
    if not rows:
        print("CSV has no data rows", file=sys.stderr)
        return EXIT_USAGE
    methods = sorted({row.get("method", "data") for row in rows})

    def series_for(x_key, y_key):
        out = []
        for m in methods:
            xs = [r[x_key] for r in rows if r.get("method", "data") == m]
            ys = [r[y_key] for r in rows if r.get("method", "data") == m]
            out.append((m, xs, ys))
        return out

    if "t" in header and "p_up" in header:
        svg = render_chart(series_for("t", "p_up"), "t", "p_up")
    elif "r1" in header and "r3" in header:
        svg = render_chart(series_for("r1", "r3"), "r1", "r3")
    elif "t" in header and "deviation" in header:
        svg = render_chart(series_for("t", "deviation"), "t", "deviation")
    else:
        print("CSV has no plottable columns (need p_up, bloch components, "
              "or deviation)", file=sys.stderr)
        return EXIT_USAGE
    with open(out_svg, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    print(f"wrote {out_svg}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stroblim",
        description="Simulate repeated-measurement dynamics and validate its "
                    "frequent-measurement closed forms.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario, write one CSV per method")
    p_run.add_argument("scenario")
    p_run.add_argument("--out-dir", default=".")
    p_run.add_argument("--grid-points", type=int, default=None)

    p_cmp = sub.add_parser("compare", help="run and compare methods, verdict PASS/FAIL")
    p_cmp.add_argument("scenario")
    p_cmp.add_argument("--out-dir", default=".")
    p_cmp.add_argument("--tolerance", type=float, default=None)

    p_sweep = sub.add_parser("sweep", help="tau-convergence sweep at fixed omega")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--out-dir", default=".")
    p_sweep.add_argument("--tau", action="append", default=[],
                         help="tau value or comma-separated list; repeatable")

    p_plot = sub.add_parser("plot", help="render a trajectory CSV as an SVG chart")
    p_plot.add_argument("csv")
    p_plot.add_argument("out_svg")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.scenario, args.out_dir, args.grid_points)
        if args.command == "compare":
            return cmd_compare(args.scenario, args.out_dir, args.tolerance)
        if args.command == "sweep":
            taus = []
            for chunk in args.tau:
                taus.extend(float(v) for v in chunk.split(",") if v)
            return cmd_sweep(args.scenario, taus, args.out_dir)
        if args.command == "plot":
            return cmd_plot(args.csv, args.out_svg)
        return EXIT_USAGE
    except ScenarioError as err:
        print(f"scenario error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (VanishingProbabilityError, RuntimeError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
