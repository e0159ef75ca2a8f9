"""Scenario runner: exact-vs-analytical comparisons and tau-convergence sweeps.

Four bundled setups cover the physics of interest: a selectively measured
exchange-coupled qubit pair (closed-form excited-state probability), two
three-qubit Heisenberg chains under rank-2 probe measurements (limit cycle
and Bloch-ball spiral of the system qubit), and a non-selectively measured
exchange-coupled pair (semigroup plus closed form).  Everything is
deterministic: fixed grids, fixed-step integration, no randomness.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .exact import EvolutionPlan, run_nonselective, run_selective, steps_in
from .linalg import trace_distance
from .model import (HamiltonianSpec, InitialState, MeasurementSpec, basis_ket,
                    heisenberg3_hamiltonian, measurement_from_kets,
                    swap_hamiltonian)
from .nonselective_limit import (build_generator, semigroup_propagate,
                                 swap_nonselective_closed_form)
from .selective_limit import effective_rank1, effective_rankr, propagate_kraus
from .trajectory import Trajectory, bloch_to_density, bloch_vector

OUTPUT_KEYS = ("p_up", "bloch", "purity", "trace", "p_err", "matrix")
MODES = ("selective", "nonselective", "limit-only", "compare")


@dataclass(frozen=True)
class Scenario:
    """One reproducible run configuration.

    Omega is implied by gamma (in the Hamiltonian) and tau.  When an exact
    method participates, the requested grid must hit integer multiples of tau,
    where exact and limit dynamics are directly comparable.
    """

    name: str
    hamiltonian: HamiltonianSpec
    measurement: MeasurementSpec
    initial: InitialState
    tau: float
    t_max: float
    grid_points: int
    mode: str = "compare"
    outputs: tuple[str, ...] = ("p_up",)
    tolerances: dict | None = None
    methods_spec: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.methods_spec is not None:
            bad = set(self.methods_spec) - {"exact", "limit", "closed_form"}
            if bad:
                raise ValueError(f"unknown methods: {sorted(bad)}")
            if "closed_form" in self.methods_spec and not closed_form_applicable(self):
                raise ValueError("closed_form requested but the scenario does not "
                                 "match its preconditions")
        if self.tau <= 0 or self.t_max <= 0:
            raise ValueError("tau and t_max must be positive")
        if self.grid_points < 1:
            raise ValueError("grid_points must be at least 1")
        unknown = set(self.outputs) - set(OUTPUT_KEYS)
        if unknown:
            raise ValueError(f"unknown outputs: {sorted(unknown)}")
        if self.measurement.dim_pr != self.hamiltonian.dim_pr:
            raise ValueError("measurement and Hamiltonian probe dimensions differ")
        if self.initial.dims != self.hamiltonian.dims:
            raise ValueError("initial state does not match Hamiltonian dimensions")
        if self.mode in ("selective",) and not self.measurement.selective:
            raise ValueError("selective mode needs a selected_index")
        if self.mode in ("nonselective",) and self.measurement.selective:
            raise ValueError("nonselective mode must not set selected_index")
        if "exact" in self.methods:
            stride = self.grid_stride
            if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
                raise ValueError("grid times must fall on integer multiples of tau "
                                 "when an exact method runs")

    @property
    def omega(self) -> float:
        return self.hamiltonian.gamma ** 2 * self.tau

    @property
    def selective(self) -> bool:
        return self.measurement.selective

    @property
    def grid_stride(self) -> float:
        return self.t_max / self.grid_points / self.tau

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.grid_points + 1) * (self.t_max / self.grid_points)

    @property
    def methods(self) -> tuple[str, ...]:
        if self.methods_spec is not None:
            return self.methods_spec
        if self.mode in ("selective", "nonselective"):
            return ("exact",)
        if self.mode == "limit-only":
            return ("limit",)
        methods = ["exact", "limit"]
        if not self.selective and closed_form_applicable(self):
            methods.append("closed_form")
        return tuple(methods)

    @property
    def tolerance(self) -> float:
        if self.tolerances and "max_deviation" in self.tolerances:
            return float(self.tolerances["max_deviation"])
        return 0.02


def closed_form_applicable(sc: Scenario) -> bool:
    """True when the non-selective closed form applies: qubit pair with pure
    exchange coupling, probe measured in its own basis and prepared in the
    first basis state."""
    ham = sc.hamiltonian
    if ham.dim_sys != 2 or ham.dim_pr != 2 or sc.measurement.selective:
        return False
    gamma = ham.gamma
    if gamma == 0:
        return False
    swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]],
                    dtype=complex)
    if np.max(np.abs(ham.assemble() - gamma * swap)) > 1e-10:
        return False
    up = np.zeros((2, 2), dtype=complex)
    up[0, 0] = 1.0
    down = np.zeros((2, 2), dtype=complex)
    down[1, 1] = 1.0
    projs = sc.measurement.projectors
    if len(projs) != 2:
        return False
    if np.max(np.abs(projs[0] - up)) > 1e-10 or np.max(np.abs(projs[1] - down)) > 1e-10:
        return False
    return np.max(np.abs(sc.initial.rho_pr - up)) <= 1e-10


def run_method(sc: Scenario, method: str) -> Trajectory:
    ham, meas, init = sc.hamiltonian, sc.measurement, sc.initial
    if method == "exact":
        plan = EvolutionPlan(ham, meas, sc.tau, sc.t_max)
        traj = run_selective(plan, init) if sc.selective else run_nonselective(plan, init)
        stride = round(sc.grid_stride)
        return traj.subsample(range(0, steps_in(sc.t_max, sc.tau) + 1, stride))
    if method == "limit":
        if sc.selective:
            sel = meas.selected_index
            basis = meas.bases[sel]
            if meas.ranks[sel] == 1:
                eff = effective_rank1(ham, basis[:, 0], sc.tau)
            else:
                eff = effective_rankr(ham, meas.projectors[sel], sc.tau, basis)
            return propagate_kraus(eff, init, sc.times)
        eff = build_generator(ham, meas, sc.tau)
        return semigroup_propagate(eff, init, sc.times)
    if method == "closed_form":
        if not closed_form_applicable(sc):
            raise ValueError("closed form does not apply to this scenario")
        times = sc.times
        states = [swap_nonselective_closed_form(ham.gamma, sc.omega,
                                                init.rho_sys, t) for t in times]
        return Trajectory(times.copy(), states, list(states),
                          np.ones(len(times)), None)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class CaseComparison:
    """Deviation series of every non-reference method against the reference."""

    label: str
    times: np.ndarray
    deviation: np.ndarray
    deviation_trace: np.ndarray
    p_err: np.ndarray | None
    trajectories: dict

    @property
    def max_deviation(self) -> float:
        return float(self.deviation.max()) if self.deviation.size else 0.0


@dataclass
class ComparisonReport:
    name: str
    metric: str
    cases: tuple[CaseComparison, ...]
    max_deviation: float
    convergence: tuple[tuple[float, float], ...] | None = None
    snapshots: dict | None = None

    @property
    def convergence_ratios(self) -> tuple[float, ...] | None:
        if not self.convergence or len(self.convergence) < 2:
            return None
        devs = [d for _, d in self.convergence]
        return tuple(a / b for a, b in zip(devs[:-1], devs[1:]))

    @property
    def strictly_decreasing(self) -> bool | None:
        if not self.convergence or len(self.convergence) < 2:
            return None
        devs = [d for _, d in self.convergence]
        return all(a > b for a, b in zip(devs[:-1], devs[1:]))


def _metric_for(sc: Scenario) -> str:
    if "p_up" in sc.outputs:
        return "p_up"
    if "bloch" in sc.outputs:
        return "bloch"
    return "trace_distance"


def _series_deviation(metric: str, ref: Trajectory, other: Trajectory) -> np.ndarray:
    if metric == "p_up":
        return np.abs(ref.p_up() - other.p_up())
    if metric == "bloch":
        return np.linalg.norm(ref.bloch() - other.bloch(), axis=1)
    return np.array([trace_distance(a, b)
                     for a, b in zip(ref.sys_states, other.sys_states)])


def compare_case(sc: Scenario, label: str | None = None) -> CaseComparison:
    methods = sc.methods
    trajs = {m: run_method(sc, m) for m in methods}
    ref_name = "exact" if "exact" in trajs else methods[0]
    ref = trajs[ref_name]
    n = len(ref)
    for m, tr in trajs.items():
        if len(tr) != n:
            raise RuntimeError(f"method {m} returned a truncated trajectory")
    metric = _metric_for(sc)
    dev = np.zeros(n)
    dev_tr = np.zeros(n)
    for m, tr in trajs.items():
        if m == ref_name:
            continue
        dev = np.maximum(dev, _series_deviation(metric, ref, tr))
        dev_tr = np.maximum(dev_tr, _series_deviation("trace_distance", ref, tr))
    p_err = ref.p_err if sc.selective else None
    return CaseComparison(label or sc.name, ref.times.copy(), dev, dev_tr,
                          p_err, trajs)


def compare_scenario(sc: Scenario) -> ComparisonReport:
    if len(sc.methods) < 2:
        raise ValueError("comparison needs a scenario with at least two methods")
    case = compare_case(sc)
    return ComparisonReport(sc.name, _metric_for(sc), (case,), case.max_deviation)


# ---------------------------------------------------------------------------
# Bundled setups.


def swap_selective_scenario(alpha_sq: float = 0.2, gamma: float = 5.0,
                            tau: float = 0.04, t_max: float = 10.0,
                            mode: str = "compare") -> Scenario:
    """Qubit pair with exchange coupling; probe spin projection measured
    selectively every tau; system prepared in sqrt(a)|u> + sqrt(1-a)|d>."""
    psi = np.array([np.sqrt(alpha_sq), np.sqrt(1.0 - alpha_sq)], dtype=complex)
    return Scenario(
        name="swap_selective",
        hamiltonian=swap_hamiltonian(gamma),
        measurement=measurement_from_kets([[basis_ket("u")]], selected_index=0),
        initial=InitialState.from_kets(psi, basis_ket("u")),
        tau=tau,
        t_max=t_max,
        grid_points=steps_in(t_max, tau),
        mode=mode,
        outputs=("p_up", "purity", "trace", "p_err"),
        tolerances={"max_deviation": 0.02},
    )


def heisenberg_local_fields_scenario(gamma: float = 5.0, tau: float = 0.04,
                                     t_max: float = 10.0,
                                     mode: str = "compare") -> Scenario:
    """Three Heisenberg-coupled qubits with local x/y/z fields; the two probe
    qubits are projected onto their zero-total-spin-projection subspace."""
    return Scenario(
        name="heisenberg_local_fields",
        hamiltonian=heisenberg3_hamiltonian(gamma, "local_xyz"),
        measurement=measurement_from_kets(
            [[basis_ket("ud"), basis_ket("du")]], selected_index=0),
        initial=InitialState.from_kets(basis_ket("u") + basis_ket("d"),
                                       basis_ket("ud")),
        tau=tau,
        t_max=t_max,
        grid_points=steps_in(t_max, tau),
        mode=mode,
        outputs=("bloch", "purity", "trace", "p_err"),
        tolerances={"max_deviation": 0.1},
    )


def heisenberg_global_field_scenario(gamma: float = 2.0 * np.sqrt(2.0),
                                     tau: float = 0.02, t_max: float = 10.0,
                                     mode: str = "compare") -> Scenario:
    """Same chain in a global z field; probe projected onto the span of the
    aligned states |uu>, |dd>."""
    return Scenario(
        name="heisenberg_global_field",
        hamiltonian=heisenberg3_hamiltonian(gamma, "global_z"),
        measurement=measurement_from_kets(
            [[basis_ket("uu"), basis_ket("dd")]], selected_index=0),
        initial=InitialState.from_kets(basis_ket("u") + basis_ket("d"),
                                       basis_ket("uu") + basis_ket("dd")),
        tau=tau,
        t_max=t_max,
        grid_points=steps_in(t_max, tau),
        mode=mode,
        outputs=("bloch", "purity", "trace", "p_err"),
        tolerances={"max_deviation": 0.1},
    )


def swap_nonselective_scenario(alpha_sq: float = 0.3, gamma: float = 5.0,
                               tau: float = 0.04, t_max: float = 10.0,
                               mode: str = "compare") -> Scenario:
    """Exchange-coupled qubit pair with the probe measured non-selectively in
    its own basis every tau."""
    psi = np.array([np.sqrt(alpha_sq), np.sqrt(1.0 - alpha_sq)], dtype=complex)
    return Scenario(
        name="swap_nonselective",
        hamiltonian=swap_hamiltonian(gamma),
        measurement=measurement_from_kets([[basis_ket("u")], [basis_ket("d")]]),
        initial=InitialState.from_kets(psi, basis_ket("u")),
        tau=tau,
        t_max=t_max,
        grid_points=steps_in(t_max, tau),
        mode=mode,
        outputs=("p_up", "purity", "trace"),
        tolerances={"max_deviation": 0.03},
    )


def run_swap_selective(alpha_sqs=(0.01, 0.2, 0.6, 1.0), gamma: float = 5.0,
                       tau: float = 0.04, t_max: float = 10.0) -> ComparisonReport:
    """Excited-state probability, exact vs frequent-measurement limit, for a
    family of initial superpositions (the fully excited case stays at 1)."""
    cases = []
    for a in alpha_sqs:
        sc = swap_selective_scenario(a, gamma, tau, t_max)
        cases.append(compare_case(sc, label=f"alpha_sq={a:g}"))
    max_dev = max(c.max_deviation for c in cases)
    return ComparisonReport("swap_selective", "p_up", tuple(cases), max_dev)


def run_heisenberg_local_fields(gamma: float = 5.0, tau: float = 0.04,
                                t_max: float = 10.0) -> ComparisonReport:
    """System-qubit Bloch trajectory, exact vs rank-2 limit (limit cycle)."""
    sc = heisenberg_local_fields_scenario(gamma, tau, t_max)
    case = compare_case(sc)
    return ComparisonReport(sc.name, "bloch", (case,), case.max_deviation)


def run_heisenberg_global_field(gamma: float = 2.0 * np.sqrt(2.0),
                                tau: float = 0.02,
                                t_max: float = 10.0) -> ComparisonReport:
    """System-qubit Bloch trajectory, exact vs rank-2 limit (purity loss)."""
    sc = heisenberg_global_field_scenario(gamma, tau, t_max)
    case = compare_case(sc)
    return ComparisonReport(sc.name, "bloch", (case,), case.max_deviation)


def bloch_ball_images(omega: float, snapshot_times, gamma: float = 1.0,
                      n_polar: int = 7, n_azimuth: int = 16) -> dict:
    """Images of a Bloch-sphere point grid under the non-selective closed form
    at each snapshot time; keys are times, values (N, 3) Bloch vectors."""
    points = []
    for k in range(1, n_polar + 1):
        theta = np.pi * k / (n_polar + 1)
        for m in range(n_azimuth):
            phi = 2.0 * np.pi * m / n_azimuth
            points.append((np.sin(theta) * np.cos(phi),
                           np.sin(theta) * np.sin(phi),
                           np.cos(theta)))
    points.append((0.0, 0.0, 1.0))
    points.append((0.0, 0.0, -1.0))
    grid = np.array(points)
    out = {}
    for t in snapshot_times:
        images = [bloch_vector(swap_nonselective_closed_form(
            gamma, omega, bloch_to_density(r), t)) for r in grid]
        out[float(t)] = np.array(images)
    return out


def run_swap_nonselective(alpha_sqs=(0.01, 0.3, 0.6, 1.0), gamma: float = 5.0,
                          tau: float = 0.04, t_max: float = 10.0,
                          snapshot_omega: float = 0.1,
                          snapshot_span: float = 40.0,
                          snapshot_dt: float = 5.0) -> ComparisonReport:
    """Excited-state probability under non-selective monitoring, exact vs
    semigroup vs closed form, plus Bloch-ball contraction snapshots."""
    cases = []
    for a in alpha_sqs:
        sc = swap_nonselective_scenario(a, gamma, tau, t_max)
        cases.append(compare_case(sc, label=f"alpha_sq={a:g}"))
    max_dev = max(c.max_deviation for c in cases)
    snap_times = np.arange(0.0, snapshot_span + 0.5 * snapshot_dt, snapshot_dt)
    snaps = bloch_ball_images(snapshot_omega, snap_times)
    return ComparisonReport("swap_nonselective", "p_up", tuple(cases), max_dev,
                            snapshots=snaps)


def _sweep_workers() -> int:
    raw = os.environ.get("STROBLIM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"STROBLIM_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def convergence_sweep(sc: Scenario, taus) -> ComparisonReport:
    """Re-run a comparison scenario over a tau list at fixed Omega = gamma^2 tau
    (gamma recomputed per tau) and tabulate the max deviation per tau."""
    taus = [float(t) for t in taus]
    if len(taus) < 2:
        raise ValueError("convergence sweep needs at least two tau values")
    omega = sc.omega

    def one(tau: float) -> CaseComparison:
        gamma = float(np.sqrt(omega / tau))
        scaled = replace(
            sc,
            hamiltonian=HamiltonianSpec(gamma, sc.hamiltonian.terms),
            tau=tau,
            grid_points=steps_in(sc.t_max, tau),
        )
        return compare_case(scaled, label=f"tau={tau:g}")

    workers = _sweep_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cases = list(pool.map(one, taus))
    else:
        cases = [one(t) for t in taus]
    table = tuple((tau, c.max_deviation) for tau, c in zip(taus, cases))
    max_dev = max(c.max_deviation for c in cases)
    return ComparisonReport(f"{sc.name}_sweep", _metric_for(sc), tuple(cases),
                            max_dev, convergence=table)
