"""Execution of compiled schedules against the Lindblad core.

Exchange windows become rotating-frame drive terms; rotations, displacements
and the selective pi are instantaneous unitaries applied between integration
segments (windowed unitaries at the end of their window, so decoherence acts
over the stated duration). The recorded state is the trajectory at half the
measurement window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .device import POLICY_PHOTON_SWAP, DeviceConfig
from .errors import DomainError, ScheduleError
from .hilbert import HilbertSpace, apply_two_mode, create, destroy, mode_op, number
from .lindblad import (
    CollapseOperator,
    DensityMatrix,
    DriveTerm,
    HamiltonianModel,
    build_space,
    collapse_operators,
    integrate,
)
from .protocols import compile_protocol
from .pulses import EffectiveDriveTerm
from .schedule import PulseSchedule, SequenceStep

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
}


@dataclass
class SimulationResult:
    schedule: PulseSchedule
    space: HilbertSpace
    final_state: DensityMatrix
    times_ns: np.ndarray
    observables: dict[str, np.ndarray]
    measured_qubits: list[str]
    reduced_qubit_state: np.ndarray | None
    trace_drift: float
    hermiticity_residue: float
    min_eigenvalue: float

    def observable(self, name: str) -> np.ndarray:
        return self.observables[name]


@dataclass
class _Event:
    """Instantaneous unitary at a point on the timeline."""

    time: float
    order: int
    unitary_spec: tuple


def _ordered_pair(device: DeviceConfig, a: str, b: str) -> tuple[str, str]:
    """(higher-frequency, lower-frequency): creation acts on the first."""
    if device.mode(a).frequency >= device.mode(b).frequency:
        return a, b
    return b, a


def drive_terms_for_step(device: DeviceConfig, step: SequenceStep
                         ) -> list[EffectiveDriveTerm]:
    """Rotating-frame exchange terms for one schedule step."""
    p = step.params
    if step.kind in ("intra_iswap",):
        pair = _ordered_pair(device, p["qubit"], p["cavity"])
        return [EffectiveDriveTerm(pair=pair, peak=p["rate_mhz"], start=step.start,
                                   duration=step.duration,
                                   detuning=p.get("detuning_khz", 0.0))]
    if step.kind == "inter_iswap":
        pair = _ordered_pair(device, *p["pair"])
        return [EffectiveDriveTerm(pair=pair, peak=p["rate_mhz"], start=step.start,
                                   duration=step.duration,
                                   detuning=p.get("detuning_khz", 0.0))]
    if step.kind == "v_iswap":
        out = []
        for target in p["targets"]:
            pair = _ordered_pair(device, p["source"], target)
            out.append(EffectiveDriveTerm(
                pair=pair, peak=p["rate_mhz"], start=step.start,
                duration=step.duration, detuning=p.get("detuning_khz", 0.0)))
        return out
    return []


def _rotation_matrix(axis: str, angle: float) -> np.ndarray:
    if axis == "z":
        return np.diag([1.0, np.exp(1j * angle)]).astype(complex)
    if axis not in _PAULI:
        raise ScheduleError(f"unknown rotation axis {axis!r}")
    s = _PAULI[axis]
    return (math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * s).astype(complex)


def _selective_pi_matrix(dim_cavity: int) -> np.ndarray:
    """Two-mode (cavity x qubit) unitary: -iX on the qubit iff one photon."""
    u = np.zeros((dim_cavity * 2, dim_cavity * 2), dtype=complex)
    flip = -1j * _PAULI["x"]
    for n in range(dim_cavity):
        block = flip if n == 1 else np.eye(2)
        u[2 * n: 2 * n + 2, 2 * n: 2 * n + 2] = block
    return u


def run_schedule(
    schedule: PulseSchedule,
    device: DeviceConfig,
    *,
    lossless: bool = False,
    policy: str = POLICY_PHOTON_SWAP,
    tol: float = 1e-8,
    sample_dt_ns: float | None = None,
    dim_overrides: dict[str, int] | None = None,
    check_eigenvalues: bool = True,
    extra_detunings: dict[str, float] | None = None,
    cross_kerr: dict[tuple[str, str], float] | None = None,
    initial_state: np.ndarray | None = None,
    record_at_measure_midpoint: bool = True,
) -> SimulationResult:
    """Integrate a schedule from vacuum and record the measured state."""
    schedule.validate(device)
    space = build_space(device, schedule.touched_modes(), dim_overrides)
    dims = space.dims
    rho = space.density(space.vacuum()) if initial_state is None else (
        initial_state if initial_state.ndim == 2 else space.density(initial_state))

    # -- timeline assembly -----------------------------------------------------
    drive_windows: list[EffectiveDriveTerm] = []
    events: list[_Event] = []
    measure_start = None
    for idx, step in enumerate(schedule.steps):
        if step.kind in ("intra_iswap", "inter_iswap", "v_iswap"):
            drive_windows.extend(drive_terms_for_step(device, step))
        elif step.kind == "rotate_qubit":
            events.append(_Event(step.end, idx, (
                "rotate", step.params["qubit"],
                step.params["axis"], step.params["angle"])))
        elif step.kind == "displace_cavity":
            alpha = complex(step.params["amplitude_re"],
                            step.params.get("amplitude_im", 0.0))
            events.append(_Event(step.start, idx, (
                "displace", step.params["cavity"], alpha)))
        elif step.kind == "selective_pi":
            events.append(_Event(step.end, idx, (
                "selective_pi", step.params["qubit"], step.params["cavity"])))
        elif step.kind == "measure":
            t = step.start
            measure_start = t if measure_start is None else min(measure_start, t)
        elif step.kind == "delay":
            pass

    if measure_start is None:
        t_record = max((s.end for s in schedule.steps), default=0.0)
    else:
        half = device.calibration.measurement_time / 2.0
        t_record = measure_start + (half if record_at_measure_midpoint else 0.0)

    boundaries = {0.0, t_record}
    for w in drive_windows:
        boundaries |= {w.start, w.start + w.duration}
    for e in events:
        boundaries.add(e.time)
    boundaries = sorted(b for b in boundaries if b <= t_record + 1e-9)

    cops = [] if lossless else collapse_operators(device, space, policy)
    base_model = HamiltonianModel(
        space,
        frame_detunings=dict(extra_detunings or {}),
        cross_kerr=dict(cross_kerr or {}),
    )

    def unitary_for(spec) -> np.ndarray | tuple:
        if spec[0] == "rotate":
            _, qubit, axis, angle = spec
            return ("one", qubit, _rotation_matrix(axis, angle))
        if spec[0] == "displace":
            _, cavity, alpha = spec
            d = space.dim_of(cavity)
            a = destroy(d)
            return ("one", cavity, expm(alpha * a.conj().T - np.conj(alpha) * a))
        if spec[0] == "selective_pi":
            _, qubit, cavity = spec
            return ("two", cavity, qubit, _selective_pi_matrix(space.dim_of(cavity)))
        raise ScheduleError(f"unknown event {spec[0]!r}")

    def apply_event(rho, spec):
        kind = unitary_for(spec)
        if kind[0] == "one":
            _, mode_id, u = kind
            op = mode_op(space, mode_id, u)
            return op.dagger().apply_right(op.apply_left(rho))  # U rho U^+
        _, m1, m2, u = kind
        return apply_two_mode(space, rho, m1, m2, u)

    # -- observables over the sampled trajectory --------------------------------
    obs_ops = {}
    for mode_id, dim in space.modes:
        obs_ops[f"n({mode_id})"] = mode_op(space, mode_id, number(dim))
        if device.mode(mode_id).kind in ("cavity", "waveguide"):
            obs_ops[f"a({mode_id})"] = mode_op(space, mode_id, destroy(dim))

    times_out: list[float] = []
    obs_out: dict[str, list] = {}
    drift = herm = 0.0
    mineig = math.inf

    def record_samples(traj):
        nonlocal drift, herm, mineig
        drift = max(drift, traj.trace_drift)
        herm = max(herm, traj.hermiticity_residue)
        if check_eigenvalues:
            mineig = min(mineig, traj.min_eigenvalue)
        for st in traj.states:
            if times_out and st.time_ns <= times_out[-1] + 1e-9:
                continue
            times_out.append(st.time_ns)
            for name, op in obs_ops.items():
                val = complex(np.trace(op.apply_left(st.matrix)))
                obs_out.setdefault(name, []).append(val)

    # initial sample
    times_out.append(0.0)
    for name, op in obs_ops.items():
        obs_out.setdefault(name, []).append(complex(np.trace(op.apply_left(rho))))

    events_by_time: dict[float, list[_Event]] = {}
    for e in events:
        events_by_time.setdefault(e.time, []).append(e)

    t_now = 0.0
    for e in sorted(events_by_time.get(0.0, []), key=lambda e: e.order):
        rho = apply_event(rho, e.unitary_spec)

    for t_next in boundaries:
        if t_next <= t_now + 1e-9:
            continue
        active = [w for w in drive_windows
                  if w.start < t_next - 1e-9 and w.start + w.duration > t_now + 1e-9]
        terms = []
        for w in active:
            def strength(t_us, _w=w, _t0=t_now):
                return _w.strength_at(_t0 + t_us * 1e3)
            op = _exchange_for(space, _w_pair(w))
            terms.append(DriveTerm(op=op, strength=strength,
                                   label=f"{w.pair[0]}-{w.pair[1]}"))
        model = HamiltonianModel(
            space, drive_terms=terms,
            frame_detunings=base_model.frame_detunings,
            cross_kerr=base_model.cross_kerr,
        )
        if sample_dt_ns:
            n = max(2, int(round((t_next - t_now) / sample_dt_ns)) + 1)
            samples = np.linspace(t_now, t_next, n)
        else:
            samples = np.linspace(t_now, t_next, 9 if space.total_dim <= 300 else 5)
        traj = integrate(
            DensityMatrix(rho, t_now), model, cops, (t_now, t_next),
            tol=tol, sample_times_ns=samples, check_eigenvalues=check_eigenvalues,
        )
        record_samples(traj)
        rho = traj.final.matrix
        t_now = t_next
        for e in sorted(events_by_time.get(t_next, []), key=lambda e: e.order):
            rho = apply_event(rho, e.unitary_spec)

    final = DensityMatrix(rho, t_now)
    measured = []
    for step in schedule.steps:
        if step.kind == "measure":
            measured.extend(step.params["qubits"])
    measured = [m for m, _ in space.modes if m in set(measured)]
    reduced = space.partial_trace(rho, measured) if measured else None

    return SimulationResult(
        schedule=schedule,
        space=space,
        final_state=final,
        times_ns=np.asarray(times_out),
        observables={k: np.asarray(v) for k, v in obs_out.items()},
        measured_qubits=measured,
        reduced_qubit_state=reduced,
        trace_drift=drift,
        hermiticity_residue=herm,
        min_eigenvalue=(mineig if check_eigenvalues else 0.0),
    )


def _w_pair(w: EffectiveDriveTerm) -> tuple[str, str]:
    return w.pair


_EXCHANGE_CACHE: dict = {}


def _exchange_for(space: HilbertSpace, pair: tuple[str, str]):
    key = (space.modes, pair)
    if key not in _EXCHANGE_CACHE:
        from .hilbert import exchange_op

        _EXCHANGE_CACHE[key] = exchange_op(space, pair[0], pair[1])
    return _EXCHANGE_CACHE[key]


def simulate_protocol(name: str, device: DeviceConfig, options: dict | None = None,
                      **run_kwargs) -> SimulationResult:
    """Compile and run a named protocol in one call."""
    schedule = compile_protocol(name, device, options)
    return run_schedule(schedule, device, **run_kwargs)


def state_fidelity_to(result: SimulationResult, target: np.ndarray) -> float:
    """<target| rho_reduced |target> over the measured qubits."""
    rho = result.reduced_qubit_state
    if rho is None:
        raise DomainError("protocol has no measured qubits")
    return float(np.real(target.conj() @ rho @ target))


# --- detuning calibration -----------------------------------------------------------


def kerr_detuning_calibration(
    schedule: PulseSchedule,
    device: DeviceConfig,
    detunings_khz,
    *,
    cross_kerr: dict[tuple[str, str], float] | None = None,
    frame_detunings: dict[str, float] | None = None,
    lossless: bool = True,
    tol: float = 1e-8,
) -> dict:
    """Sweep the pump detuning of the schedule's first inter-module tone and
    return the value maximizing transfer.

    With no Kerr terms configured the optimum is 0 within the grid step; a
    static frequency-difference shift moves it one-for-one.
    """
    inter = next((s for s in schedule.steps if s.kind == "inter_iswap"), None)
    if inter is None:
        raise DomainError("schedule contains no inter_iswap step")
    hi, lo = _ordered_pair(device, *inter.params["pair"])
    space = build_space(device, [hi, lo])
    psi0 = space.basis_state({hi: 1})
    cops = [] if lossless else collapse_operators(device, space)
    op = _exchange_for(space, (hi, lo))
    g = inter.params["rate_mhz"]
    dur = inter.duration
    n_target = mode_op(space, lo, number(space.dim_of(lo)))

    transfer = []
    for delta in detunings_khz:
        term = EffectiveDriveTerm(pair=(hi, lo), peak=g, start=0.0,
                                  duration=dur, detuning=float(delta))
        model = HamiltonianModel(
            space,
            drive_terms=[DriveTerm(op=op, strength=lambda t, _t=term: _t.strength_at(t * 1e3))],
            frame_detunings=dict(frame_detunings or {}),
            cross_kerr=dict(cross_kerr or {}),
        )
        traj = integrate(DensityMatrix(space.density(psi0)), model, cops,
                         (0.0, dur), tol=tol, sample_times_ns=[dur],
                         check_eigenvalues=False)
        transfer.append(float(np.real(
            np.trace(n_target.apply_left(traj.final.matrix)))))
    transfer = np.asarray(transfer)
    detunings = np.asarray(list(detunings_khz), dtype=float)
    best = int(np.argmax(transfer))
    return {
        "detunings_khz": detunings,
        "transfer": transfer,
        "optimal_khz": float(detunings[best]),
        "grid_step_khz": float(np.min(np.diff(np.sort(detunings))))
        if len(detunings) > 1 else 0.0,
    }
