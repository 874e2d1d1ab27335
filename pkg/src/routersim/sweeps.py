"""Sweep execution: chevrons, gate-time curves, transfer scans.

Cells are independent integrations; with workers > 1 they are distributed
over a process pool and merged deterministically by index.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .device import DeviceConfig
from .errors import DomainError
from .hilbert import mode_op, number, destroy
from .lindblad import (
    DensityMatrix,
    DriveTerm,
    HamiltonianModel,
    build_space,
    collapse_operators,
    integrate,
)
from .protocols import compile_protocol, ideal_target
from .pulses import EffectiveDriveTerm
from .simulate import _exchange_for, _ordered_pair, run_schedule, state_fidelity_to


@dataclass
class SweepResult:
    axis_names: list[str]
    axes: list[list[float]]
    grid: np.ndarray
    value_name: str
    metadata: dict = field(default_factory=dict)


def run_sweep(protocol: str, device: DeviceConfig, axes: dict, options: dict,
              tol: float = 1e-8, workers: int = 1) -> SweepResult:
    if protocol in ("bell", "parallel_bell", "fock_transfer"):
        return _gate_time_sweep(protocol, device, axes, options, tol, workers)
    if protocol in ("coherent_swap_sweep", "chevron_tuneup"):
        return _chevron_sweep(protocol, device, axes, options, tol, workers)
    raise DomainError(f"protocol {protocol!r} has no sweep axes")


# --- 1-D gate-time sweeps -----------------------------------------------------------


def _gate_cell(argpack):
    protocol, device, t_inter, options, tol = argpack
    opts = dict(options)
    opts["inter_time_ns"] = float(t_inter)
    opts["scale_gates"] = opts.get("scale_gates", True)
    schedule = compile_protocol(protocol, device, opts)
    result = run_schedule(schedule, device, tol=tol, check_eigenvalues=False)
    if protocol == "fock_transfer":
        return float(result.observables["n(Q4)"][-1].real)
    target = ideal_target(schedule.protocol)
    return state_fidelity_to(result, target)


def _gate_time_sweep(protocol, device, axes, options, tol, workers) -> SweepResult:
    if "inter_time_ns" not in axes:
        raise DomainError("gate-time sweep needs an inter_time_ns axis")
    times = [float(t) for t in axes["inter_time_ns"]]
    packs = [(protocol, device, t, options, tol) for t in times]
    values = _map(packs, _gate_cell, workers)
    name = "q4_population" if protocol == "fock_transfer" else "bell_fidelity"
    return SweepResult(["inter_time_ns"], [times], np.asarray(values), name)


# --- 2-D chevrons -------------------------------------------------------------------


def _chevron_cell(argpack):
    """One detuning column: a single integration sampled at every duration."""
    (device, pair, rate, detuning_khz, durations, alpha, lossless, tol) = argpack
    hi, lo = _ordered_pair(device, *pair)
    space = build_space(device, [hi, lo])
    if alpha is None:
        psi0 = space.basis_state({hi: 1})  # Fock chevron (intra-style)
    else:
        psi0 = space.coherent_state({pair[1]: alpha})
    cops = [] if lossless else collapse_operators(device, space)
    t_max = max(durations)
    term = EffectiveDriveTerm(pair=(hi, lo), peak=rate, start=0.0,
                              duration=t_max, detuning=float(detuning_khz))
    model = HamiltonianModel(space, drive_terms=[
        DriveTerm(op=_exchange_for(space, (hi, lo)),
                  strength=lambda t_us, _t=term: _t.strength_at(t_us * 1e3)),
    ])
    traj = integrate(DensityMatrix(space.density(psi0)), model, cops,
                     (0.0, t_max), tol=tol, sample_times_ns=durations,
                     check_eigenvalues=False)
    receiver = pair[0]  # initially empty end of the pair
    if alpha is None:
        op = mode_op(space, receiver, number(space.dim_of(receiver)))
        vals = [float(np.real(np.trace(op.apply_left(st.matrix))))
                for st in traj.states]
    else:
        op = mode_op(space, receiver, destroy(space.dim_of(receiver)))
        vals = [abs(complex(np.trace(op.apply_left(st.matrix)))) / abs(alpha)
                for st in traj.states]
    sample_set = {round(t, 6): v for t, v in zip(traj.times_ns, vals)}
    return [sample_set[round(t, 6)] for t in durations]


def _chevron_sweep(protocol, device, axes, options, tol, workers) -> SweepResult:
    detunings = [float(d) for d in axes.get("detuning_khz", [0.0])]
    durations = sorted(float(d) for d in axes.get(
        "duration_ns", np.linspace(0.0, 3000.0, 61)))
    if durations[0] > 0:
        durations = [0.0] + durations

    if protocol == "coherent_swap_sweep":
        pair = tuple(options.get("pair", ("C2", "C4")))
        alpha = options.get("alpha", 1.0)
        rate = options.get("rate_mhz")
        if rate is None:
            t_cal = device.calibration.iswap_time(*pair)
            if t_cal is None:
                raise DomainError(f"no calibration for pair {pair}")
            rate = 250.0 / t_cal
        value_name = f"abs_a({pair[0]})"
        lossless = bool(options.get("lossless", False))
    else:  # chevron_tuneup
        module = device.module_for_qubit(options.get("module", "Q2"))
        pair = (module.cavity_id, module.qubit_id)  # receiver = cavity
        alpha = None
        rate = 250.0 / module.intra_swap_time
        value_name = f"n({module.cavity_id})"
        lossless = bool(options.get("lossless", False))

    packs = [(device, pair, rate, d, durations, alpha, lossless, tol)
             for d in detunings]
    columns = _map(packs, _chevron_cell, workers)
    grid = np.asarray(columns)  # (n_detuning, n_duration)
    return SweepResult(
        ["detuning_khz", "duration_ns"], [detunings, durations], grid, value_name,
        metadata={"pair": list(pair), "rate_mhz": rate},
    )


def _map(packs, fn, workers):
    if workers and workers > 1 and len(packs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, packs))
    return [fn(p) for p in packs]
