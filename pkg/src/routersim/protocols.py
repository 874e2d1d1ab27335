"""Compilation of named protocols into pulse schedules.

Durations come from the device's calibration entries (measured full-swap
times) or from gate_time at the calibrated peak rate. Full iSWAPs impart a
-i phase on the transferred component; each builder appends the virtual
z-rotations that return the ideal lossless output to the canonical target
state, mirroring the phase tracking done in the control electronics.

Multi-tone protocols (parallel swaps, parallel Bell, the V gate) run all
exchange gates slowed by the pump-budget factor `parallel_time/bell_time`;
the bell gate-time sweep applies the same uniform scaling, so its time axis
is a proxy for overall drive strength.
"""

from __future__ import annotations

import math

from .device import DeviceConfig
from .errors import MissingCalibrationError, UnknownProtocolError
from .pulses import W_STATE_EXPONENT, angle_time, gate_time, rate_for_full_swap
from .schedule import PulseSchedule, SequenceStep

PROTOCOLS = (
    "coherent_swap_sweep",
    "fock_transfer",
    "bell",
    "parallel_swap",
    "parallel_bell",
    "v_swap_w_state",
    "ghz",
    "chevron_tuneup",
)

HALF_PI = math.pi / 2.0


def compile_protocol(name: str, device: DeviceConfig, options: dict | None = None
                     ) -> PulseSchedule:
    """Compile a named protocol; deterministic for identical inputs."""
    options = dict(options or {})
    builders = {
        "coherent_swap_sweep": _coherent_swap_sweep,
        "fock_transfer": _fock_transfer,
        "bell": _bell,
        "parallel_swap": _parallel_swap,
        "parallel_bell": _parallel_bell,
        "v_swap_w_state": _v_swap_w_state,
        "ghz": _ghz,
        "chevron_tuneup": _chevron_tuneup,
    }
    if name not in builders:
        raise UnknownProtocolError(
            f"unknown protocol {name!r}; expected one of {PROTOCOLS}")
    schedule = builders[name](device, options)
    return schedule.validate(device)


# --- helpers ------------------------------------------------------------------


def _inter_time(device: DeviceConfig, c_i: str, c_j: str) -> float:
    t = device.calibration.iswap_time(c_i, c_j)
    if t is None:
        raise MissingCalibrationError(
            f"no iSWAP gate-time calibration for pair {c_i}-{c_j}")
    return t


def _pump_scale(device: DeviceConfig) -> float:
    """Multi-tone slowdown: ratio of the slowed to the single-tone gate time."""
    cal = device.calibration
    if cal.parallel_iswap_time and cal.bell_iswap_time:
        return cal.parallel_iswap_time / cal.bell_iswap_time
    return 1.0


def _rotate(qubit: str, axis: str, angle: float, start: float, duration: float = 0.0
            ) -> SequenceStep:
    return SequenceStep("rotate_qubit", start, duration,
                        {"qubit": qubit, "axis": axis, "angle": angle})


def _intra(device, module, exponent: float, start: float, scale: float = 1.0,
           angle: float | None = None) -> SequenceStep:
    """Qubit-cavity exchange; duration from the module's full-swap time.

    ``angle`` overrides the exchange angle (rad) for non-dyadic exponents.
    """
    full = module.intra_swap_time * scale
    rate = rate_for_full_swap(full)
    dur = gate_time(exponent, rate) if angle is None else angle_time(angle, rate)
    return SequenceStep("intra_iswap", start, dur, {
        "qubit": module.qubit_id, "cavity": module.cavity_id,
        "exponent": exponent, "rate_mhz": rate, "detuning_khz": 0.0,
    })


def _inter(pair, exponent: float, start: float, duration: float,
           detuning_khz: float = 0.0) -> SequenceStep:
    rate = 250.0 * exponent / duration  # so that theta = p*pi/2 over `duration`
    return SequenceStep("inter_iswap", start, duration, {
        "pair": list(pair), "exponent": exponent, "rate_mhz": rate,
        "detuning_khz": detuning_khz,
    })


def _measure(qubits, start: float, device) -> SequenceStep:
    return SequenceStep("measure", start, device.calibration.measurement_time,
                        {"qubits": sorted(qubits)})


def _label(device: DeviceConfig) -> str:
    return "device"


# --- protocol builders -----------------------------------------------------------


def _bell(device: DeviceConfig, options: dict) -> PulseSchedule:
    """sqrt-iSWAP inside the source module, then route the cavity half across."""
    q_src, q_dst = options.get("pair", ("Q2", "Q4"))
    m_src = device.module_for_qubit(q_src)
    m_dst = device.module_for_qubit(q_dst)
    cal = device.calibration
    default_inter = (
        cal.bell_iswap_time
        if {q_src, q_dst} == {"Q2", "Q4"} and cal.bell_iswap_time
        else _inter_time(device, m_src.cavity_id, m_dst.cavity_id)
    )
    t_inter = options.get("inter_time_ns", default_inter)
    scale = options.get("gate_scale", t_inter / default_inter
                        if options.get("scale_gates") else 1.0)
    rot = cal.rotation_time

    t = 0.0
    steps = [_rotate(q_src, "x", math.pi, t, rot)]
    t += rot
    s = _intra(device, m_src, 0.5, t, scale)
    steps.append(s)
    t = s.end
    s = _inter((m_src.cavity_id, m_dst.cavity_id), 1.0, t, t_inter,
               options.get("detuning_khz", 0.0))
    steps.append(s)
    t = s.end
    s = _intra(device, m_dst, 1.0, t, scale)
    steps.append(s)
    t = s.end
    steps.append(_rotate(q_dst, "z", -HALF_PI, t))
    steps.append(_measure([q_src, q_dst], t, device))
    return PulseSchedule("bell", _label(device), tuple(steps), options=options)


def _fock_transfer(device: DeviceConfig, options: dict) -> PulseSchedule:
    """Route a single photon Q2 -> C2 -> C4 -> Q4; return swaps end together."""
    q_src, q_dst = options.get("pair", ("Q2", "Q4"))
    m_src = device.module_for_qubit(q_src)
    m_dst = device.module_for_qubit(q_dst)
    tau = options.get("inter_time_ns",
                      _inter_time(device, m_src.cavity_id, m_dst.cavity_id))
    rot = device.calibration.rotation_time

    t = 0.0
    steps = [_rotate(q_src, "x", math.pi, t, rot)]
    t += rot
    s = _intra(device, m_src, 1.0, t)
    steps.append(s)
    t = s.end
    s = _inter((m_src.cavity_id, m_dst.cavity_id), 1.0, t, tau,
               options.get("detuning_khz", 0.0))
    steps.append(s)
    t = s.end
    back_src = _intra(device, m_src, 1.0, t)
    back_dst = _intra(device, m_dst, 1.0, t)
    t_end = t + max(back_src.duration, back_dst.duration)
    # align ends: the photon waits in the longer-lived cavity, not the qubit
    back_src = _intra(device, m_src, 1.0, t_end - back_src.duration)
    back_dst = _intra(device, m_dst, 1.0, t_end - back_dst.duration)
    steps += [back_src, back_dst]
    steps.append(_measure([q_src, q_dst], t_end, device))
    sweep = {"duration_ns": options.get("durations", [])}
    return PulseSchedule("fock_transfer", _label(device), tuple(steps),
                         sweep_axes={k: v for k, v in sweep.items() if v},
                         options=options)


def _parallel_swap(device: DeviceConfig, options: dict) -> PulseSchedule:
    """Simultaneous Q2->Q4 and Q3->C1 exchanges over the router (Fig.-5 style)."""
    scale = options.get("gate_scale", _pump_scale(device))
    t_par = options.get("inter_time_ns", device.calibration.parallel_iswap_time
                        or _inter_time(device, "C2", "C4") * scale)
    m2 = device.module_for_qubit("Q2")
    m3 = device.module_for_qubit("Q3")
    m4 = device.module_for_qubit("Q4")
    rot = device.calibration.rotation_time

    steps = [_rotate("Q2", "x", math.pi, 0.0, rot),
             _rotate("Q3", "x", math.pi, 0.0, rot)]
    in2 = _intra(device, m2, 1.0, rot, scale)
    in3 = _intra(device, m3, 1.0, rot, scale)
    t0 = rot + max(in2.duration, in3.duration)
    steps.append(_intra(device, m2, 1.0, t0 - in2.duration, scale))
    steps.append(_intra(device, m3, 1.0, t0 - in3.duration, scale))
    steps.append(_inter((m2.cavity_id, m4.cavity_id), 1.0, t0, t_par,
                        options.get("detuning_khz", 0.0)))
    steps.append(_inter((m3.cavity_id, "C1"), 1.0, t0, t_par,
                        options.get("detuning_khz", 0.0)))
    t1 = t0 + t_par
    backs = [_intra(device, m, 1.0, t1, scale) for m in (m2, m3, m4)]
    t_end = t1 + max(b.duration for b in backs)
    steps += [_intra(device, m, 1.0, t_end - b.duration, scale)
              for m, b in zip((m2, m3, m4), backs)]
    steps.append(_measure(["Q2", "Q3", "Q4"], t_end, device))
    return PulseSchedule("parallel_swap", _label(device), tuple(steps),
                         options=options)


def _parallel_bell(device: DeviceConfig, options: dict) -> PulseSchedule:
    """Bell(Q2,Q4) at the multi-tone (slowed) gate time with the C1-C3 tone on."""
    cal = device.calibration
    t_par = options.get("inter_time_ns", cal.parallel_iswap_time)
    if t_par is None:
        raise MissingCalibrationError("no parallel_iswap_time calibration entry")
    base = cal.bell_iswap_time or _inter_time(device, "C2", "C4")
    scale = options.get("gate_scale", t_par / base)
    m2 = device.module_for_qubit("Q2")
    m4 = device.module_for_qubit("Q4")
    m3 = device.module_for_qubit("Q3")
    rot = cal.rotation_time

    t = 0.0
    steps = [_rotate("Q2", "x", math.pi, t, rot)]
    t += rot
    s = _intra(device, m2, 0.5, t, scale)
    steps.append(s)
    t = s.end
    steps.append(_inter((m2.cavity_id, m4.cavity_id), 1.0, t, t_par,
                        options.get("detuning_khz", 0.0)))
    steps.append(_inter((m3.cavity_id, "C1"), 1.0, t, t_par,
                        options.get("detuning_khz", 0.0)))
    t += t_par
    s = _intra(device, m4, 1.0, t, scale)
    steps.append(s)
    t = s.end
    steps.append(_rotate("Q4", "z", -HALF_PI, t))
    steps.append(_measure(["Q2", "Q4"], t, device))
    return PulseSchedule("parallel_bell", _label(device), tuple(steps),
                         options=options)


def _v_swap_w_state(device: DeviceConfig, options: dict) -> PulseSchedule:
    """iSWAP^(2/3) then a V exchange from C2 into (C3, C4); W across the qubits.

    All gates run at the multi-tone pump budget. The V tones are rate-matched
    to the slower of the two pairs; the source empties at t = 1/(4 sqrt(2) G).
    """
    scale = options.get("gate_scale", _pump_scale(device))
    m2 = device.module_for_qubit("Q2")
    m3 = device.module_for_qubit("Q3")
    m4 = device.module_for_qubit("Q4")
    rot = device.calibration.rotation_time

    t = 0.0
    steps = [_rotate("Q2", "x", math.pi, t, rot)]
    t += rot
    s = _intra(device, m2, W_STATE_EXPONENT, t, scale,
               angle=math.atan(math.sqrt(2.0)))
    steps.append(s)
    t = s.end
    g_v = min(
        rate_for_full_swap(_inter_time(device, m2.cavity_id, m3.cavity_id)),
        rate_for_full_swap(_inter_time(device, m2.cavity_id, m4.cavity_id)),
    ) / scale
    t_v = options.get("v_time_ns", 1e3 / (4.0 * math.sqrt(2.0) * g_v))
    steps.append(SequenceStep("v_iswap", t, t_v, {
        "source": m2.cavity_id, "targets": [m3.cavity_id, m4.cavity_id],
        "rate_mhz": g_v, "detuning_khz": options.get("detuning_khz", 0.0),
    }))
    t += t_v
    b3 = _intra(device, m3, 1.0, t, scale)
    b4 = _intra(device, m4, 1.0, t, scale)
    t_end = t + max(b3.duration, b4.duration)
    steps.append(_intra(device, m3, 1.0, t_end - b3.duration, scale))
    steps.append(_intra(device, m4, 1.0, t_end - b4.duration, scale))
    steps.append(_rotate("Q3", "z", -HALF_PI, t_end))
    steps.append(_rotate("Q4", "z", -HALF_PI, t_end))
    steps.append(_measure(["Q2", "Q3", "Q4"], t_end, device))
    return PulseSchedule("v_swap_w_state", _label(device), tuple(steps),
                         options=options)


def _ghz(device: DeviceConfig, options: dict) -> PulseSchedule:
    """Bell(Q2,C3) + cavity-conditioned pi on Q3 + routing C3 -> Q4."""
    m2 = device.module_for_qubit("Q2")
    m3 = device.module_for_qubit("Q3")
    m4 = device.module_for_qubit("Q4")
    rot = device.calibration.rotation_time

    t = 0.0
    steps = [_rotate("Q2", "x", math.pi, t, rot)]
    t += rot
    s = _intra(device, m2, 0.5, t)
    steps.append(s)
    t = s.end
    t23 = _inter_time(device, m2.cavity_id, m3.cavity_id)
    steps.append(_inter((m2.cavity_id, m3.cavity_id), 1.0, t, t23))
    t += t23
    # photon-number selective pi: slow conditional pulse, duration 2*pi/|chi|
    t_cnot = options.get("cnot_time_ns", 2e3 * math.pi / abs(m3.chi_qc))
    steps.append(SequenceStep("selective_pi", t, t_cnot, {
        "qubit": m3.qubit_id, "cavity": m3.cavity_id,
    }))
    t += t_cnot
    steps.append(_rotate("Q2", "x", math.pi, t, rot))
    t += rot
    t34 = _inter_time(device, m3.cavity_id, m4.cavity_id)
    steps.append(_inter((m3.cavity_id, m4.cavity_id), 1.0, t, t34))
    t += t34
    s = _intra(device, m4, 1.0, t)
    steps.append(s)
    t = s.end
    steps.append(_rotate("Q2", "z", HALF_PI, t))
    steps.append(_measure(["Q2", "Q3", "Q4"], t, device))
    return PulseSchedule("ghz", _label(device), tuple(steps), options=options)


def _coherent_swap_sweep(device: DeviceConfig, options: dict) -> PulseSchedule:
    """Displace one cavity, pump the pair, watch both amplitudes (Fig.-2 style)."""
    c_i, c_j = options.get("pair", ("C2", "C4"))
    alpha = options.get("alpha", 1.0)
    duration = options.get("inter_time_ns", 3000.0)
    detuning = options.get("detuning_khz", 0.0)
    rate = options.get(
        "rate_mhz", rate_for_full_swap(_inter_time(device, c_i, c_j)))
    steps = [
        SequenceStep("displace_cavity", 0.0, 0.0, {
            "cavity": c_j, "amplitude_re": float(alpha), "amplitude_im": 0.0,
        }),
        SequenceStep("inter_iswap", 0.0, duration, {
            "pair": [c_i, c_j], "exponent": duration * rate / 250.0,
            "rate_mhz": rate, "detuning_khz": detuning,
        }),
    ]
    axes = {}
    if "detunings_khz" in options:
        axes["detuning_khz"] = list(options["detunings_khz"])
    if "durations_ns" in options:
        axes["duration_ns"] = list(options["durations_ns"])
    return PulseSchedule("coherent_swap_sweep", _label(device), tuple(steps),
                         sweep_axes=axes, options=options)


def _chevron_tuneup(device: DeviceConfig, options: dict) -> PulseSchedule:
    """Intra-module exchange vs (sideband detuning, duration), Rabi-like chevron."""
    module = device.module_for_qubit(options.get("module", "Q2"))
    duration = options.get("duration_ns", 2.0 * module.intra_swap_time)
    detuning = options.get("detuning_khz", 0.0)
    rot = device.calibration.rotation_time
    rate = rate_for_full_swap(module.intra_swap_time)
    steps = [
        _rotate(module.qubit_id, "x", math.pi, 0.0, rot),
        SequenceStep("intra_iswap", rot, duration, {
            "qubit": module.qubit_id, "cavity": module.cavity_id,
            "exponent": duration * rate / 250.0, "rate_mhz": rate,
            "detuning_khz": detuning,
        }),
    ]
    axes = {}
    if "detunings_khz" in options:
        axes["detuning_khz"] = list(options["detunings_khz"])
    if "durations_ns" in options:
        axes["duration_ns"] = list(options["durations_ns"])
    return PulseSchedule("chevron_tuneup", _label(device), tuple(steps),
                         sweep_axes=axes, options=options)


# --- canonical target states -------------------------------------------------------


def ideal_target(protocol: str, n_qubits: int | None = None):
    """Canonical pure target for tomography comparisons (qubit register order)."""
    import numpy as np

    if protocol in ("bell", "parallel_bell"):
        v = np.zeros(4, dtype=complex)
        v[1] = v[2] = 1.0 / math.sqrt(2.0)
        return v
    if protocol == "v_swap_w_state":
        v = np.zeros(8, dtype=complex)
        v[4] = v[2] = v[1] = 1.0 / math.sqrt(3.0)
        return v
    if protocol == "ghz":
        v = np.zeros(8, dtype=complex)
        v[0] = v[7] = 1.0 / math.sqrt(2.0)
        return v
    return None
