"""Pulse-level simulator for a SNAIL-based microwave quantum state router."""

from .device import (
    Calibration,
    CouplingEdge,
    DeviceConfig,
    EffectiveCoupling,
    ModeSpec,
    PlanReport,
    QubitModuleParams,
    effective_cavity_coupling,
    estimate_iswap_fidelity,
    hybridization_ratio,
    hybridized_decay_envelope,
    load_device,
    load_paper_device,
    pure_dephasing_time,
    validate_frequency_plan,
)
from .hilbert import HilbertSpace
from .lindblad import (
    CollapseOperator,
    DensityMatrix,
    HamiltonianModel,
    apply_exchange_unitary,
    build_space,
    collapse_operators,
    expectation,
    integrate,
)
from .protocols import compile_protocol
from .pulses import (
    EffectiveDriveTerm,
    Envelope,
    PumpTone,
    drag_correct,
    eta_from_drive,
    gate_time,
    stark_detuning,
)
from .schedule import PulseSchedule, SequenceStep
from .simulate import kerr_detuning_calibration, run_schedule, simulate_protocol
from .snail import (
    SnailCircuit,
    expand,
    frequency_vs_flux,
    kerr_free_flux,
    potential_minimum,
)

__version__ = "0.1.0"
