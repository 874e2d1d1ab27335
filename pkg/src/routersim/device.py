"""Device description, frequency-plan validation, and analytic estimates.

Everything here works in linear (non-angular) frequency units: GHz for mode
frequencies, MHz for couplings, us/ns for times. Angular factors belong to
the solver.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace

from .errors import (
    DegenerateDetuningError,
    DomainError,
    InputError,
    InvariantViolation,
    TopologyError,
)
from .snail import SnailCircuit, expand

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover -环境 dependent
    import tomli as tomllib

MODE_KINDS = ("snail", "waveguide", "cavity", "qubit", "readout")
T2_SOURCES = ("ramsey", "echo", "photon-swap", "probe-decay")

#: Per-call coherence selection for cavities that store both variants.
POLICY_PHOTON_SWAP = "photon-swap"
POLICY_PROBE_DECAY = "probe-decay"

DISPERSIVE_GUARD = 10.0  # require |Delta| >= guard * g

INTRA_SWAP_TARGET_INFIDELITY = 0.06  # Supp.-Method-2 default rule: T = 0.06 / Gbar2


@dataclass(frozen=True)
class ModeSpec:
    """One oscillator or qubit mode.

    ``t1``/``t2`` are the primary coherence pair (photon-swap values for
    cavities that have both); ``t1_probe``/``t2_probe`` optionally keep the
    probe-decay variants. ``t2_echo`` stores a Hahn-echo time for qubits.
    """

    id: str
    kind: str
    frequency: float  # GHz
    t1: float  # us
    t2: float  # us
    t2_source: str
    anharmonicity: float | None = None  # MHz, qubits only
    dim: int = 0  # 0 -> kind default
    t1_probe: float | None = None
    t2_probe: float | None = None
    t2_echo: float | None = None

    def __post_init__(self):
        if self.kind not in MODE_KINDS:
            raise InvariantViolation(f"mode {self.id}: unknown kind {self.kind!r}")
        if self.frequency <= 0:
            raise InvariantViolation(f"mode {self.id}: frequency must be > 0")
        if self.t1 <= 0:
            raise InvariantViolation(f"mode {self.id}: T1 must be > 0")
        if not 0 < self.t2 <= 2.0 * self.t1 * (1 + 1e-12):
            raise InvariantViolation(
                f"mode {self.id}: T2 must satisfy 0 < T2 <= 2*T1 "
                f"(T1={self.t1}, T2={self.t2})"
            )
        if self.t2_source not in T2_SOURCES:
            raise InvariantViolation(
                f"mode {self.id}: t2_source {self.t2_source!r} not in {T2_SOURCES}"
            )
        if self.t1_probe is not None and self.t2_probe is not None:
            if not 0 < self.t2_probe <= 2.0 * self.t1_probe * (1 + 1e-12):
                raise InvariantViolation(
                    f"mode {self.id}: probe-decay pair violates T2 <= 2*T1"
                )
        default_dim = 2 if self.kind in ("qubit",) else 3
        object.__setattr__(self, "dim", self.dim or default_dim)
        if self.dim < 2:
            raise InvariantViolation(f"mode {self.id}: dim must be >= 2")

    def coherences(self, policy: str = POLICY_PHOTON_SWAP) -> tuple[float, float]:
        """(T1, T2) under the given selection policy (falls back to primary)."""
        if policy == POLICY_PROBE_DECAY and self.t1_probe is not None:
            return self.t1_probe, self.t2_probe
        return self.t1, self.t2


@dataclass(frozen=True)
class CouplingEdge:
    """Bare bilinear coupling g (MHz) between two modes."""

    mode_a: str
    mode_b: str
    g: float

    def __post_init__(self):
        if self.mode_a == self.mode_b:
            raise InvariantViolation("edge endpoints must differ")
        if self.g <= 0:
            raise InvariantViolation(f"edge {self.mode_a}-{self.mode_b}: g must be > 0")


@dataclass(frozen=True)
class QubitModuleParams:
    """One qubit module: qubit + communication cavity (+ readout label).

    ``readout_id`` is a free label; readout modes are represented only through
    the measurement-fidelity confusion model.
    """

    qubit_id: str
    cavity_id: str
    readout_id: str | None
    chi_qc: float  # MHz dispersive shift
    measurement_fidelity: float
    intra_swap_time: float  # ns, full qubit-cavity iSWAP

    def __post_init__(self):
        if not 0.5 < self.measurement_fidelity <= 1.0:
            raise InvariantViolation(
                f"module {self.qubit_id}: measurement_fidelity must be in (0.5, 1]"
            )
        if self.intra_swap_time <= 0:
            raise InvariantViolation(
                f"module {self.qubit_id}: intra_swap_time must be > 0"
            )


@dataclass(frozen=True)
class Calibration:
    """Measured gate times and pump-detuning metadata (Supp. Table 3 style)."""

    iswap_times: dict[tuple[str, str], float] = field(default_factory=dict)  # ns
    bell_iswap_time: float | None = None  # ns, the bell-experiment C2-C4 time
    parallel_iswap_time: float | None = None  # ns, multi-tone (slowed) gate time
    measured_detunings: dict[tuple[str, str], float] = field(default_factory=dict)  # kHz
    measurement_time: float = 2000.0  # ns
    rotation_time: float = 0.0  # ns, single-qubit pulses (ideal by default)

    def iswap_time(self, c_i: str, c_j: str) -> float | None:
        return self.iswap_times.get(_pair_key(c_i, c_j))


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class DeviceConfig:
    """The single source of physical truth; immutable after load."""

    modes: tuple[ModeSpec, ...]
    edges: tuple[CouplingEdge, ...]
    modules: tuple[QubitModuleParams, ...]
    snail: SnailCircuit
    g_sss_override: float | None = None
    calibration: Calibration = field(default_factory=Calibration)

    def __post_init__(self):
        ids = [m.id for m in self.modes]
        if len(set(ids)) != len(ids):
            raise InvariantViolation("mode ids must be unique")
        self._check_topology()

    # -- lookups --------------------------------------------------------------

    def mode(self, mode_id: str) -> ModeSpec:
        for m in self.modes:
            if m.id == mode_id:
                return m
        raise DomainError(f"unknown mode {mode_id!r}")

    def modes_of_kind(self, kind: str) -> list[ModeSpec]:
        return [m for m in self.modes if m.kind == kind]

    def module_for_qubit(self, qubit_id: str) -> QubitModuleParams:
        for mod in self.modules:
            if mod.qubit_id == qubit_id:
                return mod
        raise DomainError(f"no module with qubit {qubit_id!r}")

    def module_for_cavity(self, cavity_id: str) -> QubitModuleParams:
        for mod in self.modules:
            if mod.cavity_id == cavity_id:
                return mod
        raise DomainError(f"no module with cavity {cavity_id!r}")

    def edge(self, mode_a: str, mode_b: str) -> CouplingEdge:
        for e in self.edges:
            if {e.mode_a, e.mode_b} == {mode_a, mode_b}:
                return e
        raise DomainError(f"no edge between {mode_a!r} and {mode_b!r}")

    def snail_mode(self) -> ModeSpec:
        snails = self.modes_of_kind("snail")
        if len(snails) != 1:
            raise TopologyError("device must contain exactly one SNAIL mode")
        return snails[0]

    def waveguide_for_cavity(self, cavity_id: str) -> ModeSpec:
        ws = [
            e for e in self.edges
            if cavity_id in (e.mode_a, e.mode_b)
            and self._other_kind(e, cavity_id) == "waveguide"
        ]
        if len(ws) != 1:
            raise TopologyError(f"cavity {cavity_id} must touch exactly one waveguide")
        e = ws[0]
        return self.mode(e.mode_a if e.mode_b == cavity_id else e.mode_b)

    def _other_kind(self, e: CouplingEdge, mode_id: str) -> str:
        other = e.mode_a if e.mode_b == mode_id else e.mode_b
        return self.mode(other).kind

    def _check_topology(self):
        snail = self.snail_mode()
        for e in self.edges:
            kinds = {self.mode(e.mode_a).kind, self.mode(e.mode_b).kind}
            if kinds not in ({"snail", "waveguide"}, {"waveguide", "cavity"}):
                raise TopologyError(
                    f"edge {e.mode_a}-{e.mode_b}: only snail-waveguide and "
                    f"waveguide-cavity couplings are allowed"
                )
        for cav in self.modes_of_kind("cavity"):
            n_wg = sum(
                1 for e in self.edges
                if cav.id in (e.mode_a, e.mode_b)
                and self._other_kind(e, cav.id) == "waveguide"
            )
            if n_wg != 1:
                raise TopologyError(
                    f"cavity {cav.id} is coupled to {n_wg} waveguides (needs exactly 1)"
                )
        for wg in self.modes_of_kind("waveguide"):
            n_s = sum(
                1 for e in self.edges
                if wg.id in (e.mode_a, e.mode_b) and snail.id in (e.mode_a, e.mode_b)
            )
            if n_s != 1:
                raise TopologyError(
                    f"waveguide {wg.id} must have exactly one SNAIL edge (has {n_s})"
                )

    def g_sss(self) -> float:
        """Third-order strength in MHz: the override, else the circuit expansion."""
        if self.g_sss_override is not None:
            return self.g_sss_override
        return expand(self.snail).g_sss


# --- file loading -------------------------------------------------------------

_MODE_KEYS = {
    "id", "kind", "frequency", "t1", "t2", "t2_source", "anharmonicity",
    "dim", "t1_probe", "t2_probe", "t2_echo",
}
_EDGE_KEYS = {"mode_a", "mode_b", "g"}
_MODULE_KEYS = {
    "qubit_id", "cavity_id", "readout_id", "chi_qc", "measurement_fidelity",
    "intra_swap_time",
}
_SNAIL_KEYS = {"l_j", "c", "alpha", "n_large", "flux", "convention"}
_CAL_KEYS = {
    "iswap_times", "bell_iswap_time", "parallel_iswap_time",
    "measured_detunings", "measurement_time", "rotation_time",
}
_TOP_KEYS = {"spec_version", "modes", "edges", "modules", "snail", "calibration",
             "g_sss_override"}


def _reject_unknown(table: dict, allowed: set, where: str):
    unknown = set(table) - allowed
    if unknown:
        raise InputError(f"unknown keys {sorted(unknown)} in {where}")


def load_device(path) -> DeviceConfig:
    """Load and validate a device file (TOML, schema version 1).

    Raises InputError for unreadable/malformed files or unknown keys, and
    InvariantViolation/TopologyError when a validated quantity is out of range.
    """
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except OSError as exc:
        raise InputError(f"cannot read device file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"malformed device file {path}: {exc}") from exc

    _reject_unknown(raw, _TOP_KEYS, "device file")
    if raw.get("spec_version") != 1:
        raise InputError("device file must declare spec_version = 1")

    modes = []
    for entry in raw.get("modes", []):
        _reject_unknown(entry, _MODE_KEYS, f"mode {entry.get('id', '?')}")
        modes.append(ModeSpec(**entry))

    edges = []
    for entry in raw.get("edges", []):
        _reject_unknown(entry, _EDGE_KEYS, "edges")
        edges.append(CouplingEdge(**entry))

    snail_tbl = dict(raw.get("snail", {}))
    _reject_unknown(snail_tbl, _SNAIL_KEYS, "snail")
    snail = SnailCircuit(
        l_j=snail_tbl["l_j"],
        c=snail_tbl["c"],
        alpha=snail_tbl["alpha"],
        n_large=snail_tbl.get("n_large", 3),
        flux=snail_tbl["flux"],
        convention=snail_tbl.get("convention", "as-captioned"),
    )

    cal_tbl = dict(raw.get("calibration", {}))
    _reject_unknown(cal_tbl, _CAL_KEYS, "calibration")
    iswap_times = {
        _pair_key(*k.split("-")): float(v)
        for k, v in cal_tbl.get("iswap_times", {}).items()
    }
    detunings = {
        _pair_key(*k.split("-")): float(v)
        for k, v in cal_tbl.get("measured_detunings", {}).items()
    }
    calibration = Calibration(
        iswap_times=iswap_times,
        bell_iswap_time=cal_tbl.get("bell_iswap_time"),
        parallel_iswap_time=cal_tbl.get("parallel_iswap_time"),
        measured_detunings=detunings,
        measurement_time=cal_tbl.get("measurement_time", 2000.0),
        rotation_time=cal_tbl.get("rotation_time", 0.0),
    )

    # Assemble modules; derive intra_swap_time from the 94%-average rule when absent.
    mode_by_id = {m.id: m for m in modes}
    modules = []
    for entry in raw.get("modules", []):
        _reject_unknown(entry, _MODULE_KEYS, f"module {entry.get('qubit_id', '?')}")
        entry = dict(entry)
        if "intra_swap_time" not in entry:
            q = mode_by_id.get(entry["qubit_id"])
            c = mode_by_id.get(entry["cavity_id"])
            if q is None or c is None:
                raise InputError(
                    f"module {entry.get('qubit_id')}: unknown qubit or cavity id"
                )
            gbar = 0.5 * (1.0 / q.t2 + 1.0 / c.t2)  # 1/us
            entry["intra_swap_time"] = 1e3 * INTRA_SWAP_TARGET_INFIDELITY / gbar
        entry.setdefault("readout_id", None)
        modules.append(QubitModuleParams(**entry))

    device = DeviceConfig(
        modes=tuple(modes),
        edges=tuple(edges),
        modules=tuple(modules),
        snail=snail,
        g_sss_override=raw.get("g_sss_override"),
        calibration=calibration,
    )
    for mod in device.modules:
        device.mode(mod.qubit_id)
        device.mode(mod.cavity_id)
    return device


def paper_device_path():
    """Path of the bundled device file transcribed from the supplement tables."""
    from importlib.resources import files

    return files("routersim").joinpath("data/paper_device.toml")


def load_paper_device() -> DeviceConfig:
    return load_device(paper_device_path())


# --- frequency plan ------------------------------------------------------------


@dataclass(frozen=True)
class PlanViolation:
    rule: str
    modes: tuple[str, ...]
    detail: str


@dataclass(frozen=True)
class PlanReport:
    ok: bool
    violations: tuple[PlanViolation, ...]
    max_pump_frequency: float  # GHz
    cutoff_frequency: float  # GHz, lowest router-family mode


def validate_frequency_plan(
    device: DeviceConfig,
    mode_tolerance: float = 1.0,  # MHz, rule (a)
    difference_tolerance: float = 5.0,  # MHz, rule (b)
    min_spacing: float = 100.0,  # MHz, rule (d)
) -> PlanReport:
    """Check the frequency-plan design rules; violations are report entries.

    (a) mode frequencies pairwise distinct; (b) cavity-pair difference
    frequencies pairwise distinct; (c) every difference frequency below the
    lowest router-family (snail/waveguide/cavity) mode; (d) non-adjacent
    cavity-waveguide spacing at least ``min_spacing``.
    """
    violations = []
    modes = sorted(device.modes, key=lambda m: m.id)

    for i, a in enumerate(modes):
        for b in modes[i + 1:]:
            gap = abs(a.frequency - b.frequency) * 1e3
            if gap < mode_tolerance:
                violations.append(PlanViolation(
                    "a:mode-collision", (a.id, b.id),
                    f"frequencies within {gap:.3f} MHz",
                ))

    cavities = sorted(device.modes_of_kind("cavity"), key=lambda m: m.id)
    diffs = []
    for i, a in enumerate(cavities):
        for b in cavities[i + 1:]:
            diffs.append(((a.id, b.id), abs(a.frequency - b.frequency)))
    for i, (pa, da) in enumerate(diffs):
        for pb, db in diffs[i + 1:]:
            gap = abs(da - db) * 1e3
            if gap < difference_tolerance:
                violations.append(PlanViolation(
                    "b:difference-collision", pa + pb,
                    f"difference frequencies within {gap:.3f} MHz",
                ))

    router_kinds = ("snail", "waveguide", "cavity")
    router_modes = [m for m in modes if m.kind in router_kinds]
    cutoff = min(m.frequency for m in router_modes) if router_modes else math.inf
    max_pump = max((d for _, d in diffs), default=0.0)
    for pair, d in diffs:
        if d >= cutoff:
            violations.append(PlanViolation(
                "c:pump-above-band", pair,
                f"difference {d:.4f} GHz >= lowest mode {cutoff:.4f} GHz",
            ))

    waveguides = sorted(device.modes_of_kind("waveguide"), key=lambda m: m.id)
    for cav in cavities:
        adjacent = device.waveguide_for_cavity(cav.id).id
        for wg in waveguides:
            if wg.id == adjacent:
                continue
            gap = abs(cav.frequency - wg.frequency) * 1e3
            if gap < min_spacing:
                violations.append(PlanViolation(
                    "d:cavity-waveguide-spacing", (cav.id, wg.id),
                    f"non-adjacent spacing {gap:.1f} MHz < {min_spacing:.0f} MHz",
                ))

    violations.sort(key=lambda v: (v.rule, v.modes))
    return PlanReport(
        ok=not violations,
        violations=tuple(violations),
        max_pump_frequency=max_pump,
        cutoff_frequency=cutoff,
    )


# --- hybridization and effective couplings -------------------------------------


@dataclass(frozen=True)
class ChainRatio:
    mode_a: str
    mode_b: str
    ratio: float  # g/|Delta|, dimensionless
    delta_sign: int  # sign of omega_a - omega_b


@dataclass(frozen=True)
class EffectiveCoupling:
    c_i: str
    c_j: str
    g_eff: float  # MHz (signed by g_sss)
    chain: tuple[ChainRatio, ...]


def hybridization_ratio(device: DeviceConfig, edge: CouplingEdge) -> ChainRatio:
    """g/|Delta| for one edge; errors when the dispersive assumption breaks."""
    wa = device.mode(edge.mode_a).frequency * 1e3  # MHz
    wb = device.mode(edge.mode_b).frequency * 1e3
    delta = wa - wb
    if abs(delta) < DISPERSIVE_GUARD * edge.g:
        raise DegenerateDetuningError(
            f"edge {edge.mode_a}-{edge.mode_b}: |Delta|={abs(delta):.2f} MHz "
            f"< {DISPERSIVE_GUARD:.0f} x g={edge.g:.2f} MHz"
        )
    return ChainRatio(
        mode_a=edge.mode_a,
        mode_b=edge.mode_b,
        ratio=edge.g / abs(delta),
        delta_sign=1 if delta > 0 else -1,
    )


def effective_cavity_coupling(device: DeviceConfig, c_i: str, c_j: str) -> EffectiveCoupling:
    """Effective cavity-cavity three-wave strength through the dilution chain.

    g_eff = 6 * g_sss * (g/D)_{w_i s} (g/D)_{w_j s} (g/D)_{c_i w_i} (g/D)_{c_j w_j}
    """
    if c_i == c_j:
        raise DomainError("cavity pair must be distinct")
    snail = device.snail_mode()
    chain = []
    for cav in (c_i, c_j):
        wg = device.waveguide_for_cavity(cav)
        chain.append(hybridization_ratio(device, device.edge(wg.id, snail.id)))
        chain.append(hybridization_ratio(device, device.edge(cav, wg.id)))
    g_eff = 6.0 * device.g_sss()
    for r in chain:
        g_eff *= r.ratio
    key = sorted([c_i, c_j])
    return EffectiveCoupling(c_i=key[0], c_j=key[1], g_eff=g_eff, chain=tuple(chain))


# --- coherence arithmetic -------------------------------------------------------


def pure_dephasing_time(t1: float, t2: float) -> float:
    """T_phi from 1/T2 = 1/(2 T1) + 1/T_phi; math.inf when T2 = 2 T1."""
    if t1 <= 0 or t2 <= 0:
        raise DomainError("T1 and T2 must be positive")
    if t2 > 2.0 * t1 * (1 + 1e-9):
        raise DomainError(f"T2={t2} exceeds 2*T1={2 * t1}")
    rate = 1.0 / t2 - 1.0 / (2.0 * t1)
    if rate <= 1e-9 / t2:  # T2 = 2 T1 within 1e-9 relative
        return math.inf
    return 1.0 / rate


def average_decoherence_rate(
    device: DeviceConfig, mode_a: str, mode_b: str,
    policy: str = POLICY_PHOTON_SWAP,
) -> float:
    """Gbar2 = (1/T2_a + 1/T2_b)/2 in 1/us."""
    _, t2a = device.mode(mode_a).coherences(policy)
    _, t2b = device.mode(mode_b).coherences(policy)
    return 0.5 * (1.0 / t2a + 1.0 / t2b)


def estimate_iswap_fidelity(
    device: DeviceConfig, c_i: str, c_j: str, t_gate: float,
    policy: str = POLICY_PHOTON_SWAP,
) -> float:
    """F ~= 1 - Gbar2 * T_gate (t_gate in ns), clamped to [0, 1]."""
    gbar = average_decoherence_rate(device, c_i, c_j, policy)
    f = 1.0 - gbar * (t_gate / 1e3)
    return min(1.0, max(0.0, f))


def hybridized_decay_envelope(
    device: DeviceConfig, c_i: str, c_j: str, t: float,
    policy: str = POLICY_PHOTON_SWAP,
) -> float:
    """exp(-Gbar2 t) amplitude factor for a photon shared between two modes (t in us)."""
    return math.exp(-average_decoherence_rate(device, c_i, c_j, policy) * t)
