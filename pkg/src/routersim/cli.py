"""Command-line entry point.

Exit codes: 0 success, 1 domain violation, 2 I/O problem, 3 numeric failure.
The default device is $ROUTERSIM_DEVICE, falling back to the bundled file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import manifest as mf
from .device import (
    POLICY_PHOTON_SWAP,
    DeviceConfig,
    effective_cavity_coupling,
    estimate_iswap_fidelity,
    load_device,
    paper_device_path,
    validate_frequency_plan,
)
from .errors import DomainError, InputError, NumericError, RouterSimError
from .leakage import build_leakage_model, calibrate_uncorrected_leakage, leakage_report
from .protocols import PROTOCOLS, compile_protocol, ideal_target
from .pulses import Envelope, PumpTone, drag_correct
from .simulate import run_schedule, state_fidelity_to
from .tomography import (
    ConfusionMatrix,
    all_settings,
    bootstrap_fidelity,
    fidelity,
    reconstruct,
    sample_measurements,
)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


def _device_path(args) -> str:
    if args.device:
        return args.device
    env = os.environ.get("ROUTERSIM_DEVICE")
    if env:
        return env
    return str(paper_device_path())


def _load(args) -> DeviceConfig:
    return load_device(_device_path(args))


def _parse_options(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise InputError(f"--option needs key=value, got {item!r}")
        key, val = item.split("=", 1)
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def _parse_axis(spec: str) -> tuple[str, list[float]]:
    """name=start:stop:steps (inclusive endpoints)."""
    if "=" not in spec:
        raise InputError(f"--axis needs name=start:stop:steps, got {spec!r}")
    name, rng = spec.split("=", 1)
    parts = rng.split(":")
    if len(parts) != 3:
        raise InputError(f"axis range must be start:stop:steps, got {rng!r}")
    start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
    if steps < 1:
        raise InputError("axis needs at least one step")
    return name, list(np.linspace(start, stop, steps))


def _apply_strict(strict: bool):
    if strict:
        # fixed reduction order is already the evaluation order; pin BLAS threads
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, "1")


# --- subcommands ----------------------------------------------------------------


def cmd_validate(args) -> int:
    device = _load(args)
    report = validate_frequency_plan(device)
    print(f"frequency plan: {'PASS' if report.ok else 'FAIL'}")
    print(f"  max pump {report.max_pump_frequency:.4f} GHz, "
          f"lowest router mode {report.cutoff_frequency:.4f} GHz")
    for v in report.violations:
        print(f"  [{v.rule}] {'-'.join(v.modes)}: {v.detail}")
    return EXIT_OK if report.ok else EXIT_DOMAIN


def cmd_couplings(args) -> int:
    device = _load(args)
    cavities = sorted(m.id for m in device.modes_of_kind("cavity"))
    rows = []
    for i, a in enumerate(cavities):
        for b in cavities[i + 1:]:
            eff = effective_cavity_coupling(device, a, b)
            t_cal = device.calibration.iswap_time(a, b)
            if t_cal is not None:
                t_gate, src = t_cal, "calibration"
            elif abs(eff.g_eff) > 0:
                t_gate, src = 250.0 / abs(eff.g_eff), "eta=1 estimate"
            else:
                t_gate, src = math.inf, "no coupling"
            f_est = (estimate_iswap_fidelity(device, a, b, t_gate)
                     if math.isfinite(t_gate) else float("nan"))
            rows.append((a, b, eff.g_eff, t_gate, f_est, src))
    print(f"{'pair':10s} {'g_eff_MHz':>12s} {'t_gate_ns':>12s} {'F_est':>8s}  source")
    fs = []
    for a, b, g, t, f_est, src in rows:
        t_str = f"{t:12.1f}" if math.isfinite(t) else "         inf"
        f_str = f"{f_est:8.3f}" if not math.isnan(f_est) else "     nan"
        print(f"{a+'-'+b:10s} {g:12.6f} {t_str} {f_str}  {src}")
        if not math.isnan(f_est):
            fs.append(f_est)
    if fs:
        print(f"{'':10s} {'':12s} {'':12s} best {max(fs):.3f} worst {min(fs):.3f} "
              f"mean {sum(fs)/len(fs):.3f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "couplings.csv", "w", encoding="utf-8") as f:
            f.write("pair,g_eff_mhz,t_gate_ns,f_est,source\n")
            for a, b, g, t, f_est, src in rows:
                f.write(f"{a}-{b},{g:.9g},{t:.9g},{f_est:.9g},{src}\n")
    return EXIT_OK


def cmd_compile(args) -> int:
    device = _load(args)
    options = _parse_options(args.option)
    schedule = compile_protocol(args.protocol, device, options)
    text = schedule.to_json()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.protocol}.schedule.json").write_text(text)
        print(f"wrote {out / (args.protocol + '.schedule.json')}")
    else:
        print(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    device = _load(args)
    device_path = _device_path(args)
    options = _parse_options(args.option)
    out = Path(args.out or f"runs/{args.protocol}")
    _apply_strict(args.strict_deterministic)

    schedule = compile_protocol(args.protocol, device, options)
    artifacts = ["schedule.json", "trajectory.csv", "final_state.json",
                 "final_state.bin"]
    has_tomography = ideal_target(schedule.protocol) is not None
    if has_tomography:
        artifacts += ["tomography.csv", "reduced_state.json", "fidelity.json"]
    manifest = mf.RunManifest(
        protocol=args.protocol,
        device_path=str(device_path),
        device_sha256=mf.sha256_file(device_path),
        options=options,
        seed=args.seed,
        tolerance=args.tol,
        strict_deterministic=args.strict_deterministic,
        artifacts=artifacts,
    )
    manifest.write(out)

    try:
        result = run_schedule(
            schedule, device, lossless=args.lossless, tol=args.tol,
            sample_dt_ns=options.get("sample_dt_ns"),
        )
        (out / "schedule.json").write_text(schedule.to_json())
        mf.write_trajectory_csv(out / "trajectory.csv", result.times_ns,
                                result.observables)
        mf.write_state_json(out / "final_state.json", result.space,
                            result.final_state.matrix,
                            result.final_state.time_ns)
        mf.write_state_binary(out / "final_state.bin", result.space,
                              result.final_state.matrix)

        summary = {
            "protocol": args.protocol,
            "total_duration_ns": schedule.total_duration,
            "trace_drift": result.trace_drift,
            "hermiticity_residue": result.hermiticity_residue,
            "min_eigenvalue": result.min_eigenvalue,
            "seed": args.seed,
        }
        if has_tomography and result.reduced_qubit_state is not None:
            target = ideal_target(schedule.protocol)
            n_q = len(result.measured_qubits)
            direct_f = state_fidelity_to(result, target)
            if args.readout_error:
                confusion = ConfusionMatrix.symmetric([
                    device.module_for_qubit(q).measurement_fidelity
                    for q in result.measured_qubits])
            else:
                confusion = ConfusionMatrix.perfect(n_q)
            settings = all_settings(n_q, args.shots)
            records = sample_measurements(result.reduced_qubit_state, settings,
                                          confusion, args.seed)
            _, projected = reconstruct(records, n_q)
            target_dm = np.outer(target, target.conj())
            tomo_f = fidelity(projected, target_dm)
            boot = bootstrap_fidelity(records, target, n_q,
                                      n_boot=options.get("n_boot", 200),
                                      seed=args.seed + 1)
            mf.write_tomography_csv(out / "tomography.csv", records)
            from .hilbert import HilbertSpace

            qspace = HilbertSpace(tuple((q, 2) for q in result.measured_qubits))
            mf.write_state_json(out / "reduced_state.json", qspace, projected)
            summary.update({
                "fidelity_direct": direct_f,
                "fidelity_tomography": tomo_f,
                "fidelity_sigma": boot.sigma,
                "measured_qubits": result.measured_qubits,
                "shots": args.shots,
                "readout_error": bool(args.readout_error),
            })
            (out / "fidelity.json").write_text(json.dumps({
                "direct": direct_f, "tomography": tomo_f,
                "sigma": boot.sigma, "target": schedule.protocol,
            }, indent=2))
            print(f"{args.protocol}: F(direct)={direct_f:.4f} "
                  f"F(tomo)={tomo_f:.4f} +- {boot.sigma:.4f}")
        else:
            for name in sorted(result.observables):
                if name.startswith("n(Q"):
                    print(f"{args.protocol}: final {name} = "
                          f"{result.observables[name][-1].real:.4f}")
        mf.finalize_results(out, summary)
        print(f"results in {out}")
        return EXIT_OK
    except RouterSimError:
        for name in manifest.artifacts:  # partial outputs removed on failure
            p = out / name
            if p.exists():
                p.unlink()
        raise


def cmd_sweep(args) -> int:
    device = _load(args)
    options = _parse_options(args.option)
    axes = dict(_parse_axis(a) for a in args.axis or [])
    out = Path(args.out or f"runs/{args.protocol}_sweep")
    _apply_strict(args.strict_deterministic)
    manifest = mf.RunManifest(
        protocol=f"{args.protocol}:sweep",
        device_path=str(_device_path(args)),
        device_sha256=mf.sha256_file(_device_path(args)),
        options={**options, "axes": {k: [v[0], v[-1], len(v)] for k, v in axes.items()}},
        seed=args.seed,
        tolerance=args.tol,
        strict_deterministic=args.strict_deterministic,
        artifacts=["sweep.csv"],
    )
    manifest.write(out)

    from .sweeps import run_sweep

    sweep = run_sweep(args.protocol, device, axes, options,
                      tol=args.tol, workers=(1 if args.strict_deterministic
                                             else args.workers))
    mf.write_sweep_csv(out / "sweep.csv", sweep.axis_names, sweep.axes,
                       sweep.grid, sweep.value_name)
    mf.finalize_results(out, {"value": sweep.value_name,
                              "extremum": float(np.nanmax(sweep.grid))})
    print(f"sweep grid {sweep.grid.shape} ({sweep.value_name}) -> {out}")
    return EXIT_OK


def cmd_leakage(args) -> int:
    device = _load(args)
    pair = tuple((args.pair or "C1,C2").split(","))
    out = Path(args.out or "runs/leakage")
    envelope = Envelope("gaussian", amplitude=1.0, duration=args.duration,
                        ramp_sigma=args.duration / 6.0)
    tone = PumpTone(pair=pair, pump_frequency=abs(
        device.mode(pair[0]).frequency - device.mode(pair[1]).frequency),
        detuning=0.0, envelope=envelope)
    model = build_leakage_model(device, tone)
    denom = model.delta_2  # cancel the c1->w2 branch
    corrected = drag_correct(envelope, denom, 0.0)
    scale = args.strength or calibrate_uncorrected_leakage(model, envelope)
    rows = []
    for label, env, drag in (("uncorrected", envelope, False),
                             ("drag", corrected, True)):
        rep = leakage_report(model, env, with_drag=drag, eta_scale=scale)
        rows.append({
            "setting": f"{label} (eta_scale={scale})",
            "peak_leakage": rep.total_peak,
            "residual_leakage": rep.total_residual,
            "transfer_fidelity": rep.transfer_fidelity,
            "phase_error": rep.phase_error,
        })
        print(f"{label:12s} peak={rep.total_peak:.3e} "
              f"residual={rep.total_residual:.3e} transfer={rep.transfer_fidelity:.4f}")
    out.mkdir(parents=True, exist_ok=True)
    mf.write_leakage_csv(out / "leakage.csv", rows)
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    manifest = mf.RunManifest.read(run_dir)
    results_path = run_dir / "results.json"
    if not results_path.exists():
        raise InputError(f"incomplete run: no results.json in {run_dir}")
    results = json.loads(results_path.read_text())
    lines = [f"# Run report: {manifest['protocol']}", ""]
    lines.append(f"- tool: {manifest['tool_version']}")
    lines.append(f"- device: `{manifest['device_path']}`")
    lines.append(f"- device sha256: `{manifest['device_sha256'][:16]}...`")
    lines.append(f"- seed: {manifest['seed']}, tolerance: {manifest['tolerance']}")
    lines.append("")
    lines.append("## Summary")
    for k, v in results.get("summary", {}).items():
        lines.append(f"- {k}: {v}")
    lines.append("")
    lines.append("## Artifacts")
    warnings = []
    for name in manifest["artifacts"]:
        p = run_dir / name
        if not p.exists():
            warnings.append(f"missing artifact {name}")
            lines.append(f"- {name}: MISSING")
            continue
        actual = mf.sha256_file(p)
        expected = results.get("artifact_sha256", {}).get(name)
        status = "ok" if actual == expected else "INTEGRITY WARNING"
        if status != "ok":
            warnings.append(f"hash mismatch for {name}")
        lines.append(f"- [{name}]({name}): {status}")
    if warnings:
        lines.append("")
        lines.append("## Warnings")
        lines += [f"- {w}" for w in warnings]
    text = "\n".join(lines) + "\n"
    (run_dir / "report.md").write_text(text)
    print(text)
    return EXIT_OK


# --- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="routersim",
        description="Pulse-level simulator for a SNAIL-based quantum state router",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--device", help="device file (default: $ROUTERSIM_DEVICE "
                                         "or the bundled paper device)")
    common.add_argument("--seed", type=int, default=7)
    common.add_argument("--out", help="output directory")
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--strict-deterministic", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common]).set_defaults(fn=cmd_validate)
    sub.add_parser("couplings", parents=[common]).set_defaults(fn=cmd_couplings)

    p = sub.add_parser("compile", parents=[common])
    p.add_argument("protocol", choices=PROTOCOLS)
    p.add_argument("--option", action="append", metavar="KEY=VALUE")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("simulate", parents=[common])
    p.add_argument("protocol", choices=PROTOCOLS)
    p.add_argument("--option", action="append", metavar="KEY=VALUE")
    p.add_argument("--shots", type=int, default=10000)
    p.add_argument("--lossless", action="store_true")
    p.add_argument("--readout-error", action="store_true",
                   help="apply the device confusion matrices to tomography")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common])
    p.add_argument("protocol", choices=PROTOCOLS)
    p.add_argument("--axis", action="append", metavar="NAME=START:STOP:STEPS")
    p.add_argument("--option", action="append", metavar="KEY=VALUE")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("leakage", parents=[common])
    p.add_argument("--pair", help="cavity pair, e.g. C1,C2")
    p.add_argument("--duration", type=float, default=60.0, help="pulse ns")
    p.add_argument("--strength", type=float, help="eta scale (default: calibrate)")
    p.set_defaults(fn=cmd_leakage)

    p = sub.add_parser("report", parents=[common])
    p.add_argument("run_dir")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, RouterSimError) as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
