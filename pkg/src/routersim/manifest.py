"""Run manifests, artifact hashing, and file formats for results.

A manifest is written before any result file; `results.json` records artifact
hashes afterwards, so a report can detect incomplete or tampered runs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .hilbert import HilbertSpace

TOOL_VERSION = "routersim 0.1.0"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    protocol: str
    device_path: str
    device_sha256: str
    options: dict
    seed: int
    tolerance: float
    strict_deterministic: bool
    artifacts: list[str]
    tool_version: str = TOOL_VERSION

    def write(self, out_dir: Path):
        out_dir.mkdir(parents=True, exist_ok=True)
        doc = {
            "tool_version": self.tool_version,
            "protocol": self.protocol,
            "device_path": self.device_path,
            "device_sha256": self.device_sha256,
            "options": self.options,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "strict_deterministic": self.strict_deterministic,
            "artifacts": self.artifacts,
        }
        (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2))

    @staticmethod
    def read(run_dir: Path) -> dict:
        p = Path(run_dir) / "manifest.json"
        if not p.exists():
            raise InputError(f"incomplete run: no manifest in {run_dir}")
        return json.loads(p.read_text())


def finalize_results(out_dir: Path, summary: dict):
    """Hash the artifacts listed in the manifest and persist the summary."""
    out_dir = Path(out_dir)
    manifest = RunManifest.read(out_dir)
    hashes = {}
    for name in manifest["artifacts"]:
        p = out_dir / name
        if p.exists():
            hashes[name] = sha256_file(p)
    doc = {"summary": summary, "artifact_sha256": hashes}
    (out_dir / "results.json").write_text(json.dumps(doc, indent=2))


# --- file formats ------------------------------------------------------------------


def write_trajectory_csv(path, times_ns, observables: dict):
    """CSV: time_ns, then one column per observable (complex split re/im)."""
    cols = []
    for name in sorted(observables):
        vals = np.asarray(observables[name])
        if np.iscomplexobj(vals):
            cols.append((f"re_{name}", vals.real))
            cols.append((f"im_{name}", vals.imag))
            cols.append((f"abs_{name}", np.abs(vals)))
        else:
            cols.append((name, vals))
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["time_ns"] + [c for c, _ in cols])
        for i, t in enumerate(times_ns):
            w.writerow([f"{t:.6f}"] + [f"{v[i]:.12g}" for _, v in cols])


def write_state_json(path, space: HilbertSpace, matrix: np.ndarray,
                     time_ns: float = 0.0):
    """Structured-text density matrix: dims header + row-major (re, im) pairs."""
    doc = {
        "dims": [[m, d] for m, d in space.modes],
        "time_ns": time_ns,
        "data": [[float(z.real), float(z.imag)] for z in matrix.ravel()],
    }
    Path(path).write_text(json.dumps(doc))


def read_state_json(path) -> tuple[list, np.ndarray, float]:
    doc = json.loads(Path(path).read_text())
    dims = [(m, int(d)) for m, d in doc["dims"]]
    total = int(np.prod([d for _, d in dims]))
    data = np.array([complex(re, im) for re, im in doc["data"]])
    return dims, data.reshape(total, total), float(doc.get("time_ns", 0.0))


_BIN_MAGIC = b"RSIM"


def write_state_binary(path, space: HilbertSpace, matrix: np.ndarray):
    """Little-endian snapshot: magic, u32 n_modes, u32 dims..., complex128 row-major."""
    with open(path, "wb") as f:
        f.write(_BIN_MAGIC)
        f.write(struct.pack("<I", len(space.dims)))
        for d in space.dims:
            f.write(struct.pack("<I", d))
        np.ascontiguousarray(matrix, dtype="<c16").tofile(f)


def read_state_binary(path) -> tuple[tuple[int, ...], np.ndarray]:
    with open(path, "rb") as f:
        if f.read(4) != _BIN_MAGIC:
            raise InputError(f"{path} is not a state snapshot")
        (n,) = struct.unpack("<I", f.read(4))
        dims = struct.unpack(f"<{n}I", f.read(4 * n))
        total = int(np.prod(dims))
        data = np.fromfile(f, dtype="<c16", count=total * total)
    return dims, data.reshape(total, total)


def write_tomography_csv(path, records, sigmas: dict | None = None):
    """CSV: (setting, expectation, shots, sigma)."""
    sigmas = sigmas or {}
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["setting", "expectation", "shots", "sigma"])
        for r in records:
            s = r.setting.pauli_string
            w.writerow([s, f"{r.expectation:.10g}", r.setting.shots,
                        f"{sigmas.get(s, float('nan')):.4g}"])


def write_sweep_csv(path, axis_names: list[str], axes: list, grid: np.ndarray,
                    value_name: str):
    """Long-format sweep grid: one row per cell, no missing cells."""
    grid = np.asarray(grid)
    shape = tuple(len(a) for a in axes)
    if grid.shape != shape:
        raise InputError(f"grid shape {grid.shape} does not match axes {shape}")
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(axis_names + [value_name])
        for idx in np.ndindex(*shape):
            row = [f"{axes[k][i]:.10g}" for k, i in enumerate(idx)]
            w.writerow(row + [f"{grid[idx]:.10g}"])


def write_leakage_csv(path, rows: list[dict]):
    fields = ["setting", "peak_leakage", "residual_leakage",
              "transfer_fidelity", "phase_error"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in fields})
