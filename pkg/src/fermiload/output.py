"""Deterministic CSV artifacts and metadata sidecars (atomic writes)."""

from __future__ import annotations

import os
from pathlib import Path

from .config import RunConfig, resolved_items
from .trajectory import Trajectory

RUN_COLUMNS = ("t", "F0", "F1", "total_N", "N_reservoir", "herm_residual",
               "min_eig", "max_eig")


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def atomic_write_text(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def trajectory_csv(traj: Trajectory) -> str:
    lines = [",".join(RUN_COLUMNS)]
    for i in range(traj.times.size):
        row = (traj.times[i], traj.f0[i], traj.f1[i], traj.total[i],
               traj.reservoir[i], traj.herm_residual[i], traj.eig_min[i],
               traj.eig_max[i])
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def sites_csv(traj: Trajectory) -> str:
    sites = traj.band0.shape[1]
    header = ["t"] + [f"n0_site{a}" for a in range(sites)] \
        + [f"n1_site{a}" for a in range(sites)]
    lines = [",".join(header)]
    for i in range(traj.times.size):
        row = [traj.times[i], *traj.band0[i], *traj.band1[i]]
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def metadata_text(config: RunConfig, traj: Trajectory | None = None,
                  extra: dict | None = None) -> str:
    """Sidecar in the input key=value format, every parameter resolved."""
    sections: dict = {}
    for section, key, value in resolved_items(config):
        sections.setdefault(section, []).append((key, value))
    if traj is not None:
        run_info = [
            ("integrator_dt", _fmt(traj.metadata.get("dt", float("nan")))),
            ("final_f0", _fmt(traj.final_f0)),
            ("final_f1", _fmt(traj.final_f1)),
            ("trace_drift", _fmt(traj.trace_drift())),
            ("pauli_violation", _fmt(traj.pauli_violation())),
            ("pauli_flagged", str(traj.metadata.get("pauli_flagged", False))),
        ]
        sections.setdefault("result", []).extend(run_info)
    for key, value in (extra or {}).items():
        sections.setdefault("result", []).append((key, str(value)))
    parts = []
    for section, items in sections.items():
        parts.append(f"[{section}]")
        parts.extend(f"{k} = {v}" for k, v in items)
        parts.append("")
    return "\n".join(parts)


def scan_summary_csv(axes: list, rows: list) -> str:
    """One row per completed cell: axis values plus final fidelities."""
    header = [dotted.replace(".", "_") for dotted, _ in axes] \
        + ["final_F0", "final_F1"]
    lines = [",".join(header)]
    for values, f0, f1 in rows:
        lines.append(",".join(list(values) + [_fmt(f0), _fmt(f1)]))
    return "\n".join(lines) + "\n"


def manifest_text(total: int, done: list, failed: list) -> str:
    lines = [f"cells_total = {total}", f"cells_done = {len(done)}",
             f"cells_failed = {len(failed)}"]
    for values, reason in failed:
        lines.append(f"failed {'/'.join(values)}: {reason}")
    return "\n".join(lines) + "\n"
