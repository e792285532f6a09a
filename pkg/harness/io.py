"""
Flat-file formats: CSV artifacts, JSON reports, instance files and the --potential flag.
"""

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np
from pydantic import BaseModel

from env import OUTPUT_DIR
from errors import InvalidArgumentError
from models.config import PotentialSpec
from models.reports import RunRecord
from services.grid_operator import load_potential_csv
from services.phase_estimation import OutcomeDistribution, SpectralInstance

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["N0", "s", "N", "success_probability", "failure", "error_norm", "bound_rhs"]

RESOURCE_COLUMNS = ["coarse_qubits", "fine_qubits", "hadamard_gates", "ancilla_qubits", "total_qubits"]

# every scalar RunRecord field except wall-clock duration, so CSV output is reproducible;
# the per-window good-set list is JSON only
RUN_COLUMNS = [
    name for name in RunRecord.model_fields
    if name not in ("resources", "duration_seconds", "good_set_windows")
] + RESOURCE_COLUMNS


def parse_potential_flag(text: str) -> PotentialSpec:
    """'zero' | 'quad:<c>' | 'file:<path>'."""
    kind, _, arg = text.partition(":")
    if kind == "zero" and not arg:
        return PotentialSpec()
    if kind == "quad":
        try:
            strength = float(arg)
        except ValueError:
            raise InvalidArgumentError(f"bad quadratic strength in '{text}'")
        if strength < 0:
            raise InvalidArgumentError(f"quadratic strength must be >= 0, got {strength}")
        return PotentialSpec(kind="quadratic", strength=strength)
    if kind == "file" and arg:
        return load_potential_csv(arg)
    raise InvalidArgumentError(f"unknown potential '{text}' (use zero, quad:c or file:path)")


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buffer.getvalue()


def record_row(record: RunRecord) -> Dict[str, Any]:
    row = record.model_dump(exclude={"resources", "good_set_windows"})
    row.update(record.resources.model_dump())
    return row


def records_csv(records: Sequence[RunRecord], columns: Sequence[str] = RUN_COLUMNS) -> str:
    return rows_to_csv((record_row(r) for r in records), columns)


def distribution_csv(distribution: OutcomeDistribution) -> str:
    return rows_to_csv(
        ({"j": j, "p_j": float(p)} for j, p in enumerate(distribution.probabilities)), ["j", "p_j"]
    )


def counts_csv(counts: np.ndarray) -> str:
    return rows_to_csv(({"j": j, "count": int(c)} for j, c in enumerate(counts)), ["j", "count"])


def model_json(model: BaseModel) -> str:
    return model.model_dump_json(indent=2) + "\n"


def load_instance_json(path: Union[str, Path]) -> SpectralInstance:
    """JSON array of {phase, amplitude_re, amplitude_im}."""
    try:
        entries = json.loads(Path(path).read_text())
        phases = [float(e["phase"]) for e in entries]
        amps = [complex(float(e["amplitude_re"]), float(e["amplitude_im"])) for e in entries]
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise InvalidArgumentError(f"cannot read instance file {path}: {e}")
    return SpectralInstance(phases=np.array(phases), amplitudes=np.array(amps))


def instance_json(instance: SpectralInstance) -> str:
    entries: List[Dict[str, float]] = [
        {"phase": float(phi), "amplitude_re": float(d.real), "amplitude_im": float(d.imag)}
        for phi, d in zip(instance.phases, instance.amplitudes)
    ]
    return json.dumps(entries, indent=2) + "\n"


def resolve_output_path(path: Union[str, Path]) -> Path:
    """Bare file names go under QPE_OUTPUT_DIR; anything with a directory is used as given."""
    p = Path(path)
    if not p.is_absolute() and p.parent == Path("."):
        p = Path(OUTPUT_DIR) / p
    return p


def write_artifact(path: Union[str, Path], text: str) -> Path:
    target = resolve_output_path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text)
    logger.info("wrote %s (%d bytes)", target, len(text))
    return target
