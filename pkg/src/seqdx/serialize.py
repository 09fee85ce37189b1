"""JSON / JSON-lines persistence for every artifact the pipeline produces.

All files are human-diffable: canonical key order, full-precision decimal
floats (Python's repr round-trips exactly, well past 12 significant digits).
Each artifact embeds the hash of the world config it descends from, so the
report stage can refuse apples-to-oranges comparisons.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .diagnoser import DiagnoserModel
from .errors import HashMismatch, ParseError, SchemaError, ShapeMismatch
from .metrics import MetricsReport
from .planner import PolicyParams
from .world import CaseSet, PatientCase, WorldConfig

_CASE_FIELDS = {"id", "label", "init_obs", "outcomes", "available"}
_HEADER_FIELDS = {"schema", "config_hash", "n_cases"}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def world_config_hash(config: WorldConfig) -> str:
    """Short stable digest of a world config; stamped into every artifact."""
    return hashlib.sha256(canonical_json(config.to_dict()).encode()).hexdigest()[:12]


def _read_text(path) -> str:
    return Path(path).read_text()


def _write_text(path, text: str) -> None:
    Path(path).write_text(text)


def _parse_json(text: str, path, line: int | None = None) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        where = f"{path}:{line}" if line is not None else str(path)
        raise ParseError(f"{where}: {exc.msg}") from exc


# --- world config ---------------------------------------------------------

def save_world_config(config: WorldConfig, path) -> None:
    _write_text(path, json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n")


def load_world_config(path) -> WorldConfig:
    data = _parse_json(_read_text(path), path)
    known = {"disease_names", "priors", "init_obs_alphabet", "init_obs_table",
             "actions", "availability_prob", "seed"}
    unknown = set(data) - known
    if unknown:
        raise SchemaError(f"{path}: unknown world-config fields {sorted(unknown)}")
    missing = {"disease_names", "priors", "init_obs_alphabet", "init_obs_table",
               "actions"} - set(data)
    if missing:
        raise SchemaError(f"{path}: missing world-config fields {sorted(missing)}")
    return WorldConfig.from_dict(data)


# --- cases ------------------------------------------------------------------

def save_cases(cases, path) -> None:
    """JSON-lines: a provenance header, then one case per line, sorted keys."""
    config_hash = getattr(cases, "config_hash", None)
    lines = [canonical_json({"schema": "cases-v1", "config_hash": config_hash,
                             "n_cases": len(cases)})]
    for case in cases:
        lines.append(canonical_json({
            "id": case.id,
            "label": case.label,
            "init_obs": case.init_obs,
            "outcomes": case.outcomes,
            "available": list(case.available),
        }))
    _write_text(path, "\n".join(lines) + "\n")


def _case_from_line(data: dict, path, line_no: int) -> PatientCase:
    unknown = set(data) - _CASE_FIELDS
    if unknown:
        raise SchemaError(f"{path}:{line_no}: unknown case fields {sorted(unknown)}")
    missing = _CASE_FIELDS - set(data)
    if missing:
        raise SchemaError(f"{path}:{line_no}: missing case fields {sorted(missing)}")
    available = tuple(data["available"])
    outcomes = dict(data["outcomes"])
    if set(outcomes) != set(available):
        raise SchemaError(
            f"{path}:{line_no}: outcomes must cover exactly the available actions"
        )
    if len(available) == 0:
        raise SchemaError(f"{path}:{line_no}: case has no available actions")
    if len(set(available)) != len(available):
        raise SchemaError(f"{path}:{line_no}: duplicate action in available")
    label = int(data["label"])
    if label < 0:
        raise SchemaError(f"{path}:{line_no}: negative label")
    return PatientCase(id=str(data["id"]), label=label,
                       init_obs=str(data["init_obs"]),
                       outcomes=outcomes, available=available)


def load_cases(path) -> CaseSet:
    """Inverse of save_cases; also accepts header-less externally authored files."""
    lines = _read_text(path).splitlines()
    if not lines:
        raise SchemaError(f"{path}: empty case file")
    cases = []
    config_hash = None
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        data = _parse_json(line, path, line_no)
        if line_no == 1 and "schema" in data:
            unknown = set(data) - _HEADER_FIELDS
            if unknown:
                raise SchemaError(f"{path}:1: unknown header fields {sorted(unknown)}")
            config_hash = data.get("config_hash")
            continue
        cases.append(_case_from_line(data, path, line_no))
    return CaseSet(cases, config_hash=config_hash)


# --- diagnoser model --------------------------------------------------------

def save_model(model: DiagnoserModel, path) -> None:
    data = {
        "schema": "diagnoser-v1",
        "config_hash": model.config_hash,
        "smoothing_alpha": model.smoothing_alpha,
        "log_floor": model.log_floor,
        "disease_names": list(model.disease_names),
        "init_alphabet": list(model.init_alphabet),
        "action_names": list(model.action_names),
        "outcome_alphabets": {a: list(s) for a, s in model.outcome_alphabets.items()},
        "priors": list(model.priors_hat),
        "init_table": [list(row) for row in model.init_table_hat],
        "cond_tables": {a: [list(row) for row in t]
                        for a, t in model.cond_tables_hat.items()},
    }
    _write_text(path, json.dumps(data, sort_keys=True, indent=2) + "\n")


def load_model(path) -> DiagnoserModel:
    data = _parse_json(_read_text(path), path)
    if data.get("schema") != "diagnoser-v1":
        raise SchemaError(f"{path}: not a diagnoser model file")
    try:
        return DiagnoserModel(
            disease_names=tuple(data["disease_names"]),
            init_alphabet=tuple(data["init_alphabet"]),
            action_names=tuple(data["action_names"]),
            outcome_alphabets={a: tuple(s) for a, s in data["outcome_alphabets"].items()},
            priors_hat=np.asarray(data["priors"], dtype=float),
            init_table_hat=np.asarray(data["init_table"], dtype=float),
            cond_tables_hat={a: np.asarray(t, dtype=float)
                             for a, t in data["cond_tables"].items()},
            smoothing_alpha=float(data["smoothing_alpha"]),
            log_floor=float(data["log_floor"]),
            config_hash=data.get("config_hash") or "",
        )
    except KeyError as exc:
        raise SchemaError(f"{path}: missing model field {exc}") from exc


# --- policy checkpoint -------------------------------------------------------

def _weights_digest(weights_rows) -> str:
    return hashlib.sha256(canonical_json(weights_rows).encode()).hexdigest()[:16]


def save_checkpoint(params: PolicyParams, path) -> None:
    rows = [list(row) for row in params.weights]
    data = {
        "schema": "checkpoint-v1",
        "config_hash": params.meta.get("config_hash", ""),
        "action_names": list(params.action_names),
        "feature_dim": params.weights.shape[1],
        "weights": rows,
        "weights_sha256": _weights_digest(rows),
        "meta": {k: v for k, v in params.meta.items() if k != "config_hash"},
    }
    _write_text(path, json.dumps(data, sort_keys=True, indent=2) + "\n")


def load_checkpoint(path, expect_config_hash: str | None = None,
                    expect_shape: tuple[int, int] | None = None) -> PolicyParams:
    """Load a checkpoint; verifies integrity and, when asked, world compatibility."""
    data = _parse_json(_read_text(path), path)
    if data.get("schema") != "checkpoint-v1":
        raise SchemaError(f"{path}: not a checkpoint file")
    rows = data["weights"]
    if _weights_digest(rows) != data.get("weights_sha256"):
        raise HashMismatch(f"{path}: weights digest mismatch (file tampered?)")
    if expect_config_hash is not None and data.get("config_hash") != expect_config_hash:
        raise HashMismatch(
            f"{path}: checkpoint config hash {data.get('config_hash')!r} "
            f"!= active {expect_config_hash!r}"
        )
    weights = np.asarray(rows, dtype=float)
    if expect_shape is not None and weights.shape != tuple(expect_shape):
        raise ShapeMismatch(
            f"{path}: checkpoint shape {weights.shape} != expected {tuple(expect_shape)}"
        )
    meta = dict(data.get("meta", {}))
    meta["config_hash"] = data.get("config_hash", "")
    return PolicyParams(weights=weights, action_names=tuple(data["action_names"]),
                        meta=meta)


# --- metrics reports ---------------------------------------------------------

def save_report(report: MetricsReport, path, config_hash: str = "",
                extra: dict | None = None) -> None:
    data = {
        "schema": "report-v1",
        "config_hash": config_hash,
        "metrics": report.to_dict(),
        "run": extra or {},
    }
    _write_text(path, json.dumps(data, sort_keys=True, indent=2) + "\n")


def load_report(path) -> tuple[MetricsReport, str, dict]:
    data = _parse_json(_read_text(path), path)
    if data.get("schema") != "report-v1":
        raise SchemaError(f"{path}: not a report file")
    return (MetricsReport.from_dict(data["metrics"]), data.get("config_hash", ""),
            dict(data.get("run", {})))
