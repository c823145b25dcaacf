"""File-based request/response contract for external trainers.

Each exchange lives in its own directory. The engine writes a JSONL
``request`` file and runs the trainer command with the request path as the
last argument. The trainer writes a JSONL response and prints
``RESPONSE <path>`` on stdout. Field names are documented in PROTOCOL.md.
"""
from __future__ import annotations

import json
import os
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

PROTOCOL_VERSION = "afsl/1"
DEFAULT_TIMEOUT = 3600.0


class ProtocolError(RuntimeError):
    """Base class for trainer protocol violations."""


class TrainerExitError(ProtocolError):
    def __init__(self, returncode: int, stderr: str = ""):
        tail = stderr.strip().splitlines()[-5:]
        msg = f"trainer exited with status {returncode}"
        if tail:
            msg += ": " + " | ".join(tail)
        super().__init__(msg)
        self.returncode = returncode
        self.stderr = stderr


class TrainerTimeoutError(ProtocolError):
    pass


class VersionMismatchError(ProtocolError):
    pass


class MalformedMessageError(ProtocolError):
    pass


class NonFiniteValueError(MalformedMessageError):
    pass


class MissingIdError(ProtocolError):
    def __init__(self, ids: Sequence[int], what: str):
        super().__init__(f"response is missing {what} for id(s) {', '.join(map(str, ids))}")
        self.ids = list(ids)


class DuplicateIdError(ProtocolError):
    def __init__(self, sample_id: int, what: str):
        super().__init__(f"response has duplicate {what} records for id {sample_id}")
        self.id = sample_id


class UnexpectedIdError(ProtocolError):
    pass


class DimensionMismatchError(ProtocolError):
    pass


@dataclass
class TrainRequest:
    request_id: str
    iteration: int
    labels: list[str]
    support: list[tuple[int, list[str]]]
    pool_ids: list[int]
    validation_ids: list[int]
    eval_ids: list[int]
    multi_label: bool = False
    substitutions: dict[str, str] = field(default_factory=dict)
    dataset: str = ""
    seed: int = 0


@dataclass
class PoolInference:
    id: int
    en: np.ndarray
    class_logits: np.ndarray


@dataclass
class InferenceResponse:
    request_id: str
    pool: list[PoolInference]
    predictions: dict[int, list[str]]
    timings: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)


def _reject_constant(name: str):
    raise NonFiniteValueError(f"non-finite value {name} in protocol message")


def _loads(line: str, path: Path, lineno: int) -> dict:
    try:
        obj = json.loads(line, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MalformedMessageError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict) or "type" not in obj:
        raise MalformedMessageError(f"{path}:{lineno}: expected an object with a 'type' field")
    return obj


def _read_lines(path: Path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        records = [_loads(line, path, i) for i, line in enumerate(fh, 1) if line.strip()]
    if not records or records[0]["type"] != "header":
        raise MalformedMessageError(f"{path}: first record must be the header")
    version = records[0].get("protocol")
    if version != PROTOCOL_VERSION:
        raise VersionMismatchError(f"{path}: protocol {version!r}, expected {PROTOCOL_VERSION!r}")
    return records


def _dump(fh, obj: dict) -> None:
    fh.write(json.dumps(obj, allow_nan=False) + "\n")


def write_request(req: TrainRequest, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        _dump(fh, {"type": "header", "protocol": PROTOCOL_VERSION, "request_id": req.request_id,
                   "iteration": req.iteration, "labels": list(req.labels),
                   "multi_label": req.multi_label, "substitutions": dict(req.substitutions),
                   "dataset": req.dataset, "seed": req.seed})
        for sid, names in req.support:
            _dump(fh, {"type": "support", "id": sid, "labels": list(names)})
        for kind, ids in (("pool", req.pool_ids), ("validation", req.validation_ids),
                          ("eval", req.eval_ids)):
            for sid in ids:
                _dump(fh, {"type": kind, "id": sid})
    return path


def read_request(path: str | Path) -> TrainRequest:
    path = Path(path)
    records = _read_lines(path)
    head = records[0]
    try:
        req = TrainRequest(request_id=str(head["request_id"]), iteration=int(head["iteration"]),
                           labels=list(head["labels"]), support=[], pool_ids=[],
                           validation_ids=[], eval_ids=[],
                           multi_label=bool(head.get("multi_label", False)),
                           substitutions=dict(head.get("substitutions", {})),
                           dataset=str(head.get("dataset", "")), seed=int(head.get("seed", 0)))
        for rec in records[1:]:
            kind = rec["type"]
            if kind == "support":
                req.support.append((int(rec["id"]), list(rec["labels"])))
            elif kind == "pool":
                req.pool_ids.append(int(rec["id"]))
            elif kind == "validation":
                req.validation_ids.append(int(rec["id"]))
            elif kind == "eval":
                req.eval_ids.append(int(rec["id"]))
            else:
                raise MalformedMessageError(f"{path}: unknown record type {kind!r}")
    except KeyError as exc:
        raise MalformedMessageError(f"{path}: missing field {exc.args[0]!r}") from None
    return req


def write_response(resp: InferenceResponse, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        _dump(fh, {"type": "header", "protocol": PROTOCOL_VERSION, "request_id": resp.request_id})
        for p in resp.pool:
            _dump(fh, {"type": "pool", "id": p.id,
                       "en": np.asarray(p.en, dtype=np.float64).tolist(),
                       "class_logits": np.asarray(p.class_logits, dtype=np.float64).tolist()})
        for sid, names in resp.predictions.items():
            _dump(fh, {"type": "prediction", "id": sid, "labels": list(names)})
        _dump(fh, {"type": "status", "timings": dict(resp.timings), "flags": list(resp.flags)})
    return path


def _as_matrix(values, ndim: int, what: str, sid: int) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError):
        raise DimensionMismatchError(f"id {sid}: {what} is not a rectangular array of numbers") from None
    if arr.ndim != ndim:
        raise DimensionMismatchError(f"id {sid}: {what} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"id {sid}: {what} contains non-finite values")
    return arr


def read_response(path: str | Path) -> InferenceResponse:
    path = Path(path)
    records = _read_lines(path)
    resp = InferenceResponse(str(records[0].get("request_id", "")), [], {})
    seen_pool: set[int] = set()
    try:
        for rec in records[1:]:
            kind = rec["type"]
            if kind == "pool":
                sid = int(rec["id"])
                if sid in seen_pool:
                    raise DuplicateIdError(sid, "pool")
                seen_pool.add(sid)
                resp.pool.append(PoolInference(sid, _as_matrix(rec["en"], 1, "en", sid),
                                               _as_matrix(rec["class_logits"], 2, "class_logits", sid)))
            elif kind == "prediction":
                sid = int(rec["id"])
                if sid in resp.predictions:
                    raise DuplicateIdError(sid, "prediction")
                resp.predictions[sid] = list(rec["labels"])
            elif kind == "status":
                resp.timings = {str(k): float(v) for k, v in rec.get("timings", {}).items()}
                resp.flags = [str(f) for f in rec.get("flags", [])]
            else:
                raise MalformedMessageError(f"{path}: unknown record type {kind!r}")
    except KeyError as exc:
        raise MalformedMessageError(f"{path}: missing field {exc.args[0]!r}") from None
    return resp


def validate_response(resp: InferenceResponse, req: TrainRequest) -> InferenceResponse:
    """Check a response against the request it answers."""
    if resp.request_id != req.request_id:
        raise MalformedMessageError(
            f"response answers request {resp.request_id!r}, expected {req.request_id!r}")
    got = [p.id for p in resp.pool]
    if len(set(got)) != len(got):
        dup = next(i for i in got if got.count(i) > 1)
        raise DuplicateIdError(dup, "pool")
    got_set = set(got)
    missing = [i for i in req.pool_ids if i not in got_set]
    if missing:
        raise MissingIdError(missing, "pool inference")
    extra = sorted(got_set - set(req.pool_ids))
    if extra:
        raise UnexpectedIdError(f"response has pool records for unrequested id(s) {extra}")
    n_labels = len(req.labels)
    dims = {p.en.shape[0] for p in resp.pool}
    if len(dims) > 1:
        raise DimensionMismatchError(f"en vectors have differing lengths {sorted(dims)}")
    for p in resp.pool:
        if p.class_logits.shape[0] < 1 or p.class_logits.shape[1] != n_labels:
            raise DimensionMismatchError(
                f"id {p.id}: class_logits shape {p.class_logits.shape}, expected (T>=1, {n_labels})")
    missing = [i for i in req.eval_ids if i not in resp.predictions]
    if missing:
        raise MissingIdError(missing, "predictions")
    known = set(req.labels)
    for sid, names in resp.predictions.items():
        bad = [n for n in names if n not in known]
        if bad:
            raise MalformedMessageError(f"id {sid}: predicted unknown label(s) {bad}")
    return resp


def invoke_external(command: str | Sequence[str], request: TrainRequest, workdir: str | Path,
                    timeout: float = DEFAULT_TIMEOUT, env: dict | None = None) -> InferenceResponse:
    """Run one trainer exchange in ``workdir`` and return the validated response."""
    workdir = Path(workdir)
    req_path = write_request(request, workdir / "request")
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    try:
        proc = subprocess.run(argv + [str(req_path)], capture_output=True, text=True,
                              timeout=timeout, cwd=workdir, env=env)
    except subprocess.TimeoutExpired:
        raise TrainerTimeoutError(f"trainer did not answer within {timeout:g} s") from None
    if proc.returncode != 0:
        raise TrainerExitError(proc.returncode, proc.stderr)
    announced = [line[len("RESPONSE "):].strip() for line in proc.stdout.splitlines()
                 if line.startswith("RESPONSE ")]
    if len(announced) != 1:
        raise MalformedMessageError(
            f"trainer must print exactly one 'RESPONSE <path>' line, got {len(announced)}")
    resp_path = Path(announced[0])
    if not resp_path.is_absolute():
        resp_path = workdir / resp_path
    if not resp_path.exists():
        raise MalformedMessageError(f"announced response {resp_path} does not exist")
    return validate_response(read_response(resp_path), request)


def serve_once(request_path: str | Path, handler) -> Path:
    """Trainer-side helper: answer one request file with ``handler``.

    Writes ``response`` next to the request and prints the announcement line.
    """
    request_path = Path(request_path)
    req = read_request(request_path)
    resp = handler(req)
    out = write_response(resp, request_path.parent / "response")
    print(f"RESPONSE {os.path.abspath(out)}", flush=True)
    return out
