"""Append-only campaign logs with crash-safe resume and CSV export.

Layout under the store root, one directory per campaign::

    <root>/<campaign_id>/manifest.json   status, config snapshot, space digest
    <root>/<campaign_id>/space.json      canonical space definition
    <root>/<campaign_id>/rounds.jsonl    one JSON round record per line

Each round line carries ``schema_version``. A final line without its newline
(or that fails to parse) is a torn write from a crash; it is dropped on load
and trimmed before the next append.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .evaluators import EMOTIONS
from .gp import Dataset
from .loop import LoopConfig, RoundRecord, dataset_from_records
from .space import ParameterSpace

SCHEMA_VERSION = 1
STATUSES = ("running", "complete", "aborted")

EXPORT_HEADER = (
    "campaign_id", "emotion", "round", "status", "objective", "incumbent", *EMOTIONS, "coords",
)


class StoreError(RuntimeError):
    pass


class CampaignNotFound(StoreError):
    pass


class StatusError(StoreError):
    pass


class OrderError(StoreError):
    pass


class DigestMismatch(StoreError):
    pass


@dataclass
class CampaignManifest:
    campaign_id: str
    created: str
    config: dict
    space_digest: str
    evaluator_id: str
    status: str = "running"
    schema_version: int = SCHEMA_VERSION

    @property
    def loop_config(self) -> LoopConfig:
        return LoopConfig.from_dict(self.config)


def _dumps(obj) -> str:
    # json emits repr() floats, which round-trip exactly
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class CampaignStore:
    def __init__(self, root: str | Path, fsync: bool = True):
        self.root = Path(root)
        self.fsync = fsync
        self._next: dict[str, int] = {}

    def _dir(self, campaign_id: str) -> Path:
        return self.root / campaign_id

    def exists(self, campaign_id: str) -> bool:
        return (self._dir(campaign_id) / "manifest.json").is_file()

    def campaign_ids(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / "manifest.json").is_file())

    # -- manifest --------------------------------------------------------------

    def create(self, campaign_id: str, cfg: LoopConfig, space: ParameterSpace, evaluator_id: str) -> CampaignManifest:
        if not campaign_id or "/" in campaign_id or campaign_id.startswith("."):
            raise StoreError(f"bad campaign id {campaign_id!r}")
        d = self._dir(campaign_id)
        if self.exists(campaign_id):
            raise StoreError(f"campaign {campaign_id!r} already exists")
        d.mkdir(parents=True, exist_ok=True)
        manifest = CampaignManifest(
            campaign_id=campaign_id,
            created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            config=cfg.to_dict(),
            space_digest=space.digest(),
            evaluator_id=evaluator_id,
        )
        _atomic_write(d / "space.json", json.dumps(space.to_dict(), indent=2, sort_keys=True) + "\n")
        (d / "rounds.jsonl").touch()
        self._write_manifest(manifest)
        self._next[campaign_id] = 0
        return manifest

    def _write_manifest(self, manifest: CampaignManifest) -> None:
        _atomic_write(self._dir(manifest.campaign_id) / "manifest.json", json.dumps(asdict(manifest), indent=2) + "\n")

    def manifest(self, campaign_id: str) -> CampaignManifest:
        path = self._dir(campaign_id) / "manifest.json"
        if not path.is_file():
            raise CampaignNotFound(f"no campaign {campaign_id!r} under {self.root}")
        data = json.loads(path.read_text())
        if data.get("schema_version") != SCHEMA_VERSION:
            raise StoreError(f"unsupported manifest schema {data.get('schema_version')!r}")
        return CampaignManifest(**data)

    def set_status(self, campaign_id: str, status: str) -> None:
        if status not in STATUSES:
            raise ValueError(f"unknown status {status!r}")
        m = self.manifest(campaign_id)
        m.status = status
        self._write_manifest(m)

    def load_space(self, campaign_id: str) -> ParameterSpace:
        m = self.manifest(campaign_id)
        space = ParameterSpace.from_dict(json.loads((self._dir(campaign_id) / "space.json").read_text()))
        if space.digest() != m.space_digest:
            raise DigestMismatch(f"space file of {campaign_id!r} no longer matches its manifest digest")
        return space

    # -- rounds ------------------------------------------------------------------

    def _rounds_path(self, campaign_id: str) -> Path:
        return self._dir(campaign_id) / "rounds.jsonl"

    def _read_lines(self, campaign_id: str) -> tuple[list[dict], int]:
        """Parsed records plus the byte length of the intact prefix."""
        path = self._rounds_path(campaign_id)
        if not path.exists():
            raise CampaignNotFound(f"no round log for {campaign_id!r}")
        data = path.read_bytes()
        lines = data.split(b"\n")
        tail = lines.pop()  # bytes after the last newline: empty unless torn
        out, good = [], 0
        for i, raw in enumerate(lines):
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError:
                if i == len(lines) - 1 and not tail:
                    break
                raise StoreError(f"{path}: corrupt record on line {i + 1}") from None
            if rec.get("schema_version") != SCHEMA_VERSION:
                raise StoreError(f"{path}: line {i + 1} has schema {rec.get('schema_version')!r}")
            out.append(rec)
            good += len(raw) + 1
        return out, good

    def load_records(self, campaign_id: str) -> list[RoundRecord]:
        self.manifest(campaign_id)
        return [RoundRecord.from_dict(r) for r in self._read_lines(campaign_id)[0]]

    def append_round(self, campaign_id: str, record: RoundRecord) -> int:
        """Durably append one record; returns its index once it is on disk."""
        m = self.manifest(campaign_id)
        if m.status != "running":
            raise StatusError(f"campaign {campaign_id!r} is {m.status}, not running")
        if campaign_id not in self._next:
            records, good = self._read_lines(campaign_id)
            path = self._rounds_path(campaign_id)
            if path.stat().st_size != good:
                with open(path, "r+b") as fh:
                    fh.truncate(good)
            self._next[campaign_id] = len(records)
        expected = self._next[campaign_id]
        if record.index != expected:
            kind = "duplicate" if record.index < expected else "gap"
            raise OrderError(f"{kind}: got round {record.index}, expected {expected}")
        line = _dumps({"schema_version": SCHEMA_VERSION, **record.to_dict()}) + "\n"
        with open(self._rounds_path(campaign_id), "a") as fh:
            fh.write(line)
            fh.flush()
            if self.fsync:
                os.fsync(fh.fileno())
        self._next[campaign_id] = expected + 1
        return record.index

    def resume(self, campaign_id: str, space: ParameterSpace | None = None) -> tuple[Dataset, int]:
        m = self.manifest(campaign_id)
        if m.status != "running":
            raise StatusError(f"campaign {campaign_id!r} is {m.status}; only running campaigns resume")
        stored = self.load_space(campaign_id)
        if space is not None and space.digest() != stored.digest():
            raise DigestMismatch(f"space differs from the one campaign {campaign_id!r} started with")
        records = self.load_records(campaign_id)
        return dataset_from_records(records), len(records)

    # -- export ------------------------------------------------------------------

    def export_table(self, campaign_ids: Iterable[str]) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EXPORT_HEADER)
        for cid in campaign_ids:
            m = self.manifest(cid)
            emotion = m.config["target"]
            for r in self.load_records(cid):
                scores = [repr(r.scores[e]) if r.scores else "" for e in EMOTIONS]
                w.writerow([
                    cid, emotion, r.index, r.status,
                    "" if r.objective is None else repr(r.objective),
                    "" if r.incumbent is None else repr(r.incumbent),
                    *scores,
                    " ".join(str(c) for c in r.point),
                ])
        return buf.getvalue()


def parse_export(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def recording_hook(store: CampaignStore, campaign_id: str):
    def hook(record: RoundRecord) -> None:
        store.append_round(campaign_id, record)
    return hook


def audit_records(space: ParameterSpace, records: Sequence[RoundRecord]) -> list[str]:
    """Constraint problems in a round log; empty when every vector is valid."""
    problems = []
    for r in records:
        report = space.validate(r.vector)
        problems.extend(f"round {r.index}: {v.message}" for v in report.violations)
        if report.ok and space.reduce(r.vector) != r.point:
            problems.append(f"round {r.index}: vector does not match its reduced point")
    return problems
