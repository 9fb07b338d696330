"""Document store backed by an append-only event log plus compacted snapshots.

Every mutation is a batch of document upserts appended to ``events.log`` as a
single fsynced line before memory is updated, which makes each dialog turn
atomic: a crash leaves at worst a torn final line, which recovery drops.
Snapshots (one JSON file per document) are rewritten on compaction and the log
truncated; loading replays any log tail over the snapshots.
"""

from __future__ import annotations

import json
import os
import re
import threading
from pathlib import Path

_PATH_RE = re.compile(r"^[a-z]+/[A-Za-z0-9._-]+$")


class StorageError(Exception):
    pass


def dumps_doc(body: dict) -> str:
    return json.dumps(body, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


class DocumentStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._log_path = self.root / "events.log"
        self._docs: dict[str, dict] = {}
        self._lock = threading.RLock()
        self._load()

    # -- loading ---------------------------------------------------------

    def _load(self) -> None:
        for snapshot in sorted(self.root.glob("*/*.json")):
            path = f"{snapshot.parent.name}/{snapshot.stem}"
            self._docs[path] = json.loads(snapshot.read_text(encoding="utf-8"))
        if not self._log_path.exists():
            return
        with self._log_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    break  # torn final write from a crash; drop the partial turn
                for op in record["ops"]:
                    self._docs[op["path"]] = op["body"]

    # -- reads -----------------------------------------------------------

    def get(self, path: str) -> dict | None:
        with self._lock:
            doc = self._docs.get(path)
            return json.loads(json.dumps(doc)) if doc is not None else None

    def exists(self, path: str) -> bool:
        with self._lock:
            return path in self._docs

    def list(self, prefix: str) -> list[str]:
        with self._lock:
            return sorted(p for p in self._docs if p.startswith(prefix + "/"))

    # -- writes ----------------------------------------------------------

    def apply(self, ops: list[tuple[str, dict]]) -> None:
        """Atomically upsert a batch of documents (one log line, one fsync)."""
        for path, _ in ops:
            if not _PATH_RE.match(path):
                raise StorageError(f"invalid document path: {path!r}")
        line = json.dumps(
            {"ops": [{"path": path, "body": body} for path, body in ops]},
            ensure_ascii=False,
            sort_keys=True,
        )
        with self._lock:
            self._append_line(line)
            for path, body in ops:
                self._docs[path] = json.loads(json.dumps(body))

    def _append_line(self, line: str) -> None:
        with self._log_path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def compact(self) -> None:
        """Rewrite snapshots from current state and truncate the log."""
        with self._lock:
            for path, body in sorted(self._docs.items()):
                kind, name = path.split("/", 1)
                directory = self.root / kind
                directory.mkdir(exist_ok=True)
                target = directory / f"{name}.json"
                tmp = target.with_suffix(".json.tmp")
                tmp.write_text(dumps_doc(body), encoding="utf-8")
                os.replace(tmp, target)
            self._log_path.write_text("", encoding="utf-8")

    # -- helpers ---------------------------------------------------------

    def counters(self) -> "CounterCursor":
        """Cursor over the id counters; allocations only take effect when the
        caller commits the cursor's doc() in an apply() batch."""
        return CounterCursor(self._docs.get("meta/counters", {}))

    def fingerprint(self) -> str:
        import hashlib

        digest = hashlib.sha256()
        with self._lock:
            for path in sorted(self._docs):
                digest.update(path.encode())
                digest.update(dumps_doc(self._docs[path]).encode())
        return digest.hexdigest()


class CounterCursor:
    def __init__(self, counters: dict):
        self._counters = dict(counters)

    def allocate(self, name: str, prefix: str) -> str:
        self._counters[name] = self._counters.get(name, 0) + 1
        return f"{prefix}-{self._counters[name]:04d}"

    def doc(self) -> dict:
        return dict(self._counters)
