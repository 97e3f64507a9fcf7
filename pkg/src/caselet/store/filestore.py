"""Single-file embedded store with a write-ahead journal.

The file is a sequence of newline-delimited JSON records:

    {"txn": [<op>...]}            one committed transaction
    {"seq": {"name": n}}          sequence counter advance

A transaction is exactly one line, so commits are atomic at the line
level: a crash mid-write leaves a torn final line, which recovery simply
discards. compact() rewrites the whole file as one snapshot transaction.
"""

from __future__ import annotations

import json
import os

from .base import Op, PutOp, StoreError, op_from_doc, op_to_doc
from .memory import MemoryStore


class FileStore(MemoryStore):
    def __init__(self, path, flush: bool = True):
        super().__init__()
        self.path = str(path)
        self._flush = flush
        self._fh = None
        self._recover()
        self._fh = open(self.path, "a", encoding="utf-8")

    def _recover(self) -> None:
        if not os.path.exists(self.path):
            return
        kept_lines: list[str] = []
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.endswith("\n"):
                    break  # torn trailing write from a crash
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    break
                if "txn" in record:
                    self._apply([op_from_doc(d) for d in record["txn"]])
                elif "seq" in record:
                    for name, value in record["seq"].items():
                        self._counters[name] = max(self._counters.get(name, 0), value)
                else:
                    raise StoreError(f"unknown journal record: {record}")
                kept_lines.append(line)
        # Truncate any torn tail so appends start from a clean boundary.
        with open(self.path, "w", encoding="utf-8") as fh:
            fh.writelines(kept_lines)

    def _write_line(self, record: dict) -> None:
        if self._fh is None:  # during recovery
            return
        self._fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n")
        if self._flush:
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def _persist(self, ops: list[Op]) -> None:
        self._write_line({"txn": [op_to_doc(op) for op in ops]})

    def _persist_counter(self, sequence: str, value: int) -> None:
        self._write_line({"seq": {sequence: value}})

    def compact(self) -> None:
        """Rewrite the journal as one snapshot of the current contents."""
        with self._lock:
            ops = [
                PutOp(coll, key, doc)
                for coll in sorted(self._collections)
                for key, doc in self.items(coll)
            ]
            self._fh.close()
            tmp = self.path + ".tmp"
            with open(tmp, "w", encoding="utf-8") as fh:
                if ops:
                    fh.write(
                        json.dumps(
                            {"txn": [op_to_doc(op) for op in ops]},
                            ensure_ascii=False,
                            separators=(",", ":"),
                        )
                        + "\n"
                    )
                if self._counters:
                    fh.write(
                        json.dumps({"seq": dict(sorted(self._counters.items()))},
                                   ensure_ascii=False, separators=(",", ":"))
                        + "\n"
                    )
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.path)
            self._fh = open(self.path, "a", encoding="utf-8")

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
