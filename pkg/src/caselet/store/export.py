"""Response export: NDJSON (canonical documents) and RFC-4180 CSV.

Range is half-open [from, to); rows are ordered by submittedAt, then
participantRef. CSV flattens slots into ``itemKey.slotKey`` columns over
the union of keys in the exported set, empty cell when absent.
"""

from __future__ import annotations

import csv
import io

from ..canonical import ndjson_line
from ..expressions import render_number
from .base import CONFIGS, RESPONSES, UnknownStudyError
from .memory import MemoryStore


def _exported_docs(store: MemoryStore, study_key: str, from_ts: int, to_ts: int) -> list[dict]:
    if store.get(CONFIGS, study_key) is None:
        raise UnknownStudyError(study_key)
    rows = []
    for _, wrapper in store.items(RESPONSES):
        if wrapper.get("studyKey") != study_key:
            continue
        doc = wrapper["response"]
        if from_ts <= doc["submittedAt"] < to_ts:
            rows.append(doc)
    rows.sort(key=lambda d: (d["submittedAt"], d["participantRef"]))
    return rows


def _cell(value_doc: dict) -> str:
    if "keys" in value_doc:
        return ",".join(value_doc["keys"])
    if "str" in value_doc:
        return value_doc["str"]
    if "bool" in value_doc:
        return "true" if value_doc["bool"] else "false"
    if "ts" in value_doc:
        return str(value_doc["ts"])
    return render_number(float(value_doc["num"]))


def export_responses(
    store: MemoryStore, study_key: str, from_ts: int, to_ts: int, fmt: str = "ndjson"
) -> bytes:
    if from_ts > to_ts:
        raise ValueError("from must be <= to")
    docs = _exported_docs(store, study_key, from_ts, to_ts)

    if fmt == "ndjson":
        return "".join(ndjson_line(d) for d in docs).encode("utf-8")
    if fmt != "csv":
        raise ValueError(f"unknown export format '{fmt}'")

    slot_columns: set[str] = set()
    flattened = []
    for doc in docs:
        cells = {}
        for item in doc["items"]:
            for slot in item["slots"]:
                column = f"{item['itemKey']}.{slot['slotKey']}"
                slot_columns.add(column)
                cells[column] = _cell(slot["value"])
        flattened.append((doc, cells))

    header = ["surveyKey", "versionId", "participantRef", "openedAt", "submittedAt"]
    columns = header + sorted(slot_columns)
    buf = io.StringIO()
    writer = csv.writer(buf)  # RFC-4180 CRLF line endings
    writer.writerow(columns)
    for doc, cells in flattened:
        row = [doc["surveyKey"], doc["versionId"], doc["participantRef"],
               str(doc["openedAt"]), str(doc["submittedAt"])]
        row += [cells.get(c, "") for c in columns[5:]]
        writer.writerow(row)
    return buf.getvalue().encode("utf-8")
