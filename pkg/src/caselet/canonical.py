"""Canonical JSON text: compact separators, UTF-8, no NaN, insertion order.

Builders are responsible for inserting dynamic-keyed maps (flags, metadata,
locale tables) in sorted order; given that, output is byte-stable.
"""

import json


def canonical_json(doc) -> str:
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def ndjson_line(doc) -> str:
    return canonical_json(doc) + "\n"


def sorted_map(m: dict) -> dict:
    return {k: m[k] for k in sorted(m)}
