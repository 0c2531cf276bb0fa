"""JSON documents for instances and strategy profiles, plus report rendering.

Rationals are written as strings (``"3/10"``, ``"50"``) so nothing passes
through a float. On input, ``"p/q"``, decimal literals, integers and
``[p, q]`` pairs are all accepted.
"""

from __future__ import annotations

import csv
import io
import json
from decimal import Decimal, localcontext
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

from .model import Instance, to_rational
from .modular import Strategy

SCHEMA_VERSION = 1


class DocumentError(ValueError):
    """The document is unreadable, malformed or does not match the schema."""


def _r(value: Any, where: str) -> Fraction:
    try:
        return to_rational(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise DocumentError(f"{where}: {exc}") from None


def _field(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise DocumentError(f"{where}: missing field {key!r}")
    return obj[key]


def _list(value, where: str) -> list:
    if not isinstance(value, list):
        raise DocumentError(f"{where}: expected a list")
    return value


def instance_from_dict(doc: dict) -> Instance:
    version = _field(doc, "schema_version", "document")
    if version != SCHEMA_VERSION:
        raise DocumentError(f"unsupported schema_version {version!r}")
    states = [str(s) for s in _list(_field(doc, "states", "document"), "states")]
    prior = [_r(p, f"prior[{k}]") for k, p in enumerate(_list(_field(doc, "prior", "document"), "prior"))]
    questions = []
    for k, q in enumerate(_list(_field(doc, "questions", "document"), "questions")):
        where = f"questions[{k}]"
        signals = [str(s) for s in _list(_field(q, "signals", where), where + ".signals")]
        matrix = [
            [_r(x, f"{where}.conditional[{a}][{b}]") for b, x in enumerate(_list(row, f"{where}.conditional[{a}]"))]
            for a, row in enumerate(_list(_field(q, "conditional", where), where + ".conditional"))
        ]
        questions.append((str(_field(q, "id", where)), signals, matrix))
    advertisers = []
    for k, a in enumerate(_list(_field(doc, "advertisers", "document"), "advertisers")):
        where = f"advertisers[{k}]"
        conv = [_r(x, f"{where}.conversion[{t}]") for t, x in enumerate(_list(_field(a, "conversion", where), where))]
        advertisers.append((str(_field(a, "id", where)), _r(_field(a, "base_value", where), where + ".base_value"), conv))
    try:
        return Instance.build(states, prior, questions, advertisers)
    except ValueError as exc:
        raise DocumentError(str(exc)) from None


def instance_to_dict(instance: Instance) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "states": list(instance.states),
        "prior": [str(instance.prior[t]) for t in instance.states],
        "questions": [
            {
                "id": q.id,
                "signals": list(q.signals),
                "conditional": [[str(q.prob(s, t)) for t in instance.states] for s in q.signals],
            }
            for q in instance.questions
        ],
        "advertisers": [
            {
                "id": a.id,
                "base_value": str(a.base_value),
                "conversion": [str(a.conversion[t]) for t in instance.states],
            }
            for a in instance.advertisers
        ],
    }


def _load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"invalid JSON: {exc}") from None


def parse_instance(text: str) -> Instance:
    return instance_from_dict(_load_json(text))


def emit_instance(instance: Instance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def load_instance(path: str | Path) -> Instance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from None
    return parse_instance(text)


def fixture_path(name: str) -> Path:
    """Path of a bundled document, e.g. ``fixture_path("running_shoes.json")``."""
    return Path(str(resources.files("sponsored_suggestions") / "data" / name))


def profile_from_dict(instance: Instance, doc: dict) -> tuple[Strategy, ...]:
    """Read a profile document.

    Layout: ``{"schema_version": 1, "profile": [{"advertiser": id, "stage1": {q: bid},
    "stage2": {q: {signal: bid}}, "stage2_default": bid}]}``. ``stage2_default``
    fills any cell missing from ``stage2``. Entries are matched to advertisers by id.
    """
    if _field(doc, "schema_version", "profile document") != SCHEMA_VERSION:
        raise DocumentError("unsupported profile schema_version")
    by_id = {}
    for k, entry in enumerate(_list(_field(doc, "profile", "profile document"), "profile")):
        where = f"profile[{k}]"
        aid = str(_field(entry, "advertiser", where))
        stage1 = {str(q): _r(b, f"{where}.stage1[{q}]") for q, b in (entry.get("stage1") or {}).items()}
        stage2 = {}
        default = entry.get("stage2_default")
        if default is not None:
            default = _r(default, where + ".stage2_default")
            for q in instance.questions:
                for s in q.signals:
                    stage2[(q.id, s)] = default
        for q, cells in (entry.get("stage2") or {}).items():
            if not isinstance(cells, dict):
                raise DocumentError(f"{where}.stage2[{q}]: expected an object keyed by signal")
            for s, b in cells.items():
                stage2[(str(q), str(s))] = _r(b, f"{where}.stage2[{q}][{s}]")
        by_id[aid] = Strategy(stage1, stage2)
    unknown = set(by_id) - set(instance.advertiser_ids)
    if unknown:
        raise DocumentError(f"profile names unknown advertisers: {sorted(unknown)}")
    return tuple(by_id.get(a, Strategy({}, {})) for a in instance.advertiser_ids)


def profile_to_dict(instance: Instance, profile: Sequence[Strategy]) -> dict:
    out = []
    for a, s in zip(instance.advertisers, profile):
        stage2: dict[str, dict[str, str]] = {}
        for (q, sig), b in s.stage2.items():
            stage2.setdefault(q, {})[sig] = str(b)
        out.append({"advertiser": a.id, "stage1": {q: str(b) for q, b in s.stage1.items()}, "stage2": stage2})
    return {"schema_version": SCHEMA_VERSION, "profile": out}


def load_profile(instance: Instance, path: str | Path) -> tuple[Strategy, ...]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from None
    return profile_from_dict(instance, _load_json(text))


# --- reports -----------------------------------------------------------------

def decimal_str(x: Fraction, precision: int = 6) -> str:
    with localcontext() as ctx:
        ctx.prec = precision
        d = Decimal(x.numerator) / Decimal(x.denominator)
    return format(d.normalize(), "f")


def _plain(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _flatten(value: Any, prefix: str, rows: list) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(v, f"{prefix}.{k}" if prefix else str(k), rows)
    elif isinstance(value, (list, tuple)):
        for k, v in enumerate(value):
            _flatten(v, f"{prefix}[{k}]", rows)
    else:
        rows.append((prefix, value))


def render_report(kind: str, body: dict, fmt: str = "structured", precision: int = 6) -> str:
    """Render a report. ``structured`` is JSON; ``table`` and ``csv`` are flattened field/exact/decimal rows."""
    if fmt == "structured":
        return json.dumps({"kind": kind, "body": _plain(body)}, indent=2) + "\n"
    rows: list = []
    _flatten(body, "", rows)
    cooked = []
    for key, v in rows:
        if isinstance(v, Fraction):
            cooked.append((key, str(v), decimal_str(v, precision)))
        else:
            cooked.append((key, "" if v is None else str(v), ""))
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["field", "exact", "decimal"])
        w.writerows(cooked)
        return buf.getvalue()
    width = max([len("field")] + [len(k) for k, _, _ in cooked])
    ewidth = max([len("exact")] + [len(e) for _, e, _ in cooked])
    lines = [f"# {kind}", f"{'field':<{width}}  {'exact':>{ewidth}}  decimal"]
    lines += [f"{k:<{width}}  {e:>{ewidth}}  {d}".rstrip() for k, e, d in cooked]
    return "\n".join(lines) + "\n"


def render_rows(kind: str, rows: Sequence[dict], fmt: str = "structured", precision: int = 6) -> str:
    """Render flat records as one line each; rational columns get an extra ``<name>_decimal`` column."""
    if fmt == "structured":
        return json.dumps({"kind": kind, "rows": _plain(list(rows))}, indent=2) + "\n"
    columns: list[str] = []
    for r in rows:
        for k, v in r.items():
            if k not in columns:
                columns.append(k)
    rational = [k for k in columns if any(isinstance(r.get(k), Fraction) for r in rows)]
    header = []
    for k in columns:
        header += [k, k + "_decimal"] if k in rational else [k]
    table = []
    for r in rows:
        line = []
        for k in columns:
            v = r.get(k)
            if k in rational:
                line += [str(v), decimal_str(v, precision)] if isinstance(v, Fraction) else ["" if v is None else str(v), ""]
            else:
                line.append("" if v is None else str(v))
        table.append(line)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(table)
        return buf.getvalue()
    widths = [max(len(h), *(len(line[c]) for line in table)) if table else len(h) for c, h in enumerate(header)]
    out = [f"# {kind}", "  ".join(h.rjust(w) for h, w in zip(header, widths))]
    out += ["  ".join(x.rjust(w) for x, w in zip(line, widths)) for line in table]
    return "\n".join(out) + "\n"
