"""Parameter documents: parsing, serialization, digests and bundled examples."""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .errors import ValidationError
from .field import FieldParams
from .poly import UniPoly

SCHEMA_VERSION = "1"
BUNDLED = (
    "trivial_shift",
    "linear_p1",
    "quadratic_a12",
    "two_annuli",
    "mu_negative",
    "mu_zero",
    "mu_positive",
    "big_degree",
    "attracting_3cycle",
)


def _rational(value, path: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise ValidationError(f"{path}: expected an integer or a 'p/q' string, got {value!r}")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"{path}: not a rational: {value!r}") from exc


def _coeff_list(doc: dict, key: str) -> UniPoly:
    if key not in doc:
        raise ValidationError(f"{key}: missing")
    arr = doc[key]
    if not isinstance(arr, list) or not arr:
        raise ValidationError(f"{key}: expected a non-empty coefficient array (ascending degree)")
    return UniPoly([_rational(v, f"{key}[{i}]") for i, v in enumerate(arr)])


def _group(doc: dict, key: str, fields: tuple[str, ...]) -> dict:
    if key not in doc:
        raise ValidationError(f"{key}: missing")
    grp = doc[key]
    if not isinstance(grp, dict):
        raise ValidationError(f"{key}: expected an object with keys {', '.join(fields)}")
    unknown = set(grp) - set(fields)
    if unknown:
        raise ValidationError(f"{key}.{sorted(unknown)[0]}: unknown key")
    return {f: _rational(grp.get(f, 0), f"{key}.{f}") for f in fields}


def params_from_document(doc) -> FieldParams:
    """Validate a parsed document; errors name the offending field path."""
    if not isinstance(doc, dict):
        raise ValidationError("document: expected a JSON object")
    allowed = {"schema_version", "P1", "P2", "A1", "A2", "A3", "label", "notes"}
    unknown = set(doc) - allowed
    if unknown:
        raise ValidationError(f"{sorted(unknown)[0]}: unknown key")
    if "schema_version" in doc and str(doc["schema_version"]) != SCHEMA_VERSION:
        raise ValidationError(f"schema_version: unsupported version {doc['schema_version']!r}")
    P1 = _coeff_list(doc, "P1")
    P2 = _coeff_list(doc, "P2")
    A1 = _group(doc, "A1", ("a10", "a11", "a12"))
    A2 = _group(doc, "A2", ("a20", "a21"))
    A3 = _rational(doc.get("A3", 0), "A3")
    return FieldParams(P1, P2, A3=A3, label=str(doc.get("label", "")), **A1, **A2)


def _r(c: Fraction):
    return c.numerator if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def params_to_document(params: FieldParams) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "P1": [_r(c) for c in params.P1.coeffs],
        "P2": [_r(c) for c in params.P2.coeffs],
        "A1": {"a10": _r(params.a10), "a11": _r(params.a11), "a12": _r(params.a12)},
        "A2": {"a20": _r(params.a20), "a21": _r(params.a21)},
        "A3": _r(params.A3),
    }
    if params.label:
        doc["label"] = params.label
    return doc


def digest(doc) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canon.encode()).hexdigest()


def load_document(source: str) -> dict:
    """Read a params document from a path or a bundled example name."""
    path = Path(source)
    if path.is_file():
        text = path.read_text()
    else:
        name = source.removeprefix("bundled:").removesuffix(".json")
        name = Path(name).name if name.startswith(("examples/", "./examples/")) else name
        if name not in BUNDLED:
            raise ValidationError(f"params: no such file or bundled example: {source!r}")
        text = resources.files("nilflow.data").joinpath(f"{name}.json").read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"document: malformed JSON ({exc.msg} at line {exc.lineno})") from exc


def load_params(source: str) -> tuple[FieldParams, dict]:
    doc = load_document(source)
    return params_from_document(doc), doc


def bundle_examples() -> dict[str, dict]:
    """Bundled parameter documents by name."""
    return {name: load_document(name) for name in BUNDLED}
