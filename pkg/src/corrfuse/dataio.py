"""On-disk formats: dataset CSV, parameter and result JSON, odds ingestion, splits.

Dataset CSV header: ``example_id,true_label,p_1_1,...,p_1_J,...,p_K_J`` where
``p_k_l`` is classifier ``k``'s probability for class ``l``. Floats are
written with :func:`repr`, the shortest string that parses back to the same
double, so files round-trip bit-exactly.

Parameter JSON (``format = "corrfuse-params"``, ``version = 1``)::

    {"format", "version", "model": "ifm" | "cfm", "K", "J",
     "alpha": K x J x J, "prior_p": J, "delta": J x J (cfm only),
     "provenance": {...}, "diagnostics": {...}}

Fused-result JSON (``format = "corrfuse-fused"``) holds ``method``, ``ids``,
``posteriors`` (I x J), ``map_labels`` and optional ``labels``,
``provenance`` and ``diagnostics``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CfmParams, IfmParams, LabeledDataset, Simplex, ValidationError, make_simplex
from .sampling import make_rng

PARAMS_FORMAT = "corrfuse-params"
FUSED_FORMAT = "corrfuse-fused"
REPORT_FORMAT = "corrfuse-report"
FORMAT_VERSION = 1
ROW_SUM_RANGE = (0.98, 1.02)


class DataFormatError(ValidationError):
    pass


# ---------------------------------------------------------------- atomic files


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def jsonable(obj):
    """Convert numpy values to JSON types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, doc: dict) -> None:
    atomic_write_text(path, json.dumps(jsonable(doc), indent=2, allow_nan=False) + "\n")


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON ({exc})") from exc


def config_hash(config: dict) -> str:
    blob = json.dumps(jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- dataset CSV


def dataset_header(K: int, J: int) -> list[str]:
    return ["example_id", "true_label"] + [f"p_{k}_{l}" for k in range(1, K + 1) for l in range(1, J + 1)]


def format_dataset(data: LabeledDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(dataset_header(data.K, data.J))
    for i in range(data.I):
        w.writerow([data.ids[i], int(data.labels[i])] + [repr(float(v)) for v in data.outputs[i].ravel()])
    return buf.getvalue()


def write_dataset(path, data: LabeledDataset) -> None:
    atomic_write_text(path, format_dataset(data))


def _shape_from_header(header: list[str]) -> tuple[int, int]:
    if len(header) < 4 or header[0] != "example_id" or header[1] != "true_label":
        raise DataFormatError("line 1: header must start with 'example_id,true_label'")
    pairs = []
    for name in header[2:]:
        parts = name.split("_")
        if len(parts) != 3 or parts[0] != "p" or not parts[1].isdigit() or not parts[2].isdigit():
            raise DataFormatError(f"line 1: unexpected column {name!r}; expected p_<k>_<l>")
        pairs.append((int(parts[1]), int(parts[2])))
    K, J = max(p[0] for p in pairs), max(p[1] for p in pairs)
    if header != dataset_header(K, J):
        raise DataFormatError("line 1: probability columns must be p_1_1..p_K_J in row-major order")
    return K, J


def read_dataset(path, J: int | None = None, K: int | None = None) -> LabeledDataset:
    """Parse a dataset CSV; ``J``/``K`` are checked against the header when given."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    K_file, J_file = _shape_from_header([c.strip() for c in rows[0]])
    if (J is not None and J != J_file) or (K is not None and K != K_file):
        raise DataFormatError(f"{path}: header describes K={K_file}, J={J_file}; expected K={K}, J={J}")
    K, J = K_file, J_file
    ids, labels, outs = [], [], []
    seen = set()
    lo, hi = ROW_SUM_RANGE
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2 + K * J:
            raise DataFormatError(f"{path}: line {lineno}: expected {2 + K * J} fields, got {len(row)}")
        ex_id = row[0].strip()
        if ex_id in seen:
            raise DataFormatError(f"{path}: line {lineno}: duplicate example_id {ex_id!r}")
        seen.add(ex_id)
        try:
            label = int(row[1])
            vals = np.array([float(c) for c in row[2:]]).reshape(K, J)
        except ValueError as exc:
            raise DataFormatError(f"{path}: line {lineno}: {exc}") from exc
        if not 1 <= label <= J:
            raise DataFormatError(f"{path}: line {lineno}: label {label} outside 1..{J}")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise DataFormatError(f"{path}: line {lineno}: probabilities must be finite and >= 0")
        sums = vals.sum(axis=1)
        bad = np.flatnonzero((sums < lo) | (sums > hi))
        if bad.size:
            k = bad[0]
            raise DataFormatError(f"{path}: line {lineno}: classifier {k + 1} probabilities sum to "
                                  f"{sums[k]:.6g}, outside [{lo}, {hi}] (misaligned columns?)")
        ids.append(ex_id)
        labels.append(label)
        outs.append(vals)
    if not outs:
        raise DataFormatError(f"{path}: no data rows")
    return LabeledDataset(np.array(outs), np.array(labels), tuple(ids))


# ---------------------------------------------------------------- odds


def odds_to_simplex(odds, J: int, K: int = 1) -> list[Simplex]:
    """Decimal odds of ``K`` bookmakers (``K * J`` values, bookmaker-major)
    to probabilities by normalizing reciprocals."""
    o = np.asarray(odds, dtype=float)
    if o.size != K * J:
        raise ValidationError(f"expected {K * J} odds, got {o.size}")
    if not np.all(np.isfinite(o)) or np.any(o <= 1.0):
        raise ValidationError("decimal odds must be finite and > 1")
    return [make_simplex(1.0 / row) for row in o.reshape(K, J)]


# ---------------------------------------------------------------- splits


@dataclass(frozen=True)
class SplitSpec:
    test_per_class: int = 20
    n_repeats: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.test_per_class < 1 or self.n_repeats < 1:
            raise ValidationError("test_per_class and n_repeats must be >= 1")


def split_dataset(data: LabeledDataset, spec: SplitSpec) -> list[tuple[LabeledDataset, LabeledDataset]]:
    """Per repeat, ``test_per_class`` examples of every class go to the test
    set and the rest to training. Original row order is kept in both parts."""
    counts = data.class_counts()
    short = np.flatnonzero(counts <= spec.test_per_class)
    if short.size:
        j = short[0]
        raise ValidationError(f"class {j + 1} has {counts[j]} examples; need more than {spec.test_per_class}")
    out = []
    for r in range(spec.n_repeats):
        rng = make_rng(spec.seed, "split", r)
        test = np.zeros(data.I, dtype=bool)
        for j in range(data.J):
            idx = np.flatnonzero(data.labels == j + 1)
            test[rng.choice(idx, spec.test_per_class, replace=False)] = True
        out.append((data.subset(~test), data.subset(test)))
    return out


# ---------------------------------------------------------------- parameters


def params_document(params: IfmParams | CfmParams, provenance: dict | None = None,
                    diagnostics: dict | None = None) -> dict:
    cfm = isinstance(params, CfmParams)
    doc = {
        "format": PARAMS_FORMAT,
        "version": FORMAT_VERSION,
        "model": "cfm" if cfm else "ifm",
        "K": params.K,
        "J": params.J,
        "alpha": params.alpha,
        "prior_p": params.prior_p,
    }
    if cfm:
        doc["delta"] = params.delta
    doc["provenance"] = provenance or {}
    if diagnostics:
        doc["diagnostics"] = diagnostics
    return doc


def write_params(path, params: IfmParams | CfmParams, provenance: dict | None = None,
                 diagnostics: dict | None = None) -> None:
    write_json(path, params_document(params, provenance, diagnostics))


def params_from_document(doc: dict, source: str = "<params>") -> IfmParams | CfmParams:
    if doc.get("format") != PARAMS_FORMAT:
        raise DataFormatError(f"{source}: not a {PARAMS_FORMAT} document")
    if doc.get("version") != FORMAT_VERSION:
        raise DataFormatError(f"{source}: unsupported version {doc.get('version')!r}; expected {FORMAT_VERSION}")
    model = doc.get("model")
    if model not in ("ifm", "cfm"):
        raise DataFormatError(f"{source}: missing or unknown model tag {model!r}")
    try:
        alpha = np.array(doc["alpha"], dtype=float)
        ifm = IfmParams(alpha, doc.get("prior_p"))
        if (ifm.K, ifm.J) != (doc.get("K", ifm.K), doc.get("J", ifm.J)):
            raise DataFormatError(f"{source}: K/J fields disagree with the alpha array")
        if model == "ifm":
            return ifm
        if "delta" not in doc:
            raise DataFormatError(f"{source}: cfm parameters need 'delta'")
        return CfmParams(ifm, np.array(doc["delta"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{source}: malformed parameter document ({exc})") from exc


def read_params(path) -> IfmParams | CfmParams:
    return params_from_document(read_json(path), str(path))


# ---------------------------------------------------------------- fused results


def write_fused(path, method: str, ids, posteriors: np.ndarray, labels=None,
                provenance: dict | None = None, diagnostics: dict | None = None) -> None:
    P = np.asarray(posteriors, dtype=float)
    doc = {
        "format": FUSED_FORMAT,
        "version": FORMAT_VERSION,
        "method": method,
        "J": P.shape[1],
        "ids": list(ids),
        "posteriors": P,
        "map_labels": np.argmax(P, axis=1) + 1,
    }
    if labels is not None:
        doc["labels"] = np.asarray(labels)
    doc["provenance"] = provenance or {}
    if diagnostics:
        doc["diagnostics"] = diagnostics
    write_json(path, doc)


@dataclass(frozen=True)
class FusedFile:
    method: str
    ids: tuple
    posteriors: np.ndarray
    labels: np.ndarray | None
    provenance: dict


def read_fused(path) -> FusedFile:
    doc = read_json(path)
    if doc.get("format") != FUSED_FORMAT:
        raise DataFormatError(f"{path}: not a {FUSED_FORMAT} document")
    if doc.get("version") != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported version {doc.get('version')!r}")
    P = np.array(doc["posteriors"], dtype=float)
    ids = tuple(doc["ids"])
    if P.ndim != 2 or P.shape[0] != len(ids):
        raise DataFormatError(f"{path}: posteriors and ids disagree")
    labels = np.array(doc["labels"], dtype=int) if doc.get("labels") is not None else None
    return FusedFile(doc["method"], ids, P, labels, doc.get("provenance", {}))
