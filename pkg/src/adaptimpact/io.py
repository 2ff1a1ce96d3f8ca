"""Reading and writing datasets, parameter files and result tables."""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import re
from pathlib import Path

import numpy as np

from .calibration import TimeSeriesDataset, add_noise, simulate_dataset
from .errors import DataFormatError, ValidationError
from .model import ModelParams

COLUMNS = ("year", "species", "ssb_tonnes", "landings_tonnes", "price_eur_kg", "tac_tonnes")
OPTIONAL = ("deflator",)
SPECIES = ("plaice", "sole")
# "148.589" style values: a European thousands separator, not a decimal
_THOUSANDS = re.compile(r"^\d{1,3}(\.\d{3})+$")
_GROUPED = re.compile(r"^\d{1,3}(,\d{3})+(\.\d*)?$")


def _number(text, column, line, required):
    text = text.strip()
    if text == "":
        if required:
            raise DataFormatError(f"missing value in {column}", line)
        return math.nan
    if _GROUPED.match(text):
        raise DataFormatError(f"{column} value {text!r} uses a thousands separator; "
                              "write plain digits with '.' as the decimal point", line)
    if column.endswith("_tonnes") and _THOUSANDS.match(text):
        raise DataFormatError(f"{column} value {text!r} looks like a European thousands "
                              f"separator; write {text.replace('.', '')} for that many tonnes", line)
    try:
        v = float(text)
    except ValueError:
        raise DataFormatError(f"{column} value {text!r} is not a number", line) from None
    if not math.isfinite(v):
        raise DataFormatError(f"{column} value {text!r} is not finite", line)
    if v < 0:
        raise DataFormatError(f"{column} value {text!r} is negative", line)
    return v


def read_dataset(stream, name="<data>"):
    """Parse the long-format CSV from an open text stream."""
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataFormatError(f"{name} is empty", 1) from None
    missing = [c for c in COLUMNS if c not in header]
    extra = [c for c in header if c not in COLUMNS + OPTIONAL]
    if missing or extra:
        raise DataFormatError(f"bad header: missing {missing}, unexpected {extra}", 1)
    col = {c: header.index(c) for c in header}
    rows = {sp: {} for sp in SPECIES}
    for line, rec in enumerate(reader, start=2):
        if not rec or all(not f.strip() for f in rec):
            continue
        if len(rec) != len(header):
            raise DataFormatError(f"expected {len(header)} fields, found {len(rec)}", line)
        ytext = rec[col["year"]].strip()
        if not ytext.isdigit():
            raise DataFormatError(f"year {ytext!r} is not an integer", line)
        year = int(ytext)
        sp = rec[col["species"]].strip().lower()
        if sp not in SPECIES:
            raise DataFormatError(f"unknown species {sp!r}", line)
        if year in rows[sp]:
            raise DataFormatError(f"duplicate year {year} for {sp}", line)
        if rows[sp] and year < max(rows[sp]):
            raise DataFormatError(f"years for {sp} are not increasing at {year}", line)
        vals = {c: _number(rec[col[c]], c, line, c in ("ssb_tonnes", "landings_tonnes"))
                for c in COLUMNS[2:]}
        if "deflator" in col:
            d = _number(rec[col["deflator"]], "deflator", line, False)
            if d == 0:
                raise DataFormatError("deflator is zero", line)
            if math.isfinite(d) and math.isfinite(vals["price_eur_kg"]):
                vals["price_eur_kg"] /= d
        rows[sp][year] = vals
    years = sorted(set(rows["plaice"]) | set(rows["sole"]))
    if not years:
        raise DataFormatError(f"{name} has no data rows")
    gaps = [(sp, y) for sp in SPECIES for y in years if y not in rows[sp]]
    if gaps:
        raise DataFormatError(f"years missing for some species: {gaps[:5]}")
    arr = {c: np.array([[rows[sp][y][c] for y in years] for sp in SPECIES]) for c in COLUMNS[2:]}
    return TimeSeriesDataset(np.array(years), arr["ssb_tonnes"], arr["landings_tonnes"],
                             arr["price_eur_kg"], arr["tac_tonnes"])


def load_dataset(paths):
    """Load one or more CSV files; several files are concatenated by year."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    parts = []
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise ValidationError(f"data file {p} does not exist")
        with open(p, newline="", encoding="utf-8") as fh:
            try:
                parts.append(read_dataset(fh, str(p)))
            except DataFormatError as exc:
                raise DataFormatError(f"{p}: {exc}") from None
    if len(parts) == 1:
        return parts[0]
    years = np.concatenate([d.years for d in parts])
    order = np.argsort(years, kind="stable")
    cat = lambda name: np.concatenate([getattr(d, name) for d in parts], axis=1)[:, order]
    return TimeSeriesDataset(years[order], cat("ssb"), cat("landings"), cat("price"), cat("tac"))


def _fmt(v):
    return "" if not np.isfinite(v) else repr(float(v))


def dataset_to_csv(ds):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for t, year in enumerate(ds.years):
        for i, sp in enumerate(SPECIES):
            w.writerow([int(year), sp, _fmt(ds.ssb[i, t]), _fmt(ds.landings[i, t]),
                        _fmt(ds.price[i, t]), _fmt(ds.tac[i, t])])
    return buf.getvalue()


def save_dataset(ds, path):
    Path(path).write_text(dataset_to_csv(ds), encoding="utf-8")


def generate_synthetic(params=ModelParams(), years=range(1990, 2021), noise=0.0, seed=0,
                       price_from=2001):
    """Model-generated dataset with multiplicative log-normal noise.

    Identical arguments give identical data.
    """
    if noise < 0:
        raise ValidationError("noise must be nonnegative")
    clean = simulate_dataset(params, years, price_from=price_from)
    return add_noise(clean, noise, seed) if noise > 0 else clean


# --------------------------------------------------------------------------
# parameter files: one ``name = value`` per line, ``#`` comments

def read_params(path, base=ModelParams()):
    values = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError("expected name = value", line_no)
        k, v = (s.strip() for s in line.split("=", 1))
        if k in values:
            raise DataFormatError(f"duplicate parameter {k}", line_no)
        try:
            values[k] = float(v)
        except ValueError:
            raise DataFormatError(f"value of {k} is not a number: {v!r}", line_no) from None
    return base.replace(**values) if values else base


def params_to_text(params):
    return "".join(f"{k} = {v!r}\n" for k, v in params.as_flat_dict().items())


def write_params(params, path):
    Path(path).write_text(params_to_text(params), encoding="utf-8")


# --------------------------------------------------------------------------
# tables

def display(v, digits=6):
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else f"{float(v):.{digits}g}"
    return str(v)


def table_to_csv(rows, columns=None, display_columns=True):
    """CSV text for a list of dict rows.

    Floats are written with full round-trip precision; when
    ``display_columns`` is true each numeric column gets a rounded
    ``<name>_display`` twin.
    """
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())
    numeric = [c for c in columns
               if isinstance(rows[0].get(c), (float, np.floating, int, np.integer))
               and not isinstance(rows[0].get(c), bool)]
    header = columns + ([f"{c}_display" for c in numeric] if display_columns else [])
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        out = []
        for c in columns:
            v = r.get(c, "")
            if isinstance(v, (bool, np.bool_)):
                out.append("true" if v else "false")
            elif isinstance(v, (float, np.floating)):
                out.append(_fmt(v))
            else:
                out.append(str(v))
        if display_columns:
            out.extend(display(r.get(c)) for c in numeric)
        w.writerow(out)
    return buf.getvalue()


def write_table(rows, path, columns=None):
    text = table_to_csv(rows, columns)
    Path(path).write_text(text, encoding="utf-8")
    return text


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, *, command, inputs, outputs, params, seeds=None, config=None, version=""):
    """JSON manifest of a run: input and output hashes, parameters, seeds.

    No timestamps, so identical runs give identical manifests.
    """
    doc = {
        "command": command,
        "tool_version": version,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
        "params": params.as_flat_dict() if params is not None else None,
        "seeds": seeds or {},
        "config": config or {},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return doc
