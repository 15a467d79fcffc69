"""The report CSV schemas this package consumes.

These mirror the emitting side's declared column sets exactly; they are the
whole coupling surface between the two packages. Loading validates the
header before touching any row so a wrong file fails loudly, naming the
offending column.
"""

import csv

KINDS = ("effort", "cka", "spectrum", "curves")

# kind -> columns that must be present (curves additionally needs a y column)
REQUIRED = {
    "effort": ("block", "mean", "std"),
    "cka": ("stage_a", "stage_b", "mean"),
    "spectrum": ("stage", "index", "mean", "std"),
    "curves": ("step",),
}

# recognised y columns for the curves kind, in preference order
CURVE_COLUMNS = ("loss", "query_accuracy")

NUMERIC = {
    "effort": ("mean", "std"),
    "cka": ("mean",),
    "spectrum": ("index", "mean", "std"),
    "curves": ("step",) + CURVE_COLUMNS,
}


class SchemaError(ValueError):
    """Input file does not match the declared report schema."""


def load_rows(path, kind):
    """Typed rows from one report CSV, after validating its header."""
    if kind not in KINDS:
        raise SchemaError(f"unknown figure kind {kind!r}; "
                          f"expected one of {', '.join(KINDS)}")
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for col in REQUIRED[kind]:
            if col not in header:
                raise SchemaError(
                    f"{path}: missing required column {col!r} "
                    f"for kind {kind!r} (header: {', '.join(header)})")
        if kind == "curves" and not any(c in header for c in CURVE_COLUMNS):
            raise SchemaError(
                f"{path}: missing a curve column ({' or '.join(CURVE_COLUMNS)})"
                f" (header: {', '.join(header)})")
        rows = []
        for row in reader:
            typed = dict(row)
            for col in NUMERIC[kind]:
                if col in header:
                    try:
                        typed[col] = float(row[col])
                    except (TypeError, ValueError):
                        raise SchemaError(
                            f"{path}: column {col!r} has non-numeric "
                            f"value {row[col]!r}")
            if kind == "spectrum":
                typed["index"] = int(typed["index"])
            rows.append(typed)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def curve_column(rows):
    """Which y column a curves file carries."""
    for col in CURVE_COLUMNS:
        if col in rows[0]:
            return col
    raise SchemaError("no curve column present")
