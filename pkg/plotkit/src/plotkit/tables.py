"""ESS summary tables: replicate-averaged (min, median, max) triples per rate.

The Best column is the entrywise maximum of the triple across acceptance
rates, matching how headline throughput is reported.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from .figures import SchemaError

ESS_COLUMNS = (
    "experiment", "sampler", "target_rate", "replicate",
    "ess_min", "ess_median", "ess_max", "elapsed_seconds",
    "ess_per_sec_min", "ess_per_sec_median", "ess_per_sec_max",
)


def read_ess_rows(paths) -> list:
    rows = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in ESS_COLUMNS if c not in header]
            if missing:
                raise SchemaError(f"{path}: missing column {missing[0]!r}")
            n = 0
            for row in reader:
                rows.append(row)
                n += 1
            if n == 0:
                raise SchemaError(f"{path}: no data rows")
    return rows


def table_ess(paths, output: str | None = None, per_second: bool = True):
    """Build the sampler-by-rate table of replicate-mean ESS triples.

    Returns (text, header, rows); with ``output`` set, also writes
    ``<output>.txt`` and ``<output>.csv``.
    """
    raw = read_ess_rows(paths)
    prefix = "ess_per_sec" if per_second else "ess"
    fields = [f"{prefix}_min", f"{prefix}_median", f"{prefix}_max"]

    samplers = sorted({r["sampler"] for r in raw})
    rates = sorted({float(r["target_rate"]) for r in raw})

    triples = {}
    for sampler in samplers:
        for rate in rates:
            cell = [
                r for r in raw
                if r["sampler"] == sampler and float(r["target_rate"]) == rate
            ]
            if not cell:
                raise SchemaError(f"no rows for sampler {sampler!r} at rate {rate}")
            triples[(sampler, rate)] = tuple(
                float(np.mean([float(r[f]) for r in cell])) for f in fields
            )

    header = ["sampler"] + [f"rate={r:g}" for r in rates] + ["best"]
    rows = []
    for sampler in samplers:
        cells = [triples[(sampler, r)] for r in rates]
        best = tuple(max(c[k] for c in cells) for k in range(3))
        rows.append([sampler] + [_fmt_triple(c) for c in cells] + [_fmt_triple(best)])

    widths = [max(len(str(row[k])) for row in [header] + rows) for k in range(len(header))]
    lines = [
        "  ".join(str(cell).ljust(w) for cell, w in zip(row, widths))
        for row in [header] + rows
    ]
    text = "\n".join(lines)

    if output is not None:
        out_dir = os.path.dirname(output)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
        with open(output + ".txt", "w") as fh:
            fh.write(text + "\n")
        with open(output + ".csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    return text, header, rows


def _fmt_triple(t) -> str:
    return "({:.2f}, {:.2f}, {:.2f})".format(*t)
