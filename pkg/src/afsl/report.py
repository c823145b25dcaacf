"""Result tables from experiment records (one row per strategy and K)."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, TextIO

from .metrics import format_percent
from .orchestrator import ExperimentRecord

COLUMNS = ("strategy", "K", "mean", "stddev")


def table_rows(record: ExperimentRecord, metric: str = "micro_f1") -> list[dict]:
    label = record.config.get("name") or f"{record.config['first_strategy']}+{record.config['later_strategy']}"
    rows = []
    for k, agg in zip(record.k_values, record.aggregates):
        mean, std = agg[metric]
        rows.append({"strategy": label, "K": k, "mean": format_percent(mean),
                     "stddev": format_percent(std)})
    return rows


def band_rows(record: ExperimentRecord, metric: str = "micro_f1") -> list[dict]:
    """Min/mean/max over seeds per K, for band plots."""
    rows = []
    for i, (k, agg) in enumerate(zip(record.k_values, record.aggregates)):
        vals = [run[i].metrics[metric] for run in record.runs]
        rows.append({"K": k, "min": min(vals), "mean": agg[metric][0], "max": max(vals)})
    return rows


def write_table(records: Iterable[ExperimentRecord], out: TextIO, metric: str = "micro_f1") -> None:
    records = list(records)
    forms = {r.stddev_form for r in records}
    out.write(f"# metric={metric} percent; stddev={'/'.join(sorted(forms))} (n-1 denominator)\n")
    writer = csv.DictWriter(out, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerows(table_rows(rec, metric))


def write_reports(record: ExperimentRecord, out_dir: str | Path, metric: str = "micro_f1") -> dict[str, Path]:
    """Write the table CSV, a band-plot CSV and a JSON summary into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"table": out_dir / f"table_{metric}.csv", "bands": out_dir / f"bands_{metric}.csv",
             "summary": out_dir / "summary.json"}
    with paths["table"].open("w", encoding="utf-8") as fh:
        write_table([record], fh, metric)
    with paths["bands"].open("w", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=("K", "min", "mean", "max"), lineterminator="\n")
        writer.writeheader()
        writer.writerows(band_rows(record, metric))
    summary = {"strategy": table_rows(record, metric)[0]["strategy"] if record.runs else "",
               "seeds": record.seeds, "stddev_form": record.stddev_form, "metric": metric,
               "rows": [{"K": k, **{m: {"mean": v[0], "stddev": v[1]} for m, v in agg.items()}}
                        for k, agg in zip(record.k_values, record.aggregates)]}
    paths["summary"].write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    return paths
