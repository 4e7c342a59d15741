"""Run reports and their serialized forms.

summary.json is the archival artifact: config echo, scalar results,
series, health counters, and error entries, all numeric values printed
as 40-significant-digit scientific strings. For a fixed config and build
it is byte-identical across runs and worker counts, which is why wall
time and worker count live in a separate run_info.json.

Series rows whose value is absent (an endpoint gap at a full-circle
step, say) are dropped from both the JSON and the CSV rather than
written as placeholders.
"""

import json
import os

from ..numerics import BigReal

SIG_DIGITS = 40


class UnknownSeries(KeyError):
    pass


def sci(x: BigReal, digits: int = SIG_DIGITS) -> str:
    """Fixed-width scientific notation, round-to-nearest at `digits`."""
    mantissa, exp, _ = x.raw().digits(10, digits)
    neg = mantissa.startswith("-")
    if neg:
        mantissa = mantissa[1:]
    if mantissa.strip("0") == "":
        # one canonical zero, even for a negative-zero float
        return f"0.{'0' * (digits - 1)}e+00"
    body = f"{mantissa[0]}.{mantissa[1:]}e{exp - 1:+03d}"
    return "-" + body if neg else body


def _jsonable(value):
    if isinstance(value, BigReal):
        return sci(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if value is None or isinstance(value, (bool, int, str)):
        return value
    raise TypeError(f"cannot serialize {type(value).__name__} into a report")


class ExperimentReport:
    """What a runner hands back: everything summary.json will hold.

    series maps a name to {"columns": (...), "rows": [tuples]}; the first
    column is always the step index n. outcomes, when present, is the
    per-sample tag list (size-gated by the caller).
    """

    __slots__ = ("kind", "config", "scalars", "series", "health", "errors", "outcomes")

    def __init__(self, kind, config, scalars=None, series=None, health=None,
                 errors=None, outcomes=None):
        self.kind = kind
        self.config = config
        self.scalars = scalars or {}
        self.series = series or {}
        self.health = health or {}
        self.errors = errors or []
        self.outcomes = outcomes

    def summary_json(self) -> str:
        payload = {
            "schema": 1,
            "kind": self.kind,
            "config": self.config,
            "scalars": _jsonable(self.scalars),
            "series": {
                name: {
                    "columns": list(spec["columns"]),
                    "rows": [_jsonable(r) for r in _present_rows(spec["rows"])],
                }
                for name, spec in sorted(self.series.items())
            },
            "health": _jsonable(self.health),
            "errors": _jsonable(self.errors),
        }
        if self.outcomes is not None:
            payload["outcomes"] = list(self.outcomes)
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _present_rows(rows):
    return [r for r in rows if all(v is not None for v in r)]


def emit_plot_data(report: ExperimentReport, series: str) -> str:
    """CSV text for one named series: header row, then (n, value...) rows."""
    spec = report.series.get(series)
    if spec is None:
        raise UnknownSeries(series)
    lines = [",".join(spec["columns"])]
    for row in _present_rows(spec["rows"]):
        cells = [str(row[0])]
        for v in row[1:]:
            cells.append(sci(v) if isinstance(v, BigReal) else str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_outputs(report: ExperimentReport, out_dir, run_info=None,
                  figures: bool = True):
    """summary.json, one CSV per series, run_info.json, figures."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        fh.write(report.summary_json())
    for name in sorted(report.series):
        path = os.path.join(out_dir, f"series_{name}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(emit_plot_data(report, name))
    if run_info is not None:
        with open(os.path.join(out_dir, "run_info.json"), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(run_info, indent=2, sort_keys=True) + "\n")
    if figures and report.series:
        from . import figures as _figures

        _figures.render(report, out_dir)
