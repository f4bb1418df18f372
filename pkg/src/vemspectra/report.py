"""Tables, JSON documents and figures for finished runs.

Output is byte-stable for identical inputs: floats are written with six
significant digits, keys keep a fixed order and SVG figures carry no
timestamp and a fixed id salt.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .experiments import ExperimentConfig, Test1Result, Test2Result

ADAPTIVE_COLUMNS = ("N", "omega_h1", "error", "R2", "theta2", "J2", "eta2", "effectivity")
FORMATS = ("csv", "json", "svg")

_NUM = {"type": ["number", "null"]}
_CONFIG_SCHEMA = {"type": "object"}

TEST1_SCHEMA = {
    "type": "object",
    "required": ["kind", "name", "config", "family", "sizes", "num_dofs", "modes"],
    "additionalProperties": False,
    "properties": {
        "kind": {"const": "uniform-frequencies"},
        "name": {"type": "string"},
        "config": _CONFIG_SCHEMA,
        "family": {"type": "string"},
        "sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "num_dofs": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "modes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["mode", "omega", "order", "extrapolated", "fit_residual"],
                "additionalProperties": False,
                "properties": {
                    "mode": {"type": "integer", "minimum": 1},
                    "omega": {"type": "array", "items": {"type": "number"}},
                    "order": _NUM,
                    "extrapolated": _NUM,
                    "fit_residual": _NUM,
                },
            },
        },
    },
}

TEST2_SCHEMA = {
    "type": "object",
    "required": ["kind", "name", "config", "omega_ref", "runs"],
    "additionalProperties": False,
    "properties": {
        "kind": {"const": "adaptive-error"},
        "name": {"type": "string"},
        "config": _CONFIG_SCHEMA,
        "omega_ref": _NUM,
        "runs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["refinement", "slope", "intercept", "steps"],
                "additionalProperties": False,
                "properties": {
                    "refinement": {"type": "string"},
                    "slope": _NUM,
                    "intercept": _NUM,
                    "steps": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": list(ADAPTIVE_COLUMNS),
                            "additionalProperties": False,
                            "properties": {
                                "N": {"type": "integer", "minimum": 0},
                                **{c: _NUM for c in ADAPTIVE_COLUMNS[1:]},
                            },
                        },
                    },
                },
            },
        },
    },
}


def fmt(v) -> str:
    """Six significant digits; integers verbatim; empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.6g}"


def _round(v):
    if v is None:
        return None
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    if not math.isfinite(v):
        return None
    return float(f"{v:.6g}")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


# --- documents ---------------------------------------------------------


def _config_dict(config: ExperimentConfig) -> dict:
    return {k: _round(v) if isinstance(v, float) else v for k, v in config.to_dict().items()}


def test1_document(result: Test1Result) -> dict:
    modes = []
    for i, fit in enumerate(result.fits):
        modes.append(
            {
                "mode": i + 1,
                "omega": [_round(v) for v in result.frequencies[:, i]],
                "order": _round(fit.order) if fit else None,
                "extrapolated": _round(fit.limit) if fit else None,
                "fit_residual": _round(fit.residual) if fit else None,
            }
        )
    return {
        "kind": "uniform-frequencies",
        "name": result.config.name,
        "config": _config_dict(result.config),
        "family": result.config.family,
        "sizes": [int(n) for n in result.sizes],
        "num_dofs": [int(n) for n in result.num_dofs],
        "modes": modes,
    }


def test2_document(result: Test2Result) -> dict:
    ref = result.config.omega_ref[0] if result.config.omega_ref else None
    runs = []
    for run in result.runs:
        runs.append(
            {
                "refinement": run.refinement,
                "slope": _round(run.slope),
                "intercept": _round(run.intercept),
                "steps": [{k: _round(row[k]) for k in ADAPTIVE_COLUMNS} for row in run.rows()],
            }
        )
    return {
        "kind": "adaptive-error",
        "name": result.config.name,
        "config": _config_dict(result.config),
        "omega_ref": _round(ref),
        "runs": runs,
    }


def document(result) -> dict:
    if isinstance(result, Test1Result):
        return test1_document(result)
    if isinstance(result, Test2Result):
        return test2_document(result)
    raise TypeError(f"cannot report {type(result).__name__}")


def schema_for(doc: dict) -> dict:
    return TEST1_SCHEMA if doc.get("kind") == "uniform-frequencies" else TEST2_SCHEMA


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


# --- tables ------------------------------------------------------------


def frequency_table(doc: dict) -> str:
    """One row per mode: frequencies per mesh size, fitted order, limit."""
    header = ["mode"] + [f"n={n}" for n in doc["sizes"]] + ["order", "extrapolated", "fit_residual"]
    rows = [
        [m["mode"], *m["omega"], m["order"], m["extrapolated"], m["fit_residual"]]
        for m in doc["modes"]
    ]
    return _csv(header, rows)


def adaptive_table(steps) -> str:
    """Per-step estimator table; ``steps`` are dicts keyed by ``ADAPTIVE_COLUMNS``."""
    return _csv(ADAPTIVE_COLUMNS, [[s[c] for c in ADAPTIVE_COLUMNS] for s in steps])


def rates_table(doc: dict) -> str:
    rows = [[r["refinement"], len(r["steps"]), r["slope"], r["intercept"]] for r in doc["runs"]]
    return _csv(["refinement", "steps", "slope", "intercept"], rows)


# --- figures -----------------------------------------------------------


def _figure_context():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt, {"svg.hashsalt": "vemspectra", "svg.fonttype": "none"}


def _save(fig, path: Path) -> None:
    meta = {"Date": None} if path.suffix == ".svg" else {}
    fig.savefig(path, metadata=meta)


def plot_error_curves(doc: dict, path: Path) -> None:
    plt, rc = _figure_context()
    with plt.rc_context(rc):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        for run in doc["runs"]:
            pts = [(s["N"], s["error"]) for s in run["steps"] if s["error"]]
            if not pts:
                continue
            n, err = map(np.array, zip(*pts))
            label = run["refinement"]
            if run["slope"] is not None:
                label += f"  (slope {run['slope']:.2f})"
            ax.loglog(n, err, marker="o", ms=3, label=label)
        ax.set_xlabel("degrees of freedom N")
        ax.set_ylabel(r"$|\omega_1 - \omega_{h1}|$")
        ax.grid(True, which="both", lw=0.3)
        ax.legend()
        fig.tight_layout()
        _save(fig, path)
        plt.close(fig)


def plot_frequency_convergence(doc: dict, path: Path) -> None:
    plt, rc = _figure_context()
    h = 1.0 / np.array(doc["sizes"], dtype=float)
    with plt.rc_context(rc):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        for m in doc["modes"]:
            if m["extrapolated"] is None:
                continue
            err = np.abs(np.array(m["omega"]) - m["extrapolated"]) / m["extrapolated"]
            ok = err > 0
            ax.loglog(h[ok], err[ok], marker="o", ms=3, label=f"mode {m['mode']} (order {m['order']:.2f})")
        ax.set_xlabel("h = 1/n")
        ax.set_ylabel("relative frequency error")
        ax.grid(True, which="both", lw=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        _save(fig, path)
        plt.close(fig)


# --- emission ----------------------------------------------------------


def emit_report(result, out_dir, formats=FORMATS) -> list[Path]:
    """Write tables, JSON and figures for ``result`` into ``out_dir``."""
    doc = result if isinstance(result, dict) else document(result)
    return emit_document(doc, out_dir, formats)


def emit_document(doc: dict, out_dir, formats=FORMATS) -> list[Path]:
    bad = set(formats) - set(FORMATS)
    if bad:
        raise ValueError(f"unknown report formats {sorted(bad)}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    name = doc["name"]
    written: list[Path] = []

    def put(fname: str, text: str) -> None:
        p = out / fname
        p.write_text(text)
        written.append(p)

    if doc["kind"] == "uniform-frequencies":
        if "csv" in formats:
            put(f"{name}_frequencies.csv", frequency_table(doc))
        if "svg" in formats:
            p = out / f"{name}_convergence.svg"
            plot_frequency_convergence(doc, p)
            written.append(p)
    else:
        if "csv" in formats:
            for run in doc["runs"]:
                put(f"{name}_{run['refinement']}.csv", adaptive_table(run["steps"]))
            put(f"{name}_rates.csv", rates_table(doc))
        if "svg" in formats:
            p = out / f"{name}_error_curves.svg"
            plot_error_curves(doc, p)
            written.append(p)
    if "json" in formats:
        put(f"{name}.json", dumps(doc))
    return written


def load_document(path) -> dict:
    """Read and validate a JSON report."""
    import jsonschema

    doc = json.loads(Path(path).read_text())
    jsonschema.validate(doc, schema_for(doc))
    return doc
