"""File formats: dataset CSV, mixture-parameter JSON, scenario grids.

Dataset CSV: one row per observation, d numeric columns, '.' decimal
separator, UTF-8. A header line is optional and detected by attempting to
parse the first line as numbers.

Mixture parameters JSON:
    {"weights": [...], "components": [{"mean": [...], "cov": [[...]]}]}
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .errors import InvariantError, ParseError
from .harness import Scenario
from .mixture import Dataset, GaussianComponent, MixtureParams
from .simgen import GenSpec
from .stp import AlphaSchedule

_VARIANT_ALIASES = {
    "split1": "split_k1", "split_k1": "split_k1",
    "split2": "split_k2", "split_k2": "split_k2",
    "swapped": "swapped",
}


def normalize_variant(name: str) -> str:
    try:
        return _VARIANT_ALIASES[name.strip().lower()]
    except KeyError:
        raise ParseError(f"unknown test variant {name!r}; "
                         f"expected one of {sorted(set(_VARIANT_ALIASES))}") from None


def _parse_cells(cells, line_no):
    values = []
    for col, cell in enumerate(cells, start=1):
        text = cell.strip()
        try:
            values.append(float(text))
        except ValueError:
            raise ParseError(
                f"line {line_no}, column {col}: {text!r} is not a number",
                line=line_no, column=col) from None
    return values


def load_dataset_csv(path) -> Dataset:
    """Read a dataset CSV; the header line, if any, is detected and skipped."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw_lines = fh.readlines()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc

    lines = [(no, ln.strip()) for no, ln in enumerate(raw_lines, start=1)
             if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: file contains no data")

    first_no, first = lines[0]
    first_cells = first.split(",")
    try:
        _parse_cells(first_cells, first_no)
        start = 0
    except ParseError:
        start = 1  # header line
    if start == 1 and len(lines) == 1:
        raise ParseError(f"{path}: only a header line, no data rows")

    rows = []
    width = None
    for no, ln in lines[start:]:
        cells = ln.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(
                f"line {no}: expected {width} columns, found {len(cells)}",
                line=no)
        rows.append(_parse_cells(cells, no))
    return Dataset(np.asarray(rows, dtype=np.float64))


def write_dataset_csv(data: Dataset, path, header: Optional[list[str]] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header is not None:
            if len(header) != data.d:
                raise InvariantError("header length must match column count")
            fh.write(",".join(header) + "\n")
        for row in data.rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}", line=exc.lineno,
                         column=exc.colno) from exc


def params_to_json_dict(params: MixtureParams) -> dict:
    return {
        "weights": [float(w) for w in params.weights],
        "components": [
            {"mean": [float(v) for v in c.mean],
             "cov": [[float(v) for v in row] for row in c.covariance]}
            for c in params.components
        ],
    }


def params_from_json_dict(obj: dict) -> MixtureParams:
    try:
        weights = obj["weights"]
        comps = [GaussianComponent(np.asarray(c["mean"], dtype=float),
                                   np.asarray(c["cov"], dtype=float))
                 for c in obj["components"]]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed mixture-parameters JSON: {exc}") from exc
    return MixtureParams(weights=np.asarray(weights, dtype=float),
                         components=tuple(comps))


def load_params_json(path) -> MixtureParams:
    return params_from_json_dict(_read_json(path))


def write_json(obj: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_genspec_json(path) -> GenSpec:
    obj = _read_json(path)
    try:
        kwargs = {
            "g0": int(obj["g0"]),
            "d": int(obj["d"]),
            "omega_bar_target": float(obj["omega_bar_target"]),
            "seed": int(obj["seed"]),
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed generator spec: {exc}") from exc
    for key in ("min_weight", "mc_samples", "mean_low", "mean_high",
                "eig_low", "eig_high"):
        if key in obj:
            kwargs[key] = obj[key]
    return GenSpec(**kwargs)


def _schedule_from_dict(obj: dict) -> AlphaSchedule:
    if "alpha_schedule" in obj:
        sched = obj["alpha_schedule"]
        if sched.get("kind") == "power":
            return AlphaSchedule.power(float(sched["kappa"]))
        return AlphaSchedule.fixed(float(sched["alpha"]))
    if "kappa" in obj:
        return AlphaSchedule.power(float(obj["kappa"]))
    if "alpha" in obj:
        return AlphaSchedule.fixed(float(obj["alpha"]))
    raise ParseError("scenario needs 'alpha', 'kappa', or 'alpha_schedule'")


def load_scenarios_json(path) -> list[Scenario]:
    """Parse a scenario grid: a JSON array of scenario objects."""
    grid = _read_json(path)
    if not isinstance(grid, list) or not grid:
        raise ParseError(f"{path}: expected a nonempty JSON array of scenarios")
    scenarios = []
    for pos, obj in enumerate(grid):
        try:
            kwargs = {
                "g0": int(obj["g0"]),
                "d": int(obj["d"]),
                "omega_bar": float(obj["omega_bar"]),
                "n1": int(obj["n1"]),
                "l": int(obj["l"]),
                "variant": normalize_variant(obj["variant"]),
                "alpha_schedule": _schedule_from_dict(obj),
                "r": int(obj["r"]),
                "base_seed": int(obj["base_seed"]),
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"scenario #{pos}: {exc}") from exc
        for key in ("n2", "run_ic", "ic_g_max", "g_max", "fixed_params",
                    "restarts", "max_iters", "rel_tol", "cov_ridge",
                    "min_weight", "mc_samples", "scenario_id"):
            if key in obj:
                kwargs[key] = obj[key]
        scenarios.append(Scenario(**kwargs))
    return scenarios


def load_results_csv(path) -> list[dict]:
    """Re-parse an emitted results CSV into dicts (round-trip helper)."""
    import csv as _csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        out = []
        for row in reader:
            parsed = {}
            for key, val in row.items():
                if val == "":
                    parsed[key] = None
                else:
                    try:
                        fval = float(val)
                        parsed[key] = int(fval) if fval.is_integer() and "." not in val else fval
                    except ValueError:
                        parsed[key] = val
            out.append(parsed)
    return out
