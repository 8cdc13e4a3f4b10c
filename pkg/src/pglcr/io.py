"""File formats: response/covariate CSVs, the schema sidecar and run config files.

``responses.csv`` has a header of item names and integer codes ``1..K_j``.
``schema.json`` declares the levels::

    {"items": [{"name": "item1", "levels": 3}, ...]}

``covariates.csv`` has a header of predictor names and decimal values; the
intercept is never stored.  Empty fields and ``NA`` mark missing values.

Config files hold one ``key = value`` per line; ``#`` starts a comment.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, IngestionError
from .model import CategoricalDataset, CovariateMatrix, PriorConfig
from .trace import MODES

log = logging.getLogger(__name__)

__all__ = [
    "MISSING",
    "RunSettings",
    "read_config",
    "read_schema",
    "write_schema",
    "load_inputs",
    "write_responses",
    "write_covariates",
]

MISSING = frozenset({"", "NA", "na", "NaN", "nan", "."})


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise IngestionError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    while body and not any(cell.strip() for cell in body[-1]):
        body.pop()
    # in a one-column file an empty value reads as a blank line
    body = [[""] if not r and len(header) == 1 else r for r in body]
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise IngestionError(f"{path}: expected {len(header)} fields, found {len(r)}", row=i + 1)
    return header, body


def read_schema(path) -> tuple[tuple[str, ...], np.ndarray]:
    try:
        doc = json.loads(Path(path).read_text())
        items = doc["items"]
        names = tuple(str(it["name"]) for it in items)
        levels = np.array([int(it["levels"]) for it in items], dtype=np.int64)
    except OSError as exc:
        raise IngestionError(f"cannot read schema {path}: {exc.strerror}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise IngestionError(f"malformed schema {path}: {exc}") from None
    if len(set(names)) != len(names):
        raise IngestionError(f"schema {path} repeats an item name")
    if np.any(levels < 2):
        raise IngestionError(f"schema {path}: every item needs at least 2 levels")
    return names, levels


def write_schema(path, names, levels) -> None:
    doc = {"items": [{"name": n, "levels": int(k)} for n, k in zip(names, levels)]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _parse_code(cell, row, column, k):
    text = cell.strip()
    try:
        value = int(text)
    except ValueError:
        raise IngestionError(f"response {text!r} is not an integer code", row=row, column=column) from None
    if not 1 <= value <= k:
        raise IngestionError(f"response {value} outside declared range 1..{k}", row=row, column=column)
    return value


def _parse_float(cell, row, column):
    try:
        value = float(cell)
    except ValueError:
        raise IngestionError(f"covariate {cell.strip()!r} is not a number", row=row, column=column) from None
    if not np.isfinite(value):
        raise IngestionError("covariate is not finite", row=row, column=column)
    return value


def load_inputs(responses_path, schema_path, covariates_path=None, drop_incomplete: bool = False):
    """Read and validate the input files.

    Returns ``(data, covariates, kept_rows)`` where ``kept_rows`` are the
    0-based data rows retained.  Rows with a missing value in either file
    abort the load unless ``drop_incomplete``.  Row numbers in errors are
    1-based data rows (the header is not counted).
    """
    names, levels = read_schema(schema_path)
    header, body = _read_rows(responses_path)
    if tuple(header) != names:
        raise IngestionError(f"responses header {header} does not match schema items {list(names)}")
    cov_header, cov_body = (None, None)
    if covariates_path is not None:
        cov_header, cov_body = _read_rows(covariates_path)
        if len(cov_body) != len(body):
            raise IngestionError(f"covariates have {len(cov_body)} rows, responses have {len(body)}")

    incomplete = []
    for i, r in enumerate(body):
        gap = any(c.strip() in MISSING for c in r) or (
            cov_body is not None and any(c.strip() in MISSING for c in cov_body[i]))
        if gap:
            incomplete.append(i)
    if incomplete and not drop_incomplete:
        shown = ", ".join(str(i + 1) for i in incomplete[:10])
        more = "" if len(incomplete) <= 10 else f" and {len(incomplete) - 10} more"
        raise IngestionError(f"{len(incomplete)} rows have missing values (rows {shown}{more}); "
                             "pass --drop-incomplete to drop them")
    if incomplete:
        log.warning("dropped %d incomplete rows", len(incomplete))
    skip = set(incomplete)
    kept = np.array([i for i in range(len(body)) if i not in skip], dtype=np.int64)
    if kept.size == 0:
        raise IngestionError("no complete rows remain")

    codes = np.array([[_parse_code(body[i][j], i + 1, names[j], levels[j]) for j in range(len(names))]
                      for i in kept], dtype=np.int64).reshape(kept.size, len(names))
    data = CategoricalDataset(codes, levels, names)
    covariates = None
    if cov_body is not None:
        raw = np.array([[_parse_float(cov_body[i][l], i + 1, cov_header[l]) for l in range(len(cov_header))]
                        for i in kept], dtype=float).reshape(kept.size, len(cov_header))
        covariates = CovariateMatrix.from_covariates(raw, cov_header)
    return data, covariates, kept


def write_responses(path, data: CategoricalDataset) -> None:
    names = data.item_names or tuple(f"item{j + 1}" for j in range(data.n_items))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        w.writerows(np.asarray(data.responses, dtype=np.int64).tolist())


def write_covariates(path, covariates: CovariateMatrix) -> None:
    p = covariates.n_predictors
    names = list(covariates.names) if covariates.names else [f"x{l + 1}" for l in range(p)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in covariates.design[:, 1:]:
            w.writerow([repr(float(v)) for v in row])


# --------------------------------------------------------------------------
# run configuration
# --------------------------------------------------------------------------


@dataclass
class RunSettings:
    """Everything a ``fit`` needs besides file paths.  Defaults are the library defaults."""

    model: str = "lcr"
    mode: str = "both"
    g: int = 2
    n_iter: int = 50_000
    burn_in: int = 1_000
    thin: int = 10
    seed: int = 0
    alpha: float = 1.0
    lam: float = 1.0
    coef_prior_var: float = 100.0
    coef_prior_var_overrides: dict = field(default_factory=dict)
    item_prior: float = 0.5
    pred_prior: float = 0.5

    def validate(self):
        if self.model not in ("lca", "lcr"):
            raise ConfigError(f"model must be 'lca' or 'lcr', got {self.model!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.model == "lca" and self.mode not in ("full", "item_sel"):
            raise ConfigError("lca supports mode 'item_sel' (or 'full' for no item selection)")
        if self.n_iter <= self.burn_in:
            raise ConfigError(f"n_iter ({self.n_iter}) must exceed burn_in ({self.burn_in})")
        if self.thin < 1 or self.burn_in < 0 or self.seed < 0 or self.g < 1:
            raise ConfigError("thin and g must be positive, burn_in and seed non-negative")
        self.priors()

    def priors(self) -> PriorConfig:
        try:
            return PriorConfig(
                item_concentration=self.alpha,
                class_concentration=self.lam,
                coef_variance=self.coef_prior_var,
                item_inclusion_prior=self.item_prior,
                predictor_inclusion_prior=self.pred_prior,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def resolve_overrides(self, covariate_names) -> dict:
        """Map override keys (predictor names, ``intercept`` or row numbers) to coefficient rows."""
        rows = {}
        names = list(covariate_names)
        for key, var in self.coef_prior_var_overrides.items():
            if key == "intercept":
                row = 0
            elif key in names:
                row = names.index(key) + 1
            else:
                try:
                    row = int(key)
                except ValueError:
                    raise ConfigError(f"override refers to unknown predictor {key!r}") from None
                if not 0 <= row <= len(names):
                    raise ConfigError(f"override row {row} out of range")
            rows[row] = float(var)
        return rows

    def as_dict(self) -> dict:
        return {
            "model": self.model, "mode": self.mode, "g": self.g, "n_iter": self.n_iter,
            "burn_in": self.burn_in, "thin": self.thin, "seed": self.seed, "alpha": self.alpha,
            "lambda": self.lam, "coef_prior_var": self.coef_prior_var,
            "coef_prior_var_overrides": dict(self.coef_prior_var_overrides),
            "item_prior": self.item_prior, "pred_prior": self.pred_prior,
        }


_INT_KEYS = {"g", "n_iter", "burn_in", "thin", "seed"}
_FLOAT_KEYS = {"alpha": "alpha", "lambda": "lam", "coef_prior_var": "coef_prior_var",
               "item_prior": "item_prior", "pred_prior": "pred_prior"}


def parse_overrides(text: str) -> dict:
    """``"x4:25, x5:25"`` -> ``{"x4": 25.0, "x5": 25.0}``."""
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = part.partition(":")
        if not sep:
            raise ConfigError(f"override {part!r} must look like name:variance")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"override variance {value.strip()!r} is not a number") from None
    return out


def apply_setting(settings: RunSettings, key: str, value: str) -> None:
    key = key.strip()
    value = value.strip()
    try:
        if key in _INT_KEYS:
            setattr(settings, key, int(value))
        elif key in _FLOAT_KEYS:
            setattr(settings, _FLOAT_KEYS[key], float(value))
        elif key in ("model", "mode"):
            setattr(settings, key, value)
        elif key == "coef_prior_var_overrides":
            settings.coef_prior_var_overrides = parse_overrides(value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r}") from None


def read_config(path, settings: RunSettings | None = None) -> RunSettings:
    settings = settings or RunSettings()
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for number, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{number}: expected 'key = value'")
        apply_setting(settings, key, value)
    return settings
