"""Declarative experiment configurations (JSON documents, unknown keys rejected)."""

from __future__ import annotations

import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigError

MAX_M = 2 ** 12
MAX_N = 256
MAX_D = 2

KINDS = ("sew-demo", "lift", "integrate-matrix", "lyons-series", "transport",
         "smoothing-check", "gronwall", "stability")

# required fields per kind (beyond ``kind``)
REQUIRED = {
    "sew-demo": (),
    "lift": ("M",),
    "integrate-matrix": ("driver",),
    "lyons-series": ("driver",),
    "transport": ("field_id", "initial_datum_id", "M", "n", "substeps"),
    "smoothing-check": ("n", "d"),
    "gronwall": ("field_id", "initial_datum_id", "M", "n", "substeps"),
    "stability": ("field_id", "initial_datum_id", "n", "substeps", "levels"),
}

# threshold names each kind understands, with defaults
THRESHOLDS = {
    "sew-demo": {"sewing_constant": 1.0, "riemann_order_min": 0.95},
    "lift": {"chen_defect": 1e-12, "geometricity_defect": 1e-12},
    "integrate-matrix": {"euler_order_min": 1.9, "cross_method": 1e-6, "growth_ratio": 2.0,
                         "drift_order_min": 0.9, "duhamel_order_min": 0.9},
    "lyons-series": {"series_vs_euler": 1e-6, "flow_defect": 1e-6, "a2_match": 1e-8},
    "transport": {"max_principle_drift": 1e-12, "conservation_drift": 1e-3,
                  "doubling_factor": 0.5, "closed_form_error": 1e-6, "slope_tolerance": 0.1},
    "smoothing-check": {"ratio_spread": 4.0},
    "gronwall": {"slope_tolerance": 0.1, "method_agreement": 1e-8, "reduction": 1e-10,
                 "conservation_drift": 1e-3, "max_principle_drift": 1e-12},
    "stability": {"max_principle_drift": 1e-12},
}


class ExperimentConfig(BaseModel):
    """One experiment.  Sizes are capped at desk scale: ``M <= 2^12``, ``n <= 256``, ``d <= 2``."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["sew-demo", "lift", "integrate-matrix", "lyons-series", "transport",
                  "smoothing-check", "gronwall", "stability"]
    seed: int = Field(1, ge=0)
    T: float = Field(1.0, gt=0.0, le=16.0)
    M: int | None = Field(None, ge=1, le=MAX_M)
    times_M: int | None = Field(None, ge=1, le=MAX_M)
    n: int | None = Field(None, ge=8, le=MAX_N)
    d: int | None = Field(None, ge=1, le=MAX_D)
    substeps: int | None = Field(None, ge=1, le=2 ** 16)
    gamma_nominal: float = Field(0.4, gt=1 / 3, le=1.0)
    path: Literal["brownian", "spiral", "parabola"] = "brownian"
    ell: int = Field(1, ge=1, le=4)
    field_id: str | None = None
    initial_datum_id: str | None = None
    test_function_ids: list[str] = Field(default_factory=lambda: ["trig1", "trig2", "bump"])
    driver: str | None = None
    levels: list[int] | None = None
    sewing_levels: int = Field(12, ge=1, le=20)
    zeta: float = Field(2.0, gt=1.0)
    eps_exponents: list[int] = Field(default_factory=lambda: list(range(1, 9)))
    j0: int = Field(3, ge=1, le=6)
    lambda_scan: tuple[int, int] = (0, 30)
    scales: tuple[int, int] | None = None
    renormalize: list[str] = Field(default_factory=list)
    check_doubling: bool = False
    closed_form: bool = False
    fit_slopes: bool = True
    datum_mode: Literal["analytic", "interpolated"] = "analytic"
    write_solution: bool = False
    drift: list[list[float]] | None = None
    orders_M: list[int] = Field(default_factory=lambda: [8, 16, 32, 64, 128])
    sub_factor: int = Field(64, ge=1, le=256)
    n_max: int = Field(8, ge=2, le=12)
    series_levels: int = Field(10, ge=1, le=14)
    output: str | None = None
    thresholds: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _kind_rules(self):
        missing = [f for f in REQUIRED[self.kind] if getattr(self, f) is None]
        if missing:
            raise ValueError(f"kind {self.kind!r} requires: {', '.join(missing)}")
        unknown = sorted(set(self.thresholds) - set(THRESHOLDS[self.kind]))
        if unknown:
            raise ValueError(f"unknown threshold names for kind {self.kind!r}: {unknown}; "
                             f"known: {sorted(THRESHOLDS[self.kind])}")
        if self.n is not None and self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two, got {self.n}")
        if self.levels is not None:
            if len(self.levels) < 2 or any(b <= a for a, b in zip(self.levels, self.levels[1:])):
                raise ValueError("levels must be strictly increasing with at least two entries")
            if 2 ** self.levels[-1] > MAX_M:
                raise ValueError(f"finest level 2^{self.levels[-1]} exceeds the cap M <= {MAX_M}")
        lo, hi = self.lambda_scan
        if not 0 <= lo <= hi <= 60:
            raise ValueError("lambda_scan must satisfy 0 <= j_min <= j_max <= 60")
        return self

    def threshold(self, name: str) -> float:
        return self.thresholds.get(name, THRESHOLDS[self.kind][name])

    def resolved(self) -> dict:
        """Every field with defaults filled in, thresholds included."""
        out = self.model_dump(mode="json")
        out["thresholds"] = {**THRESHOLDS[self.kind], **self.thresholds}
        return out


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_config(data: dict, seed: int | None = None) -> ExperimentConfig:
    """Validate a config mapping; ``seed`` overrides the document's seed."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if seed is not None:
        data = {**data, "seed": seed}
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: invalid JSON ({err})") from None
    return parse_config(data, seed)
