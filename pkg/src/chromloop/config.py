"""Versioned JSON configuration documents for the CLI.

One document can describe factors, batch attributes, design settings,
optimizer settings, thresholds and plant parameters.  Every section is
optional; missing sections fall back to the built-in EGBL reference
case-study values.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import refstudy
from .campaign import CampaignConfig
from .doe import FactorSpec, MaterialAttributes, ProcessParams
from .dspace import ThresholdSpec
from .errors import ConfigError
from .pareto import NsgaConfig
from .plant import PlantConfig
from .rsm import RegressionModel, make_model

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version", "factors", "batches", "optimization_batches",
    "pareto_batches", "design", "stepwise_p", "nsga", "thresholds",
    "constraints", "plant", "extra_validation_points",
    "representative_count", "dspace", "sensor_log_every", "figures",
}

_THRESHOLD_FIELDS = {
    "Y1": "tt_purity_min", "Y2": "tt_productivity_min",
    "Y3": "fg_purity_min", "Y4": "fg_productivity_min",
}


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate_config(doc)
    return doc


def validate_config(doc: dict) -> None:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {version!r}; expected "
            f"{SCHEMA_VERSION}")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")


def default_config() -> dict:
    """The reference case-study replica configuration."""
    return {
        "schema_version": SCHEMA_VERSION,
        "design": {"type": "dsd", "dummy": 2, "extra_centers": 3,
                   "seed": 0, "allocation_seed": 20},
        "optimization_batches": list(refstudy.OPTIMIZATION_BATCHES),
        "pareto_batches": ["250401", "250409"],
        "stepwise_p": 0.05,
        "nsga": {"population": 2000, "generations": 100, "seed": 7},
        "thresholds": {"Y1": 6.0, "Y2": 50.0, "Y3": 24.0, "Y4": 200.0},
        "constraints": [["Y1", 6.0], ["Y3", 24.0]],
        "plant": {"seed": 11, "dt": 1.0,
                  "noise_rel_sd": {"Y1": 0.07, "Y3": 0.07, "Y2": 0.08},
                  "truth_models": "reference"},
        "extra_validation_points": [
            {"batch": "231201", "params": [0.75, 1.0, 1.75, 0.5, 3.25, 0.5]},
        ],
        "representative_count": 5,
        "dspace": {"swept": [3, 4], "resolution": 41},
        "sensor_log_every": 30,
        "figures": True,
    }


def factors_from_config(doc: dict) -> tuple[FactorSpec, ...]:
    if "factors" not in doc:
        return refstudy.FACTORS
    try:
        return tuple(FactorSpec(f["name"], float(f["low"]), float(f["high"]),
                                f.get("unit", ""))
                     for f in doc["factors"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid factors section: {exc}") from exc


def batches_from_config(doc: dict) -> dict[str, MaterialAttributes]:
    if "batches" not in doc:
        return dict(refstudy.BATCH_ATTRIBUTES)
    out = {}
    try:
        for batch_id, vals in doc["batches"].items():
            out[batch_id] = MaterialAttributes(
                float(vals["tt_concentration"]), float(vals["tt_purity"]),
                float(vals["fg_concentration"]), float(vals["fg_purity"]),
                batch_id=batch_id)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid batches section: {exc}") from exc
    return out


def thresholds_from_config(doc: dict) -> ThresholdSpec | None:
    if "thresholds" not in doc:
        return refstudy.DESIGN_SPACE_THRESHOLDS
    section = doc["thresholds"]
    if section is None:
        return None
    unknown = set(section) - set(_THRESHOLD_FIELDS)
    if unknown:
        raise ConfigError(f"unknown threshold responses: {sorted(unknown)}")
    kwargs = {_THRESHOLD_FIELDS[k]: float(v) for k, v in section.items()}
    return ThresholdSpec(**kwargs)


def nsga_from_config(doc: dict) -> NsgaConfig:
    section = doc.get("nsga", {})
    known = {"population", "generations", "seed", "sbx_eta", "mutation_eta",
             "mutation_prob", "crossover_prob"}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown nsga keys: {sorted(unknown)}")
    return NsgaConfig(**section)


def truth_models_from_config(doc: dict) -> dict[str, RegressionModel]:
    section = doc.get("plant", {}).get("truth_models", "reference")
    if section == "reference":
        return {k: refstudy.REPORTED_MODELS[k] for k in ("Y1", "Y3", "Y2")}
    try:
        return {name: make_model(name, coefs)
                for name, coefs in section.items()}
    except (AttributeError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid truth_models section: {exc}") from exc


def plant_from_config(doc: dict) -> PlantConfig:
    section = dict(doc.get("plant", {}))
    section.pop("truth_models", None)
    known = {"seed", "dt", "noise_rel_sd", "column_inner_diameter",
             "bed_height", "column_height", "level_setpoint", "equil_flow",
             "regen_flow", "level_noise_sd", "sensor_noise_rel",
             "stabilization_rel_threshold", "stabilization_window",
             "acceleration"}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown plant keys: {sorted(unknown)}")
    return PlantConfig(
        batch_table=batches_from_config(doc),
        truth_models=truth_models_from_config(doc),
        **section)


def campaign_from_config(doc: dict) -> CampaignConfig:
    factors = factors_from_config(doc)
    design = doc.get("design", {})
    known = {"type", "dummy", "extra_centers", "seed", "allocation_seed"}
    unknown = set(design) - known
    if unknown:
        raise ConfigError(f"unknown design keys: {sorted(unknown)}")
    extra_points = []
    for item in doc.get("extra_validation_points", []):
        try:
            extra_points.append(
                (item["batch"], ProcessParams.from_values(item["params"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(
                f"invalid extra_validation_points entry: {exc}") from exc
    dspace = doc.get("dspace", {})
    try:
        return CampaignConfig(
            factors=factors,
            optimization_batches=tuple(
                doc.get("optimization_batches",
                        refstudy.OPTIMIZATION_BATCHES)),
            pareto_batches=tuple(doc.get("pareto_batches",
                                         ("250401", "250409"))),
            design=design.get("type", "dsd"),
            n_dummy=int(design.get("dummy", 2)),
            n_extra_center=int(design.get("extra_centers", 3)),
            stepwise_p=float(doc.get("stepwise_p", 0.05)),
            nsga=nsga_from_config(doc),
            thresholds=thresholds_from_config(doc),
            constraints=tuple((str(n), float(b))
                              for n, b in doc.get("constraints", [])),
            extra_validation_points=tuple(extra_points),
            design_seed=int(design.get("seed", 0)),
            allocation_seed=int(design.get("allocation_seed", 0)),
            representative_count=int(doc.get("representative_count", 5)),
            dspace_swept=tuple(dspace.get("swept", (3, 4))),
            dspace_resolution=int(dspace.get("resolution", 41)),
            sensor_log_every=int(doc.get("sensor_log_every", 30)),
            render_figures=bool(doc.get("figures", True)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
