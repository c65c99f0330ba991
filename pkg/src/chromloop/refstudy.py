"""Reference EGBL case-study data.

Embedded records of the published definitive-screening campaign on
macroporous-resin purification of Ginkgo biloba leaf extract: the
20-run design with measured indicators, feed-batch material
attributes, the reported regression models, reported Pareto-optimal
solutions for two validation batches, and the design-space validation
points.  Used as golden fixtures by the acceptance checks and by the
``replicate-paper`` CLI command.
"""

from __future__ import annotations

from .doe import FactorSpec, MaterialAttributes, ProcessParams
from .dspace import ThresholdSpec
from .rsm import Dataset, RegressionModel, make_model

# Investigated ranges of the six process variables.
FACTORS = (
    FactorSpec("feed_flow", 0.5, 1.5, "BV/h"),
    FactorSpec("feed_time", 1.0, 2.0, "h"),
    FactorSpec("wash_flow", 1.5, 2.5, "BV/h"),
    FactorSpec("wash_time", 0.5, 1.5, "h"),
    FactorSpec("elution_flow", 2.5, 3.5, "BV/h"),
    FactorSpec("elution_time", 0.5, 1.5, "h"),
)

# Feed-batch material attributes: TT concentration (mg/mL), TT purity
# (%), FG concentration (mg/mL), FG purity (%).
BATCH_ATTRIBUTES: dict[str, MaterialAttributes] = {
    b: MaterialAttributes(*vals, batch_id=b) for b, vals in {
        "250401": (0.583, 1.01, 1.85, 3.21),
        "250402": (0.522, 0.926, 1.80, 3.19),
        "250403": (0.559, 0.914, 1.88, 3.09),
        "250404": (0.495, 0.966, 1.72, 3.36),
        "250405": (0.530, 0.949, 2.01, 3.60),
        "250406": (0.602, 1.10, 1.96, 3.59),
        "250407": (0.570, 0.948, 1.85, 3.07),
        "250408": (0.520, 0.920, 1.72, 3.04),
        "250409": (0.568, 0.894, 1.80, 2.83),
        "250501": (0.502, 0.874, 1.69, 2.94),
        "231102": (0.484, 0.944, 1.57, 3.06),
        "231201": (0.591, 1.14, 1.81, 3.50),
        "231202": (0.641, 1.16, 1.96, 3.55),
    }.items()
}

OPTIMIZATION_BATCHES = ("231102", "231202", "250402", "250403", "250404",
                        "250405", "250406", "250407", "250408", "250501")
VALIDATION_BATCHES = ("250401", "250409", "231201")

# Higher-precision TT concentration used for batch 250401 in the
# reported optimization runs.
Z1_OPTIMIZATION = {"250401": 0.5835, "250409": 0.568, "231201": 0.591}

# The executed screening campaign: X1..X6, batch, measured Y1..Y4.
CAMPAIGN_RUNS = (
    (1.0, 2.0, 2.5, 1.5, 3.5, 1.5, "250408", 7.18, 39.3, 45.0, 247.0),
    (1.0, 1.0, 1.5, 0.5, 2.5, 0.5, "250403", 1.14, 31.5, 6.65, 184.0),
    (1.5, 1.5, 1.5, 0.5, 3.5, 0.5, "231102", 2.80, 111.0, 9.71, 384.0),
    (0.5, 1.5, 2.5, 1.5, 2.5, 1.5, "231202", 7.58, 23.3, 30.3, 93.0),
    (1.5, 2.0, 2.0, 0.5, 2.5, 1.5, "250405", 4.46, 102.0, 17.1, 391.0),
    (0.5, 1.0, 2.0, 1.5, 3.5, 0.5, "250405", 6.87, 16.0, 31.5, 73.1),
    (1.5, 2.0, 2.5, 1.0, 2.5, 0.5, "250404", 6.46, 57.4, 27.8, 247.0),
    (0.5, 1.0, 1.5, 1.0, 3.5, 1.5, "250402", 4.47, 16.4, 21.6, 79.2),
    (1.5, 1.0, 2.5, 1.5, 3.0, 0.5, "250408", 8.70, 51.1, 36.9, 217.0),
    (0.5, 2.0, 1.5, 0.5, 3.0, 1.5, "250406", 1.79, 29.7, 8.14, 134.0),
    (1.5, 2.0, 1.5, 1.5, 3.5, 1.0, "250402", 8.16, 90.7, 32.2, 358.0),
    (0.5, 1.0, 2.5, 0.5, 2.5, 1.0, "250407", 3.62, 23.4, 14.4, 93.4),
    (1.5, 1.0, 2.5, 0.5, 3.5, 1.5, "250406", 4.59, 59.9, 20.8, 271.0),
    (0.5, 2.0, 1.5, 1.5, 2.5, 0.5, "231202", 4.62, 18.8, 21.8, 89.0),
    (1.5, 1.0, 1.5, 1.5, 2.5, 1.5, "250501", 7.31, 49.9, 29.7, 203.0),
    (0.5, 2.0, 2.5, 0.5, 3.5, 0.5, "250403", 4.20, 38.4, 17.8, 162.0),
    (1.0, 1.5, 2.0, 1.0, 3.0, 1.0, "250407", 6.48, 56.7, 25.8, 226.0),
    (1.0, 1.5, 2.0, 1.0, 3.0, 1.0, "250501", 7.06, 57.4, 28.4, 231.0),
    (1.0, 1.5, 2.0, 1.0, 3.0, 1.0, "250404", 7.41, 54.4, 29.2, 214.0),
    (1.0, 1.5, 2.0, 1.0, 3.0, 1.0, "231102", 6.97, 65.9, 24.3, 230.0),
)

RESPONSE_NAMES = ("Y1", "Y2", "Y3", "Y4")

# Reported natural-unit regression models and their determination
# coefficients.
REPORTED_MODELS: dict[str, RegressionModel] = {
    "Y1": make_model("Y1", {
        "Intercept": 3.1167, "Z1": -10.7425, "X1": 0.7026,
        "X3": 1.8364, "X4": 3.9301,
    }, r_squared=0.8538),
    "Y2": make_model("Y2", {
        "Intercept": 32.8842, "X1": -23.4526, "X2": -2.3691,
        "X4": -5.7581, "X5": -8.2481, "X1*X5": 17.5758,
        "X1*X4": -9.4687, "X1*X2": 20.6692,
    }, r_squared=0.8377),
    "Y3": make_model("Y3", {
        "Intercept": 0.4002, "Z1": -50.0259, "X3": 9.5709,
        "X4": 18.7848, "X5": 2.9674, "X6": 3.8743,
    }, r_squared=0.9574),
    "Y4": make_model("Y4", {
        "Intercept": 47.4225, "X1": -18.6213, "X2": 13.6240,
        "X4": -22.3586, "X5": -10.5198, "X1*X5": 49.6461,
        "X1*X4": -26.3807, "X1*X2": 58.9702,
    }, r_squared=0.9322),
}

REPORTED_R_SQUARED = {"Y1": 0.8538, "Y2": 0.8377, "Y3": 0.9574, "Y4": 0.9322}

# Variable box used for the reported optimizations.
OPTIMIZATION_BOUNDS = ((0.5, 1.5), (1.0, 2.0), (1.5, 2.5),
                       (0.5, 1.5), (2.5, 3.5), (0.5, 1.5))

# Constraint lower bounds used for optimization: TT purity > 6 %,
# FG purity > 24 %.
OPTIMIZATION_CONSTRAINTS = (("Y1", 6.0), ("Y3", 24.0))

# Acceptable-region thresholds: purities per the pharmacopoeia minima,
# productivities per the throughput targets.
DESIGN_SPACE_THRESHOLDS = ThresholdSpec(
    tt_purity_min=6.0, tt_productivity_min=50.0,
    fg_purity_min=24.0, fg_productivity_min=200.0)

# Reported Pareto-optimal solutions: batch -> rows of
# (X1..X6, Y1, Y3, Y2, Y4) as published.
REPORTED_PARETO_SOLUTIONS: dict[str, tuple] = {
    "250401": (
        (1.50, 2.00, 2.50, 1.10, 3.50, 0.860, 6.80, 29.4, 96.5, 380.0),
        (1.50, 2.00, 2.50, 1.33, 3.50, 0.501, 7.74, 32.5, 91.7, 365.0),
        (1.50, 2.00, 2.50, 1.29, 3.50, 1.23, 7.58, 34.6, 92.6, 367.0),
        (1.50, 2.00, 2.50, 0.892, 3.50, 0.515, 6.00, 24.3, 101.0, 392.0),
        (1.50, 2.00, 2.50, 1.40, 3.50, 1.33, 7.99, 36.9, 90.4, 361.0),
    ),
    "250409": (
        (1.50, 2.00, 2.50, 1.50, 3.50, 1.50, 8.56, 40.3, 88.4, 355.0),
        (1.50, 2.00, 2.50, 1.31, 3.50, 1.50, 7.83, 36.8, 92.2, 366.0),
        (1.50, 2.00, 2.50, 1.49, 3.50, 0.815, 8.52, 37.5, 88.6, 355.0),
        (1.50, 2.00, 2.50, 1.45, 3.50, 0.501, 8.38, 35.6, 89.4, 357.0),
        (1.50, 2.00, 2.50, 1.10, 3.50, 1.50, 6.99, 32.8, 96.4, 379.0),
    ),
}

# Higher-precision wash/elution times for individual solutions, as
# used in the validation runs (overrides by (batch, solution index)).
PARETO_PRECISE_TIMES = {
    ("250401", 0): {"wash_time": 1.095, "elution_time": 0.86},
}

# Validation points: batch -> (params, reported membership).
VALIDATION_POINTS: dict[str, tuple[ProcessParams, str]] = {
    "250401": (ProcessParams(1.5, 2.0, 2.5, 1.095, 3.5, 0.86), "Inside"),
    "250409": (ProcessParams(1.5, 2.0, 2.5, 1.49, 3.5, 0.81), "Inside"),
    "231201": (ProcessParams(0.75, 1.0, 1.75, 0.5, 3.25, 0.5), "Outside"),
}

# Measured validation results: batch -> {response: (predicted, measured)}.
VALIDATION_RESULTS = {
    "250401": {"Y1": (6.80, 7.81), "Y2": (96.5, 98.0),
               "Y3": (29.4, 32.8), "Y4": (380.0, 412.0)},
    "250409": {"Y1": (8.52, 8.28), "Y2": (88.6, 89.2),
               "Y3": (37.5, 33.8), "Y4": (355.0, 364.0)},
}


def campaign_params(row) -> ProcessParams:
    return ProcessParams.from_values(row[:6])


def campaign_dataset(response: str) -> Dataset:
    """Measured campaign data joined with batch attributes."""
    idx = RESPONSE_NAMES.index(response)
    params = tuple(campaign_params(r) for r in CAMPAIGN_RUNS)
    attrs = tuple(BATCH_ATTRIBUTES[r[6]] for r in CAMPAIGN_RUNS)
    observed = tuple(float(r[7 + idx]) for r in CAMPAIGN_RUNS)
    return Dataset(response_name=response, params=params, attrs=attrs,
                   observed=observed)


def optimization_attrs(batch_id: str) -> MaterialAttributes:
    """Batch attributes with the optimization-precision TT concentration."""
    base = BATCH_ATTRIBUTES[batch_id]
    z1 = Z1_OPTIMIZATION.get(batch_id, base.tt_concentration)
    return MaterialAttributes(z1, base.tt_purity, base.fg_concentration,
                              base.fg_purity, batch_id=batch_id)


def pareto_point_params(batch_id: str, index: int) -> ProcessParams:
    """Decision vector of a reported solution at best available precision."""
    row = REPORTED_PARETO_SOLUTIONS[batch_id][index]
    values = dict(zip(ProcessParams.FIELD_ORDER, row[:6]))
    values.update(PARETO_PRECISE_TIMES.get((batch_id, index), {}))
    return ProcessParams(**values)
