"""Closed-loop campaign orchestration.

Runs the full development loop on one plant: generate the design,
execute every run, compute the response indicators, fit models by
stepwise selection, optimize per target batch, compute design-space
slices and validate chosen optima back on the plant.  All artifacts
are written to the output directory; identical configuration and
seeds reproduce byte-identical files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict
from pathlib import Path

from . import figures
from .assay import FractionRecord, ResponseVector, responses_from_fraction
from .doe import (DesignTable, FactorSpec, MaterialAttributes, ProcessParams,
                  allocate_batches, export_csv, format_real, generate_bbd,
                  generate_ccd, generate_dsd)
from .dspace import (DesignSpaceGrid, GridSpec, ThresholdSpec, export_grid_csv,
                     grid_scan, membership)
from .errors import DuplicateId, StorageFailure
from .pareto import (NsgaConfig, OptimizationSpec, ParetoFront,
                     export_front_csv, optimize, select_representatives)
from .plant import Event, ExperimentSpec, Plant, PlantConfig, SensorFrame
from .rsm import (Dataset, RegressionModel, candidate_terms, diagnostics,
                  fit_least_squares, predict, serialize_model, stepwise_select)

RESPONSE_NAMES = ("Y1", "Y2", "Y3", "Y4")


@dataclass(frozen=True)
class CampaignConfig:
    """Everything needed to run one closed-loop campaign."""

    factors: tuple[FactorSpec, ...]
    optimization_batches: tuple[str, ...]
    pareto_batches: tuple[str, ...]
    design: str = "dsd"
    n_dummy: int = 2
    n_extra_center: int = 3
    stepwise_p: float = 0.05
    nsga: NsgaConfig = field(default_factory=NsgaConfig)
    thresholds: ThresholdSpec | None = None
    constraints: tuple[tuple[str, float], ...] = ()
    extra_validation_points: tuple[tuple[str, ProcessParams], ...] = ()
    design_seed: int = 0
    allocation_seed: int = 0
    representative_count: int = 5
    dspace_swept: tuple[int, int] = (3, 4)
    dspace_resolution: int = 41
    sensor_log_every: int = 30
    render_figures: bool = True

    def __post_init__(self):
        overlap = set(self.pareto_batches) & set(self.optimization_batches)
        if overlap:
            raise ValueError(
                f"validation batches must be held out of the campaign: "
                f"{sorted(overlap)}")


@dataclass(frozen=True)
class ExperimentRecord:
    """Bookkeeping for one executed run."""

    experiment_id: int
    spec: ExperimentSpec
    start_time: float
    end_time: float
    fraction: FractionRecord | None
    responses: ResponseVector | None
    status: str  # pending | running | done | failed

    def to_dict(self) -> dict:
        d = {
            "experiment_id": self.experiment_id,
            "batch_id": self.spec.batch_id,
            "fraction_id": self.spec.fraction_id,
            "params": list(self.spec.params.values()),
            "start_time": self.start_time,
            "end_time": self.end_time,
            "status": self.status,
        }
        if self.fraction is not None:
            d["fraction"] = {
                "m_tt_total": self.fraction.m_tt_total,
                "m_fg_total": self.fraction.m_fg_total,
                "m_ts_total": self.fraction.m_ts_total,
                "volume": self.fraction.volume,
                "process_time": self.fraction.process_time,
            }
        if self.responses is not None:
            d["responses"] = dict(zip(RESPONSE_NAMES,
                                      self.responses.values()))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentRecord":
        params = ProcessParams.from_values(d["params"])
        spec = ExperimentSpec(params=params, batch_id=d["batch_id"],
                              fraction_id=d.get("fraction_id", "F1"))
        fraction = None
        if "fraction" in d:
            f = d["fraction"]
            fraction = FractionRecord(
                m_tt_total=f["m_tt_total"], m_fg_total=f["m_fg_total"],
                m_ts_total=f["m_ts_total"], volume=f["volume"],
                process_time=f["process_time"], batch_id=d["batch_id"],
                params=params)
        responses = None
        if "responses" in d:
            r = d["responses"]
            responses = ResponseVector(r["Y1"], r["Y2"], r["Y3"], r["Y4"])
        return cls(experiment_id=d["experiment_id"], spec=spec,
                   start_time=d["start_time"], end_time=d["end_time"],
                   fraction=fraction, responses=responses,
                   status=d["status"])


class RecordStore:
    """Append-only JSONL store of experiment records."""

    def __init__(self, path):
        self.path = Path(path)
        self._ids: set[int] = set()
        if self.path.exists():
            for rec in self.load():
                self._ids.add(rec.experiment_id)

    def append(self, record: ExperimentRecord) -> None:
        if record.experiment_id in self._ids:
            raise DuplicateId(f"record {record.experiment_id} already stored")
        line = json.dumps(record.to_dict())
        try:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        self._ids.add(record.experiment_id)

    def load(self) -> list[ExperimentRecord]:
        try:
            with open(self.path, encoding="utf-8") as fh:
                return [ExperimentRecord.from_dict(json.loads(ln))
                        for ln in fh if ln.strip()]
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    def __len__(self) -> int:
        return len(self._ids)


def append_record(store: RecordStore, record: ExperimentRecord) -> None:
    store.append(record)


@dataclass(frozen=True)
class ValidationRow:
    """Predicted vs simulated indicators for one validated point."""

    batch_id: str
    params: ProcessParams
    predicted: dict[str, float]
    simulated: dict[str, float] | None
    inside: bool
    margins: tuple[float, ...]


@dataclass(frozen=True)
class CampaignReport:
    design: DesignTable
    records: tuple[ExperimentRecord, ...]
    models: dict[str, RegressionModel]
    model_diagnostics: dict
    fronts: dict[str, ParetoFront]
    representatives: dict[str, ParetoFront]
    grids: dict[str, DesignSpaceGrid]
    validations: tuple[ValidationRow, ...]
    output_dir: Path


def records_to_dataset(records, batch_table, response: str) -> Dataset:
    """Join done records with batch attributes into a model dataset."""
    idx = RESPONSE_NAMES.index(response)
    done = [r for r in records if r.status == "done"]
    return Dataset(
        response_name=response,
        params=tuple(r.spec.params for r in done),
        attrs=tuple(batch_table[r.spec.batch_id] for r in done),
        observed=tuple(r.responses.values()[idx] for r in done),
    )


def execute_design(plant: Plant, design: DesignTable) -> list[ExperimentRecord]:
    """Submit every design row and run the queue to completion."""
    specs = {}
    for i, row in enumerate(design.rows, start=1):
        spec = ExperimentSpec(params=row.params, batch_id=row.batch_id,
                              fraction_id=f"F{i}")
        exp_id = plant.submit_experiment(spec)
        specs[exp_id] = spec
    return run_submitted(plant, specs)


def run_submitted(plant: Plant, specs: dict[int, ExperimentSpec]
                  ) -> list[ExperimentRecord]:
    """Drive the plant until idle, collecting one record per experiment."""
    starts: dict[int, float] = {}
    fractions: dict[int, FractionRecord] = {}
    records: list[ExperimentRecord] = []

    def handle(ev: Event):
        if ev.kind == "experiment_started":
            starts[ev.experiment_id] = ev.timestamp
        elif ev.kind == "fraction_ready":
            fractions[ev.experiment_id] = plant.emit_fraction()
        elif ev.kind == "experiment_completed":
            exp_id = ev.experiment_id
            spec = specs[exp_id]
            fraction = fractions.get(exp_id)
            try:
                responses = responses_from_fraction(fraction)
                status = "done"
            except Exception:
                responses = None
                status = "failed"
            records.append(ExperimentRecord(
                experiment_id=exp_id, spec=spec,
                start_time=starts.get(exp_id, 0.0), end_time=ev.timestamp,
                fraction=fraction, responses=responses, status=status))

    while plant.busy:
        for ev in plant.step():
            handle(ev)
    return records


def validate_solution(plant: Plant, params: ProcessParams, batch_id: str,
                      models: dict[str, RegressionModel],
                      thresholds: ThresholdSpec | None = None,
                      attrs: MaterialAttributes | None = None) -> ValidationRow:
    """Run one confirmation experiment and compare against predictions."""
    if attrs is None:
        attrs = plant.config.batch_table.get(batch_id)
        if attrs is None:
            from .errors import UnknownBatch
            raise UnknownBatch(f"batch {batch_id!r} not in batch table")
    spec = ExperimentSpec(params=params, batch_id=batch_id, fraction_id="V1")
    exp_id = plant.submit_experiment(spec)
    recs = run_submitted(plant, {exp_id: spec})
    simulated = None
    if recs and recs[0].responses is not None:
        simulated = dict(zip(RESPONSE_NAMES, recs[0].responses.values()))
    predicted = {name: predict(models[name], params, attrs)
                 for name in RESPONSE_NAMES}
    if thresholds is not None:
        inside, margins = membership(
            [models[n] for n in RESPONSE_NAMES], params, attrs, thresholds)
    else:
        inside, margins = True, ()
    return ValidationRow(batch_id=batch_id, params=params,
                         predicted=predicted, simulated=simulated,
                         inside=inside, margins=margins)


def _generate_design(config: CampaignConfig) -> DesignTable:
    if config.design == "dsd":
        return generate_dsd(config.factors, config.n_dummy,
                            config.n_extra_center, seed=config.design_seed)
    if config.design == "bbd":
        return generate_bbd(config.factors, n_center=config.n_extra_center)
    if config.design == "ccd":
        return generate_ccd(config.factors, n_center=config.n_extra_center)
    raise ValueError(f"unknown design type {config.design!r}")


def _fit_models(config: CampaignConfig, records, batch_table):
    models = {}
    diags = {}
    pool = candidate_terms(len(config.factors), n_covariates=4)
    for name in RESPONSE_NAMES:
        data = records_to_dataset(records, batch_table, name)
        terms = stepwise_select(data, pool, p_enter=config.stepwise_p,
                                p_remove=config.stepwise_p)
        model = fit_least_squares(data, terms)
        models[name] = model
        diags[name] = diagnostics(model, data)
    return models, diags


def _optimize_batch(config: CampaignConfig, models, attrs) -> ParetoFront:
    spec = OptimizationSpec(
        objectives=tuple(models[n] for n in RESPONSE_NAMES),
        constraints=tuple((models[n], bound)
                          for n, bound in config.constraints),
        bounds=tuple((f.low, f.high) for f in config.factors),
        attrs=attrs,
    )
    return optimize(spec, config.nsga)


def run_campaign(config: CampaignConfig, plant_config: PlantConfig,
                 output_dir) -> CampaignReport:
    """Execute the full closed loop and write all artifacts."""
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "models").mkdir(exist_ok=True)

    design = _generate_design(config)
    design = allocate_batches(design, config.optimization_batches,
                              seed=config.allocation_seed)
    (outdir / "design.csv").write_text(export_csv(design), encoding="utf-8")

    records_path = outdir / "records.jsonl"
    if records_path.exists():
        records_path.unlink()
    store = RecordStore(records_path)

    sensor_path = outdir / "sensors.jsonl"
    event_path = outdir / "events.jsonl"
    frame_count = [0]
    with open(sensor_path, "w", encoding="utf-8") as sensor_fh, \
            open(event_path, "w", encoding="utf-8") as event_fh:

        def sensor_sink(frame: SensorFrame):
            frame_count[0] += 1
            if frame_count[0] % config.sensor_log_every == 0:
                sensor_fh.write(json.dumps(asdict(frame)) + "\n")

        def event_sink(ev: Event):
            event_fh.write(json.dumps(asdict(ev)) + "\n")

        plant = Plant(plant_config, sensor_sink=sensor_sink,
                      event_sink=event_sink)
        records = execute_design(plant, design)
        for rec in records:
            store.append(rec)

        batch_table = plant_config.batch_table
        models, diags = _fit_models(config, records, batch_table)
        for name, model in models.items():
            (outdir / "models" / f"{name}.txt").write_text(
                serialize_model(model), encoding="utf-8")

        fronts: dict[str, ParetoFront] = {}
        reps: dict[str, ParetoFront] = {}
        for batch in config.pareto_batches:
            attrs = batch_table[batch]
            front = _optimize_batch(config, models, attrs)
            fronts[batch] = front
            reps[batch] = select_representatives(
                front, config.representative_count)
        for i, batch in enumerate(config.pareto_batches):
            name = "pareto.csv" if i == 0 else f"pareto_{batch}.csv"
            (outdir / name).write_text(export_front_csv(reps[batch]),
                                       encoding="utf-8")

        grids: dict[str, DesignSpaceGrid] = {}
        validations: list[ValidationRow] = []
        validation_points: list[tuple[str, ProcessParams]] = []
        for batch in config.pareto_batches:
            if len(reps[batch]):
                validation_points.append(
                    (batch, reps[batch].solutions[0].params))
        validation_points.extend(config.extra_validation_points)

        for batch, point in validation_points:
            attrs = batch_table[batch]
            if config.thresholds is not None:
                sw = config.dspace_swept
                fx = {i: (config.factors[i - 1].low, config.factors[i - 1].high)
                      for i in sw}
                grid = grid_scan(
                    [models[n] for n in RESPONSE_NAMES],
                    GridSpec(swept=sw, x_range=fx[sw[0]], y_range=fx[sw[1]],
                             resolution=config.dspace_resolution,
                             fixed=point, attrs=attrs),
                    config.thresholds)
                grids[batch] = grid
                (outdir / f"dspace_{batch}.csv").write_text(
                    export_grid_csv(grid), encoding="utf-8")
            validations.append(validate_solution(
                plant, point, batch, models, config.thresholds, attrs))

    report = CampaignReport(
        design=design, records=tuple(records), models=models,
        model_diagnostics=diags, fronts=fronts, representatives=reps,
        grids=grids, validations=tuple(validations), output_dir=outdir)

    if config.render_figures:
        figdir = outdir / "figures"
        figdir.mkdir(exist_ok=True)
        figures.parity_grid(diags, figdir / "parity.png")
        for batch, front in reps.items():
            figures.pareto_front_plot(fronts[batch], front,
                                      figdir / f"pareto_{batch}.png")
        for batch, grid in grids.items():
            point = next(p for b, p in validation_points if b == batch)
            figures.design_space_plot(grid, point,
                                      figdir / f"dspace_{batch}.png")

    (outdir / "report.md").write_text(render_report(report),
                                      encoding="utf-8")
    return report


def _fmt(v: float) -> str:
    return format_real(v)


def render_report(report: CampaignReport) -> str:
    """Human-readable campaign summary in Markdown."""
    lines: list[str] = []
    lines.append("# Campaign report")
    lines.append("")
    lines.append(f"- design: {report.design.design_type}, "
                 f"{len(report.design.rows)} runs, "
                 f"{report.design.n_factors} factors, "
                 f"{report.design.dummy_count} dummy factors")
    lines.append(f"- executed records: {len(report.records)} "
                 f"({sum(1 for r in report.records if r.status == 'done')} done)")
    lines.append("")

    lines.append("## Runs and measured indicators")
    lines.append("")
    header = (["run"] + [f.name for f in report.design.factors]
              + ["batch"] + list(RESPONSE_NAMES))
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for rec in report.records:
        row = ([str(rec.experiment_id)]
               + [_fmt(v) for v in rec.spec.params.values()]
               + [rec.spec.batch_id]
               + ([_fmt(v) for v in rec.responses.values()]
                  if rec.responses else ["-"] * 4))
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")

    lines.append("## Fitted models")
    lines.append("")
    all_terms: list = []
    for model in report.models.values():
        for t in model.terms:
            if t not in all_terms:
                all_terms.append(t)
    all_terms.sort(key=lambda t: t.sort_key())
    lines.append("| term | " + " | ".join(report.models) + " |")
    lines.append("|" + "---|" * (len(report.models) + 1))
    for t in all_terms:
        cells = []
        for model in report.models.values():
            cells.append(_fmt(model.coefficient(t)) if t in model.terms
                         else "")
        lines.append("| " + t.label() + " | " + " | ".join(cells) + " |")
    lines.append("| R^2 | " + " | ".join(
        _fmt(m.r_squared) for m in report.models.values()) + " |")
    lines.append("")

    for batch, front in report.representatives.items():
        lines.append(f"## Selected optima, batch {batch}")
        lines.append("")
        header = ["#"] + [f"X{i}" for i in range(1, 7)] \
            + list(front.objective_names) + ["feasible"]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for i, sol in enumerate(front.solutions, start=1):
            row = ([str(i)] + [_fmt(v) for v in sol.params.values()]
                   + [_fmt(v) for v in sol.objectives]
                   + ["yes" if sol.feasible else "no"])
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")

    if report.validations:
        lines.append("## Validation")
        lines.append("")
        header = ["batch"] + [f"{n} pred" for n in RESPONSE_NAMES] \
            + [f"{n} sim" for n in RESPONSE_NAMES] + ["design space"]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for v in report.validations:
            row = [v.batch_id]
            row += [_fmt(v.predicted[n]) for n in RESPONSE_NAMES]
            row += ([_fmt(v.simulated[n]) for n in RESPONSE_NAMES]
                    if v.simulated else ["-"] * 4)
            row.append("inside" if v.inside else "outside")
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")

    if report.grids:
        lines.append("## Design-space slices")
        lines.append("")
        for batch, grid in report.grids.items():
            inside = sum(sum(1 for v in row if v) for row in grid.inside)
            total = grid.spec.resolution ** 2
            lines.append(f"- batch {batch}: {inside}/{total} grid nodes "
                         f"inside (swept X{grid.spec.swept[0]}, "
                         f"X{grid.spec.swept[1]})")
        lines.append("")

    lines.append("## Artifacts")
    lines.append("")
    for name in ("design.csv", "records.jsonl", "models/", "pareto.csv",
                 "sensors.jsonl", "events.jsonl", "figures/"):
        lines.append(f"- `{name}`")
    lines.append("")
    return "\n".join(lines)
