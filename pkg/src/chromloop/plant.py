"""Virtual chromatography rig.

A discrete-time behavioral twin of the single-column rig: pumps,
valves, liquid-level dynamics with a fuzzy outflow controller, online
sensors with first-order solvent transitions, and a phase state
machine (Equilibrate, Load, Wash, Elute, Regenerate).  Timed phases
end on the operating-point durations; equilibration and regeneration
end when the monitored sensor signals stabilize.

The latent quality of a collected fraction comes from three response
surfaces (TT purity, FG purity, TT productivity); fraction masses are
reconstructed from them so that the mass-balance identity between the
four indicators holds by construction.  Breakthrough physics is not
modeled: the rig is a response-surface-level twin, not a transport
simulation.
"""

from __future__ import annotations

import math
import time as _time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .assay import FractionRecord
from .doe import MaterialAttributes, ProcessParams
from .errors import PlantBusy, UnknownBatch, WrongPhase
from .rsm import RegressionModel, predict

IDLE = "Idle"
EQUILIBRATE = "Equilibrate"
LOAD = "Load"
WASH = "Wash"
ELUTE = "Elute"
REGENERATE = "Regenerate"

PHASE_SEQUENCE = (EQUILIBRATE, LOAD, WASH, ELUTE, REGENERATE)

# Inlet valve per phase (one open at a time); V6 column outlet, V7
# fraction collector, V8 waste.
_INLET_VALVES = {EQUILIBRATE: "V1", LOAD: "V2", WASH: "V3", ELUTE: "V4",
                 REGENERATE: "V5"}
ALL_VALVES = tuple(f"V{i}" for i in range(1, 10))

# Solvent-dependent sensor baselines per phase:
# (conductivity uS/cm, uv absorbance, ph, orp mV, nir absorbance)
_BASELINES = {
    IDLE: (2.0, 0.02, 7.0, 200.0, 0.10),
    EQUILIBRATE: (2.0, 0.02, 7.0, 200.0, 0.10),
    LOAD: (1800.0, 1.20, 5.2, 150.0, 0.45),
    WASH: (150.0, 0.50, 6.2, 180.0, 0.30),
    ELUTE: (40.0, 0.90, 6.8, 170.0, 0.60),
    REGENERATE: (10.0, 0.10, 7.1, 190.0, 0.75),
}


@dataclass(frozen=True)
class ExperimentSpec:
    """One queued purification run."""

    params: ProcessParams
    batch_id: str
    fraction_id: str = "F1"


@dataclass(frozen=True)
class SensorFrame:
    timestamp: float
    ph: float
    conductivity: float
    orp: float
    uv_absorbance: float
    nir_absorbance: float
    level: float
    temperature: float
    experiment_id: int = 0
    phase: str = IDLE


@dataclass(frozen=True)
class Event:
    timestamp: float
    kind: str
    experiment_id: int = 0
    phase: str = ""
    detail: str = ""


@dataclass(frozen=True)
class PlantConfig:
    """Geometry, fixed flows, truth surfaces and noise of the rig."""

    batch_table: dict[str, MaterialAttributes]
    truth_models: dict[str, RegressionModel]  # keys: Y1, Y3, Y2
    column_inner_diameter: float = 3.0        # cm
    bed_height: float = 36.0                  # cm
    column_height: float = 45.6               # cm
    level_setpoint: float = 3.0               # cm above the bed
    equil_flow: float = 3.0                   # BV/h
    regen_flow: float = 3.0                   # BV/h
    noise_rel_sd: dict[str, float] = field(
        default_factory=lambda: {"Y1": 0.07, "Y3": 0.07, "Y2": 0.08})
    seed: int = 0
    dt: float = 1.0                           # s
    level_noise_sd: float = 0.05              # cm, measurement noise
    sensor_noise_rel: float = 0.002
    stabilization_rel_threshold: float = 0.01
    stabilization_window: float = 120.0       # s
    acceleration: float = 3600.0              # sim seconds per wall second

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if any(v < 0 for v in self.noise_rel_sd.values()):
            raise ValueError("noise_rel_sd must be non-negative")
        for key in ("Y1", "Y3", "Y2"):
            if key not in self.truth_models:
                raise ValueError(f"missing truth model {key}")

    @property
    def bed_volume(self) -> float:
        """Packed-bed volume in mL."""
        r = self.column_inner_diameter / 2.0
        return math.pi * r * r * self.bed_height

    @property
    def headspace(self) -> float:
        """Liquid headroom above the bed in cm."""
        return self.column_height - self.bed_height


@dataclass
class PlantState:
    phase: str = IDLE
    sim_clock: float = 0.0
    phase_elapsed: float = 0.0
    level: float = 3.0
    p1_flow: float = 0.0
    p2_flow: float = 0.0
    valve_states: dict[str, bool] = field(
        default_factory=lambda: {v: False for v in ALL_VALVES})
    current_experiment: ExperimentSpec | None = None
    current_experiment_id: int = 0
    paused: bool = False


def stabilization_detector(window, rel_threshold: float = 0.01,
                           window_len: int = 120) -> bool:
    """True when the rolling window is full and flat enough.

    Flat means std / |mean| below ``rel_threshold`` over the last
    ``window_len`` samples; a zero-mean window counts as stable only
    if it is exactly constant.
    """
    if window_len < 2:
        raise ValueError("window_len must be >= 2")
    if len(window) < window_len:
        return False
    tail = list(window)[-window_len:]
    mean = math.fsum(tail) / window_len
    var = math.fsum((v - mean) ** 2 for v in tail) / window_len
    std = math.sqrt(max(var, 0.0))
    if mean == 0.0:
        return std == 0.0
    return std / abs(mean) < rel_threshold


class FuzzyLevelController:
    """25-rule Mamdani controller for the outlet pump trim.

    Inputs are level error (cm) and its rate (cm/s), each covered by
    five triangular sets (NL, NS, Z, PS, PL); the rule table is
    antisymmetric (output index = clamped sum of input indices) and
    the aggregated output is defuzzified by centroid, clamped to
    +-0.5 BV/h per step.
    """

    ERROR_RANGE = 3.0
    RATE_RANGE = 0.05
    OUTPUT_CLAMP = 0.5
    _N_OUT = 301

    def __init__(self):
        self._out_centers = np.array([-0.5, -0.25, 0.0, 0.25, 0.5])
        half = 0.25
        self._xs = np.linspace(-0.75, 0.75, self._N_OUT)
        self._out_mf = np.maximum(
            0.0, 1.0 - np.abs(self._xs[None, :] - self._out_centers[:, None])
            / half)
        self._err_centers = [-3.0, -1.5, 0.0, 1.5, 3.0]
        self._rate_centers = [-0.05, -0.025, 0.0, 0.025, 0.05]

    @staticmethod
    def _tri(x: float, center: float, half_width: float) -> float:
        return max(0.0, 1.0 - abs(x - center) / half_width)

    def memberships(self, error: float, rate: float):
        e = min(max(error, -self.ERROR_RANGE), self.ERROR_RANGE)
        r = min(max(rate, -self.RATE_RANGE), self.RATE_RANGE)
        me = [self._tri(e, c, 1.5) for c in self._err_centers]
        mr = [self._tri(r, c, 0.025) for c in self._rate_centers]
        return me, mr

    def __call__(self, level_error: float, error_rate: float) -> float:
        me, mr = self.memberships(level_error, error_rate)
        act = [0.0] * 5
        for i in range(5):
            if me[i] == 0.0:
                continue
            for j in range(5):
                if mr[j] == 0.0:
                    continue
                k = min(max((i - 2) + (j - 2), -2), 2) + 2
                w = me[i] if me[i] < mr[j] else mr[j]
                if w > act[k]:
                    act[k] = w
        agg = (self._out_mf * np.array(act)[:, None]).max(axis=0)
        total = agg.sum()
        if total <= 0.0:
            return 0.0
        centroid = float((agg * self._xs).sum() / total)
        return min(max(centroid, -self.OUTPUT_CLAMP), self.OUTPUT_CLAMP)


_default_controller = FuzzyLevelController()


def fuzzy_control(level_error: float, error_rate: float) -> float:
    """Outlet pump flow adjustment (BV/h) for a level deviation."""
    return _default_controller(level_error, error_rate)


class Plant:
    """Single-column rig simulator owned by one driver at a time."""

    def __init__(self, config: PlantConfig, sensor_sink=None,
                 event_sink=None, queueing: bool = True):
        self.config = config
        self.state = PlantState(level=config.level_setpoint)
        self.controller = FuzzyLevelController()
        self.queueing = queueing
        self._rng = np.random.default_rng(config.seed)
        self._queue: deque[tuple[int, ExperimentSpec]] = deque()
        self._next_id = 1
        self._sensor_sink = sensor_sink
        self._event_sink = event_sink
        self._window_len = max(2, int(round(config.stabilization_window
                                            / config.dt)))
        self._cond_window: deque[float] = deque(maxlen=self._window_len)
        self._uv_window: deque[float] = deque(maxlen=self._window_len)
        self._cond_start = _BASELINES[IDLE][0]
        self._uv_start = _BASELINES[IDLE][1]
        self._level_ema = config.level_setpoint
        self._prev_ema = config.level_setpoint
        self._pending_fraction: FractionRecord | None = None
        self._fraction_consumed = True

    # -- experiment management -------------------------------------------

    def submit_experiment(self, spec: ExperimentSpec) -> int:
        if spec.batch_id not in self.config.batch_table:
            raise UnknownBatch(f"batch {spec.batch_id!r} not in batch table")
        if self.state.phase != IDLE and not self.queueing:
            raise PlantBusy("plant is running and queueing is disabled")
        exp_id = self._next_id
        self._next_id += 1
        self._queue.append((exp_id, spec))
        return exp_id

    @property
    def busy(self) -> bool:
        return self.state.phase != IDLE or bool(self._queue)

    def emit_fraction(self, spec: ExperimentSpec | None = None) -> FractionRecord:
        """The fraction collected by the last completed elution."""
        if self._pending_fraction is None:
            raise WrongPhase("no fraction available; elution not completed")
        fraction = self._pending_fraction
        self._fraction_consumed = True
        return fraction

    # -- state machine ----------------------------------------------------

    def _start_next_experiment(self) -> list[Event]:
        exp_id, spec = self._queue.popleft()
        st = self.state
        st.current_experiment = spec
        st.current_experiment_id = exp_id
        self._pending_fraction = None
        self._fraction_consumed = False
        events = [self._event("experiment_started", detail=spec.batch_id)]
        # prime the outlet pump at the inlet flow of the first phase
        st.p2_flow = self.config.equil_flow
        events += self._enter_phase(EQUILIBRATE)
        return events

    def _phase_inlet_flow(self, phase: str) -> float:
        spec = self.state.current_experiment
        if phase == EQUILIBRATE:
            return self.config.equil_flow
        if phase == REGENERATE:
            return self.config.regen_flow
        if spec is None:
            return 0.0
        return {LOAD: spec.params.feed_flow,
                WASH: spec.params.wash_flow,
                ELUTE: spec.params.elution_flow}[phase]

    def _phase_duration(self, phase: str) -> float | None:
        """Seconds for timed phases; None for sensor-terminated ones."""
        spec = self.state.current_experiment
        if spec is None or phase in (EQUILIBRATE, REGENERATE):
            return None
        hours = {LOAD: spec.params.feed_time,
                 WASH: spec.params.wash_time,
                 ELUTE: spec.params.elution_time}[phase]
        return hours * 3600.0

    def _enter_phase(self, phase: str) -> list[Event]:
        st = self.state
        prev = st.phase
        st.phase = phase
        st.phase_elapsed = 0.0
        st.p1_flow = self._phase_inlet_flow(phase)
        for v in ALL_VALVES:
            st.valve_states[v] = False
        if phase != IDLE:
            st.valve_states[_INLET_VALVES[phase]] = True
            st.valve_states["V6"] = True
            st.valve_states["V7" if phase == ELUTE else "V8"] = True
        # sensor transition starts from the settled previous baseline
        self._cond_start = self._current_cond()
        self._uv_start = self._current_uv()
        self._cond_window.clear()
        self._uv_window.clear()
        return [self._event("phase_transition",
                            detail=f"{prev}->{phase}")]

    def _current_cond(self) -> float:
        st = self.state
        target = _BASELINES[st.phase][0]
        tau = self._tau()
        if tau is None:
            return target
        return target + (self._cond_start - target) * math.exp(
            -st.phase_elapsed / tau)

    def _current_uv(self) -> float:
        st = self.state
        target = _BASELINES[st.phase][1]
        tau = self._tau()
        if tau is None:
            return target
        return target + (self._uv_start - target) * math.exp(
            -st.phase_elapsed / tau)

    def _tau(self) -> float | None:
        """First-order time constant: one bed-volume turnover, in s."""
        flow = self.state.p1_flow
        if flow <= 0:
            return None
        return 3600.0 / flow

    def _event(self, kind: str, detail: str = "") -> Event:
        ev = Event(timestamp=self.state.sim_clock, kind=kind,
                   experiment_id=self.state.current_experiment_id,
                   phase=self.state.phase, detail=detail)
        if self._event_sink is not None:
            self._event_sink(ev)
        return ev

    def _collect_fraction(self) -> FractionRecord:
        spec = self.state.current_experiment
        cfg = self.config
        attrs = cfg.batch_table[spec.batch_id]
        params = spec.params
        y1 = predict(cfg.truth_models["Y1"], params, attrs)
        y3 = predict(cfg.truth_models["Y3"], params, attrs)
        y2 = predict(cfg.truth_models["Y2"], params, attrs)
        eps = self._rng.normal(0.0, 1.0, size=3)
        y1 *= 1.0 + eps[0] * cfg.noise_rel_sd.get("Y1", 0.0)
        y3 *= 1.0 + eps[1] * cfg.noise_rel_sd.get("Y3", 0.0)
        y2 *= 1.0 + eps[2] * cfg.noise_rel_sd.get("Y2", 0.0)
        y1 = max(y1, 1e-6)
        y3 = max(y3, 1e-6)
        y2 = max(y2, 1e-6)
        if y1 + y3 > 100.0:
            scale = 100.0 / (y1 + y3)
            y1 *= scale
            y3 *= scale
        t = params.feed_time + params.wash_time + params.elution_time
        m_tt = y2 * t
        m_ts = m_tt / (y1 / 100.0)
        m_fg = m_ts * (y3 / 100.0)
        volume = params.elution_flow * params.elution_time * cfg.bed_volume
        return FractionRecord(
            m_tt_total=m_tt, m_fg_total=m_fg, m_ts_total=m_ts,
            volume=volume, process_time=t, batch_id=spec.batch_id,
            params=params)

    # -- time stepping ----------------------------------------------------

    def step(self, dt: float | None = None) -> list[Event]:
        """Advance the simulation by one time step."""
        cfg = self.config
        st = self.state
        dt = cfg.dt if dt is None else dt
        events: list[Event] = []

        if st.phase == IDLE:
            if self._queue:
                events += self._start_next_experiment()
            else:
                st.sim_clock += dt
                return events

        st.sim_clock += dt
        st.phase_elapsed += dt

        if not st.paused:
            # level dynamics: dL/dt = (Qin - Qout) * bed_height / 3600
            st.level += ((st.p1_flow - st.p2_flow) * cfg.bed_height / 3600.0
                         * dt)

        noise = self._rng.normal(0.0, 1.0, size=7)

        if st.level > cfg.headspace or st.level <= 0.0:
            if not st.paused:
                st.paused = True
                st.p1_flow = 0.0
                st.p2_flow = 0.0
                kind = "overflow" if st.level > cfg.headspace else "underflow"
                events.append(self._event("alarm", detail=kind))
        elif not st.paused:
            measured = st.level + noise[0] * cfg.level_noise_sd
            alpha = 0.2
            self._level_ema = alpha * measured + (1 - alpha) * self._level_ema
            err = self._level_ema - cfg.level_setpoint
            rate = (self._level_ema - self._prev_ema) / dt
            self._prev_ema = self._level_ema
            adjust = self.controller(err, rate)
            st.p2_flow = max(0.0, st.p2_flow + adjust)

        frame = self._sensor_frame(noise)
        if self._sensor_sink is not None:
            self._sensor_sink(frame)

        if st.phase in (EQUILIBRATE, REGENERATE):
            self._cond_window.append(frame.conductivity)
            self._uv_window.append(frame.uv_absorbance)
            if (stabilization_detector(self._cond_window,
                                       cfg.stabilization_rel_threshold,
                                       self._window_len)
                    and stabilization_detector(self._uv_window,
                                               cfg.stabilization_rel_threshold,
                                               self._window_len)):
                events += self._complete_phase()
        else:
            duration = self._phase_duration(st.phase)
            if duration is not None and st.phase_elapsed >= duration:
                events += self._complete_phase()
        return events

    def _complete_phase(self) -> list[Event]:
        st = self.state
        phase = st.phase
        events = [self._event("phase_complete")]
        if phase == ELUTE:
            self._pending_fraction = self._collect_fraction()
            self._fraction_consumed = False
            events.append(self._event("fraction_ready",
                                      detail=st.current_experiment.fraction_id))
        idx = PHASE_SEQUENCE.index(phase)
        if idx + 1 < len(PHASE_SEQUENCE):
            events += self._enter_phase(PHASE_SEQUENCE[idx + 1])
        else:
            events.append(self._event("experiment_completed"))
            st.current_experiment = None
            events += self._enter_phase(IDLE)
            st.p1_flow = 0.0
        return events

    def _sensor_frame(self, noise) -> SensorFrame:
        cfg = self.config
        st = self.state
        cond = self._current_cond()
        uv = self._current_uv()
        _, _, ph, orp, nir = _BASELINES[st.phase]
        rel = cfg.sensor_noise_rel
        return SensorFrame(
            timestamp=st.sim_clock,
            ph=ph + noise[1] * rel * abs(ph),
            conductivity=cond + noise[2] * rel * max(abs(cond), 1e-3),
            orp=orp + noise[3] * rel * abs(orp),
            uv_absorbance=uv + noise[4] * rel * max(abs(uv), 1e-4),
            nir_absorbance=nir + noise[5] * rel * abs(nir),
            level=st.level + noise[6] * cfg.level_noise_sd,
            temperature=25.0,
            experiment_id=st.current_experiment_id,
            phase=st.phase,
        )

    def run_queue(self, max_sim_time: float = 10_000_000.0,
                  realtime: bool = False) -> list[Event]:
        """Step until the queue is drained and the plant is idle."""
        events: list[Event] = []
        start = self.state.sim_clock
        while self.busy:
            if self.state.sim_clock - start > max_sim_time:
                raise RuntimeError("simulation exceeded max_sim_time")
            events += self.step()
            if realtime:
                _time.sleep(self.config.dt / self.config.acceleration)
        return events
