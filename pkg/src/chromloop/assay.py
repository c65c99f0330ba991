"""Response indicators computed from collected fraction data.

Purity is the target mass over the total solids of the fraction (in
percent); productivity is the target mass over the process time spent
on loading, washing and elution.  Equilibration and regeneration time
is excluded from the productivity clock.
"""

from __future__ import annotations

from dataclasses import dataclass

from .doe import ProcessParams
from .errors import MassExceedsSolids, ZeroSolids, ZeroTime


@dataclass(frozen=True)
class FractionRecord:
    """Masses and timing of one collected elution fraction.

    Masses are fraction totals in mg; the per-unit-volume quantities
    in the purity definition cancel, so totals are stored directly.
    """

    m_tt_total: float
    m_fg_total: float
    m_ts_total: float
    volume: float
    process_time: float
    batch_id: str
    params: ProcessParams

    def __post_init__(self):
        if self.m_tt_total < 0 or self.m_fg_total < 0:
            raise ValueError("component masses must be non-negative")
        if self.m_tt_total + self.m_fg_total > self.m_ts_total * (1 + 1e-12):
            raise ValueError("component masses exceed total solids")
        if self.volume <= 0:
            raise ValueError("fraction volume must be positive")
        if self.process_time <= 0:
            raise ValueError("process time must be positive")


@dataclass(frozen=True)
class ResponseVector:
    """The four performance indicators of one run."""

    tt_purity: float
    tt_productivity: float
    fg_purity: float
    fg_productivity: float

    FIELD_ORDER = ("tt_purity", "tt_productivity", "fg_purity",
                   "fg_productivity")

    def values(self) -> tuple[float, float, float, float]:
        return (self.tt_purity, self.tt_productivity,
                self.fg_purity, self.fg_productivity)


def purity(m_target: float, m_ts: float) -> float:
    """Target mass over total solids, in percent."""
    if m_ts == 0:
        raise ZeroSolids("total solids mass is zero")
    if m_target > m_ts:
        raise MassExceedsSolids(
            f"target mass {m_target} exceeds total solids {m_ts}")
    if m_target < 0 or m_ts < 0:
        raise ValueError("masses must be non-negative")
    return m_target / m_ts * 100.0


def productivity(m_tt: float, t: float) -> float:
    """Collected target mass per hour of process time."""
    if t == 0:
        raise ZeroTime("process time is zero")
    if m_tt < 0 or t < 0:
        raise ValueError("mass and time must be non-negative")
    return m_tt / t


def process_time(params: ProcessParams) -> float:
    """Hours on the productivity clock: feed + wash + elution time."""
    return params.feed_time + params.wash_time + params.elution_time


def responses_from_fraction(f: FractionRecord) -> ResponseVector:
    """All four indicators from one fraction record.

    Because purities share the solids mass and productivities share
    the process time, the outputs satisfy the mass-balance identity
    Y1 * Y4 == Y2 * Y3.
    """
    return ResponseVector(
        tt_purity=purity(f.m_tt_total, f.m_ts_total),
        tt_productivity=productivity(f.m_tt_total, f.process_time),
        fg_purity=purity(f.m_fg_total, f.m_ts_total),
        fg_productivity=productivity(f.m_fg_total, f.process_time),
    )
