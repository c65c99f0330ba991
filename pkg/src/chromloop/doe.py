"""Experimental design generation for chromatographic process screening.

Generates definitive screening designs (DSD) from embedded conference
matrices, Box-Behnken and central composite designs, allocates feed
batches to runs, and verifies the structural properties a DSD must
satisfy (fold-over pairing, orthogonality).
"""

from __future__ import annotations

import csv
import io
import itertools
import random
from dataclasses import dataclass, field, replace

from .errors import AlreadyAllocated, UnsupportedFactorCount, UnsupportedOrder

ROLE_FOLDOVER = "foldover"
ROLE_CENTER = "center"
ROLE_EDGE = "edge"
ROLE_FACTORIAL = "factorial"
ROLE_AXIAL = "axial"


@dataclass(frozen=True)
class FactorSpec:
    """One process variable with its investigated range in natural units."""

    name: str
    low: float
    high: float
    unit: str = ""

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"factor {self.name}: low must be < high")

    @property
    def center(self) -> float:
        return (self.low + self.high) / 2.0

    @property
    def half_width(self) -> float:
        return (self.high - self.low) / 2.0

    def decode(self, coded: float) -> float:
        return self.center + coded * self.half_width

    def encode(self, value: float) -> float:
        return (value - self.center) / self.half_width


@dataclass(frozen=True)
class ProcessParams:
    """Operating point of one purification cycle.

    Flows are in bed volumes per hour, times in hours; the canonical
    order of the six variables is the field order below.
    """

    feed_flow: float
    feed_time: float
    wash_flow: float
    wash_time: float
    elution_flow: float
    elution_time: float

    FIELD_ORDER = ("feed_flow", "feed_time", "wash_flow", "wash_time",
                   "elution_flow", "elution_time")

    def __post_init__(self):
        for name in self.FIELD_ORDER:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in self.FIELD_ORDER)

    @classmethod
    def from_values(cls, values) -> "ProcessParams":
        vals = tuple(float(v) for v in values)
        if len(vals) != 6:
            raise ValueError("expected 6 values")
        return cls(*vals)


@dataclass(frozen=True)
class MaterialAttributes:
    """Feed-batch material attributes used as model covariates."""

    tt_concentration: float
    tt_purity: float
    fg_concentration: float
    fg_purity: float
    batch_id: str = ""

    FIELD_ORDER = ("tt_concentration", "tt_purity", "fg_concentration",
                   "fg_purity")

    def __post_init__(self):
        if self.tt_concentration <= 0 or self.fg_concentration <= 0:
            raise ValueError("concentrations must be positive")
        for p in (self.tt_purity, self.fg_purity):
            if not 0 < p < 100:
                raise ValueError("purities must lie in (0, 100)")

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in self.FIELD_ORDER)


@dataclass(frozen=True)
class DesignRow:
    """One run of a design table."""

    params: ProcessParams
    role: str
    coded: tuple[float, ...]
    batch_id: str | None = None
    out_of_bounds: bool = False


@dataclass(frozen=True)
class DesignTable:
    """Ordered design runs over a fixed factor list.

    For DSD tables, fold-over rows come in adjacent pairs with centers
    last; ``dummy_coded`` retains the dropped virtual-factor columns of
    the generating conference matrix (one tuple per fold-over row) so
    the full coded matrix can be reconstructed by verification.
    """

    factors: tuple[FactorSpec, ...]
    rows: tuple[DesignRow, ...]
    design_type: str
    dummy_count: int = 0
    seed: int = 0
    dummy_coded: tuple[tuple[int, ...], ...] | None = None

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    @property
    def allocated(self) -> bool:
        return any(r.batch_id is not None for r in self.rows)


@dataclass(frozen=True)
class ConferenceMatrix:
    """Square +-1 matrix with zero diagonal satisfying C'C = (n-1) I."""

    order: int
    entries: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[CheckResult, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        return "\n".join(
            f"[{'ok' if c.passed else 'FAIL'}] {c.name}"
            + (f": {c.detail}" if c.detail else "")
            for c in self.checks)


# Embedded conference matrices for the supported even orders.  Orders
# 6, 10, 14 are the symmetric Paley matrices; 4 and 12 the skew Paley
# matrices; 16 comes from doubling the skew-Hadamard construction.  The
# order-8 matrix is the normalized skew variant whose first six columns
# reproduce the screening layout used by the reference case study.
CONFERENCE_MATRICES: dict[int, tuple[tuple[int, ...], ...]] = {
    2: (
        (0, 1),
        (1, 0),
    ),
    4: (
        (0, 1, 1, 1),
        (-1, 0, -1, 1),
        (-1, 1, 0, -1),
        (-1, -1, 1, 0),
    ),
    6: (
        (0, 1, 1, 1, 1, 1),
        (1, 0, 1, -1, -1, 1),
        (1, 1, 0, 1, -1, -1),
        (1, -1, 1, 0, 1, -1),
        (1, -1, -1, 1, 0, 1),
        (1, 1, -1, -1, 1, 0),
    ),
    8: (
        (0, 1, 1, 1, 1, 1, 1, 1),
        (1, 0, -1, -1, 1, -1, 1, 1),
        (1, 1, 0, -1, -1, 1, -1, 1),
        (1, 1, 1, 0, -1, -1, 1, -1),
        (1, -1, 1, 1, 0, -1, -1, 1),
        (1, 1, -1, 1, 1, 0, -1, -1),
        (1, -1, 1, -1, 1, 1, 0, -1),
        (1, -1, -1, 1, -1, 1, 1, 0),
    ),
    10: (
        (0, 1, 1, 1, 1, 1, 1, 1, 1, 1),
        (1, 0, 1, 1, 1, -1, -1, 1, -1, -1),
        (1, 1, 0, 1, -1, 1, -1, -1, 1, -1),
        (1, 1, 1, 0, -1, -1, 1, -1, -1, 1),
        (1, 1, -1, -1, 0, 1, 1, 1, -1, -1),
        (1, -1, 1, -1, 1, 0, 1, -1, 1, -1),
        (1, -1, -1, 1, 1, 1, 0, -1, -1, 1),
        (1, 1, -1, -1, 1, -1, -1, 0, 1, 1),
        (1, -1, 1, -1, -1, 1, -1, 1, 0, 1),
        (1, -1, -1, 1, -1, -1, 1, 1, 1, 0),
    ),
    12: (
        (0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1),
        (-1, 0, -1, 1, -1, -1, -1, 1, 1, 1, -1, 1),
        (-1, 1, 0, -1, 1, -1, -1, -1, 1, 1, 1, -1),
        (-1, -1, 1, 0, -1, 1, -1, -1, -1, 1, 1, 1),
        (-1, 1, -1, 1, 0, -1, 1, -1, -1, -1, 1, 1),
        (-1, 1, 1, -1, 1, 0, -1, 1, -1, -1, -1, 1),
        (-1, 1, 1, 1, -1, 1, 0, -1, 1, -1, -1, -1),
        (-1, -1, 1, 1, 1, -1, 1, 0, -1, 1, -1, -1),
        (-1, -1, -1, 1, 1, 1, -1, 1, 0, -1, 1, -1),
        (-1, -1, -1, -1, 1, 1, 1, -1, 1, 0, -1, 1),
        (-1, 1, -1, -1, -1, 1, 1, 1, -1, 1, 0, -1),
        (-1, -1, 1, -1, -1, -1, 1, 1, 1, -1, 1, 0),
    ),
    14: (
        (0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1),
        (1, 0, 1, -1, 1, 1, -1, -1, -1, -1, 1, 1, -1, 1),
        (1, 1, 0, 1, -1, 1, 1, -1, -1, -1, -1, 1, 1, -1),
        (1, -1, 1, 0, 1, -1, 1, 1, -1, -1, -1, -1, 1, 1),
        (1, 1, -1, 1, 0, 1, -1, 1, 1, -1, -1, -1, -1, 1),
        (1, 1, 1, -1, 1, 0, 1, -1, 1, 1, -1, -1, -1, -1),
        (1, -1, 1, 1, -1, 1, 0, 1, -1, 1, 1, -1, -1, -1),
        (1, -1, -1, 1, 1, -1, 1, 0, 1, -1, 1, 1, -1, -1),
        (1, -1, -1, -1, 1, 1, -1, 1, 0, 1, -1, 1, 1, -1),
        (1, -1, -1, -1, -1, 1, 1, -1, 1, 0, 1, -1, 1, 1),
        (1, 1, -1, -1, -1, -1, 1, 1, -1, 1, 0, 1, -1, 1),
        (1, 1, 1, -1, -1, -1, -1, 1, 1, -1, 1, 0, 1, -1),
        (1, -1, 1, 1, -1, -1, -1, -1, 1, 1, -1, 1, 0, 1),
        (1, 1, -1, 1, 1, -1, -1, -1, -1, 1, 1, -1, 1, 0),
    ),
    16: (
        (0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1),
        (-1, 0, -1, 1, -1, 1, -1, 1, -1, 1, -1, 1, -1, 1, -1, 1),
        (-1, 1, 0, -1, -1, 1, 1, -1, -1, 1, 1, -1, -1, 1, 1, -1),
        (-1, -1, 1, 0, -1, -1, 1, 1, -1, -1, 1, 1, -1, -1, 1, 1),
        (-1, 1, 1, 1, 0, -1, -1, -1, -1, 1, 1, 1, 1, -1, -1, -1),
        (-1, -1, -1, 1, 1, 0, 1, -1, -1, -1, -1, 1, 1, 1, 1, -1),
        (-1, 1, -1, -1, 1, -1, 0, 1, -1, 1, -1, -1, 1, -1, 1, 1),
        (-1, -1, 1, -1, 1, 1, -1, 0, -1, -1, 1, -1, 1, 1, -1, 1),
        (-1, 1, 1, 1, 1, 1, 1, 1, 0, -1, -1, -1, -1, -1, -1, -1),
        (-1, -1, -1, 1, -1, 1, -1, 1, 1, 0, 1, -1, 1, -1, 1, -1),
        (-1, 1, -1, -1, -1, 1, 1, -1, 1, -1, 0, 1, 1, -1, -1, 1),
        (-1, -1, 1, -1, -1, -1, 1, 1, 1, 1, -1, 0, 1, 1, -1, -1),
        (-1, 1, 1, 1, -1, -1, -1, -1, 1, -1, -1, -1, 0, 1, 1, 1),
        (-1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, -1, -1, 0, -1, 1),
        (-1, 1, -1, -1, 1, -1, -1, 1, 1, -1, 1, 1, -1, 1, 0, -1),
        (-1, -1, 1, -1, 1, 1, -1, -1, 1, 1, -1, 1, -1, -1, 1, 0),
    ),
}

SUPPORTED_ORDERS = tuple(sorted(CONFERENCE_MATRICES))


def conference_matrix(order: int) -> ConferenceMatrix:
    """Return the embedded conference matrix of the given even order."""
    if order not in CONFERENCE_MATRICES:
        raise UnsupportedOrder(
            f"no conference matrix of order {order}; "
            f"supported orders: {SUPPORTED_ORDERS}")
    return ConferenceMatrix(order=order, entries=CONFERENCE_MATRICES[order])


def _decode_row(factors, coded) -> ProcessParams | tuple[float, ...]:
    values = tuple(f.decode(c) for f, c in zip(factors, coded))
    if len(factors) == 6:
        return ProcessParams.from_values(values)
    return values


def _make_row(factors, coded, role, out_of_bounds=False) -> DesignRow:
    params = _decode_row(factors, coded)
    return DesignRow(params=params, role=role, coded=tuple(float(c) for c in coded),
                     out_of_bounds=out_of_bounds)


def generate_dsd(factors, n_dummy: int = 0, n_extra_center: int = 0,
                 seed: int = 0, shuffle_runs: bool = False) -> DesignTable:
    """Definitive screening design via conference-matrix fold-over.

    Builds [C; -C] for the conference matrix of order m = len(factors)
    + n_dummy, drops the trailing dummy columns, decodes the visible
    columns to natural units and appends 1 + n_extra_center center
    runs.  Fold-over pairs are adjacent (row, mirrored row); run order
    is not randomized unless ``shuffle_runs`` is set.
    """
    factors = tuple(factors)
    m = len(factors) + n_dummy
    C = conference_matrix(m).entries
    k = len(factors)

    rows = []
    dummy_cols = []
    for crow in C:
        visible = crow[:k]
        hidden = crow[k:]
        rows.append(_make_row(factors, visible, ROLE_FOLDOVER))
        dummy_cols.append(tuple(hidden))
        mirrored = tuple(-c for c in visible)
        rows.append(_make_row(factors, mirrored, ROLE_FOLDOVER))
        dummy_cols.append(tuple(-c for c in hidden))
    for _ in range(1 + n_extra_center):
        rows.append(_make_row(factors, (0,) * k, ROLE_CENTER))

    if shuffle_runs:
        order = list(range(len(rows)))
        random.Random(seed).shuffle(order)
        reindex = [rows[i] for i in order]
        dummy_map = {i: dummy_cols[i] for i in range(len(dummy_cols))}
        dummy_cols = [dummy_map.get(i, ()) for i in order]
        rows = reindex

    return DesignTable(factors=factors, rows=tuple(rows), design_type="dsd",
                       dummy_count=n_dummy, seed=seed,
                       dummy_coded=tuple(dummy_cols))


# Canonical Box-Behnken blocks: pairs varied at +-1 for 3-5 factors,
# triples for 6-7 (0-based indices).
_BBD_BLOCKS = {
    3: [(0, 1), (0, 2), (1, 2)],
    4: [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
    5: [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2),
        (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)],
    6: [(0, 1, 3), (1, 2, 4), (2, 3, 5), (3, 4, 0), (4, 5, 1), (5, 0, 2)],
    7: [(3, 4, 5), (0, 5, 6), (1, 4, 6), (0, 1, 3), (2, 3, 6), (0, 2, 4),
        (1, 2, 5)],
}


def generate_bbd(factors, n_center: int = 3) -> DesignTable:
    """Box-Behnken design: edge-midpoint blocks plus center runs."""
    factors = tuple(factors)
    k = len(factors)
    if k not in _BBD_BLOCKS:
        raise UnsupportedFactorCount(
            f"Box-Behnken supports 3..7 factors, got {k}")
    rows = []
    for block in _BBD_BLOCKS[k]:
        for signs in itertools.product((-1, 1), repeat=len(block)):
            coded = [0] * k
            for idx, s in zip(block, signs):
                coded[idx] = s
            rows.append(_make_row(factors, coded, ROLE_EDGE))
    for _ in range(n_center):
        rows.append(_make_row(factors, (0,) * k, ROLE_CENTER))
    return DesignTable(factors=factors, rows=tuple(rows), design_type="bbd")


def ccd_alpha(k: int, alpha_mode: str) -> float:
    if alpha_mode == "rotatable":
        return (2.0 ** k) ** 0.25
    if alpha_mode == "face_centered":
        return 1.0
    raise ValueError(f"unknown alpha_mode {alpha_mode!r}")


def generate_ccd(factors, alpha_mode: str = "rotatable",
                 n_center: int = 3) -> DesignTable:
    """Central composite design: 2^k corners, 2k axial runs, centers.

    Rotatable axial runs decode outside the factor range and are
    flagged per row rather than clamped.
    """
    factors = tuple(factors)
    k = len(factors)
    if not 2 <= k <= 6:
        raise UnsupportedFactorCount(
            f"central composite supports 2..6 factors, got {k}")
    alpha = ccd_alpha(k, alpha_mode)
    rows = []
    for signs in itertools.product((-1, 1), repeat=k):
        rows.append(_make_row(factors, signs, ROLE_FACTORIAL))
    for i in range(k):
        for s in (-alpha, alpha):
            coded = [0.0] * k
            coded[i] = s
            rows.append(_make_row(factors, coded, ROLE_AXIAL,
                                  out_of_bounds=alpha > 1.0))
    for _ in range(n_center):
        rows.append(_make_row(factors, (0,) * k, ROLE_CENTER))
    return DesignTable(factors=factors, rows=tuple(rows), design_type="ccd")


def allocate_batches(design: DesignTable, batches, seed: int = 0) -> DesignTable:
    """Assign batch ids to runs, balanced to within one run per batch.

    The assignment pool repeats each batch floor(n/b) or ceil(n/b)
    times and is shuffled with the seeded generator, so the same seed
    and table always produce the same allocation.
    """
    batches = list(batches)
    if not batches:
        raise ValueError("need at least one batch id")
    if design.allocated:
        raise AlreadyAllocated("design already has batch assignments")
    n = len(design.rows)
    b = len(batches)
    pool = []
    base, extra = divmod(n, b)
    for i, batch in enumerate(batches):
        pool.extend([batch] * (base + (1 if i < extra else 0)))
    random.Random(seed).shuffle(pool)
    rows = tuple(replace(r, batch_id=pool[i]) for i, r in enumerate(design.rows))
    return replace(design, rows=rows, seed=seed)


def _coded_matrix(design: DesignTable) -> list[list[int]]:
    """Recode natural values to integer levels, validating exactness."""
    out = []
    for row in design.rows:
        values = row.params.values() if isinstance(row.params, ProcessParams) \
            else row.params
        coded = []
        for f, v in zip(design.factors, values):
            c = f.encode(v)
            ci = round(c)
            if abs(c - ci) > 1e-9:
                raise ValueError(
                    f"value {v} of {f.name} is not at a coded level")
            coded.append(int(ci))
        out.append(coded)
    return out


def verify_dsd(design: DesignTable) -> VerificationReport:
    """Structural verification of a DSD table.

    Checks fold-over pairing, the one-zero-per-row property on the
    full coded matrix (reconstructed from stored dummy columns when
    available, otherwise by zero bookkeeping), center rows, and the
    orthogonality of main-effect columns with each other and with the
    quadratic columns.
    """
    checks = []
    coded = _coded_matrix(design)
    fold_idx = [i for i, r in enumerate(design.rows) if r.role == ROLE_FOLDOVER]
    center_idx = [i for i, r in enumerate(design.rows) if r.role == ROLE_CENTER]

    ordering_ok = (fold_idx == list(range(len(fold_idx)))
                   and center_idx == list(range(len(fold_idx), len(design.rows)))
                   and len(fold_idx) % 2 == 0)
    checks.append(CheckResult(
        "canonical ordering", ordering_ok,
        "fold-over pairs adjacent, centers last"))

    pairing_ok = ordering_ok
    if ordering_ok:
        for i in range(0, len(fold_idx), 2):
            a, b = coded[i], coded[i + 1]
            if any(x + y != 0 for x, y in zip(a, b)):
                pairing_ok = False
                break
    checks.append(CheckResult("fold-over pairing", pairing_ok,
                              "adjacent pairs sum to the center point"))

    # One zero per row in the full (visible + dummy) coded matrix.
    if design.dummy_coded is not None:
        full = [coded[i] + list(design.dummy_coded[i]) for i in fold_idx]
        zeros_ok = all(sum(1 for v in row if v == 0) == 1 for row in full)
    else:
        visible_zero_counts = [sum(1 for v in coded[i] if v == 0)
                               for i in fold_idx]
        zeros_ok = (all(c <= 1 for c in visible_zero_counts)
                    and sum(1 for c in visible_zero_counts if c == 0)
                    == 2 * design.dummy_count)
    checks.append(CheckResult("one zero per fold-over row", zeros_ok,
                              "in the full coded matrix incl. dummy columns"))

    centers_ok = all(all(v == 0 for v in coded[i]) for i in center_idx) \
        and len(center_idx) >= 1
    checks.append(CheckResult("center rows", centers_ok,
                              "all coded entries zero"))

    k = design.n_factors
    cols = [[coded[i][j] for i in range(len(design.rows))] for j in range(k)]
    main_ok = all(
        sum(a * b for a, b in zip(cols[i], cols[j])) == 0
        for i in range(k) for j in range(i + 1, k))
    checks.append(CheckResult("main-effect orthogonality", main_ok,
                              "integer column dot products are zero"))

    quad_ok = all(
        sum(a * b * b for a, b in zip(cols[i], cols[j])) == 0
        for i in range(k) for j in range(k) if i != j)
    checks.append(CheckResult("main vs quadratic orthogonality", quad_ok,
                              "x_i . x_j^2 = 0 for i != j"))

    return VerificationReport(checks=tuple(checks))


def _canonical_fold_rows(design: DesignTable) -> list[tuple[int, ...]]:
    coded = _coded_matrix(design)
    rows = []
    for i, r in enumerate(design.rows):
        if r.role != ROLE_FOLDOVER:
            continue
        t = tuple(coded[i])
        neg = tuple(-v for v in t)
        rows.append(max(t, neg))
    return sorted(rows)


def equivalent_designs(a: DesignTable, b: DesignTable) -> bool:
    """Compare two DSD tables up to row permutation and fold-over sign.

    Each fold-over row is mapped to the lexicographically larger of
    (row, -row); the resulting multisets must match, as must the
    center-row counts.
    """
    if a.n_factors != b.n_factors:
        return False
    an = sum(1 for r in a.rows if r.role == ROLE_CENTER)
    bn = sum(1 for r in b.rows if r.role == ROLE_CENTER)
    if an != bn:
        return False
    return _canonical_fold_rows(a) == _canonical_fold_rows(b)


def format_real(v: float) -> str:
    """Render a real with 6 significant digits for CSV interchange."""
    return f"{v:.6g}"


def export_csv(design: DesignTable) -> str:
    """Design table CSV: run,X1..Xk,role,batch with 6-digit reals."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["run"] + [f"X{i + 1}" for i in range(design.n_factors)] \
        + ["role", "batch"]
    writer.writerow(header)
    for i, row in enumerate(design.rows, start=1):
        values = row.params.values() if isinstance(row.params, ProcessParams) \
            else row.params
        writer.writerow([i] + [format_real(v) for v in values]
                        + [row.role, row.batch_id or ""])
    return buf.getvalue()


def import_csv(text: str, factors, design_type: str = "dsd",
               dummy_count: int = 0) -> DesignTable:
    """Read a design table back from its CSV form.

    Factor specs are not part of the wire format and must be supplied;
    coded levels are recovered from the natural-unit values.
    """
    factors = tuple(factors)
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    expected = ["run"] + [f"X{i + 1}" for i in range(len(factors))] \
        + ["role", "batch"]
    if header != expected:
        raise ValueError(f"unexpected design CSV header: {header}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        values = [float(v) for v in rec[1:1 + len(factors)]]
        role = rec[1 + len(factors)]
        batch = rec[2 + len(factors)] or None
        params = _decode_params(factors, values)
        coded = tuple(f.encode(v) for f, v in zip(factors, values))
        rows.append(DesignRow(params=params, role=role, coded=coded,
                              batch_id=batch))
    return DesignTable(factors=factors, rows=tuple(rows),
                       design_type=design_type, dummy_count=dummy_count)


def _decode_params(factors, values):
    if len(factors) == 6:
        return ProcessParams.from_values(values)
    return tuple(values)
