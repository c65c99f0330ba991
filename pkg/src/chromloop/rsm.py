"""Second-order response-surface models with material covariates.

Model terms are the intercept, main effects, pure quadratics and
two-factor interactions of the process parameters plus linear terms in
the material attributes.  Term selection is bidirectional stepwise on
partial-F p-values; fitting is ordinary least squares on natural-unit
columns with t-test p-values per coefficient.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .doe import MaterialAttributes, ProcessParams
from .errors import InsufficientData, RankDeficient

INTERCEPT = "intercept"
MAIN = "main"
QUADRATIC = "quadratic"
INTERACTION = "interaction"
COVARIATE = "covariate"

# Relative SSE below which a model is treated as an exact fit; guards
# the F statistics against zero residual variance.
_EXACT_FIT_RTOL = 1e-12


@dataclass(frozen=True, order=True)
class Term:
    """One model term; ``i``/``j`` are 1-based factor or covariate indices."""

    kind: str
    i: int = 0
    j: int = 0

    _KIND_ORDER = {INTERCEPT: 0, MAIN: 1, QUADRATIC: 2, INTERACTION: 3,
                   COVARIATE: 4}

    def __post_init__(self):
        if self.kind not in self._KIND_ORDER:
            raise ValueError(f"unknown term kind {self.kind!r}")
        if self.kind == INTERACTION and not self.i < self.j:
            raise ValueError("interaction indices must be strictly ordered")

    def sort_key(self) -> tuple:
        return (self._KIND_ORDER[self.kind], self.i, self.j)

    def label(self) -> str:
        if self.kind == INTERCEPT:
            return "Intercept"
        if self.kind == MAIN:
            return f"X{self.i}"
        if self.kind == QUADRATIC:
            return f"X{self.i}^2"
        if self.kind == INTERACTION:
            return f"X{self.i}*X{self.j}"
        return f"Z{self.i}"

    @classmethod
    def from_label(cls, label: str) -> "Term":
        label = label.strip()
        if label == "Intercept" or label == "1":
            return cls(INTERCEPT)
        if "*" in label:
            a, b = label.split("*")
            i, j = int(a.lstrip("X")), int(b.lstrip("X"))
            return cls(INTERACTION, min(i, j), max(i, j))
        if label.endswith("^2"):
            return cls(QUADRATIC, int(label[:-2].lstrip("X")))
        if label.startswith("Z"):
            return cls(COVARIATE, int(label[1:]))
        if label.startswith("X"):
            return cls(MAIN, int(label[1:]))
        raise ValueError(f"cannot parse term label {label!r}")

    def evaluate(self, x, z) -> float:
        if self.kind == INTERCEPT:
            return 1.0
        if self.kind == MAIN:
            return x[self.i - 1]
        if self.kind == QUADRATIC:
            return x[self.i - 1] ** 2
        if self.kind == INTERACTION:
            return x[self.i - 1] * x[self.j - 1]
        return z[self.i - 1]


def intercept() -> Term:
    return Term(INTERCEPT)


def main_effect(i: int) -> Term:
    return Term(MAIN, i)


def quadratic(i: int) -> Term:
    return Term(QUADRATIC, i)


def interaction(i: int, j: int) -> Term:
    return Term(INTERACTION, min(i, j), max(i, j))


def covariate(k: int) -> Term:
    return Term(COVARIATE, k)


@dataclass(frozen=True)
class Dataset:
    """Observations of one response over parameter/attribute settings."""

    response_name: str
    params: tuple[ProcessParams, ...]
    attrs: tuple[MaterialAttributes, ...]
    observed: tuple[float, ...]

    def __post_init__(self):
        if not len(self.params) == len(self.attrs) == len(self.observed):
            raise ValueError("params, attrs and observed must align")

    def __len__(self) -> int:
        return len(self.observed)

    def design_matrix(self, terms) -> np.ndarray:
        cols = []
        for t in terms:
            cols.append([t.evaluate(p.values(), a.values())
                         for p, a in zip(self.params, self.attrs)])
        return np.array(cols, dtype=float).T

    def y(self) -> np.ndarray:
        return np.array(self.observed, dtype=float)


@dataclass(frozen=True)
class RegressionModel:
    """Fitted model: selected terms with natural-unit coefficients."""

    response_name: str
    terms: tuple[Term, ...]
    coefficients: tuple[float, ...]
    r_squared: float
    p_values: tuple[float, ...]
    residual_sd: float

    def __post_init__(self):
        if len(self.coefficients) != len(self.terms):
            raise ValueError("one coefficient per term required")

    def coefficient(self, term: Term) -> float:
        return self.coefficients[self.terms.index(term)]


@dataclass(frozen=True)
class DiagnosticsReport:
    """Per-row observed/predicted/residual triples and fit statistics."""

    response_name: str
    observed: tuple[float, ...]
    predicted: tuple[float, ...]
    residuals: tuple[float, ...]
    r_squared: float
    residual_sd: float


def candidate_terms(n_factors: int, n_covariates: int = 0) -> list[Term]:
    """Full second-order candidate pool in canonical order."""
    if n_factors < 1:
        raise ValueError("need at least one factor")
    terms = [intercept()]
    terms += [main_effect(i) for i in range(1, n_factors + 1)]
    terms += [quadratic(i) for i in range(1, n_factors + 1)]
    terms += [interaction(i, j)
              for i in range(1, n_factors + 1)
              for j in range(i + 1, n_factors + 1)]
    terms += [covariate(k) for k in range(1, n_covariates + 1)]
    return terms


def _lstsq(A: np.ndarray, y: np.ndarray):
    beta, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ beta
    return beta, float(resid @ resid), rank


def _sse(data: Dataset, terms) -> tuple[float, int, int]:
    A = data.design_matrix(terms)
    _, sse, rank = _lstsq(A, data.y())
    return sse, rank, A.shape[1]


def _coef_p_values(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Two-sided t-test p-values for each coefficient of an OLS fit."""
    n, p = A.shape
    beta, sse, rank = _lstsq(A, y)
    if rank < p:
        raise RankDeficient("design matrix is rank deficient")
    dof = n - p
    if dof <= 0:
        raise InsufficientData("no residual degrees of freedom")
    sst = float(((y - y.mean()) ** 2).sum())
    scale = max(sst, 1.0)
    gram_inv = np.linalg.inv(A.T @ A)
    if sse <= _EXACT_FIT_RTOL * scale:
        # Exact fit: zero-variance coefficients; significance reduces
        # to whether the coefficient is numerically nonzero.
        col_norms = np.sqrt((A ** 2).sum(axis=0))
        eff = np.abs(beta) * col_norms
        return np.where(eff > 1e-8 * math.sqrt(scale), 0.0, 1.0)
    se = np.sqrt(sse / dof * np.diag(gram_inv))
    tvals = np.divide(beta, se, out=np.full_like(beta, np.inf), where=se > 0)
    return 2.0 * stats.t.sf(np.abs(tvals), dof)


def stepwise_select(data: Dataset, candidates, p_enter: float = 0.05,
                    p_remove: float = 0.05) -> list[Term]:
    """Bidirectional stepwise selection on partial-F p-values.

    Alternates entry of the most significant excluded candidate
    (smallest partial-F p-value below ``p_enter``, ties broken by
    canonical term order) with removal of the least significant
    included term (largest p-value above ``p_remove``) until neither
    step changes the model.  The intercept is never removed.
    """
    if p_enter > p_remove:
        raise ValueError("p_enter must be <= p_remove")
    candidates = list(candidates)
    if intercept() not in candidates:
        raise ValueError("candidate pool must include the intercept")
    n = len(data)
    y = data.y()
    sst = float(((y - y.mean()) ** 2).sum())
    model = [intercept()]

    while True:
        changed = False
        sse_cur, rank_cur, p_cur = _sse(data, model)
        if rank_cur < p_cur:
            raise RankDeficient("active design matrix lost full rank")
        exact = sse_cur <= _EXACT_FIT_RTOL * max(sst, 1.0)

        best = None
        if not exact:
            for cand in sorted(set(candidates) - set(model),
                               key=Term.sort_key):
                trial = model + [cand]
                if n - len(trial) < 2:
                    continue
                sse_new, rank_new, p_new = _sse(data, trial)
                if rank_new < p_new:
                    continue
                dof = n - p_new
                if sse_new <= _EXACT_FIT_RTOL * max(sst, 1.0):
                    pv = 0.0
                else:
                    f = (sse_cur - sse_new) / (sse_new / dof)
                    pv = float(stats.f.sf(max(f, 0.0), 1, dof))
                if pv < p_enter and (best is None or pv < best[0]):
                    best = (pv, cand)
        if best is not None:
            model.append(best[1])
            changed = True

        while len(model) > 1:
            A = data.design_matrix(model)
            pvals = _coef_p_values(A, y)
            worst_i, worst_p = None, p_remove
            for i, t in enumerate(model):
                if t.kind == INTERCEPT:
                    continue
                if pvals[i] > worst_p:
                    worst_i, worst_p = i, pvals[i]
            if worst_i is None:
                break
            model.pop(worst_i)
            changed = True

        if not changed:
            return sorted(model, key=Term.sort_key)


def fit_least_squares(data: Dataset, terms) -> RegressionModel:
    """Ordinary least squares on natural-unit columns."""
    terms = tuple(terms)
    A = data.design_matrix(terms)
    n, p = A.shape
    if n - p < 1:
        raise InsufficientData(
            f"{n} rows cannot support {p} terms with residual dof >= 1")
    y = data.y()
    beta, sse, rank = _lstsq(A, y)
    if rank < p:
        raise RankDeficient("design matrix is rank deficient")
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    dof = n - p
    residual_sd = math.sqrt(sse / dof)
    pvals = _coef_p_values(A, y)
    return RegressionModel(
        response_name=data.response_name,
        terms=terms,
        coefficients=tuple(float(b) for b in beta),
        r_squared=r2,
        p_values=tuple(float(v) for v in pvals),
        residual_sd=residual_sd,
    )


def predict(model: RegressionModel, params: ProcessParams,
            attrs: MaterialAttributes) -> float:
    """Evaluate the fitted polynomial at a parameter/attribute point."""
    x = params.values()
    z = attrs.values()
    return float(sum(c * t.evaluate(x, z)
                     for c, t in zip(model.coefficients, model.terms)))


def predict_batch(model: RegressionModel, X: np.ndarray,
                  z: np.ndarray) -> np.ndarray:
    """Vectorized prediction over rows of parameter values.

    ``X`` has one row per point with the six process parameters in
    canonical order; ``z`` is the (fixed) covariate vector.
    """
    out = np.zeros(X.shape[0])
    for c, t in zip(model.coefficients, model.terms):
        if t.kind == INTERCEPT:
            out += c
        elif t.kind == MAIN:
            out += c * X[:, t.i - 1]
        elif t.kind == QUADRATIC:
            out += c * X[:, t.i - 1] ** 2
        elif t.kind == INTERACTION:
            out += c * X[:, t.i - 1] * X[:, t.j - 1]
        else:
            out += c * z[t.i - 1]
    return out


def diagnostics(model: RegressionModel, data: Dataset) -> DiagnosticsReport:
    """Observed vs predicted table with R-squared and residual spread."""
    predicted = tuple(predict(model, p, a)
                      for p, a in zip(data.params, data.attrs))
    observed = tuple(data.observed)
    residuals = tuple(o - p for o, p in zip(observed, predicted))
    y = np.array(observed)
    sse = float(sum(r * r for r in residuals))
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    dof = max(len(observed) - len(model.terms), 1)
    return DiagnosticsReport(
        response_name=data.response_name,
        observed=observed,
        predicted=predicted,
        residuals=residuals,
        r_squared=r2,
        residual_sd=math.sqrt(sse / dof),
    )


def serialize_model(model: RegressionModel) -> str:
    """Model text format: response, fit statistics, term table."""
    buf = io.StringIO()
    buf.write(f"response: {model.response_name}\n")
    buf.write(f"r_squared: {model.r_squared:.6g}\n")
    buf.write(f"residual_sd: {model.residual_sd:.6g}\n")
    buf.write("term\tcoefficient\tp_value\n")
    for t, c, p in zip(model.terms, model.coefficients, model.p_values):
        buf.write(f"{t.label()}\t{c:.6g}\t{p:.6g}\n")
    return buf.getvalue()


def parse_model(text: str) -> RegressionModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    meta = {}
    rows = []
    in_table = False
    for ln in lines:
        if ln.startswith("term\t"):
            in_table = True
            continue
        if in_table:
            label, coef, pval = ln.split("\t")
            rows.append((Term.from_label(label), float(coef), float(pval)))
        else:
            key, _, val = ln.partition(":")
            meta[key.strip()] = val.strip()
    return RegressionModel(
        response_name=meta["response"],
        terms=tuple(r[0] for r in rows),
        coefficients=tuple(r[1] for r in rows),
        r_squared=float(meta["r_squared"]),
        p_values=tuple(r[2] for r in rows),
        residual_sd=float(meta.get("residual_sd", "0") or 0.0),
    )


def make_model(response_name: str, term_coefs: dict[str, float],
               r_squared: float = float("nan")) -> RegressionModel:
    """Build a model directly from label/coefficient pairs.

    Used for externally supplied models (e.g. reference coefficients);
    p-values are not available and set to NaN.
    """
    terms = tuple(Term.from_label(lbl) for lbl in term_coefs)
    coefs = tuple(float(v) for v in term_coefs.values())
    nan = float("nan")
    return RegressionModel(
        response_name=response_name, terms=terms, coefficients=coefs,
        r_squared=r_squared, p_values=tuple(nan for _ in terms),
        residual_sd=nan,
    )
