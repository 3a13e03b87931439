"""Measured quantities along a run and the bound-verification report.

Bregman divergences, Lagrangian and feasibility gaps, the discrete Lyapunov
function, and the right-hand sides of the rate bounds for the dual flow.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .errors import MissingCertificate
from .regularizers import Regularizer

__all__ = [
    "CSV_HEADER",
    "DiagnosticsRow",
    "BoundCheck",
    "BoundReport",
    "bregman_div",
    "lagrangian_gap",
    "lagrangian_gap_via_lagrangian",
    "dual_objective",
    "lyapunov_discrete",
    "rate_rhs",
    "early_stopping_bounds",
    "make_row",
    "bound_report",
    "bound_report_from_rows",
    "write_csv",
    "read_csv",
    "fmt",
]

# conjugates of indicator type are evaluated with this slack along a run,
# where inexact inner solves leave -A^T y marginally outside the domain
RUN_CONJ_TOL = 1e-6


@dataclass
class DiagnosticsRow:
    k: int
    t: float
    feas_gap_avg: float
    feas_gap_last: float
    lagrangian_gap_avg: Optional[float]
    bregman_reverse_last: Optional[float]
    dual_dist: Optional[float]
    lyapunov: Optional[float]
    dual_obj: float
    recon_err: float
    rhs_eq13: Optional[float] = None
    rhs_eq14: Optional[float] = None
    rhs_eq15: Optional[float] = None


CSV_HEADER = [f.name for f in fields(DiagnosticsRow)]


def fmt(v) -> str:
    """CSV cell: empty for missing values, shortest round-trip decimal for floats."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _parse(v: str):
    if v == "":
        return None
    return float(v)


def write_csv(rows, path, header=None) -> None:
    """Write dataclass rows or dicts; column order follows `header`."""
    header = header or CSV_HEADER
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            d = r if isinstance(r, dict) else asdict(r)
            w.writerow([fmt(d.get(h)) for h in header])


def read_csv(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for line in reader:
            if not line:
                continue
            if len(line) != len(header):
                raise ValueError(f"row has {len(line)} fields, header has {len(header)}")
            rows.append({h: _parse(v) for h, v in zip(header, line)})
    return header, rows


def rows_from_dicts(dicts) -> list[DiagnosticsRow]:
    out = []
    for d in dicts:
        kw = {h: d.get(h) for h in CSV_HEADER}
        kw["k"] = int(kw["k"])
        out.append(DiagnosticsRow(**kw))
    return out


# -- measured quantities ----------------------------------------------------

def bregman_div(reg: Regularizer, u, x1, x2) -> float:
    """``D^u(x1, x2) = J(x1) - J(x2) - <u, x1 - x2>`` for ``u`` in ``dJ(x2)``."""
    u = np.asarray(u, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    return reg.value(x1) - reg.value(x2) - float(u @ (x1 - x2))


def _cert(inst):
    if inst.certificate is None:
        raise MissingCertificate("instance carries no primal-dual certificate")
    return inst.certificate


def lagrangian_gap(inst, x) -> float:
    """``D^{-A^T y_bar}(x, x_bar)``."""
    c = _cert(inst)
    return bregman_div(inst.reg, -inst.A.adjoint(c.y_bar), x, c.x_bar)


def lagrangian_gap_via_lagrangian(inst, x) -> float:
    """``L(x, y_bar) - L(x_bar, y_bar)`` with ``L(x, y) = J(x) + <y, Ax - f>``."""
    c = _cert(inst)
    lag_x = inst.reg.value(x) + float(c.y_bar @ (inst.A.apply(x) - inst.f))
    lag_bar = inst.reg.value(c.x_bar) + float(c.y_bar @ (inst.A.apply(c.x_bar) - inst.f))
    return lag_x - lag_bar


def dual_objective(inst, y, tol: float = RUN_CONJ_TOL) -> float:
    """Inexact dual function ``J*(-A^T y) + <f_delta, y>``."""
    y = np.asarray(y, dtype=np.float64)
    return inst.reg.conjugate_value(-inst.A.adjoint(y), tol=tol) + float(inst.f_delta @ y)


def lyapunov_discrete(traj, inst) -> float:
    """Left-Riemann-sum analogue of the Lyapunov energy at the current step.

    ``V_k = 0.5*||y_k - y_bar||^2 + gamma*sum_{j<k} t_j ||Ax_j - f||^2
    - delta*gamma*sum_{j<k} ||y_j - y_bar|| - delta*gamma*sum_{j<k} t_j ||Ax_j - f||
    + gamma*sum_{j<k} D^{-A^T y_bar}(x_j, x_bar) + t_k D^{-A^T y_k}(x_bar, x_k)``

    The sums are maintained incrementally by the flow in ``traj.lyap_sums``.
    """
    c = _cert(inst)
    g = traj.gamma
    s_tfeas2, s_ydist, s_tfeas, s_lagr = traj.lyap_sums
    t_k = traj.k * g
    rev = bregman_div(inst.reg, -inst.A.adjoint(traj.y), c.x_bar, traj.x)
    dist = traj.y - c.y_bar
    return (0.5 * float(dist @ dist) + g * s_tfeas2 - inst.delta * g * s_ydist
            - inst.delta * g * s_tfeas + g * s_lagr + t_k * rev)


def rate_rhs(c0: float, delta: float, t: float) -> tuple[float, float, float]:
    """Right-hand sides of the three rate bounds at time ``t > 0``.

    Returns the bounds on the Lagrangian gap of the tail average, on the
    *squared* feasibility gap of the tail average, and on the reverse Bregman
    divergence at the last iterate.
    """
    lagr = c0 * c0 / t + 2.0 * c0 * delta + delta * delta * t
    feas2 = 2.0 * c0 * c0 / (t * t) + 6.0 * c0 * delta / t + 6.0 * delta * delta
    rev = c0 * c0 / (2.0 * t) + 1.5 * c0 * delta + 1.5 * delta * delta * t
    return lagr, feas2, rev


def early_stopping_bounds(c0: float, delta: float) -> tuple[float, float]:
    """Bounds at ``t* = c0/delta``: Lagrangian gap ``4*c0*delta``, feasibility ``sqrt(14)*delta``."""
    return 4.0 * c0 * delta, math.sqrt(14.0) * delta


def make_row(traj, inst, x_hat) -> DiagnosticsRow:
    A = inst.A
    Axh = A.apply(x_hat)
    row = DiagnosticsRow(
        k=traj.k,
        t=traj.k * traj.gamma,
        feas_gap_avg=float(np.linalg.norm(Axh - inst.f)),
        feas_gap_last=float(np.linalg.norm(traj.Ax - inst.f)),
        lagrangian_gap_avg=None,
        bregman_reverse_last=None,
        dual_dist=None,
        lyapunov=None,
        dual_obj=dual_objective(inst, traj.y),
        recon_err=float(np.linalg.norm(x_hat - inst.x_star)),
    )
    c = inst.certificate
    if c is not None:
        row.lagrangian_gap_avg = lagrangian_gap(inst, x_hat)
        row.bregman_reverse_last = bregman_div(inst.reg, -A.adjoint(traj.y), c.x_bar, traj.x)
        row.dual_dist = float(np.linalg.norm(traj.y - c.y_bar))
        row.lyapunov = lyapunov_discrete(traj, inst)
        if row.t > 0:
            row.rhs_eq13, row.rhs_eq14, row.rhs_eq15 = rate_rhs(traj.c0, inst.delta, row.t)
    return row


# -- bound report -----------------------------------------------------------

@dataclass
class BoundCheck:
    bound: str
    k: int
    t: float
    measured: float
    rhs: float
    limit: float
    passed: bool

    @property
    def ratio(self) -> float:
        if self.limit > 0:
            return self.measured / self.limit
        return 0.0 if self.measured <= 0 else math.inf


@dataclass
class BoundReport:
    slack: float
    c0: Optional[float]
    delta: float
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def worst(self) -> Optional[BoundCheck]:
        bad = self.failures()
        pool = bad if bad else self.checks
        return max(pool, key=lambda c: c.ratio) if pool else None

    def summary(self) -> dict:
        out = {}
        for c in self.checks:
            s = out.setdefault(c.bound, {"checked": 0, "failed": 0, "worst_ratio": 0.0})
            s["checked"] += 1
            s["failed"] += int(not c.passed)
            s["worst_ratio"] = max(s["worst_ratio"], c.ratio)
        return out

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "slack": self.slack,
            "c0": self.c0,
            "delta": self.delta,
            "summary": self.summary(),
            "notes": list(self.notes),
            "checks": [asdict(c) for c in self.checks],
        }


def _check(report, name, row_k, t, measured, rhs, limit):
    report.checks.append(BoundCheck(name, int(row_k), float(t), float(measured), float(rhs),
                                    float(limit), bool(measured <= limit)))


def bound_report_from_rows(rows, c0, delta: float, gamma: float, slack: float = 1.5,
                           dual_slack: float = 1.1, min_steps: int = 10) -> BoundReport:
    """Check measured diagnostics against the rate bounds.

    Parameters
    ----------
    rows : list of DiagnosticsRow
    c0 : float or None
        ``||y0 - y_bar||``; None when no certificate exists, in which case
        every certificate-dependent bound is skipped with a note.
    delta, gamma : float
    slack : float
        Multiplier applied to each right-hand side.
    dual_slack : float
        Multiplier on the ``delta*t`` growth term of the dual-distance bound.
    min_steps : int
        Rate bounds are checked only at rows with ``t >= min_steps * gamma``.
    """
    report = BoundReport(slack=slack, c0=c0, delta=delta)
    if c0 is None:
        report.notes.append("skipped: no certificate (eq13, eq14, eq15, eq16, cor1)")
        return report
    tmin = min_steps * gamma * (1.0 - 1e-12)
    for r in rows:
        if r.dual_dist is not None:
            lim = c0 + delta * r.t * dual_slack
            _check(report, "eq16", r.k, r.t, r.dual_dist, c0 + delta * r.t, lim)
        if r.t < tmin or r.t <= 0:
            continue
        r13, r14, r15 = rate_rhs(c0, delta, r.t)
        if r.lagrangian_gap_avg is not None:
            _check(report, "eq13", r.k, r.t, r.lagrangian_gap_avg, r13, r13 * slack)
        _check(report, "eq14", r.k, r.t, r.feas_gap_avg ** 2, r14, r14 * slack)
        if r.bregman_reverse_last is not None:
            _check(report, "eq15", r.k, r.t, r.bregman_reverse_last, r15, r15 * slack)
    if delta > 0 and rows:
        t_star = c0 / delta
        t_last = rows[-1].t
        if t_star <= t_last * (1.0 + 1e-9) + 0.5 * gamma:
            near = min(rows, key=lambda r: abs(r.t - t_star))
            lag_b, feas_b = early_stopping_bounds(c0, delta)
            if near.lagrangian_gap_avg is not None:
                _check(report, "cor1_lagrangian", near.k, near.t, near.lagrangian_gap_avg,
                       lag_b, lag_b * slack)
            _check(report, "cor1_feasibility", near.k, near.t, near.feas_gap_avg,
                   feas_b, feas_b * slack)
        else:
            report.notes.append(f"skipped cor1: run ended at t={t_last:g} before t*={t_star:g}")
    else:
        report.notes.append("skipped cor1: delta = 0 has no finite early-stopping time")
    return report


def bound_report(traj, inst, slack: float = 1.5, **kw) -> BoundReport:
    """Bound report for a finished run; requires a certificate."""
    _cert(inst)
    return bound_report_from_rows(traj.rows, traj.c0, inst.delta, traj.gamma, slack, **kw)
