"""Thin boundary between model builders and LP/MILP backends.

Models are stored as dense rows of sparse coefficient triplets and solved
through a backend registry (reference backend: HiGHS via scipy.optimize).
Models can also be exported to CPLEX LP text format for offline solving and
re-imported (the reader covers the subset this writer emits).
"""

from __future__ import annotations

import os
import re
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize as sopt
import scipy.sparse as sp

from . import FsucError

CONTINUOUS = "continuous"
BINARY = "binary"

OPTIMAL = "optimal"
GAP = "gap"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
TIMEOUT = "timeout"

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


class SolverError(FsucError):
    """Backend failure or invalid model."""


@dataclass
class Variable:
    name: str
    kind: str = CONTINUOUS
    lb: float = 0.0
    ub: float = np.inf


@dataclass
class Row:
    name: str
    coeffs: list  # [(var_index, coefficient), ...]
    sense: str  # "<=", ">=", "=="
    rhs: float


@dataclass
class LinearModel:
    """Sparse linear (mixed-integer) model, minimization sense."""

    variables: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)  # var_index -> coefficient
    name: str = "model"

    def add_variable(self, name, kind=CONTINUOUS, lb=0.0, ub=np.inf, obj=0.0) -> int:
        if not _NAME_RE.match(name):
            raise SolverError(f"variable name {name!r} not LP-format safe")
        idx = len(self.variables)
        self.variables.append(Variable(name, kind, float(lb), float(ub)))
        if obj:
            self.objective[idx] = self.objective.get(idx, 0.0) + float(obj)
        return idx

    def add_row(self, name, coeffs, sense, rhs) -> int:
        if sense not in ("<=", ">=", "=="):
            raise SolverError(f"bad row sense {sense!r}")
        rhs = float(rhs)
        if not np.isfinite(rhs):
            raise SolverError(f"row {name}: rhs must be finite")
        merged: dict[int, float] = {}
        for j, c in coeffs:
            if not (0 <= j < len(self.variables)):
                raise SolverError(f"row {name}: coefficient references unknown variable {j}")
            merged[j] = merged.get(j, 0.0) + float(c)
        self.rows.append(Row(name, sorted(merged.items()), sense, rhs))
        return len(self.rows) - 1

    def add_objective(self, idx, coef) -> None:
        self.objective[idx] = self.objective.get(idx, 0.0) + float(coef)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(len(self.variables))
        for j, v in self.objective.items():
            c[j] = v
        return c

    def constraint_matrix(self):
        """(A, lower, upper) in scipy sparse CSR form."""
        data, ri, ci = [], [], []
        lo = np.empty(len(self.rows))
        hi = np.empty(len(self.rows))
        for i, row in enumerate(self.rows):
            for j, c in row.coeffs:
                ri.append(i)
                ci.append(j)
                data.append(c)
            if row.sense == "<=":
                lo[i], hi[i] = -np.inf, row.rhs
            elif row.sense == ">=":
                lo[i], hi[i] = row.rhs, np.inf
            else:
                lo[i], hi[i] = row.rhs, row.rhs
        a = sp.csr_matrix(
            (data, (ri, ci)), shape=(len(self.rows), len(self.variables))
        )
        return a, lo, hi


@dataclass
class SolveOptions:
    gap: float = 1e-3  # relative MIP gap
    time_limit: float = 600.0  # s
    seed: int | None = None  # honored where the backend supports it


@dataclass
class SolveResult:
    status: str
    objective: float | None
    values: np.ndarray | None
    gap: float | None
    wall_time: float
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, GAP)


# ---------------------------------------------------------------------------
# HiGHS reference backend (scipy)
# ---------------------------------------------------------------------------


def _solve_highs(model: LinearModel, options: SolveOptions, relax: bool) -> SolveResult:
    c = model.objective_vector()
    bounds = sopt.Bounds(
        np.array([v.lb for v in model.variables]),
        np.array([v.ub for v in model.variables]),
    )
    integrality = np.array(
        [0 if (relax or v.kind == CONTINUOUS) else 1 for v in model.variables]
    )
    constraints = []
    if model.rows:
        a, lo, hi = model.constraint_matrix()
        constraints = [sopt.LinearConstraint(a, lo, hi)]
    t0 = time.perf_counter()
    res = sopt.milp(
        c,
        integrality=integrality,
        bounds=bounds,
        constraints=constraints,
        options={
            "mip_rel_gap": options.gap,
            "time_limit": options.time_limit,
            "presolve": True,
        },
    )
    wall = time.perf_counter() - t0

    mip_gap = getattr(res, "mip_gap", None)
    if res.status == 0:
        status = OPTIMAL if (mip_gap is None or mip_gap <= 1e-9) else GAP
        return SolveResult(status, float(res.fun), np.asarray(res.x), mip_gap, wall, res.message)
    if res.status == 1:
        if res.x is not None:
            return SolveResult(GAP, float(res.fun), np.asarray(res.x), mip_gap, wall, res.message)
        return SolveResult(TIMEOUT, None, None, None, wall, res.message)
    if res.status == 2:
        return SolveResult(INFEASIBLE, None, None, None, wall, res.message)
    if res.status == 3:
        return SolveResult(UNBOUNDED, None, None, None, wall, res.message)
    raise SolverError(f"backend failure: {res.message}")


_BACKENDS = {"highs": _solve_highs}


def register_backend(name, fn) -> None:
    """Register an optional plug-in backend with the _solve_highs signature."""
    _BACKENDS[name] = fn


def _backend(name: str | None):
    name = name or os.environ.get("FSUC_SOLVER_BACKEND", "highs")
    try:
        return _BACKENDS[name]
    except KeyError:
        raise SolverError(
            f"unknown solver backend {name!r}; available: {sorted(_BACKENDS)}"
        )


def solve_milp(model: LinearModel, options: SolveOptions | None = None,
               backend: str | None = None) -> SolveResult:
    """Solve the mixed-integer model; values present iff status optimal/gap."""
    return _backend(backend)(model, options or SolveOptions(), relax=False)


def solve_lp(model: LinearModel, options: SolveOptions | None = None,
             backend: str | None = None) -> SolveResult:
    """Solve the continuous relaxation of the model."""
    return _backend(backend)(model, options or SolveOptions(), relax=True)


# ---------------------------------------------------------------------------
# LP-format text export / import
# ---------------------------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def write_lp(model: LinearModel, path) -> None:
    """Write the model in CPLEX LP text format (byte-stable for equal models).

    Variables never referenced by a row or the objective are still exported
    through their bounds; a warning is emitted for them.
    """
    used = set(model.objective)
    for row in model.rows:
        used.update(j for j, _ in row.coeffs)
    unused = [v.name for j, v in enumerate(model.variables) if j not in used]
    if unused:
        warnings.warn(f"exporting unused variables: {', '.join(unused)}")

    out = ["\\ fsuc model export", "Minimize", " obj:"]
    terms = []
    for j in sorted(model.objective):
        coef = model.objective[j]
        if coef == 0:
            continue
        sign = "+" if coef >= 0 else "-"
        terms.append(f" {sign} {_num(abs(coef))} {model.variables[j].name}")
    if not terms:
        terms.append(" 0 " + model.variables[0].name if model.variables else " 0")
    out[-1] += "".join(terms)
    out.append("Subject To")
    for row in model.rows:
        line = f" {row.name}:"
        for j, coef in row.coeffs:
            sign = "+" if coef >= 0 else "-"
            line += f" {sign} {_num(abs(coef))} {model.variables[j].name}"
        op = {"<=": "<=", ">=": ">=", "==": "="}[row.sense]
        line += f" {op} {_num(row.rhs)}"
        out.append(line)
    out.append("Bounds")
    for v in model.variables:
        lo = "-inf" if np.isneginf(v.lb) else _num(v.lb)
        hi = "+inf" if np.isposinf(v.ub) else _num(v.ub)
        out.append(f" {lo} <= {v.name} <= {hi}")
    binaries = [v.name for v in model.variables if v.kind == BINARY]
    if binaries:
        out.append("Binaries")
        out.append(" " + " ".join(binaries))
    out.append("End")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


_TERM_RE = re.compile(r"([+-])\s*([0-9.eE+-]+)\s+([A-Za-z_][A-Za-z0-9_.]*)")


def read_lp(path) -> LinearModel:
    """Read back a model written by write_lp (documented subset only)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("\\")]
    model = LinearModel()
    section = None
    index: dict[str, int] = {}
    pending_bounds = []
    binaries: list[str] = []

    def var_idx(name):
        if name not in index:
            index[name] = model.add_variable(name)
        return index[name]

    obj_terms: list[tuple[str, float]] = []
    row_specs = []
    for ln in lines:
        stripped = ln.strip()
        if not stripped:
            continue
        low = stripped.lower()
        if low in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = low
            continue
        if section == "minimize":
            body = stripped.split(":", 1)[1] if ":" in stripped else stripped
            for sign, num, name in _TERM_RE.findall(" " + body):
                obj_terms.append((name, float(num) * (1 if sign == "+" else -1)))
        elif section == "subject to":
            if ":" not in stripped:
                raise SolverError(f"unparseable row: {ln!r}")
            rname, body = stripped.split(":", 1)
            m = re.search(r"(<=|>=|=)\s*([0-9.eE+-]+)\s*$", body)
            if not m:
                raise SolverError(f"unparseable row: {ln!r}")
            op = {"<=": "<=", ">=": ">=", "=": "=="}[m.group(1)]
            rhs = float(m.group(2))
            terms = _TERM_RE.findall(" " + body[: m.start()])
            row_specs.append((rname.strip(), terms, op, rhs))
        elif section == "bounds":
            m = re.match(r"^(\S+)\s*<=\s*([A-Za-z_][A-Za-z0-9_.]*)\s*<=\s*(\S+)$", stripped)
            if not m:
                raise SolverError(f"unparseable bound: {ln!r}")
            lo = -np.inf if m.group(1) == "-inf" else float(m.group(1))
            hi = np.inf if m.group(3) == "+inf" else float(m.group(3))
            pending_bounds.append((m.group(2), lo, hi))
        elif section == "binaries":
            binaries.extend(stripped.split())

    for name, coef in obj_terms:
        model.add_objective(var_idx(name), coef)
    for rname, terms, op, rhs in row_specs:
        coeffs = [
            (var_idx(name), float(num) * (1 if sign == "+" else -1))
            for sign, num, name in terms
        ]
        model.add_row(rname, coeffs, op, rhs)
    for name, lo, hi in pending_bounds:
        j = var_idx(name)
        model.variables[j].lb = lo
        model.variables[j].ub = hi
    for name in binaries:
        model.variables[var_idx(name)].kind = BINARY
    return model
