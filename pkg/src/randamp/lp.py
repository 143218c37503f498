"""Linear programs bounding how well an adversary can predict the majority bit.

Over all no-signaling boxes whose Bell value is at most delta, maximize
(1/2) * (P(maj = g | u*) - P(maj != g | u*)) for a fixed inequality setting u*
and guess g.  The certified analytic cap on each optimum is (11 + 7 delta)/32.

Two independent primal solvers are kept on purpose: scipy's HiGHS and the
vendored dense simplex.  A feasible dual vector is produced by solving the
explicit dual program and verifying its constraints directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from .boxes import (
    BELL_FUNCTIONAL,
    INEQUALITY_SETTINGS,
    N_OUTCOMES,
    N_SETTINGS,
    NsBox,
    bits_str,
    in_inequality,
    majority,
    pack_bits,
    unpack_bits,
)
from .simplex import simplex_solve

N_VARS = N_OUTCOMES * N_SETTINGS  # p(x|u) flattened outcome-major


class CertificationError(AssertionError):
    pass


def var_index(x: int, u: int) -> int:
    return x * N_SETTINGS + u


@lru_cache(maxsize=1)
def equality_constraints():
    """(A, b) for normalization and the per-party marginal matching rows."""
    rows = []
    b = []
    for u in range(N_SETTINGS):
        row = np.zeros(N_VARS)
        for x in range(N_OUTCOMES):
            row[var_index(x, u)] = 1.0
        rows.append(row)
        b.append(1.0)
    for party in range(4):
        others = [i for i in range(4) if i != party]
        for other_setting in range(8):
            for other_outcome in range(8):
                row = np.zeros(N_VARS)
                u_bits = [0] * 4
                x_bits = [0] * 4
                for pos, i in enumerate(others):
                    u_bits[i] = (other_setting >> pos) & 1
                    x_bits[i] = (other_outcome >> pos) & 1
                for xi in (0, 1):
                    x_bits[party] = xi
                    x = pack_bits(x_bits)
                    u_bits[party] = 0
                    row[var_index(x, pack_bits(u_bits))] += 1.0
                    u_bits[party] = 1
                    row[var_index(x, pack_bits(u_bits))] -= 1.0
                rows.append(row)
                b.append(0.0)
    return np.array(rows), np.array(b)


@lru_cache(maxsize=1)
def independent_equality_rows():
    """Indices of a maximal independent subset of the equality rows.

    Dropping the rest must not change the feasible set, which requires the
    augmented matrix to have the same rank; asserted here once.
    """
    from scipy.linalg import qr

    A, b = equality_constraints()
    _, r_mat, piv = qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r_mat))
    rank = int(np.sum(diag > diag[0] * 1e-10))
    keep = np.sort(piv[:rank])
    aug_rank = np.linalg.matrix_rank(np.hstack([A, b[:, None]]), tol=1e-10)
    if aug_rank != rank:
        raise RuntimeError("equality system inconsistent with its own rank")
    return keep


def bell_row() -> np.ndarray:
    return BELL_FUNCTIONAL.reshape(-1)  # outcome-major flatten matches var_index


@lru_cache(maxsize=4)
def majority_sign_vector(guess: int) -> np.ndarray:
    """m[x] = +1 if maj(x1,x2,x3) == guess else -1."""
    signs = np.empty(N_OUTCOMES)
    for x in range(N_OUTCOMES):
        bits = unpack_bits(x)
        signs[x] = 1.0 if majority(bits[0], bits[1], bits[2]) == guess else -1.0
    return signs


@dataclass(frozen=True)
class LpInstance:
    u_star: tuple
    delta: float
    guess: int

    def __post_init__(self):
        if not in_inequality(self.u_star):
            raise ValueError(f"u_star {self.u_star} carries no Bell coefficient")
        if self.guess not in (0, 1):
            raise ValueError("guess must be 0 or 1")
        if not 0.0 <= self.delta <= 8.0:
            raise ValueError("delta must lie in [0, 8]")

    def objective_m(self) -> np.ndarray:
        """The unhalved objective M with M[x,u] = +-1 at u = u_star, else 0."""
        m = np.zeros(N_VARS)
        u = pack_bits(self.u_star)
        m[u::N_SETTINGS] = majority_sign_vector(self.guess)
        return m


@dataclass
class LpSolution:
    instance: LpInstance
    value: float
    box: NsBox
    dual_certificate: np.ndarray
    dual_value: float
    method: str

    def __post_init__(self):
        # Weak duality, with the halving convention of the primal objective.
        if self.value > 0.5 * self.dual_value + 1e-8:
            raise CertificationError(
                f"weak duality violated: primal {self.value} vs dual {self.dual_value}"
            )


def inequality_constraints(delta: float):
    """All-inequality form A x <= c covering equalities (both directions),
    positivity and the Bell cap; the dual lives over these rows."""
    A_eq, b_eq = equality_constraints()
    A = np.vstack([A_eq, -A_eq, -np.eye(N_VARS), bell_row()[None, :]])
    c = np.concatenate([b_eq, -b_eq, np.zeros(N_VARS), [float(delta)]])
    return A, c


def _solve_primal_highs(instance: LpInstance):
    A_eq, b_eq = equality_constraints()
    res = linprog(
        -0.5 * instance.objective_m(),
        A_ub=bell_row()[None, :],
        b_ub=[instance.delta],
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=(0, 1),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"HiGHS failed on {instance}: {res.message}")
    return res.x, -res.fun


def _solve_dual_highs(instance: LpInstance):
    A_ub, c_vec = inequality_constraints(instance.delta)
    res = linprog(
        c_vec,
        A_eq=A_ub.T,
        b_eq=instance.objective_m(),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"dual solve failed on {instance}: {res.message}")
    residual = np.max(np.abs(A_ub.T @ res.x - instance.objective_m()))
    if residual > 1e-6:
        raise RuntimeError(f"dual certificate infeasible, residual {residual:.3e}")
    return res.x, float(c_vec @ res.x)


def _solve_primal_simplex(instance: LpInstance):
    A_eq, b_eq = equality_constraints()
    keep = independent_equality_rows()
    # One slack turns the Bell cap into an equality row.
    n = N_VARS + 1
    A = np.zeros((len(keep) + 1, n))
    A[: len(keep), :N_VARS] = A_eq[keep]
    A[-1, :N_VARS] = bell_row()
    A[-1, -1] = 1.0
    b = np.concatenate([b_eq[keep], [instance.delta]])
    c = np.zeros(n)
    c[:N_VARS] = -0.5 * instance.objective_m()
    x, value = simplex_solve(c, A, b)
    return x[:N_VARS], -value


def solve(instance: LpInstance, method: str = "highs") -> LpSolution:
    """Solve one predictability program.

    method "highs" uses scipy; "simplex" uses the vendored tableau solver.
    Either way the returned dual certificate comes from an explicit dual solve
    and is feasibility-checked, so the two primal paths stay independent.
    """
    if method == "highs":
        x, value = _solve_primal_highs(instance)
    elif method == "simplex":
        x, value = _solve_primal_simplex(instance)
    else:
        raise ValueError(f"unknown method {method!r}")
    lam, dual_value = _solve_dual_highs(instance)
    table = np.clip(x.reshape(N_OUTCOMES, N_SETTINGS), 0.0, None)
    table /= table.sum(axis=0, keepdims=True)
    box = NsBox(table, tol=1e-7)
    return LpSolution(instance, float(value), box, lam, dual_value, method)


def analytic_bound(delta: float) -> float:
    """Certified cap on each LP optimum; 1/2 is the trivial ceiling."""
    return min((11.0 + 7.0 * delta) / 32.0, 0.5)


@dataclass
class CertificationReport:
    delta: float
    bound: float
    optima: dict
    max_optimum: float
    passed: bool
    method: str

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "bound": self.bound,
            "max_optimum": self.max_optimum,
            "passed": self.passed,
            "method": self.method,
            "optima": {f"{setting}|guess={guess}": v for (setting, guess), v in self.optima.items()},
        }


def certify_bound(delta: float, method: str = "highs", tol: float = 1e-8) -> CertificationReport:
    """Solve all 16 instances (8 settings x 2 guesses) and check the cap.

    Raises CertificationError naming the first violating instance.
    """
    optima = {}
    bound = analytic_bound(delta)
    for u_star in INEQUALITY_SETTINGS:
        for guess in (0, 1):
            sol = solve(LpInstance(u_star, delta, guess), method=method)
            optima[(bits_str(pack_bits(u_star)), guess)] = sol.value
            if sol.value > bound + tol:
                raise CertificationError(
                    f"optimum {sol.value} exceeds bound {bound} at u*={u_star}, guess={guess}, delta={delta}"
                )
    max_opt = max(optima.values())
    return CertificationReport(float(delta), bound, optima, max_opt, True, method)


def adversarial_box(delta: float, u_star, guess: int, method: str = "highs") -> NsBox:
    """The optimizing box itself, for feeding back into protocol simulations."""
    return solve(LpInstance(tuple(u_star), float(delta), int(guess)), method=method).box
