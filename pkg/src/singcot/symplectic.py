"""Canonical symplectic structure on cotangent charts.

Coordinates on a 2n-dimensional chart are ``(q_1..q_n, p_1..p_n)``, base
first, fiber second.  Conventions used throughout the package::

    omega   = sum dq_i ^ dp_i
    H_f     = (df/dp, -df/dq)                 (= J grad f)
    {f, g}  = sum df/dq_i dg/dp_i - df/dp_i dg/dq_i

With these, ``H_{qp} = q d/dq - p d/dp``, so the branches of the hyperbolic
level ``qp = 0`` are exactly the coordinate axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral, Rational
from typing import Callable, Sequence

import numpy as np

from .errors import ChartMismatch, DimensionMismatch
from .geometry import FD_STEP


def poisson_matrix(n: int) -> np.ndarray:
    """The block matrix J = [[0, I], [-I, 0]] of size 2n."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def fd_gradient(f: Callable[[np.ndarray], float], z, step: float = FD_STEP) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = step
        out[k] = (f(z + e) - f(z - e)) / (2 * step)
    return out


def fd_hessian(grad: Callable[[np.ndarray], np.ndarray], z, step: float = FD_STEP) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    cols = []
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = step
        cols.append((grad(z + e) - grad(z - e)) / (2 * step))
    h = np.array(cols)
    return 0.5 * (h + h.T)


@dataclass(frozen=True)
class ScalarField:
    """A smooth function on one chart with an analytic gradient (and optionally Hessian)."""

    chart: str
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""

    def __call__(self, z) -> float:
        return float(self.value(np.asarray(z, dtype=float)))

    def grad(self, z) -> np.ndarray:
        return np.asarray(self.gradient(np.asarray(z, dtype=float)), dtype=float)

    def hess(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.hessian is not None:
            return np.asarray(self.hessian(z), dtype=float)
        return fd_hessian(self.grad, z)

    def _check(self, other: "ScalarField"):
        if other.chart != self.chart:
            raise ChartMismatch(f"fields live on {self.chart} and {other.chart}")

    def __add__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            hess = None
            if self.hessian is not None and other.hessian is not None:
                hess = lambda z, a=self, b=other: a.hess(z) + b.hess(z)
            return ScalarField(
                self.chart,
                lambda z, a=self, b=other: a(z) + b(z),
                lambda z, a=self, b=other: a.grad(z) + b.grad(z),
                hess,
                f"({self.name}+{other.name})",
            )
        c = float(other)
        return ScalarField(self.chart, lambda z, a=self: a(z) + c, self.gradient, self.hessian, self.name)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            hess = None
            if self.hessian is not None and other.hessian is not None:

                def hess(z, a=self, b=other):
                    ga, gb = a.grad(z), b.grad(z)
                    return a(z) * b.hess(z) + b(z) * a.hess(z) + np.outer(ga, gb) + np.outer(gb, ga)

            return ScalarField(
                self.chart,
                lambda z, a=self, b=other: a(z) * b(z),
                lambda z, a=self, b=other: a(z) * b.grad(z) + b(z) * a.grad(z),
                hess,
                f"({self.name}*{other.name})",
            )
        c = float(other)
        hess = None if self.hessian is None else (lambda z, a=self: c * a.hess(z))
        return ScalarField(self.chart, lambda z, a=self: c * a(z), lambda z, a=self: c * a.grad(z), hess, f"{c:g}*{self.name}")

    __rmul__ = __mul__


def quadratic_field(Q, b=None, chart: str = "", name: str = "", constant: float = 0.0) -> ScalarField:
    """``z -> 1/2 z^T Q z + b.z + constant`` with exact derivatives."""
    Q = np.asarray(Q, dtype=float)
    Q = 0.5 * (Q + Q.T)
    b = np.zeros(Q.shape[0]) if b is None else np.asarray(b, dtype=float)
    return ScalarField(
        chart,
        lambda z: 0.5 * z @ Q @ z + b @ z + constant,
        lambda z: Q @ z + b,
        lambda z: Q,
        name,
    )


@dataclass(frozen=True)
class VectorField:
    """A vector field on an n-dimensional base chart.

    ``jacobian(q)[i, j] = dX^i/dq_j``; ``second(q)[i, j, k] = d^2 X^i / dq_j dq_k``.
    """

    chart: str
    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    second: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""

    def __call__(self, q) -> np.ndarray:
        return np.asarray(self.value(np.asarray(q, dtype=float)), dtype=float)

    def jac(self, q) -> np.ndarray:
        return np.asarray(self.jacobian(np.asarray(q, dtype=float)), dtype=float)


def linear_vector_field(A, b=None, chart: str = "", name: str = "") -> VectorField:
    """``q -> A q + b``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    zero2 = np.zeros((n, n, n))
    return VectorField(chart, n, lambda q: A @ q + b, lambda q: A, lambda q: zero2, name)


def hamiltonian_vector_field(f: ScalarField, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.size % 2:
        raise DimensionMismatch(f"phase-space point has odd dimension {z.size}")
    return poisson_matrix(z.size // 2) @ f.grad(z)


def poisson_bracket(f: ScalarField, g: ScalarField, z, finite_differences: bool = False) -> float:
    if f.chart != g.chart:
        raise ChartMismatch(f"bracket of fields on {f.chart} and {g.chart}")
    z = np.asarray(z, dtype=float)
    if z.size % 2:
        raise DimensionMismatch(f"phase-space point has odd dimension {z.size}")
    n = z.size // 2
    if finite_differences:
        df, dg = fd_gradient(f, z), fd_gradient(g, z)
    else:
        df, dg = f.grad(z), g.grad(z)
    return float(df[:n] @ dg[n:] - df[n:] @ dg[:n])


def liouville_eval(v: Sequence[float], p: Sequence[float]) -> float:
    """Pairing of the fiber covector ``p`` with a base tangent vector ``v``."""
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    if v.shape != p.shape:
        raise DimensionMismatch(f"vector of shape {v.shape} paired with covector of shape {p.shape}")
    return float(p @ v)


@dataclass(frozen=True)
class SymplecticReport:
    max_error: float
    tol: float
    exact: bool
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tol

    def to_dict(self) -> dict:
        return {"max_error": self.max_error, "tol": self.tol, "exact": self.exact, "n_samples": self.n_samples, "passed": self.passed}


def _is_exact_matrix(m) -> bool:
    if callable(m) or isinstance(m, np.ndarray) and m.dtype != object:
        return False
    try:
        return all(isinstance(x, (Integral, Rational)) and not isinstance(x, bool) for row in m for x in row)
    except TypeError:
        return False


def exact_symplectic_residual(matrix: Sequence[Sequence[Integral | Fraction]]) -> Fraction:
    """max |(M^T J M - J)_{ij}| in rational arithmetic."""
    M = [[Fraction(x) for x in row] for row in matrix]
    d = len(M)
    if any(len(row) != d for row in M) or d % 2:
        raise DimensionMismatch(f"expected an even square matrix, got {d}x{len(M[0]) if M else 0}")
    n = d // 2

    def J(i, j):
        if j == i + n:
            return 1
        if i == j + n:
            return -1
        return 0

    JM = [[sum(J(i, k) * M[k][j] for k in range(d)) for j in range(d)] for i in range(d)]
    worst = Fraction(0)
    for i in range(d):
        for j in range(d):
            v = sum(M[k][i] * JM[k][j] for k in range(d)) - J(i, j)
            worst = max(worst, abs(v))
    return worst


def is_symplectomorphism(jacobian, samples: Sequence[Sequence[float]] | None = None, tol: float = 1e-12) -> SymplecticReport:
    """Check ``D^T J D = J``.

    ``jacobian`` is either a callable giving the Jacobian at a point, or a
    constant matrix.  Integer/rational matrices are checked exactly.
    """
    if _is_exact_matrix(jacobian):
        err = exact_symplectic_residual(jacobian)
        return SymplecticReport(float(err), tol, True, 1)
    if callable(jacobian):
        if not samples:
            raise ValueError("a callable Jacobian needs sample points")
        mats = [np.asarray(jacobian(np.asarray(z, dtype=float)), dtype=float) for z in samples]
    else:
        mats = [np.asarray(jacobian, dtype=float)]
    worst = 0.0
    for D in mats:
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] % 2:
            raise DimensionMismatch(f"Jacobian of shape {D.shape} is not even and square")
        J = poisson_matrix(D.shape[0] // 2)
        worst = max(worst, float(np.max(np.abs(D.T @ J @ D - J))))
    return SymplecticReport(worst, tol, False, len(mats))
