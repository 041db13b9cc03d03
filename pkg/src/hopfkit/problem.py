"""Problem definitions: the linear operator, the nonlinearity, and residuals.

A `ProblemDef` bundles the sparse linear operator ``A`` with closed-form
callables for the nonlinearity ``h`` and its derivatives, together with the
admissible parameter window and the trust radius on which ``h`` is defined.
Residuals of the steady and period-rescaled problems, cached resolvent
solves ``(i*n - A)^{-1}``, and a finite-difference validation of the
supplied derivatives all live here.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .trajectory import PeriodicTrajectory, StateVector, trajectory_from_samples

__all__ = [
    "ProblemDef",
    "ScaledParams",
    "DomainError",
    "SingularOperatorError",
    "ResonanceError",
    "ConvergenceError",
    "DerivativeReport",
    "linearization_matrix",
]

#: Condition-number ceiling beyond which a resolvent factorization is
#: treated as singular.
COND_GUARD = 1e12


class DomainError(ValueError):
    """Raised when an evaluation leaves the declared domain of ``h``."""


class SingularOperatorError(RuntimeError):
    """Raised when a required factorization does not exist."""


class ResonanceError(RuntimeError):
    """Raised when ``i*n - A`` is numerically singular.

    On a bifurcation problem this is expected for ``n = +-1``; those modes
    must be handled through the spectral-projection path instead of a
    direct solve.
    """


class ConvergenceError(RuntimeError):
    """An iterative method ran out of iterations; carries the last defect."""


class ScaledParams(NamedTuple):
    """The two scalar unknowns: parameter ``lam`` and period stretch ``sigma``.

    The trajectory equations are posed at rescaled period ``2*pi``; the
    physical period is ``2*pi*(sigma + 1)``, so ``sigma > -1`` always.
    """

    lam: float
    sigma: float = 0.0


def _as_flat(w):
    return w.data if isinstance(w, StateVector) else np.asarray(w, dtype=float)


@dataclass(frozen=True)
class ProblemDef:
    """A two-field evolution problem ``u_t = A u + h(lam, u)``.

    Parameters
    ----------
    A : scipy.sparse matrix, shape (dim, dim)
        The (invertible) linear part on the flattened state.
    apply_h : callable ``(lam, w) -> array``
        Nonlinearity evaluated pointwise in time; ``w`` has shape
        ``(..., dim)`` and the call must vectorise over leading axes.
    apply_h_u : callable ``(lam, w, v) -> array``
        Directional derivative ``h_u(lam, w) v``.
    apply_h_lambda : callable ``(lam, w) -> array``
        Parameter derivative ``h_lam(lam, w)``.
    apply_h_lambda_u : callable ``(lam, w, v) -> array``
        Mixed derivative ``h_{lam u}(lam, w) v``.
    apply_h_uu : callable ``(lam, w, v1, v2) -> array``
        Second derivative ``h_uu(lam, w)[v1, v2]`` (symmetric in v1, v2).
    dx : float
        Spatial grid spacing.
    L : float
        Half-width of the spatial interval (metadata).
    lambda_window : (float, float)
        Open interval of admissible parameters; must contain 0.
    trust_radius : float
        Evaluations with ``sup|u| >= trust_radius`` are rejected.
    h_stencil : int
        Spatial locality of ``h``: the derivative at grid point ``j``
        depends on points within ``|j' - j| <= h_stencil``.  0 for
        pointwise nonlinearities; used to probe Jacobians efficiently.
    name : str
        Human-readable tag used in reports.
    """

    A: sp.spmatrix
    apply_h: Callable
    apply_h_u: Callable
    apply_h_lambda: Callable
    apply_h_lambda_u: Callable
    apply_h_uu: Callable
    dx: float
    L: float
    lambda_window: Tuple[float, float] = (-1.0, 1.0)
    trust_radius: float = np.inf
    h_stencil: int = 0
    name: str = "problem"
    _caches: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        a = sp.csc_matrix(self.A)
        if a.shape[0] != a.shape[1] or a.shape[0] % 2 != 0:
            raise ValueError("A must be square with even dimension")
        lo, hi = self.lambda_window
        if not lo < 0.0 < hi:
            raise ValueError("lambda window must be an open interval containing 0")
        if not self.trust_radius > 0:
            raise ValueError("trust radius must be positive")
        object.__setattr__(self, "A", a)
        self._caches["lock"] = threading.Lock()
        self._caches["lu"] = {}

    # -- shape helpers -------------------------------------------------------

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def nx(self):
        return self.dim // 2

    def state(self, data):
        """Wrap a flat array as a `StateVector` on this problem's grid."""
        return StateVector(data, self.dx)

    # -- domain checks ---------------------------------------------------------

    def check_lambda(self, lam):
        lo, hi = self.lambda_window
        if not lo < lam < hi:
            raise DomainError(
                f"lambda = {lam:g} outside admissible window ({lo:g}, {hi:g})"
            )

    def check_trust(self, values):
        if not np.all(np.isfinite(values)):
            raise DomainError("state contains non-finite values")
        peak = float(np.abs(values).max()) if np.size(values) else 0.0
        if peak >= self.trust_radius:
            raise DomainError(
                f"sup|u| = {peak:g} exceeds trust radius {self.trust_radius:g}"
            )

    # -- linear part ------------------------------------------------------------

    def apply_A(self, w):
        """``A w`` for a flat array, batch of rows, or `StateVector`."""
        if isinstance(w, StateVector):
            return self.state(self.A @ w.data)
        arr = np.asarray(w)
        if arr.ndim == 1:
            return self.A @ arr
        return (self.A @ arr.T).T

    def _lu(self, key, matrix):
        """Factorise once per key; thread-safe; guard against singularity."""
        cache = self._caches["lu"]
        lu = cache.get(key)
        if lu is not None:
            return lu
        with self._caches["lock"]:
            lu = cache.get(key)
            if lu is not None:
                return lu
            try:
                lu = spla.splu(sp.csc_matrix(matrix))
            except RuntimeError as exc:
                if key[0] == "resolvent":
                    raise ResonanceError(
                        f"i*{key[1]} - A is singular; mode {key[1]} must go "
                        "through the spectral-projection path, not a direct "
                        "solve"
                    ) from exc
                raise SingularOperatorError(
                    f"factorization of {key} failed: {exc}"
                ) from exc
            norm_fwd = spla.onenormest(matrix)
            inv_op = spla.LinearOperator(
                matrix.shape, matvec=lu.solve,
                rmatvec=lambda b: lu.solve(b, trans="H"),
                dtype=matrix.dtype,
            )
            cond = norm_fwd * spla.onenormest(inv_op)
            if not np.isfinite(cond) or cond > COND_GUARD:
                if key[0] == "resolvent":
                    raise ResonanceError(
                        f"i*{key[1]} - A is numerically singular "
                        f"(cond ~ {cond:.1e}); mode {key[1]} must go through "
                        "the spectral-projection path, not a direct solve"
                    )
                raise SingularOperatorError(
                    f"operator {key} is numerically singular (cond ~ {cond:.1e})"
                )
            cache[key] = lu
            return lu

    def solve_A(self, rhs):
        """Solve ``A w = rhs``."""
        if isinstance(rhs, StateVector):
            return self.state(self.solve_A(rhs.data))
        lu = self._lu(("A",), self.A)
        return lu.solve(np.asarray(rhs, dtype=float))

    def solve_resolvent(self, n, rhs):
        """Solve ``(i*n - A) w = rhs`` for integer temporal mode ``n``.

        Raises `ResonanceError` when the shifted operator is numerically
        singular, which on a bifurcation problem happens at ``n = +-1``.
        """
        n = int(n)
        rhs = np.asarray(rhs, dtype=complex)
        if n == 0:
            return -self.solve_A(rhs.real) - 1j * self.solve_A(rhs.imag)
        shifted = sp.identity(self.dim, format="csc", dtype=complex) * (1j * n) - self.A
        lu = self._lu(("resolvent", n), shifted)
        return lu.solve(rhs)

    # -- residuals ---------------------------------------------------------------

    def residual_f(self, lam, u):
        """Steady residual ``f(lam, u) = A u + h(lam, u)``."""
        self.check_lambda(lam)
        w = _as_flat(u)
        self.check_trust(w)
        out = self.A @ w + self.apply_h(lam, w)
        return self.state(out) if isinstance(u, StateVector) else out

    def residual_g(self, params, u):
        """Period-rescaled residual ``g = u_t - (sigma+1) f(lam, u)``.

        ``u`` is a `PeriodicTrajectory`; the nonlinearity is evaluated at
        the collocation samples and transformed back, so products alias
        into the guard mode but retained modes are those of the sampled
        composition.
        """
        lam, sigma = params
        self.check_lambda(lam)
        if not sigma > -1.0:
            raise DomainError(f"sigma = {sigma:g} must exceed -1")
        vals = u.sample_values()
        self.check_trust(vals)
        rhs_samples = self.apply_h(lam, vals)
        nonlinear = trajectory_from_samples(rhs_samples, u.dx)
        linear = u.with_coeffs((self.A @ u.coeffs.T).T)
        return u.time_derivative() - (sigma + 1.0) * (linear + nonlinear)

    def linearised_g(self, params, u, v):
        """Directional derivative ``g_u(params, u) v`` for trajectories."""
        lam, sigma = params
        self.check_lambda(lam)
        uv = u.sample_values()
        self.check_trust(uv)
        dh = self.apply_h_u(lam, uv, v.sample_values())
        nonlinear = trajectory_from_samples(dh, v.dx)
        linear = v.with_coeffs((self.A @ v.coeffs.T).T)
        return v.time_derivative() - (sigma + 1.0) * (linear + nonlinear)

    # -- derivative validation ------------------------------------------------------

    def check_derivatives(self, samples=5, step=1e-5, scale=0.01, seed=0):
        """Compare the supplied derivative callables with finite differences.

        Draws ``samples`` random states of sup-norm about ``scale`` and
        random admissible parameters, and central-differences ``apply_h``
        to check ``apply_h_u``, ``apply_h_lambda_u`` and ``apply_h_uu``.

        Returns
        -------
        DerivativeReport
            Maximum relative errors; `DerivativeReport.ok` applies a
            tolerance appropriate for central differences.
        """
        if step <= 0:
            raise ValueError("step must be positive")
        rng = np.random.default_rng(seed)
        lo, hi = self.lambda_window
        span = min(hi, -lo, 1.0)
        err_u = err_lu = err_uu = 0.0
        for _ in range(samples):
            lam = float(rng.uniform(-0.4, 0.4) * span)
            u = rng.normal(size=self.dim) * scale
            v = rng.normal(size=self.dim) * scale
            w = rng.normal(size=self.dim) * scale
            ref = max(scale, float(np.abs(self.apply_h(lam, u)).max()))

            fd = (self.apply_h(lam, u + step * v)
                  - self.apply_h(lam, u - step * v)) / (2 * step)
            err_u = max(err_u, _rel(fd, self.apply_h_u(lam, u, v), ref))

            dl = step * span
            fd = (self.apply_h_u(lam + dl, u, v)
                  - self.apply_h_u(lam - dl, u, v)) / (2 * dl)
            err_lu = max(err_lu, _rel(fd, self.apply_h_lambda_u(lam, u, v), ref))

            fd = (self.apply_h_u(lam, u + step * w, v)
                  - self.apply_h_u(lam, u - step * w, v)) / (2 * step)
            err_uu = max(err_uu, _rel(fd, self.apply_h_uu(lam, u, v, w), ref))

            fd = (self.apply_h(lam + dl, u) - self.apply_h(lam - dl, u)) / (2 * dl)
            err_lu = max(err_lu, _rel(fd, self.apply_h_lambda(lam, u), ref))
        return DerivativeReport(err_u, err_lu, err_uu, step)


def _rel(approx, exact, ref):
    return float(np.abs(approx - exact).max() / ref)


def linearization_matrix(problem, lam, u0=None):
    """The sparse matrix of ``v -> h_u(lam, u0, v)``.

    Recovers the matrix from the black-box directional derivative with
    ``2 * (2*h_stencil + 1)`` probes: unit vectors placed every
    ``2*h_stencil + 1`` grid points within one field share no stencil
    support, so their responses can be unscrambled column by column.

    Parameters
    ----------
    problem : ProblemDef
    lam : float
        Parameter at which to linearise.
    u0 : array, optional
        Base state (defaults to 0, the equilibrium).

    Returns
    -------
    scipy.sparse.csr_matrix, shape (dim, dim)
    """
    nx = problem.nx
    dim = problem.dim
    width = problem.h_stencil
    stride = 2 * width + 1
    if u0 is None:
        u0 = np.zeros(dim)
    rows, cols, vals = [], [], []
    positions = np.arange(nx)
    for fld in range(2):
        for colour in range(min(stride, nx)):
            probed = np.arange(colour, nx, stride)
            probe = np.zeros(dim)
            probe[fld * nx + probed] = 1.0
            response = np.asarray(problem.apply_h_u(lam, u0, probe))
            # Each response entry at grid position j belongs to the unique
            # probed column within the stencil radius.
            owner_idx = np.clip(
                np.round((positions - colour) / stride).astype(int),
                0, probed.size - 1,
            )
            owner = probed[owner_idx]
            valid = np.abs(positions - owner) <= width
            for rf in range(2):
                block = response[rf * nx : (rf + 1) * nx]
                hit = valid & (block != 0.0)
                rows.append(rf * nx + positions[hit])
                cols.append(fld * nx + owner[hit])
                vals.append(block[hit])
    rows = np.concatenate(rows) if rows else np.empty(0, dtype=int)
    cols = np.concatenate(cols) if cols else np.empty(0, dtype=int)
    vals = np.concatenate(vals) if vals else np.empty(0)
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))


class DerivativeReport(NamedTuple):
    """Outcome of `ProblemDef.check_derivatives` (max relative errors)."""

    err_h_u: float
    err_h_lambda_u: float
    err_h_uu: float
    step: float

    @property
    def worst(self):
        return max(self.err_h_u, self.err_h_lambda_u, self.err_h_uu)

    def ok(self, tol=1e-6):
        return self.worst <= tol

    def __str__(self):
        return (
            f"derivative check (step {self.step:g}): "
            f"h_u {self.err_h_u:.2e}, h_lambda_u {self.err_h_lambda_u:.2e}, "
            f"h_uu {self.err_h_uu:.2e}"
        )
