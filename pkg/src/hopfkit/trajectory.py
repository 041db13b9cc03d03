"""Time-periodic trajectories stored as truncated Fourier series.

A trajectory ``u(t, x)`` with period ``2*pi`` is represented by its complex
Fourier coefficients ``u_hat(n)`` for ``n = 0 .. n_t``; negative modes are
implied by the reality condition ``u_hat(-n) = conj(u_hat(n))``.  Each
coefficient is a vector over the spatial grid (all fields concatenated), so
the coefficient array has shape ``(n_t + 1, dim)``.

Collocation in time uses ``M = 2*n_t + 2`` equispaced samples, which makes
the forward/inverse transforms (`numpy.fft.rfft` / `irfft`) exact inverses
on the retained modes and leaves one guard mode (index ``n_t + 1``) that is
discarded on analysis.
"""

from __future__ import annotations

import json
import numpy as np

__all__ = [
    "StateVector",
    "ComplexStateVector",
    "PeriodicTrajectory",
    "AmplitudeFunctional",
    "build_amplitude_functional",
    "single_harmonic",
    "zero_trajectory",
    "trajectory_from_samples",
]

_MODE0_IMAG_TOL = 1e-9


class StateVector:
    """A real vector on the spatial grid: both fields concatenated.

    Parameters
    ----------
    data : array_like
        Real values, length ``2 * nx`` (field ``u`` then field ``v``).
    dx : float
        Grid spacing, used by the inner product and norms.
    """

    __slots__ = ("data", "dx")

    def __init__(self, data, dx):
        arr = np.asarray(data, dtype=float).copy()
        if arr.ndim != 1 or arr.size % 2 != 0:
            raise ValueError("state vector must be 1-D with even length")
        arr.flags.writeable = False
        self.data = arr
        self.dx = float(dx)

    @property
    def nx(self):
        return self.data.size // 2

    @property
    def fields(self):
        """The two component fields as a pair of views ``(u, v)``."""
        n = self.nx
        return self.data[:n], self.data[n:]

    def dot(self, other):
        """Grid inner product ``sum(self * other) * dx``."""
        self._check_compatible(other)
        return float(self.data @ other.data) * self.dx

    def norm(self):
        return float(np.sqrt(self.data @ self.data * self.dx))

    def __add__(self, other):
        self._check_compatible(other)
        return StateVector(self.data + other.data, self.dx)

    def __sub__(self, other):
        self._check_compatible(other)
        return StateVector(self.data - other.data, self.dx)

    def __mul__(self, scalar):
        return StateVector(self.data * float(scalar), self.dx)

    __rmul__ = __mul__

    def __neg__(self):
        return StateVector(-self.data, self.dx)

    def _check_compatible(self, other):
        if not isinstance(other, StateVector):
            raise TypeError("expected a StateVector")
        if other.data.size != self.data.size or other.dx != self.dx:
            raise ValueError("state vectors live on different grids")

    def __repr__(self):
        return f"StateVector(nx={self.nx}, dx={self.dx:g}, norm={self.norm():.3e})"


class ComplexStateVector:
    """A complex vector on the spatial grid, e.g. an eigenvector.

    Carries the same grid metadata as `StateVector`.  The hermitian pairing
    ``pair(w)`` is linear in ``self`` and conjugate-linear in ``w``.
    """

    __slots__ = ("data", "dx")

    def __init__(self, data, dx):
        arr = np.asarray(data, dtype=complex).copy()
        if arr.ndim != 1 or arr.size % 2 != 0:
            raise ValueError("state vector must be 1-D with even length")
        arr.flags.writeable = False
        self.data = arr
        self.dx = float(dx)

    @property
    def nx(self):
        return self.data.size // 2

    @property
    def real(self):
        return StateVector(self.data.real, self.dx)

    @property
    def imag(self):
        return StateVector(self.data.imag, self.dx)

    def pair(self, other):
        """Hermitian pairing ``sum(self * conj(other)) * dx``."""
        if self.data.size != other.data.size:
            raise ValueError("state vectors live on different grids")
        return complex(self.data @ np.conj(other.data)) * self.dx

    def norm(self):
        return float(np.sqrt((self.data @ np.conj(self.data)).real * self.dx))

    def __mul__(self, scalar):
        return ComplexStateVector(self.data * complex(scalar), self.dx)

    __rmul__ = __mul__

    def __add__(self, other):
        return ComplexStateVector(self.data + other.data, self.dx)

    def __sub__(self, other):
        return ComplexStateVector(self.data - other.data, self.dx)

    def __repr__(self):
        return f"ComplexStateVector(nx={self.nx}, dx={self.dx:g}, norm={self.norm():.3e})"


class PeriodicTrajectory:
    """A ``2*pi``-periodic trajectory truncated at temporal mode ``n_t``.

    Parameters
    ----------
    coeffs : array_like, shape (n_t + 1, dim)
        Complex Fourier coefficients for modes ``0 .. n_t``.  Row 0 must be
        (numerically) real; its imaginary part is discarded after a sanity
        check, so the reality condition holds exactly.
    dx : float
        Spatial grid spacing.

    Notes
    -----
    Instances are immutable; arithmetic returns new trajectories.  ``dim``
    is the full concatenated state dimension (``2 * nx`` for two fields).
    """

    __slots__ = ("coeffs", "dx")

    def __init__(self, coeffs, dx):
        arr = np.asarray(coeffs, dtype=complex).copy()
        if arr.ndim != 2:
            raise ValueError("coefficient array must have shape (n_t + 1, dim)")
        if arr.shape[1] % 2 != 0:
            raise ValueError("state dimension must be even (two fields)")
        scale = max(1.0, float(np.abs(arr).max()))
        worst = float(np.abs(arr[0].imag).max()) if arr.size else 0.0
        if worst > _MODE0_IMAG_TOL * scale:
            raise ValueError(
                f"mode-0 coefficient has imaginary part {worst:.2e}; "
                "trajectory would not be real-valued"
            )
        arr[0] = arr[0].real
        arr.flags.writeable = False
        self.coeffs = arr
        self.dx = float(dx)

    # -- basic shape info -------------------------------------------------

    @property
    def n_t(self):
        return self.coeffs.shape[0] - 1

    @property
    def dim(self):
        return self.coeffs.shape[1]

    @property
    def nx(self):
        return self.dim // 2

    @property
    def n_samples(self):
        """Number of collocation points in time, ``2 * n_t + 2``."""
        return 2 * self.n_t + 2

    # -- construction helpers ---------------------------------------------

    def with_coeffs(self, coeffs):
        """A trajectory on the same grid with different coefficients."""
        return PeriodicTrajectory(coeffs, self.dx)

    # -- evaluation ---------------------------------------------------------

    def fourier_coeff(self, n):
        """Coefficient of ``exp(i*n*t)`` for ``-n_t <= n <= n_t``."""
        if abs(n) > self.n_t:
            raise ValueError(f"mode {n} outside retained range |n| <= {self.n_t}")
        if n >= 0:
            return self.coeffs[n].copy()
        return np.conj(self.coeffs[-n])

    def sample_values(self):
        """Values at the ``M = 2*n_t + 2`` collocation times, shape (M, dim).

        The samples are real; ``trajectory_from_samples`` inverts this
        exactly (the guard mode of the rfft is dropped).
        """
        m = self.n_samples
        spec = np.zeros((m // 2 + 1, self.dim), dtype=complex)
        spec[: self.n_t + 1] = self.coeffs * m
        return np.fft.irfft(spec, n=m, axis=0)

    def sample_times(self):
        m = self.n_samples
        return 2.0 * np.pi * np.arange(m) / m

    def at_time(self, t):
        """Evaluate the series at an arbitrary time, as a `StateVector`."""
        phases = np.exp(1j * float(t) * np.arange(self.n_t + 1))
        vals = phases @ self.coeffs
        vals = 2.0 * vals - self.coeffs[0]  # n>=1 modes count twice (conjugates)
        return StateVector(vals.real, self.dx)

    # -- calculus and symmetries -------------------------------------------

    def time_derivative(self):
        """d/dt of the trajectory (mode ``n`` multiplied by ``i*n``)."""
        factors = 1j * np.arange(self.n_t + 1)
        return self.with_coeffs(self.coeffs * factors[:, None])

    def time_shift(self, theta):
        """The translated trajectory ``t -> u(t + theta, .)``."""
        phases = np.exp(1j * float(theta) * np.arange(self.n_t + 1))
        return self.with_coeffs(self.coeffs * phases[:, None])

    def pad_modes(self, n_t):
        """Embed into a finer temporal truncation (``n_t`` must not shrink)."""
        if n_t < self.n_t:
            raise ValueError("pad_modes cannot drop retained modes")
        out = np.zeros((n_t + 1, self.dim), dtype=complex)
        out[: self.n_t + 1] = self.coeffs
        return PeriodicTrajectory(out, self.dx)

    def split_subspaces(self):
        """Split into mean, fundamental and higher-harmonic parts.

        Returns
        -------
        mean : StateVector
            The time average (mode 0).
        fundamental : PeriodicTrajectory
            Modes ``+-1`` only.
        overtones : PeriodicTrajectory
            Everything with ``|n| >= 2``.
        """
        mean = StateVector(self.coeffs[0].real, self.dx)
        fund = np.zeros_like(self.coeffs)
        fund[1] = self.coeffs[1] if self.n_t >= 1 else 0.0
        rest = np.array(self.coeffs)
        rest[0] = 0.0
        if self.n_t >= 1:
            rest[1] = 0.0
        return mean, self.with_coeffs(fund), self.with_coeffs(rest)

    # -- norms ---------------------------------------------------------------

    def norm(self):
        """Space-time L2 norm over one period, normalised in time.

        Parseval: ``|u|^2 = sum_n |u_hat(n)|^2`` with weight 2 on ``n >= 1``,
        times ``dx`` for the spatial measure.
        """
        w = np.full(self.n_t + 1, 2.0)
        w[0] = 1.0
        power = np.einsum("n,nd->", w, (self.coeffs * np.conj(self.coeffs)).real)
        return float(np.sqrt(power * self.dx))

    def sup_norm(self):
        """Max absolute value over collocation samples (crude sup estimate)."""
        return float(np.abs(self.sample_values()).max())

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def _check_compatible(self, other):
        if not isinstance(other, PeriodicTrajectory):
            raise TypeError("expected a PeriodicTrajectory")
        if other.coeffs.shape != self.coeffs.shape or other.dx != self.dx:
            raise ValueError("trajectories live on different grids")

    def __repr__(self):
        return (
            f"PeriodicTrajectory(n_t={self.n_t}, nx={self.nx}, "
            f"dx={self.dx:g}, norm={self.norm():.3e})"
        )

    # -- serialization ---------------------------------------------------------

    def to_json_dict(self):
        """A JSON-ready dict (schema version 1)."""
        return {
            "schema": 1,
            "n_t": self.n_t,
            "dim": self.dim,
            "dx": self.dx,
            "modes": [
                {"n": int(n), "re": self.coeffs[n].real.tolist(),
                 "im": self.coeffs[n].imag.tolist()}
                for n in range(self.n_t + 1)
            ],
        }

    @classmethod
    def from_json_dict(cls, obj):
        if obj.get("schema") != 1:
            raise ValueError(f"unsupported trajectory schema: {obj.get('schema')!r}")
        n_t = int(obj["n_t"])
        dim = int(obj["dim"])
        coeffs = np.zeros((n_t + 1, dim), dtype=complex)
        for mode in obj["modes"]:
            n = int(mode["n"])
            if not 0 <= n <= n_t:
                raise ValueError(f"mode index {n} out of range")
            coeffs[n] = np.asarray(mode["re"], dtype=float) + 1j * np.asarray(
                mode["im"], dtype=float
            )
        return cls(coeffs, float(obj["dx"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def zero_trajectory(n_t, dim, dx):
    """The zero trajectory with the given truncation and grid."""
    return PeriodicTrajectory(np.zeros((n_t + 1, dim), dtype=complex), dx)


def trajectory_from_samples(samples, dx):
    """Build a trajectory from values at the standard collocation times.

    Parameters
    ----------
    samples : array_like, shape (M, dim)
        Real values at ``t_k = 2*pi*k/M``.  ``M`` must be even; the result
        keeps modes ``0 .. M/2 - 1`` (the rfft guard mode is dropped).
    dx : float
        Spatial grid spacing.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[0] % 2 != 0:
        raise ValueError("samples must have shape (M, dim) with M even")
    m = arr.shape[0]
    spec = np.fft.rfft(arr, axis=0) / m
    return PeriodicTrajectory(spec[: m // 2], dx)


def single_harmonic(psi, n_t, dx=None):
    """Embed a complex vector as the pure first harmonic ``Re(psi * e^{it})``.

    This is the linear map used to seed Newton iterations and to state the
    phase normalisation: the resulting trajectory has ``u_hat(1) = psi / 2``
    and no other content.

    Parameters
    ----------
    psi : ComplexStateVector or array_like
        Complex spatial profile.
    n_t : int
        Temporal truncation of the result.
    dx : float, optional
        Required when ``psi`` is a bare array.
    """
    if isinstance(psi, ComplexStateVector):
        data, dx = psi.data, psi.dx
    else:
        if dx is None:
            raise ValueError("dx is required when psi is a plain array")
        data = np.asarray(psi, dtype=complex)
    if n_t < 1:
        raise ValueError("need n_t >= 1 to hold the first harmonic")
    coeffs = np.zeros((n_t + 1, data.size), dtype=complex)
    coeffs[1] = data / 2.0
    return PeriodicTrajectory(coeffs, float(dx))


class AmplitudeFunctional:
    """The pair of phase-fixing functionals built from a real weight profile.

    ``l1(u) = <u(0, .), w>`` and ``l2(u) = l1`` applied a quarter period
    later -- concretely, with ``m(x) = <x, w> * dx`` on state vectors and
    ``m_c`` its complexification,

    ``l(u) = (2 * Re(m_c(u_hat(1))), -2 * Im(m_c(u_hat(1))))``

    which picks out the first temporal harmonic only.  Under a time
    advance by ``theta`` the pair rotates clockwise:
    ``l(u(. + theta)) = R(-theta) @ l(u)`` with ``R`` the usual rotation
    matrix, so the translation orbit of a trajectory traces a circle in the
    ``(l1, l2)`` plane.  The weight is normalised so that the designated
    first-harmonic profile scores ``(1, 0)``.

    Attributes
    ----------
    weight : StateVector
        The real profile defining ``m``.
    """

    __slots__ = ("weight",)

    def __init__(self, weight):
        if not isinstance(weight, StateVector):
            raise TypeError("weight must be a StateVector")
        self.weight = weight

    def m(self, x):
        """The scalar functional on real state vectors."""
        return x.dot(self.weight)

    def m_complex(self, z):
        """Complexification of `m` (linear, no conjugation)."""
        data = z.data if isinstance(z, ComplexStateVector) else np.asarray(z)
        return complex(data @ self.weight.data) * self.weight.dx

    def pair(self, traj):
        """Evaluate ``(l1, l2)`` on a trajectory; returns shape-(2,) array."""
        w1 = self.m_complex(traj.fourier_coeff(1))
        return np.array([2.0 * w1.real, -2.0 * w1.imag])

    def phase_angle(self, traj):
        """The angle ``theta`` with ``l(u) = |l(u)| * (cos, sin)(theta)``.

        Advancing the trajectory by this angle aligns its pair with the
        positive first axis: ``pair(traj.time_shift(phase_angle(traj)))``
        is ``(|l(u)|, 0)``.
        """
        p, q = self.pair(traj)
        return float(np.arctan2(q, p))

    def to_json_dict(self):
        return {
            "schema": 1,
            "dx": self.weight.dx,
            "weight": self.weight.data.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj):
        if obj.get("schema") != 1:
            raise ValueError(f"unsupported functional schema: {obj.get('schema')!r}")
        return cls(StateVector(obj["weight"], float(obj["dx"])))


def build_amplitude_functional(psi, adjoint=None):
    """Construct the phase functional adapted to an eigenvector.

    The weight ``w`` is chosen in ``span{Re(phi), Im(phi)}`` (``phi`` the
    adjoint eigenvector, or ``psi`` itself when none is supplied) so that
    the complexified functional satisfies ``m_c(psi) = 1``.  Consequently
    the first-harmonic embedding of ``psi`` scores ``l = (1, 0)``, and the
    same embedding of ``i * psi`` scores ``(0, -1)``.

    Parameters
    ----------
    psi : ComplexStateVector
        The eigenvector that defines the phase convention.
    adjoint : ComplexStateVector, optional
        Adjoint eigenvector; using it makes the functional annihilate the
        complementary spectral subspace, which sharpens the bordered
        systems downstream.

    Raises
    ------
    ValueError
        If the 2x2 normalisation system is numerically singular (the
        weight family cannot see ``psi``).
    """
    phi = adjoint if adjoint is not None else psi
    d1, d2 = phi.real, phi.imag
    a, b = psi.real, psi.imag
    # Solve for weight = c1*d1 + c2*d2 with m(a) = 1, m(b) = 0.
    gram = np.array([[a.dot(d1), a.dot(d2)], [b.dot(d1), b.dot(d2)]])
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise ValueError(
            "eigenvector and weight family are numerically degenerate "
            f"(cond = {cond:.2e}); cannot normalise the phase functional"
        )
    c = np.linalg.solve(gram, np.array([1.0, 0.0]))
    weight = c[0] * d1 + c[1] * d2
    func = AmplitudeFunctional(weight)
    check = func.m_complex(psi)
    if abs(check - 1.0) > 1e-10:
        raise ValueError(f"normalisation failed: m_c(psi) = {check:.3e}, wanted 1")
    return func
