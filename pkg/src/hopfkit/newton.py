"""Banded linear algebra for space-time Newton systems.

The unknown of the periodic problems is a trajectory: per spatial point,
two fields, each with ``R = 2*n_t + 1`` real Fourier unknowns
(``a_0, Re a_1, Im a_1, ..., Re a_nt, Im a_nt``).  `TrajectoryLayout`
flattens trajectories point-major -- all unknowns of one grid point stay
contiguous -- so every operator with finite spatial stencil becomes a
*banded* real matrix: time differentiation and multiplication by a
time-periodic coefficient act within a point's block, the spatial operator
couples neighbouring blocks.

`assemble_jacobian_band` builds the band for ``v -> v_t - (sigma+1)(A v +
h_u(lam, u) v)`` exactly (including the collocation aliasing of the
pseudo-spectral product, so Newton gets the true derivative of the
discrete residual), probing the nonlinearity with one constant-in-time
unit comb per field and stencil colour.

`BorderedSystem` solves the band plus two extra columns (parameter
derivatives) and two extra rows (the phase functionals) by a Schur
complement on the 2x2 corner, with optional matrix-free iterative
refinement -- needed because the core band is *exactly singular* at a
solved branch point (time translation) while the bordered system is not.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg.lapack as lapack

from .trajectory import PeriodicTrajectory

__all__ = [
    "TrajectoryLayout",
    "coupling_blocks",
    "assemble_jacobian_band",
    "BandedMatrix",
    "BorderedSystem",
    "SingularBandError",
]


class SingularBandError(RuntimeError):
    """The banded factorization failed even after diagonal jitter."""


class TrajectoryLayout:
    """Index map between trajectory coefficients and a flat real vector.

    Flat index of (grid point ``j``, field ``f``, real part ``r``) is
    ``j * block + f * R + r`` with ``R = 2*n_t + 1`` and
    ``block = 2 * R``.
    """

    def __init__(self, n_t, nx, dx):
        self.n_t = int(n_t)
        self.nx = int(nx)
        self.dx = float(dx)
        self.r_per_field = 2 * self.n_t + 1
        self.block = 2 * self.r_per_field
        self.size = self.nx * self.block

    def flatten(self, coeffs):
        """Coefficients ``(n_t+1, 2*nx)`` (complex) to the flat real vector."""
        coeffs = np.asarray(coeffs)
        n_t, nx, r = self.n_t, self.nx, self.r_per_field
        out = np.empty((nx, 2, r))
        # per field f: columns of coeffs are [f*nx : (f+1)*nx]
        for f in range(2):
            cols = coeffs[:, f * nx : (f + 1) * nx]
            out[:, f, 0] = cols[0].real
            if n_t >= 1:
                out[:, f, 1::2] = cols[1:].real.T
                out[:, f, 2::2] = cols[1:].imag.T
        return out.reshape(self.size)

    def unflatten(self, y):
        """Inverse of `flatten`."""
        n_t, nx, r = self.n_t, self.nx, self.r_per_field
        arr = np.asarray(y).reshape(nx, 2, r)
        coeffs = np.zeros((n_t + 1, 2 * nx), dtype=complex)
        for f in range(2):
            coeffs[0, f * nx : (f + 1) * nx] = arr[:, f, 0]
            if n_t >= 1:
                coeffs[1:, f * nx : (f + 1) * nx] = (
                    arr[:, f, 1::2] + 1j * arr[:, f, 2::2]
                ).T
        return coeffs

    def flatten_trajectory(self, traj):
        return self.flatten(traj.coeffs)

    def to_trajectory(self, y):
        return PeriodicTrajectory(self.unflatten(y), self.dx)

    def functional_rows(self, weight):
        """The two phase-functional rows as (indices, values) pairs.

        ``l1 u = 2 * sum_c w_c * Re u_hat(1)_c * dx`` and
        ``l2 u = -2 * sum_c w_c * Im u_hat(1)_c * dx``; both touch only the
        first-harmonic slots.
        """
        if self.n_t < 1:
            raise ValueError("layout has no first harmonic")
        nx, r, block = self.nx, self.r_per_field, self.block
        w = np.asarray(weight, dtype=float)
        if w.size != 2 * nx:
            raise ValueError("weight length does not match the grid")
        points = np.arange(nx)
        idx_re = np.concatenate([points * block + f * r + 1 for f in range(2)])
        idx_im = idx_re + 1
        vals = np.concatenate([w[f * nx : (f + 1) * nx] for f in range(2)])
        vals = 2.0 * vals * self.dx
        return (idx_re, vals), (idx_im, -vals)


def coupling_blocks(samples, n_t):
    """Mode-coupling blocks of multiplication by sampled functions.

    Parameters
    ----------
    samples : array, shape (M, batch)
        Collocation samples (``M = 2*n_t + 2``) of one real coefficient
        function per batch column.
    n_t : int
        Temporal truncation.

    Returns
    -------
    array, shape (batch, R, R)
        Real matrices acting on the per-component mode-part vector; exact
        for the pseudo-spectral (sampled) product including its aliasing.
    """
    samples = np.asarray(samples, dtype=float)
    m_samp = samples.shape[0]
    if m_samp != 2 * n_t + 2:
        raise ValueError("expected 2*n_t + 2 collocation samples")
    spec = np.fft.fft(samples, axis=0) / m_samp  # (M, batch)
    batch = samples.shape[1]
    r = 2 * n_t + 1
    out = np.zeros((batch, r, r))

    def row_indices(n):
        return (0,) if n == 0 else (2 * n - 1, 2 * n)

    for n in range(n_t + 1):
        for m in range(n_t + 1):
            ca = spec[(n - m) % m_samp]
            if m > 0:
                ca = ca + spec[(n + m) % m_samp]
                cb = 1j * (spec[(n - m) % m_samp] - spec[(n + m) % m_samp])
            col_re = 0 if m == 0 else 2 * m - 1
            if n == 0:
                out[:, 0, col_re] += ca.real
                if m > 0:
                    out[:, 0, 2 * m] += cb.real
            else:
                out[:, 2 * n - 1, col_re] += ca.real
                out[:, 2 * n, col_re] += ca.imag
                if m > 0:
                    out[:, 2 * n - 1, 2 * m] += cb.real
                    out[:, 2 * n, 2 * m] += cb.imag
    return out


class BandedMatrix:
    """A real banded matrix in LAPACK general-band storage.

    ``ab[kl + ku + i - j, j]`` holds entry ``(i, j)``; rows
    ``0 .. kl - 1`` of ``ab`` are workspace for the factorization.
    """

    def __init__(self, size, kl, ku):
        self.size = size
        self.kl = kl
        self.ku = ku
        self.ab = np.zeros((2 * kl + ku + 1, size))

    def add_at(self, row_offset, cols, values):
        """Add ``values`` at entries ``(cols + row_offset, cols)``."""
        self.ab[self.kl + self.ku + row_offset, cols] += values

    def matvec(self, x):
        """Dense-equivalent product (exact; O(band * n))."""
        out = np.zeros(self.size)
        for off in range(-self.ku, self.kl + 1):
            row = self.ab[self.kl + self.ku + off]
            js = np.arange(max(0, -off), self.size - max(0, off))
            out[js + off] += row[js] * x[js]
        return out

    def rmatvec(self, x):
        """Product with the transpose (exact; O(band * n))."""
        out = np.zeros(self.size)
        for off in range(-self.ku, self.kl + 1):
            row = self.ab[self.kl + self.ku + off]
            js = np.arange(max(0, -off), self.size - max(0, off))
            out[js] += row[js] * x[js + off]
        return out


def assemble_jacobian_band(problem, params, u, layout):
    """Band of ``v -> v_t - (sigma+1)(A v + h_u(lam, u) v)`` in the layout.

    ``u`` is the base trajectory (use the zero trajectory to get the
    linearisation at the origin).  The result is the exact Jacobian of the
    discrete ``residual_g`` at ``u``.
    """
    lam, sigma = params
    factor = -(sigma + 1.0)
    n_t, nx, r, block = layout.n_t, layout.nx, layout.r_per_field, layout.block
    if u.n_t != n_t or u.nx != nx:
        raise ValueError("trajectory does not match the layout")
    width = max(1, problem.h_stencil)
    kl = ku = (width + 1) * block - 1
    band = BandedMatrix(layout.size, kl, ku)

    # Time derivative: per component, Re/Im pair of mode n couples as
    # d/dt (x + iy) e^{int} -> (-n y + i n x) e^{int}.
    comp_starts = (np.arange(nx)[:, None] * block
                   + np.array([0, r])[None, :]).ravel()
    for n in range(1, n_t + 1):
        cols_re = comp_starts + (2 * n - 1)
        band.add_at(+1, cols_re, np.full(cols_re.size, float(n)))   # row Im_n
        band.add_at(-1, cols_re + 1, np.full(cols_re.size, -float(n)))  # row Re_n

    # Linear operator A: mode-diagonal, entry A[c, c'] couples the same
    # mode part of components c and c'.
    acoo = problem.A.tocoo()
    fr, jr = np.divmod(acoo.row, nx)
    fc, jc = np.divmod(acoo.col, nx)
    off = jr - jc
    if off.size and np.abs(off).max() > width:
        raise ValueError(
            "spatial stencil of A exceeds the bandwidth implied by h_stencil"
        )
    for o in range(-width, width + 1):
        for f_row in range(2):
            for f_col in range(2):
                sel = (off == o) & (fr == f_row) & (fc == f_col)
                if not np.any(sel):
                    continue
                cols_pt = jc[sel]
                vals = factor * acoo.data[sel]
                row_offset = o * block + (f_row - f_col) * r
                for part in range(r):
                    band.add_at(
                        row_offset,
                        cols_pt * block + f_col * r + part,
                        vals,
                    )

    # Nonlinear coupling: probe h_u with constant-in-time unit combs, one
    # per (field, stencil colour); the response samples at each output
    # component are the time-samples of the coefficient function tying it
    # to the probed column.
    stride = 2 * problem.h_stencil + 1
    u_samples = u.sample_values()
    m_samp = u.n_samples
    positions = np.arange(nx)
    for f_col in range(2):
        for colour in range(min(stride, nx)):
            probe = np.zeros(2 * nx)
            probed = np.arange(colour, nx, stride)
            probe[f_col * nx + probed] = 1.0
            resp = problem.apply_h_u(lam, u_samples, np.broadcast_to(
                probe, (m_samp, 2 * nx)))
            owner_idx = np.clip(
                np.round((positions - colour) / stride).astype(int),
                0, probed.size - 1,
            )
            owner = probed[owner_idx]
            valid = np.abs(positions - owner) <= problem.h_stencil
            for o in range(-problem.h_stencil, problem.h_stencil + 1):
                here = valid & (positions - owner == o)
                if not np.any(here):
                    continue
                pts = positions[here]
                own = owner[here]
                for f_row in range(2):
                    cols_samp = resp[:, f_row * nx + pts]
                    if not np.any(cols_samp):
                        continue
                    blocks = coupling_blocks(cols_samp, n_t) * factor
                    row_offset_base = o * block + (f_row - f_col) * r
                    col_base = own * block + f_col * r
                    for rr in range(r):
                        for cc in range(r):
                            vals = blocks[:, rr, cc]
                            if not np.any(vals):
                                continue
                            band.add_at(
                                row_offset_base + rr - cc,
                                col_base + cc,
                                vals,
                            )
    return band


class BorderedSystem:
    """A banded core with two extra columns, rows, and a 2x2 corner.

        [ J    C ] [ y ]   [ r_core   ]
        [ B^T  D ] [ p ] = [ r_border ]

    ``J`` is the banded core, ``C`` the (size, 2) parameter columns,
    ``B`` the two functional rows, ``D`` the 2x2 corner.  Solved by LU of
    the band plus a Schur complement on the corner.  The core may be
    numerically singular (time-translation symmetry at a converged branch
    point); the bordered system is still regular, and `solve` repairs the
    lost accuracy with matrix-free refinement when an exact ``matvec`` of
    the full system is supplied.
    """

    def __init__(self, band, columns, rows, corner=None):
        self.band = band
        self.columns = np.asarray(columns, dtype=float)
        if self.columns.shape != (band.size, 2):
            raise ValueError("expected two border columns of core size")
        self.rows = rows  # pair of (indices, values)
        self.corner = np.zeros((2, 2)) if corner is None else np.asarray(corner)
        self._factor = None
        self._schur = None
        self._schur_t = None

    # -- low-level pieces ---------------------------------------------------

    def _factorize(self):
        kl, ku = self.band.kl, self.band.ku
        ab = np.asfortranarray(self.band.ab)
        lub, ipiv, info = lapack.dgbtrf(ab, kl, ku)
        if info < 0:
            raise SingularBandError(f"dgbtrf: illegal argument {-info}")
        if info > 0:
            # Exactly singular pivot: retry with a tiny diagonal jitter;
            # refinement against the exact operator absorbs the perturbation.
            scale = np.abs(self.band.ab[kl + ku]).max() or 1.0
            ab = np.asfortranarray(self.band.ab.copy())
            ab[kl + ku] += 1e-13 * scale
            lub, ipiv, info = lapack.dgbtrf(ab, kl, ku)
            if info != 0:
                raise SingularBandError(
                    f"banded core is singular even with jitter (info={info})"
                )
        self._factor = (lub, ipiv)

    def _core_solve(self, b, transpose=False):
        lub, ipiv = self._factor
        x, info = lapack.dgbtrs(
            lub, self.band.kl, self.band.ku, b, ipiv, trans=1 if transpose else 0
        )
        if info != 0:
            raise SingularBandError(f"dgbtrs failed with info={info}")
        return x

    def _row_dot(self, y):
        (i1, v1), (i2, v2) = self.rows
        return np.array([v1 @ y[i1], v2 @ y[i2]])

    def _rows_dense(self):
        dense = np.zeros((self.band.size, 2))
        for k, (idx, vals) in enumerate(self.rows):
            np.add.at(dense[:, k], idx, vals)
        return dense

    def apply(self, y, p):
        """Exact product of the bordered matrix built from the band."""
        core = self.band.matvec(y) + self.columns @ p
        border = self._row_dot(y) + self.corner @ p
        return core, border

    def apply_transpose(self, y, p):
        """Exact product of the transposed bordered matrix."""
        core = self.band.rmatvec(y) + self._rows_dense() @ p
        border = self.columns.T @ y + self.corner.T @ p
        return core, border

    # -- public solve ----------------------------------------------------------

    def solve(self, rhs_core, rhs_border, matvec=None, refine=2):
        """Solve the bordered system.

        Parameters
        ----------
        rhs_core, rhs_border : arrays
            Right-hand side, core part and 2-vector.
        matvec : callable ``(y, p) -> (core, border)``, optional
            Exact application of the full system used for iterative
            refinement; defaults to the band-based `apply` (use the
            pseudo-spectral operator for the Newton systems -- the band is
            its exact matrix, but refinement through the singular core
            needs the cleanest residuals available).
        refine : int
            Refinement rounds.

        Returns
        -------
        (y, p) : solution core part and 2-vector.
        """
        if self._factor is None:
            self._factorize()
        if matvec is None:
            matvec = self.apply

        if self._schur is None:
            xb = np.column_stack(
                [self._core_solve(self.columns[:, 0]),
                 self._core_solve(self.columns[:, 1])]
            )
            schur = self.corner - np.vstack(
                [self._row_dot(xb[:, 0]), self._row_dot(xb[:, 1])]
            ).T
            if not np.all(np.isfinite(schur)):
                raise SingularBandError(
                    "bordered reduction produced a non-finite Schur complement"
                )
            self._schur = (xb, schur)
        xb, schur = self._schur

        def direct(rc, rb):
            ycore = self._core_solve(rc)
            p = np.linalg.solve(schur, rb - self._row_dot(ycore))
            return ycore - xb @ p, p

        y, p = direct(rhs_core, rhs_border)
        for _ in range(refine):
            ac, ab_ = matvec(y, p)
            dy, dp = direct(rhs_core - ac, rhs_border - ab_)
            y = y + dy
            p = p + dp
        return y, p

    def solve_transpose(self, rhs_core, rhs_border, matvec=None, refine=2):
        """Solve the transposed bordered system (same factorization)."""
        if self._factor is None:
            self._factorize()
        if matvec is None:
            matvec = self.apply_transpose

        if self._schur_t is None:
            rows_dense = self._rows_dense()
            xbt = np.column_stack(
                [self._core_solve(rows_dense[:, 0], transpose=True),
                 self._core_solve(rows_dense[:, 1], transpose=True)]
            )
            schur_t = self.corner.T - self.columns.T @ xbt
            if not np.all(np.isfinite(schur_t)):
                raise SingularBandError(
                    "bordered reduction produced a non-finite Schur complement"
                )
            self._schur_t = (xbt, schur_t)
        xbt, schur_t = self._schur_t

        def direct(rc, rb):
            ycore = self._core_solve(rc, transpose=True)
            p = np.linalg.solve(schur_t, rb - self.columns.T @ ycore)
            return ycore - xbt @ p, p

        y, p = direct(rhs_core, rhs_border)
        for _ in range(refine):
            ac, ab_ = matvec(y, p)
            dy, dp = direct(rhs_core - ac, rhs_border - ab_)
            y = y + dy
            p = p + dp
        return y, p
