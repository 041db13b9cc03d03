import numpy as np
import pytest
import scipy.linalg as sla

from conftest import rotation_block, synthetic_problem
from test_newton import dense_from_system
from hopfkit.problem import ConvergenceError, ScaledParams
from hopfkit.reaction_diffusion import (
    ExampleConfig,
    exact_branch_trajectory,
    make_problem,
    reference_eigenvector,
)
from hopfkit.solver import (
    NEWTON_TOL,
    BRANCH_CSV_COLUMNS,
    BifurcationJacobian,
    BranchPoint,
    BranchResult,
    check_branch_symmetry,
    continue_branch,
    decompose_crossing_term,
    extended_residual,
    fit_branch_curvature,
    initial_extended_state,
    solve_extended,
    verify_jacobian_nonsingular,
)
from hopfkit.spectral import SpectralDecomposition, build_projection, crossing_speed
from hopfkit.trajectory import (
    ComplexStateVector,
    PeriodicTrajectory,
    build_amplitude_functional,
    single_harmonic,
    trajectory_from_samples,
    zero_trajectory,
)


# ---------------------------------------------------------------------------
# shared setups: the coarse example (grid-exact branch), its standard-stencil
# sibling, and a four-dimensional rotation problem small enough for dense
# linear-algebra oracles


@pytest.fixture(scope="module")
def coarse_decomp(coarse_problem, coarse_cfg):
    return build_projection(
        coarse_problem, reference=reference_eigenvector(coarse_cfg)
    )


@pytest.fixture(scope="module")
def coarse_functional(coarse_decomp):
    return build_amplitude_functional(coarse_decomp.psi, coarse_decomp.phi_adj)


@pytest.fixture(scope="module")
def coarse_solution(coarse_problem, coarse_functional, coarse_decomp):
    return solve_extended(
        coarse_problem, coarse_functional,
        initial_extended_state(coarse_decomp.psi, n_t=8),
    )


@pytest.fixture(scope="module")
def coarse_branch(coarse_problem, coarse_functional, coarse_solution):
    return continue_branch(
        coarse_problem, coarse_functional, coarse_solution.u,
        alpha_max=0.5, steps=10,
    )


@pytest.fixture(scope="module")
def standard_setup(coarse_standard_problem, coarse_standard_cfg):
    decomp = build_projection(
        coarse_standard_problem,
        reference=reference_eigenvector(coarse_standard_cfg),
    )
    functional = build_amplitude_functional(decomp.psi, decomp.phi_adj)
    solution = solve_extended(
        coarse_standard_problem, functional,
        initial_extended_state(decomp.psi, n_t=8),
    )
    return decomp, functional, solution


@pytest.fixture(scope="module")
def spinner():
    """Rotation-block problem with h = 0.8 lam w, crossing speed exactly 0.8."""
    problem = synthetic_problem(rotation_block(), h="linear", c=0.8)
    decomp = build_projection(problem)
    functional = build_amplitude_functional(decomp.psi, decomp.phi_adj)
    solution = solve_extended(
        problem, functional, initial_extended_state(decomp.psi, n_t=4)
    )
    return problem, decomp, functional, solution


# ---------------------------------------------------------------------------
# the extended system and its residual


def test_extended_residual_at_solution(coarse_problem, coarse_functional,
                                       coarse_decomp):
    u_star = single_harmonic(coarse_decomp.psi, 8)
    pair, core = extended_residual(
        coarse_problem, coarse_functional, ScaledParams(0.0, 0.0), u_star
    )
    assert np.abs(pair).max() <= 1e-10
    assert core.norm() <= 1e-10


def test_extended_residual_amplitude_offsets(coarse_problem, coarse_functional,
                                             coarse_decomp):
    # The core is linear in u, the pair affine: doubling the exact state
    # moves only the first functional, zeroing it lands at (-1, 0).
    u_star = single_harmonic(coarse_decomp.psi, 8)
    pair, core = extended_residual(
        coarse_problem, coarse_functional, ScaledParams(0.0, 0.0),
        2.0 * u_star,
    )
    assert np.allclose(pair, [1.0, 0.0], atol=1e-10)
    assert core.norm() <= 1e-9

    zero = zero_trajectory(8, u_star.dim, u_star.dx)
    pair, core = extended_residual(
        coarse_problem, coarse_functional, ScaledParams(0.0, 0.0), zero
    )
    assert np.allclose(pair, [-1.0, 0.0], atol=1e-14)
    assert core.norm() == 0.0


def test_initial_extended_state(coarse_decomp):
    params, u = initial_extended_state(coarse_decomp.psi, n_t=6)
    assert params == ScaledParams(0.0, 0.0)
    assert u.n_t == 6
    assert np.allclose(
        u.fourier_coeff(1), coarse_decomp.psi.data / 2.0, atol=1e-14
    )


def test_solve_extended_from_eigen_seed(coarse_solution):
    assert coarse_solution.residual <= NEWTON_TOL
    assert coarse_solution.iterations <= 1
    assert abs(coarse_solution.params.lam) <= 1e-11
    assert abs(coarse_solution.params.sigma) <= 1e-11
    assert coarse_solution.notes == []


def test_solve_extended_isolated_solution(coarse_problem, coarse_functional,
                                          coarse_decomp, coarse_solution):
    # A badly scaled, noise-contaminated seed must fall back to the same
    # solution: the bordered system is nonsingular, so the solution is
    # locally unique and Newton's basin covers such perturbations.
    rng = np.random.default_rng(3)
    u_star = coarse_solution.u
    noise1 = coarse_decomp.complement(
        rng.normal(size=u_star.dim) + 1j * rng.normal(size=u_star.dim)
    )
    seed_traj = 1.3 * u_star + 0.1 * single_harmonic(noise1, 8, dx=u_star.dx)
    bump = np.zeros((9, u_star.dim), dtype=complex)
    bump[3] = 0.05 * (rng.normal(size=u_star.dim) + 1j * rng.normal(size=u_star.dim))
    seed_traj = seed_traj + PeriodicTrajectory(bump, u_star.dx)

    sol = solve_extended(
        coarse_problem, coarse_functional,
        (ScaledParams(0.05, -0.03), seed_traj),
    )
    assert abs(sol.params.lam) <= 1e-9
    assert abs(sol.params.sigma) <= 1e-9
    assert (sol.u - u_star).norm() <= 1e-8
    assert sol.iterations <= 8


def test_solve_extended_contracts_quadratically(coarse_problem,
                                                coarse_functional,
                                                coarse_solution):
    sol = solve_extended(
        coarse_problem, coarse_functional,
        (ScaledParams(0.2, 0.1), 1.5 * coarse_solution.u),
    )
    steps = sol.step_norms
    assert len(steps) >= 2
    assert all(b <= a * a for a, b in zip(steps, steps[1:]))
    assert sol.residual <= NEWTON_TOL
    assert sol.notes == []


def test_solve_extended_standard_stencil(standard_setup):
    # Without the grid-consistent potential the bifurcation point moves off
    # zero by the stencil error; the period correction stays exactly zero
    # because the rotational coupling is untouched by the discretisation.
    _, _, solution = standard_setup
    assert solution.iterations >= 1
    assert solution.residual <= NEWTON_TOL
    assert 1e-7 <= abs(solution.params.lam) <= 1e-3
    assert abs(solution.params.sigma) <= 1e-12


def test_solve_extended_offset_shrinks_quadratically_in_dx(standard_setup):
    _, _, coarse_sol = standard_setup
    cfg = ExampleConfig(L=20.0, dx=0.1, discretely_consistent_rho=False)
    problem = make_problem(cfg)
    decomp = build_projection(problem, reference=reference_eigenvector(cfg))
    functional = build_amplitude_functional(decomp.psi, decomp.phi_adj)
    fine_sol = solve_extended(
        problem, functional, initial_extended_state(decomp.psi, n_t=8)
    )
    ratio = coarse_sol.params.lam / fine_sol.params.lam
    assert 3.5 <= ratio <= 4.5


def test_solve_extended_respects_iteration_budget(coarse_standard_problem,
                                                  standard_setup):
    decomp, functional, _ = standard_setup
    with pytest.raises(ConvergenceError, match="did not reach"):
        solve_extended(
            coarse_standard_problem, functional,
            initial_extended_state(decomp.psi, n_t=8), max_iter=0,
        )


# ---------------------------------------------------------------------------
# the frozen Jacobian at the bifurcation point


def test_jacobian_columns_match_residual_derivatives(coarse_problem,
                                                     coarse_functional,
                                                     coarse_solution):
    # The core residual is exactly linear in each parameter, so a single
    # finite difference reproduces the frozen columns to rounding.
    u_star = coarse_solution.u
    jac = BifurcationJacobian(coarse_problem, coarse_functional, u_star)
    eps = 0.25

    _, core0 = extended_residual(
        coarse_problem, coarse_functional, ScaledParams(0.0, 0.0), u_star
    )
    _, core_l = extended_residual(
        coarse_problem, coarse_functional, ScaledParams(eps, 0.0), u_star
    )
    _, core_s = extended_residual(
        coarse_problem, coarse_functional, ScaledParams(0.0, eps), u_star
    )
    fd_lam = (1.0 / eps) * (core_l - core0)
    fd_sig = (1.0 / eps) * (core_s - core0)

    pair, image_lam = jac.apply(1.0, 0.0, zero_trajectory(
        u_star.n_t, u_star.dim, u_star.dx))
    assert np.abs(pair).max() == 0.0
    assert (image_lam - fd_lam).norm() <= 1e-11 * max(1.0, fd_lam.norm())

    _, image_sig = jac.apply(0.0, 1.0, zero_trajectory(
        u_star.n_t, u_star.dim, u_star.dx))
    assert (image_sig - fd_sig).norm() <= 1e-11 * max(1.0, fd_sig.norm())


def test_jacobian_apply_on_overtone(coarse_problem, coarse_functional,
                                    coarse_solution):
    # Higher harmonics feel only the linear flow: image = v_t - A v, and
    # the phase functionals cannot see them.
    rng = np.random.default_rng(5)
    u_star = coarse_solution.u
    coeffs = np.zeros((u_star.n_t + 1, u_star.dim), dtype=complex)
    coeffs[3] = rng.normal(size=u_star.dim) + 1j * rng.normal(size=u_star.dim)
    v = PeriodicTrajectory(coeffs, u_star.dx)

    jac = BifurcationJacobian(coarse_problem, coarse_functional, u_star)
    pair, image = jac.apply(0.0, 0.0, v)
    linear = v.with_coeffs((coarse_problem.A @ v.coeffs.T).T)
    oracle = v.time_derivative() - linear
    assert np.abs(pair).max() <= 1e-12 * v.norm()
    assert (image - oracle).norm() <= 1e-11 * oracle.norm()


def test_jacobian_bordered_matches_apply(spinner):
    problem, _, functional, solution = spinner
    jac = BifurcationJacobian(problem, functional, solution.u)
    system, layout = jac.bordered_system()
    dense = dense_from_system(system)

    rng = np.random.default_rng(6)
    flat = rng.normal(size=layout.size)
    dlam, dsig = 0.7, -1.1
    vec = np.concatenate([flat, [dlam, dsig]])

    pair, image = jac.apply(dlam, dsig, layout.to_trajectory(flat))
    oracle = dense @ vec
    assert np.allclose(oracle[:-2], layout.flatten_trajectory(image), atol=1e-12)
    assert np.allclose(oracle[-2:], pair, atol=1e-12)


def test_sigma_min_matches_dense_svd(spinner):
    problem, _, functional, solution = spinner
    jac = BifurcationJacobian(problem, functional, solution.u)
    system, _ = jac.bordered_system()
    svals = np.linalg.svd(dense_from_system(system), compute_uv=False)

    cert = verify_jacobian_nonsingular(
        problem, functional, solution.u, power_iterations=300
    )
    assert cert.nonsingular
    assert abs(cert.smallest_singular_value - svals[-1]) <= 1e-4 * svals[-1]


def test_jacobian_certificate_on_example(coarse_problem, coarse_functional,
                                         coarse_solution):
    cert = verify_jacobian_nonsingular(
        coarse_problem, coarse_functional, coarse_solution.u
    )
    assert cert.nonsingular and bool(cert)
    assert 0.1 <= cert.smallest_singular_value <= 0.5
    assert cert.leakage <= 1e-10
    assert "nonsingular" in cert.summary()


def test_certificate_flags_degenerate_crossing():
    # Parameter-independent linearisation: the lambda column vanishes and
    # the bordered operator is structurally singular.
    problem = synthetic_problem(rotation_block(), h="zero")
    decomp = build_projection(problem)
    functional = build_amplitude_functional(decomp.psi, decomp.phi_adj)
    solution = solve_extended(
        problem, functional, initial_extended_state(decomp.psi, n_t=4)
    )
    cert = verify_jacobian_nonsingular(problem, functional, solution.u)
    assert not cert.nonsingular and not bool(cert)
    assert cert.smallest_singular_value <= 1e-8
    assert "SINGULAR" in cert.summary()


def test_certificate_flags_internal_resonance():
    # A second eigenvalue pair at 2i puts a kernel in the overtone block
    # that no border can repair.
    a = sla.block_diag(
        rotation_block()[:2, :2], rotation_block(freq=2.0)[:2, :2]
    )
    problem = synthetic_problem(a, h="linear", c=0.8)
    decomp = build_projection(problem)
    functional = build_amplitude_functional(decomp.psi, decomp.phi_adj)
    solution = solve_extended(
        problem, functional, initial_extended_state(decomp.psi, n_t=4)
    )
    cert = verify_jacobian_nonsingular(problem, functional, solution.u)
    assert not cert.nonsingular
    assert cert.smallest_singular_value <= 1e-8


# ---------------------------------------------------------------------------
# crossing-term decomposition


def test_crossing_matches_analytic_value(coarse_problem, coarse_decomp):
    # <kappa^2 psi, phi> for the example: the crossing speed is 2/3 + i*0,
    # up to the (exponentially small) domain truncation.
    dec = decompose_crossing_term(coarse_problem, coarse_decomp, n_t=8)
    assert abs(dec.p - 2.0 / 3.0) <= 1e-6
    assert abs(dec.q) <= 1e-8
    assert dec.reconstruction_residual <= 1e-8
    assert dec.u_sharp.norm() >= 0.1  # genuinely off the critical span

    # the lifted part carries no kernel coordinate in its fundamental mode
    kernel_coord = complex(
        dec.u_sharp.fourier_coeff(1) @ np.conj(coarse_decomp.phi_adj.data)
    ) * coarse_problem.dx
    assert abs(kernel_coord) <= 1e-10


def test_crossing_cross_checks_eigenvalue_derivative(coarse_problem,
                                                     coarse_decomp):
    dec = decompose_crossing_term(coarse_problem, coarse_decomp, n_t=8)
    speed = crossing_speed(coarse_problem, decomp=coarse_decomp).value
    assert abs(dec.p - speed.real) <= 1e-3 * abs(speed.real)
    assert abs(dec.q - speed.imag) <= 1e-6


def test_crossing_on_standard_stencil(coarse_standard_problem,
                                      coarse_standard_cfg):
    decomp = build_projection(
        coarse_standard_problem,
        reference=reference_eigenvector(coarse_standard_cfg),
    )
    dec = decompose_crossing_term(coarse_standard_problem, decomp, n_t=8)
    assert abs(dec.p - 2.0 / 3.0) <= 1e-2
    assert dec.reconstruction_residual <= 1e-8


def test_crossing_pure_span(spinner):
    # h_lambda_u = 0.8 I sends psi to 0.8 psi: everything lands in the
    # span, the lifted remainder is empty.
    problem, decomp, _, _ = spinner
    dec = decompose_crossing_term(problem, decomp, n_t=4)
    assert abs(dec.p - 0.8) <= 1e-12
    assert abs(dec.q) <= 1e-12
    assert dec.u_sharp.norm() <= 1e-13
    assert dec.reconstruction_residual <= 1e-12


def test_crossing_zero_forcing():
    problem = synthetic_problem(rotation_block(), h="zero")
    decomp = build_projection(problem)
    dec = decompose_crossing_term(problem, decomp, n_t=4)
    assert dec.p == 0.0 and dec.q == 0.0
    assert dec.u_sharp.norm() == 0.0
    assert dec.reconstruction_residual == 0.0


def test_crossing_rejects_degenerate_span():
    problem = synthetic_problem(np.diag([-1.0, -2.0, -3.0, -4.0]), h="zero")
    e1 = np.zeros(4, dtype=complex)
    e1[0] = 1.0
    fake = SpectralDecomposition(
        psi=ComplexStateVector(e1, 1.0),
        phi_adj=ComplexStateVector(e1.copy(), 1.0),
        mu=-1.0 + 0.0j,
    )
    with pytest.raises(ValueError, match="degenerate"):
        decompose_crossing_term(problem, fake, n_t=4)


# ---------------------------------------------------------------------------
# branch continuation


def test_branch_reproduces_exact_solution(coarse_branch):
    assert len(coarse_branch.points) == 11
    assert coarse_branch.notes == []
    for pt in coarse_branch.points[1:]:
        assert abs(pt.lam - pt.alpha**2) <= 1e-9
        assert abs(pt.sigma) <= 1e-10
        assert pt.eta_norm <= 1e-8
        assert pt.residual <= NEWTON_TOL
        assert np.allclose(pt.l_check, [pt.alpha, 0.0], atol=1e-9)
        assert pt.sup_residual <= 10.0 * NEWTON_TOL


def test_branch_matches_closed_form_trajectory(coarse_branch, coarse_cfg):
    pt = coarse_branch.points[6]
    assert pt.alpha == pytest.approx(0.3)
    exact = exact_branch_trajectory(coarse_cfg, 0.09, n_t=pt.u.n_t)
    assert (pt.u - exact).norm() <= 1e-8


def test_branch_includes_trivial_origin(coarse_branch):
    origin = coarse_branch.points[0]
    assert origin.alpha == 0.0 and origin.lam == 0.0 and origin.sigma == 0.0
    assert origin.u.norm() == 0.0
    assert origin.residual == 0.0


def test_branch_newton_stays_cheap(coarse_branch):
    # Rescaling predictors put every seed inside the quadratic basin.
    assert all(pt.newton_iters <= 3 for pt in coarse_branch.points)


def test_branch_truncates_with_note(coarse_quasi_problem):
    decomp = build_projection(coarse_quasi_problem)
    functional = build_amplitude_functional(decomp.psi, decomp.phi_adj)
    u_star = single_harmonic(decomp.psi, 8)
    result = continue_branch(
        coarse_quasi_problem, functional, u_star,
        alpha_max=0.3, steps=3, max_iter=0,
    )
    assert len(result.points) == 1  # only the origin survived
    assert any("truncated at alpha" in note for note in result.notes)


def test_branch_validates_grid(coarse_problem, coarse_functional,
                               coarse_solution):
    with pytest.raises(ValueError):
        continue_branch(coarse_problem, coarse_functional,
                        coarse_solution.u, alpha_max=-0.1, steps=4)
    with pytest.raises(ValueError):
        continue_branch(coarse_problem, coarse_functional,
                        coarse_solution.u, alpha_max=0.5, steps=0)


def test_branch_zero_amplitude_is_trivial(coarse_problem, coarse_functional,
                                          coarse_solution):
    result = continue_branch(coarse_problem, coarse_functional,
                             coarse_solution.u, alpha_max=0.0, steps=4)
    assert len(result.points) == 1
    assert result.points[0].alpha == 0.0
    assert result.notes == []


def test_branch_csv_rows(coarse_branch):
    rows = coarse_branch.to_csv_rows()
    assert rows[0] == list(BRANCH_CSV_COLUMNS)
    assert len(rows) == len(coarse_branch.points) + 1
    for row, pt in zip(rows[1:], coarse_branch.points):
        assert float(row[0]) == pt.alpha
        assert float(row[1]) == pt.lam
        assert int(row[5]) == pt.newton_iters


def test_branch_json_dict(coarse_branch):
    obj = coarse_branch.to_json_dict()
    assert obj["schema"] == 1
    assert len(obj["points"]) == len(coarse_branch.points)
    assert set(obj["points"][0]) == {
        "alpha", "lambda", "sigma", "eta_norm", "residual",
        "newton_iters", "l_check",
    }
    with_traj = coarse_branch.to_json_dict(include_trajectories=True)
    assert "u" in with_traj["points"][0]


@pytest.fixture(scope="module")
def quasi_branch(coarse_quasi_problem, coarse_quasi_cfg):
    decomp = build_projection(
        coarse_quasi_problem, reference=reference_eigenvector(coarse_quasi_cfg)
    )
    functional = build_amplitude_functional(decomp.psi, decomp.phi_adj)
    solution = solve_extended(
        coarse_quasi_problem, functional,
        initial_extended_state(decomp.psi, n_t=8),
    )
    return continue_branch(
        coarse_quasi_problem, functional, solution.u, alpha_max=0.1, steps=8
    )


def test_quasilinear_branch_curvature(quasi_branch):
    # No closed form here; the checkable structure is the parity of the
    # parameters in the amplitude and a curvature of order one.
    fit = fit_branch_curvature(quasi_branch)
    assert fit.ok
    assert abs(fit.c1) <= 1e-3
    assert abs(fit.c2 - 1.0) <= 0.05
    assert abs(fit.s1) <= 1e-3


def test_quasilinear_correction_is_second_order(quasi_branch):
    alphas = quasi_branch.alphas[1:]
    etas = np.array([pt.eta_norm for pt in quasi_branch.points[1:]])
    assert all(b > a for a, b in zip(etas, etas[1:]))
    ratios = etas / alphas**2
    assert ratios.max() <= 1.5 * ratios.min()


# ---------------------------------------------------------------------------
# symmetry of the branch under amplitude reflection


@pytest.fixture(scope="module")
def coarse_symmetry(coarse_problem, coarse_functional, coarse_branch):
    return check_branch_symmetry(
        coarse_problem, coarse_functional, coarse_branch
    )


def test_symmetry_report_passes(coarse_branch, coarse_symmetry):
    report = coarse_symmetry
    assert report.passed
    assert report.parameter_deviation <= 1e-9
    assert report.state_deviation <= 1e-9
    assert len(report.phase_deviations) == 3
    assert all(v <= report.tolerance for v in report.phase_deviations.values())
    assert coarse_branch.symmetry_report is report
    assert len(report.per_alpha) == len(coarse_branch.points) - 1


def test_symmetry_json_dict(coarse_symmetry):
    obj = coarse_symmetry.to_json_dict()
    assert obj["schema"] == 1
    assert obj["passed"] is True
    assert set(obj) >= {"parameter_deviation", "state_deviation", "tolerance"}


def test_symmetry_requires_nontrivial_points(coarse_problem,
                                             coarse_functional,
                                             coarse_solution):
    empty = BranchResult(
        points=[], u_star=coarse_solution.u, newton_tol=NEWTON_TOL
    )
    with pytest.raises(ValueError, match="no nontrivial"):
        check_branch_symmetry(coarse_problem, coarse_functional, empty)


# ---------------------------------------------------------------------------
# curvature fit


def fake_branch(alphas, lams, sigmas):
    zero = zero_trajectory(1, 2, 1.0)
    points = [
        BranchPoint(
            alpha=float(a), lam=float(l), sigma=float(s), u=zero,
            residual=0.0, newton_iters=0, l_check=np.array([a, 0.0]),
            eta_norm=0.0, sup_residual=0.0, step_norms=[],
        )
        for a, l, s in zip(alphas, lams, sigmas)
    ]
    return BranchResult(points=points, u_star=zero, newton_tol=NEWTON_TOL)


def test_fit_on_exact_branch(coarse_branch):
    fit = fit_branch_curvature(coarse_branch)
    assert fit.ok
    assert abs(fit.c1) <= 1e-8
    assert abs(fit.c2 - 1.0) <= 1e-8
    assert abs(fit.s1) <= 1e-8 and abs(fit.s2) <= 1e-8
    assert fit.max_fit_residual <= 1e-8


def test_fit_flags_linear_contamination():
    alphas = np.linspace(0.0, 0.5, 6)
    result = fake_branch(alphas, 0.3 * alphas + alphas**2, 0.0 * alphas)
    fit = fit_branch_curvature(result)
    assert not fit.ok
    assert fit.c1 == pytest.approx(0.3, abs=1e-10)
    assert fit.c2 == pytest.approx(1.0, abs=1e-10)


def test_fit_zero_branch_is_clean():
    alphas = np.linspace(0.0, 0.5, 6)
    fit = fit_branch_curvature(fake_branch(alphas, 0 * alphas, 0 * alphas))
    assert fit.ok
    assert fit.c1 == 0.0 and fit.c2 == 0.0


def test_fit_needs_enough_points():
    with pytest.raises(ValueError, match="4"):
        fit_branch_curvature(fake_branch([0.0, 0.1, 0.2], [0, 0, 0], [0, 0, 0]))
