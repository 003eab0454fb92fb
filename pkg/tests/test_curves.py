"""Backward integration of the two free-boundary curves and the amplitude."""

import numpy as np
import pytest

from conftest import params, rel_err
from drawdiv import formulas as F
from drawdiv.boundaries import solve_zstar
from drawdiv.curves import CurvePair, solve_A, solve_curves
from drawdiv.errors import DomainError, RegimeError
from drawdiv.model import amplitude_at_ceiling, optimal_refraction_threshold


class TestTerminalConditions:
    def test_ceiling_values_exact(self, solved):
        cp = solved(0.5, 3.0)
        p = params(0.5, 3.0)
        b = optimal_refraction_threshold(p)
        assert cp.c_grid[0] == p.cbar
        assert cp.gamma[0] == b
        assert cp.zeta[0] == solve_zstar(p, bstar=b)
        assert cp.A[0] == amplitude_at_ceiling(p, b)

    def test_regime_and_stepper_guards(self):
        with pytest.raises(RegimeError):
            solve_curves(params(0.5, 0.04))
        with pytest.raises(DomainError):
            solve_curves(params(0.5, 3.0), stepper="rk7")
        with pytest.raises(DomainError):
            solve_curves(params(0.5, 3.0), c_low=3.5)


class TestReferenceInstances:
    @pytest.mark.parametrize("a", [0.2, 0.5, 0.8])
    def test_full_range_and_ordered(self, solved, a):
        cp = solved(a, 3.0)
        assert not cp.truncated
        assert cp.c_grid[-1] == 0.0
        assert np.all(np.isfinite(cp.gamma))
        assert np.all(np.isfinite(cp.zeta))
        assert np.all(np.isfinite(cp.A))
        assert np.all(cp.gamma <= cp.zeta + 1e-9)
        assert np.all(cp.gamma >= -1e-12)

    @pytest.mark.parametrize("a", [0.2, 0.5, 0.8])
    def test_constraint_residual_small(self, solved, a):
        # the projected zeta keeps the algebraic constraint within drift tol
        cp = solved(a, 3.0)
        res = cp.diagnostics["c0_residual"]
        assert np.nanmax(res) < 1e-5

    def test_grid_refinement_stability(self):
        # [DERIVED] halving the step moves shared nodes by < 1e-3 * mu/q
        p = params(0.5, 3.0)
        coarse = solve_curves(p, n_steps=1000, stepper="heun")
        fine = solve_curves(p, n_steps=2000, stepper="heun")
        tol = 1e-3 * p.mu / p.q
        assert np.max(np.abs(coarse.gamma - fine.gamma[::2])) < tol
        assert np.max(np.abs(coarse.zeta - fine.zeta[::2])) < tol


class TestStepperOrder:
    def _endpoint_errors(self, stepper):
        p = params(0.5, 3.0)
        ref = solve_curves(p, n_steps=8000, stepper="heun")
        errs = []
        for n in (500, 1000):
            cp = solve_curves(p, n_steps=n, stepper=stepper)
            errs.append(
                abs(cp.gamma[-1] - ref.gamma[-1]) + abs(cp.zeta[-1] - ref.zeta[-1])
            )
        return errs

    def test_euler_first_order(self):
        e1, e2 = self._endpoint_errors("euler")
        order = np.log2(e1 / e2)
        assert abs(order - 1.0) < 0.3

    def test_heun_second_order(self):
        e1, e2 = self._endpoint_errors("heun")
        order = np.log2(e1 / e2)
        assert abs(order - 2.0) < 0.3


class TestDeepRegime:
    def test_large_ceiling_monotone_near_top(self, solved):
        # near the ceiling gamma grows and zeta shrinks as c increases
        cp = solved(0.5, 50.0)
        k = len(cp.c_grid) // 10  # top decile: highest rates
        g, z = cp.gamma[:k], cp.zeta[:k]  # grid is descending in c
        assert np.all(np.diff(g) < 0)  # decreasing along descending c
        assert np.all(np.diff(z) > 0)
        assert np.all(np.isfinite(cp.A))
        assert np.all(np.abs(cp.A) < 1e3)

    def test_amplitude_smooth_across_switch(self, solved):
        cp = solved(0.5, 50.0)
        deep = cp.diagnostics["deep"].astype(bool)
        assert deep.any() and (~deep).any()
        i_switch = int(np.nonzero(~deep)[0][0])  # first full-regime node
        assert i_switch > 0
        jump = abs(cp.A[i_switch] - cp.A[i_switch - 1])
        local = abs(cp.A[i_switch + 1] - cp.A[i_switch])
        assert jump < 50 * max(local, 1e-6)


class TestAmplitudeODE:
    def test_ode_residual_against_grid_derivative(self, solved):
        # [DERIVED] b0 + b1 A matches centered differences of A along the
        # solved grid on non-deep interior nodes
        cp = solved(0.5, 3.0)
        cs = cp.c_grid
        deep = cp.diagnostics["deep"].astype(bool)
        dA = np.gradient(cp.A, cs)
        checked = 0
        for i in range(5, len(cs) - 5, 97):
            if deep[i] or cs[i] == 0.0:
                continue
            b0, b1 = F.aux_b(cp.gamma[i], cp.zeta[i], cp.dgamma[i], cs[i], params(0.5, 3.0))
            assert rel_err(b0 + b1 * cp.A[i], dA[i]) < 1e-2
            checked += 1
        assert checked > 10

    def test_requires_stored_rhs(self, solved):
        cp = solved(0.5, 3.0)
        stripped = CurvePair(
            c_grid=cp.c_grid, gamma=cp.gamma, zeta=cp.zeta, A=cp.A
        )
        with pytest.raises(DomainError):
            solve_A(params(0.5, 3.0), stripped)


class TestCurvePairContainer:
    def test_csv_round_trip(self, solved):
        cp = solved(0.5, 3.0)
        back = CurvePair.from_csv(cp.to_csv())
        assert np.array_equal(back.c_grid, cp.c_grid)
        assert np.array_equal(back.gamma, cp.gamma)
        assert np.array_equal(back.zeta, cp.zeta)
        assert np.array_equal(back.A, cp.A)

    def test_csv_header(self, solved):
        assert solved(0.5, 3.0).to_csv().splitlines()[0] == "c,gamma,zeta,A"

    def test_invariants_enforced(self):
        good_c = np.linspace(3.0, 0.0, 4)
        ones = np.ones(4)
        with pytest.raises(DomainError):
            CurvePair(c_grid=good_c[::-1], gamma=ones, zeta=2 * ones, A=ones)
        with pytest.raises(DomainError):
            CurvePair(c_grid=good_c, gamma=2 * ones, zeta=ones, A=ones)
        with pytest.raises(DomainError):
            CurvePair(c_grid=np.array([3.0, 2.0, 1.5, 0.0]), gamma=ones, zeta=2 * ones, A=ones)
