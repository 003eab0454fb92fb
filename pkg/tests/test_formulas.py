"""Appendix closed forms: denominator, auxiliary pair, basis functions and
variational coefficients, including the dual-route derivative cross-checks."""

import math

import numpy as np
import pytest

from conftest import params, rel_err
from drawdiv import formulas as F
from drawdiv.boundaries import solve_zstar
from drawdiv.model import characteristic_roots, optimal_refraction_threshold

P = params(0.5, 3.0)


def naive_d(y, z, c, p):
    """Direct unscaled summation of the denominator; valid at small args."""
    t1, t2 = (characteristic_roots(c, p).theta1, characteristic_roots(c, p).theta2)
    T1, T2 = (
        characteristic_roots(p.a * c, p).theta1,
        characteristic_roots(p.a * c, p).theta2,
    )
    e1, e2 = math.exp(t1 * (z - y)), math.exp(t2 * (z - y))
    E1, E2 = math.exp(T1 * y), math.exp(T2 * y)
    return (
        t2 * (e1 * E2 - e1 * E1)
        + T2 * (e2 * E2 - e1 * E2)
        - t1 * (e2 * E2 - e2 * E1)
        - T1 * (e2 * E1 - e1 * E1)
    )


class TestAuxD:
    def test_matches_naive_summation(self):
        # [DERIVED] term-by-term float summation at small arguments
        got = F.aux_d(5.0, 8.0, 2.0, P)
        assert rel_err(got, naive_d(5.0, 8.0, 2.0, P)) < 1e-9

    def test_coincident_arguments_closed_form(self):
        # [PAPER] d(y,y,c) = (e^{y T1} - e^{y T2}) (t1 - t2)
        y, c = 3.0, 2.0
        r = characteristic_roots(c, P)
        R = characteristic_roots(P.a * c, P)
        want = (math.exp(R.theta1 * y) - math.exp(R.theta2 * y)) * (
            r.theta1 - r.theta2
        )
        assert rel_err(F.aux_d(y, y, c, P), want) < 1e-12

    def test_positive_on_grid(self):
        # [PAPER] positivity of the denominator on T x [0, cbar]
        scale = 3 * P.mu / P.q
        ys = np.linspace(scale / 50, scale, 50)
        cs = np.linspace(0.05, P.cbar, 20)
        for c in cs:
            for y in ys[::2]:
                for z in ys[ys >= y][::3]:
                    assert F.aux_d(float(y), float(z), float(c), P) > 0


class TestAuxB:
    def test_affine_in_w(self):
        # [TRIVIAL] b0, b1 are affine in the slope argument
        y, z, c = 2.5, 4.0, 2.0
        b0_0, b1_0 = F.aux_b(y, z, 0.0, c, P)
        b0_p, b1_p = F.aux_b(y, z, 1.0, c, P)
        b0_m, b1_m = F.aux_b(y, z, -1.0, c, P)
        assert abs((b0_p - b0_0) + (b0_m - b0_0)) < 1e-9 * max(1, abs(b0_0))
        assert abs((b1_p - b1_0) + (b1_m - b1_0)) < 1e-9 * max(1, abs(b1_0))
        b0_7, b1_7 = F.aux_b(y, z, 7.0, c, P)
        assert rel_err(b0_7 - b0_0, 7.0 * (b0_p - b0_0)) < 1e-9
        assert rel_err(b1_7 - b1_0, 7.0 * (b1_p - b1_0)) < 1e-9

    def test_b11_positive_where_divided(self):
        # [PAPER] the assembled b11 family is positive on the curve domain
        th = F.theta_set(2.0, P)
        cls = F._cls_b11(2.0, P)
        for y in (1.0, 2.5, 4.0):
            val = F.sc_float(F.cls_eval(cls, y, y + 1.0, th))
            assert val > 0

    def test_transcription_identity(self):
        # -b01/(q b11) equals (1 - d/dy f10)/(d/dy f11): both sides reduce to
        # the same expression in the low-rate roots
        c = 2.0
        th = F.theta_set(c, P)
        for y in (0.7, 2.0, 3.5):
            b01 = F.sc_float(F.cls_eval(F._cls_b01(c, P), y, y + 2.0, th))
            b11 = F.sc_float(F.cls_eval(F._cls_b11(c, P), y, y + 2.0, th))
            h = 1e-6
            f10p = (F.basis_f(y, y + h, c, P)[0] - F.basis_f(y, y - h, c, P)[0]) / (
                2 * h
            )
            f11p = (F.basis_f(y, y + h, c, P)[1] - F.basis_f(y, y - h, c, P)[1]) / (
                2 * h
            )
            lhs = -b01 / (P.q * b11)
            rhs = (1.0 - f10p) / f11p
            assert rel_err(lhs, rhs) < 1e-6


class TestBasisF:
    def test_zero_surplus(self):
        # [TRIVIAL] f10(0,c) = f11(0,c) = 0
        f10, f11, _, _ = F.basis_f(1.5, 0.0, 2.0, P)
        assert f10 == 0.0
        assert abs(f11) < 1e-15

    def test_junction_continuity(self):
        # [PAPER] f10(y,c) = f20(y,y,c) and f11(y,c) = f21(y,y,c)
        y, c = 2.2, 1.7
        f10, f11, f20, f21 = F.basis_f(y, y, c, P)
        assert rel_err(f10, f20) < 1e-12
        assert rel_err(f11, f21) < 1e-12

    def test_y_stationarity_on_diagonal(self):
        # [PAPER] d/dy f20(y,x,c)|_{x=y} = d/dy f21(y,x,c)|_{x=y} = 0
        y, c, h = 2.2, 1.7, 1e-6
        f20p = (F.basis_f(y + h, y, c, P)[2] - F.basis_f(y - h, y, c, P)[2]) / (2 * h)
        f21p = (F.basis_f(y + h, y, c, P)[3] - F.basis_f(y - h, y, c, P)[3]) / (2 * h)
        assert abs(f20p) < 1e-5
        assert abs(f21p) < 1e-5

    def test_f21_consistency_and_positivity(self):
        # [TRIVIAL] f21 = d/(theta1 - theta2) > 0 for x > y
        y, c = 1.2, 2.4
        r = characteristic_roots(c, P)
        for x in (1.5, 3.0, 6.0):
            _, _, _, f21 = F.basis_f(y, x, c, P)
            assert rel_err(f21, F.aux_d(y, x, c, P) / (r.theta1 - r.theta2)) < 1e-12
            assert f21 > 0


class TestVariationalC:
    def test_c0_vanishes_at_boundary_values(self):
        # [PAPER] z* is constructed as the zero of C0(b*, ., cbar)
        b = optimal_refraction_threshold(P)
        z = solve_zstar(P, bstar=b)
        C = F.variational_C(b, z, P.cbar, P)
        scale = abs(F.variational_C(b, z * 1.01, P.cbar, P)[0] - C[0])
        assert abs(C[0]) < 1e-6 * max(1.0, scale)

    def test_signs_at_moderate_large_ceiling(self):
        # [PAPER] C11 < 0 and C22 > 0 at (b*, z*, cbar) for large ceilings
        p = params(0.5, 6.0)
        b = optimal_refraction_threshold(p)
        z = solve_zstar(p, bstar=b)
        C = F.variational_C(b, z, p.cbar, p)
        assert C[2] < 0  # C11
        assert C[5] > 0  # C22

    def test_c21_c22_against_spec_fd(self):
        # [DERIVED] class-space C21/C22 vs 4th-order Richardson differences
        # of the assembled C0, at points where floats resolve both routes
        rng = np.random.default_rng(42)
        b = optimal_refraction_threshold(P)
        z = solve_zstar(P, bstar=b)
        for _ in range(20):
            y = b * rng.uniform(0.6, 1.1)
            zz = y + rng.uniform(0.3, 1.5)
            c = rng.uniform(1.0, 3.0)
            C = F.variational_C(y, zz, c, P)

            def c0_of_y(t, _z=zz, _c=c):
                return F.sc_float(F.c0_scaled(t, _z, _c, P))

            def c0_of_z(t, _y=y, _c=c):
                return F.sc_float(F.c0_scaled(_y, t, _c, P))

            fd_y = F._fd_scaled(lambda t: (c0_of_y(t), 0.0), y, F._spec_fd_step(y), "C21")
            fd_z = F._fd_scaled(lambda t: (c0_of_z(t), 0.0), zz, F._spec_fd_step(zz), "C22")
            assert rel_err(C[4], F.sc_float(fd_y)) < 1e-5
            assert rel_err(C[5], F.sc_float(fd_z)) < 1e-5

    def test_c20_class_route_matches_fd_route(self):
        # [DERIVED] the exact-exponent d/dc agrees with the spec's Richardson
        # scheme where the latter is well conditioned
        b = optimal_refraction_threshold(P)
        z = solve_zstar(P, bstar=b)
        for (y, zz, c) in [(b, z, 2.9), (2.0, 3.2, 2.0), (1.5, 2.0, 1.2)]:
            C = F.variational_C(y, zz, c, P)
            c20_fd = F.sc_float(F.c20_by_fd(y, zz, c, P))
            assert rel_err(C[3], c20_fd) < 1e-6

    def test_all_finite_on_curve_domain(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            y = rng.uniform(0.5, 3.0)
            z = y + rng.uniform(0.1, 2.0)
            c = rng.uniform(0.5, 3.0)
            C = F.variational_C(y, z, c, P)
            assert all(np.isfinite(v) for v in C)


class TestClassCalculus:
    def test_cls_dc_matches_wide_fd(self):
        # d/dc of the assembled C0 numerator vs direct differencing of the
        # evaluated numerator (resolvable at cbar = 3 scales)
        y, z, c = 2.8, 4.1, 2.5
        th = F.theta_set(c, P)
        dcls = F.cls_dc(F._cls_c0_numerator, c, P)
        got = F.sc_float(F.cls_eval(dcls, y, z, th))
        h = 1e-5
        hi = F.sc_float(
            F.cls_eval(F._cls_c0_numerator(c + h, P), y, z, F.theta_set(c + h, P))
        )
        lo = F.sc_float(
            F.cls_eval(F._cls_c0_numerator(c - h, P), y, z, F.theta_set(c - h, P))
        )
        assert rel_err(got, (hi - lo) / (2 * h)) < 1e-6

    def test_cls_dz_dy_match_fd(self):
        y, z, c = 2.0, 3.1, 1.8
        th = F.theta_set(c, P)
        cls = F._cls_c0_numerator(c, P)
        h = 1e-6
        for dcls, lo_pt, hi_pt in [
            (F.cls_dz(cls, th), (y, z - h), (y, z + h)),
            (F.cls_dy(cls, th), (y - h, z), (y + h, z)),
        ]:
            got = F.sc_float(F.cls_eval(dcls, y, z, th))
            fd = (
                F.sc_float(F.cls_eval(cls, hi_pt[0], hi_pt[1], th))
                - F.sc_float(F.cls_eval(cls, lo_pt[0], lo_pt[1], th))
            ) / (2 * h)
            assert rel_err(got, fd) < 1e-7
