#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gpshoot/models.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace gpshoot;

namespace {

double eval_second(const OdeSystem& sys, double x, double v, double vp) {
    double y[2] = {v, vp}, dy[2];
    sys.rhs(x, std::span<const double>(y, 2), std::span<double>(dy, 2));
    return dy[1];
}

}  // namespace

TEST_CASE("rhs_f direct substitution and zero solution") {
    ModelParams p{5, 5.0};
    CHECK(eval_second(rhs_f(p), 1.0, 1.0, 0.0) == doctest::Approx(-5.0));
    CHECK(eval_second(rhs_f(p), 0.7, 0.0, 0.0) == 0.0);
    CHECK_THROWS_AS(eval_second(rhs_f(p), 0.0, 1.0, 0.0), std::domain_error);
}

TEST_CASE("rhs_f linear part is solved exactly by the Gaussian at lambda=d") {
    ModelParams p{5, 5.0};
    auto sys = rhs_f(p);
    for (double r : {0.3, 1.0, 2.4}) {
        const double f = std::exp(-0.5 * r * r), fp = -r * f;
        // analytic: f'' = (r^2 - 1) f for the Gaussian; the model adds -f^3
        const double got = eval_second(sys, r, f, fp);
        CHECK(got + f * f * f ==
              doctest::Approx((r * r - 1.0) * f).epsilon(1e-14));
    }
}

TEST_CASE("rhs_psi values") {
    CHECK(eval_second(rhs_psi({5, 1.0}), 0.3, 0.0, 0.0) == 0.0);
    CHECK(eval_second(rhs_psi({5, 0.0}), 0.0, 1.0, 0.0) ==
          doctest::Approx(0.0));
}

TEST_CASE("rhs_Psi equilibrium of the truncated part") {
    ModelParams p{7, 0.0};
    const double eq = std::sqrt(4.0);
    // at t -> -inf the e^{2t}, e^{4t} terms vanish
    CHECK(eval_second(rhs_Psi(p), -40.0, eq, 0.0) == doctest::Approx(0.0));
    CHECK(eval_second(rhs_Psi(p), 0.7, 0.0, 0.0) == 0.0);
}

TEST_CASE("rhs_F zero solution and boundedness at the regular value") {
    ModelParams p{5, 2.0};
    auto sys = rhs_F(p);
    CHECK(eval_second(sys, 0.5, 0.0, 0.0) == 0.0);
    // (d-3) F - F^3 = 0 at F = sqrt(d-3): the 1/r^2 terms cancel
    const double F = std::sqrt(2.0);
    for (double r : {1e-3, 1e-5}) {
        CHECK(std::abs(eval_second(sys, r, F, 0.0)) < 10.0);
    }
}

TEST_CASE("rhs_theta equilibria") {
    auto sys = rhs_theta(9);
    CHECK(eval_second(sys, 0.0, std::sqrt(6.0), 0.0) ==
          doctest::Approx(0.0).epsilon(1e-14));
    CHECK(eval_second(sys, 0.0, 0.0, 0.0) == 0.0);
}

TEST_CASE("transformation consistency through the chain rule") {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int d : {5, 8, 13}) {
        for (int k = 0; k < 50; ++k) {
            const double lam = 3.0 * U(rng);
            const double r = 0.2 + 2.0 * std::abs(U(rng));
            const double f = U(rng), fp = U(rng);
            ModelParams p{d, lam};
            const double t = std::log(r);
            const double f2 = eval_second(rhs_f(p), r, f, fp);

            // psi(t) = f(e^t): psi'' = r f' + r^2 f''
            const double psi = f, psip = r * fp;
            const double psi2 = eval_second(rhs_psi(p), t, psi, psip);
            CHECK(psi2 == doctest::Approx(r * fp + r * r * f2).epsilon(1e-12));

            // Psi = e^t psi: Psi'' = e^t (psi + 2 psi' + psi'')
            const double P = r * psi, Pp = r * (psi + psip);
            const double P2 = eval_second(rhs_Psi(p), t, P, Pp);
            CHECK(P2 == doctest::Approx(r * (psi + 2.0 * psip + psi2))
                            .epsilon(1e-12));

            // F = r f: F'' = 2 f' + r f''
            const double Fv = r * f, Fp = f + r * fp;
            const double Fd2 = eval_second(rhs_F(p), r, Fv, Fp);
            CHECK(Fd2 == doctest::Approx(2.0 * fp + r * f2).epsilon(1e-12));
        }
    }
}

TEST_CASE("all right-hand sides are odd under sign flip") {
    std::mt19937_64 rng(999);
    std::uniform_real_distribution<double> U(-1.5, 1.5);
    ModelParams p{6, 1.7};
    const OdeSystem systems[] = {rhs_f(p),     rhs_psi(p), rhs_Psi(p),
                                 rhs_F(p),     rhs_theta(6),
                                 rhs_psi_b_translated(p, 20.0)};
    for (const auto& sys : systems) {
        for (int k = 0; k < 20; ++k) {
            const double x = 0.3 + std::abs(U(rng));
            const double v = U(rng), vp = U(rng);
            const double plus = eval_second(sys, x, v, vp);
            const double minus = eval_second(sys, x, -v, -vp);
            CHECK(minus == doctest::Approx(-plus).epsilon(1e-13));
        }
    }
}

TEST_CASE("init_regular values and limits") {
    ModelParams p{5, 5.0};
    ShotParams s{1.0};
    auto [f0, fp0] = init_regular(p, s, 1e-3);
    CHECK(fp0 == doctest::Approx(-1.2e-3).epsilon(1e-14));
    CHECK(f0 == doctest::Approx(1.0 - 6.0 / 10.0 * 1e-6).epsilon(1e-14));

    auto tiny = init_regular(p, s, 1e-8);
    CHECK(tiny[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(tiny[1]) < 1e-7);

    CHECK_THROWS_AS(init_regular(p, s, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(init_regular(p, ShotParams{-1.0}, 1e-4),
                    std::invalid_argument);
}

TEST_CASE("init_regular matches the curvature limit f''(0)") {
    // f''(0) = -(lambda b + b^3)/d, via finite difference of the integrated
    // solution near the origin.
    ModelParams p{5, 2.0};
    ShotParams s{1.5};
    const double expected = -s.b * (p.lambda + s.b * s.b) / p.d;
    const double r0 = 1e-4;
    auto y0 = init_regular(p, s, r0);
    StepControl ctrl;
    auto res = integrate(rhs_f(p), r0, y0, 0.2, ctrl);
    const auto& traj = res.trajectory;
    const double h = 0.05;
    const double fm = traj.value_at(h, 0);
    const double fpp = 2.0 * (fm - s.b) / (h * h);  // f'(0) = 0
    CHECK(fpp == doctest::Approx(expected).epsilon(1e-2));
}

TEST_CASE("init_singular values") {
    ModelParams p{5, 4.0};
    auto [F0, Fp0] = init_singular(p, 1e-3);
    const double rt2 = std::sqrt(2.0);
    CHECK(F0 == doctest::Approx(rt2 * (1.0 - 0.4e-6)).epsilon(1e-14));
    CHECK(Fp0 == doctest::Approx(-rt2 * 0.8e-3).epsilon(1e-14));

    auto z = init_singular({5, 0.0}, 1e-3);
    CHECK(z[0] == rt2);
    CHECK(z[1] == 0.0);

    auto tiny = init_singular({9, 3.0}, 1e-8);
    CHECK(tiny[0] == doctest::Approx(std::sqrt(6.0)).epsilon(1e-15));
    CHECK_THROWS_AS(init_singular({4, 1.0}, 1e-4), std::invalid_argument);
}

TEST_CASE("init_theta values, unstable direction, and residual order") {
    auto [v, vp] = init_theta(5, -10.0);
    CHECK(v == doctest::Approx(std::exp(-10.0) - std::exp(-30.0) / 10.0)
                   .epsilon(1e-15));
    CHECK(vp ==
          doctest::Approx(std::exp(-10.0) - 3.0 * std::exp(-30.0) / 10.0)
              .epsilon(1e-15));
    // ratio -> 1 along (1,1)
    auto far = init_theta(5, -25.0);
    CHECK(far[1] / far[0] == doctest::Approx(1.0).epsilon(1e-12));

    // residual of the truncated equation behaves like (3/(2d)) e^{5 t0}
    auto sys = rhs_theta(5);
    for (double t0 : {-10.0, -11.0, -12.0}) {
        auto y = init_theta(5, t0);
        const double got = eval_second(sys, t0, y[0], y[1]);
        const double series_second =
            std::exp(t0) - 9.0 * std::exp(3.0 * t0) / 10.0;
        const double resid = series_second - got;
        const double expected = 3.0 / 10.0 * std::exp(5.0 * t0);
        CHECK(std::abs(resid) == doctest::Approx(expected).epsilon(1e-3));
    }
}

TEST_CASE("exponents across the regime boundary") {
    auto e5 = exponents(5);
    CHECK(e5.oscillatory);
    CHECK(e5.alpha == doctest::Approx(std::sqrt(15.0) / 2.0).epsilon(1e-15));
    CHECK(e5.beta == 0.5);

    auto e12 = exponents(12);
    CHECK(e12.oscillatory);
    auto e13 = exponents(13);
    CHECK(!e13.oscillatory);
    CHECK(e13.kappa_plus == doctest::Approx(-4.0).epsilon(1e-15));
    CHECK(e13.kappa_minus == doctest::Approx(-5.0).epsilon(1e-15));

    // root identities of the characteristic equation
    for (int d = 13; d <= 25; ++d) {
        auto e = exponents(d);
        CHECK(e.kappa_plus * e.kappa_minus ==
              doctest::Approx(2.0 * (d - 3)).epsilon(1e-13));
        CHECK(e.kappa_plus + e.kappa_minus ==
              doctest::Approx(-(d - 4.0)).epsilon(1e-13));
        CHECK(e.kappa_minus < e.kappa_plus);
        CHECK(e.kappa_plus < 0.0);
    }
    CHECK_THROWS_AS(exponents(4), std::invalid_argument);
}

TEST_CASE("lyapunov special values and decrease along a trajectory") {
    ModelParams p{5, 3.0};
    CHECK(lyapunov(p, 1.0, 0.0, 0.0) == 0.0);
    // lambda = r^2 and fp = 0 leaves only f^4/4
    CHECK(lyapunov({5, 4.0}, 2.0, 1.3, 0.0) ==
          doctest::Approx(0.25 * std::pow(1.3, 4)).epsilon(1e-15));

    ShotParams s{1.0};
    const double r0 = 1e-4;
    auto y0 = init_regular(p, s, r0);
    StepControl ctrl;
    auto res = integrate(rhs_f(p), r0, y0, 3.5, ctrl);
    const auto& traj = res.trajectory;
    double prev =
        lyapunov(p, traj.time(0), traj.state(0)[0], traj.state(0)[1]);
    for (std::size_t i = 1; i < traj.size(); ++i) {
        auto yv = traj.state(i);
        if (yv[0] * yv[0] + yv[1] * yv[1] < 1e-20) break;
        const double cur = lyapunov(p, traj.time(i), yv[0], yv[1]);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("theta orbit dissipates the truncated energy") {
    const int d = 5;
    auto sys = rhs_theta(d);
    auto y0 = init_theta(d, -12.0);
    StepControl ctrl;
    auto res = integrate(sys, -12.0, y0, 20.0, ctrl);
    const auto& traj = res.trajectory;
    const double eq = std::sqrt(d - 3.0);
    auto V = [&](double v, double vp) {
        return 0.5 * vp * vp + 0.5 * (3.0 - d) * v * v + 0.25 * v * v * v * v;
    };
    double prev = V(traj.state(0)[0], traj.state(0)[1]);
    for (std::size_t i = 1; i < traj.size(); ++i) {
        auto yv = traj.state(i);
        if (std::hypot(yv[0] - eq, yv[1]) < 1e-6) break;
        const double cur = V(yv[0], yv[1]);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("gamma_upper against closed forms") {
    for (double x : {1.0, 4.0, 9.0, 30.0}) {
        CHECK(gamma_upper(1.0, x) ==
              doctest::Approx(std::exp(-x)).epsilon(1e-12));
        CHECK(gamma_upper(2.0, x) ==
              doctest::Approx((x + 1.0) * std::exp(-x)).epsilon(1e-12));
        CHECK(gamma_upper(0.5, x) ==
              doctest::Approx(std::sqrt(std::numbers::pi) *
                              std::erfc(std::sqrt(x)))
                  .epsilon(1e-10));
    }
}

namespace {

RadialProfile gaussian_profile(int d, double lambda, double amp,
                               double r_max) {
    RadialProfile prof;
    prof.d = d;
    prof.lambda = lambda;
    prof.b = amp;
    const int n = 1200;
    const double mu = 0.5 * (lambda - d);
    for (int i = 0; i <= n; ++i) {
        const double r = 1e-4 + (r_max - 1e-4) * i / n;
        const double f = amp * std::pow(r, mu) * std::exp(-0.5 * r * r);
        const double fp = f * (mu / r - r);
        prof.r.push_back(r);
        prof.f.push_back(f);
        prof.fp.push_back(fp);
    }
    return prof;
}

}  // namespace

TEST_CASE("functionals of the exact Gaussian against analytic integrals") {
    // f = e^{-r^2/2} with lambda = d: all four integrals have closed forms.
    const int d = 5;
    auto prof = gaussian_profile(d, static_cast<double>(d), 1.0, 7.0);
    auto F = compute_functionals(prof, 1.0);
    const double g_half_d = std::tgamma(0.5 * d);
    const double l2_exact = 0.5 * g_half_d;
    const double l2r_exact = 0.5 * std::tgamma(0.5 * d + 1.0);
    const double l4_exact = 0.5 * std::pow(2.0, -0.5 * d) * g_half_d;
    CHECK(F.l2 == doctest::Approx(l2_exact).epsilon(1e-9));
    CHECK(F.l2r == doctest::Approx(l2r_exact).epsilon(1e-9));
    CHECK(F.l4_4 == doctest::Approx(l4_exact).epsilon(1e-9));
    CHECK(F.grad2 == doctest::Approx(l2r_exact).epsilon(1e-9));
    CHECK(F.mass == F.l2);
    CHECK(F.energy ==
          doctest::Approx(F.grad2 + F.l2r - 0.5 * F.l4_4).epsilon(1e-14));
}

TEST_CASE("functionals of the zero profile vanish") {
    RadialProfile prof;
    prof.d = 5;
    prof.lambda = 2.0;
    for (int i = 0; i <= 100; ++i) {
        prof.r.push_back(0.01 + 0.05 * i);
        prof.f.push_back(0.0);
        prof.fp.push_back(0.0);
    }
    auto F = compute_functionals(prof, 0.0);
    CHECK(F.mass == 0.0);
    CHECK(F.energy == 0.0);
    CHECK(F.pohozaev_residual == 0.0);
    CHECK(F.bound1_slack == 0.0);
}

TEST_CASE("functionals reject an undecayed profile") {
    RadialProfile prof;
    prof.d = 5;
    prof.lambda = 2.0;
    for (int i = 0; i <= 100; ++i) {
        const double r = 0.01 + 0.02 * i;
        prof.r.push_back(r);
        prof.f.push_back(1.0 / (1.0 + r));
        prof.fp.push_back(-1.0 / ((1.0 + r) * (1.0 + r)));
    }
    CHECK_THROWS_AS(compute_functionals(prof, 0.0), SolverError);
}

TEST_CASE("emden-variable functionals agree with the radial ones") {
    // Same Gaussian, integrated in t with Psi = e^t f(e^t), b = 1.
    const int d = 6;
    auto prof = gaussian_profile(d, static_cast<double>(d), 1.0, 7.0);
    EmdenTrajectory w;
    w.tag = EmdenTag::Psi;
    const int n = 3000;
    for (int i = 0; i <= n; ++i) {
        const double t = -12.0 + (std::log(7.0) + 12.0) * i / n;
        const double r = std::exp(t);
        const double f = std::exp(-0.5 * r * r);
        const double fp = -r * f;
        w.t.push_back(t);
        w.value.push_back(r * f);
        w.deriv.push_back(r * (f + r * fp));
    }
    auto Fr = compute_functionals(prof, 1.0);
    auto Fe =
        compute_functionals_emden(w, {d, static_cast<double>(d)}, 1.0, 1.0);
    CHECK(Fe.l2 == doctest::Approx(Fr.l2).epsilon(1e-8));
    CHECK(Fe.l2r == doctest::Approx(Fr.l2r).epsilon(1e-8));
    CHECK(Fe.l4_4 == doctest::Approx(Fr.l4_4).epsilon(1e-8));
    CHECK(Fe.grad2 == doctest::Approx(Fr.grad2).epsilon(1e-8));
}

TEST_CASE("decay constant recovers synthetic amplitudes") {
    auto g1 = gaussian_profile(5, 5.0, 1.0, 6.0);
    auto fit1 = decay_constant(g1, {5, 5.0});
    CHECK(fit1.C == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(fit1.spread < 1e-8);

    auto g2 = gaussian_profile(7, 4.3, 2.0, 6.5);
    auto fit2 = decay_constant(g2, {7, 4.3});
    CHECK(fit2.C == doctest::Approx(2.0).epsilon(1e-10));

    // Non-decaying input has no plateau.
    RadialProfile bad;
    bad.d = 5;
    bad.lambda = 4.0;
    for (int i = 0; i <= 400; ++i) {
        const double r = 0.01 + 0.02 * i;
        bad.r.push_back(r);
        bad.f.push_back(1e-5 / (1.0 + r * r));  // wrong decay law
        bad.fp.push_back(-2e-5 * r / ((1.0 + r * r) * (1.0 + r * r)));
    }
    CHECK_THROWS_AS(decay_constant(bad, {5, 4.0}), SolverError);
}
