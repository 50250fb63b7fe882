#include "gpshoot/curve.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

namespace gpshoot {

std::vector<double> log_grid(double b_min, double b_max, int n) {
    if (!(b_min > 0.0) || !(b_max > b_min))
        throw std::invalid_argument("log_grid: need 0 < b_min < b_max");
    if (n < 2) throw std::invalid_argument("log_grid: need n >= 2");
    std::vector<double> g(n);
    const double la = std::log(b_min), lb = std::log(b_max);
    for (int i = 0; i < n; ++i)
        g[i] = std::exp(la + (lb - la) * i / (n - 1));
    g.front() = b_min;
    g.back() = b_max;
    return g;
}

namespace {

CurvePoint solve_point(int d, double b, const ShootConfig& cfg,
                       std::optional<std::pair<double, double>> bracket) {
    CurvePoint pt;
    pt.b = b;
    try {
        auto gs = solve_lambda(d, b, cfg, bracket);
        pt.lambda = gs.lambda;
        pt.bracket_width = gs.eigen.bracket_width;
        pt.tail_C = gs.tail_C;
        pt.mass = gs.functionals.mass;
        pt.energy = gs.functionals.energy;
        pt.pohozaev_residual = gs.functionals.pohozaev_residual;
        pt.ok = true;
        if (!gs.anomalies.empty()) pt.error = gs.anomalies.front();
    } catch (const std::exception& e) {
        pt.ok = false;
        pt.error = e.what();
    }
    return pt;
}

}  // namespace

std::vector<CurvePoint> sweep_curve(int d, std::span<const double> b_grid,
                                    const ShootConfig& cfg, int jobs) {
    const std::size_t n = b_grid.size();
    if (n == 0) throw std::invalid_argument("sweep_curve: empty grid");
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!(b_grid[i] < b_grid[i + 1]))
            throw std::invalid_argument("sweep_curve: grid not increasing");
    jobs = std::clamp<int>(jobs, 1, static_cast<int>(n));

    std::vector<CurvePoint> out(n);
    auto run_block = [&](std::size_t lo, std::size_t hi) {
        std::optional<std::pair<double, double>> warm;
        double prev_lambda = 0.0;
        bool have_prev = false;
        for (std::size_t i = lo; i < hi; ++i) {
            out[i] = solve_point(d, b_grid[i], cfg, warm);
            if (out[i].ok) {
                if (have_prev) {
                    const double step =
                        std::max(10.0 * std::abs(out[i].lambda - prev_lambda),
                                 1e4 * cfg.lambda_tol);
                    warm = {out[i].lambda - step, out[i].lambda + step};
                } else {
                    warm.reset();
                }
                prev_lambda = out[i].lambda;
                have_prev = true;
            } else {
                warm.reset();
                have_prev = false;
            }
        }
    };

    if (jobs == 1) {
        run_block(0, n);
        return out;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j) {
        const std::size_t lo = j * chunk;
        if (lo >= n) break;
        const std::size_t hi = std::min(n, lo + chunk);
        pool.emplace_back(run_block, lo, hi);
    }
    for (auto& th : pool) th.join();
    return out;
}

SnakingFit fit_snaking(std::span<const CurvePoint> points, double lambda_inf,
                       const ExponentPack& pack, double b_min_fit) {
    if (!pack.oscillatory)
        throw std::invalid_argument("fit_snaking: regime is not oscillatory");
    std::vector<double> bs, ys;
    for (const auto& p : points) {
        if (!p.ok || p.b < b_min_fit) continue;
        bs.push_back(p.b);
        ys.push_back(p.lambda - lambda_inf);
    }
    if (bs.size() < 8)
        throw std::invalid_argument("fit_snaking: fewer than 8 points");

    double a11 = 0, a12 = 0, a22 = 0, r1 = 0, r2 = 0;
    for (std::size_t i = 0; i < bs.size(); ++i) {
        const double lnb = std::log(bs[i]);
        const double e = std::pow(bs[i], -pack.beta);
        const double x1 = e * std::sin(pack.alpha * lnb);
        const double x2 = e * std::cos(pack.alpha * lnb);
        a11 += x1 * x1;
        a12 += x1 * x2;
        a22 += x2 * x2;
        r1 += x1 * ys[i];
        r2 += x2 * ys[i];
    }
    const double det = a11 * a22 - a12 * a12;
    const double P = (r1 * a22 - r2 * a12) / det;
    const double Q = (a11 * r2 - a12 * r1) / det;

    SnakingFit fit;
    fit.A_inf = std::hypot(P, Q);
    fit.delta_inf = std::atan2(Q, P);
    if (fit.delta_inf < 0.0) fit.delta_inf += 2.0 * std::numbers::pi;
    fit.points_used = static_cast<int>(bs.size());
    double ss = 0, sy = 0;
    for (std::size_t i = 0; i < bs.size(); ++i) {
        const double lnb = std::log(bs[i]);
        const double model = std::pow(bs[i], -pack.beta) *
                             (P * std::sin(pack.alpha * lnb) +
                              Q * std::cos(pack.alpha * lnb));
        ss += (ys[i] - model) * (ys[i] - model);
        sy += ys[i] * ys[i];
    }
    fit.rms_rel_residual = std::sqrt(ss / sy);
    return fit;
}

MonotoneFit fit_monotone(std::span<const CurvePoint> points, double lambda_inf,
                         const ExponentPack& pack, double b_min_fit,
                         double g_floor) {
    if (pack.oscillatory)
        throw std::invalid_argument("fit_monotone: regime is oscillatory");
    std::vector<double> bs, gs;
    for (const auto& p : points) {
        if (!p.ok || p.b < b_min_fit) continue;
        const double g = p.lambda - lambda_inf;
        // a point is usable only when the deviation is resolved, i.e. well
        // above both the global floor and its own bisection bracket
        if (std::abs(g) <= std::max(g_floor, 10.0 * p.bracket_width)) continue;
        bs.push_back(p.b);
        gs.push_back(g);
    }
    if (bs.size() < 4)
        throw std::invalid_argument("fit_monotone: fewer than 4 usable points");
    for (std::size_t i = 1; i < gs.size(); ++i)
        if ((gs[i] < 0.0) != (gs[0] < 0.0))
            throw SolverError(
                "fit_monotone: sign change in lambda(b) - lambda_inf");

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < bs.size(); ++i) {
        const double x = std::log(bs[i]), y = std::log(std::abs(gs[i]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(bs.size());
    MonotoneFit fit;
    fit.fitted_exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.points_used = static_cast<int>(bs.size());

    // amplitude at the fixed exponent kappa_plus
    double mean = 0.0;
    for (std::size_t i = 0; i < bs.size(); ++i)
        mean += std::log(std::abs(gs[i])) - pack.kappa_plus * std::log(bs[i]);
    mean /= n;
    fit.B_inf = std::copysign(std::exp(mean), gs[0]);
    double ss = 0, syy = 0;
    for (std::size_t i = 0; i < bs.size(); ++i) {
        const double model = fit.B_inf * std::pow(bs[i], pack.kappa_plus);
        ss += (gs[i] - model) * (gs[i] - model);
        syy += gs[i] * gs[i];
    }
    fit.rms_rel_residual = std::sqrt(ss / syy);
    return fit;
}

RootSequence find_bn(int d, double lambda_inf, double b_lo, double b_hi,
                     const ShootConfig& cfg) {
    const auto pack = exponents(d);
    if (!pack.oscillatory)
        throw std::invalid_argument("find_bn: regime is not oscillatory");
    if (!(b_lo > 0.0) || !(b_hi > b_lo))
        throw std::invalid_argument("find_bn: bad range");

    const double period = std::numbers::pi / pack.alpha;  // in ln b
    const double dln = period / 14.0;  // >= 12 points per period
    std::vector<double> lnbs;
    for (double x = std::log(b_lo); x <= std::log(b_hi) + 1e-12; x += dln)
        lnbs.push_back(x);

    // sign scan with warm-started solves
    std::optional<std::pair<double, double>> warm;
    double prev_lambda = 0.0;
    bool have_prev = false;
    auto g_of = [&](double lnb) {
        auto eig = solve_lambda_only(d, std::exp(lnb), cfg, warm);
        if (have_prev) {
            const double step =
                std::max(10.0 * std::abs(eig.lambda - prev_lambda),
                         1e4 * cfg.lambda_tol);
            warm = {eig.lambda - step, eig.lambda + step};
        }
        prev_lambda = eig.lambda;
        have_prev = true;
        return eig.lambda - lambda_inf;
    };

    const double zero_tol = 5e-13;
    std::vector<double> gvals(lnbs.size());
    for (std::size_t i = 0; i < lnbs.size(); ++i) gvals[i] = g_of(lnbs[i]);

    RootSequence seq;
    int last_sign = 0;
    std::size_t last_idx = 0;
    for (std::size_t i = 0; i < lnbs.size(); ++i) {
        const int s = (gvals[i] > zero_tol) ? 1 : (gvals[i] < -zero_tol ? -1 : 0);
        if (s == 0) continue;
        if (last_sign != 0 && s != last_sign) {
            // bisect in ln b on [lnbs[last_idx], lnbs[i]]
            double la = lnbs[last_idx], lb = lnbs[i];
            double ga = gvals[last_idx];
            warm.reset();
            have_prev = false;
            while (lb - la > 1e-7) {
                const double lm = 0.5 * (la + lb);
                const double gm = g_of(lm);
                if ((gm < 0.0) == (ga < 0.0)) {
                    la = lm;
                    ga = gm;
                } else {
                    lb = lm;
                }
            }
            seq.roots.push_back(std::exp(0.5 * (la + lb)));
            warm.reset();
            have_prev = false;
        }
        last_sign = s;
        last_idx = i;
    }
    const double target = std::exp(std::numbers::pi / pack.alpha);
    for (std::size_t i = 0; i + 1 < seq.roots.size(); ++i) {
        seq.ratios.push_back(seq.roots[i + 1] / seq.roots[i]);
        if (i > 0 && std::abs(seq.ratios.back() - target) > 0.5)
            seq.flagged.push_back(static_cast<int>(i));
    }
    return seq;
}

RateCheck convergence_rate_check(int d, double lambda,
                                 std::span<const double> b_list,
                                 const ShootConfig& cfg) {
    if (b_list.size() < 2)
        throw std::invalid_argument("convergence_rate_check: need >= 2 values");
    double bmin = b_list[0], bmax = b_list[0];
    for (double b : b_list) {
        bmin = std::min(bmin, b);
        bmax = std::max(bmax, b);
    }
    if (bmax / bmin < 99.0)
        throw std::invalid_argument(
            "convergence_rate_check: b range must span >= 2 decades");

    auto theta = solve_theta(d, cfg);
    RateCheck rc;
    for (double b : b_list) {
        auto wtraj = compute_psi_b(d, b, lambda, cfg, 0.0);
        double sup = 0.0;
        const double s0 = cfg.t0_emden;
        const int n = 200;
        for (int i = 0; i <= n; ++i) {
            const double s = s0 + (0.0 - s0) * i / n;
            sup = std::max(sup, std::abs(wtraj.value_at(s) -
                                         theta.trajectory.value_at(s)));
        }
        if (sup < 1e-13) continue;  // round-off floor
        rc.bs.push_back(b);
        rc.sups.push_back(sup);
    }
    if (rc.bs.size() < 2)
        throw SolverError("convergence_rate_check: all sups at round-off");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < rc.bs.size(); ++i) {
        const double x = std::log(rc.bs[i]), y = std::log(rc.sups[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(rc.bs.size());
    rc.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return rc;
}

}  // namespace gpshoot
