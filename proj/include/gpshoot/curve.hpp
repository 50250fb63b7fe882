#ifndef GPSHOOT_CURVE_HPP
#define GPSHOOT_CURVE_HPP

#include "gpshoot/shooting.hpp"

#include <span>
#include <string>
#include <vector>

namespace gpshoot {

/// One solved point of the solution curve (lambda as a function of b).
struct CurvePoint {
    double b = 0.0;
    double lambda = 0.0;
    double bracket_width = 0.0;
    double tail_C = 0.0;
    double mass = 0.0;
    double energy = 0.0;
    double pohozaev_residual = 0.0;
    bool ok = false;
    std::string error;
};

/// Independent solve per grid value.  Points are processed in contiguous
/// blocks (one per job) with warm-started brackets inside each block, so
/// results are deterministic for a fixed jobs count.  Failures are recorded
/// per point without aborting the sweep.
std::vector<CurvePoint> sweep_curve(int d, std::span<const double> b_grid,
                                    const ShootConfig& cfg, int jobs = 1);

/// Log-spaced grid helper (n points, endpoints included).
std::vector<double> log_grid(double b_min, double b_max, int n);

struct SnakingFit {
    double A_inf = 0.0;
    double delta_inf = 0.0;  // in [0, 2 pi)
    double rms_rel_residual = 0.0;
    int points_used = 0;
};

/// Linear least squares of lambda(b) - lambda_inf against
/// b^{-beta} (P sin(alpha ln b) + Q cos(alpha ln b)) with alpha, beta fixed
/// from the exponent pack; requires at least 8 points above b_min_fit.
SnakingFit fit_snaking(std::span<const CurvePoint> points, double lambda_inf,
                       const ExponentPack& pack, double b_min_fit = 100.0);

struct MonotoneFit {
    double B_inf = 0.0;
    double fitted_exponent = 0.0;  // free log-log slope
    double rms_rel_residual = 0.0;
    int points_used = 0;
};

/// Log-log regression of |lambda(b) - lambda_inf| on b.  The law is
/// one-signed for d >= 13; a sign change among the used points is an error.
/// Points with |lambda - lambda_inf| <= g_floor are excluded as noise.
MonotoneFit fit_monotone(std::span<const CurvePoint> points, double lambda_inf,
                         const ExponentPack& pack, double b_min_fit = 5.0,
                         double g_floor = 1e-10);

struct RootSequence {
    std::vector<double> roots;   // b_n with lambda(b_n) = lambda_inf
    std::vector<double> ratios;  // b_{n+1}/b_n
    std::vector<int> flagged;    // indices of ratio outliers (missed roots)
};

/// Sign-change scan of lambda(b) - lambda_inf on a log grid with >= 12
/// points per expected period, then bisection in ln b to relative
/// tolerance 1e-7.
RootSequence find_bn(int d, double lambda_inf, double b_lo, double b_hi,
                     const ShootConfig& cfg);

struct RateCheck {
    double slope = 0.0;
    std::vector<double> bs;
    std::vector<double> sups;
};

/// sup over s in [t0, 0] of |Psi_b(s - ln b) - Theta(s)| per b, then the
/// log-log slope; the bound predicts slope -2.  b_list must span at least
/// two decades; sup values at the round-off floor are excluded.
RateCheck convergence_rate_check(int d, double lambda,
                                 std::span<const double> b_list,
                                 const ShootConfig& cfg);

}  // namespace gpshoot

#endif
