#ifndef GPSHOOT_MODELS_HPP
#define GPSHOOT_MODELS_HPP

#include "gpshoot/integrator.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpshoot {

/// Thrown when a solver or functional cannot produce a trustworthy result.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One ODE instance: spatial dimension d and eigenvalue parameter lambda.
struct ModelParams {
    int d = 5;
    double lambda = 0.0;
};

/// Shooting amplitude f(0) = b.
struct ShotParams {
    double b = 1.0;
};

/// Every ground-state eigenvalue lies strictly inside (d-4, d).
struct SpectralBracket {
    double lo;
    double hi;
};
inline SpectralBracket spectral_bracket(int d) {
    return {static_cast<double>(d - 4), static_cast<double>(d)};
}

/// Sampled radial solution (r, f, f').
struct RadialProfile {
    std::vector<double> r;
    std::vector<double> f;
    std::vector<double> fp;
    int d = 0;
    double lambda = 0.0;
    double b = 0.0;       // 0 for the singular problem
    bool singular = false;
};

enum class EmdenTag { psi, Psi, F, theta };

/// Sampled solution in the logarithmic variable t (or shifted time s).
struct EmdenTrajectory {
    std::vector<double> t;
    std::vector<double> value;
    std::vector<double> deriv;
    EmdenTag tag = EmdenTag::Psi;

    /// Cubic Hermite interpolation between samples.
    double value_at(double tq) const;
    double deriv_at(double tq) const;
};

/// Linearization data at the nonzero equilibrium of the truncated equation.
/// kappa_plus/kappa_minus are NaN in the oscillatory regime (complex pair
/// -beta +- i alpha); alpha is 0 in the monotone regime.
struct ExponentPack {
    double alpha;
    double beta;
    double kappa_plus;
    double kappa_minus;
    bool oscillatory;
};

/// Radial integral functionals of a profile (no unit-sphere area factor).
struct Functionals {
    double mass = 0.0;               // ||f||^2_{L2_r}
    double energy = 0.0;             // ||f'||^2 + ||r f||^2 - 1/2 ||f||^4_{L4}
    double pohozaev_residual = 0.0;  // relative defect of the Pohozaev identity
    double bound1_slack = 0.0;       // lambda - (d-4) - (8/d) ||rf||^2/||f||^2
    // raw integrals
    double l2 = 0.0;
    double l2r = 0.0;    // ||r f||^2
    double l4_4 = 0.0;   // ||f||^4_{L4}
    double grad2 = 0.0;  // ||f'||^2
};

// ---- differential systems (state = (value, derivative)) ----

/// f'' + (d-1)/r f' - r^2 f + lambda f + f^3 = 0, independent variable r.
/// Evaluation at r <= 0 is a domain error; start from the series initializer.
OdeSystem rhs_f(const ModelParams& p);

/// psi'' + (d-2) psi' = -e^{2t}(lambda psi + psi^3) + e^{4t} psi.
OdeSystem rhs_psi(const ModelParams& p);

/// Psi'' + (d-4) Psi' + (3-d) Psi + Psi^3 = -lambda e^{2t} Psi + e^{4t} Psi.
OdeSystem rhs_Psi(const ModelParams& p);

/// F'' + (d-3)/r F' - (d-3)/r^2 F - r^2 F + lambda F + F^3/r^2 = 0.
OdeSystem rhs_F(const ModelParams& p);

/// Theta'' + (d-4) Theta' + (3-d) Theta + Theta^3 = 0 (autonomous).
OdeSystem rhs_theta(int d);

/// Translated system for W(s) = Psi_b(s - ln b): the e^{2t}, e^{4t} terms
/// become b^{-2} e^{2s}, b^{-4} e^{4s}, keeping the state O(1) for any b.
OdeSystem rhs_psi_b_translated(const ModelParams& p, double b);

// ---- series initializers near the left endpoint ----

/// f(r0) = b - (lambda b + b^3) r0^2 / (2d), f'(r0) = -(lambda b + b^3) r0 / d.
std::array<double, 2> init_regular(const ModelParams& p, const ShotParams& s,
                                   double r0);

/// F(r0) = sqrt(d-3) (1 - lambda r0^2/(4d-10)), with the matching derivative.
std::array<double, 2> init_singular(const ModelParams& p, double r0);

/// Theta(t0) = e^{t0} - e^{3 t0}/(2d) on the unstable direction (1,1).
std::array<double, 2> init_theta(int d, double t0);

/// W(s0) for the translated system; reduces to init_theta as b -> infinity.
std::array<double, 2> init_psi_b_translated(const ModelParams& p, double b,
                                            double s0);

/// Characteristic exponents at the nonzero equilibrium; requires d >= 5.
ExponentPack exponents(int d);

/// Lyapunov function (1/2) f'^2 + (1/2)(lambda - r^2) f^2 + (1/4) f^4,
/// strictly decreasing in r along solutions of rhs_f.
double lyapunov(const ModelParams& p, double r, double f, double fp);

/// Mass, energy, Pohozaev residual and lower-bound slack by composite
/// Simpson quadrature over Hermite re-interpolated samples; the tail beyond
/// the last sample is closed analytically with the Gaussian decay law and
/// the given tail constant.  Throws SolverError when the profile has not
/// decayed enough for the closure to be reliable.
Functionals compute_functionals(const RadialProfile& profile, double tail_C);

/// Same functionals evaluated in the logarithmic variable for a Psi_b
/// trajectory given in shifted time s (value = Psi_b(s - ln b)); used for
/// large b where the radial profile spans many orders of magnitude in r.
Functionals compute_functionals_emden(const EmdenTrajectory& w,
                                      const ModelParams& p, double b,
                                      double tail_C);

struct DecayFit {
    double C = 0.0;
    double spread = 0.0;  // relative spread over the selected window
    double lo = 0.0;      // window bounds (r or t)
    double hi = 0.0;
};

/// Tail constant of f ~ C r^{(lambda-d)/2} e^{-r^2/2}: plateau of the
/// compensated profile over the sliding window minimizing relative spread.
/// Throws SolverError when no plateau with spread < 5% exists.
DecayFit decay_constant(const RadialProfile& profile, const ModelParams& p);

/// Tail constant from Psi(t) ~ C e^{(lambda-d+2)t/2} e^{-e^{2t}/2}.
/// shift = ln b when the trajectory is in shifted time s (0 otherwise).
DecayFit decay_constant_emden(const EmdenTrajectory& traj,
                              const ModelParams& p, double shift = 0.0);

/// Upper incomplete gamma function (unnormalized), continued fraction form;
/// used by the analytic tail closures.
double gamma_upper(double s, double x);

}  // namespace gpshoot

#endif
