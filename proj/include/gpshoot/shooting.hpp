#ifndef GPSHOOT_SHOOTING_HPP
#define GPSHOOT_SHOOTING_HPP

#include "gpshoot/models.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gpshoot {

enum class ShotTag { hit_zero, turned_up, undetermined };

const char* to_string(ShotTag tag);

/// Outcome of one shot: the solution either crossed zero while decreasing
/// (lambda too high), turned upward while positive (lambda too low), or
/// stayed positive-decreasing to the end of the integration window.
struct ShotClass {
    ShotTag tag = ShotTag::undetermined;
    double location = 0.0;   // r (or mapped r) of the terminal event
    double end_value = 0.0;  // f at the terminal point
};

struct ShootConfig {
    double r0 = 1e-4;           // series handoff radius
    double t0_emden = -12.0;    // series handoff time (translated domain)
    double r_stop_margin = 8.0;  // r_stop = sqrt(d) + margin
    double value_floor = 1e-9;  // |f| below floor*b counts as decayed
    double lambda_tol = 1e-12;  // bisection bracket width
    double b_translate = 50.0;  // above this b, shoot in translated time
    double root_tol = 1e-12;
    StepControl step;

    double r_stop(int d) const;
};

struct ClassifiedShot {
    double lambda;
    ShotTag tag;
};

struct EigenResult {
    double lambda = 0.0;
    double bracket_width = 0.0;
    int shots = 0;
    std::vector<ClassifiedShot> classification_log;
    std::vector<std::string> anomalies;
};

/// Converged ground state: eigenvalue, profile, tail constant, functionals.
struct GroundState {
    int d = 0;
    double b = 0.0;
    double lambda = 0.0;
    RadialProfile profile;       // truncated at the decay-plateau end
    double tail_C = 0.0;
    double tail_spread = 0.0;
    Functionals functionals;
    EigenResult eigen;
    std::vector<std::string> anomalies;

    /// Ground-state invariants: lambda in (d-4, d), Pohozaev residual
    /// below 1e-5, positive lower-bound slack, strictly decreasing
    /// positive profile, decreasing Lyapunov values.
    std::vector<std::string> invariant_violations() const;
};

struct SingularGroundState {
    int d = 0;
    double lambda_inf = 0.0;
    double C_inf = 0.0;
    double C_spread = 0.0;
    RadialProfile F_profile;
    EmdenTrajectory Psi_trajectory;  // Psi(t) = F(e^t)
    EigenResult eigen;
    std::vector<std::string> anomalies;
};

/// One shot of the regular problem; for b above cfg.b_translate the
/// integration runs in translated Emden time where the state stays O(1).
ShotClass classify_regular(const ModelParams& p, const ShotParams& s,
                           const ShootConfig& cfg);

/// One shot of the singular problem (F = r f variables).
ShotClass classify_singular(const ModelParams& p, const ShootConfig& cfg);

/// Bisection for lambda(b) on the given bracket (default (d-4, d)).
/// Eigenvalue only; no profile assembly.
EigenResult solve_lambda_only(
    int d, double b, const ShootConfig& cfg,
    std::optional<std::pair<double, double>> bracket = std::nullopt);

/// Full solve: bisection plus final profile, tail constant, functionals.
GroundState solve_lambda(
    int d, double b, const ShootConfig& cfg,
    std::optional<std::pair<double, double>> bracket = std::nullopt);

/// Bisection for lambda_inf on (0, d) via the singular problem; extracts
/// C_inf from the Psi tail.
SingularGroundState solve_lambda_inf(int d, const ShootConfig& cfg);

/// Heteroclinic orbit of the truncated equation from (0,0) to
/// (sqrt(d-3), 0), with the tail fitted per regime.
struct ThetaOrbit {
    EmdenTrajectory trajectory;
    bool oscillatory = false;
    // oscillatory regime: Theta - sqrt(d-3) ~ A0 e^{-beta t} sin(alpha t + delta0)
    double A0 = 0.0;
    double delta0 = 0.0;
    double fitted_alpha = 0.0;  // from zero-crossing gaps
    // monotone regime: Theta - sqrt(d-3) ~ A0 e^{kappa+ t} + B0 e^{kappa- t}
    double B0 = 0.0;
    double fitted_rate = 0.0;  // free log-slope of the dominant tail
    double fit_rms_rel = 0.0;
};
ThetaOrbit solve_theta(int d, const ShootConfig& cfg);

/// Trajectory of s -> Psi_b(s - ln b) on [t0_emden, s_end]; the translated
/// state is O(1) uniformly in b.
EmdenTrajectory compute_psi_b(int d, double b, double lambda,
                              const ShootConfig& cfg, double s_end = 0.0);

/// Numerical check of the transversality integrals: a1 must be nonzero for
/// the matching argument, and (d >= 13 only) the limit a3 of
/// e^{-kappa- t} Psi_2(t) as t -> -infinity must be nonzero.  Error bars
/// come from h-refinement of the central difference in C.
struct NondegeneracyResult {
    double a1 = 0.0;
    double a1_err = 0.0;
    bool a1_clear = false;  // |a1| > 10 a1_err
    std::optional<double> a3;
    std::optional<double> a3_err;
    bool a3_clear = false;
    bool a3_plateau_ok = true;
};
NondegeneracyResult verify_nondegeneracy(int d, const SingularGroundState& sgs,
                                         const ShootConfig& cfg);

/// Semi-analytic lambda_inf estimate: the origin series is extended past
/// its radius of convergence by a Pade approximant, which supplies Cauchy
/// data at r_match for onward integration and event classification.
double lambda_inf_via_pade(int d, int N, int m, double r_match,
                           const ShootConfig& cfg);

}  // namespace gpshoot

#endif
