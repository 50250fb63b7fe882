#ifndef GPSHOOT_INTEGRATOR_HPP
#define GPSHOOT_INTEGRATOR_HPP

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gpshoot {

/// Maximum state dimension supported by the stepper (all systems here are
/// second-order scalar ODEs plus a few quadrature extensions).
inline constexpr int kMaxStateDim = 8;

using RhsFn = std::function<void(double t, std::span<const double> y,
                                 std::span<double> dydt)>;

/// Right-hand side of an explicit first-order system y' = rhs(t, y).
/// rhs must be deterministic and side-effect free.
struct OdeSystem {
    int dimension = 0;
    RhsFn rhs;
};

/// Adaptive step-size control for the embedded 5(4) pair.
struct StepControl {
    double rel_tol = 1e-11;
    double abs_tol = 1e-11;
    double h_init = 1e-6;
    double h_min = 1e-14;
    double h_max = 0.25;
    long max_steps = 4000000;
};

enum class EventDirection { rising, falling, any };

using EventFn = std::function<double(double t, std::span<const double> y)>;

/// Scalar event function g(t, y); a root is reported when g changes sign
/// across an accepted step in the requested direction.  Roots are located
/// on the dense output to root_tol in the independent variable.
struct EventSpec {
    EventFn g;
    EventDirection direction = EventDirection::any;
    bool terminal = true;
    double root_tol = 1e-12;
};

/// Sampled solution with per-step dense output (4th-order interpolant).
/// Query caching makes monotone value_at sequences O(1) amortized; the
/// cache is per-object, so concurrent queries on one Trajectory are not
/// thread safe.
class Trajectory {
  public:
    Trajectory() = default;

    std::size_t size() const { return times_.size(); }
    bool empty() const { return times_.empty(); }
    int dimension() const { return dim_; }

    double time(std::size_t i) const { return times_[i]; }
    std::span<const double> state(std::size_t i) const {
        return {states_.data() + i * dim_, static_cast<std::size_t>(dim_)};
    }
    std::span<const double> derivative(std::size_t i) const {
        return {derivs_.data() + i * dim_, static_cast<std::size_t>(dim_)};
    }

    double t_front() const { return times_.front(); }
    double t_back() const { return times_.back(); }

    /// Dense-output evaluation; t must lie within the trajectory span.
    /// Throws std::out_of_range otherwise.  Matches stored samples exactly
    /// at sample times.
    void value_at(double t, std::span<double> y_out) const;
    std::vector<double> value_at(double t) const;
    double value_at(double t, int component) const;

    /// Number of segment-advance operations spent in queries so far.
    std::size_t seek_ops() const { return seek_ops_; }

  private:
    friend struct TrajectoryBuilder;

    std::size_t locate(double t) const;

    int dim_ = 0;
    std::vector<double> times_;
    std::vector<double> states_;   // size() * dim_
    std::vector<double> derivs_;   // size() * dim_
    std::vector<double> seg_t0_;   // per segment
    std::vector<double> seg_h_;    // per segment (original step length)
    std::vector<double> dense_;    // per segment: 5 * dim_ interpolation coeffs
    mutable std::size_t cursor_ = 0;
    mutable std::size_t seek_ops_ = 0;
};

enum class IntegrationStatus { reached_end, event_stop, step_failure };

struct EventHit {
    int event_index = -1;
    double t = 0.0;
    std::vector<double> y;
};

struct IntegrationResult {
    Trajectory trajectory;
    std::optional<EventHit> terminal_event;
    std::vector<EventHit> crossings;  // non-terminal crossings, in time order
    IntegrationStatus status = IntegrationStatus::reached_end;
    std::string message;
    long n_steps = 0;
    long n_rejected = 0;
    long n_rhs_evals = 0;
};

struct IntegrateOptions {
    /// When false, only the first/last samples are kept (event detection
    /// still uses the dense output of the current step).
    bool store_trajectory = true;
};

/// Integrates sys from (t0, y0) to t_end (either direction) with the
/// Dormand-Prince 5(4) pair, PI step control on the error-per-unit-step
/// norm, and root-located event detection.
IntegrationResult integrate(const OdeSystem& sys, double t0,
                            std::span<const double> y0, double t_end,
                            const StepControl& ctrl,
                            std::span<const EventSpec> events = {},
                            const IntegrateOptions& opt = {});

}  // namespace gpshoot

#endif
