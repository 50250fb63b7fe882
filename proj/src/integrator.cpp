#include "gpshoot/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gpshoot {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// y5 - y4 (embedded error estimate).
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output coefficients.
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// contd5 evaluation on one segment.
void eval_dense(const double* rc, int dim, double theta, double* out) {
    const double th1 = 1.0 - theta;
    for (int i = 0; i < dim; ++i) {
        const double r1 = rc[i], r2 = rc[dim + i], r3 = rc[2 * dim + i],
                     r4 = rc[3 * dim + i], r5 = rc[4 * dim + i];
        out[i] = r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
    }
}

}  // namespace

struct TrajectoryBuilder {
    Trajectory traj;
    explicit TrajectoryBuilder(int dim) { traj.dim_ = dim; }
    void push_node(double t, const double* y, const double* dy) {
        traj.times_.push_back(t);
        traj.states_.insert(traj.states_.end(), y, y + traj.dim_);
        traj.derivs_.insert(traj.derivs_.end(), dy, dy + traj.dim_);
    }
    void push_segment(double t0, double h, const double* rc) {
        traj.seg_t0_.push_back(t0);
        traj.seg_h_.push_back(h);
        traj.dense_.insert(traj.dense_.end(), rc, rc + 5 * traj.dim_);
    }
};

std::size_t Trajectory::locate(double t) const {
    if (times_.size() < 2) throw std::out_of_range("trajectory has no span");
    const double ta = times_.front(), tb = times_.back();
    const double dir = (tb >= ta) ? 1.0 : -1.0;
    const double slack = 1e-12 * (std::abs(ta) + std::abs(tb) + 1.0);
    if (dir * (t - ta) < -slack || dir * (t - tb) > slack)
        throw std::out_of_range("interpolation query outside trajectory span");
    const std::size_t nseg = times_.size() - 1;
    std::size_t i = std::min(cursor_, nseg - 1);
    auto in_seg = [&](std::size_t k) {
        return dir * (t - times_[k]) >= 0.0 && dir * (times_[k + 1] - t) >= 0.0;
    };
    while (!in_seg(i)) {
        ++seek_ops_;
        if (dir * (t - times_[i + 1]) > 0.0) {
            if (i + 1 >= nseg) break;
            ++i;
        } else {
            if (i == 0) break;
            --i;
        }
    }
    cursor_ = i;
    return i;
}

void Trajectory::value_at(double t, std::span<double> y_out) const {
    const std::size_t i = locate(t);
    // Exact sample hit returns the stored state bit-for-bit.
    if (t == times_[i]) {
        std::copy_n(states_.data() + i * dim_, dim_, y_out.data());
        return;
    }
    if (t == times_[i + 1]) {
        std::copy_n(states_.data() + (i + 1) * dim_, dim_, y_out.data());
        return;
    }
    if (seg_t0_.size() != times_.size() - 1)
        throw std::logic_error(
            "trajectory was integrated without dense storage");
    const double theta = (t - seg_t0_[i]) / seg_h_[i];
    eval_dense(dense_.data() + i * 5 * dim_, dim_, theta, y_out.data());
}

std::vector<double> Trajectory::value_at(double t) const {
    std::vector<double> y(dim_);
    value_at(t, y);
    return y;
}

double Trajectory::value_at(double t, int component) const {
    double buf[kMaxStateDim];
    value_at(t, std::span<double>(buf, dim_));
    return buf[component];
}

IntegrationResult integrate(const OdeSystem& sys, double t0,
                            std::span<const double> y0, double t_end,
                            const StepControl& ctrl,
                            std::span<const EventSpec> events,
                            const IntegrateOptions& opt) {
    const int n = sys.dimension;
    if (n < 1 || n > kMaxStateDim)
        throw std::invalid_argument("OdeSystem dimension out of range");
    if (static_cast<int>(y0.size()) != n)
        throw std::invalid_argument("initial state size mismatch");
    if (t0 == t_end) throw std::invalid_argument("t0 == t_end");
    if (!all_finite(y0)) throw std::invalid_argument("non-finite initial state");

    IntegrationResult res;
    const double dir = (t_end > t0) ? 1.0 : -1.0;

    double y[kMaxStateDim], ynew[kMaxStateDim], ytmp[kMaxStateDim];
    double k1[kMaxStateDim], k2[kMaxStateDim], k3[kMaxStateDim],
        k4[kMaxStateDim], k5[kMaxStateDim], k6[kMaxStateDim], k7[kMaxStateDim];
    double rc[5 * kMaxStateDim];
    std::copy(y0.begin(), y0.end(), y);

    auto call_rhs = [&](double t, const double* yy, double* dy) {
        sys.rhs(t, std::span<const double>(yy, n), std::span<double>(dy, n));
        ++res.n_rhs_evals;
    };

    TrajectoryBuilder tb(n);
    double t = t0;
    call_rhs(t, y, k1);
    tb.push_node(t, y, k1);

    std::vector<double> g_prev(events.size());
    for (std::size_t j = 0; j < events.size(); ++j)
        g_prev[j] = events[j].g(t, std::span<const double>(y, n));

    // PI controller state (error-per-unit-step, controlled quantity ~ h^4).
    const double beta = 0.08, expo1 = 0.25 - beta * 0.75;
    const double safe = 0.9, facc1 = 5.0, facc2 = 0.1;
    double facold = 1e-4;
    double h = dir * std::clamp(std::abs(ctrl.h_init), ctrl.h_min, ctrl.h_max);

    const double span_eps =
        4.0 * std::numeric_limits<double>::epsilon() *
        (std::abs(t0) + std::abs(t_end) + 1.0);

    auto fail = [&](const std::string& why) {
        res.status = IntegrationStatus::step_failure;
        res.message = why;
        res.trajectory = std::move(tb.traj);
        return std::move(res);
    };

    while (dir * (t_end - t) > span_eps) {
        if (res.n_steps + res.n_rejected >= ctrl.max_steps)
            return fail("max_steps exceeded");
        bool last = false;
        if (dir * (t + h - t_end) > 0.0) {
            h = t_end - t;
            last = true;
        }

        // Stages (k1 holds f(t, y) from FSAL).
        for (int i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        call_rhs(t + c2 * h, ytmp, k2);
        for (int i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        call_rhs(t + c3 * h, ytmp, k3);
        for (int i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        call_rhs(t + c4 * h, ytmp, k4);
        for (int i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] +
                                  a54 * k4[i]);
        call_rhs(t + c5 * h, ytmp, k5);
        for (int i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                                  a64 * k4[i] + a65 * k5[i]);
        call_rhs(t + h, ytmp, k6);
        for (int i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                                  b5 * k5[i] + b6 * k6[i]);
        call_rhs(t + h, ynew, k7);

        double err2 = 0.0;
        bool finite = true;
        for (int i = 0; i < n; ++i) {
            if (!std::isfinite(ynew[i])) finite = false;
            const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                                   e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = ctrl.abs_tol +
                              ctrl.rel_tol * std::max(std::abs(y[i]),
                                                      std::abs(ynew[i]));
            err2 += (ei / sc) * (ei / sc);
        }
        double err = std::sqrt(err2 / n) / std::abs(h);

        if (!finite || !std::isfinite(err)) {
            ++res.n_rejected;
            h *= 0.5;
            if (std::abs(h) < ctrl.h_min)
                return fail("non-finite state at minimum step size");
            continue;
        }

        const double fac11 = std::pow(err, expo1);
        if (err > 1.0) {
            ++res.n_rejected;
            h /= std::min(facc1, fac11 / safe);
            if (std::abs(h) < ctrl.h_min)
                return fail("error estimate above tolerance at minimum step size");
            continue;
        }

        // Accepted step: dense coefficients for [t, t+h].
        for (int i = 0; i < n; ++i) {
            const double ydiff = ynew[i] - y[i];
            rc[i] = y[i];
            rc[n + i] = ydiff;
            rc[2 * n + i] = h * k1[i] - ydiff;
            rc[3 * n + i] = ydiff - h * k7[i] - rc[2 * n + i];
            rc[4 * n + i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] +
                                 d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }

        // Event scan on the accepted interval.
        struct Cand {
            double theta;
            std::size_t ev;
        };
        std::vector<Cand> cands;
        for (std::size_t j = 0; j < events.size(); ++j) {
            const double g0 = g_prev[j];
            const double g1 =
                events[j].g(t + h, std::span<const double>(ynew, n));
            const auto dirn = events[j].direction;
            const bool rising = g0 < 0.0 && g1 >= 0.0;
            const bool falling = g0 > 0.0 && g1 <= 0.0;
            const bool crossed =
                (rising && dirn != EventDirection::falling) ||
                (falling && dirn != EventDirection::rising);
            if (crossed) {
                // Bisection on the dense output.
                double tha = 0.0, thb = 1.0, ga = g0;
                double ybuf[kMaxStateDim];
                for (int it = 0; it < 80; ++it) {
                    if ((thb - tha) * std::abs(h) <= events[j].root_tol) break;
                    const double thm = 0.5 * (tha + thb);
                    eval_dense(rc, n, thm, ybuf);
                    const double gm = events[j].g(
                        t + thm * h, std::span<const double>(ybuf, n));
                    if (gm == 0.0) {
                        tha = thb = thm;
                        break;
                    }
                    if ((ga < 0.0) == (gm < 0.0)) {
                        tha = thm;
                        ga = gm;
                    } else {
                        thb = thm;
                    }
                }
                cands.push_back({0.5 * (tha + thb), j});
            }
            g_prev[j] = g1;
        }
        std::sort(cands.begin(), cands.end(),
                  [](const Cand& a, const Cand& b) { return a.theta < b.theta; });

        bool stop = false;
        for (const Cand& c : cands) {
            double ybuf[kMaxStateDim];
            eval_dense(rc, n, c.theta, ybuf);
            EventHit hit;
            hit.event_index = static_cast<int>(c.ev);
            hit.t = t + c.theta * h;
            hit.y.assign(ybuf, ybuf + n);
            if (events[c.ev].terminal) {
                // Truncate the step at the event time.
                double dy[kMaxStateDim];
                call_rhs(hit.t, ybuf, dy);
                if (opt.store_trajectory) tb.push_segment(t, h, rc);
                tb.push_node(hit.t, ybuf, dy);
                res.terminal_event = std::move(hit);
                res.status = IntegrationStatus::event_stop;
                stop = true;
                break;
            }
            res.crossings.push_back(std::move(hit));
        }
        if (stop) {
            ++res.n_steps;
            res.trajectory = std::move(tb.traj);
            return res;
        }

        t += h;
        std::copy_n(ynew, n, y);
        std::copy_n(k7, n, k1);  // FSAL
        ++res.n_steps;

        if (opt.store_trajectory) {
            tb.push_segment(t - h, h, rc);
            tb.push_node(t, y, k1);
        } else if (dir * (t_end - t) <= span_eps) {
            tb.push_node(t, y, k1);
        }

        facold = std::max(err, 1e-4);
        double fac = fac11 / std::pow(facold, beta);
        fac = std::max(facc2, std::min(facc1, fac / safe));
        double hnew = h / fac;
        if (std::abs(hnew) > ctrl.h_max) hnew = dir * ctrl.h_max;
        if (!last && std::abs(hnew) < ctrl.h_min) hnew = dir * ctrl.h_min;
        h = hnew;
    }

    res.status = IntegrationStatus::reached_end;
    res.trajectory = std::move(tb.traj);
    return res;
}

}  // namespace gpshoot
