#include "gpshoot/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gpshoot {

namespace {

void check_dim(const ModelParams& p, int min_d, const char* what) {
    if (p.d < min_d)
        throw std::invalid_argument(std::string(what) + ": requires d >= " +
                                    std::to_string(min_d));
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

// ---------------------------------------------------------------- systems

OdeSystem rhs_f(const ModelParams& p) {
    check_dim(p, 4, "rhs_f");
    const double dm1 = p.d - 1, lam = p.lambda;
    return {2, [dm1, lam](double r, std::span<const double> y,
                          std::span<double> dy) {
                if (r <= 0.0)
                    throw std::domain_error("rhs_f evaluated at r <= 0");
                const double f = y[0], fp = y[1];
                dy[0] = fp;
                dy[1] = -dm1 / r * fp + r * r * f - lam * f - f * f * f;
            }};
}

OdeSystem rhs_psi(const ModelParams& p) {
    check_dim(p, 4, "rhs_psi");
    const double dm2 = p.d - 2, lam = p.lambda;
    return {2, [dm2, lam](double t, std::span<const double> y,
                          std::span<double> dy) {
                const double ps = y[0], pp = y[1];
                const double e2 = std::exp(2.0 * t);
                dy[0] = pp;
                dy[1] = -dm2 * pp - e2 * (lam * ps + ps * ps * ps) +
                        e2 * e2 * ps;
            }};
}

OdeSystem rhs_Psi(const ModelParams& p) {
    check_dim(p, 4, "rhs_Psi");
    const double dm4 = p.d - 4, dm3 = p.d - 3, lam = p.lambda;
    return {2, [dm4, dm3, lam](double t, std::span<const double> y,
                               std::span<double> dy) {
                const double v = y[0], vp = y[1];
                const double e2 = std::exp(2.0 * t);
                dy[0] = vp;
                dy[1] = -dm4 * vp + dm3 * v - v * v * v - lam * e2 * v +
                        e2 * e2 * v;
            }};
}

OdeSystem rhs_F(const ModelParams& p) {
    check_dim(p, 5, "rhs_F");
    const double dm3 = p.d - 3, lam = p.lambda;
    return {2, [dm3, lam](double r, std::span<const double> y,
                          std::span<double> dy) {
                if (r <= 0.0)
                    throw std::domain_error("rhs_F evaluated at r <= 0");
                const double F = y[0], Fp = y[1];
                dy[0] = Fp;
                dy[1] = -dm3 / r * Fp + dm3 / (r * r) * F + r * r * F -
                        lam * F - F * F * F / (r * r);
            }};
}

OdeSystem rhs_theta(int d) {
    if (d < 5) throw std::invalid_argument("rhs_theta: requires d >= 5");
    const double dm4 = d - 4, dm3 = d - 3;
    return {2, [dm4, dm3](double, std::span<const double> y,
                          std::span<double> dy) {
                const double v = y[0], vp = y[1];
                dy[0] = vp;
                dy[1] = -dm4 * vp + dm3 * v - v * v * v;
            }};
}

OdeSystem rhs_psi_b_translated(const ModelParams& p, double b) {
    check_dim(p, 5, "rhs_psi_b_translated");
    if (b <= 0.0) throw std::invalid_argument("rhs_psi_b_translated: b <= 0");
    const double dm4 = p.d - 4, dm3 = p.d - 3, lam = p.lambda;
    const double lnb = std::log(b);
    return {2, [dm4, dm3, lam, lnb](double s, std::span<const double> y,
                                    std::span<double> dy) {
                const double v = y[0], vp = y[1];
                const double e2 = std::exp(2.0 * (s - lnb));  // b^{-2} e^{2s}
                dy[0] = vp;
                dy[1] = -dm4 * vp + dm3 * v - v * v * v - lam * e2 * v +
                        e2 * e2 * v;
            }};
}

// ----------------------------------------------------------- initializers

std::array<double, 2> init_regular(const ModelParams& p, const ShotParams& s,
                                   double r0) {
    check_dim(p, 4, "init_regular");
    if (s.b <= 0.0) throw std::invalid_argument("init_regular: b <= 0");
    if (r0 <= 0.0 || r0 > 1e-2)
        throw std::invalid_argument(
            "init_regular: r0 outside (0, 1e-2], series truncation unsafe");
    const double a = s.b * (p.lambda + s.b * s.b);
    return {s.b - a * r0 * r0 / (2.0 * p.d), -a * r0 / p.d};
}

std::array<double, 2> init_singular(const ModelParams& p, double r0) {
    check_dim(p, 5, "init_singular");
    if (r0 <= 0.0 || r0 > 1e-2)
        throw std::invalid_argument(
            "init_singular: r0 outside (0, 1e-2], series truncation unsafe");
    const double s = std::sqrt(static_cast<double>(p.d - 3));
    const double c1 = -p.lambda / (4.0 * p.d - 10.0);
    return {s * (1.0 + c1 * r0 * r0), s * 2.0 * c1 * r0};
}

std::array<double, 2> init_theta(int d, double t0) {
    if (d < 5) throw std::invalid_argument("init_theta: requires d >= 5");
    if (t0 > -10.0)
        throw std::invalid_argument("init_theta: t0 > -10, series unsafe");
    const double e1 = std::exp(t0), e3 = std::exp(3.0 * t0);
    return {e1 - e3 / (2.0 * d), e1 - 3.0 * e3 / (2.0 * d)};
}

std::array<double, 2> init_psi_b_translated(const ModelParams& p, double b,
                                            double s0) {
    check_dim(p, 5, "init_psi_b_translated");
    if (b <= 0.0) throw std::invalid_argument("init_psi_b_translated: b <= 0");
    if (s0 > -10.0)
        throw std::invalid_argument(
            "init_psi_b_translated: s0 > -10, series unsafe");
    // W(s) = e^s - (1 + lambda/b^2) e^{3s}/(2d) + O(e^{5s})
    const double e1 = std::exp(s0), e3 = std::exp(3.0 * s0);
    const double c = (1.0 + p.lambda / (b * b)) / (2.0 * p.d);
    return {e1 - c * e3, e1 - 3.0 * c * e3};
}

ExponentPack exponents(int d) {
    if (d < 5) throw std::invalid_argument("exponents: requires d >= 5");
    const double disc = static_cast<double>(d) * d - 16.0 * d + 40.0;
    ExponentPack pack;
    pack.beta = (d - 4) / 2.0;
    pack.oscillatory = disc < 0.0;
    if (pack.oscillatory) {
        pack.alpha = std::sqrt(-disc) / 2.0;
        pack.kappa_plus = kNaN;
        pack.kappa_minus = kNaN;
    } else {
        pack.alpha = 0.0;
        const double root = std::sqrt(disc);
        pack.kappa_plus = 0.5 * (-(d - 4.0) + root);
        pack.kappa_minus = 0.5 * (-(d - 4.0) - root);
    }
    return pack;
}

double lyapunov(const ModelParams& p, double r, double f, double fp) {
    return 0.5 * fp * fp + 0.5 * (p.lambda - r * r) * f * f +
           0.25 * f * f * f * f;
}

// ------------------------------------------------- Hermite interpolation

namespace {

std::size_t hermite_locate(const std::vector<double>& xs, double x) {
    if (xs.size() < 2) throw std::out_of_range("trajectory has no span");
    const double slack =
        1e-12 * (std::abs(xs.front()) + std::abs(xs.back()) + 1.0);
    if (x < xs.front() - slack || x > xs.back() + slack)
        throw std::out_of_range("query outside sample span");
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t i = (it == xs.begin()) ? 0 : (it - xs.begin() - 1);
    return std::min(i, xs.size() - 2);
}

struct HermiteSeg {
    double a, b, c, d, h;
    HermiteSeg(double h_, double f0, double d0, double f1, double d1) {
        const double df = f1 - f0;
        h = h_;
        a = f0;
        b = d0 * h_;
        c = 3.0 * df - (2.0 * d0 + d1) * h_;
        d = -2.0 * df + (d0 + d1) * h_;
    }
    double value(double u) const { return a + u * (b + u * (c + u * d)); }
    double deriv(double u) const {
        return (b + u * (2.0 * c + u * 3.0 * d)) / h;
    }
};

}  // namespace

double EmdenTrajectory::value_at(double tq) const {
    const std::size_t i = hermite_locate(t, tq);
    const HermiteSeg seg(t[i + 1] - t[i], value[i], deriv[i], value[i + 1],
                         deriv[i + 1]);
    return seg.value((tq - t[i]) / (t[i + 1] - t[i]));
}

double EmdenTrajectory::deriv_at(double tq) const {
    const std::size_t i = hermite_locate(t, tq);
    const HermiteSeg seg(t[i + 1] - t[i], value[i], deriv[i], value[i + 1],
                         deriv[i + 1]);
    return seg.deriv((tq - t[i]) / (t[i + 1] - t[i]));
}

// --------------------------------------------------------- incomplete gamma

double gamma_upper(double s, double x) {
    if (x <= 0.0) throw std::invalid_argument("gamma_upper: x <= 0");
    // Modified Lentz continued fraction for Gamma(s, x).
    const double fpmin = 1e-300;
    double bb = x + 1.0 - s;
    double cc = 1.0 / fpmin;
    double dd = 1.0 / bb;
    double h = dd;
    for (int i = 1; i <= 400; ++i) {
        const double an = -static_cast<double>(i) * (i - s);
        bb += 2.0;
        dd = an * dd + bb;
        if (std::abs(dd) < fpmin) dd = fpmin;
        cc = bb + an / cc;
        if (std::abs(cc) < fpmin) cc = fpmin;
        dd = 1.0 / dd;
        const double del = dd * cc;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + s * std::log(x)) * h;
}

// -------------------------------------------------------------- quadrature

namespace {

// Composite Simpson over Hermite re-interpolated samples.  integrand maps
// (x, value, derivative) to the four accumulated integrands.
template <class Fn>
std::array<double, 4> simpson_hermite(const std::vector<double>& xs,
                                      const std::vector<double>& vs,
                                      const std::vector<double>& ds, Fn&& fn) {
    std::array<double, 4> acc{0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double h = xs[i + 1] - xs[i];
        if (h <= 0.0) throw std::invalid_argument("samples not increasing");
        const HermiteSeg seg(h, vs[i], ds[i], vs[i + 1], ds[i + 1]);
        const int m =
            (h <= 0.01) ? 2 : 2 * static_cast<int>(std::ceil(h / 0.02));
        const double hu = 1.0 / m;
        std::array<double, 4> segacc{0.0, 0.0, 0.0, 0.0};
        for (int j = 0; j <= m; ++j) {
            const double u = j * hu;
            const double w = (j == 0 || j == m) ? 1.0 : (j % 2 ? 4.0 : 2.0);
            const auto g = fn(xs[i] + u * h, seg.value(u), seg.deriv(u));
            for (int q = 0; q < 4; ++q) segacc[q] += w * g[q];
        }
        for (int q = 0; q < 4; ++q) acc[q] += segacc[q] * (h * hu / 3.0);
    }
    return acc;
}

Functionals assemble(const ModelParams& p, double l2, double l2r, double l4,
                     double grad2) {
    Functionals F;
    F.l2 = l2;
    F.l2r = l2r;
    F.l4_4 = l4;
    F.grad2 = grad2;
    F.mass = l2;
    F.energy = grad2 + l2r - 0.5 * l4;
    const double num = 4.0 * l2r - 2.0 * p.lambda * l2 + 0.5 * (p.d - 4) * l4;
    const double den =
        4.0 * l2r + 2.0 * std::abs(p.lambda) * l2 + 0.5 * (p.d - 4) * l4;
    F.pohozaev_residual = (den > 0.0) ? std::abs(num) / den : 0.0;
    F.bound1_slack =
        (l2 > 0.0) ? p.lambda - (p.d - 4) - (8.0 / p.d) * l2r / l2 : 0.0;
    return F;
}

// Gaussian-law tail integrals beyond r1 with amplitude C.
void add_tail(const ModelParams& p, double C, double r1, double& l2,
              double& l2r, double& l4, double& grad2) {
    if (C == 0.0) return;
    const double lam = p.lambda, d = p.d;
    const double x = r1 * r1;
    const double C2 = C * C;
    l2 += 0.5 * C2 * gamma_upper(0.5 * lam, x);
    l2r += 0.5 * C2 * gamma_upper(0.5 * lam + 1.0, x);
    l4 += C2 * C2 * std::pow(2.0, -(lam - 0.5 * d) - 1.0) *
          gamma_upper(lam - 0.5 * d, 2.0 * x);
    grad2 += 0.5 * C2 *
             (gamma_upper(0.5 * lam + 1.0, x) -
              (lam - d) * gamma_upper(0.5 * lam, x) +
              0.25 * (lam - d) * (lam - d) * gamma_upper(0.5 * lam - 1.0, x));
}

}  // namespace

Functionals compute_functionals(const RadialProfile& profile, double tail_C) {
    const auto& r = profile.r;
    if (r.size() != profile.f.size() || r.size() != profile.fp.size())
        throw std::invalid_argument("profile arrays size mismatch");
    if (r.size() < 2) throw std::invalid_argument("profile too short");
    const ModelParams p{profile.d, profile.lambda};

    double fmax = 0.0;
    for (double v : profile.f) fmax = std::max(fmax, std::abs(v));
    if (fmax == 0.0) return Functionals{};  // zero profile
    if (std::abs(profile.f.back()) > 1e-3 * fmax)
        throw SolverError("compute_functionals: undecayed tail");

    const int d = profile.d;
    auto integrand = [d](double x, double f, double fp) {
        const double w = std::pow(x, d - 1);
        const double f2 = f * f;
        return std::array<double, 4>{f2 * w, x * x * f2 * w, f2 * f2 * w,
                                     fp * fp * w};
    };
    auto acc = simpson_hermite(r, profile.f, profile.fp, integrand);
    double l2 = acc[0], l2r = acc[1], l4 = acc[2], grad2 = acc[3];

    // closure on [0, r0]: f ~ f(r0), f' ~ fp(r0) r/r0
    const double r0 = r.front(), f0 = profile.f.front(),
                 fp0 = profile.fp.front();
    const double r0d = std::pow(r0, d);
    l2 += f0 * f0 * r0d / d;
    l2r += f0 * f0 * r0d * r0 * r0 / (d + 2);
    l4 += f0 * f0 * f0 * f0 * r0d / d;
    grad2 += fp0 * fp0 * r0d / (d + 2);

    add_tail(p, tail_C, r.back(), l2, l2r, l4, grad2);
    return assemble(p, l2, l2r, l4, grad2);
}

Functionals compute_functionals_emden(const EmdenTrajectory& w,
                                      const ModelParams& p, double b,
                                      double tail_C) {
    if (w.t.size() < 2) throw std::invalid_argument("trajectory too short");
    if (b <= 0.0) throw std::invalid_argument("b <= 0");
    const double lnb = std::log(b);
    const int d = p.d;

    double vmax = 0.0;
    for (double v : w.value) vmax = std::max(vmax, std::abs(v));
    if (vmax == 0.0) return Functionals{};
    if (std::abs(w.value.back()) > 1e-3 * vmax)
        throw SolverError("compute_functionals_emden: undecayed tail");

    // t = s - ln b; Psi_b(t) = W(s)
    auto integrand = [d, lnb](double s, double v, double vp) {
        const double t = s - lnb;
        const double e = std::exp((d - 4.0) * t);
        const double e2t = std::exp(2.0 * t);
        const double v2 = v * v, dvm = vp - v;
        return std::array<double, 4>{e * e2t * v2, e * e2t * e2t * v2,
                                     e * v2 * v2, e * dvm * dvm};
    };
    auto acc = simpson_hermite(w.t, w.value, w.deriv, integrand);
    double l2 = acc[0], l2r = acc[1], l4 = acc[2], grad2 = acc[3];

    // closure for t < t0 with Psi_b ~ b e^t - (lambda b + b^3) e^{3t}/(2d)
    const double t0 = w.t.front() - lnb;
    const double a3 = b * (p.lambda + b * b) / p.d;  // (Psi'-Psi) ~ -a3 e^{3t}
    l2 += b * b * std::exp(d * t0) / d;
    l2r += b * b * std::exp((d + 2.0) * t0) / (d + 2);
    l4 += b * b * b * b * std::exp(d * t0) / d;
    grad2 += a3 * a3 * std::exp((d + 2.0) * t0) / (d + 2);

    add_tail(p, tail_C, std::exp(w.t.back() - lnb), l2, l2r, l4, grad2);
    return assemble(p, l2, l2r, l4, grad2);
}

// ----------------------------------------------------------- decay plateau

namespace {

DecayFit best_plateau(const std::vector<double>& pos,
                      const std::vector<double>& q, const char* what) {
    const std::size_t n = q.size();
    const std::size_t k = std::max<std::size_t>(8, n / 8);
    if (n < k || n < 8)
        throw SolverError(std::string(what) + ": decay regime not reached");
    double best_spread = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j + k <= n; ++j) {
        double lo = q[j], hi = q[j], sum = 0.0;
        for (std::size_t i = j; i < j + k; ++i) {
            lo = std::min(lo, q[i]);
            hi = std::max(hi, q[i]);
            sum += q[i];
        }
        const double mean = sum / k;
        if (mean == 0.0) continue;
        const double spread = (hi - lo) / std::abs(mean);
        if (spread < best_spread) {
            best_spread = spread;
            best_j = j;
        }
    }
    if (!(best_spread < 0.05))
        throw SolverError(std::string(what) + ": no decay plateau (spread " +
                          std::to_string(best_spread) + ")");
    double sum = 0.0;
    for (std::size_t i = best_j; i < best_j + k; ++i) sum += q[i];
    return {sum / k, best_spread, pos[best_j], pos[best_j + k - 1]};
}

}  // namespace

DecayFit decay_constant(const RadialProfile& profile, const ModelParams& p) {
    double fmax = 0.0;
    for (double v : profile.f) fmax = std::max(fmax, std::abs(v));
    if (fmax == 0.0) throw SolverError("decay_constant: zero profile");
    const double mu = 0.5 * (p.lambda - p.d);
    std::vector<double> pos, q;
    for (std::size_t i = 0; i < profile.r.size(); ++i) {
        const double r = profile.r[i], f = profile.f[i];
        if (!(f > 0.0) || f >= 1e-4 * fmax) continue;
        const double expo = 0.5 * r * r - mu * std::log(r);
        if (expo > 650.0) continue;
        pos.push_back(r);
        q.push_back(f * std::exp(expo));
    }
    return best_plateau(pos, q, "decay_constant");
}

DecayFit decay_constant_emden(const EmdenTrajectory& traj,
                              const ModelParams& p, double shift) {
    double vmax = 0.0;
    for (double v : traj.value) vmax = std::max(vmax, std::abs(v));
    if (vmax == 0.0)
        throw SolverError("decay_constant_emden: zero trajectory");
    const double mu = 0.5 * (p.lambda - p.d + 2.0);
    std::vector<double> pos, q;
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
        const double t = traj.t[i] - shift, v = traj.value[i];
        if (!(v > 0.0) || v >= 1e-4 * vmax) continue;
        const double e2t = std::exp(2.0 * t);
        const double expo = 0.5 * e2t - mu * t;
        if (expo > 650.0) continue;
        pos.push_back(t);
        q.push_back(v * std::exp(expo));
    }
    return best_plateau(pos, q, "decay_constant_emden");
}

}  // namespace gpshoot
