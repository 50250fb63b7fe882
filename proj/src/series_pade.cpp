#include "gpshoot/series_pade.hpp"

#include "gpshoot/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gpshoot {

std::array<double, 2> SeriesCoeffs::eval(double r) const {
    const double s = r * r;
    // Horner in s = r^2 for S and dS/ds.
    double S = 0.0, dS = 0.0;
    for (std::size_t n = coeffs.size(); n-- > 0;) {
        dS = dS * s + S;
        S = S * s + coeffs[n];
    }
    const double amp = std::sqrt(static_cast<double>(d - 3));
    return {amp * S, amp * dS * 2.0 * r};
}

SeriesCoeffs singular_series(int d, double lambda, int N) {
    if (d < 5) throw std::invalid_argument("singular_series: requires d >= 5");
    if (N < 1 || N > 60)
        throw std::invalid_argument("singular_series: N outside [1, 60]");
    const double dm3 = d - 3;
    std::vector<double> c(N + 1, 0.0);
    c[0] = 1.0;
    for (int n = 1; n <= N; ++n) {
        // convolution of S^3 at order n, excluding any index equal to n
        double conv = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; i + j < n; ++j) {
                const int k = n - i - j;
                if (k >= n) continue;
                conv += c[i] * c[j] * c[k];
            }
        }
        const double An = 4.0 * n * n + 2.0 * n * d - 8.0 * n + 2.0 * d - 6.0;
        const double prev2 = (n >= 2) ? c[n - 2] : 0.0;
        c[n] = -(lambda * c[n - 1] - prev2 + dm3 * conv) / An;
        if (!std::isfinite(c[n]) || std::abs(c[n]) > 1e100)
            throw SolverError("singular_series: coefficient overflow, reduce N");
    }
    return {d, lambda, std::move(c)};
}

// ------------------------------------------------------------------- Pade

namespace {

// Gaussian elimination with partial pivoting on an augmented k x (k+1)
// system stored row-major.
std::vector<double> solve_dense(std::vector<double> A, int k) {
    const int w = k + 1;
    for (int col = 0; col < k; ++col) {
        int piv = col;
        double best = std::abs(A[col * w + col]);
        for (int row = col + 1; row < k; ++row) {
            const double v = std::abs(A[row * w + col]);
            if (v > best) {
                best = v;
                piv = row;
            }
        }
        if (best < 1e-300)
            throw SolverError("pade: degenerate Pade table entry");
        if (piv != col)
            for (int j = 0; j < w; ++j)
                std::swap(A[piv * w + j], A[col * w + j]);
        for (int row = col + 1; row < k; ++row) {
            const double m = A[row * w + col] / A[col * w + col];
            for (int j = col; j < w; ++j) A[row * w + j] -= m * A[col * w + j];
        }
    }
    std::vector<double> x(k);
    for (int row = k - 1; row >= 0; --row) {
        double s = A[row * w + k];
        for (int j = row + 1; j < k; ++j) s -= A[row * w + j] * x[j];
        x[row] = s / A[row * w + row];
    }
    return x;
}

}  // namespace

PadeApproximant pade(const std::vector<double>& series, int m, int k) {
    if (m < 0 || k < 0 || m + k + 1 > static_cast<int>(series.size()))
        throw std::invalid_argument("pade: m + k exceeds series length - 1");
    auto a = [&](int i) { return (i >= 0) ? series[i] : 0.0; };

    PadeApproximant P;
    P.m = m;
    P.k = k;
    P.den.assign(k + 1, 0.0);
    P.den[0] = 1.0;
    if (k > 0) {
        // sum_{j=1..k} q_j a_{m+i-j} = -a_{m+i},  i = 1..k
        std::vector<double> A(k * (k + 1), 0.0);
        for (int i = 1; i <= k; ++i) {
            for (int j = 1; j <= k; ++j)
                A[(i - 1) * (k + 1) + (j - 1)] = a(m + i - j);
            A[(i - 1) * (k + 1) + k] = -a(m + i);
        }
        auto q = solve_dense(std::move(A), k);
        for (int j = 1; j <= k; ++j) {
            if (!std::isfinite(q[j - 1]))
                throw SolverError("pade: degenerate Pade table entry");
            P.den[j] = q[j - 1];
        }
    }
    P.num.assign(m + 1, 0.0);
    for (int i = 0; i <= m; ++i) {
        double s = a(i);
        for (int j = 1; j <= std::min(i, k); ++j) s += P.den[j] * a(i - j);
        P.num[i] = s;
    }
    return P;
}

double PadeApproximant::value(double s) const {
    double p = 0.0, q = 0.0;
    for (std::size_t i = num.size(); i-- > 0;) p = p * s + num[i];
    for (std::size_t i = den.size(); i-- > 0;) q = q * s + den[i];
    return p / q;
}

double PadeApproximant::derivative(double s) const {
    double p = 0.0, dp = 0.0, q = 0.0, dq = 0.0;
    for (std::size_t i = num.size(); i-- > 0;) {
        dp = dp * s + p;
        p = p * s + num[i];
    }
    for (std::size_t i = den.size(); i-- > 0;) {
        dq = dq * s + q;
        q = q * s + den[i];
    }
    return (dp * q - p * dq) / (q * q);
}

std::vector<double> PadeApproximant::taylor(int order) const {
    // t_i from p_i = sum_{j=0..min(i,k)} q_j t_{i-j}
    std::vector<double> t(order + 1, 0.0);
    for (int i = 0; i <= order; ++i) {
        double s = (i < static_cast<int>(num.size())) ? num[i] : 0.0;
        for (int j = 1; j <= std::min<int>(i, k); ++j) s -= den[j] * t[i - j];
        t[i] = s;  // q_0 = 1
    }
    return t;
}

std::vector<double> PadeApproximant::poles_on(double s_max) const {
    std::vector<double> roots;
    auto Q = [&](double s) {
        double q = 0.0;
        for (std::size_t i = den.size(); i-- > 0;) q = q * s + den[i];
        return q;
    };
    const int n = 2000;
    double prev = Q(0.0);
    for (int i = 1; i <= n; ++i) {
        const double s = s_max * i / n;
        const double cur = Q(s);
        if (prev == 0.0 || (prev < 0.0) != (cur < 0.0)) {
            double lo = s_max * (i - 1) / n, hi = s;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                if ((Q(lo) < 0.0) != (Q(mid) < 0.0))
                    hi = mid;
                else
                    lo = mid;
            }
            roots.push_back(0.5 * (lo + hi));
        }
        prev = cur;
    }
    return roots;
}

}  // namespace gpshoot
