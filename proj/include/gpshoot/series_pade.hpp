#ifndef GPSHOOT_SERIES_PADE_HPP
#define GPSHOOT_SERIES_PADE_HPP

#include <array>
#include <vector>

namespace gpshoot {

/// Taylor coefficients of the singular solution at the origin:
/// F(r) = sqrt(d-3) (1 + sum_{n>=1} c_n r^{2n}).  coeffs[n] = c_n with
/// coeffs[0] = 1; c_1 = -lambda/(4d-10) exactly.
struct SeriesCoeffs {
    int d = 0;
    double lambda = 0.0;
    std::vector<double> coeffs;

    /// F, F' at radius r from the truncated series.
    std::array<double, 2> eval(double r) const;
};

/// Coefficients c_n from the three-term-plus-convolution recurrence obtained
/// by matching powers of r in the singular equation; N terms beyond c_0.
/// Throws on coefficient overflow (reduce N).
SeriesCoeffs singular_series(int d, double lambda, int N);

/// Rational approximant P/Q in s of a power series sum a_i s^i, with
/// deg P = m, deg Q = k and Q(0) = 1.
struct PadeApproximant {
    std::vector<double> num;  // p_0 .. p_m
    std::vector<double> den;  // q_0 = 1, q_1 .. q_k
    int m = 0;
    int k = 0;

    double value(double s) const;
    double derivative(double s) const;  // d/ds
    /// Taylor re-expansion through the given order (validation helper).
    std::vector<double> taylor(int order) const;
    /// Real poles located in (0, s_max] by sign scan of the denominator.
    std::vector<double> poles_on(double s_max) const;
};

/// Standard construction: solve the k x k linear system for the denominator
/// (partial pivoting), then convolve for the numerator.  A singular system
/// is reported as a degenerate Pade table entry.
PadeApproximant pade(const std::vector<double>& series, int m, int k);

}  // namespace gpshoot

#endif
