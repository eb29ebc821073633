#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "survint/rng.hpp"

namespace survint {

// Target moments for one generated variable. Kurtosis is the excess
// convention (normal = 0).
struct MomentSpec {
    double mean = 0.0;
    double variance = 1.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
};

// Coefficients of the power-method polynomial Y = a + bZ + cZ^2 + dZ^3 for
// standard normal Z, with a = -c so that E[Y] = 0.
struct FleishmanCoeffs {
    double a = 0.0;
    double b = 1.0;
    double c = 0.0;
    double d = 0.0;
};

// Solves the power-method polynomial for a standardized version of `spec`.
// Throws Error("infeasible-moments") outside the attainable region and
// Error("no-convergence") when the root finder fails.
FleishmanCoeffs solve_fleishman(const MomentSpec& spec);

// First four central moments (and excess kurtosis) of the polynomial,
// evaluated analytically. Used by the solver and exposed for verification.
struct PolynomialMoments {
    double mean, variance, skewness, kurtosis;
};
PolynomialMoments fleishman_moments(const FleishmanCoeffs& c);

// Correlation the underlying normals must have so that the transformed pair
// attains `target_corr`. Throws Error("intermediate-correlation-out-of-range")
// when no solution exists in [-1, 1].
double intermediate_correlation(const FleishmanCoeffs& cx, const FleishmanCoeffs& cy,
                                double target_corr);

// Draws n correlated non-normal pairs with the requested marginal moments and
// covariance.
std::pair<std::vector<double>, std::vector<double>> vale_maurelli_pair(
    const MomentSpec& spec_x, const MomentSpec& spec_y, double target_cov, std::size_t n,
    Rng& rng);

}  // namespace survint
