#include "survint/moments.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "survint/error.hpp"

namespace survint {

namespace {

void validate_spec(const MomentSpec& spec) {
    if (!(spec.variance > 0.0))
        throw ConfigError("invalid-moment-spec", "variance must be positive");
    // Attainability bound for any distribution: skew^2 <= excess kurtosis + 2.
    if (spec.skewness * spec.skewness > spec.kurtosis + 2.0)
        throw NumericError("infeasible-moments",
                           "skewness^2 exceeds kurtosis + 2; no distribution attains these moments");
}

Eigen::Vector3d residual(const Eigen::Vector3d& v, double skew, double kurt) {
    const double b = v[0], c = v[1], d = v[2];
    Eigen::Vector3d f;
    f[0] = b * b + 6.0 * b * d + 2.0 * c * c + 15.0 * d * d - 1.0;
    f[1] = 2.0 * c * (b * b + 24.0 * b * d + 105.0 * d * d + 2.0) - skew;
    f[2] = 24.0 * (b * d + c * c * (1.0 + b * b + 28.0 * b * d) +
                   d * d * (12.0 + 48.0 * b * d + 141.0 * c * c + 225.0 * d * d)) -
           kurt;
    return f;
}

Eigen::Matrix3d jacobian(const Eigen::Vector3d& v) {
    const double b = v[0], c = v[1], d = v[2];
    Eigen::Matrix3d j;
    j(0, 0) = 2.0 * b + 6.0 * d;
    j(0, 1) = 4.0 * c;
    j(0, 2) = 6.0 * b + 30.0 * d;
    j(1, 0) = 2.0 * c * (2.0 * b + 24.0 * d);
    j(1, 1) = 2.0 * (b * b + 24.0 * b * d + 105.0 * d * d + 2.0);
    j(1, 2) = 2.0 * c * (24.0 * b + 210.0 * d);
    j(2, 0) = 24.0 * (d + c * c * (2.0 * b + 28.0 * d) + 48.0 * d * d * d);
    j(2, 1) = 48.0 * c * (1.0 + b * b + 28.0 * b * d) + 6768.0 * c * d * d;
    j(2, 2) = 24.0 * (b + 28.0 * b * c * c + 24.0 * d + 144.0 * b * d * d +
                      282.0 * c * c * d + 900.0 * d * d * d);
    return j;
}

bool newton_solve(Eigen::Vector3d& v, double skew, double kurt) {
    for (int iter = 0; iter < 200; ++iter) {
        Eigen::Vector3d f = residual(v, skew, kurt);
        if (f.norm() <= 1e-12) return true;
        Eigen::Matrix3d j = jacobian(v);
        Eigen::Vector3d step = j.fullPivLu().solve(-f);
        if (!step.allFinite()) return false;
        double t = 1.0;
        double base = f.norm();
        for (int half = 0; half < 40; ++half) {
            Eigen::Vector3d trial = v + t * step;
            if (residual(trial, skew, kurt).norm() < base) {
                v = trial;
                break;
            }
            t *= 0.5;
            if (half == 39) return false;
        }
    }
    return residual(v, skew, kurt).norm() <= 1e-9;
}

}  // namespace

PolynomialMoments fleishman_moments(const FleishmanCoeffs& co) {
    const double b = co.b, c = co.c, d = co.d;
    PolynomialMoments m;
    m.mean = co.a + c;
    m.variance = b * b + 6.0 * b * d + 2.0 * c * c + 15.0 * d * d;
    m.skewness = 2.0 * c * (b * b + 24.0 * b * d + 105.0 * d * d + 2.0);
    m.kurtosis = 24.0 * (b * d + c * c * (1.0 + b * b + 28.0 * b * d) +
                         d * d * (12.0 + 48.0 * b * d + 141.0 * c * c + 225.0 * d * d));
    return m;
}

FleishmanCoeffs solve_fleishman(const MomentSpec& spec) {
    validate_spec(spec);
    const double skew = spec.skewness;
    const double kurt = spec.kurtosis;

    // First-order starting point, then a few fallback perturbations.
    const double d0 = kurt / 24.0;
    const double c0 = skew / 6.0;
    const Eigen::Vector3d starts[] = {
        {std::sqrt(std::max(0.1, 1.0 - 6.0 * d0 - 2.0 * c0 * c0 - 15.0 * d0 * d0)), c0, d0},
        {1.0, c0, d0},
        {0.9, 0.2 * skew, 0.05 * kurt},
        {0.6, 0.1 * skew, 0.1},
        {1.2, 0.05 * skew, -0.05},
    };

    for (const auto& start : starts) {
        Eigen::Vector3d v = start;
        if (newton_solve(v, skew, kurt)) {
            FleishmanCoeffs out{-v[1], v[0], v[1], v[2]};
            if (out.b < 0.0) {  // mirror solution; prefer positive slope
                out.b = -out.b;
                out.d = -out.d;
            }
            Eigen::Vector3d f = residual({out.b, out.c, out.d}, skew, kurt);
            if (f.norm() <= 1e-9) return out;
        }
    }
    throw NumericError("no-convergence", "power-method polynomial root finding failed");
}

double intermediate_correlation(const FleishmanCoeffs& cx, const FleishmanCoeffs& cy,
                                double target_corr) {
    if (!(std::abs(target_corr) < 1.0))
        throw NumericError("intermediate-correlation-out-of-range",
                           "target correlation must lie in (-1, 1)");
    // corr(Y1, Y2) = A r + B r^2 + C r^3 in the normal correlation r.
    const double A = cx.b * cy.b + 3.0 * cx.b * cy.d + 3.0 * cx.d * cy.b + 9.0 * cx.d * cy.d;
    const double B = 2.0 * cx.c * cy.c;
    const double C = 6.0 * cx.d * cy.d;

    auto g = [&](double r) { return ((C * r + B) * r + A) * r - target_corr; };
    double lo = -1.0, hi = 1.0;
    double glo = g(lo), ghi = g(hi);
    if (glo == 0.0) return lo;
    if (ghi == 0.0) return hi;
    if (glo * ghi > 0.0)
        throw NumericError("intermediate-correlation-out-of-range",
                           "no normal correlation in [-1, 1] attains the target");
    for (int iter = 0; iter < 200; ++iter) {
        double mid = 0.5 * (lo + hi);
        double gm = g(mid);
        if (gm == 0.0 || hi - lo < 1e-15) return mid;
        if (glo * gm < 0.0) {
            hi = mid;
        } else {
            lo = mid;
            glo = gm;
        }
    }
    return 0.5 * (lo + hi);
}

std::pair<std::vector<double>, std::vector<double>> vale_maurelli_pair(
    const MomentSpec& spec_x, const MomentSpec& spec_y, double target_cov, std::size_t n,
    Rng& rng) {
    const FleishmanCoeffs cx = solve_fleishman(spec_x);
    const FleishmanCoeffs cy = solve_fleishman(spec_y);
    const double sx = std::sqrt(spec_x.variance);
    const double sy = std::sqrt(spec_y.variance);
    const double target_corr = target_cov / (sx * sy);
    const double r = intermediate_correlation(cx, cy, target_corr);
    const double tail = std::sqrt(std::max(0.0, 1.0 - r * r));

    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z1 = rng.normal();
        const double z2 = r * z1 + tail * rng.normal();
        const double px = cx.a + z1 * (cx.b + z1 * (cx.c + z1 * cx.d));
        const double py = cy.a + z2 * (cy.b + z2 * (cy.c + z2 * cy.d));
        xs[i] = spec_x.mean + sx * px;
        ys[i] = spec_y.mean + sy * py;
    }
    return {std::move(xs), std::move(ys)};
}

}  // namespace survint
