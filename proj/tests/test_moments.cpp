#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "survint/error.hpp"
#include "survint/moments.hpp"
#include "test_support.hpp"

using namespace survint;
using test_support::batched_estimate;
using test_support::sample_covariance;
using test_support::sample_moments;
using test_support::within_3se;

namespace {

// Gauss-Hermite nodes/weights via Golub-Welsch, used as an independent route
// to the moments of a + bZ + cZ^2 + dZ^3 under standard normal Z.
struct GaussHermite {
    Eigen::VectorXd nodes, weights;
    explicit GaussHermite(int n) {
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
        for (int k = 1; k < n; ++k) {
            const double off = std::sqrt(k / 2.0);
            j(k, k - 1) = off;
            j(k - 1, k) = off;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
        nodes = es.eigenvalues();
        weights.resize(n);
        const double sqrt_pi = std::sqrt(M_PI);
        for (int i = 0; i < n; ++i) {
            const double v0 = es.eigenvectors()(0, i);
            weights[i] = sqrt_pi * v0 * v0;
        }
    }

    // E[f(Z)] for Z ~ N(0,1).
    template <class F>
    double expect(const F& f) const {
        double acc = 0;
        for (int i = 0; i < nodes.size(); ++i)
            acc += weights[i] * f(std::sqrt(2.0) * nodes[i]);
        return acc / std::sqrt(M_PI);
    }
};

double poly(const FleishmanCoeffs& co, double z) {
    return co.a + z * (co.b + z * (co.c + z * co.d));
}

}  // namespace

TEST_CASE("normal spec yields the identity polynomial") {
    FleishmanCoeffs co = solve_fleishman({0.0, 1.0, 0.0, 0.0});
    CHECK(co.a == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(co.b == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(co.c == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(co.d == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("solved polynomials reproduce the target moments under quadrature") {
    const GaussHermite gh(24);
    const MomentSpec specs[] = {
        {2, 3, 1.1, 1.2},     {8, 4.5, 1.1, 2},   {26, 28, 0.8, 1.8},
        {68, 60, 0.6, 3.55},  {375, 25000, 0.8, 0.8}, {1350, 200000, 2.3, 9},
        {0, 1, -1.2, 1.8},    {0, 1, 0.0, 2.5},
    };
    for (const MomentSpec& spec : specs) {
        CAPTURE(spec.skewness);
        CAPTURE(spec.kurtosis);
        FleishmanCoeffs co = solve_fleishman(spec);
        const double m1 = gh.expect([&](double z) { return poly(co, z); });
        const double m2 = gh.expect([&](double z) { return std::pow(poly(co, z) - m1, 2); });
        const double m3 = gh.expect([&](double z) { return std::pow(poly(co, z) - m1, 3); });
        const double m4 = gh.expect([&](double z) { return std::pow(poly(co, z) - m1, 4); });
        CHECK(std::abs(m1) < 1e-9);
        CHECK(std::abs(m2 - 1.0) < 1e-9);
        CHECK(std::abs(m3 - spec.skewness) < 1e-8);
        CHECK(std::abs(m4 - 3.0 - spec.kurtosis) < 1e-7);
    }
}

TEST_CASE("infeasible moments are rejected") {
    CHECK_THROWS_WITH_AS(solve_fleishman({0, 1, 3, 0}), doctest::Contains("infeasible-moments"),
                         Error);
    CHECK_THROWS_AS(solve_fleishman({0, -1, 0, 0}), ConfigError);
}

TEST_CASE("table row 0-4 frame spec matches Monte Carlo moments") {
    const MomentSpec spec{2, 3, 1.1, 1.2};
    FleishmanCoeffs co = solve_fleishman(spec);
    Rng rng(1234);
    const std::size_t n = 200000;
    std::vector<double> xs(n);
    const double sd = std::sqrt(spec.variance);
    for (auto& x : xs) x = spec.mean + sd * poly(co, rng.normal());

    auto mean_stat = [](std::span<const double> v, std::span<const double>) {
        return sample_moments(v).mean;
    };
    auto var_stat = [](std::span<const double> v, std::span<const double>) {
        return sample_moments(v).variance;
    };
    auto skew_stat = [](std::span<const double> v, std::span<const double>) {
        return sample_moments(v).skewness;
    };
    auto kurt_stat = [](std::span<const double> v, std::span<const double>) {
        return sample_moments(v).kurtosis;
    };
    std::span<const double> none;
    auto [mean, mean_se] = batched_estimate(xs, none, 50, mean_stat);
    auto [var, var_se] = batched_estimate(xs, none, 50, var_stat);
    auto [skew, skew_se] = batched_estimate(xs, none, 50, skew_stat);
    auto [kurt, kurt_se] = batched_estimate(xs, none, 50, kurt_stat);
    CHECK(within_3se(mean, spec.mean, mean_se));
    CHECK(within_3se(var, spec.variance, var_se));
    CHECK(within_3se(skew, spec.skewness, skew_se));
    CHECK(within_3se(kurt, spec.kurtosis, kurt_se));
}

TEST_CASE("independent specs with zero covariance give zero correlation") {
    Rng rng(77);
    auto [xs, ys] = vale_maurelli_pair({0, 1, 1.1, 1.2}, {0, 1, -0.5, 1.0}, 0.0, 100000, rng);
    auto cov_stat = [](std::span<const double> x, std::span<const double> y) {
        return sample_covariance(x, y);
    };
    auto [cov, cov_se] = batched_estimate(xs, ys, 50, cov_stat);
    CHECK(within_3se(cov, 0.0, cov_se));
}

TEST_CASE("table row 5-19 pair matches moments and covariance") {
    const MomentSpec sx{8, 4.5, 1.1, 2};
    const MomentSpec sy{8.5, 10, 1.2, 1.8};
    Rng rng(99);
    auto [xs, ys] = vale_maurelli_pair(sx, sy, 4.0, 200000, rng);
    auto cov_stat = [](std::span<const double> x, std::span<const double> y) {
        return sample_covariance(x, y);
    };
    auto [cov, cov_se] = batched_estimate(xs, ys, 50, cov_stat);
    CHECK(within_3se(cov, 4.0, cov_se));

    auto skew_stat = [](std::span<const double> v, std::span<const double>) {
        return sample_moments(v).skewness;
    };
    std::span<const double> none;
    auto [skew_x, skew_x_se] = batched_estimate(xs, none, 50, skew_stat);
    auto [skew_y, skew_y_se] = batched_estimate(ys, none, 50, skew_stat);
    CHECK(within_3se(skew_x, sx.skewness, skew_x_se));
    CHECK(within_3se(skew_y, sy.skewness, skew_y_se));
}

TEST_CASE("empty request returns empty collections") {
    Rng rng(5);
    auto [xs, ys] = vale_maurelli_pair({0, 1, 0, 0}, {0, 1, 0, 0}, 0.0, 0, rng);
    CHECK(xs.empty());
    CHECK(ys.empty());
}

TEST_CASE("unattainable intermediate correlation is reported") {
    // Mirrored heavy-skew transforms cap the attainable correlation at
    // 1 - 4c^2 < 0.9.
    FleishmanCoeffs cx = solve_fleishman({0, 1, 2.3, 9});
    FleishmanCoeffs cy = solve_fleishman({0, 1, -2.3, 9});
    CHECK_THROWS_WITH_AS(intermediate_correlation(cx, cy, 0.9),
                         doctest::Contains("intermediate-correlation-out-of-range"), Error);
    Rng rng(6);
    CHECK_THROWS_AS(vale_maurelli_pair({0, 1, 2.3, 9}, {0, 1, -2.3, 9}, 0.9, 10, rng), Error);
}

TEST_CASE("same seed reproduces the same pairs") {
    Rng r1(42), r2(42);
    auto [x1, y1] = vale_maurelli_pair({2, 3, 1.1, 1.2}, {3.5, 10, 1.2, 1.4}, 4.0, 1000, r1);
    auto [x2, y2] = vale_maurelli_pair({2, 3, 1.1, 1.2}, {3.5, 10, 1.2, 1.4}, 4.0, 1000, r2);
    CHECK(x1 == x2);
    CHECK(y1 == y2);
}
