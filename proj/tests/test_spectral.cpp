#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "dynloss/dataset.hpp"
#include "dynloss/model.hpp"
#include "dynloss/spectral.hpp"

using namespace dynloss;

namespace {

std::function<Eigen::VectorXd(const Eigen::VectorXd&)> diag_op(Eigen::VectorXd d) {
    return [d = std::move(d)](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return d.cwiseProduct(v);
    };
}

ClassWeights tilted_gamma() {
    ClassWeights g(3);
    g << 1.5, 0.9, 0.6;
    return g;
}

}  // namespace

TEST_CASE("lanczos recovers the full spectrum when the Krylov space is complete") {
    const long dim = 60;
    Eigen::VectorXd d(dim);
    for (long i = 0; i < dim; ++i) d[i] = static_cast<double>(i + 1);
    const SpectrumEstimate est = lanczos_top_k(diag_op(d), dim, 3, 60, 11);
    REQUIRE(est.top_eigs.size() == 3);
    CHECK(est.top_eigs[0] == doctest::Approx(60.0).epsilon(1e-8));
    CHECK(est.top_eigs[1] == doctest::Approx(59.0).epsilon(1e-8));
    CHECK(est.top_eigs[2] == doctest::Approx(58.0).epsilon(1e-8));
    CHECK(est.iterations == 60);
    for (double r : est.residual_norms) CHECK(r < 1e-6);
}

TEST_CASE("lanczos converges fast on a well-separated spectrum") {
    Eigen::VectorXd d(100);
    for (long i = 0; i < 100; ++i) d[i] = static_cast<double>(i) / 99.0;
    d[0] = 1000.0;
    d[1] = 500.0;
    d[2] = 250.0;
    const SpectrumEstimate est = lanczos_top_k(diag_op(d), 100, 3, 30, 4);
    REQUIRE(est.top_eigs.size() == 3);
    CHECK(est.top_eigs[0] == doctest::Approx(1000.0).epsilon(1e-8));
    CHECK(est.top_eigs[1] == doctest::Approx(500.0).epsilon(1e-8));
    CHECK(est.top_eigs[2] == doctest::Approx(250.0).epsilon(1e-8));
    CHECK(est.iterations == 30);
    CHECK_FALSE(est.breakdown);
}

TEST_CASE("lanczos is deterministic in the seed") {
    Eigen::VectorXd d(40);
    for (long i = 0; i < 40; ++i) d[i] = std::cos(static_cast<double>(i)) * 10.0;
    const SpectrumEstimate a = lanczos_top_k(diag_op(d), 40, 2, 25, 123);
    const SpectrumEstimate b = lanczos_top_k(diag_op(d), 40, 2, 25, 123);
    CHECK(a.top_eigs == b.top_eigs);
    CHECK(a.residual_norms == b.residual_norms);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("lanczos flags breakdown on the identity and returns the exact Ritz value") {
    auto identity = [](const Eigen::VectorXd& v) { return v; };
    const SpectrumEstimate est = lanczos_top_k(identity, 40, 2, 30, 7);
    CHECK(est.breakdown);
    CHECK(est.iterations == 1);  // Krylov space is one-dimensional
    REQUIRE(est.top_eigs.size() == 1);
    CHECK(est.top_eigs[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(est.residual_norms[0] == 0.0);
}

TEST_CASE("lanczos truncates k to the reachable dimension") {
    Eigen::VectorXd d(2);
    d << 3.0, -1.0;
    const SpectrumEstimate est = lanczos_top_k(diag_op(d), 2, 3, 10, 1);
    REQUIRE(est.top_eigs.size() == 2);
    CHECK(est.top_eigs[0] == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(est.top_eigs[1] == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("lanczos argument validation") {
    auto identity = [](const Eigen::VectorXd& v) { return v; };
    CHECK_THROWS_AS(lanczos_top_k(identity, 0, 1, 10, 0), std::invalid_argument);
    CHECK_THROWS_AS(lanczos_top_k(identity, 10, 0, 10, 0), std::invalid_argument);
    CHECK_THROWS_AS(lanczos_top_k(identity, 10, 5, 4, 0), std::invalid_argument);
}

TEST_CASE("hessian_top_k matches the dense Hessian eigenvalues on a small net") {
    const Dataset d = generate_spiral(SpiralSpec{3, 3, 0.2, 1.0}, 21);
    const MlpParams p = MlpParams::random_init({4, 2, 3}, 9);
    const ClassWeights g = tilted_gamma();

    const Eigen::MatrixXd h = dense_hessian(p, d, g);
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-9);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    const long n = h.rows();
    const SpectrumEstimate est = hessian_top_k(p, d, g, 3, static_cast<int>(n), 31);
    REQUIRE(est.top_eigs.size() == 3);
    for (int i = 0; i < 3; ++i) {
        const double truth = es.eigenvalues()[n - 1 - i];
        CHECK(std::abs(est.top_eigs[i] - truth) / std::max(std::abs(truth), 1e-12) < 1e-6);
    }
}

TEST_CASE("dense_hessian refuses nets above the cap") {
    const Dataset d = generate_spiral(SpiralSpec{3, 3, 0.2, 1.0}, 21);
    const MlpParams wide = MlpParams::random_init({100, 2, 3}, 1);
    CHECK_THROWS_AS(dense_hessian(wide, d, tilted_gamma()), std::invalid_argument);
}

TEST_CASE("ntk from a jacobian is J J^T") {
    Eigen::MatrixXd jac(3, 5);
    jac << 1, 0, 2, -1, 0.5, 0, 3, 1, 0, -2, 2, 1, 0, 0, 1;
    const Eigen::MatrixXd theta = ntk(jac);
    CHECK((theta - jac * jac.transpose()).cwiseAbs().maxCoeff() == 0.0);

    jac(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ntk(jac), std::invalid_argument);
}

TEST_CASE("ntk of a last-layer-only model has closed-form blocks") {
    // W1 = I, b1 = 0, W2 = 0 on strictly positive points: hidden = x and all
    // first-layer derivatives vanish, so
    //   Theta((j,k),(j',k')) = delta_{kk'} (x_j . x_j' + 1).
    Eigen::MatrixX2d pts(3, 2);
    pts << 0.3, 0.7, 1.2, 0.4, 0.9, 0.8;
    const Dataset d(pts, {0, 1, 2}, 3);
    MlpParams p(MlpShape{2, 2, 3});
    p.w1()(0, 0) = 1.0;
    p.w1()(1, 1) = 1.0;
    const Eigen::MatrixXd theta = ntk(p, d);
    REQUIRE(theta.rows() == 9);
    for (long j = 0; j < 3; ++j)
        for (long k = 0; k < 3; ++k)
            for (long jj = 0; jj < 3; ++jj)
                for (long kk = 0; kk < 3; ++kk) {
                    const double expected =
                        (k == kk) ? pts.row(j).dot(pts.row(jj)) + 1.0 : 0.0;
                    CHECK(theta(j * 3 + k, jj * 3 + kk) ==
                          doctest::Approx(expected).epsilon(1e-14));
                }
}

TEST_CASE("ntk of a trained-shape net is symmetric positive semidefinite") {
    const Dataset d = generate_spiral(SpiralSpec{10, 3, 0.2, 1.0}, 3);
    const MlpParams p = MlpParams::random_init({20, 2, 3}, 5);
    const Eigen::MatrixXd theta = ntk(p, d);
    REQUIRE(theta.rows() == 90);
    CHECK((theta - theta.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(theta);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("ntk_top_eigenvalue matches the dense eigensolver") {
    const Dataset d = generate_spiral(SpiralSpec{2, 3, 0.2, 1.0}, 13);
    const MlpParams p = MlpParams::random_init({3, 2, 3}, 8);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ntk(p, d));
    const double truth = es.eigenvalues().maxCoeff();
    const double est = ntk_top_eigenvalue(p, d, 40, 17);
    CHECK(est == doctest::Approx(truth).epsilon(1e-8));
}

TEST_CASE("classify_stability covers all regimes and their boundaries") {
    const double eta = 1.0, n = 300.0;
    CHECK(classify_stability(150.0, eta, n) == StabilityRegime::kStable);
    CHECK(classify_stability(450.0, eta, n) == StabilityRegime::kOscillatoryConvergent);
    CHECK(classify_stability(700.0, eta, n) == StabilityRegime::kDivergent);

    CHECK(classify_stability(n / eta, eta, n) == StabilityRegime::kOscillatoryConvergent);
    CHECK(classify_stability(2.0 * n / eta, eta, n) == StabilityRegime::kDivergent);
    CHECK(classify_stability(0.0, eta, n) == StabilityRegime::kStableMarginal);
    CHECK(classify_stability(-50.0, eta, n) == StabilityRegime::kStableMarginal);

    // The same lambda can sit in different regimes depending on eta.
    CHECK(classify_stability(450.0, 0.5, n) == StabilityRegime::kStable);
    CHECK(classify_stability(450.0, 2.0, n) == StabilityRegime::kDivergent);

    CHECK(to_string(StabilityRegime::kStable) == std::string("stable"));
    CHECK(to_string(StabilityRegime::kOscillatoryConvergent) ==
          std::string("oscillatory_convergent"));
    CHECK(to_string(StabilityRegime::kDivergent) == std::string("divergent"));
    CHECK(to_string(StabilityRegime::kStableMarginal) == std::string("stable_marginal"));

    CHECK_THROWS_AS(classify_stability(1.0, 0.0, n), std::invalid_argument);
    CHECK_THROWS_AS(classify_stability(1.0, eta, 0.0), std::invalid_argument);
}

TEST_CASE("discrete NTK simulation: diagonal kernel follows mu^t exactly") {
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(2, 2);
    theta(0, 0) = 150.0;  // mu = 0.5 at eta=1, n=300
    theta(1, 1) = 450.0;  // mu = -0.5
    Eigen::VectorXd g0(2);
    g0 << 1.0, 1.0;
    const DiscreteNtkSim sim = simulate_discrete_ntk(theta, g0, 1.0, 300.0, 30);

    REQUIRE(static_cast<int>(sim.residual_norms.size()) == 30);
    REQUIRE(sim.mode_coeffs.rows() == 30);
    CHECK_FALSE(sim.overflowed);
    CHECK(sim.eigenvalues[0] == doctest::Approx(150.0).epsilon(1e-12));
    CHECK(sim.eigenvalues[1] == doctest::Approx(450.0).epsilon(1e-12));

    for (int t = 0; t < 30; ++t) {
        const double half = std::pow(0.5, t + 1);  // row t is the state after t+1 updates
        CHECK(sim.residual_norms[static_cast<std::size_t>(t)] ==
              doctest::Approx(half * std::sqrt(2.0)).epsilon(1e-12));
        CHECK(std::abs(sim.mode_coeffs(t, 0)) == doctest::Approx(half).epsilon(1e-12));
        CHECK(std::abs(sim.mode_coeffs(t, 1)) == doctest::Approx(half).epsilon(1e-12));
        // Oscillatory mode flips sign every step; the stable mode never does.
        if (t > 0) {
            CHECK(sim.mode_coeffs(t, 0) * sim.mode_coeffs(t - 1, 0) > 0.0);
            CHECK(sim.mode_coeffs(t, 1) * sim.mode_coeffs(t - 1, 1) < 0.0);
        }
    }
}

TEST_CASE("discrete NTK simulation: dense kernel modes decouple as mu_i^t") {
    // Random symmetric PSD kernel with all multipliers inside the unit circle.
    Eigen::MatrixXd a(4, 4);
    a << 1.2, 0.3, -0.1, 0.4, 0.7, -0.5, 0.2, 0.1, 0.05, 1.1, -0.3, 0.6, 0.9, 0.0, 0.8, -0.2;
    const Eigen::MatrixXd theta = 100.0 * (a * a.transpose());
    Eigen::VectorXd g0(4);
    g0 << 1.0, -0.5, 0.25, 2.0;
    const double eta = 1.0, n = 300.0;
    const DiscreteNtkSim sim = simulate_discrete_ntk(theta, g0, eta, n, 100);
    REQUIRE(sim.mode_coeffs.rows() == 100);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(theta);
    const Eigen::VectorXd c0 = es.eigenvectors().transpose() * g0;
    for (long i = 0; i < 4; ++i) {
        const double mu = 1.0 - (eta / n) * sim.eigenvalues[i];
        REQUIRE(std::abs(mu) < 1.0);
        for (int t = 0; t < 100; ++t) {
            const double expected = std::pow(mu, t + 1) * c0[i];
            CHECK(std::abs(sim.mode_coeffs(t, i) - expected) < 1e-10);
        }
    }
}

TEST_CASE("discrete NTK simulation: divergent mode grows, flips, and truncates") {
    Eigen::MatrixXd theta(1, 1);
    theta << 720.0;  // mu = -1.4 at eta=1, n=300
    Eigen::VectorXd g0(1);
    g0 << 1.0;
    const DiscreteNtkSim sim = simulate_discrete_ntk(theta, g0, 1.0, 300.0, 200, 1e3);

    CHECK(sim.overflowed);
    // |g_t| = 1.4^t crosses 1e3 between t = 20 and t = 21.
    REQUIRE(sim.residual_norms.size() == 20);
    REQUIRE(sim.mode_coeffs.rows() == 20);
    for (int t = 0; t < 20; ++t) {
        CHECK(sim.residual_norms[static_cast<std::size_t>(t)] ==
              doctest::Approx(std::pow(1.4, t + 1)).epsilon(1e-10));
        CHECK(sim.residual_norms[static_cast<std::size_t>(t)] <= 1e3);
        if (t > 0) CHECK(sim.mode_coeffs(t, 0) * sim.mode_coeffs(t - 1, 0) < 0.0);
    }
}

TEST_CASE("discrete NTK simulation argument validation") {
    Eigen::MatrixXd theta = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd g0(2);
    g0 << 1.0, 1.0;
    CHECK(simulate_discrete_ntk(theta, g0, 1.0, 300.0, 0).residual_norms.empty());
    CHECK_THROWS_AS(simulate_discrete_ntk(Eigen::MatrixXd::Zero(2, 3), g0, 1.0, 300.0, 5),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_discrete_ntk(theta, Eigen::VectorXd::Ones(3), 1.0, 300.0, 5),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_discrete_ntk(theta, g0, 1.0, 300.0, -1), std::invalid_argument);
}

TEST_CASE("fit_threshold_exponent recovers an exact power law") {
    const std::vector<double> etas = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    std::vector<double> th;
    for (double e : etas) th.push_back(2.0 / e);
    const PowerLawFit fit = fit_threshold_exponent(etas, th);
    CHECK(fit.exponent == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit_threshold_exponent tolerates small multiplicative noise") {
    const std::vector<double> etas = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    const std::vector<double> wiggle = {1.02, 0.99, 1.01, 0.98, 1.015, 0.995};
    std::vector<double> th;
    for (std::size_t i = 0; i < etas.size(); ++i)
        th.push_back(3.1 * std::pow(etas[i], -0.9) * wiggle[i]);
    const PowerLawFit fit = fit_threshold_exponent(etas, th);
    CHECK(fit.exponent == doctest::Approx(-0.9).epsilon(0.05));
    CHECK(fit.r_squared > 0.995);
}

TEST_CASE("fit_threshold_exponent input validation") {
    CHECK_THROWS_AS(fit_threshold_exponent({1.0, 2.0}, {1.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(fit_threshold_exponent({1.0, 2.0, 3.0}, {1.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(fit_threshold_exponent({1.0, -2.0, 3.0}, {1.0, 0.5, 0.3}),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_threshold_exponent({1.0, 2.0, 3.0}, {1.0, 0.0, 0.3}),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_threshold_exponent({1.0, 1.0, 1.0}, {1.0, 0.5, 0.3}),
                    std::invalid_argument);
}
