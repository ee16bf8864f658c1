#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dynloss/loss.hpp"

using namespace dynloss;

namespace {

// Reference mean cross entropy written as directly as possible, used as an
// independent oracle for the gamma = 1 case.
double plain_mean_ce(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
    double total = 0.0;
    for (long j = 0; j < logits.rows(); ++j) {
        double denom = 0.0;
        for (long k = 0; k < logits.cols(); ++k) denom += std::exp(logits(j, k));
        total += -std::log(std::exp(logits(j, labels[static_cast<std::size_t>(j)])) / denom);
    }
    return total / static_cast<double>(logits.rows());
}

Eigen::MatrixXd random_logits(long p, long c, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    Eigen::MatrixXd m(p, c);
    for (long j = 0; j < p; ++j)
        for (long k = 0; k < c; ++k) m(j, k) = u(gen);
    return m;
}

std::vector<int> random_labels(long p, int c, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::vector<int> y(static_cast<std::size_t>(p));
    for (auto& v : y) v = static_cast<int>(gen() % static_cast<unsigned>(c));
    return y;
}

}  // namespace

TEST_CASE("uniform logits give ln C") {
    const Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(7, 3);
    const std::vector<int> labels{0, 1, 2, 0, 1, 2, 0};
    const ClassWeights gamma = ClassWeights::Ones(3);
    CHECK(dynamical_ce(logits, labels, gamma) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("gamma of ones equals the standard mean cross entropy bit for bit") {
    const Eigen::MatrixXd logits = random_logits(40, 3, 11);
    const auto labels = random_labels(40, 3, 12);
    const ClassWeights gamma = ClassWeights::Ones(3);
    CHECK(dynamical_ce(logits, labels, gamma) ==
          doctest::Approx(plain_mean_ce(logits, labels)).epsilon(1e-15));
}

TEST_CASE("single sample with gamma 2.5 and label probability one half") {
    // softmax([z, z - log 2 ... ]) puts probability 1/2 on the label when the
    // two off-label entries split the rest: choose logits (ln 2, 0, 0):
    // softmax = (2, 1, 1)/4, so p(label 0) = 1/2.
    Eigen::MatrixXd logits(1, 3);
    logits << std::log(2.0), 0.0, 0.0;
    ClassWeights gamma(3);
    gamma << 2.5, 0.25, 0.25;
    CHECK(dynamical_ce(logits, {0}, gamma) ==
          doctest::Approx(2.5 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("shift invariance per sample") {
    const Eigen::MatrixXd logits = random_logits(10, 4, 21);
    const auto labels = random_labels(10, 4, 22);
    ClassWeights gamma(4);
    gamma << 2.0, 0.5, 0.5, 1.0;
    Eigen::MatrixXd shifted = logits;
    for (long j = 0; j < shifted.rows(); ++j) shifted.row(j).array() += 100.0 * (j % 5 - 2);
    CHECK(dynamical_ce(shifted, labels, gamma) ==
          doctest::Approx(dynamical_ce(logits, labels, gamma)).epsilon(1e-12));
}

TEST_CASE("loss is linear in gamma") {
    const Eigen::MatrixXd logits = random_logits(25, 3, 31);
    const auto labels = random_labels(25, 3, 32);
    ClassWeights g1(3), g2(3);
    g1 << 2.0, 0.5, 0.5;
    g2 << 0.2, 1.4, 1.4;
    const double alpha = 0.3;
    const ClassWeights mix = alpha * g1 + (1 - alpha) * g2;
    CHECK(dynamical_ce(logits, labels, mix) ==
          doctest::Approx(alpha * dynamical_ce(logits, labels, g1) +
                          (1 - alpha) * dynamical_ce(logits, labels, g2))
              .epsilon(1e-13));
}

TEST_CASE("loss is nonnegative and safe at extreme logits") {
    Eigen::MatrixXd logits(2, 3);
    logits << 1e4, -1e4, -1e4, -1e4, 1e4, -1e4;
    const ClassWeights gamma = ClassWeights::Ones(3);
    const double correct = dynamical_ce(logits, {0, 1}, gamma);
    CHECK(std::isfinite(correct));
    CHECK(correct >= 0.0);
    CHECK(correct < 1e-30);  // effectively at the infinite-margin limit
    const double wrong = dynamical_ce(logits, {1, 0}, gamma);
    CHECK(std::isfinite(wrong));
    CHECK(wrong == doctest::Approx(2e4).epsilon(1e-10));
}

TEST_CASE("mse reference values") {
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(4, 3);
    const std::vector<int> labels{0, 1, 2, 1};
    for (int j = 0; j < 4; ++j) onehot(j, labels[static_cast<std::size_t>(j)]) = 1.0;
    CHECK(mse_loss(onehot, labels) == 0.0);

    const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(4, 3);
    CHECK(mse_loss(zeros, labels) == doctest::Approx(0.5).epsilon(1e-15));

    // Doubling all residuals quadruples the loss.
    const Eigen::MatrixXd logits = random_logits(6, 3, 41);
    const auto y = random_labels(6, 3, 42);
    Eigen::MatrixXd doubled(6, 3);
    for (long j = 0; j < 6; ++j)
        for (long k = 0; k < 3; ++k) {
            const double target = (k == y[static_cast<std::size_t>(j)]) ? 1.0 : 0.0;
            doubled(j, k) = target + 2.0 * (logits(j, k) - target);
        }
    CHECK(mse_loss(doubled, y) == doctest::Approx(4.0 * mse_loss(logits, y)).epsilon(1e-13));
}

TEST_CASE("residual vector layout and consistency with mse") {
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(3, 3);
    const std::vector<int> labels{0, 1, 2};
    for (int j = 0; j < 3; ++j) onehot(j, j) = 1.0;
    CHECK(residuals(onehot, labels).norm() == 0.0);

    const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(3, 3);
    const Eigen::VectorXd g = residuals(zeros, labels);
    REQUIRE(g.size() == 9);
    for (long j = 0; j < 3; ++j)
        for (long k = 0; k < 3; ++k)
            CHECK(g[j * 3 + k] == (k == j ? -1.0 : 0.0));

    const Eigen::MatrixXd logits = random_logits(20, 3, 51);
    const auto y = random_labels(20, 3, 52);
    const Eigen::VectorXd r = residuals(logits, y);
    CHECK(r.squaredNorm() / (2.0 * 20) ==
          doctest::Approx(mse_loss(logits, y)).epsilon(1e-14));
}

TEST_CASE("label validation") {
    const Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(2, 3);
    const ClassWeights gamma = ClassWeights::Ones(3);
    CHECK_THROWS_AS(dynamical_ce(logits, {0, 3}, gamma), std::invalid_argument);
    CHECK_THROWS_AS(dynamical_ce(logits, {0}, gamma), std::invalid_argument);
    CHECK_THROWS_AS(mse_loss(logits, {0, -1}), std::invalid_argument);
    ClassWeights bad(2);
    bad << 1.0, 1.0;
    CHECK_THROWS_AS(dynamical_ce(logits, {0, 1}, bad), std::invalid_argument);
}
