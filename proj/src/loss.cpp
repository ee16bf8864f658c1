#include "dynloss/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace dynloss {

namespace {

void check_labels(const Eigen::MatrixXd& logits, const std::vector<int>& labels, long num_classes) {
    if (static_cast<long>(labels.size()) != logits.rows()) {
        throw std::invalid_argument("loss: label count does not match logit rows");
    }
    for (int y : labels) {
        if (y < 0 || y >= num_classes) {
            throw std::invalid_argument("loss: label out of range");
        }
    }
}

}  // namespace

double dynamical_ce(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                    const ClassWeights& gamma) {
    const long p = logits.rows();
    const long c = logits.cols();
    check_labels(logits, labels, c);
    if (gamma.size() != c) {
        throw std::invalid_argument("dynamical_ce: gamma length does not match class count");
    }

    double total = 0.0;
    for (long j = 0; j < p; ++j) {
        const double zmax = logits.row(j).maxCoeff();
        double sum_exp = 0.0;
        for (long k = 0; k < c; ++k) {
            sum_exp += std::exp(logits(j, k) - zmax);
        }
        const double log_prob = (logits(j, labels[static_cast<std::size_t>(j)]) - zmax) - std::log(sum_exp);
        total += gamma[labels[static_cast<std::size_t>(j)]] * (-log_prob);
    }
    return total / static_cast<double>(p);
}

double mse_loss(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
    const long p = logits.rows();
    check_labels(logits, labels, logits.cols());
    double total = 0.0;
    for (long j = 0; j < p; ++j) {
        for (long k = 0; k < logits.cols(); ++k) {
            const double target = (k == labels[static_cast<std::size_t>(j)]) ? 1.0 : 0.0;
            const double diff = logits(j, k) - target;
            total += diff * diff;
        }
    }
    return total / (2.0 * static_cast<double>(p));
}

Eigen::VectorXd residuals(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
    const long p = logits.rows();
    const long c = logits.cols();
    check_labels(logits, labels, c);
    Eigen::VectorXd g(p * c);
    for (long j = 0; j < p; ++j) {
        for (long k = 0; k < c; ++k) {
            const double target = (k == labels[static_cast<std::size_t>(j)]) ? 1.0 : 0.0;
            g[j * c + k] = logits(j, k) - target;
        }
    }
    return g;
}

}  // namespace dynloss
