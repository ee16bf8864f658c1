#include "dynloss/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dynloss/rng.hpp"

namespace dynloss {

namespace {

void check_shape(const MlpShape& shape) {
    if (shape.width <= 0) throw std::invalid_argument("width must be positive");
    if (shape.in_dim <= 0) throw std::invalid_argument("in_dim must be positive");
    if (shape.num_classes < 2) throw std::invalid_argument("num_classes must be at least 2");
}

// Softmax with per-row max shift; stable for any logit scale.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd s(logits.rows(), logits.cols());
    for (Eigen::Index j = 0; j < logits.rows(); ++j) {
        const double m = logits.row(j).maxCoeff();
        s.row(j) = (logits.row(j).array() - m).exp();
        s.row(j) /= s.row(j).sum();
    }
    return s;
}

}  // namespace

MlpParams::MlpParams(MlpShape shape) : shape_(shape) {
    check_shape(shape_);
    flat_ = Eigen::VectorXd::Zero(shape_.n_params());
}

MlpParams MlpParams::random_init(MlpShape shape, std::uint64_t seed) {
    MlpParams p(shape);
    GaussianStream gs(seed);
    // Draw order is part of the reproducibility contract: W1 entries in flat
    // (row-major) order, then W2 entries. Biases stay zero.
    const double sd1 = 1.0 / std::sqrt(static_cast<double>(shape.in_dim));
    const double sd2 = 1.0 / std::sqrt(static_cast<double>(shape.width));
    auto w1 = p.w1();
    for (int r = 0; r < shape.width; ++r)
        for (int c = 0; c < shape.in_dim; ++c) w1(r, c) = sd1 * gs.next();
    auto w2 = p.w2();
    for (int r = 0; r < shape.num_classes; ++r)
        for (int c = 0; c < shape.width; ++c) w2(r, c) = sd2 * gs.next();
    return p;
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixX2d& x) {
    const Eigen::MatrixXd z1 =
        (x * params.w1().transpose()).rowwise() + params.b1().transpose();
    const Eigen::MatrixXd h = z1.cwiseMax(0.0);
    return (h * params.w2().transpose()).rowwise() + params.b2().transpose();
}

double accuracy(const MlpParams& params, const Dataset& data) {
    const Eigen::MatrixXd logits = forward(params, data.points());
    long correct = 0;
    for (Eigen::Index j = 0; j < logits.rows(); ++j) {
        Eigen::Index best = 0;
        logits.row(j).maxCoeff(&best);  // Eigen returns the first maximum
        if (static_cast<int>(best) == data.labels()[j]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

StepEval loss_and_grad(const MlpParams& params, const Dataset& data, const ClassWeights& gamma) {
    const MlpShape& shape = params.shape();
    if (gamma.size() != shape.num_classes)
        throw std::invalid_argument("gamma size does not match num_classes");
    if (data.num_classes() != shape.num_classes)
        throw std::invalid_argument("dataset num_classes does not match model");

    const Eigen::Index p_count = data.size();
    const Eigen::MatrixXd z1 =
        (data.points() * params.w1().transpose()).rowwise() + params.b1().transpose();
    const Eigen::MatrixXd h = z1.cwiseMax(0.0);
    const Eigen::MatrixXd logits =
        (h * params.w2().transpose()).rowwise() + params.b2().transpose();
    const Eigen::MatrixXd s = softmax_rows(logits);

    double total = 0.0;
    long correct = 0;
    // dF/dlogits for the mean loss: (gamma_y / P) * (softmax - onehot).
    Eigen::MatrixXd g2 = s;
    for (Eigen::Index j = 0; j < p_count; ++j) {
        const int y = data.labels()[j];
        const double m = logits.row(j).maxCoeff();
        const double lse = m + std::log((logits.row(j).array() - m).exp().sum());
        total += gamma[y] * (lse - logits(j, y));
        g2(j, y) -= 1.0;
        g2.row(j) *= gamma[y] / static_cast<double>(p_count);
        Eigen::Index best = 0;
        logits.row(j).maxCoeff(&best);
        if (static_cast<int>(best) == y) ++correct;
    }

    StepEval out;
    out.loss = total / static_cast<double>(p_count);
    out.train_accuracy = static_cast<double>(correct) / static_cast<double>(p_count);
    out.grad.resize(params.n_params());
    RowMajorMap gw1(out.grad.data(), shape.width, shape.in_dim);
    Eigen::Map<Eigen::VectorXd> gb1(out.grad.data() + params.off_b1(), shape.width);
    RowMajorMap gw2(out.grad.data() + params.off_w2(), shape.num_classes, shape.width);
    Eigen::Map<Eigen::VectorXd> gb2(out.grad.data() + params.off_b2(), shape.num_classes);

    gw2 = g2.transpose() * h;
    gb2 = g2.colwise().sum();
    const Eigen::MatrixXd mask = (z1.array() > 0.0).cast<double>();
    const Eigen::MatrixXd g1 = (g2 * params.w2()).cwiseProduct(mask);
    gw1 = g1.transpose() * data.points();
    gb1 = g1.colwise().sum();
    return out;
}

Eigen::VectorXd grad_loss(const MlpParams& params, const Dataset& data, const ClassWeights& gamma) {
    return loss_and_grad(params, data, gamma).grad;
}

HessianOperator::HessianOperator(const MlpParams& params, const Dataset& data,
                                 const ClassWeights& gamma)
    : shape_(params.shape()), n_params_(params.n_params()) {
    if (gamma.size() != shape_.num_classes)
        throw std::invalid_argument("gamma size does not match num_classes");
    if (data.num_classes() != shape_.num_classes)
        throw std::invalid_argument("dataset num_classes does not match model");

    x_ = data.points();
    labels_ = data.labels();
    w1_ = params.w1();
    w2_ = params.w2();
    const Eigen::MatrixXd z1 = (x_ * w1_.transpose()).rowwise() + params.b1().transpose();
    mask_ = (z1.array() > 0.0).cast<double>();
    hidden_ = z1.cwiseMax(0.0);
    const Eigen::MatrixXd logits =
        (hidden_ * w2_.transpose()).rowwise() + params.b2().transpose();
    softmax_ = softmax_rows(logits);
    g2_ = softmax_;
    const double inv_p = 1.0 / static_cast<double>(x_.rows());
    for (Eigen::Index j = 0; j < g2_.rows(); ++j) {
        const int y = labels_[j];
        g2_(j, y) -= 1.0;
        g2_.row(j) *= gamma[y] * inv_p;
    }
    gamma_over_p_.resize(x_.rows());
    for (Eigen::Index j = 0; j < x_.rows(); ++j) gamma_over_p_[j] = gamma[labels_[j]] * inv_p;
}

Eigen::VectorXd HessianOperator::apply(const Eigen::VectorXd& v) const {
    if (v.size() != n_params_) throw std::invalid_argument("vector size does not match n_params");

    const MlpShape& sh = shape_;
    const long off_b1 = static_cast<long>(sh.width) * sh.in_dim;
    const long off_w2 = off_b1 + sh.width;
    const long off_b2 = off_w2 + static_cast<long>(sh.num_classes) * sh.width;
    ConstRowMajorMap v1(v.data(), sh.width, sh.in_dim);
    Eigen::Map<const Eigen::VectorXd> c1(v.data() + off_b1, sh.width);
    ConstRowMajorMap v2(v.data() + off_w2, sh.num_classes, sh.width);
    Eigen::Map<const Eigen::VectorXd> c2(v.data() + off_b2, sh.num_classes);

    // Forward sweep of the directional derivative (R-operator).
    const Eigen::MatrixXd rz1 = (x_ * v1.transpose()).rowwise() + c1.transpose();
    const Eigen::MatrixXd rh = mask_.cwiseProduct(rz1);
    const Eigen::MatrixXd rz2 =
        ((rh * w2_.transpose() + hidden_ * v2.transpose()).rowwise() + c2.transpose());

    // R(softmax) row-wise: s .* (rz2 - <s, rz2>).
    Eigen::MatrixXd rs(rz2.rows(), rz2.cols());
    for (Eigen::Index j = 0; j < rz2.rows(); ++j) {
        const double dot = softmax_.row(j).dot(rz2.row(j));
        rs.row(j) = softmax_.row(j).cwiseProduct(
            (rz2.row(j).array() - dot).matrix());
    }
    const Eigen::MatrixXd rg2 = gamma_over_p_.asDiagonal() * rs;

    Eigen::VectorXd out(n_params_);
    RowMajorMap ow1(out.data(), sh.width, sh.in_dim);
    Eigen::Map<Eigen::VectorXd> ob1(out.data() + off_b1, sh.width);
    RowMajorMap ow2(out.data() + off_w2, sh.num_classes, sh.width);
    Eigen::Map<Eigen::VectorXd> ob2(out.data() + off_b2, sh.num_classes);

    ow2 = rg2.transpose() * hidden_ + g2_.transpose() * rh;
    ob2 = rg2.colwise().sum();
    const Eigen::MatrixXd rg1 = (rg2 * w2_ + g2_ * v2).cwiseProduct(mask_);
    ow1 = rg1.transpose() * x_;
    ob1 = rg1.colwise().sum();
    return out;
}

Eigen::VectorXd hvp(const MlpParams& params, const Dataset& data, const ClassWeights& gamma,
                    const Eigen::VectorXd& v) {
    return HessianOperator(params, data, gamma).apply(v);
}

Eigen::MatrixXd output_jacobian(const MlpParams& params, const Dataset& data,
                                std::size_t max_bytes) {
    const MlpShape& sh = params.shape();
    if (data.num_classes() != sh.num_classes)
        throw std::invalid_argument("dataset num_classes does not match model");
    const long rows = data.size() * static_cast<long>(sh.num_classes);
    const long cols = params.n_params();
    const std::size_t bytes =
        static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * sizeof(double);
    if (bytes > max_bytes)
        throw std::invalid_argument("output_jacobian would need " + std::to_string(bytes) +
                                    " bytes, above the cap of " + std::to_string(max_bytes));

    const Eigen::MatrixXd z1 =
        (data.points() * params.w1().transpose()).rowwise() + params.b1().transpose();
    const Eigen::MatrixXd mask = (z1.array() > 0.0).cast<double>();
    const Eigen::MatrixXd h = z1.cwiseMax(0.0);
    const auto w2 = params.w2();
    const long off_b1 = params.off_b1();
    const long off_w2 = params.off_w2();
    const long off_b2 = params.off_b2();

    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(rows, cols);
    for (Eigen::Index j = 0; j < data.size(); ++j) {
        for (int k = 0; k < sh.num_classes; ++k) {
            const long row = j * sh.num_classes + k;
            // d logits(j,k) / d W1(r,c) = W2(k,r) * mask(j,r) * x(j,c)
            for (int r = 0; r < sh.width; ++r) {
                const double gate = w2(k, r) * mask(j, r);
                if (gate == 0.0) continue;
                for (int c = 0; c < sh.in_dim; ++c)
                    jac(row, static_cast<long>(r) * sh.in_dim + c) = gate * data.points()(j, c);
                jac(row, off_b1 + r) = gate;
            }
            // d logits(j,k) / d W2(k,:) = hidden(j,:)
            for (int r = 0; r < sh.width; ++r)
                jac(row, off_w2 + static_cast<long>(k) * sh.width + r) = h(j, r);
            jac(row, off_b2 + k) = 1.0;
        }
    }
    return jac;
}

}  // namespace dynloss
