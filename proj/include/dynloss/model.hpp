#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <cstddef>
#include <vector>

#include "dynloss/dataset.hpp"
#include "dynloss/schedule.hpp"

namespace dynloss {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMajorMap = Eigen::Map<RowMajorMatrix>;
using ConstRowMajorMap = Eigen::Map<const RowMajorMatrix>;

struct MlpShape {
    int width = 100;
    int in_dim = 2;
    int num_classes = 3;

    long n_params() const {
        return static_cast<long>(width) * in_dim + width +
               static_cast<long>(num_classes) * width + num_classes;
    }
};

/// Parameters of a one-hidden-layer ReLU classifier,
///   logits = W2 * relu(W1 * x + b1) + b2,
/// stored as a single flat coordinate vector in the fixed order
/// (W1 row-major, b1, W2 row-major, b2). The shaped accessors are Eigen maps
/// onto that vector, so flat and shaped views always alias the same values.
/// Checkpoints, Hessian-vector products and Lanczos all rely on this order.
class MlpParams {
public:
    explicit MlpParams(MlpShape shape);

    /// Weights ~ Normal(0, 1 / fan_in), biases exactly zero.
    static MlpParams random_init(MlpShape shape, std::uint64_t seed);

    const MlpShape& shape() const { return shape_; }
    long n_params() const { return flat_.size(); }

    Eigen::VectorXd& flat() { return flat_; }
    const Eigen::VectorXd& flat() const { return flat_; }

    RowMajorMap w1() { return {flat_.data(), shape_.width, shape_.in_dim}; }
    ConstRowMajorMap w1() const { return {flat_.data(), shape_.width, shape_.in_dim}; }
    Eigen::Map<Eigen::VectorXd> b1() { return {flat_.data() + off_b1(), shape_.width}; }
    Eigen::Map<const Eigen::VectorXd> b1() const { return {flat_.data() + off_b1(), shape_.width}; }
    RowMajorMap w2() { return {flat_.data() + off_w2(), shape_.num_classes, shape_.width}; }
    ConstRowMajorMap w2() const { return {flat_.data() + off_w2(), shape_.num_classes, shape_.width}; }
    Eigen::Map<Eigen::VectorXd> b2() { return {flat_.data() + off_b2(), shape_.num_classes}; }
    Eigen::Map<const Eigen::VectorXd> b2() const { return {flat_.data() + off_b2(), shape_.num_classes}; }

    long off_w1() const { return 0; }
    long off_b1() const { return static_cast<long>(shape_.width) * shape_.in_dim; }
    long off_w2() const { return off_b1() + shape_.width; }
    long off_b2() const { return off_w2() + static_cast<long>(shape_.num_classes) * shape_.width; }

private:
    MlpShape shape_;
    Eigen::VectorXd flat_;
};

/// Logits for every sample: P x C.
Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixX2d& x);

/// Fraction of samples whose argmax logit equals the label; ties break toward
/// the smallest class index.
double accuracy(const MlpParams& params, const Dataset& data);

struct StepEval {
    double loss = 0.0;
    double train_accuracy = 0.0;
    Eigen::VectorXd grad;
};

/// Loss, accuracy and exact gradient of the weighted mean cross entropy in a
/// single fused pass. grad_loss() is a thin wrapper.
StepEval loss_and_grad(const MlpParams& params, const Dataset& data, const ClassWeights& gamma);

Eigen::VectorXd grad_loss(const MlpParams& params, const Dataset& data, const ClassWeights& gamma);

/// Exact Hessian-vector products of the weighted mean cross entropy at a
/// fixed (params, data, gamma), by forward-over-reverse differentiation.
/// The forward state is computed once at construction, so each apply() costs
/// about one extra forward+backward pass. The ReLU second derivative is taken
/// as zero everywhere (relu'(0) := 0), so the operator is the a.e. Hessian.
class HessianOperator {
public:
    HessianOperator(const MlpParams& params, const Dataset& data, const ClassWeights& gamma);

    long dim() const { return n_params_; }
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

private:
    MlpShape shape_;
    long n_params_;
    Eigen::MatrixX2d x_;
    std::vector<int> labels_;
    Eigen::MatrixXd mask_;      // relu'(z1), P x width
    Eigen::MatrixXd hidden_;    // relu(z1), P x width
    Eigen::MatrixXd softmax_;   // P x C
    Eigen::MatrixXd g2_;        // dL/dlogits, P x C
    Eigen::VectorXd gamma_over_p_;  // gamma_{y_j} / P per sample
    Eigen::MatrixXd w1_, w2_;
};

Eigen::VectorXd hvp(const MlpParams& params, const Dataset& data, const ClassWeights& gamma,
                    const Eigen::VectorXd& v);

/// Jacobian of all logits with respect to the flat parameters: row (j*C + k)
/// holds d logits(j,k) / d params. Refuses to allocate above max_bytes.
Eigen::MatrixXd output_jacobian(const MlpParams& params, const Dataset& data,
                                std::size_t max_bytes = std::size_t{1} << 31);

}  // namespace dynloss
