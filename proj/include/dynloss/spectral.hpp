#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "dynloss/dataset.hpp"
#include "dynloss/model.hpp"
#include "dynloss/schedule.hpp"

namespace dynloss {

/// Result of a Krylov eigenvalue estimate. top_eigs is sorted descending;
/// residual_norms[i] = |beta_m * s_{m,i}| bounds the distance from top_eigs[i]
/// to the true spectrum of the operator.
struct SpectrumEstimate {
    std::vector<double> top_eigs;
    std::vector<double> residual_norms;
    int iterations = 0;
    bool breakdown = false;  // Krylov space became invariant before max_iters
};

/// Lanczos with full reorthogonalization on a symmetric operator given only
/// matrix-vector products. Start vector is random unit from seed; deterministic
/// for a fixed seed. On breakdown (zero beta) returns the Ritz values found so
/// far with the flag set.
SpectrumEstimate lanczos_top_k(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
                               long dim, int k, int iters, std::uint64_t seed);

/// Convenience overload for the loss Hessian at (params, data, gamma).
SpectrumEstimate hessian_top_k(const MlpParams& params, const Dataset& data,
                               const ClassWeights& gamma, int k, int iters,
                               std::uint64_t seed);

/// Dense Hessian assembled column by column via HVPs against basis vectors.
/// Refuses above max_dim (test oracle; not meant for big nets).
Eigen::MatrixXd dense_hessian(const MlpParams& params, const Dataset& data,
                              const ClassWeights& gamma, long max_dim = 500);

/// Empirical NTK from an output Jacobian: Theta = J J^T, (P*C) x (P*C).
Eigen::MatrixXd ntk(const Eigen::MatrixXd& jacobian);

/// NTK of the model at (params, data), forming the Jacobian internally.
Eigen::MatrixXd ntk(const MlpParams& params, const Dataset& data);

/// Largest NTK eigenvalue via Lanczos on v -> J (J^T v), without forming Theta.
double ntk_top_eigenvalue(const MlpParams& params, const Dataset& data, int iters,
                          std::uint64_t seed);

/// Stability of one NTK eigenmode under the discrete-time linearized dynamics,
/// classified by the multiplier mu = 1 - (eta/n) lambda.
enum class StabilityRegime {
    kStable,                 // 0 < mu < 1: monotone decay
    kOscillatoryConvergent,  // -1 < mu <= 0: sign-flipping decay
    kDivergent,              // mu <= -1: sign-flipping growth
    kStableMarginal,         // mu >= 1 (lambda <= 0 edge): no decay
};

StabilityRegime classify_stability(double lambda, double eta, double n);

const char* to_string(StabilityRegime regime);

/// Linearized residual dynamics under a frozen kernel: g <- g - (eta/n) Theta g,
/// iterated in the original basis. mode_coeffs(t, i) = <u_i, g_t> with u_i the
/// eigenvectors of Theta (ascending eigenvalue order, as returned by the dense
/// symmetric eigensolver), so each column should follow mu_i^t times its start.
struct DiscreteNtkSim {
    std::vector<double> residual_norms;  // ||g|| after each step
    Eigen::MatrixXd mode_coeffs;         // steps-recorded x dim
    Eigen::VectorXd eigenvalues;         // of Theta, ascending
    bool overflowed = false;             // series truncated at the guard
};

DiscreteNtkSim simulate_discrete_ntk(const Eigen::MatrixXd& theta, const Eigen::VectorXd& g0,
                                     double eta, double n, int steps,
                                     double overflow_guard = 1e12);

/// Least-squares fit of log(threshold) = intercept + exponent * log(eta).
struct PowerLawFit {
    double exponent = 0.0;
    double intercept = 0.0;  // in log space
    double r_squared = 0.0;
};

PowerLawFit fit_threshold_exponent(const std::vector<double>& etas,
                                   const std::vector<double>& thresholds);

}  // namespace dynloss
