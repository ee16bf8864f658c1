#include "dynloss/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dynloss/rng.hpp"

namespace dynloss {

SpectrumEstimate lanczos_top_k(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
                               long dim, int k, int iters, std::uint64_t seed) {
    if (dim <= 0) throw std::invalid_argument("operator dimension must be positive");
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    if (iters < k) throw std::invalid_argument("iters must be at least k");
    const int m_max = static_cast<int>(std::min<long>(iters, dim));

    GaussianStream gs(seed);
    Eigen::MatrixXd basis(dim, m_max);  // orthonormal Lanczos vectors as columns
    Eigen::VectorXd q(dim);
    for (long i = 0; i < dim; ++i) q[i] = gs.next();
    q.normalize();
    basis.col(0) = q;

    Eigen::VectorXd alphas(m_max), betas(m_max);
    bool breakdown = false;
    int m = 0;
    for (; m < m_max; ++m) {
        Eigen::VectorXd w = op(basis.col(m));
        alphas[m] = basis.col(m).dot(w);
        // Full reorthogonalization, twice (classical Gram-Schmidt repeated):
        // removes components along every previous vector, so no ghost copies
        // of converged eigenvalues appear.
        for (int pass = 0; pass < 2; ++pass)
            w -= basis.leftCols(m + 1) * (basis.leftCols(m + 1).transpose() * w);
        const double beta = w.norm();
        betas[m] = beta;
        if (m + 1 == m_max) break;
        if (beta < 1e-12) {
            breakdown = true;  // Krylov space is invariant; Ritz values exact
            break;
        }
        basis.col(m + 1) = w / beta;
    }
    const int steps = std::min(m + 1, m_max);

    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(steps, steps);
    for (int i = 0; i < steps; ++i) {
        tri(i, i) = alphas[i];
        if (i + 1 < steps) tri(i, i + 1) = tri(i + 1, i) = betas[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);

    SpectrumEstimate out;
    out.iterations = steps;
    out.breakdown = breakdown;
    const double beta_last = breakdown ? 0.0 : betas[steps - 1];
    const int avail = std::min(k, steps);
    for (int i = 0; i < avail; ++i) {
        const int col = steps - 1 - i;  // eigensolver sorts ascending
        out.top_eigs.push_back(es.eigenvalues()[col]);
        out.residual_norms.push_back(std::abs(beta_last * es.eigenvectors()(steps - 1, col)));
    }
    return out;
}

SpectrumEstimate hessian_top_k(const MlpParams& params, const Dataset& data,
                               const ClassWeights& gamma, int k, int iters,
                               std::uint64_t seed) {
    HessianOperator h(params, data, gamma);
    return lanczos_top_k([&h](const Eigen::VectorXd& v) { return h.apply(v); }, h.dim(), k,
                         iters, seed);
}

Eigen::MatrixXd dense_hessian(const MlpParams& params, const Dataset& data,
                              const ClassWeights& gamma, long max_dim) {
    const long n = params.n_params();
    if (n > max_dim)
        throw std::invalid_argument("dense_hessian: n_params " + std::to_string(n) +
                                    " exceeds cap " + std::to_string(max_dim));
    HessianOperator op(params, data, gamma);
    Eigen::MatrixXd h(n, n);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    for (long p = 0; p < n; ++p) {
        e[p] = 1.0;
        h.col(p) = op.apply(e);
        e[p] = 0.0;
    }
    return h;
}

Eigen::MatrixXd ntk(const Eigen::MatrixXd& jacobian) {
    if (!jacobian.allFinite()) throw std::invalid_argument("jacobian has non-finite entries");
    return jacobian * jacobian.transpose();
}

Eigen::MatrixXd ntk(const MlpParams& params, const Dataset& data) {
    return ntk(output_jacobian(params, data));
}

double ntk_top_eigenvalue(const MlpParams& params, const Dataset& data, int iters,
                          std::uint64_t seed) {
    // Theta v = J (J^T v): two matrix products per application, never forming
    // the (P*C)^2 kernel. Build the Jacobian once; for the reference sizes
    // (900 x 6003) that is the cheap part.
    const Eigen::MatrixXd jac = output_jacobian(params, data);
    const long dim = jac.rows();
    auto op = [&jac](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return jac * (jac.transpose() * v);
    };
    const SpectrumEstimate est =
        lanczos_top_k(op, dim, 1, std::min<int>(iters, static_cast<int>(dim)), seed);
    return est.top_eigs.at(0);
}

StabilityRegime classify_stability(double lambda, double eta, double n) {
    if (eta <= 0.0) throw std::invalid_argument("eta must be positive");
    if (n <= 0.0) throw std::invalid_argument("n must be positive");
    const double mu = 1.0 - (eta / n) * lambda;
    if (mu >= 1.0) return StabilityRegime::kStableMarginal;
    if (mu > 0.0) return StabilityRegime::kStable;
    if (mu > -1.0) return StabilityRegime::kOscillatoryConvergent;
    return StabilityRegime::kDivergent;
}

const char* to_string(StabilityRegime regime) {
    switch (regime) {
        case StabilityRegime::kStable: return "stable";
        case StabilityRegime::kOscillatoryConvergent: return "oscillatory_convergent";
        case StabilityRegime::kDivergent: return "divergent";
        case StabilityRegime::kStableMarginal: return "stable_marginal";
    }
    return "unknown";
}

DiscreteNtkSim simulate_discrete_ntk(const Eigen::MatrixXd& theta, const Eigen::VectorXd& g0,
                                     double eta, double n, int steps, double overflow_guard) {
    if (theta.rows() != theta.cols()) throw std::invalid_argument("theta must be square");
    if (g0.size() != theta.rows()) throw std::invalid_argument("g0 size does not match theta");
    if (steps < 0) throw std::invalid_argument("steps must be nonnegative");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(theta);
    DiscreteNtkSim sim;
    sim.eigenvalues = es.eigenvalues();
    sim.mode_coeffs.resize(steps, theta.rows());
    sim.residual_norms.reserve(steps);

    const double scale = eta / n;
    Eigen::VectorXd g = g0;
    int recorded = 0;
    for (int t = 0; t < steps; ++t) {
        g -= scale * (theta * g);
        const double norm = g.norm();
        if (!std::isfinite(norm) || norm > overflow_guard) {
            sim.overflowed = true;
            break;
        }
        sim.residual_norms.push_back(norm);
        sim.mode_coeffs.row(recorded++) = (es.eigenvectors().transpose() * g).transpose();
    }
    sim.mode_coeffs.conservativeResize(recorded, Eigen::NoChange);
    return sim;
}

PowerLawFit fit_threshold_exponent(const std::vector<double>& etas,
                                   const std::vector<double>& thresholds) {
    if (etas.size() != thresholds.size())
        throw std::invalid_argument("etas and thresholds differ in length");
    if (etas.size() < 3) throw std::invalid_argument("need at least 3 points for the fit");
    const auto n = static_cast<double>(etas.size());

    std::vector<double> lx(etas.size()), ly(etas.size());
    for (std::size_t i = 0; i < etas.size(); ++i) {
        if (etas[i] <= 0.0 || thresholds[i] <= 0.0)
            throw std::invalid_argument("power-law fit requires positive etas and thresholds");
        lx[i] = std::log(etas[i]);
        ly[i] = std::log(thresholds[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("all etas equal; slope undefined");

    PowerLawFit fit;
    fit.exponent = sxy / sxx;
    fit.intercept = my - fit.exponent * mx;
    fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

}  // namespace dynloss
