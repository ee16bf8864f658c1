#include "dynloss/trainer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dynloss/rng.hpp"
#include "dynloss/spectral.hpp"

namespace dynloss {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (total_steps < 0) throw std::invalid_argument("total_steps must be nonnegative");
    schedule.validate();
    if (spectra_stride && *spectra_stride < 1)
        throw std::invalid_argument("spectra_stride must be positive");
    if (hessian_top_k < 1) throw std::invalid_argument("hessian_top_k must be at least 1");
    if (lanczos_iters < hessian_top_k)
        throw std::invalid_argument("lanczos_iters must be at least hessian_top_k");
    if (val_stride < 1) throw std::invalid_argument("val_stride must be positive");
    if (!(divergence_guard > 0.0)) throw std::invalid_argument("divergence_guard must be positive");
}

TrainResult train(MlpParams params, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config) {
    config.validate();
    if (train_set.num_classes() != val_set.num_classes())
        throw std::invalid_argument("train and validation sets disagree on num_classes");
    if (train_set.num_classes() != params.shape().num_classes)
        throw std::invalid_argument("dataset num_classes does not match model");
    if (config.schedule.num_classes != train_set.num_classes())
        throw std::invalid_argument("schedule num_classes does not match dataset");

    TrainTrace trace;
    trace.loss.reserve(config.total_steps);
    trace.delta_loss.reserve(config.total_steps);
    trace.train_accuracy.reserve(config.total_steps);
    trace.gamma.reserve(config.total_steps);

    const double eta = config.learning_rate;
    for (long t = 0; t < config.total_steps; ++t) {
        const ClassWeights gamma = config.schedule.weights(t);
        const StepEval eval = loss_and_grad(params, train_set, gamma);
        if (!std::isfinite(eval.loss) || eval.loss > config.divergence_guard) {
            trace.diverged = true;
            trace.divergence_step = t;
            break;
        }

        trace.delta_loss.push_back(trace.loss.empty()
                                       ? std::numeric_limits<double>::quiet_NaN()
                                       : eval.loss - trace.loss.back());
        trace.loss.push_back(eval.loss);
        trace.train_accuracy.push_back(eval.train_accuracy);
        trace.gamma.emplace_back(gamma.data(), gamma.data() + gamma.size());

        if (config.spectra_stride && t % *config.spectra_stride == 0) {
            SpectraRecord rec;
            rec.step = t;
            const std::uint64_t lseed = mix_seed(config.seed, {4, static_cast<std::uint64_t>(t)});
            rec.hessian_top_eigs =
                hessian_top_k(params, train_set, gamma, config.hessian_top_k,
                              config.lanczos_iters, lseed)
                    .top_eigs;
            if (config.record_ntk)
                rec.ntk_top_eig =
                    ntk_top_eigenvalue(params, train_set, config.lanczos_iters, lseed);
            trace.spectra.push_back(std::move(rec));
        }
        if (t % config.val_stride == 0)
            trace.val_accuracy.emplace_back(t, accuracy(params, val_set));

        params.flat() -= eta * eval.grad;
        trace.steps_run = t + 1;
    }

    if (!trace.spectra.empty()) {
        std::vector<double> top_series;
        top_series.reserve(trace.spectra.size());
        for (const auto& rec : trace.spectra) top_series.push_back(rec.hessian_top_eigs.at(0));
        if (top_series.size() >= 2) {
            DetectionResult det = detect_instabilities(top_series);
            trace.threshold_estimate = det.threshold_estimate;
            for (const auto& iv : det.intervals)
                trace.instability_intervals.push_back(
                    {trace.spectra[iv.start].step, trace.spectra[iv.end].step});
        }
    }

    trace.final_train_accuracy = accuracy(params, train_set);
    trace.final_val_accuracy = accuracy(params, val_set);
    return {std::move(params), std::move(trace)};
}

DetectionResult detect_instabilities(const std::vector<double>& top_eig_series,
                                     double jump_threshold) {
    if (top_eig_series.size() < 2)
        throw std::invalid_argument("need at least 2 records to detect instabilities");

    DetectionResult out;
    double value_sum = 0.0;
    long value_count = 0;
    const long n = static_cast<long>(top_eig_series.size());
    long i = 1;
    while (i < n) {
        if (top_eig_series[i] - top_eig_series[i - 1] >= jump_threshold) {
            long j = i;
            while (j + 1 < n && top_eig_series[j + 1] - top_eig_series[j] >= jump_threshold) ++j;
            out.intervals.push_back({i, j});
            value_sum += top_eig_series[i] + top_eig_series[j];
            value_count += 2;
            i = j + 1;
        } else {
            ++i;
        }
    }
    if (value_count > 0) out.threshold_estimate = value_sum / static_cast<double>(value_count);
    return out;
}

}  // namespace dynloss
