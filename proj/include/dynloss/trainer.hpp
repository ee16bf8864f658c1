#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dynloss/dataset.hpp"
#include "dynloss/model.hpp"
#include "dynloss/schedule.hpp"

namespace dynloss {

struct TrainConfig {
    double learning_rate = 1.0;
    long total_steps = 35000;
    OscillationSchedule schedule;
    // Hessian/NTK spectra are recorded at steps t with t % *spectra_stride == 0;
    // nullopt disables spectral recording entirely.
    std::optional<long> spectra_stride = 50;
    int hessian_top_k = 3;
    int lanczos_iters = 60;
    bool record_ntk = false;  // NTK top eigenvalue per record (costly; off unless asked)
    long val_stride = 100;
    double divergence_guard = 1e6;
    std::uint64_t seed = 0;  // per-record Lanczos start vectors derive from this

    void validate() const;  // throws std::invalid_argument
};

/// Inclusive index range. From detect_instabilities the bounds index the
/// record series; in TrainTrace they are converted to training steps.
struct InstabilityInterval {
    long start = 0;
    long end = 0;
};

struct SpectraRecord {
    long step = 0;
    std::vector<double> hessian_top_eigs;  // descending, hessian_top_k values
    std::optional<double> ntk_top_eig;
};

struct TrainTrace {
    // Per-step arrays, one entry per completed step (loss is evaluated at the
    // pre-update parameters with that step's gamma).
    std::vector<double> loss;
    std::vector<double> delta_loss;  // loss[t] - loss[t-1]; NaN at t = 0
    std::vector<double> train_accuracy;
    std::vector<std::vector<double>> gamma;  // weight snapshot, C entries per step

    std::vector<std::pair<long, double>> val_accuracy;  // (step, accuracy), strided
    std::vector<SpectraRecord> spectra;

    std::vector<InstabilityInterval> instability_intervals;  // in steps
    std::optional<double> threshold_estimate;

    long steps_run = 0;
    bool diverged = false;
    long divergence_step = -1;  // step whose loss failed the guard; -1 if none

    double final_train_accuracy = 0.0;
    double final_val_accuracy = 0.0;
};

struct TrainResult {
    MlpParams params;
    TrainTrace trace;
};

/// Full-batch gradient descent on the dynamical loss:
///   w <- w - eta * grad F(w, gamma(t)),  t = 0 .. total_steps-1.
/// A non-finite or guard-exceeding loss aborts the run, keeping the last
/// finite trace; divergence is reported in the trace, not thrown.
TrainResult train(MlpParams params, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config);

struct DetectionResult {
    std::vector<InstabilityInterval> intervals;  // indices into the series
    std::optional<double> threshold_estimate;
};

/// Instability detection on a top-eigenvalue record series: an interval is a
/// maximal run of consecutive records whose increment over the previous record
/// is >= jump_threshold. threshold_estimate averages the series values at
/// every interval start and end; absent when no interval is found.
DetectionResult detect_instabilities(const std::vector<double>& top_eig_series,
                                     double jump_threshold = 0.1);

}  // namespace dynloss
