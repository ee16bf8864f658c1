#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>

#include "dynloss/model.hpp"
#include "dynloss/trainer.hpp"

namespace dynloss {

/// Checkpoint: binary header (magic "DLCK", format version, width, in_dim, C,
/// seed) followed by the flat parameter vector as little-endian doubles.
/// Round-trip is bit-exact.
struct Checkpoint {
    MlpShape shape;
    std::uint64_t seed = 0;
    Eigen::VectorXd flat;
};

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params,
                     std::uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Trace CSV: one row per completed step. Columns:
///   step,loss,delta_loss,train_accuracy,gamma0..gamma{C-1},
///   val_accuracy,hessian_eig0..hessian_eig{k-1},ntk_top_eig
/// Strided columns are empty on steps without a record; doubles use %.17g so
/// replays are byte-identical.
void save_trace_csv(const std::filesystem::path& path, const TrainTrace& trace,
                    int num_classes, int hessian_top_k);

/// Summary JSON: final accuracies, steps run, divergence report, instability
/// intervals and the threshold estimate.
void save_summary_json(const std::filesystem::path& path, const TrainTrace& trace);

/// Matrix dump: binary header (magic "DLMX", format version, rows, cols)
/// followed by row-major little-endian doubles.
void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const std::filesystem::path& path);

/// Formats a double exactly as the CSV writers do (%.17g).
std::string format_double(double v);

}  // namespace dynloss
