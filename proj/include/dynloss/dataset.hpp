#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace dynloss {

struct LabeledPoint {
    Eigen::Vector2d x;
    int label = 0;
};

/// Immutable labeled 2-D point set. Points are stored as a P x 2 matrix so
/// the model can operate on the whole batch at once.
class Dataset {
public:
    Dataset(Eigen::MatrixX2d points, std::vector<int> labels, int num_classes);

    long size() const { return points_.rows(); }
    int num_classes() const { return num_classes_; }
    const Eigen::MatrixX2d& points() const { return points_; }
    const std::vector<int>& labels() const { return labels_; }
    LabeledPoint point(long i) const { return {points_.row(i).transpose(), labels_[i]}; }

private:
    Eigen::MatrixX2d points_;
    std::vector<int> labels_;
    int num_classes_;
};

/// Parameters of the spiral generator. For class j and sample index i,
///   r = i / (n_per_class - 1)
///   theta = 4 j + 4 turns r + eps,   eps ~ Normal(0, noise_sd^2)
///   point = (r sin theta, r cos theta)
/// turns = 1 is the classic three-arm teaching spiral; larger values wind the
/// arms tighter and make the classification problem harder.
struct SpiralSpec {
    long n_per_class = 100;
    int num_classes = 3;
    double noise_sd = 0.2;
    double turns = 1.0;
};

Dataset generate_spiral(const SpiralSpec& spec, std::uint64_t seed);
Dataset generate_spiral(long n_per_class, int num_classes, double noise_sd, std::uint64_t seed);

/// CSV layout: header "x0,x1,label,C=<num_classes>", one point per row,
/// coordinates printed with enough digits to round-trip doubles exactly.
void save_csv(const Dataset& d, const std::filesystem::path& path);
Dataset load_csv(const std::filesystem::path& path);

}  // namespace dynloss
