#include "dynloss/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dynloss/errors.hpp"
#include "dynloss/rng.hpp"

namespace dynloss {

Dataset::Dataset(Eigen::MatrixX2d points, std::vector<int> labels, int num_classes)
    : points_(std::move(points)), labels_(std::move(labels)), num_classes_(num_classes) {
    if (points_.rows() == 0) {
        throw std::invalid_argument("empty dataset");
    }
    if (static_cast<long>(labels_.size()) != points_.rows()) {
        throw std::invalid_argument("dataset: label count does not match point count");
    }
    if (num_classes_ < 2) {
        throw std::invalid_argument("dataset: num_classes must be >= 2");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] < 0 || labels_[i] >= num_classes_) {
            throw std::invalid_argument("dataset: label out of range at row " + std::to_string(i));
        }
        if (!std::isfinite(points_(static_cast<long>(i), 0)) ||
            !std::isfinite(points_(static_cast<long>(i), 1))) {
            throw std::invalid_argument("dataset: non-finite coordinate at row " + std::to_string(i));
        }
    }
}

Dataset generate_spiral(const SpiralSpec& spec, std::uint64_t seed) {
    if (spec.n_per_class < 1) {
        throw std::invalid_argument("generate_spiral: n_per_class must be >= 1");
    }
    if (spec.num_classes < 2) {
        throw std::invalid_argument("generate_spiral: num_classes must be >= 2");
    }
    if (spec.noise_sd < 0.0) {
        throw std::invalid_argument("generate_spiral: noise_sd must be >= 0");
    }

    const long n = spec.n_per_class;
    const int c = spec.num_classes;
    Eigen::MatrixX2d pts(n * c, 2);
    std::vector<int> labels(static_cast<std::size_t>(n * c));

    GaussianStream noise(seed);
    long row = 0;
    for (int j = 0; j < c; ++j) {
        for (long i = 0; i < n; ++i, ++row) {
            const double r = (n == 1) ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
            const double theta = 4.0 * j + 4.0 * spec.turns * r + spec.noise_sd * noise.next();
            pts(row, 0) = r * std::sin(theta);
            pts(row, 1) = r * std::cos(theta);
            labels[static_cast<std::size_t>(row)] = j;
        }
    }
    return Dataset(std::move(pts), std::move(labels), c);
}

Dataset generate_spiral(long n_per_class, int num_classes, double noise_sd, std::uint64_t seed) {
    SpiralSpec spec;
    spec.n_per_class = n_per_class;
    spec.num_classes = num_classes;
    spec.noise_sd = noise_sd;
    return generate_spiral(spec, seed);
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("save_csv: cannot open " + path.string());
    }
    out << "x0,x1,label,C=" << d.num_classes() << "\n";
    char buf[64];
    for (long i = 0; i < d.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", d.points()(i, 0));
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", d.points()(i, 1));
        out << buf << ',' << d.labels()[static_cast<std::size_t>(i)] << "\n";
    }
    if (!out) {
        throw IoError("save_csv: write failed for " + path.string());
    }
}

namespace {

double parse_double(const std::string& field, long row) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &pos);
    } catch (const std::exception&) {
        throw IoError("load_csv: non-numeric coordinate at row " + std::to_string(row));
    }
    if (pos != field.size()) {
        throw IoError("load_csv: non-numeric coordinate at row " + std::to_string(row));
    }
    return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("load_csv: cannot open " + path.string());
    }
    std::string header;
    if (!std::getline(in, header) || header.empty()) {
        throw IoError("load_csv: empty dataset in " + path.string());
    }
    const std::string prefix = "x0,x1,label,C=";
    if (header.rfind(prefix, 0) != 0) {
        throw IoError("load_csv: malformed header in " + path.string());
    }
    int num_classes = 0;
    try {
        num_classes = std::stoi(header.substr(prefix.size()));
    } catch (const std::exception&) {
        throw IoError("load_csv: malformed class count in header of " + path.string());
    }

    std::vector<double> xs, ys;
    std::vector<int> labels;
    std::string line;
    long row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string f0, f1, f2, extra;
        if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') || !std::getline(ss, f2, ',')) {
            throw IoError("load_csv: wrong column count at row " + std::to_string(row + 1));
        }
        if (std::getline(ss, extra, ',')) {
            throw IoError("load_csv: wrong column count at row " + std::to_string(row + 1));
        }
        xs.push_back(parse_double(f0, row + 1));
        ys.push_back(parse_double(f1, row + 1));
        int label = 0;
        try {
            label = std::stoi(f2);
        } catch (const std::exception&) {
            throw IoError("load_csv: non-numeric label at row " + std::to_string(row + 1));
        }
        if (label < 0 || label >= num_classes) {
            throw IoError("load_csv: label out of range [0," + std::to_string(num_classes) +
                                     ") at row " + std::to_string(row + 1));
        }
        labels.push_back(label);
        ++row;
    }
    if (row == 0) {
        throw IoError("load_csv: empty dataset in " + path.string());
    }
    Eigen::MatrixX2d pts(row, 2);
    for (long i = 0; i < row; ++i) {
        pts(i, 0) = xs[static_cast<std::size_t>(i)];
        pts(i, 1) = ys[static_cast<std::size_t>(i)];
    }
    return Dataset(std::move(pts), std::move(labels), num_classes);
}

}  // namespace dynloss
