#include "dynloss/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "dynloss/errors.hpp"
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <vector>

namespace dynloss {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kMatrixVersion = 1;

void write_exact(std::ofstream& out, const void* data, std::size_t bytes,
                 const std::filesystem::path& path) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw IoError("write failed: " + path.string());
}

void read_exact(std::ifstream& in, void* data, std::size_t bytes,
                const std::filesystem::path& path) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (in.gcount() != static_cast<std::streamsize>(bytes))
        throw IoError("truncated file: " + path.string());
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ofstream out(path, mode);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ifstream in(path, mode);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    return in;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params,
                     std::uint64_t seed) {
    auto out = open_out(path, std::ios::binary);
    const MlpShape& sh = params.shape();
    write_exact(out, "DLCK", 4, path);
    const std::uint32_t header[4] = {kCheckpointVersion, static_cast<std::uint32_t>(sh.width),
                                     static_cast<std::uint32_t>(sh.in_dim),
                                     static_cast<std::uint32_t>(sh.num_classes)};
    write_exact(out, header, sizeof header, path);
    write_exact(out, &seed, sizeof seed, path);
    write_exact(out, params.flat().data(),
                static_cast<std::size_t>(params.flat().size()) * sizeof(double), path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    auto in = open_in(path, std::ios::binary);
    char magic[4];
    read_exact(in, magic, 4, path);
    if (std::memcmp(magic, "DLCK", 4) != 0)
        throw IoError("not a checkpoint file: " + path.string());
    std::uint32_t header[4];
    read_exact(in, header, sizeof header, path);
    if (header[0] != kCheckpointVersion)
        throw IoError("unsupported checkpoint version in " + path.string());

    Checkpoint ck;
    ck.shape.width = static_cast<int>(header[1]);
    ck.shape.in_dim = static_cast<int>(header[2]);
    ck.shape.num_classes = static_cast<int>(header[3]);
    read_exact(in, &ck.seed, sizeof ck.seed, path);
    ck.flat.resize(ck.shape.n_params());
    read_exact(in, ck.flat.data(), static_cast<std::size_t>(ck.flat.size()) * sizeof(double),
               path);
    return ck;
}

void save_trace_csv(const std::filesystem::path& path, const TrainTrace& trace,
                    int num_classes, int hessian_top_k) {
    auto out = open_out(path, std::ios::out | std::ios::trunc);
    out << "step,loss,delta_loss,train_accuracy";
    for (int c = 0; c < num_classes; ++c) out << ",gamma" << c;
    out << ",val_accuracy";
    for (int k = 0; k < hessian_top_k; ++k) out << ",hessian_eig" << k;
    out << ",ntk_top_eig\n";

    std::size_t vi = 0;  // cursor into the strided validation records
    std::size_t si = 0;  // cursor into the strided spectra records
    for (long t = 0; t < trace.steps_run; ++t) {
        out << t << ',' << format_double(trace.loss[t]) << ',';
        if (t > 0) out << format_double(trace.delta_loss[t]);
        out << ',' << format_double(trace.train_accuracy[t]);
        for (int c = 0; c < num_classes; ++c)
            out << ',' << format_double(trace.gamma[t][static_cast<std::size_t>(c)]);

        out << ',';
        if (vi < trace.val_accuracy.size() && trace.val_accuracy[vi].first == t)
            out << format_double(trace.val_accuracy[vi++].second);

        const bool has_spec = si < trace.spectra.size() && trace.spectra[si].step == t;
        for (int k = 0; k < hessian_top_k; ++k) {
            out << ',';
            if (has_spec &&
                k < static_cast<int>(trace.spectra[si].hessian_top_eigs.size()))
                out << format_double(trace.spectra[si].hessian_top_eigs[static_cast<std::size_t>(k)]);
        }
        out << ',';
        if (has_spec && trace.spectra[si].ntk_top_eig)
            out << format_double(*trace.spectra[si].ntk_top_eig);
        if (has_spec) ++si;
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void save_summary_json(const std::filesystem::path& path, const TrainTrace& trace) {
    nlohmann::json j;
    j["final_train_accuracy"] = trace.final_train_accuracy;
    j["final_val_accuracy"] = trace.final_val_accuracy;
    j["steps_run"] = trace.steps_run;
    j["diverged"] = trace.diverged;
    if (trace.diverged) j["divergence_step"] = trace.divergence_step;
    auto intervals = nlohmann::json::array();
    for (const auto& iv : trace.instability_intervals)
        intervals.push_back({iv.start, iv.end});
    j["instability_intervals"] = intervals;
    j["threshold_estimate"] =
        trace.threshold_estimate ? nlohmann::json(*trace.threshold_estimate) : nlohmann::json();

    auto out = open_out(path, std::ios::out | std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    auto out = open_out(path, std::ios::binary);
    write_exact(out, "DLMX", 4, path);
    const std::uint64_t header[3] = {kMatrixVersion, static_cast<std::uint64_t>(m.rows()),
                                     static_cast<std::uint64_t>(m.cols())};
    write_exact(out, header, sizeof header, path);
    // Stored row-major regardless of Eigen's in-memory layout.
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        write_exact(out, row.data(), row.size() * sizeof(double), path);
    }
}

Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
    auto in = open_in(path, std::ios::binary);
    char magic[4];
    read_exact(in, magic, 4, path);
    if (std::memcmp(magic, "DLMX", 4) != 0)
        throw IoError("not a matrix file: " + path.string());
    std::uint64_t header[3];
    read_exact(in, header, sizeof header, path);
    if (header[0] != kMatrixVersion)
        throw IoError("unsupported matrix version in " + path.string());
    Eigen::MatrixXd m(static_cast<Eigen::Index>(header[1]), static_cast<Eigen::Index>(header[2]));
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        read_exact(in, row.data(), row.size() * sizeof(double), path);
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

}  // namespace dynloss
