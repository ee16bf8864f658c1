#include "dynloss/sweep.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <thread>

#include "dynloss/errors.hpp"
#include "dynloss/io.hpp"
#include "dynloss/rng.hpp"

namespace dynloss {

std::uint64_t cell_seed(std::uint64_t seed_base, std::size_t t_index, std::size_t a_index,
                        int replicate) {
    return mix_seed(seed_base, {static_cast<std::uint64_t>(t_index),
                                static_cast<std::uint64_t>(a_index),
                                static_cast<std::uint64_t>(replicate)});
}

TrainResult run_spiral_experiment(int width, const SpiralSpec& data_spec, TrainConfig config,
                                  std::uint64_t run_seed) {
    const Dataset train_set = generate_spiral(data_spec, mix_seed(run_seed, {1}));
    const Dataset val_set = generate_spiral(data_spec, mix_seed(run_seed, {2}));
    MlpParams params = MlpParams::random_init({width, 2, data_spec.num_classes},
                                              mix_seed(run_seed, {3}));
    config.seed = run_seed;
    return train(std::move(params), train_set, val_set, config);
}

std::vector<long> default_T_values() { return {50, 100, 200, 300, 500, 700, 1000, 2000, 5000}; }
std::vector<double> default_A_values() { return {1, 2, 5, 10, 20, 30, 50, 70, 100}; }

void parallel_for_index(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const auto workers = static_cast<std::size_t>(jobs) < n ? static_cast<std::size_t>(jobs) : n;
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<bool> failed{false};
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                if (failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failed.load()) throw std::runtime_error("a sweep worker failed");
}

PhaseDiagram phase_diagram(const std::vector<long>& T_values, const std::vector<double>& A_values,
                           const ExperimentBase& base, int n_seeds, std::uint64_t seed_base,
                           int jobs) {
    if (T_values.empty() || A_values.empty())
        throw std::invalid_argument("phase diagram grid must be nonempty");
    for (long T : T_values)
        if (T < 2) throw std::invalid_argument("all T values must be at least 2");
    for (double A : A_values)
        if (A < 1.0) throw std::invalid_argument("all A values must be at least 1");
    if (n_seeds < 1) throw std::invalid_argument("n_seeds must be at least 1");

    PhaseDiagram diagram;
    diagram.T_values = T_values;
    diagram.A_values = A_values;
    const std::size_t n_runs = T_values.size() * A_values.size() * static_cast<std::size_t>(n_seeds);
    diagram.runs.resize(n_runs);

    parallel_for_index(n_runs, jobs, [&](std::size_t idx) {
        const auto per_cell = static_cast<std::size_t>(n_seeds);
        const std::size_t cell = idx / per_cell;
        const int replicate = static_cast<int>(idx % per_cell);
        const std::size_t ti = cell / A_values.size();
        const std::size_t ai = cell % A_values.size();

        TrainConfig config;
        config.learning_rate = base.eta;
        config.total_steps = base.total_steps;
        config.schedule.amplitude = A_values[ai];
        config.schedule.period = T_values[ti];
        config.schedule.num_classes = base.data_spec.num_classes;
        if (base.stop_last_period)
            config.schedule.stop_step = base.total_steps - T_values[ti];
        config.spectra_stride = std::nullopt;  // sweeps track accuracy only

        const std::uint64_t run_seed = cell_seed(seed_base, ti, ai, replicate);
        const TrainResult result =
            run_spiral_experiment(base.width, base.data_spec, config, run_seed);

        PhaseRun& run = diagram.runs[idx];
        run.period = T_values[ti];
        run.amplitude = A_values[ai];
        run.seed = run_seed;
        run.diverged = result.trace.diverged;
        run.train_acc = run.diverged ? 0.0 : result.trace.final_train_accuracy;
        run.val_acc = run.diverged ? 0.0 : result.trace.final_val_accuracy;
    });

    for (std::size_t ti = 0; ti < T_values.size(); ++ti) {
        for (std::size_t ai = 0; ai < A_values.size(); ++ai) {
            const std::size_t cell = ti * A_values.size() + ai;
            PhaseCell agg;
            agg.period = T_values[ti];
            agg.amplitude = A_values[ai];
            agg.n_seeds = n_seeds;
            double tsum = 0.0, vsum = 0.0;
            for (int r = 0; r < n_seeds; ++r) {
                const PhaseRun& run = diagram.runs[cell * static_cast<std::size_t>(n_seeds) +
                                                  static_cast<std::size_t>(r)];
                tsum += run.train_acc;
                vsum += run.val_acc;
                if (run.diverged) ++agg.n_diverged;
            }
            agg.train_mean = tsum / n_seeds;
            agg.val_mean = vsum / n_seeds;
            double tvar = 0.0, vvar = 0.0;
            for (int r = 0; r < n_seeds; ++r) {
                const PhaseRun& run = diagram.runs[cell * static_cast<std::size_t>(n_seeds) +
                                                  static_cast<std::size_t>(r)];
                tvar += (run.train_acc - agg.train_mean) * (run.train_acc - agg.train_mean);
                vvar += (run.val_acc - agg.val_mean) * (run.val_acc - agg.val_mean);
            }
            if (n_seeds > 1) {
                agg.train_sd = std::sqrt(tvar / (n_seeds - 1));
                agg.val_sd = std::sqrt(vvar / (n_seeds - 1));
            }
            diagram.cells.push_back(agg);
        }
    }
    return diagram;
}

void save_phase_csv(const std::filesystem::path& path, const PhaseDiagram& diagram) {
    std::ofstream out(path, std::ios::out | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "T,A,seed,train_acc,val_acc\n";
    for (const auto& run : diagram.runs) {
        out << run.period << ',' << format_double(run.amplitude) << ',' << run.seed << ','
            << format_double(run.train_acc) << ',' << format_double(run.val_acc) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void save_phase_json(const std::filesystem::path& path, const PhaseDiagram& diagram) {
    nlohmann::json j;
    j["T_values"] = diagram.T_values;
    j["A_values"] = diagram.A_values;
    auto cells = nlohmann::json::array();
    for (const auto& cell : diagram.cells) {
        cells.push_back({{"T", cell.period},
                         {"A", cell.amplitude},
                         {"train_mean", cell.train_mean},
                         {"train_sd", cell.train_sd},
                         {"val_mean", cell.val_mean},
                         {"val_sd", cell.val_sd},
                         {"n_seeds", cell.n_seeds},
                         {"n_diverged", cell.n_diverged}});
    }
    j["cells"] = cells;
    std::ofstream out(path, std::ios::out | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

ThresholdScan threshold_scan_with(const ThresholdRunner& runner,
                                  const std::vector<double>& eta_values, int n_seeds,
                                  std::uint64_t seed_base, int jobs) {
    if (eta_values.empty()) throw std::invalid_argument("eta_values must be nonempty");
    for (double eta : eta_values)
        if (!(eta > 0.0)) throw std::invalid_argument("all eta values must be positive");
    if (n_seeds < 1) throw std::invalid_argument("n_seeds must be at least 1");

    ThresholdScan scan;
    scan.eta_values = eta_values;
    const std::size_t n_runs = eta_values.size() * static_cast<std::size_t>(n_seeds);
    std::vector<std::optional<double>> results(n_runs);
    parallel_for_index(n_runs, jobs, [&](std::size_t idx) {
        const std::size_t ei = idx / static_cast<std::size_t>(n_seeds);
        const int replicate = static_cast<int>(idx % static_cast<std::size_t>(n_seeds));
        results[idx] = runner(eta_values[ei], cell_seed(seed_base, ei, 0, replicate));
    });

    std::vector<double> fit_etas, fit_thresholds;
    for (std::size_t ei = 0; ei < eta_values.size(); ++ei) {
        ThresholdPoint point;
        point.eta = eta_values[ei];
        double sum = 0.0;
        for (int r = 0; r < n_seeds; ++r) {
            const auto& res = results[ei * static_cast<std::size_t>(n_seeds) +
                                      static_cast<std::size_t>(r)];
            if (res) {
                sum += *res;
                ++point.n_runs_detected;
            }
        }
        if (point.n_runs_detected > 0) {
            point.threshold = sum / point.n_runs_detected;
            fit_etas.push_back(point.eta);
            fit_thresholds.push_back(*point.threshold);
        }
        scan.points.push_back(point);
    }
    if (fit_etas.size() >= 3) scan.fit = fit_threshold_exponent(fit_etas, fit_thresholds);
    return scan;
}

ThresholdScan threshold_scan(const std::vector<double>& eta_values,
                             const ThresholdScanOptions& options, std::uint64_t seed_base) {
    auto runner = [&options](double eta, std::uint64_t run_seed) -> std::optional<double> {
        TrainConfig config;
        config.learning_rate = eta;
        config.total_steps = std::lround(options.base_steps / eta);
        config.schedule.amplitude = options.amplitude;
        config.schedule.period = std::lround(options.base_period / eta);
        config.schedule.num_classes = options.data_spec.num_classes;
        config.spectra_stride = std::max<long>(1, std::lround(options.base_stride / eta));
        config.hessian_top_k = 1;
        config.lanczos_iters = options.lanczos_iters;
        const TrainResult result =
            run_spiral_experiment(options.width, options.data_spec, config, run_seed);
        return result.trace.threshold_estimate;
    };
    return threshold_scan_with(runner, eta_values, options.n_seeds, seed_base, options.jobs);
}

void save_threshold_csv(const std::filesystem::path& path, const ThresholdScan& scan) {
    std::ofstream out(path, std::ios::out | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "eta,threshold,n_runs_detected\n";
    for (const auto& point : scan.points) {
        out << format_double(point.eta) << ',';
        if (point.threshold) out << format_double(*point.threshold);
        out << ',' << point.n_runs_detected << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void save_threshold_json(const std::filesystem::path& path, const ThresholdScan& scan) {
    nlohmann::json j;
    j["eta_values"] = scan.eta_values;
    auto points = nlohmann::json::array();
    for (const auto& point : scan.points) {
        points.push_back(
            {{"eta", point.eta},
             {"threshold", point.threshold ? nlohmann::json(*point.threshold) : nlohmann::json()},
             {"n_runs_detected", point.n_runs_detected}});
    }
    j["points"] = points;
    if (scan.fit) {
        j["fit"] = {{"exponent", scan.fit->exponent},
                    {"intercept", scan.fit->intercept},
                    {"r_squared", scan.fit->r_squared}};
    } else {
        j["fit"] = nullptr;
    }
    std::ofstream out(path, std::ios::out | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace dynloss
