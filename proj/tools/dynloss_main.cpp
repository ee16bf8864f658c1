// Command-line front end: dataset generation, single training runs, phase
// sweeps, threshold scans and one-shot spectral dumps. Every run writes a
// manifest.json with the fully resolved configuration; `replay` re-executes a
// manifest and reproduces the artifacts byte for byte.

#include <CLI11.hpp>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dynloss/dataset.hpp"
#include "dynloss/errors.hpp"
#include "dynloss/io.hpp"
#include "dynloss/model.hpp"
#include "dynloss/rng.hpp"
#include "dynloss/schedule.hpp"
#include "dynloss/spectral.hpp"
#include "dynloss/sweep.hpp"
#include "dynloss/trainer.hpp"
#include "dynloss/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitIo = 3;

const char* kFormatsHelp = R"(File formats
============

dataset.csv (spiral-gen; load via `train --data`)
  Header "x0,x1,label,C=<num_classes>"; one point per row; coordinates printed
  with %.17g so reloading reproduces every double bit for bit.

trace.csv (train, replay)
  One row per completed training step. Columns:
    step            step index t, from 0
    loss            dynamical loss F(w_t, gamma(t)) before the update
    delta_loss      loss[t] - loss[t-1]; empty at t = 0
    train_accuracy  argmax accuracy on the training set at w_t
    gamma0..gamma{C-1}   class weights at step t (sum to C)
    val_accuracy    validation accuracy, recorded every val-stride steps,
                    empty otherwise
    hessian_eig0..hessian_eig{k-1}   top-k Hessian eigenvalues (Lanczos),
                    recorded every spectra-stride steps, empty otherwise
    ntk_top_eig     top NTK eigenvalue at the same stride (only with
                    --record-ntk), empty otherwise
  All doubles use %.17g; replays are byte-identical.

summary.json (train, replay)
  final_train_accuracy, final_val_accuracy, steps_run, diverged
  [, divergence_step], instability_intervals = [[start_step, end_step], ...]
  (inclusive, record-aligned), threshold_estimate (null when no interval).

checkpoint.ckpt (train; input to spectra)
  Binary: magic "DLCK", u32 format version, u32 width, u32 in_dim, u32 C,
  u64 seed, then the flat parameter vector as doubles in the fixed order
  (W1 row-major, b1, W2 row-major, b2).

phase.csv / phase.json (sweep)
  Long format "T,A,seed,train_acc,val_acc", one row per run; seed is the
  derived per-run seed, so any row reruns standalone via `train --seed`.
  Diverged runs report accuracy 0. phase.json aggregates mean/sd per cell.

threshold.csv / threshold.json (threshold-scan)
  "eta,threshold,n_runs_detected" per eta; threshold empty when no run
  detected an instability. threshold.json adds the log-log power-law fit
  (exponent, intercept, r_squared).

spectra.json (spectra)
  hessian_top_eigs (descending), lanczos iterations and residuals, and
  ntk_top_eig for the checkpoint against its dataset.

*.mat (spectra --dump-hessian / --dump-ntk)
  Binary: magic "DLMX", u64 format version, u64 rows, u64 cols, then
  row-major doubles.

manifest.json (every command)
  version, command, resolved config (every value affecting the outputs,
  including all seeds) and the artifact file names. `replay --manifest`
  re-executes it; outputs are byte-identical.

Config files (--config)
  Flat `key = value` lines with the subcommand as prefix, e.g.
      train.eta = 1
      train.width = 100
  Command-line flags override config-file values.
)";

fs::path resolve_out_dir(const std::string& out) {
    fs::path dir(out);
    if (const char* root = std::getenv("DYNLOSS_OUT_ROOT"); root && *root && dir.is_relative())
        dir = fs::path(root) / dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw dynloss::IoError("cannot create output dir " + dir.string() + ": " + ec.message());
    return dir;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::vector<std::string>& artifacts) {
    json j;
    j["version"] = dynloss::kVersion;
    j["command"] = command;
    j["config"] = config;
    j["artifacts"] = artifacts;
    std::ofstream out(dir / "manifest.json", std::ios::out | std::ios::trunc);
    if (!out) throw dynloss::IoError("cannot open for writing: " + (dir / "manifest.json").string());
    out << j.dump(2) << '\n';
    if (!out) throw dynloss::IoError("write failed: " + (dir / "manifest.json").string());
}

json load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw dynloss::IoError("cannot open for reading: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw dynloss::IoError("malformed manifest " + path.string() + ": " + e.what());
    }
    return j;
}

// ---------------------------------------------------------------------------
// spiral-gen

struct SpiralGenSettings {
    long n_per_class = 100;
    int classes = 3;
    double noise = 0.2;
    double turns = 3.15;
    std::uint64_t seed = 1;

    json to_json() const {
        return {{"n_per_class", n_per_class}, {"classes", classes}, {"noise", noise},
                {"turns", turns},           {"seed", seed}};
    }
    static SpiralGenSettings from_json(const json& j) {
        SpiralGenSettings s;
        s.n_per_class = j.at("n_per_class");
        s.classes = j.at("classes");
        s.noise = j.at("noise");
        s.turns = j.at("turns");
        s.seed = j.at("seed");
        return s;
    }
};

int run_spiral_gen(const SpiralGenSettings& s, const fs::path& dir) {
    dynloss::SpiralSpec spec{s.n_per_class, s.classes, s.noise, s.turns};
    const dynloss::Dataset data = dynloss::generate_spiral(spec, s.seed);
    dynloss::save_csv(data, dir / "dataset.csv");
    write_manifest(dir, "spiral-gen", s.to_json(), {"dataset.csv"});
    std::cout << "wrote " << (dir / "dataset.csv").string() << " (" << data.size() << " points, "
              << data.num_classes() << " classes)\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainSettings {
    int width = 100;
    double eta = 1.0;
    long steps = 35000;
    double amplitude = 1.0;
    long period = 200;
    long stop_step = -1;      // -1: none (or derived from stop_last)
    bool stop_last = false;   // stop oscillations for the final period
    long spectra_stride = 50;  // 0 disables spectral records
    int top_k = 3;
    int lanczos_iters = 60;
    bool record_ntk = false;
    long val_stride = 100;
    std::uint64_t seed = 1;
    long n_per_class = 100;
    int classes = 3;
    double noise = 0.2;
    double turns = 3.15;
    std::string data_file;  // optional: train on this CSV instead of generating

    json to_json() const {
        json j;
        j["width"] = width;
        j["eta"] = eta;
        j["steps"] = steps;
        j["A"] = amplitude;
        j["T"] = period;
        j["stop_step"] = stop_step;
        j["stop_last"] = stop_last;
        j["spectra_stride"] = spectra_stride;
        j["top_k"] = top_k;
        j["lanczos_iters"] = lanczos_iters;
        j["record_ntk"] = record_ntk;
        j["val_stride"] = val_stride;
        j["seed"] = seed;
        j["n_per_class"] = n_per_class;
        j["classes"] = classes;
        j["noise"] = noise;
        j["turns"] = turns;
        j["data_file"] = data_file;
        return j;
    }
    static TrainSettings from_json(const json& j) {
        TrainSettings s;
        s.width = j.at("width");
        s.eta = j.at("eta");
        s.steps = j.at("steps");
        s.amplitude = j.at("A");
        s.period = j.at("T");
        s.stop_step = j.at("stop_step");
        s.stop_last = j.at("stop_last");
        s.spectra_stride = j.at("spectra_stride");
        s.top_k = j.at("top_k");
        s.lanczos_iters = j.at("lanczos_iters");
        s.record_ntk = j.at("record_ntk");
        s.val_stride = j.at("val_stride");
        s.seed = j.at("seed");
        s.n_per_class = j.at("n_per_class");
        s.classes = j.at("classes");
        s.noise = j.at("noise");
        s.turns = j.at("turns");
        s.data_file = j.value("data_file", std::string{});
        return s;
    }

    dynloss::TrainConfig to_config() const {
        dynloss::TrainConfig config;
        config.learning_rate = eta;
        config.total_steps = steps;
        config.schedule.amplitude = amplitude;
        config.schedule.period = period;
        config.schedule.num_classes = classes;
        if (stop_last)
            config.schedule.stop_step = steps - period;
        else if (stop_step >= 0)
            config.schedule.stop_step = stop_step;
        config.spectra_stride =
            spectra_stride > 0 ? std::optional<long>(spectra_stride) : std::nullopt;
        config.hessian_top_k = top_k;
        config.lanczos_iters = lanczos_iters;
        config.record_ntk = record_ntk;
        config.val_stride = val_stride;
        config.seed = seed;
        return config;
    }
};

int run_train(const TrainSettings& s, const fs::path& dir) {
    const dynloss::TrainConfig config = s.to_config();
    config.validate();

    dynloss::TrainResult result = [&] {
        if (!s.data_file.empty()) {
            const dynloss::Dataset train_set = dynloss::load_csv(s.data_file);
            dynloss::SpiralSpec spec{s.n_per_class, train_set.num_classes(), s.noise, s.turns};
            const dynloss::Dataset val_set =
                dynloss::generate_spiral(spec, dynloss::mix_seed(s.seed, {2}));
            dynloss::MlpParams params = dynloss::MlpParams::random_init(
                {s.width, 2, train_set.num_classes()}, dynloss::mix_seed(s.seed, {3}));
            dynloss::TrainConfig c = config;
            c.seed = s.seed;
            return dynloss::train(std::move(params), train_set, val_set, c);
        }
        dynloss::SpiralSpec spec{s.n_per_class, s.classes, s.noise, s.turns};
        return dynloss::run_spiral_experiment(s.width, spec, config, s.seed);
    }();

    dynloss::save_trace_csv(dir / "trace.csv", result.trace, s.classes, s.top_k);
    dynloss::save_summary_json(dir / "summary.json", result.trace);
    dynloss::save_checkpoint(dir / "checkpoint.ckpt", result.params, s.seed);
    write_manifest(dir, "train", s.to_json(),
                   {"trace.csv", "summary.json", "checkpoint.ckpt"});

    std::cout << "steps_run " << result.trace.steps_run << "  train_acc "
              << result.trace.final_train_accuracy << "  val_acc "
              << result.trace.final_val_accuracy;
    if (result.trace.threshold_estimate)
        std::cout << "  threshold " << *result.trace.threshold_estimate;
    std::cout << '\n';
    if (result.trace.diverged) {
        std::cerr << "error: training diverged at step " << result.trace.divergence_step << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepSettings {
    std::vector<long> T_values = dynloss::default_T_values();
    std::vector<double> A_values = dynloss::default_A_values();
    int n_seeds = 10;
    std::uint64_t seed_base = 1;
    int width = 100;
    double eta = 1.0;
    long steps = 35000;
    long n_per_class = 100;
    int classes = 3;
    double noise = 0.2;
    double turns = 3.15;
    int jobs = 0;  // 0: all cores

    json to_json() const {
        json j;
        j["T_values"] = T_values;
        j["A_values"] = A_values;
        j["n_seeds"] = n_seeds;
        j["seed_base"] = seed_base;
        j["width"] = width;
        j["eta"] = eta;
        j["steps"] = steps;
        j["n_per_class"] = n_per_class;
        j["classes"] = classes;
        j["noise"] = noise;
        j["turns"] = turns;
        return j;  // jobs omitted: it cannot change the results
    }
    static SweepSettings from_json(const json& j) {
        SweepSettings s;
        s.T_values = j.at("T_values").get<std::vector<long>>();
        s.A_values = j.at("A_values").get<std::vector<double>>();
        s.n_seeds = j.at("n_seeds");
        s.seed_base = j.at("seed_base");
        s.width = j.at("width");
        s.eta = j.at("eta");
        s.steps = j.at("steps");
        s.n_per_class = j.at("n_per_class");
        s.classes = j.at("classes");
        s.noise = j.at("noise");
        s.turns = j.at("turns");
        return s;
    }
};

int effective_jobs(int jobs) {
    if (jobs > 0) return jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

int run_sweep(const SweepSettings& s, const fs::path& dir) {
    dynloss::ExperimentBase base;
    base.width = s.width;
    base.eta = s.eta;
    base.total_steps = s.steps;
    base.data_spec = {s.n_per_class, s.classes, s.noise, s.turns};

    const dynloss::PhaseDiagram diagram = dynloss::phase_diagram(
        s.T_values, s.A_values, base, s.n_seeds, s.seed_base, effective_jobs(s.jobs));
    dynloss::save_phase_csv(dir / "phase.csv", diagram);
    dynloss::save_phase_json(dir / "phase.json", diagram);
    write_manifest(dir, "sweep", s.to_json(), {"phase.csv", "phase.json"});

    int diverged = 0;
    for (const auto& cell : diagram.cells) diverged += cell.n_diverged;
    std::cout << "sweep: " << diagram.runs.size() << " runs over " << diagram.cells.size()
              << " cells";
    if (diverged > 0) std::cout << "  (" << diverged << " diverged)";
    std::cout << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// threshold-scan

struct ThresholdSettings {
    std::vector<double> etas{0.25, 0.5, 1.0, 2.0};
    int width = 100;
    double amplitude = 70.0;
    double base_period = 5000.0;
    double base_steps = 70000.0;
    double base_stride = 50.0;
    int lanczos_iters = 16;
    int n_seeds = 1;
    std::uint64_t seed_base = 1;
    long n_per_class = 100;
    int classes = 3;
    double noise = 0.2;
    double turns = 3.15;
    int jobs = 0;

    json to_json() const {
        json j;
        j["etas"] = etas;
        j["width"] = width;
        j["A"] = amplitude;
        j["base_period"] = base_period;
        j["base_steps"] = base_steps;
        j["base_stride"] = base_stride;
        j["lanczos_iters"] = lanczos_iters;
        j["n_seeds"] = n_seeds;
        j["seed_base"] = seed_base;
        j["n_per_class"] = n_per_class;
        j["classes"] = classes;
        j["noise"] = noise;
        j["turns"] = turns;
        return j;
    }
    static ThresholdSettings from_json(const json& j) {
        ThresholdSettings s;
        s.etas = j.at("etas").get<std::vector<double>>();
        s.width = j.at("width");
        s.amplitude = j.at("A");
        s.base_period = j.at("base_period");
        s.base_steps = j.at("base_steps");
        s.base_stride = j.at("base_stride");
        s.lanczos_iters = j.at("lanczos_iters");
        s.n_seeds = j.at("n_seeds");
        s.seed_base = j.at("seed_base");
        s.n_per_class = j.at("n_per_class");
        s.classes = j.at("classes");
        s.noise = j.at("noise");
        s.turns = j.at("turns");
        return s;
    }
};

int run_threshold_scan(const ThresholdSettings& s, const fs::path& dir) {
    dynloss::ThresholdScanOptions options;
    options.width = s.width;
    options.amplitude = s.amplitude;
    options.base_period = s.base_period;
    options.base_steps = s.base_steps;
    options.base_stride = s.base_stride;
    options.lanczos_iters = s.lanczos_iters;
    options.n_seeds = s.n_seeds;
    options.data_spec = {s.n_per_class, s.classes, s.noise, s.turns};
    options.jobs = effective_jobs(s.jobs);

    const dynloss::ThresholdScan scan = dynloss::threshold_scan(s.etas, options, s.seed_base);
    dynloss::save_threshold_csv(dir / "threshold.csv", scan);
    dynloss::save_threshold_json(dir / "threshold.json", scan);
    write_manifest(dir, "threshold-scan", s.to_json(), {"threshold.csv", "threshold.json"});

    for (const auto& point : scan.points) {
        std::cout << "eta " << point.eta << ": ";
        if (point.threshold)
            std::cout << "threshold " << *point.threshold << '\n';
        else
            std::cout << "no instability detected\n";
    }
    if (scan.fit)
        std::cout << "fit exponent " << scan.fit->exponent << "  r^2 " << scan.fit->r_squared
                  << '\n';
    else
        std::cout << "fit: not enough threshold points\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// spectra

struct SpectraSettings {
    std::string checkpoint;
    std::string data_file;  // optional: defaults to the checkpoint's dataset
    int top_k = 3;
    int lanczos_iters = 60;
    long n_per_class = 100;
    double noise = 0.2;
    double turns = 3.15;
    bool dump_hessian = false;
    bool dump_ntk = false;
};

int run_spectra(const SpectraSettings& s, const fs::path& dir) {
    const dynloss::Checkpoint ck = dynloss::load_checkpoint(s.checkpoint);
    dynloss::MlpParams params(ck.shape);
    params.flat() = ck.flat;

    const dynloss::Dataset data = [&] {
        if (!s.data_file.empty()) return dynloss::load_csv(s.data_file);
        // Rebuild the training set from the seed stored in the checkpoint.
        dynloss::SpiralSpec spec{s.n_per_class, ck.shape.num_classes, s.noise, s.turns};
        return dynloss::generate_spiral(spec, dynloss::mix_seed(ck.seed, {1}));
    }();

    const dynloss::ClassWeights gamma =
        dynloss::ClassWeights::Ones(ck.shape.num_classes);  // static loss
    const dynloss::SpectrumEstimate est = dynloss::hessian_top_k(
        params, data, gamma, s.top_k, s.lanczos_iters, dynloss::mix_seed(ck.seed, {4, 0}));
    const double ntk_eig = dynloss::ntk_top_eigenvalue(params, data, s.lanczos_iters,
                                                       dynloss::mix_seed(ck.seed, {4, 1}));

    json j;
    j["hessian_top_eigs"] = est.top_eigs;
    j["lanczos_iterations"] = est.iterations;
    j["lanczos_residuals"] = est.residual_norms;
    j["ntk_top_eig"] = ntk_eig;
    std::vector<std::string> artifacts{"spectra.json"};
    if (s.dump_hessian) {
        dynloss::save_matrix(dir / "hessian.mat",
                             dynloss::dense_hessian(params, data, gamma, 20000));
        artifacts.push_back("hessian.mat");
    }
    if (s.dump_ntk) {
        dynloss::save_matrix(dir / "ntk.mat", dynloss::ntk(params, data));
        artifacts.push_back("ntk.mat");
    }
    std::ofstream out(dir / "spectra.json", std::ios::out | std::ios::trunc);
    if (!out) throw dynloss::IoError("cannot open for writing: " + (dir / "spectra.json").string());
    out << j.dump(2) << '\n';
    if (!out) throw dynloss::IoError("write failed: " + (dir / "spectra.json").string());

    json cfg{{"checkpoint", s.checkpoint}, {"data_file", s.data_file},
             {"top_k", s.top_k},           {"lanczos_iters", s.lanczos_iters},
             {"n_per_class", s.n_per_class}, {"noise", s.noise},
             {"turns", s.turns},           {"dump_hessian", s.dump_hessian},
             {"dump_ntk", s.dump_ntk}};
    write_manifest(dir, "spectra", cfg, artifacts);

    std::cout << "hessian top:";
    for (double e : est.top_eigs) std::cout << ' ' << e;
    std::cout << "  ntk top: " << ntk_eig << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// replay

int run_replay(const std::string& manifest_path, const fs::path& dir) {
    const json manifest = load_manifest(manifest_path);
    const std::string command = manifest.at("command");
    const json& config = manifest.at("config");
    try {
        if (command == "spiral-gen")
            return run_spiral_gen(SpiralGenSettings::from_json(config), dir);
        if (command == "train") return run_train(TrainSettings::from_json(config), dir);
        if (command == "sweep") return run_sweep(SweepSettings::from_json(config), dir);
        if (command == "threshold-scan")
            return run_threshold_scan(ThresholdSettings::from_json(config), dir);
    } catch (const json::exception& e) {
        throw dynloss::IoError("manifest " + manifest_path + " is missing keys: " + e.what());
    }
    throw std::invalid_argument("manifest command '" + command + "' is not replayable");
}

void add_data_flags(CLI::App* cmd, long& n_per_class, int* classes, double& noise, double& turns) {
    cmd->add_option("--n-per-class", n_per_class, "Samples per class")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    if (classes)
        cmd->add_option("--classes", *classes, "Number of classes (spiral arms)")
            ->check(CLI::Range(2, 64))
            ->capture_default_str();
    cmd->add_option("--noise", noise, "Angle noise standard deviation")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--turns", turns,
                    "Spiral winding factor; 1 is the textbook dataset, 3.15 the "
                    "harder reference used in the experiments")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // The training loop allocates multi-megabyte Eigen temporaries every step;
    // with the default allocator each one is a fresh mmap/munmap pair and the
    // page faults roughly double wide-network step time. Keep large blocks on
    // the heap and never trim, so freed pages are reused without syscalls.
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
    CLI::App app{"Dynamical loss functions for small classifiers: training, "
                 "spectra and phase-diagram experiments"};
    app.set_version_flag("--version", std::string("dynloss ") + dynloss::kVersion);
    app.set_config("--config", "", "Read options from a flat key = value file "
                                   "(e.g. `train.eta = 1`); flags override");
    app.add_flag_callback(
        "--help-formats",
        [] {
            std::cout << kFormatsHelp;
            throw CLI::Success{};
        },
        "Describe every output file format and exit");
    app.require_subcommand(0, 1);

    std::string out_dir = "out";
    app.add_option("--out", out_dir, "Output directory (created if missing); a relative "
                                     "path is rooted at $DYNLOSS_OUT_ROOT when set")
        ->capture_default_str();

    SpiralGenSettings sg;
    auto* c_gen = app.add_subcommand("spiral-gen", "Generate a spiral dataset CSV");
    add_data_flags(c_gen, sg.n_per_class, &sg.classes, sg.noise, sg.turns);
    c_gen->add_option("--seed", sg.seed, "Generator seed")->capture_default_str();

    TrainSettings tr;
    auto* c_train = app.add_subcommand("train", "Train one classifier and record its trace");
    c_train->add_option("--width", tr.width, "Hidden-layer width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_train->add_option("--eta", tr.eta, "Learning rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_train->add_option("--steps", tr.steps, "Total gradient-descent steps")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c_train->add_option("--A", tr.amplitude, "Oscillation amplitude (A = 1: static loss)")
        ->check(CLI::Range(1.0, 1e9).description("A must be >= 1"))
        ->capture_default_str();
    c_train->add_option("--T", tr.period, "Oscillation period in steps")
        ->check(CLI::Range(static_cast<long>(2), static_cast<long>(1) << 40)
                    .description("T must be >= 2"))
        ->capture_default_str();
    c_train->add_option("--stop-step", tr.stop_step,
                        "Freeze the weights to 1 from this step on (-1: never)")
        ->capture_default_str();
    c_train->add_flag("--stop-last", tr.stop_last,
                      "Freeze the weights to 1 for the final period (overrides --stop-step)");
    c_train->add_option("--spectra-stride", tr.spectra_stride,
                        "Record Hessian spectra every this many steps (0: off)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c_train->add_option("--top-k", tr.top_k, "Hessian eigenvalues per spectral record")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_train->add_option("--lanczos-iters", tr.lanczos_iters, "Lanczos iterations per record")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_train->add_flag("--record-ntk", tr.record_ntk,
                      "Also record the top NTK eigenvalue at each spectral record");
    c_train->add_option("--val-stride", tr.val_stride, "Validation-accuracy stride")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_train->add_option("--seed", tr.seed, "Run seed (data, init and Lanczos all derive from it)")
        ->capture_default_str();
    add_data_flags(c_train, tr.n_per_class, &tr.classes, tr.noise, tr.turns);
    c_train->add_option("--data", tr.data_file,
                        "Train on this dataset CSV instead of generating one")
        ->check(CLI::ExistingFile);

    SweepSettings sw;
    auto* c_sweep = app.add_subcommand("sweep", "Phase diagram over the (T, A) grid");
    c_sweep->add_option("--T", sw.T_values, "Period grid values")
        ->delimiter(',')
        ->check(CLI::Range(static_cast<long>(2), static_cast<long>(1) << 40)
                    .description("T must be >= 2"));
    c_sweep->add_option("--A", sw.A_values, "Amplitude grid values")
        ->delimiter(',')
        ->check(CLI::Range(1.0, 1e9).description("A must be >= 1"));
    c_sweep->add_option("--seeds", sw.n_seeds, "Replicates per cell")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_sweep->add_option("--seed-base", sw.seed_base, "Base seed for per-cell derivation")
        ->capture_default_str();
    c_sweep->add_option("--width", sw.width, "Hidden-layer width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_sweep->add_option("--eta", sw.eta, "Learning rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_sweep->add_option("--steps", sw.steps, "Steps per run")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_data_flags(c_sweep, sw.n_per_class, &sw.classes, sw.noise, sw.turns);
    c_sweep->add_option("--jobs", sw.jobs, "Worker threads (0: all cores)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    ThresholdSettings th;
    auto* c_thresh = app.add_subcommand(
        "threshold-scan", "Instability thresholds across learning rates, with power-law fit");
    c_thresh->add_option("--etas", th.etas, "Learning rates to scan")
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    c_thresh->add_option("--width", th.width, "Hidden-layer width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_thresh->add_option("--A", th.amplitude, "Oscillation amplitude")
        ->check(CLI::Range(1.0, 1e9).description("A must be >= 1"))
        ->capture_default_str();
    c_thresh->add_option("--base-period", th.base_period, "Period at eta = 1 (T = base/eta)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_thresh->add_option("--base-steps", th.base_steps, "Run length at eta = 1 (steps = base/eta)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_thresh->add_option("--base-stride", th.base_stride,
                         "Spectral stride at eta = 1 (stride = base/eta)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_thresh->add_option("--lanczos-iters", th.lanczos_iters, "Lanczos iterations per record")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_thresh->add_option("--seeds", th.n_seeds, "Replicates per eta")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_thresh->add_option("--seed-base", th.seed_base, "Base seed")->capture_default_str();
    add_data_flags(c_thresh, th.n_per_class, &th.classes, th.noise, th.turns);
    c_thresh->add_option("--jobs", th.jobs, "Worker threads (0: all cores)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    SpectraSettings sp;
    auto* c_spectra =
        app.add_subcommand("spectra", "Hessian/NTK spectrum of a saved checkpoint");
    c_spectra->add_option("--checkpoint", sp.checkpoint, "Checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);
    c_spectra->add_option("--data", sp.data_file, "Dataset CSV (default: rebuild from the seed "
                                                  "stored in the checkpoint)")
        ->check(CLI::ExistingFile);
    c_spectra->add_option("--top-k", sp.top_k, "Hessian eigenvalues to report")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_spectra->add_option("--lanczos-iters", sp.lanczos_iters, "Lanczos iterations")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_data_flags(c_spectra, sp.n_per_class, nullptr, sp.noise, sp.turns);
    c_spectra->add_flag("--dump-hessian", sp.dump_hessian, "Also dump the dense Hessian (.mat)");
    c_spectra->add_flag("--dump-ntk", sp.dump_ntk, "Also dump the dense NTK (.mat)");

    std::string manifest_path;
    auto* c_replay = app.add_subcommand("replay", "Re-execute a manifest.json byte-for-byte");
    c_replay->add_option("--manifest", manifest_path, "Manifest to replay")
        ->required()
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help / --version / --help-formats
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return kExitUsage;
    }

    try {
        const fs::path dir = resolve_out_dir(out_dir);
        if (c_gen->parsed()) return run_spiral_gen(sg, dir);
        if (c_train->parsed()) return run_train(tr, dir);
        if (c_sweep->parsed()) return run_sweep(sw, dir);
        if (c_thresh->parsed()) return run_threshold_scan(th, dir);
        if (c_spectra->parsed()) return run_spectra(sp, dir);
        if (c_replay->parsed()) return run_replay(manifest_path, dir);
    } catch (const dynloss::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}
