#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hadl/data.hpp"
#include "hadl/metrics.hpp"
#include "hadl/model.hpp"
#include "hadl/optim.hpp"

namespace hadl {

/// Everything one experiment needs, resolved from defaults, a `key = value`
/// config file and command-line overrides (in that order).
struct ExperimentConfig {
    // data
    std::string dataset = "ETTh1";
    std::filesystem::path data_path;
    std::filesystem::path registry;
    std::string convention;  // empty: dataset default
    bool standardize = true;
    std::size_t stride = 1;

    // model
    std::size_t lookback = 512;
    std::vector<std::size_t> horizons{96, 192, 336, 720};
    Variant variant;

    // optimizer
    TrainConfig train;
    std::vector<std::uint64_t> seeds{2024};

    // robustness
    std::vector<double> eta_list{0.0, 0.3, 0.7, 1.3, 1.7, 2.3};
    std::size_t robust_horizon = 192;
    std::size_t robust_epochs = 50;
    std::size_t robust_patience = 10;

    // ablation grids
    std::vector<std::size_t> ablation_ranks{15, 35, 55, 75};
    std::vector<std::size_t> ablation_lookbacks{48, 96, 192, 336, 512, 720};

    // synthetic data
    std::size_t synth_steps = 2000;
    std::size_t synth_channels = 3;
    std::vector<double> synth_periods{24.0, 168.0};
    std::vector<double> synth_amplitudes{1.0, 0.5};
    std::size_t synth_rank = 2;
    std::size_t synth_train_windows = 512;
    std::size_t synth_val_windows = 128;
    std::size_t synth_test_windows = 128;

    // execution
    std::filesystem::path outdir = "runs";
    std::size_t jobs = 1;
    bool quiet = false;
};

struct ConfigKey {
    std::string name;
    std::string help;
};

/// Every accepted key, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Applies one `key = value` assignment. Throws InvalidConfig for unknown keys
/// or malformed values.
void apply_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Reads a flat `key = value` file ('#' starts a comment) into `config`.
void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path);

/// Canonical `key = value` lines for every key, sorted by key.
std::string serialize_config(const ExperimentConfig& config);

/// FNV-1a 64 of serialize_config.
std::uint64_t config_fingerprint(const ExperimentConfig& config);

/// Mixes a base seed with run coordinates (splitmix64 chain) so that parallel
/// runs get distinct but reproducible seeds.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

struct PreparedData {
    std::string dataset;
    std::size_t channels = 0;
    WindowSet train;
    WindowSet val;
    WindowSet test;
};

/// Loads (once) and windows data for one (lookback, horizon) cell.
class DataSource {
public:
    /// Throws on unreadable or invalid input before any output is produced.
    explicit DataSource(const ExperimentConfig& config);

    const std::string& name() const noexcept { return name_; }

    /// Standardizes with train statistics, adds eta-scaled noise to the
    /// training portion only, then windows every split.
    PreparedData prepare(std::size_t lookback, std::size_t horizon, double eta, std::uint64_t noise_seed) const;

private:
    const ExperimentConfig* config_;
    std::string name_;
    std::optional<Dataset> dataset_;
    bool low_rank_task_ = false;
};

struct TrainRun {
    EvalReport report;
    TrainTrace trace;
    std::filesystem::path directory;
};

/// Trains and evaluates every horizon (and seed); writes checkpoint, trace and
/// reports under <outdir>/<dataset>/<variant>/<H>/.
std::vector<TrainRun> cmd_train(const ExperimentConfig& config, std::ostream& log);

/// One model per eta at the robustness horizon, evaluated on the clean test set.
RobustnessReport cmd_robustness(const ExperimentConfig& config, std::ostream& log);

enum class AblationAxis { Haar, Head, Dct, Rank, Lookback };

AblationAxis parse_axis(const std::string& text);
std::string to_string(AblationAxis axis);

struct AblationCell {
    std::string row;
    std::string column;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    Variant variant;
    double mse = 0.0;
    double mae = 0.0;
    std::uint64_t params = 0;
};

struct AblationTable {
    AblationAxis axis;
    std::string row_header;
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    std::vector<AblationCell> cells;

    /// Pivot: row_header, mse_<col>..., params_<col>...
    void write_csv(std::ostream& out, std::uint64_t fingerprint) const;
};

/// Runs the variant grid for one axis and writes <outdir>/<dataset>/ablation-<axis>.csv.
AblationTable cmd_ablate(const ExperimentConfig& config, AblationAxis axis, std::ostream& log);

/// Prints the parameter count with its breakdown.
ParamCount cmd_params(std::size_t lookback, std::size_t horizon, const Variant& variant, std::ostream& out);

/// Writes P * Q of a low-rank checkpoint as a headerless numeric CSV
/// (after the fingerprint comment line).
void cmd_export_weights(const std::filesystem::path& checkpoint, const std::filesystem::path& out_path);

/// Reads a CSV matrix written by cmd_export_weights.
Matrix read_weight_csv(const std::filesystem::path& path);

}  // namespace hadl
