#include "hadl/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "hadl/csv.hpp"
#include "hadl/error.hpp"

namespace hadl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config parsing

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
    throw Error(ErrorKind::InvalidConfig, "key '" + key + "': " + why + " (got '" + value + "')");
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    const std::string v = trim(text);
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, text, "not a number");
    return out;
}

double parse_double(const std::string& key, const std::string& text) {
    const double v = parse_number<double>(key, text);
    if (!std::isfinite(v)) bad_value(key, text, "must be finite");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    std::string v = trim(text);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    bad_value(key, text, "expected a boolean");
}

std::vector<std::string> split_list(const std::string& text) {
    std::string body = trim(text);
    if (!body.empty() && (body.front() == '[' || body.front() == '{')) body = body.substr(1);
    if (!body.empty() && (body.back() == ']' || body.back() == '}')) body.pop_back();
    std::vector<std::string> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& text, Parse parse) {
    std::vector<T> out;
    for (const auto& item : split_list(text)) out.push_back(parse(key, item));
    if (out.empty()) bad_value(key, text, "list must not be empty");
    return out;
}

std::size_t parse_size(const std::string& key, const std::string& text) {
    return parse_number<std::size_t>(key, text);
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
    return parse_number<std::uint64_t>(key, text);
}

template <typename T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_floating_point_v<T>) {
            out += csv::format(values[i]);
        } else {
            out += std::to_string(values[i]);
        }
    }
    return out;
}

std::string bool_text(bool v) { return v ? "true" : "false"; }

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys{
        {"dataset", "dataset name: a benchmark (ETTh1, ...), a registry entry, or synth:<sine_mix|random_walk|low_rank_target>"},
        {"data_path", "CSV file for the dataset (overrides the registry)"},
        {"registry", "registry file with <name>.path / <name>.convention / <name>.channels entries"},
        {"convention", "split convention: etth, ettm or ratio (default: dataset's own)"},
        {"standardize", "z-score every channel with training-split statistics"},
        {"stride", "sliding-window stride"},
        {"lookback", "lookback window L"},
        {"horizons", "comma-separated forecast horizons"},
        {"rank", "rank r of the low-rank head"},
        {"use_haar", "apply the one-level Haar front end"},
        {"use_dct", "apply the scaled DCT-II front end"},
        {"head", "lowrank or dense"},
        {"bias", "learn a bias vector"},
        {"lr", "ADAM learning rate"},
        {"beta1", "ADAM first-moment decay"},
        {"beta2", "ADAM second-moment decay"},
        {"epsilon", "ADAM epsilon"},
        {"l1_lambda", "L1 weight on the head matrices"},
        {"epochs", "maximum training epochs"},
        {"patience", "early-stopping patience in epochs"},
        {"batch_size", "windows per mini-batch"},
        {"seeds", "comma-separated base seeds (one run per seed)"},
        {"noise_eta", "noise intensity added to the training split by 'train'"},
        {"eta_list", "noise intensities for 'robustness' (must include 0)"},
        {"robust_horizon", "horizon used by 'robustness'"},
        {"robust_epochs", "maximum epochs for 'robustness'"},
        {"robust_patience", "patience for 'robustness'"},
        {"ablation_ranks", "ranks swept by 'ablate --axis rank'"},
        {"ablation_lookbacks", "lookbacks swept by 'ablate --axis lookback'"},
        {"synth_steps", "length of synthetic series"},
        {"synth_channels", "channels of synthetic data"},
        {"synth_periods", "sine_mix periods"},
        {"synth_amplitudes", "sine_mix amplitudes"},
        {"synth_rank", "teacher rank of low_rank_target"},
        {"synth_train_windows", "low_rank_target training windows"},
        {"synth_val_windows", "low_rank_target validation windows"},
        {"synth_test_windows", "low_rank_target test windows"},
        {"outdir", "output root directory"},
        {"jobs", "independent runs executed concurrently"},
    };
    return keys;
}

void apply_config_value(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    auto& t = c.train;
    if (key == "dataset") c.dataset = value;
    else if (key == "data_path") c.data_path = value;
    else if (key == "registry") c.registry = value;
    else if (key == "convention") {
        if (!value.empty()) parse_convention(value);
        c.convention = value;
    }
    else if (key == "standardize") c.standardize = parse_bool(key, value);
    else if (key == "stride") c.stride = parse_size(key, value);
    else if (key == "lookback") c.lookback = parse_size(key, value);
    else if (key == "horizons") c.horizons = parse_list<std::size_t>(key, value, parse_size);
    else if (key == "rank") c.variant.rank = parse_size(key, value);
    else if (key == "use_haar") c.variant.use_haar = parse_bool(key, value);
    else if (key == "use_dct") c.variant.use_dct = parse_bool(key, value);
    else if (key == "head") c.variant.head = parse_head(value);
    else if (key == "bias") c.variant.bias = parse_bool(key, value);
    else if (key == "lr" || key == "learning_rate") t.learning_rate = parse_double(key, value);
    else if (key == "beta1") t.beta1 = parse_double(key, value);
    else if (key == "beta2") t.beta2 = parse_double(key, value);
    else if (key == "epsilon") t.epsilon = parse_double(key, value);
    else if (key == "l1_lambda") t.l1_lambda = parse_double(key, value);
    else if (key == "epochs") t.max_epochs = parse_size(key, value);
    else if (key == "patience") t.patience = parse_size(key, value);
    else if (key == "batch_size") t.batch_size = parse_size(key, value);
    else if (key == "seeds" || key == "seed") c.seeds = parse_list<std::uint64_t>(key, value, parse_u64);
    else if (key == "noise_eta") t.noise_eta = parse_double(key, value);
    else if (key == "eta_list") c.eta_list = parse_list<double>(key, value, parse_double);
    else if (key == "robust_horizon") c.robust_horizon = parse_size(key, value);
    else if (key == "robust_epochs") c.robust_epochs = parse_size(key, value);
    else if (key == "robust_patience") c.robust_patience = parse_size(key, value);
    else if (key == "ablation_ranks") c.ablation_ranks = parse_list<std::size_t>(key, value, parse_size);
    else if (key == "ablation_lookbacks") c.ablation_lookbacks = parse_list<std::size_t>(key, value, parse_size);
    else if (key == "synth_steps") c.synth_steps = parse_size(key, value);
    else if (key == "synth_channels") c.synth_channels = parse_size(key, value);
    else if (key == "synth_periods") c.synth_periods = parse_list<double>(key, value, parse_double);
    else if (key == "synth_amplitudes") c.synth_amplitudes = parse_list<double>(key, value, parse_double);
    else if (key == "synth_rank") c.synth_rank = parse_size(key, value);
    else if (key == "synth_train_windows") c.synth_train_windows = parse_size(key, value);
    else if (key == "synth_val_windows") c.synth_val_windows = parse_size(key, value);
    else if (key == "synth_test_windows") c.synth_test_windows = parse_size(key, value);
    else if (key == "outdir") c.outdir = value;
    else if (key == "jobs") c.jobs = std::max<std::size_t>(1, parse_size(key, value));
    else throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
}

namespace {

std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::ParseError, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

}  // namespace

void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path) {
    for (const auto& [k, v] : read_key_values(path)) apply_config_value(config, k, v);
}

std::string serialize_config(const ExperimentConfig& c) {
    std::map<std::string, std::string> kv;
    const auto& t = c.train;
    kv["dataset"] = c.dataset;
    kv["data_path"] = c.data_path.string();
    kv["registry"] = c.registry.string();
    kv["convention"] = c.convention;
    kv["standardize"] = bool_text(c.standardize);
    kv["stride"] = std::to_string(c.stride);
    kv["lookback"] = std::to_string(c.lookback);
    kv["horizons"] = join(c.horizons);
    kv["rank"] = std::to_string(c.variant.rank);
    kv["use_haar"] = bool_text(c.variant.use_haar);
    kv["use_dct"] = bool_text(c.variant.use_dct);
    kv["head"] = to_string(c.variant.head);
    kv["bias"] = bool_text(c.variant.bias);
    kv["lr"] = csv::format(t.learning_rate);
    kv["beta1"] = csv::format(t.beta1);
    kv["beta2"] = csv::format(t.beta2);
    kv["epsilon"] = csv::format(t.epsilon);
    kv["l1_lambda"] = csv::format(t.l1_lambda);
    kv["epochs"] = std::to_string(t.max_epochs);
    kv["patience"] = std::to_string(t.patience);
    kv["batch_size"] = std::to_string(t.batch_size);
    kv["seeds"] = join(c.seeds);
    kv["noise_eta"] = csv::format(t.noise_eta);
    kv["eta_list"] = join(c.eta_list);
    kv["robust_horizon"] = std::to_string(c.robust_horizon);
    kv["robust_epochs"] = std::to_string(c.robust_epochs);
    kv["robust_patience"] = std::to_string(c.robust_patience);
    kv["ablation_ranks"] = join(c.ablation_ranks);
    kv["ablation_lookbacks"] = join(c.ablation_lookbacks);
    kv["synth_steps"] = std::to_string(c.synth_steps);
    kv["synth_channels"] = std::to_string(c.synth_channels);
    kv["synth_periods"] = join(c.synth_periods);
    kv["synth_amplitudes"] = join(c.synth_amplitudes);
    kv["synth_rank"] = std::to_string(c.synth_rank);
    kv["synth_train_windows"] = std::to_string(c.synth_train_windows);
    kv["synth_val_windows"] = std::to_string(c.synth_val_windows);
    kv["synth_test_windows"] = std::to_string(c.synth_test_windows);
    // outdir and jobs do not change results and are left out.
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

std::uint64_t config_fingerprint(const ExperimentConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : serialize_config(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = splitmix64(base);
    for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

// ---------------------------------------------------------------------------
// data

namespace {

constexpr std::string_view kSynthPrefix = "synth:";

struct RegistryEntry {
    std::filesystem::path path;
    std::string convention;
    std::optional<std::size_t> channels;
};

std::optional<RegistryEntry> lookup_registry(const std::filesystem::path& registry, const std::string& name) {
    if (registry.empty()) return std::nullopt;
    RegistryEntry e;
    bool found = false;
    for (const auto& [k, v] : read_key_values(registry)) {
        const auto dot = k.rfind('.');
        if (dot == std::string::npos || k.substr(0, dot) != name) continue;
        const std::string field = k.substr(dot + 1);
        found = true;
        if (field == "path") {
            e.path = v;
            if (e.path.is_relative()) e.path = registry.parent_path() / e.path;
        } else if (field == "convention") {
            e.convention = v;
        } else if (field == "channels") {
            e.channels = parse_size(k, v);
        } else {
            throw Error(ErrorKind::InvalidConfig, registry.string() + ": unknown registry field '" + field + "'");
        }
    }
    if (!found) return std::nullopt;
    return e;
}

void add_noise(Tensor3& t, double eta, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : t.values()) v += normal(rng) * eta;
}

}  // namespace

DataSource::DataSource(const ExperimentConfig& config) : config_(&config), name_(config.dataset) {
    if (config.seeds.empty()) throw Error(ErrorKind::InvalidConfig, "at least one seed is required");
    const std::uint64_t data_seed = derive_seed(config.seeds.front(), {0xDA7A});
    if (name_.starts_with(kSynthPrefix)) {
        const SynthKind kind = parse_synth_kind(name_.substr(kSynthPrefix.size()));
        name_ = "synth_" + name_.substr(kSynthPrefix.size());
        if (kind == SynthKind::LowRankTarget) {
            low_rank_task_ = true;
            return;
        }
        SynthParams p;
        p.steps = config.synth_steps;
        p.channels = config.synth_channels;
        p.periods = config.synth_periods;
        p.amplitudes = config.synth_amplitudes;
        dataset_ = synth(kind, p, data_seed);
        dataset_->name = name_;
    } else {
        CsvSchema schema{name_, std::nullopt};
        std::filesystem::path path = config.data_path;
        std::string convention = config.convention;
        if (auto entry = lookup_registry(config.registry, name_)) {
            if (path.empty()) path = entry->path;
            if (convention.empty()) convention = entry->convention;
            schema.expected_channels = entry->channels;
        }
        if (path.empty()) {
            throw Error(ErrorKind::UnknownDataset, "no data path for dataset '" + name_ +
                                                       "'; set data_path or add it to a registry");
        }
        if (!std::filesystem::exists(path)) {
            throw Error(ErrorKind::Io, "dataset file " + path.string() + " does not exist");
        }
        dataset_ = load_csv(path, schema);
        if (!convention.empty()) {
            dataset_->bounds = split_bounds(dataset_->series.steps(), parse_convention(convention));
        }
    }
    if (!config.convention.empty() && dataset_) {
        dataset_->bounds = split_bounds(dataset_->series.steps(), parse_convention(config.convention));
    }
}

PreparedData DataSource::prepare(std::size_t lookback, std::size_t horizon, double eta,
                                 std::uint64_t noise_seed) const {
    const auto& c = *config_;
    if (low_rank_task_) {
        LowRankTaskParams p;
        p.channels = c.synth_channels;
        p.lookback = lookback;
        p.horizon = horizon;
        p.rank = c.synth_rank;
        p.train_windows = c.synth_train_windows;
        p.val_windows = c.synth_val_windows;
        p.test_windows = c.synth_test_windows;
        LowRankTask task = synth_low_rank_task(p, derive_seed(c.seeds.front(), {0xDA7A}));
        WindowSet train = std::move(task.train);
        if (eta > 0.0) {
            WindowBatch all = train.all();
            std::mt19937_64 rng(noise_seed);
            add_noise(all.inputs, eta, rng);
            add_noise(all.targets, eta, rng);
            train = WindowSet::from_tensors(std::move(all.inputs), std::move(all.targets));
        }
        return {name_, p.channels, std::move(train), std::move(task.val), std::move(task.test)};
    }

    Splits s = split(*dataset_, lookback);
    if (c.standardize) {
        const Scaler scaler = Scaler::fit(s.train);
        s.train = scaler.transform(s.train);
        s.val = scaler.transform(s.val);
        s.test = scaler.transform(s.test);
    }
    s.train = inject_noise(s.train, eta, noise_seed);
    return {name_, dataset_->series.channels(), WindowSet::from_segment(s.train, lookback, horizon, c.stride),
            WindowSet::from_segment(s.val, lookback, horizon, c.stride),
            WindowSet::from_segment(s.test, lookback, horizon, c.stride)};
}

// ---------------------------------------------------------------------------
// commands

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads; results keep index order.
template <typename R>
std::vector<R> run_indexed(std::size_t n, std::size_t jobs, const std::function<R(std::size_t)>& fn) {
    std::vector<std::optional<R>> slots(n);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) slots[i].emplace(fn(i));
    } else {
        for (std::size_t start = 0; start < n; start += jobs) {
            std::vector<std::future<R>> wave;
            for (std::size_t i = start; i < std::min(n, start + jobs); ++i) {
                wave.push_back(std::async(std::launch::async, fn, i));
            }
            for (std::size_t k = 0; k < wave.size(); ++k) slots[start + k].emplace(wave[k].get());
        }
    }
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

class Logger {
public:
    Logger(std::ostream& out, bool quiet) : out_(out), quiet_(quiet) {}
    void operator()(const std::string& line) {
        if (quiet_) return;
        std::lock_guard lock(mu_);
        out_ << line << '\n';
        out_.flush();
    }

private:
    std::ostream& out_;
    bool quiet_;
    std::mutex mu_;
};

std::string fmt_eta(double eta) {
    return csv::format(eta);
}

json trace_json(const TrainTrace& trace) {
    json j;
    j["epochs"] = json::array();
    for (const auto& e : trace.epochs) {
        j["epochs"].push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_mse", e.val_mse}});
    }
    j["best_epoch"] = trace.best_epoch ? json(*trace.best_epoch) : json(nullptr);
    j["stopped_early"] = trace.stopped_early;
    j["final_grad_norm"] = trace.final_grad_norm;
    return j;
}

json report_json(const EvalReport& r) {
    return {{"dataset", r.dataset}, {"lookback", r.lookback},   {"horizon", r.horizon},
            {"variant", r.variant.label()}, {"use_haar", r.variant.use_haar}, {"use_dct", r.variant.use_dct},
            {"head", to_string(r.variant.head)}, {"rank", r.variant.rank}, {"bias", r.variant.bias},
            {"seed", r.seed},       {"eta", r.eta},             {"mse", r.mse},
            {"mae", r.mae},         {"params", r.params}};
}

json config_json(const ExperimentConfig& c) {
    json j;
    std::istringstream in(serialize_config(c));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        j[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return j;
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    return out;
}

json bundle_header(const ExperimentConfig& config, std::uint64_t fingerprint, const std::string& command) {
    return {{"command", command},
            {"config_fingerprint", csv::hex(fingerprint)},
            {"config", config_json(config)},
            {"init", "uniform(-1/sqrt(d_in), 1/sqrt(d_in)), bias zero"}};
}

struct SingleRun {
    HadlModel model;
    TrainTrace trace;
    EvalScores test;
};

SingleRun train_and_test(const ExperimentConfig& config, const PreparedData& data, std::size_t lookback,
                         std::size_t horizon, const Variant& variant, std::uint64_t base_seed,
                         const TrainConfig& tc_in) {
    HadlModel init = init_model(lookback, horizon, variant, derive_seed(base_seed, {horizon, lookback}));
    TrainConfig tc = tc_in;
    tc.seed = derive_seed(base_seed, {horizon, lookback, 1});
    (void)config;
    TrainResult result = train(init, data.train, data.val, tc);
    const EvalScores scores = evaluate(result.model, data.test);
    return {std::move(result.model), std::move(result.trace), scores};
}

}  // namespace

std::vector<TrainRun> cmd_train(const ExperimentConfig& config, std::ostream& log_stream) {
    config.train.validate();
    if (config.horizons.empty()) throw Error(ErrorKind::InvalidConfig, "no horizons given");
    Logger log(log_stream, config.quiet);
    const DataSource source(config);
    const std::uint64_t fp = config_fingerprint(config);

    // Prepare everything before writing anything so a bad config leaves no
    // partial output behind.
    std::vector<PreparedData> prepared;
    for (std::size_t h : config.horizons) {
        prepared.push_back(source.prepare(config.lookback, h, config.train.noise_eta,
                                          derive_seed(config.seeds.front(), {h, 0x401Eull})));
        (void)HadlModel(config.lookback, h, config.variant);  // shape check
    }

    struct Task {
        std::size_t h_index;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < config.horizons.size(); ++i) {
        for (auto s : config.seeds) tasks.push_back({i, s});
    }

    const auto variant_dir = config.outdir / source.name() / config.variant.label();
    std::function<TrainRun(std::size_t)> run = [&](std::size_t k) {
        const Task& task = tasks[k];
        const std::size_t h = config.horizons[task.h_index];
        const PreparedData& data = prepared[task.h_index];
        log("train " + source.name() + " H=" + std::to_string(h) + " seed=" + std::to_string(task.seed) + " (" +
            std::to_string(data.train.size()) + " train windows)");
        SingleRun r = train_and_test(config, data, config.lookback, h, config.variant, task.seed, config.train);

        EvalReport rep{source.name(), config.lookback, h,          config.variant,
                       task.seed,     config.train.noise_eta, r.test.mse, r.test.mae,
                       r.model.param_count().total};
        auto dir = variant_dir / std::to_string(h);
        if (config.seeds.size() > 1) dir /= "seed-" + std::to_string(task.seed);
        std::filesystem::create_directories(dir);
        save_checkpoint(r.model, dir / "model.ckpt", fp);
        write_trace_csv(r.trace, dir / "trace.csv", fp);
        {
            auto out = open_out(dir / "eval.csv");
            write_eval_csv(out, {rep}, fp);
        }
        json bundle = bundle_header(config, fp, "train");
        bundle["report"] = report_json(rep);
        bundle["trace"] = trace_json(r.trace);
        write_json(dir / "report.json", bundle);
        log("  H=" + std::to_string(h) + " test mse=" + csv::format(rep.mse) + " mae=" + csv::format(rep.mae) +
            " best_epoch=" + (r.trace.best_epoch ? std::to_string(*r.trace.best_epoch) : std::string("-")));
        return TrainRun{rep, r.trace, dir};
    };
    std::vector<TrainRun> runs = run_indexed<TrainRun>(tasks.size(), config.jobs, run);

    std::vector<EvalReport> reports;
    for (const auto& r : runs) reports.push_back(r.report);
    {
        auto out = open_out(variant_dir / "eval.csv");
        write_eval_csv(out, reports, fp);
    }
    if (config.seeds.size() > 1) {
        auto out = open_out(variant_dir / "summary.csv");
        csv::write_fingerprint(out, fp);
        csv::write_row(out, {"dataset", "horizon", "variant", "seeds", "mse_mean", "mse_std", "mae_mean", "mae_std"});
        for (std::size_t h : config.horizons) {
            std::vector<double> ms, as;
            for (const auto& r : reports) {
                if (r.horizon == h) {
                    ms.push_back(r.mse);
                    as.push_back(r.mae);
                }
            }
            auto stats = [](const std::vector<double>& v) {
                const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
                double var = 0.0;
                for (double x : v) var += (x - mean) * (x - mean);
                var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
                return std::pair{mean, std::sqrt(var)};
            };
            const auto [mm, msd] = stats(ms);
            const auto [am, asd] = stats(as);
            csv::write_row(out, {source.name(), std::to_string(h), config.variant.label(), std::to_string(ms.size()),
                                 csv::format(mm), csv::format(msd), csv::format(am), csv::format(asd)});
        }
    }
    return runs;
}

RobustnessReport cmd_robustness(const ExperimentConfig& config, std::ostream& log_stream) {
    if (config.eta_list.empty()) throw Error(ErrorKind::InvalidConfig, "eta list is empty");
    if (std::find(config.eta_list.begin(), config.eta_list.end(), 0.0) == config.eta_list.end()) {
        throw Error(ErrorKind::MissingZeroEta, "eta list must contain 0.0");
    }
    for (double eta : config.eta_list) {
        if (!(eta >= 0.0)) throw Error(ErrorKind::InvalidConfig, "noise intensities must be >= 0");
    }
    TrainConfig tc = config.train;
    tc.max_epochs = config.robust_epochs;
    tc.patience = std::min(config.robust_patience, std::max<std::size_t>(1, config.robust_epochs));
    tc.validate();

    Logger log(log_stream, config.quiet);
    const DataSource source(config);
    const std::uint64_t fp = config_fingerprint(config);
    const std::size_t h = config.robust_horizon;
    const std::uint64_t seed = config.seeds.front();
    (void)HadlModel(config.lookback, h, config.variant);

    std::vector<PreparedData> prepared;
    for (std::size_t i = 0; i < config.eta_list.size(); ++i) {
        prepared.push_back(source.prepare(config.lookback, h, config.eta_list[i], derive_seed(seed, {h, i, 0x401Eull})));
    }

    const auto dir = config.outdir / source.name() / config.variant.label() / std::to_string(h);
    std::function<EvalScores(std::size_t)> run = [&](std::size_t i) {
        const double eta = config.eta_list[i];
        log("robustness " + source.name() + " H=" + std::to_string(h) + " eta=" + fmt_eta(eta));
        // Same initialization and shuffling for every eta: only the noise differs.
        SingleRun r = train_and_test(config, prepared[i], config.lookback, h, config.variant, seed, tc);
        const auto eta_dir = dir / ("eta-" + fmt_eta(eta));
        std::filesystem::create_directories(eta_dir);
        save_checkpoint(r.model, eta_dir / "model.ckpt", fp);
        write_trace_csv(r.trace, eta_dir / "trace.csv", fp);
        log("  eta=" + fmt_eta(eta) + " test mse=" + csv::format(r.test.mse));
        return r.test;
    };
    const auto scores = run_indexed<EvalScores>(config.eta_list.size(), config.jobs, run);

    std::vector<double> mses, maes;
    for (const auto& s : scores) {
        mses.push_back(s.mse);
        maes.push_back(s.mae);
    }
    RobustnessReport report =
        make_robustness_report(source.name(), h, config.variant.label(), config.eta_list, mses, maes);

    // Soft monotonicity check: more noise should not fit better.
    std::vector<std::pair<double, double>> by_eta;
    for (std::size_t i = 0; i < config.eta_list.size(); ++i) by_eta.emplace_back(config.eta_list[i], mses[i]);
    std::sort(by_eta.begin(), by_eta.end());
    for (std::size_t i = 1; i < by_eta.size(); ++i) {
        if (by_eta[i].second < by_eta[i - 1].second * 0.99) {
            log("warning: MSE at eta=" + fmt_eta(by_eta[i].first) + " is lower than at eta=" +
                fmt_eta(by_eta[i - 1].first));
        }
    }
    if (!report.mav) log("MAV undefined: no eta > 0 in the list");

    std::filesystem::create_directories(dir);
    {
        auto out = open_out(dir / "robustness.csv");
        write_robustness_csv(out, report, fp);
    }
    json bundle = bundle_header(config, fp, "robustness");
    bundle["dataset"] = report.dataset;
    bundle["horizon"] = report.horizon;
    bundle["variant"] = report.variant;
    bundle["eta_list"] = report.eta_list;
    bundle["mse"] = report.mse_per_eta;
    bundle["mae"] = report.mae_per_eta;
    bundle["nrr"] = report.nrr_per_eta;
    bundle["mav"] = report.mav ? json(*report.mav) : json("undefined");
    write_json(dir / "robustness.json", bundle);
    return report;
}

AblationAxis parse_axis(const std::string& text) {
    if (text == "haar") return AblationAxis::Haar;
    if (text == "head") return AblationAxis::Head;
    if (text == "dct") return AblationAxis::Dct;
    if (text == "rank") return AblationAxis::Rank;
    if (text == "lookback") return AblationAxis::Lookback;
    throw Error(ErrorKind::UnknownAxis, "unknown ablation axis '" + text + "'");
}

std::string to_string(AblationAxis axis) {
    switch (axis) {
        case AblationAxis::Haar: return "haar";
        case AblationAxis::Head: return "head";
        case AblationAxis::Dct: return "dct";
        case AblationAxis::Rank: return "rank";
        case AblationAxis::Lookback: return "lookback";
    }
    return "haar";
}

void AblationTable::write_csv(std::ostream& out, std::uint64_t fingerprint) const {
    csv::write_fingerprint(out, fingerprint);
    std::vector<std::string> header{row_header};
    for (const auto& c : columns) header.push_back("mse_" + c);
    for (const auto& c : columns) header.push_back("params_" + c);
    csv::write_row(out, header);
    auto find = [&](const std::string& r, const std::string& c) -> const AblationCell& {
        for (const auto& cell : cells) {
            if (cell.row == r && cell.column == c) return cell;
        }
        throw Error(ErrorKind::ShapeMismatch, "missing ablation cell " + r + "/" + c);
    };
    for (const auto& r : rows) {
        std::vector<std::string> fields{r};
        for (const auto& c : columns) fields.push_back(csv::format(find(r, c).mse));
        for (const auto& c : columns) fields.push_back(std::to_string(find(r, c).params));
        csv::write_row(out, fields);
    }
}

AblationTable cmd_ablate(const ExperimentConfig& config, AblationAxis axis, std::ostream& log_stream) {
    config.train.validate();
    Logger log(log_stream, config.quiet);

    AblationTable table{axis, "H", {}, {}, {}};
    const Variant base = config.variant;
    auto add_cell = [&](const std::string& row, const std::string& col, std::size_t lookback, std::size_t horizon,
                        const Variant& v) {
        AblationCell cell;
        cell.row = row;
        cell.column = col;
        cell.lookback = lookback;
        cell.horizon = horizon;
        cell.variant = v;
        cell.params = param_count(lookback, horizon, v.rank, v.bias, v.use_haar, v.head).total;
        table.cells.push_back(cell);
        if (std::find(table.rows.begin(), table.rows.end(), row) == table.rows.end()) table.rows.push_back(row);
        if (std::find(table.columns.begin(), table.columns.end(), col) == table.columns.end()) {
            table.columns.push_back(col);
        }
    };

    for (std::size_t h : config.horizons) {
        const std::string row = std::to_string(h);
        switch (axis) {
            case AblationAxis::Haar: {
                Variant on = base, off = base;
                on.use_haar = true;
                off.use_haar = false;
                add_cell(row, "w_haar", config.lookback, h, on);
                add_cell(row, "wo_haar", config.lookback, h, off);
                break;
            }
            case AblationAxis::Head: {
                Variant low = base, dense = base;
                low.head = HeadKind::LowRank;
                dense.head = HeadKind::Dense;
                add_cell(row, "lowrank", config.lookback, h, low);
                add_cell(row, "dense", config.lookback, h, dense);
                break;
            }
            case AblationAxis::Dct: {
                Variant on = base, off = base;
                on.use_dct = true;
                off.use_dct = false;
                add_cell(row, "w_dct", config.lookback, h, on);
                add_cell(row, "wo_dct", config.lookback, h, off);
                break;
            }
            case AblationAxis::Rank: {
                for (std::size_t r : config.ablation_ranks) {
                    Variant v = base;
                    v.head = HeadKind::LowRank;
                    v.rank = r;
                    add_cell(row, "r" + std::to_string(r), config.lookback, h, v);
                }
                break;
            }
            case AblationAxis::Lookback: break;
        }
    }
    if (axis == AblationAxis::Lookback) {
        table.row_header = "L";
        for (std::size_t l : config.ablation_lookbacks) {
            for (std::size_t h : config.horizons) add_cell(std::to_string(l), "H" + std::to_string(h), l, h, base);
        }
    }

    const DataSource source(config);
    const std::uint64_t fp = config_fingerprint(config);
    const std::uint64_t seed = config.seeds.front();

    std::map<std::pair<std::size_t, std::size_t>, PreparedData> prepared;
    for (const auto& cell : table.cells) {
        (void)HadlModel(cell.lookback, cell.horizon, cell.variant);
        const auto key = std::pair{cell.lookback, cell.horizon};
        if (!prepared.contains(key)) {
            prepared.emplace(key, source.prepare(cell.lookback, cell.horizon, config.train.noise_eta,
                                                 derive_seed(seed, {cell.horizon, cell.lookback, 0x401Eull})));
        }
    }

    std::function<EvalScores(std::size_t)> run = [&](std::size_t i) {
        const auto& cell = table.cells[i];
        log("ablate " + to_string(axis) + " " + table.row_header + "=" + cell.row + " " + cell.column);
        SingleRun r = train_and_test(config, prepared.at({cell.lookback, cell.horizon}), cell.lookback, cell.horizon,
                                     cell.variant, seed, config.train);
        log("  " + cell.row + "/" + cell.column + " test mse=" + csv::format(r.test.mse));
        return r.test;
    };
    const auto scores = run_indexed<EvalScores>(table.cells.size(), config.jobs, run);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        table.cells[i].mse = scores[i].mse;
        table.cells[i].mae = scores[i].mae;
    }

    const auto dir = config.outdir / source.name();
    std::filesystem::create_directories(dir);
    {
        auto out = open_out(dir / ("ablation-" + to_string(axis) + ".csv"));
        table.write_csv(out, fp);
    }
    json bundle = bundle_header(config, fp, "ablate");
    bundle["axis"] = to_string(axis);
    bundle["cells"] = json::array();
    for (const auto& c : table.cells) {
        bundle["cells"].push_back({{"row", c.row},
                                   {"column", c.column},
                                   {"lookback", c.lookback},
                                   {"horizon", c.horizon},
                                   {"variant", c.variant.label()},
                                   {"mse", c.mse},
                                   {"mae", c.mae},
                                   {"params", c.params}});
    }
    write_json(dir / ("ablation-" + to_string(axis) + ".json"), bundle);
    return table;
}

ParamCount cmd_params(std::size_t lookback, std::size_t horizon, const Variant& variant, std::ostream& out) {
    const ParamCount pc = param_count(lookback, horizon, variant.rank, variant.bias, variant.use_haar, variant.head);
    std::ostringstream k;
    k << std::fixed << std::setprecision(3) << static_cast<double>(pc.total) / 1000.0;
    out << "total " << pc.total << " (" << k.str() << "K)\n";
    for (const auto& [name, count] : pc.breakdown) out << "  " << name << " " << count << "\n";
    return pc;
}

void cmd_export_weights(const std::filesystem::path& checkpoint, const std::filesystem::path& out_path) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    const Matrix w = ck.model.effective_weight();
    if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
    auto out = open_out(out_path);
    csv::write_fingerprint(out, ck.fingerprint);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(w.cols()));
        for (Eigen::Index j = 0; j < w.cols(); ++j) row.push_back(csv::format(w(i, j)));
        csv::write_row(out, row);
    }
}

Matrix read_weight_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        std::vector<double> row;
        for (const auto& cell : split_list(line)) row.push_back(parse_double("weight", cell));
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw Error(ErrorKind::ParseError, path.string() + ": ragged weight matrix");
        }
        rows.push_back(std::move(row));
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

}  // namespace hadl
