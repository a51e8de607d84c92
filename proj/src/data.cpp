#include "hadl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "hadl/error.hpp"

namespace hadl {

const std::vector<KnownDataset>& known_datasets() {
    static const std::vector<KnownDataset> table{
        {"ETTh1", 7, 17420, "1 hour", "etth"},
        {"ETTh2", 7, 17420, "1 hour", "etth"},
        {"ETTm1", 7, 69680, "15 min", "ettm"},
        {"ETTm2", 7, 69680, "15 min", "ettm"},
        {"Weather", 21, 52697, "10 min", "ratio"},
        {"Traffic", 862, 17544, "1 hour", "ratio"},
        {"Electricity", 321, 26304, "15 min", "ratio"},
    };
    return table;
}

std::optional<KnownDataset> find_known_dataset(const std::string& name) {
    for (const auto& d : known_datasets()) {
        if (d.name == name) return d;
    }
    return std::nullopt;
}

namespace {

// Splits one CSV record, honouring double quotes.
std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

bool is_missing(const std::string& cell) {
    std::string lower = cell;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    return lower.empty() || lower == "nan" || lower == "na" || lower == "null" || lower == "none";
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) {
        throw Error(ErrorKind::EmptyFile, path.string() + " has no header row");
    }
    const auto header = split_record(line);
    if (header.size() < 2) {
        throw Error(ErrorKind::ParseError, path.string() + ": header needs a timestamp column and at least one feature");
    }
    const std::size_t channels = header.size() - 1;

    std::vector<double> flat;  // row-major steps x channels while reading
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split_record(line);
        if (fields.size() != header.size()) {
            throw Error(ErrorKind::ParseError, path.string() + ": row " + std::to_string(row) + " has " +
                                                   std::to_string(fields.size()) + " fields, expected " +
                                                   std::to_string(header.size()));
        }
        for (std::size_t c = 1; c < fields.size(); ++c) {
            const std::string cell = trim(fields[c]);
            if (is_missing(cell)) {
                throw Error(ErrorKind::MissingValue, path.string() + ": row " + std::to_string(row) + ", column '" +
                                                         header[c] + "' is empty");
            }
            double value = 0.0;
            const char* first = cell.data();
            if (*first == '+') ++first;
            const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), value);
            if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
                throw Error(ErrorKind::ParseError, path.string() + ": row " + std::to_string(row) + ", column '" +
                                                       header[c] + "': cannot parse '" + cell + "'");
            }
            flat.push_back(value);
        }
    }
    if (flat.empty()) throw Error(ErrorKind::EmptyFile, path.string() + " has no data rows");

    const std::size_t steps = flat.size() / channels;
    Dataset ds;
    ds.name = schema.name.empty() ? path.stem().string() : schema.name;
    ds.series.names.assign(header.begin() + 1, header.end());
    for (auto& n : ds.series.names) n = trim(n);
    ds.series.values.resize(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(steps));
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t c = 0; c < channels; ++c) {
            ds.series.values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = flat[t * channels + c];
        }
    }

    std::optional<std::size_t> expected = schema.expected_channels;
    SplitConvention convention = SplitConvention::Ratio;
    if (auto known = find_known_dataset(ds.name)) {
        if (!expected) expected = known->channels;
        ds.granularity = known->granularity;
        convention = parse_convention(known->convention);
    }
    if (expected && *expected != channels) {
        throw Error(ErrorKind::SchemaMismatch, ds.name + ": expected " + std::to_string(*expected) +
                                                   " channels, file has " + std::to_string(channels));
    }
    // Files too short to split still load; split() rejects them later.
    try {
        ds.bounds = split_bounds(steps, convention);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::SegmentTooShort) throw;
    }
    return ds;
}

SplitConvention parse_convention(const std::string& text) {
    if (text == "etth" || text == "ETTh") return SplitConvention::Etth;
    if (text == "ettm" || text == "ETTm") return SplitConvention::Ettm;
    if (text == "ratio" || text == "custom" || text == "70/10/20") return SplitConvention::Ratio;
    throw Error(ErrorKind::UnknownConvention, "unknown split convention '" + text + "'");
}

std::string to_string(SplitConvention convention) {
    switch (convention) {
        case SplitConvention::Etth: return "etth";
        case SplitConvention::Ettm: return "ettm";
        case SplitConvention::Ratio: return "ratio";
    }
    return "ratio";
}

SplitBounds split_bounds(std::size_t steps, SplitConvention convention) {
    SplitBounds b;
    auto fixed = [&](std::size_t train, std::size_t val, std::size_t test) {
        if (steps < train + val + test) {
            throw Error(ErrorKind::SegmentTooShort, "series of " + std::to_string(steps) +
                                                        " steps is shorter than the split convention needs (" +
                                                        std::to_string(train + val + test) + ")");
        }
        b = {train, train + val, train + val + test};
    };
    switch (convention) {
        case SplitConvention::Etth: fixed(12 * 30 * 24, 4 * 30 * 24, 4 * 30 * 24); break;
        case SplitConvention::Ettm: fixed(12 * 30 * 24 * 4, 4 * 30 * 24 * 4, 4 * 30 * 24 * 4); break;
        case SplitConvention::Ratio: {
            const auto train = static_cast<std::size_t>(static_cast<double>(steps) * 0.7);
            const auto test = static_cast<std::size_t>(static_cast<double>(steps) * 0.2);
            b = {train, steps - test, steps};
            break;
        }
    }
    if (b.train_end == 0 || b.val_end <= b.train_end || b.test_end <= b.val_end) {
        throw Error(ErrorKind::SegmentTooShort, "series of " + std::to_string(steps) + " steps is too short to split");
    }
    return b;
}

namespace {

Segment slice(const SeriesTensor& s, std::size_t begin, std::size_t target_begin, std::size_t end) {
    Segment seg;
    seg.names = s.names;
    seg.begin = begin;
    seg.target_begin = target_begin;
    seg.values = s.values.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    return seg;
}

}  // namespace

Splits split(const Dataset& dataset, std::size_t reach_back) {
    const auto& b = dataset.bounds;
    if (b.test_end > dataset.series.steps() || b.train_end == 0 || b.val_end <= b.train_end ||
        b.test_end <= b.val_end) {
        throw Error(ErrorKind::InvalidConfig, dataset.name + ": split bounds do not fit the series");
    }
    const std::size_t val_begin = b.train_end - std::min(reach_back, b.train_end);
    const std::size_t test_begin = b.val_end - std::min(reach_back, b.val_end);
    return {slice(dataset.series, 0, 0, b.train_end), slice(dataset.series, val_begin, b.train_end, b.val_end),
            slice(dataset.series, test_begin, b.val_end, b.test_end), b};
}

Splits split(const Dataset& dataset, SplitConvention convention, std::size_t reach_back) {
    Dataset copy = dataset;
    copy.bounds = split_bounds(dataset.series.steps(), convention);
    return split(copy, reach_back);
}

Scaler Scaler::fit(const Segment& train) {
    if (train.length() == 0) throw Error(ErrorKind::EmptyData, "cannot fit a scaler on an empty segment");
    Scaler s;
    const auto n = static_cast<double>(train.length());
    s.mean_ = train.values.rowwise().sum() / n;
    s.std_.resize(train.values.rows());
    for (Eigen::Index c = 0; c < train.values.rows(); ++c) {
        const double var = (train.values.row(c).array() - s.mean_(c)).square().sum() / n;
        const double sd = std::sqrt(var);
        if (!(sd > 0.0)) {
            const std::string name = static_cast<std::size_t>(c) < train.names.size() ? train.names[c] : std::to_string(c);
            throw Error(ErrorKind::ConstantChannel, "channel '" + name + "' is constant on the training segment");
        }
        s.std_(c) = sd;
    }
    return s;
}

Segment Scaler::transform(const Segment& segment) const {
    if (segment.values.rows() != mean_.size()) {
        throw Error(ErrorKind::ShapeMismatch, "scaler fitted on " + std::to_string(mean_.size()) + " channels");
    }
    Segment out = segment;
    for (Eigen::Index c = 0; c < out.values.rows(); ++c) {
        out.values.row(c) = (out.values.row(c).array() - mean_(c)) / std_(c);
    }
    return out;
}

Segment Scaler::inverse(const Segment& segment) const {
    if (segment.values.rows() != mean_.size()) {
        throw Error(ErrorKind::ShapeMismatch, "scaler fitted on " + std::to_string(mean_.size()) + " channels");
    }
    Segment out = segment;
    for (Eigen::Index c = 0; c < out.values.rows(); ++c) {
        out.values.row(c) = out.values.row(c).array() * std_(c) + mean_(c);
    }
    return out;
}

Segment inject_noise(const Segment& segment, double eta, std::uint64_t seed) {
    if (!(eta >= 0.0)) throw Error(ErrorKind::InvalidConfig, "noise intensity must be >= 0");
    Segment out = segment;
    if (eta == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double* v = out.values.data();
    for (Eigen::Index i = 0; i < out.values.size(); ++i) v[i] += normal(rng) * eta;
    return out;
}

std::size_t window_count(std::size_t length, std::size_t lookback, std::size_t horizon, std::size_t stride) {
    if (stride == 0 || length < lookback + horizon) return 0;
    return (length - lookback - horizon) / stride + 1;
}

WindowSet WindowSet::from_segment(const Segment& segment, std::size_t lookback, std::size_t horizon,
                                  std::size_t stride) {
    if (lookback == 0 || horizon == 0 || stride == 0) {
        throw Error(ErrorKind::InvalidConfig, "lookback, horizon and stride must be positive");
    }
    // The first target step may not precede target_begin.
    const std::size_t skip = segment.target_begin > segment.begin + lookback
                                 ? segment.target_begin - segment.begin - lookback
                                 : 0;
    const std::size_t usable = segment.length() > skip ? segment.length() - skip : 0;
    if (usable < lookback + horizon) {
        throw Error(ErrorKind::SegmentTooShort, "segment of " + std::to_string(usable) + " usable steps cannot hold L=" +
                                                    std::to_string(lookback) + " + H=" + std::to_string(horizon));
    }
    WindowSet ws;
    ws.channels_ = segment.channels();
    ws.lookback_ = lookback;
    ws.horizon_ = horizon;
    ws.segment_ = std::make_shared<const Segment>(segment);
    const std::size_t count = window_count(usable, lookback, horizon, stride);
    ws.origins_.reserve(count);
    for (std::size_t i = 0; i < count; ++i) ws.origins_.push_back(segment.begin + skip + i * stride);
    return ws;
}

WindowSet WindowSet::from_tensors(Tensor3 inputs, Tensor3 targets) {
    if (inputs.batch() != targets.batch() || inputs.channels() != targets.channels()) {
        throw Error(ErrorKind::ShapeMismatch, "inputs and targets disagree on batch or channel count");
    }
    if (inputs.length() == 0 || targets.length() == 0) {
        throw Error(ErrorKind::InvalidConfig, "window tensors need positive lookback and horizon");
    }
    WindowSet ws;
    ws.channels_ = inputs.channels();
    ws.lookback_ = inputs.length();
    ws.horizon_ = targets.length();
    ws.origins_.resize(inputs.batch());
    for (std::size_t i = 0; i < ws.origins_.size(); ++i) ws.origins_[i] = i;
    ws.inputs_ = std::make_shared<const Tensor3>(std::move(inputs));
    ws.targets_ = std::make_shared<const Tensor3>(std::move(targets));
    return ws;
}

WindowBatch WindowSet::batch(std::span<const std::size_t> indices) const {
    WindowBatch out{Tensor3(indices.size(), channels_, lookback_), Tensor3(indices.size(), channels_, horizon_), {}};
    out.origins.reserve(indices.size());
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const std::size_t idx = indices[b];
        if (idx >= origins_.size()) {
            throw Error(ErrorKind::ShapeMismatch, "window index " + std::to_string(idx) + " out of range");
        }
        out.origins.push_back(origins_[idx]);
        if (segment_) {
            const auto start = static_cast<Eigen::Index>(origins_[idx] - segment_->begin);
            for (std::size_t c = 0; c < channels_; ++c) {
                const auto row = segment_->values.row(static_cast<Eigen::Index>(c));
                auto in = out.inputs.row(b, c);
                auto tg = out.targets.row(b, c);
                for (std::size_t t = 0; t < lookback_; ++t) in[t] = row(start + static_cast<Eigen::Index>(t));
                for (std::size_t t = 0; t < horizon_; ++t) {
                    tg[t] = row(start + static_cast<Eigen::Index>(lookback_ + t));
                }
            }
        } else {
            for (std::size_t c = 0; c < channels_; ++c) {
                std::ranges::copy(inputs_->row(idx, c), out.inputs.row(b, c).begin());
                std::ranges::copy(targets_->row(idx, c), out.targets.row(b, c).begin());
            }
        }
    }
    return out;
}

WindowBatch WindowSet::all() const {
    std::vector<std::size_t> idx(origins_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return batch(idx);
}

SynthKind parse_synth_kind(const std::string& text) {
    if (text == "sine_mix") return SynthKind::SineMix;
    if (text == "low_rank_target") return SynthKind::LowRankTarget;
    if (text == "random_walk") return SynthKind::RandomWalk;
    throw Error(ErrorKind::UnknownKind, "unknown synthetic kind '" + text + "'");
}

Dataset synth(SynthKind kind, const SynthParams& params, std::uint64_t seed) {
    if (params.steps == 0 || params.channels == 0) {
        throw Error(ErrorKind::InvalidConfig, "synthetic series needs positive steps and channels");
    }
    Dataset ds;
    ds.granularity = "1 step";
    ds.series.values.resize(static_cast<Eigen::Index>(params.channels), static_cast<Eigen::Index>(params.steps));
    for (std::size_t c = 0; c < params.channels; ++c) ds.series.names.push_back("ch" + std::to_string(c));
    std::mt19937_64 rng(seed);

    switch (kind) {
        case SynthKind::SineMix: {
            if (params.periods.size() != params.amplitudes.size() || params.periods.empty()) {
                throw Error(ErrorKind::InvalidConfig, "sine_mix needs one amplitude per period");
            }
            ds.name = "synth_sine_mix";
            std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * 3.14159265358979323846);
            for (std::size_t c = 0; c < params.channels; ++c) {
                std::vector<double> phases;
                for (std::size_t i = 0; i < params.periods.size(); ++i) phases.push_back(phase_dist(rng));
                for (std::size_t t = 0; t < params.steps; ++t) {
                    double v = 0.0;
                    for (std::size_t i = 0; i < params.periods.size(); ++i) {
                        // Phase of t within the period, reduced exactly so
                        // x[t + period] == x[t] for integer periods.
                        const double cycle = std::fmod(static_cast<double>(t), params.periods[i]) / params.periods[i];
                        v += params.amplitudes[i] * std::sin(2.0 * 3.14159265358979323846 * cycle + phases[i]);
                    }
                    ds.series.values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = v;
                }
            }
            break;
        }
        case SynthKind::RandomWalk: {
            ds.name = "synth_random_walk";
            std::normal_distribution<double> step(0.0, params.walk_step);
            for (std::size_t c = 0; c < params.channels; ++c) {
                double v = 0.0;
                for (std::size_t t = 0; t < params.steps; ++t) {
                    v += step(rng);
                    ds.series.values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = v;
                }
            }
            break;
        }
        case SynthKind::LowRankTarget:
            throw Error(ErrorKind::UnknownKind, "low_rank_target is a windowed task; use synth_low_rank_task");
    }
    ds.bounds = split_bounds(params.steps, SplitConvention::Ratio);
    return ds;
}

LowRankTask synth_low_rank_task(const LowRankTaskParams& params, std::uint64_t seed) {
    Variant v;
    v.rank = params.rank;
    HadlModel teacher(params.lookback, params.horizon, v);
    teacher.set_seed(seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Unit-variance entries keep the teacher's outputs O(1) for DCT features
    // of unit-step random walks.
    const double p_scale = 1.0 / std::sqrt(static_cast<double>(teacher.input_dim()));
    for (Eigen::Index i = 0; i < teacher.p().size(); ++i) teacher.p().data()[i] = normal(rng) * p_scale;
    for (Eigen::Index i = 0; i < teacher.q().size(); ++i) {
        teacher.q().data()[i] = normal(rng) / std::sqrt(static_cast<double>(params.rank));
    }
    for (Eigen::Index i = 0; i < teacher.bias().size(); ++i) teacher.bias()(i) = 0.1 * normal(rng);

    auto make = [&](std::size_t count) {
        Tensor3 inputs(count, params.channels, params.lookback);
        std::normal_distribution<double> step(0.0, 1.0 / std::sqrt(static_cast<double>(params.lookback)));
        for (std::size_t b = 0; b < count; ++b) {
            for (std::size_t c = 0; c < params.channels; ++c) {
                double x = normal(rng);
                for (double& val : inputs.row(b, c)) {
                    x += step(rng);
                    val = x;
                }
            }
        }
        Tensor3 targets = teacher.forward(inputs);
        return WindowSet::from_tensors(std::move(inputs), std::move(targets));
    };
    WindowSet train = make(params.train_windows);
    WindowSet val = make(params.val_windows);
    WindowSet test = make(params.test_windows);
    return {std::move(teacher), std::move(train), std::move(val), std::move(test)};
}

}  // namespace hadl
