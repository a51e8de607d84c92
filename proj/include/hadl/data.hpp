#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hadl/model.hpp"
#include "hadl/tensor.hpp"

namespace hadl {

/// Multivariate series: one row per channel, one column per timestep.
struct SeriesTensor {
    std::vector<std::string> names;
    Matrix values;

    std::size_t channels() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t steps() const noexcept { return static_cast<std::size_t>(values.cols()); }
};

struct SplitBounds {
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    std::size_t test_end = 0;
};

struct Dataset {
    std::string name;
    SeriesTensor series;
    std::string granularity;
    SplitBounds bounds;
};

/// Reference facts for the public benchmarks (channel count, length, sampling).
struct KnownDataset {
    std::string name;
    std::size_t channels;
    std::size_t timesteps;
    std::string granularity;
    std::string convention;
};

const std::vector<KnownDataset>& known_datasets();
std::optional<KnownDataset> find_known_dataset(const std::string& name);

struct CsvSchema {
    /// Dataset name; when it names a known benchmark the channel count is validated.
    std::string name;
    std::optional<std::size_t> expected_channels;
};

/// Header row required; first column is a timestamp and is dropped, the rest
/// must be decimal numbers. Channels keep file order.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

enum class SplitConvention { Etth, Ettm, Ratio };

SplitConvention parse_convention(const std::string& text);
std::string to_string(SplitConvention convention);

/// ETTh: 8640/2880/2880 steps, ETTm: 34560/11520/11520, otherwise 70/10/20 by timestep.
SplitBounds split_bounds(std::size_t steps, SplitConvention convention);

/// A contiguous slice of a series. Column j holds absolute step `begin + j`.
/// Targets may only come from steps at or after `target_begin`; inputs may
/// reach back to `begin`.
struct Segment {
    std::vector<std::string> names;
    Matrix values;
    std::size_t begin = 0;
    std::size_t target_begin = 0;

    std::size_t channels() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t length() const noexcept { return static_cast<std::size_t>(values.cols()); }
};

struct Splits {
    Segment train;
    Segment val;
    Segment test;
    SplitBounds bounds;
};

/// Cuts the dataset at its split bounds. Val and test segments include up to
/// `reach_back` steps before their own start so their first window can be
/// filled; those steps only ever feed inputs.
Splits split(const Dataset& dataset, std::size_t reach_back = 0);
Splits split(const Dataset& dataset, SplitConvention convention, std::size_t reach_back = 0);

/// Per-channel z-score fitted on one segment.
class Scaler {
public:
    static Scaler fit(const Segment& train);

    Segment transform(const Segment& segment) const;
    Segment inverse(const Segment& segment) const;

    const Vector& mean() const noexcept { return mean_; }
    const Vector& stddev() const noexcept { return std_; }

    bool operator==(const Scaler&) const = default;

private:
    Vector mean_;
    Vector std_;
};

/// Adds eta * N(0, 1) to every value. eta == 0 returns an identical copy.
Segment inject_noise(const Segment& segment, double eta, std::uint64_t seed);

struct WindowBatch {
    Tensor3 inputs;   // batch x channels x L
    Tensor3 targets;  // batch x channels x H
    std::vector<std::size_t> origins;
};

/// Indexable set of (input, target) windows. Either slices a segment on
/// demand or wraps explicit tensors.
class WindowSet {
public:
    /// Throws SegmentTooShort when the segment cannot hold one window.
    static WindowSet from_segment(const Segment& segment, std::size_t lookback, std::size_t horizon,
                                  std::size_t stride = 1);
    static WindowSet from_tensors(Tensor3 inputs, Tensor3 targets);

    std::size_t size() const noexcept { return origins_.size(); }
    bool empty() const noexcept { return origins_.empty(); }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t lookback() const noexcept { return lookback_; }
    std::size_t horizon() const noexcept { return horizon_; }

    /// Absolute start step of every window, in window order.
    const std::vector<std::size_t>& origins() const noexcept { return origins_; }

    WindowBatch batch(std::span<const std::size_t> indices) const;
    WindowBatch all() const;

private:
    WindowSet() = default;

    std::size_t channels_ = 0;
    std::size_t lookback_ = 0;
    std::size_t horizon_ = 0;
    std::vector<std::size_t> origins_;
    // segment-backed
    std::shared_ptr<const Segment> segment_;
    // tensor-backed
    std::shared_ptr<const Tensor3> inputs_;
    std::shared_ptr<const Tensor3> targets_;
};

/// Closed-form window count: (len - L - H) / stride + 1, or 0 if it does not fit.
std::size_t window_count(std::size_t length, std::size_t lookback, std::size_t horizon, std::size_t stride = 1);

enum class SynthKind { SineMix, LowRankTarget, RandomWalk };

SynthKind parse_synth_kind(const std::string& text);

struct SynthParams {
    std::size_t steps = 2000;
    std::size_t channels = 3;
    std::vector<double> periods{24.0, 168.0};
    std::vector<double> amplitudes{1.0, 0.5};
    double walk_step = 1.0;
};

/// sine_mix and random_walk series. low_rank_target is a supervised task, not
/// a series; use synth_low_rank_task for it.
Dataset synth(SynthKind kind, const SynthParams& params, std::uint64_t seed);

struct LowRankTaskParams {
    std::size_t channels = 3;
    std::size_t lookback = 64;
    std::size_t horizon = 16;
    std::size_t rank = 2;
    std::size_t train_windows = 512;
    std::size_t val_windows = 128;
    std::size_t test_windows = 128;
};

/// Inputs are random walks; targets are produced by a fixed teacher model
/// (Haar + DCT + rank-r head with bias), so the task is exactly realizable.
struct LowRankTask {
    HadlModel teacher;
    WindowSet train;
    WindowSet val;
    WindowSet test;
};

LowRankTask synth_low_rank_task(const LowRankTaskParams& params, std::uint64_t seed);

}  // namespace hadl
