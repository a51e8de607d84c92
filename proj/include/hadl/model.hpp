#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hadl/tensor.hpp"
#include "hadl/transforms.hpp"

namespace hadl {

enum class HeadKind { LowRank, Dense };

std::string to_string(HeadKind head);
HeadKind parse_head(const std::string& text);

/// Which stages of the pipeline are active. The defaults are the full model.
struct Variant {
    bool use_haar = true;
    bool use_dct = true;
    HeadKind head = HeadKind::LowRank;
    std::size_t rank = 50;
    bool bias = true;

    /// Short label such as "haar-dct-lowrank50-bias", used for output paths.
    std::string label() const;

    bool operator==(const Variant&) const = default;
};

struct ParamCount {
    std::uint64_t total = 0;
    std::map<std::string, std::uint64_t> breakdown;
};

/// Trainable parameter count for a head on top of the given pipeline.
ParamCount param_count(std::size_t lookback, std::size_t horizon, std::size_t rank, bool with_bias, bool use_haar,
                       HeadKind head);

/// Haar + DCT front end followed by a linear head shared by all channels.
///
/// Input rows are (batch, channel) pairs of `lookback` samples. The front end
/// is fixed: optional one-level Haar (keep approximation), optional DCT-II
/// scaled by 2 / lookback. The head is either P (d_in x r) * Q (r x H) or a
/// dense W (d_in x H), plus an optional bias of length H.
class HadlModel {
public:
    /// All weights zero.
    HadlModel(std::size_t lookback, std::size_t horizon, Variant variant);

    std::size_t lookback() const noexcept { return lookback_; }
    std::size_t horizon() const noexcept { return horizon_; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    const Variant& variant() const noexcept { return variant_; }
    bool has_bias() const noexcept { return variant_.bias; }

    std::uint64_t seed() const noexcept { return seed_; }
    void set_seed(std::uint64_t seed) noexcept { seed_ = seed; }

    Matrix& p() noexcept { return p_; }
    Matrix& q() noexcept { return q_; }
    Matrix& dense() noexcept { return dense_; }
    Vector& bias() noexcept { return bias_; }
    const Matrix& p() const noexcept { return p_; }
    const Matrix& q() const noexcept { return q_; }
    const Matrix& dense() const noexcept { return dense_; }
    const Vector& bias() const noexcept { return bias_; }

    /// Front end only: rows x input_dim.
    Matrix features(const Tensor3& x) const;

    /// Head only: features (rows x input_dim) to predictions (rows x horizon).
    Matrix predict(const Eigen::Ref<const Matrix>& features) const;

    /// Full pipeline: batch x channels x lookback to batch x channels x horizon.
    Tensor3 forward(const Tensor3& x) const;

    /// P * Q. Throws WrongHead for a dense head.
    Matrix effective_weight() const;

    ParamCount param_count() const;

    /// Contiguous views of every trainable block in a fixed order
    /// (P, Q, bias or W, bias).
    std::vector<std::span<double>> parameter_blocks();
    std::vector<std::span<const double>> parameter_blocks() const;

    /// Sum of |entry| over the weight matrices (bias excluded).
    double l1_norm() const;

    bool operator==(const HadlModel& other) const;

private:
    std::size_t lookback_;
    std::size_t horizon_;
    std::size_t input_dim_;
    Variant variant_;
    std::uint64_t seed_ = 0;
    Matrix p_;
    Matrix q_;
    Matrix dense_;
    Vector bias_;
    std::shared_ptr<const DctPlan> dct_;
};

/// Uniform fan-in initialization on [-1/sqrt(d_in), 1/sqrt(d_in)], bias zero.
HadlModel init_model(std::size_t lookback, std::size_t horizon, const Variant& variant, std::uint64_t seed);

/// Counting convention: 2 FLOPs per multiply-add, bias ignored.
/// Haar 2*C*(L/2)*2, DCT 2*C*N^2, head 2*C*(d_in*r + r*H) (dense: 2*C*d_in*H).
std::uint64_t flop_estimate(const HadlModel& model, std::size_t channels, std::size_t batch);

// Checkpoint layout (little endian):
//   "HADLCKP1"                                  8 bytes magic
//   u32 version (=1)
//   u64 lookback, u64 horizon, u64 rank
//   u8 use_haar, u8 use_dct, u8 head (0 low-rank, 1 dense), u8 bias
//   u64 seed, u64 config fingerprint
//   for each trainable block in parameter_blocks() order:
//     u64 rows, u64 cols, rows*cols f64 row-major
void save_checkpoint(const HadlModel& model, const std::filesystem::path& path, std::uint64_t fingerprint = 0);

struct Checkpoint {
    HadlModel model;
    std::uint64_t fingerprint = 0;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hadl
