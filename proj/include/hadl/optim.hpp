#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hadl/data.hpp"
#include "hadl/model.hpp"
#include "hadl/tensor.hpp"

namespace hadl {

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double l1_lambda = 1e-4;
    std::size_t max_epochs = 100;
    std::size_t patience = 20;
    std::size_t batch_size = 64;
    std::uint64_t seed = 2024;
    double noise_eta = 0.0;

    /// Throws InvalidConfig when a field is out of range.
    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_mse = 0.0;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;
    std::optional<std::size_t> best_epoch;  // 1-based, empty when no epoch ran
    bool stopped_early = false;
    double final_grad_norm = 0.0;
};

/// Mean squared error over all elements plus l1_lambda * (|P|_1 + |Q|_1)
/// (|W|_1 for a dense head). Bias is not penalized.
double loss(const Tensor3& pred, const Tensor3& target, const HadlModel& model, double l1_lambda);

/// Same layout as HadlModel::parameter_blocks().
struct Gradients {
    Matrix p;
    Matrix q;
    Matrix dense;
    Vector bias;

    std::vector<std::span<const double>> blocks(const HadlModel& model) const;
    double norm(const HadlModel& model) const;
};

/// Analytic gradients of `loss` with respect to every trainable block.
/// sign(0) = 0 for the L1 subgradient.
Gradients gradients(const HadlModel& model, const Tensor3& x, const Tensor3& y, double l1_lambda);

/// Gradient from precomputed front-end features (rows x d_in) and targets
/// (rows x H).
Gradients gradients_from_features(const HadlModel& model, const Eigen::Ref<const Matrix>& features,
                                  const Eigen::Ref<const Matrix>& targets, double l1_lambda);

/// Gradient of the unregularized MSE with respect to the end-to-end weight
/// W = P Q, i.e. A^T G over the whole window set.
Matrix dense_equivalent_gradient(const HadlModel& model, const WindowSet& windows);

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t step = 0;

    /// Zero moments shaped like the given parameter blocks.
    static AdamState for_blocks(const std::vector<std::span<double>>& params);
};

/// Bias-corrected ADAM update applied in place.
void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, const TrainConfig& config);

/// Mean squared error of the model over a window set, evaluated in chunks.
double evaluate_mse(const HadlModel& model, const WindowSet& windows);

struct EvalScores {
    double mse = 0.0;
    double mae = 0.0;
};

EvalScores evaluate(const HadlModel& model, const WindowSet& windows);

struct TrainResult {
    HadlModel model;
    TrainTrace trace;
};

/// Mini-batch ADAM with per-epoch validation and early stopping. Returns the
/// parameters of the best validation epoch.
TrainResult train(const HadlModel& initial, const WindowSet& train_windows, const WindowSet& val_windows,
                  const TrainConfig& config);

struct GradcheckReport {
    double max_rel_error = 0.0;
    double mean_rel_error = 0.0;
    std::size_t checked = 0;
    bool passed = false;
};

/// Central differences against `gradients` for every parameter.
/// Relative error is |a - n| / max(|a|, |n|, floor). Throws InvalidStep for step <= 0.
GradcheckReport gradcheck(const HadlModel& model, const Tensor3& x, const Tensor3& y, double l1_lambda,
                          double step, double tolerance, double floor = 1e-8);

void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path, std::uint64_t fingerprint);

}  // namespace hadl
