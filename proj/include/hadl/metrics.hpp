#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hadl/model.hpp"

namespace hadl {

double mse(std::span<const double> pred, std::span<const double> target);
double mae(std::span<const double> pred, std::span<const double> target);

/// MSE_baseline - MSE_ours; positive when ours is better.
double improvement(double mse_best_baseline, double mse_ours);

/// MSE under noise over MSE without noise. Throws ZeroBaseline when mse_zero <= 0.
double nrr(double mse_eta, double mse_zero);

/// Mean of |nrr_i - 1|. Throws Empty on an empty list.
double mav(std::span<const double> nrr_list);

/// Test-set scores for one trained model.
struct EvalReport {
    std::string dataset;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    Variant variant;
    std::uint64_t seed = 0;
    double eta = 0.0;
    double mse = 0.0;
    double mae = 0.0;
    std::uint64_t params = 0;
};

struct RobustnessReport {
    std::string dataset;
    std::size_t horizon = 0;
    std::string variant;
    std::vector<double> eta_list;
    std::vector<double> mse_per_eta;
    std::vector<double> mae_per_eta;
    /// One entry per eta > 0, in eta_list order.
    std::vector<double> nrr_per_eta;
    /// Absent when eta_list holds only 0.
    std::optional<double> mav;
};

/// Builds NRR/MAV from per-eta MSEs. eta_list must contain 0.0 (MissingZeroEta).
RobustnessReport make_robustness_report(std::string dataset, std::size_t horizon, std::string variant,
                                        std::vector<double> eta_list,
                                        std::vector<double> mse_per_eta, std::vector<double> mae_per_eta);

/// Fixed column order:
/// dataset,lookback,horizon,variant,use_haar,use_dct,head,rank,bias,seed,eta,mse,mae,params
void write_eval_csv(std::ostream& out, const std::vector<EvalReport>& reports, std::uint64_t fingerprint);

/// One row per eta. Columns: dataset,horizon,variant,eta,mse,mae,nrr,mav.
/// nrr is empty on the eta = 0 row; mav repeats on every row and reads
/// "undefined" when no eta > 0 was run.
void write_robustness_csv(std::ostream& out, const RobustnessReport& report, std::uint64_t fingerprint);

}  // namespace hadl
