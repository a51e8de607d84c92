#include "hadl/metrics.hpp"

#include <cmath>

#include "hadl/csv.hpp"
#include "hadl/error.hpp"

namespace hadl {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) {
        throw Error(ErrorKind::ShapeMismatch, "prediction has " + std::to_string(pred.size()) +
                                                  " elements, target has " + std::to_string(target.size()));
    }
    if (pred.empty()) throw Error(ErrorKind::Empty, "metric over zero elements");
}

}  // namespace

double mse(std::span<const double> pred, std::span<const double> target) {
    check_pair(pred, target);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

double mae(std::span<const double> pred, std::span<const double> target) {
    check_pair(pred, target);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - target[i]);
    return acc / static_cast<double>(pred.size());
}

double improvement(double mse_best_baseline, double mse_ours) {
    return mse_best_baseline - mse_ours;
}

double nrr(double mse_eta, double mse_zero) {
    if (!(mse_zero > 0.0)) throw Error(ErrorKind::ZeroBaseline, "noise-free MSE must be positive");
    return mse_eta / mse_zero;
}

double mav(std::span<const double> nrr_list) {
    if (nrr_list.empty()) throw Error(ErrorKind::Empty, "MAV of an empty NRR list");
    double acc = 0.0;
    for (double v : nrr_list) acc += std::abs(v - 1.0);
    return acc / static_cast<double>(nrr_list.size());
}

RobustnessReport make_robustness_report(std::string dataset, std::size_t horizon, std::string variant,
                                        std::vector<double> eta_list, std::vector<double> mse_per_eta,
                                        std::vector<double> mae_per_eta) {
    if (eta_list.size() != mse_per_eta.size() || eta_list.size() != mae_per_eta.size()) {
        throw Error(ErrorKind::ShapeMismatch, "one MSE and MAE per eta expected");
    }
    std::optional<std::size_t> zero;
    for (std::size_t i = 0; i < eta_list.size(); ++i) {
        if (eta_list[i] == 0.0) zero = i;
    }
    if (!zero) throw Error(ErrorKind::MissingZeroEta, "eta list must contain 0.0");

    RobustnessReport r;
    r.dataset = std::move(dataset);
    r.horizon = horizon;
    r.variant = std::move(variant);
    for (std::size_t i = 0; i < eta_list.size(); ++i) {
        if (eta_list[i] > 0.0) r.nrr_per_eta.push_back(nrr(mse_per_eta[i], mse_per_eta[*zero]));
    }
    if (!r.nrr_per_eta.empty()) r.mav = hadl::mav(r.nrr_per_eta);
    r.eta_list = std::move(eta_list);
    r.mse_per_eta = std::move(mse_per_eta);
    r.mae_per_eta = std::move(mae_per_eta);
    return r;
}

void write_eval_csv(std::ostream& out, const std::vector<EvalReport>& reports, std::uint64_t fingerprint) {
    csv::write_fingerprint(out, fingerprint);
    csv::write_row(out, {"dataset", "lookback", "horizon", "variant", "use_haar", "use_dct", "head", "rank", "bias",
                         "seed", "eta", "mse", "mae", "params"});
    for (const auto& r : reports) {
        csv::write_row(out, {r.dataset, std::to_string(r.lookback), std::to_string(r.horizon), r.variant.label(),
                             r.variant.use_haar ? "1" : "0", r.variant.use_dct ? "1" : "0", to_string(r.variant.head),
                             std::to_string(r.variant.rank), r.variant.bias ? "1" : "0", std::to_string(r.seed),
                             csv::format(r.eta), csv::format(r.mse), csv::format(r.mae), std::to_string(r.params)});
    }
}

void write_robustness_csv(std::ostream& out, const RobustnessReport& report, std::uint64_t fingerprint) {
    csv::write_fingerprint(out, fingerprint);
    csv::write_row(out, {"dataset", "horizon", "variant", "eta", "mse", "mae", "nrr", "mav"});
    const std::string mav_text = report.mav ? csv::format(*report.mav) : "undefined";
    std::size_t next_nrr = 0;
    for (std::size_t i = 0; i < report.eta_list.size(); ++i) {
        std::string nrr_text;
        if (report.eta_list[i] > 0.0) nrr_text = csv::format(report.nrr_per_eta[next_nrr++]);
        csv::write_row(out, {report.dataset, std::to_string(report.horizon), report.variant,
                             csv::format(report.eta_list[i]), csv::format(report.mse_per_eta[i]),
                             csv::format(report.mae_per_eta[i]), nrr_text, mav_text});
    }
}

}  // namespace hadl
