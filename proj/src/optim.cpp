#include "hadl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "hadl/csv.hpp"
#include "hadl/error.hpp"

namespace hadl {

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0)) fail("beta1 must lie in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) fail("beta2 must lie in (0, 1)");
    if (!(epsilon > 0.0)) fail("epsilon must be > 0");
    if (!(l1_lambda >= 0.0)) fail("l1_lambda must be >= 0");
    if (batch_size == 0) fail("batch_size must be >= 1");
    if (patience == 0) fail("patience must be >= 1");
    if (max_epochs > 0 && patience > max_epochs) fail("patience must not exceed max_epochs");
    if (!(noise_eta >= 0.0)) fail("noise_eta must be >= 0");
}

double loss(const Tensor3& pred, const Tensor3& target, const HadlModel& model, double l1_lambda) {
    if (pred.batch() != target.batch() || pred.channels() != target.channels() || pred.length() != target.length()) {
        throw Error(ErrorKind::ShapeMismatch, "prediction and target shapes differ");
    }
    if (pred.empty()) throw Error(ErrorKind::Empty, "loss over zero elements");
    double sq = 0.0;
    const auto p = pred.values();
    const auto t = target.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        sq += d * d;
    }
    return sq / static_cast<double>(p.size()) + l1_lambda * model.l1_norm();
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Gradients zero_gradients(const HadlModel& model) {
    Gradients g;
    if (model.variant().head == HeadKind::LowRank) {
        g.p = Matrix::Zero(model.p().rows(), model.p().cols());
        g.q = Matrix::Zero(model.q().rows(), model.q().cols());
    } else {
        g.dense = Matrix::Zero(model.dense().rows(), model.dense().cols());
    }
    if (model.has_bias()) g.bias = Vector::Zero(model.bias().size());
    return g;
}

// Adds the data term for one chunk. `inv_count` is 1 / (elements the loss
// averages over), so chunked accumulation equals the full-batch gradient.
void accumulate_data_term(const HadlModel& model, const Eigen::Ref<const Matrix>& a,
                          const Eigen::Ref<const Matrix>& y, double inv_count, Gradients& g) {
    const Matrix pred = model.predict(a);
    const Matrix resid = (pred - y) * (2.0 * inv_count);
    if (model.variant().head == HeadKind::LowRank) {
        const Matrix ap = a * model.p();
        const Matrix gq = resid * model.q().transpose();  // rows x r
        g.p.noalias() += a.transpose() * gq;
        g.q.noalias() += ap.transpose() * resid;
    } else {
        g.dense.noalias() += a.transpose() * resid;
    }
    if (model.has_bias()) g.bias += resid.colwise().sum().transpose();
}

void add_l1_term(const HadlModel& model, double l1_lambda, Gradients& g) {
    if (l1_lambda == 0.0) return;
    auto apply = [&](Matrix& grad, const Matrix& param) {
        grad += param.unaryExpr([](double v) { return sign(v); }) * l1_lambda;
    };
    if (model.variant().head == HeadKind::LowRank) {
        apply(g.p, model.p());
        apply(g.q, model.q());
    } else {
        apply(g.dense, model.dense());
    }
}

void check_windows(const HadlModel& model, const WindowSet& windows, const char* what) {
    if (windows.lookback() != model.lookback() || windows.horizon() != model.horizon()) {
        throw Error(ErrorKind::ShapeMismatch, std::string(what) + " windows have L=" +
                                                  std::to_string(windows.lookback()) + ", H=" +
                                                  std::to_string(windows.horizon()) + "; model has L=" +
                                                  std::to_string(model.lookback()) + ", H=" +
                                                  std::to_string(model.horizon()));
    }
}

constexpr std::size_t kEvalChunk = 256;

template <typename Fn>
void for_each_chunk(const WindowSet& windows, Fn&& fn) {
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < windows.size(); start += kEvalChunk) {
        const std::size_t end = std::min(windows.size(), start + kEvalChunk);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        fn(windows.batch(idx));
    }
}

}  // namespace

std::vector<std::span<const double>> Gradients::blocks(const HadlModel& model) const {
    std::vector<std::span<const double>> out;
    if (model.variant().head == HeadKind::LowRank) {
        out.emplace_back(p.data(), static_cast<std::size_t>(p.size()));
        out.emplace_back(q.data(), static_cast<std::size_t>(q.size()));
    } else {
        out.emplace_back(dense.data(), static_cast<std::size_t>(dense.size()));
    }
    if (model.has_bias()) out.emplace_back(bias.data(), static_cast<std::size_t>(bias.size()));
    return out;
}

double Gradients::norm(const HadlModel& model) const {
    double sq = 0.0;
    for (auto block : blocks(model)) {
        for (double v : block) sq += v * v;
    }
    return std::sqrt(sq);
}

Gradients gradients_from_features(const HadlModel& model, const Eigen::Ref<const Matrix>& features,
                                  const Eigen::Ref<const Matrix>& targets, double l1_lambda) {
    if (features.rows() != targets.rows() || static_cast<std::size_t>(targets.cols()) != model.horizon()) {
        throw Error(ErrorKind::ShapeMismatch, "feature and target rows disagree");
    }
    if (targets.size() == 0) throw Error(ErrorKind::Empty, "gradient over zero elements");
    Gradients g = zero_gradients(model);
    accumulate_data_term(model, features, targets, 1.0 / static_cast<double>(targets.size()), g);
    add_l1_term(model, l1_lambda, g);
    return g;
}

Gradients gradients(const HadlModel& model, const Tensor3& x, const Tensor3& y, double l1_lambda) {
    if (x.batch() != y.batch() || x.channels() != y.channels() || y.length() != model.horizon()) {
        throw Error(ErrorKind::ShapeMismatch, "input and target batches disagree");
    }
    return gradients_from_features(model, model.features(x), y.as_matrix(), l1_lambda);
}

Matrix dense_equivalent_gradient(const HadlModel& model, const WindowSet& windows) {
    check_windows(model, windows, "gradient");
    Matrix grad = Matrix::Zero(static_cast<Eigen::Index>(model.input_dim()), static_cast<Eigen::Index>(model.horizon()));
    const double inv_count =
        1.0 / static_cast<double>(windows.size() * windows.channels() * windows.horizon());
    for_each_chunk(windows, [&](const WindowBatch& b) {
        const Matrix a = model.features(b.inputs);
        const Matrix resid = (model.predict(a) - b.targets.as_matrix()) * (2.0 * inv_count);
        grad.noalias() += a.transpose() * resid;
    });
    return grad;
}

AdamState AdamState::for_blocks(const std::vector<std::span<double>>& params) {
    AdamState s;
    for (const auto& block : params) {
        s.m.emplace_back(block.size(), 0.0);
        s.v.emplace_back(block.size(), 0.0);
    }
    return s;
}

void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, const TrainConfig& config) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw Error(ErrorKind::ShapeMismatch, "ADAM state, parameters and gradients have different block counts");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b];
        auto g = grads[b];
        auto& m = state.m[b];
        auto& v = state.v[b];
        if (p.size() != g.size() || p.size() != m.size()) {
            throw Error(ErrorKind::ShapeMismatch, "ADAM block " + std::to_string(b) + " size mismatch");
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
}

EvalScores evaluate(const HadlModel& model, const WindowSet& windows) {
    check_windows(model, windows, "evaluation");
    if (windows.empty()) throw Error(ErrorKind::EmptyData, "evaluation on an empty window set");
    double sq = 0.0;
    double abs = 0.0;
    std::size_t count = 0;
    for_each_chunk(windows, [&](const WindowBatch& b) {
        const Matrix diff = model.predict(model.features(b.inputs)) - b.targets.as_matrix();
        sq += diff.squaredNorm();
        abs += diff.cwiseAbs().sum();
        count += static_cast<std::size_t>(diff.size());
    });
    return {sq / static_cast<double>(count), abs / static_cast<double>(count)};
}

double evaluate_mse(const HadlModel& model, const WindowSet& windows) {
    return evaluate(model, windows).mse;
}

TrainResult train(const HadlModel& initial, const WindowSet& train_windows, const WindowSet& val_windows,
                  const TrainConfig& config) {
    config.validate();
    if (train_windows.empty()) throw Error(ErrorKind::EmptyData, "no training windows");
    if (val_windows.empty()) throw Error(ErrorKind::EmptyData, "no validation windows");
    check_windows(initial, train_windows, "training");
    check_windows(initial, val_windows, "validation");
    if (train_windows.channels() != val_windows.channels()) {
        throw Error(ErrorKind::ShapeMismatch, "training and validation channel counts differ");
    }

    TrainResult result{initial, {}};
    if (config.max_epochs == 0) return result;

    HadlModel model = initial;
    AdamState state = AdamState::for_blocks(model.parameter_blocks());
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), 0);

    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        // Fisher-Yates driven by the raw engine output; the standard
        // distributions are not specified bit-for-bit across libraries.
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng() % i]);
        }

        double loss_sum = 0.0;
        std::size_t loss_weight = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const WindowBatch batch = train_windows.batch(std::span(order).subspan(start, end - start));
            const Matrix a = model.features(batch.inputs);
            const auto y = batch.targets.as_matrix();
            const double mse = (model.predict(a) - y).squaredNorm() / static_cast<double>(y.size());
            loss_sum += (mse + config.l1_lambda * model.l1_norm()) * static_cast<double>(end - start);
            loss_weight += end - start;

            const Gradients g = gradients_from_features(model, a, y, config.l1_lambda);
            adam_step(state, model.parameter_blocks(), g.blocks(model), config);
        }

        const double val = evaluate_mse(model, val_windows);
        result.trace.epochs.push_back({epoch, loss_sum / static_cast<double>(loss_weight), val});
        if (val < best_val) {
            best_val = val;
            result.model = model;
            result.trace.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            result.trace.stopped_early = epoch < config.max_epochs;
            break;
        }
    }

    // Full-batch gradient norm of the returned parameters on the training set.
    Gradients full = zero_gradients(result.model);
    const double inv_count =
        1.0 / static_cast<double>(train_windows.size() * train_windows.channels() * train_windows.horizon());
    for_each_chunk(train_windows, [&](const WindowBatch& b) {
        accumulate_data_term(result.model, result.model.features(b.inputs), b.targets.as_matrix(), inv_count, full);
    });
    add_l1_term(result.model, config.l1_lambda, full);
    result.trace.final_grad_norm = full.norm(result.model);
    return result;
}

GradcheckReport gradcheck(const HadlModel& model, const Tensor3& x, const Tensor3& y, double l1_lambda,
                          double step, double tolerance, double floor) {
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw Error(ErrorKind::InvalidStep, "finite-difference step must be positive and finite");
    }
    const Gradients analytic = gradients(model, x, y, l1_lambda);
    const auto analytic_blocks = analytic.blocks(model);

    HadlModel probe = model;
    auto blocks = probe.parameter_blocks();
    GradcheckReport report;
    double sum = 0.0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (std::size_t i = 0; i < blocks[b].size(); ++i) {
            const double saved = blocks[b][i];
            blocks[b][i] = saved + step;
            const double up = loss(probe.forward(x), y, probe, l1_lambda);
            blocks[b][i] = saved - step;
            const double down = loss(probe.forward(x), y, probe, l1_lambda);
            blocks[b][i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic_blocks[b][i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            report.max_rel_error = std::max(report.max_rel_error, rel);
            sum += rel;
            ++report.checked;
        }
    }
    report.mean_rel_error = report.checked ? sum / static_cast<double>(report.checked) : 0.0;
    report.passed = report.max_rel_error < tolerance;
    return report;
}

void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path, std::uint64_t fingerprint) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    csv::write_fingerprint(out, fingerprint);
    csv::write_row(out, {"epoch", "train_loss", "val_mse"});
    for (const auto& e : trace.epochs) {
        csv::write_row(out, {std::to_string(e.epoch), csv::format(e.train_loss), csv::format(e.val_mse)});
    }
}

}  // namespace hadl
