#include "hadl/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "hadl/error.hpp"

namespace hadl {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::string to_string(HeadKind head) {
    return head == HeadKind::LowRank ? "lowrank" : "dense";
}

HeadKind parse_head(const std::string& text) {
    if (text == "lowrank" || text == "low-rank" || text == "low_rank") return HeadKind::LowRank;
    if (text == "dense" || text == "standard" || text == "linear") return HeadKind::Dense;
    throw Error(ErrorKind::InvalidConfig, "unknown head kind '" + text + "'");
}

std::string Variant::label() const {
    std::string out = use_haar ? "haar" : "nohaar";
    out += use_dct ? "-dct" : "-nodct";
    out += head == HeadKind::LowRank ? "-lowrank" + std::to_string(rank) : std::string("-dense");
    out += bias ? "-bias" : "-nobias";
    return out;
}

namespace {

std::size_t input_dim_for(std::size_t lookback, bool use_haar) {
    if (lookback == 0) {
        throw Error(ErrorKind::InvalidConfig, "lookback must be positive");
    }
    if (use_haar) {
        if (lookback < 2) throw Error(ErrorKind::TooShort, "Haar front end needs lookback >= 2");
        if (lookback % 2 != 0) {
            throw Error(ErrorKind::OddLength, "Haar front end needs an even lookback, got " + std::to_string(lookback));
        }
        return lookback / 2;
    }
    return lookback;
}

}  // namespace

ParamCount param_count(std::size_t lookback, std::size_t horizon, std::size_t rank, bool with_bias, bool use_haar,
                       HeadKind head) {
    const std::uint64_t d_in = input_dim_for(lookback, use_haar);
    const std::uint64_t h = horizon;
    ParamCount out;
    if (head == HeadKind::LowRank) {
        out.breakdown["P"] = d_in * rank;
        out.breakdown["Q"] = static_cast<std::uint64_t>(rank) * h;
    } else {
        out.breakdown["W"] = d_in * h;
    }
    if (with_bias) out.breakdown["bias"] = h;
    for (const auto& [name, count] : out.breakdown) out.total += count;
    return out;
}

HadlModel::HadlModel(std::size_t lookback, std::size_t horizon, Variant variant)
    : lookback_(lookback), horizon_(horizon), input_dim_(input_dim_for(lookback, variant.use_haar)),
      variant_(variant) {
    if (horizon == 0) {
        throw Error(ErrorKind::InvalidConfig, "horizon must be positive");
    }
    const auto d = static_cast<Eigen::Index>(input_dim_);
    const auto h = static_cast<Eigen::Index>(horizon_);
    if (variant_.head == HeadKind::LowRank) {
        if (variant_.rank == 0) {
            throw Error(ErrorKind::InvalidConfig, "low-rank head needs rank >= 1");
        }
        const auto r = static_cast<Eigen::Index>(variant_.rank);
        p_ = Matrix::Zero(d, r);
        q_ = Matrix::Zero(r, h);
    } else {
        dense_ = Matrix::Zero(d, h);
    }
    if (variant_.bias) bias_ = Vector::Zero(h);
    if (variant_.use_dct) dct_ = std::make_shared<const DctPlan>(input_dim_);
}

Matrix HadlModel::features(const Tensor3& x) const {
    if (x.length() != lookback_) {
        throw Error(ErrorKind::ShapeMismatch, "model expects lookback " + std::to_string(lookback_) + ", input has " +
                                                  std::to_string(x.length()));
    }
    Matrix rows;
    if (variant_.use_haar) {
        rows = haar_batch(x).as_matrix();
    } else {
        rows = x.as_matrix();
    }
    if (variant_.use_dct && rows.rows() > 0) {
        // The scale stays 2 / lookback even when the Haar stage is off.
        rows = dct_->apply(rows, 2.0 / static_cast<double>(lookback_));
    }
    return rows;
}

Matrix HadlModel::predict(const Eigen::Ref<const Matrix>& features) const {
    if (static_cast<std::size_t>(features.cols()) != input_dim_) {
        throw Error(ErrorKind::ShapeMismatch, "head expects " + std::to_string(input_dim_) + " features, got " +
                                                  std::to_string(features.cols()));
    }
    Matrix out;
    if (variant_.head == HeadKind::LowRank) {
        Matrix hidden = features * p_;
        out = hidden * q_;
    } else {
        out = features * dense_;
    }
    if (variant_.bias) out.rowwise() += bias_.transpose();
    return out;
}

Tensor3 HadlModel::forward(const Tensor3& x) const {
    Tensor3 out(x.batch(), x.channels(), horizon_);
    if (x.rows() == 0) {
        if (x.length() != lookback_) {
            throw Error(ErrorKind::ShapeMismatch, "model expects lookback " + std::to_string(lookback_));
        }
        return out;
    }
    out.as_matrix() = predict(features(x));
    return out;
}

Matrix HadlModel::effective_weight() const {
    if (variant_.head != HeadKind::LowRank) {
        throw Error(ErrorKind::WrongHead, "effective weight is only defined for a low-rank head");
    }
    return p_ * q_;
}

ParamCount HadlModel::param_count() const {
    return hadl::param_count(lookback_, horizon_, variant_.rank, variant_.bias, variant_.use_haar, variant_.head);
}

std::vector<std::span<double>> HadlModel::parameter_blocks() {
    std::vector<std::span<double>> out;
    if (variant_.head == HeadKind::LowRank) {
        out.emplace_back(p_.data(), static_cast<std::size_t>(p_.size()));
        out.emplace_back(q_.data(), static_cast<std::size_t>(q_.size()));
    } else {
        out.emplace_back(dense_.data(), static_cast<std::size_t>(dense_.size()));
    }
    if (variant_.bias) out.emplace_back(bias_.data(), static_cast<std::size_t>(bias_.size()));
    return out;
}

std::vector<std::span<const double>> HadlModel::parameter_blocks() const {
    auto blocks = const_cast<HadlModel*>(this)->parameter_blocks();
    return {blocks.begin(), blocks.end()};
}

double HadlModel::l1_norm() const {
    if (variant_.head == HeadKind::LowRank) {
        return p_.cwiseAbs().sum() + q_.cwiseAbs().sum();
    }
    return dense_.cwiseAbs().sum();
}

bool HadlModel::operator==(const HadlModel& other) const {
    if (lookback_ != other.lookback_ || horizon_ != other.horizon_ || !(variant_ == other.variant_) ||
        seed_ != other.seed_) {
        return false;
    }
    const auto a = parameter_blocks();
    const auto b = other.parameter_blocks();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return false;
        if (std::memcmp(a[i].data(), b[i].data(), a[i].size_bytes()) != 0) return false;
    }
    return true;
}

HadlModel init_model(std::size_t lookback, std::size_t horizon, const Variant& variant, std::uint64_t seed) {
    HadlModel model(lookback, horizon, variant);
    model.set_seed(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(model.input_dim()));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto fill = [&](Matrix& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    };
    if (variant.head == HeadKind::LowRank) {
        fill(model.p());
        fill(model.q());
    } else {
        fill(model.dense());
    }
    return model;
}

std::uint64_t flop_estimate(const HadlModel& model, std::size_t channels, std::size_t batch) {
    const std::uint64_t c = channels;
    const std::uint64_t d = model.input_dim();
    const std::uint64_t h = model.horizon();
    std::uint64_t per_sample = 0;
    if (model.variant().use_haar) per_sample += 2 * c * (model.lookback() / 2) * 2;
    if (model.variant().use_dct) per_sample += 2 * c * d * d;
    if (model.variant().head == HeadKind::LowRank) {
        const std::uint64_t r = model.variant().rank;
        per_sample += 2 * c * (d * r + r * h);
    } else {
        per_sample += 2 * c * d * h;
    }
    return per_sample * batch;
}

namespace {

constexpr char kMagic[8] = {'H', 'A', 'D', 'L', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw Error(ErrorKind::BadCheckpoint, "truncated checkpoint");
    return value;
}

void put_block(std::ostream& out, const double* data, std::uint64_t rows, std::uint64_t cols) {
    put(out, rows);
    put(out, cols);
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(rows * cols * sizeof(double)));
}

void get_block(std::istream& in, double* data, std::uint64_t rows, std::uint64_t cols) {
    const auto r = get<std::uint64_t>(in);
    const auto c = get<std::uint64_t>(in);
    if (r != rows || c != cols) {
        throw Error(ErrorKind::BadCheckpoint, "block shape " + std::to_string(r) + "x" + std::to_string(c) +
                                                  " does not match header (" + std::to_string(rows) + "x" +
                                                  std::to_string(cols) + ")");
    }
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(rows * cols * sizeof(double)));
    if (!in) throw Error(ErrorKind::BadCheckpoint, "truncated checkpoint");
}

}  // namespace

void save_checkpoint(const HadlModel& model, const std::filesystem::path& path, std::uint64_t fingerprint) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    const auto& v = model.variant();
    out.write(kMagic, sizeof(kMagic));
    put(out, kVersion);
    put<std::uint64_t>(out, model.lookback());
    put<std::uint64_t>(out, model.horizon());
    put<std::uint64_t>(out, v.rank);
    put<std::uint8_t>(out, v.use_haar ? 1 : 0);
    put<std::uint8_t>(out, v.use_dct ? 1 : 0);
    put<std::uint8_t>(out, v.head == HeadKind::Dense ? 1 : 0);
    put<std::uint8_t>(out, v.bias ? 1 : 0);
    put<std::uint64_t>(out, model.seed());
    put<std::uint64_t>(out, fingerprint);
    if (v.head == HeadKind::LowRank) {
        put_block(out, model.p().data(), model.p().rows(), model.p().cols());
        put_block(out, model.q().data(), model.q().rows(), model.q().cols());
    } else {
        put_block(out, model.dense().data(), model.dense().rows(), model.dense().cols());
    }
    if (v.bias) put_block(out, model.bias().data(), model.bias().size(), 1);
    if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw Error(ErrorKind::BadCheckpoint, path.string() + " is not a checkpoint");
    }
    if (get<std::uint32_t>(in) != kVersion) {
        throw Error(ErrorKind::BadCheckpoint, "unsupported checkpoint version");
    }
    const auto lookback = get<std::uint64_t>(in);
    const auto horizon = get<std::uint64_t>(in);
    Variant v;
    v.rank = get<std::uint64_t>(in);
    v.use_haar = get<std::uint8_t>(in) != 0;
    v.use_dct = get<std::uint8_t>(in) != 0;
    v.head = get<std::uint8_t>(in) != 0 ? HeadKind::Dense : HeadKind::LowRank;
    v.bias = get<std::uint8_t>(in) != 0;
    const auto seed = get<std::uint64_t>(in);
    const auto fingerprint = get<std::uint64_t>(in);

    HadlModel model(lookback, horizon, v);
    model.set_seed(seed);
    if (v.head == HeadKind::LowRank) {
        get_block(in, model.p().data(), model.p().rows(), model.p().cols());
        get_block(in, model.q().data(), model.q().rows(), model.q().cols());
    } else {
        get_block(in, model.dense().data(), model.dense().rows(), model.dense().cols());
    }
    if (v.bias) get_block(in, model.bias().data(), model.bias().size(), 1);
    return {std::move(model), fingerprint};
}

}  // namespace hadl
