#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace hadl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Dense batch x channels x length block of doubles, length contiguous.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t batch, std::size_t channels, std::size_t length, double fill = 0.0)
        : batch_(batch), channels_(channels), length_(length), data_(batch * channels * length, fill) {}

    std::size_t batch() const noexcept { return batch_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t length() const noexcept { return length_; }
    std::size_t rows() const noexcept { return batch_ * channels_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t b, std::size_t c, std::size_t t) {
        return data_[(b * channels_ + c) * length_ + t];
    }
    double operator()(std::size_t b, std::size_t c, std::size_t t) const {
        return data_[(b * channels_ + c) * length_ + t];
    }

    std::span<double> row(std::size_t b, std::size_t c) {
        return {data_.data() + (b * channels_ + c) * length_, length_};
    }
    std::span<const double> row(std::size_t b, std::size_t c) const {
        return {data_.data() + (b * channels_ + c) * length_, length_};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    /// Rows are (batch, channel) pairs in batch-major order.
    Eigen::Map<Matrix> as_matrix() {
        return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(length_)};
    }
    Eigen::Map<const Matrix> as_matrix() const {
        return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(length_)};
    }

    bool operator==(const Tensor3&) const = default;

private:
    std::size_t batch_ = 0;
    std::size_t channels_ = 0;
    std::size_t length_ = 0;
    std::vector<double> data_;
};

}  // namespace hadl
