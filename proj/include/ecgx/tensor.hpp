#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ecgx {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
// Boolean mask with the same layout as Matrix.
using MaskMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense (batch, channels, length) block, row-major.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t batch, std::size_t channels, std::size_t length, double fill = 0.0)
      : batch_(batch), channels_(channels), length_(length),
        values_(batch * channels * length, fill) {}

  std::size_t batch() const { return batch_; }
  std::size_t channels() const { return channels_; }
  std::size_t length() const { return length_; }
  std::size_t size() const { return values_.size(); }
  std::size_t sample_size() const { return channels_ * length_; }

  double& operator()(std::size_t b, std::size_t c, std::size_t t) {
    return values_[(b * channels_ + c) * length_ + t];
  }
  double operator()(std::size_t b, std::size_t c, std::size_t t) const {
    return values_[(b * channels_ + c) * length_ + t];
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  // channels x length view of one sample.
  MatrixMap sample(std::size_t b) {
    return {values_.data() + b * sample_size(), static_cast<Eigen::Index>(channels_),
            static_cast<Eigen::Index>(length_)};
  }
  ConstMatrixMap sample(std::size_t b) const {
    return {values_.data() + b * sample_size(), static_cast<Eigen::Index>(channels_),
            static_cast<Eigen::Index>(length_)};
  }
  // batch x (channels * length) view.
  ConstMatrixMap flat() const {
    return {values_.data(), static_cast<Eigen::Index>(batch_),
            static_cast<Eigen::Index>(sample_size())};
  }
  MatrixMap flat() {
    return {values_.data(), static_cast<Eigen::Index>(batch_),
            static_cast<Eigen::Index>(sample_size())};
  }

  void reshape(std::size_t batch, std::size_t channels, std::size_t length) {
    batch_ = batch;
    channels_ = channels;
    length_ = length;
    values_.assign(batch * channels * length, 0.0);
  }
  bool all_finite() const;

 private:
  std::size_t batch_ = 0;
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::vector<double> values_;
};

}  // namespace ecgx
