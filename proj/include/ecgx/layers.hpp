#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ecgx/tensor.hpp"

namespace ecgx {

// Stateless layer kernels. Parameters are passed as flat spans so that the
// model can own them as plain vectors.

// Same-padded, stride-1 1D convolution. `weight` is (out, in, kernel)
// row-major, `bias` is (out). `kernel` must be odd.
void conv1d_forward(const Tensor3& x, std::span<const double> weight, std::span<const double> bias,
                    std::size_t out_channels, std::size_t kernel, Tensor3& y);

// Accumulates into dweight / dbias; writes dx when non-null.
void conv1d_backward(const Tensor3& x, const Tensor3& dy, std::span<const double> weight,
                     std::size_t kernel, Tensor3* dx, std::span<double> dweight,
                     std::span<double> dbias);

void relu_forward(Tensor3& x);
// Zeroes dy where the forward output was not positive.
void relu_backward(const Tensor3& y, Tensor3& dy);
void relu_forward(Matrix& x);
void relu_backward(const Matrix& y, Matrix& dy);

// Non-overlapping max pooling; output length is floor(length / pool).
// `argmax` receives the source index of every output cell.
void maxpool_forward(const Tensor3& x, std::size_t pool, Tensor3& y,
                     std::vector<std::uint32_t>& argmax);
void maxpool_backward(const Tensor3& dy, const std::vector<std::uint32_t>& argmax,
                      std::size_t in_length, Tensor3& dx);

// y = x W^T + b, W is (out, in).
void dense_forward(const Eigen::Ref<const Matrix>& x, std::span<const double> weight,
                   std::span<const double> bias, std::size_t out_features, Matrix& y);
void dense_backward(const Eigen::Ref<const Matrix>& x, const Matrix& dy,
                    std::span<const double> weight, Matrix* dx, std::span<double> dweight,
                    std::span<double> dbias);

}  // namespace ecgx
