#include "ecgx/layers.hpp"

#include <algorithm>

#include "ecgx/error.hpp"

namespace ecgx {

namespace {

using Index = Eigen::Index;

// (in * kernel) x length patch matrix of one sample, zero padded.
void im2col(ConstMatrixMap x, std::size_t kernel, Matrix& col) {
  const Index in = x.rows();
  const Index len = x.cols();
  const Index half = static_cast<Index>(kernel / 2);
  col.resize(in * static_cast<Index>(kernel), len);
  for (Index c = 0; c < in; ++c) {
    for (Index j = 0; j < static_cast<Index>(kernel); ++j) {
      const Index shift = j - half;
      double* dst = col.row(c * static_cast<Index>(kernel) + j).data();
      const double* src = x.row(c).data();
      const Index lo = std::max<Index>(0, -shift);
      const Index hi = std::min<Index>(len, len - shift);
      std::fill(dst, dst + lo, 0.0);
      if (hi > lo) std::copy(src + lo + shift, src + hi + shift, dst + lo);
      std::fill(dst + std::max(hi, lo), dst + len, 0.0);
    }
  }
}

void col2im_add(const Matrix& col, std::size_t kernel, MatrixMap dx) {
  const Index in = dx.rows();
  const Index len = dx.cols();
  const Index half = static_cast<Index>(kernel / 2);
  for (Index c = 0; c < in; ++c) {
    double* dst = dx.row(c).data();
    for (Index j = 0; j < static_cast<Index>(kernel); ++j) {
      const Index shift = j - half;
      const double* src = col.row(c * static_cast<Index>(kernel) + j).data();
      const Index lo = std::max<Index>(0, -shift);
      const Index hi = std::min<Index>(len, len - shift);
      for (Index t = lo; t < hi; ++t) dst[t + shift] += src[t];
    }
  }
}

}  // namespace

void conv1d_forward(const Tensor3& x, std::span<const double> weight, std::span<const double> bias,
                    std::size_t out_channels, std::size_t kernel, Tensor3& y) {
  const std::size_t in = x.channels();
  if (kernel % 2 == 0) throw Error(ErrorKind::ShapeError, "conv1d: kernel size must be odd");
  if (weight.size() != out_channels * in * kernel || bias.size() != out_channels) {
    throw Error(ErrorKind::ShapeError, "conv1d: parameter shape does not match " +
                                           std::to_string(in) + " input channels");
  }
  y.reshape(x.batch(), out_channels, x.length());
  const ConstMatrixMap w(weight.data(), static_cast<Index>(out_channels),
                         static_cast<Index>(in * kernel));
  const Eigen::Map<const Eigen::VectorXd> b(bias.data(), static_cast<Index>(out_channels));
  Matrix col;
  for (std::size_t s = 0; s < x.batch(); ++s) {
    im2col(x.sample(s), kernel, col);
    auto out = y.sample(s);
    out.noalias() = w * col;
    out.colwise() += b;
  }
}

void conv1d_backward(const Tensor3& x, const Tensor3& dy, std::span<const double> weight,
                     std::size_t kernel, Tensor3* dx, std::span<double> dweight,
                     std::span<double> dbias) {
  const std::size_t in = x.channels();
  const std::size_t out = dy.channels();
  if (dy.batch() != x.batch() || dy.length() != x.length() ||
      dweight.size() != out * in * kernel || dbias.size() != out) {
    throw Error(ErrorKind::ShapeError, "conv1d backward: shape mismatch");
  }
  const ConstMatrixMap w(weight.data(), static_cast<Index>(out), static_cast<Index>(in * kernel));
  MatrixMap dw(dweight.data(), static_cast<Index>(out), static_cast<Index>(in * kernel));
  Eigen::Map<Eigen::VectorXd> db(dbias.data(), static_cast<Index>(out));
  if (dx) dx->reshape(x.batch(), in, x.length());
  Matrix col;
  Matrix dcol;
  for (std::size_t s = 0; s < x.batch(); ++s) {
    const auto g = dy.sample(s);
    im2col(x.sample(s), kernel, col);
    dw.noalias() += g * col.transpose();
    // Plain loop: Eigen's vectorised row sums depend on pointer alignment.
    for (Index o = 0; o < g.rows(); ++o) {
      double acc = 0.0;
      for (Index t = 0; t < g.cols(); ++t) acc += g(o, t);
      db[o] += acc;
    }
    if (dx) {
      dcol.noalias() = w.transpose() * g;
      col2im_add(dcol, kernel, dx->sample(s));
    }
  }
}

void relu_forward(Tensor3& x) {
  for (double& v : x.values()) v = v > 0.0 ? v : 0.0;
}

void relu_backward(const Tensor3& y, Tensor3& dy) {
  const auto yv = y.values();
  auto g = dy.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(yv[i] > 0.0)) g[i] = 0.0;
  }
}

void relu_forward(Matrix& x) { x = x.cwiseMax(0.0); }

void relu_backward(const Matrix& y, Matrix& dy) {
  dy = (y.array() > 0.0).select(dy, 0.0);
}

void maxpool_forward(const Tensor3& x, std::size_t pool, Tensor3& y,
                     std::vector<std::uint32_t>& argmax) {
  if (pool == 0) throw Error(ErrorKind::ShapeError, "maxpool: pool size must be positive");
  const std::size_t out_len = x.length() / pool;
  y.reshape(x.batch(), x.channels(), out_len);
  argmax.resize(y.size());
  std::size_t o = 0;
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      const double* src = x.data() + (b * x.channels() + c) * x.length();
      for (std::size_t t = 0; t < out_len; ++t, ++o) {
        std::size_t best = t * pool;
        for (std::size_t k = best + 1; k < (t + 1) * pool; ++k) {
          if (src[k] > src[best]) best = k;
        }
        y.data()[o] = src[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

void maxpool_backward(const Tensor3& dy, const std::vector<std::uint32_t>& argmax,
                      std::size_t in_length, Tensor3& dx) {
  dx.reshape(dy.batch(), dy.channels(), in_length);
  std::size_t o = 0;
  for (std::size_t b = 0; b < dy.batch(); ++b) {
    for (std::size_t c = 0; c < dy.channels(); ++c) {
      double* dst = &dx(b, c, 0);
      for (std::size_t t = 0; t < dy.length(); ++t, ++o) dst[argmax[o]] += dy.data()[o];
    }
  }
}

void dense_forward(const Eigen::Ref<const Matrix>& x, std::span<const double> weight,
                   std::span<const double> bias, std::size_t out_features, Matrix& y) {
  const auto in = static_cast<std::size_t>(x.cols());
  if (weight.size() != out_features * in || bias.size() != out_features) {
    throw Error(ErrorKind::ShapeError, "dense: parameter shape does not match " +
                                           std::to_string(in) + " input features");
  }
  const ConstMatrixMap w(weight.data(), static_cast<Index>(out_features), static_cast<Index>(in));
  const Eigen::Map<const Eigen::RowVectorXd> b(bias.data(), static_cast<Index>(out_features));
  y.noalias() = x * w.transpose();
  y.rowwise() += b;
}

void dense_backward(const Eigen::Ref<const Matrix>& x, const Matrix& dy,
                    std::span<const double> weight, Matrix* dx, std::span<double> dweight,
                    std::span<double> dbias) {
  const auto in = x.cols();
  const auto out = dy.cols();
  if (dy.rows() != x.rows() || dweight.size() != static_cast<std::size_t>(out * in) ||
      dbias.size() != static_cast<std::size_t>(out)) {
    throw Error(ErrorKind::ShapeError, "dense backward: shape mismatch");
  }
  const ConstMatrixMap w(weight.data(), out, in);
  MatrixMap dw(dweight.data(), out, in);
  Eigen::Map<Eigen::RowVectorXd> db(dbias.data(), out);
  dw.noalias() += dy.transpose() * x;
  for (Index r = 0; r < dy.rows(); ++r) {
    for (Index o = 0; o < out; ++o) db[o] += dy(r, o);
  }
  if (dx) dx->noalias() = dy * w;
}

}  // namespace ecgx
