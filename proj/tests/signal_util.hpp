#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ecgx/ecg_io.hpp"
#include "ecgx/synthgen.hpp"

namespace ecgx::test {

// Amplitude of a sinusoid of known frequency by least squares on [from, to).
inline double tone_amplitude(std::span<const double> x, double f, double fs, std::size_t from, std::size_t to) {
  double ss = 0, cc = 0, sc = 0, xs = 0, xc = 0;
  for (std::size_t t = from; t < to; ++t) {
    const double s = std::sin(2 * M_PI * f * t / fs), c = std::cos(2 * M_PI * f * t / fs);
    ss += s * s;
    cc += c * c;
    sc += s * c;
    xs += x[t] * s;
    xc += x[t] * c;
  }
  const double det = ss * cc - sc * sc;
  const double a = (xs * cc - xc * sc) / det;
  const double b = (xc * ss - xs * sc) / det;
  return std::hypot(a, b);
}

inline EcgRecord beat_train(int fs, double duration_s, const std::vector<double>& r_times) {
  const auto beat = default_beat_template();
  EcgRecord r;
  r.record_id = "beats";
  r.fs = fs;
  r.leads = {LeadId::II};
  r.n_samples = static_cast<std::size_t>(duration_s * fs);
  r.samples.assign(r.n_samples, 0.0);
  for (double rt : r_times) {
    for (std::size_t t = 0; t < r.n_samples; ++t) r.samples[t] += beat.value(static_cast<double>(t) / fs - rt);
  }
  return r;
}

inline std::size_t argmax_near(std::span<const double> x, std::size_t centre, std::size_t half) {
  const std::size_t lo = centre > half ? centre - half : 0;
  const std::size_t hi = std::min(x.size(), centre + half + 1);
  return static_cast<std::size_t>(std::max_element(x.begin() + lo, x.begin() + hi) - x.begin());
}

}  // namespace ecgx::test
