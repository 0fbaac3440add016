#include "ecgx/filter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "ecgx/error.hpp"

namespace ecgx {

namespace {

using cplx = std::complex<double>;

// Poles of the unit-cutoff analog Butterworth prototype (left half plane).
std::vector<cplx> prototype_poles(int order) {
  std::vector<cplx> poles;
  for (int k = 0; k < order; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    poles.push_back(std::polar(1.0, theta));
  }
  return poles;
}

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

double prewarp(double hz, double fs) { return 2.0 * fs * std::tan(std::numbers::pi * hz / fs); }

// Groups digital poles into second-order denominators. Complex poles pair
// with their conjugates; real poles pair with each other.
std::vector<std::pair<double, double>> pair_poles(const std::vector<cplx>& poles) {
  std::vector<std::pair<double, double>> dens;
  std::vector<double> reals;
  for (const auto& p : poles) {
    if (std::abs(p.imag()) <= 1e-12 * std::max(1.0, std::abs(p))) {
      reals.push_back(p.real());
    } else if (p.imag() > 0.0) {
      dens.emplace_back(-2.0 * p.real(), std::norm(p));
    }
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    dens.emplace_back(-(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]);
  }
  if (reals.size() % 2 == 1) dens.emplace_back(-reals.back(), 0.0);
  return dens;
}

cplx section_response(const Biquad& s, double omega) {
  const cplx z1 = std::polar(1.0, -omega);
  const cplx z2 = z1 * z1;
  return (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
}

}  // namespace

SosCascade butterworth_bandpass(int order, double low_hz, double high_hz, double fs) {
  if (order < 1) throw Error(ErrorKind::InvalidFilter, "filter order must be positive");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0)) {
    throw Error(ErrorKind::InvalidFilter, "band-pass edges must satisfy 0 < low < high < fs/2");
  }
  const double w_lo = prewarp(low_hz, fs);
  const double w_hi = prewarp(high_hz, fs);
  const double bw = w_hi - w_lo;
  const double w0_sq = w_lo * w_hi;

  std::vector<cplx> digital;
  for (const auto& p : prototype_poles(order)) {
    const cplx half = p * bw / 2.0;
    const cplx root = std::sqrt(half * half - w0_sq);
    digital.push_back(bilinear(half + root, fs));
    digital.push_back(bilinear(half - root, fs));
  }

  // Centre frequency of the analog band maps back through the bilinear warp.
  const double omega_c = 2.0 * std::atan(std::sqrt(w0_sq) / (2.0 * fs));
  SosCascade sos;
  for (const auto& [a1, a2] : pair_poles(digital)) {
    Biquad s{1.0, 0.0, -1.0, a1, a2};  // zeros at z = +1 and z = -1
    const double g = std::abs(section_response(s, omega_c));
    s.b0 /= g;
    s.b2 /= g;
    sos.push_back(s);
  }
  return sos;
}

SosCascade butterworth_lowpass(int order, double cutoff_hz, double fs) {
  if (order < 2 || order % 2 != 0) {
    throw Error(ErrorKind::InvalidFilter, "low-pass order must be even and positive");
  }
  if (!(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0)) {
    throw Error(ErrorKind::InvalidFilter, "low-pass cutoff must satisfy 0 < cutoff < fs/2");
  }
  const double wc = prewarp(cutoff_hz, fs);
  std::vector<cplx> digital;
  for (const auto& p : prototype_poles(order)) digital.push_back(bilinear(p * wc, fs));
  SosCascade sos;
  for (const auto& [a1, a2] : pair_poles(digital)) {
    Biquad s{1.0, 2.0, 1.0, a1, a2};  // double zero at z = -1
    const double g = 4.0 / (1.0 + a1 + a2);
    s.b0 /= g;
    s.b1 /= g;
    s.b2 /= g;
    sos.push_back(s);
  }
  return sos;
}

double magnitude_response(const SosCascade& sos, double freq_hz, double fs) {
  const double omega = 2.0 * std::numbers::pi * freq_hz / fs;
  cplx h = 1.0;
  for (const auto& s : sos) h *= section_response(s, omega);
  return std::abs(h);
}

std::vector<double> sos_steady_state(const SosCascade& sos) {
  std::vector<double> zi(2 * sos.size());
  double scale = 1.0;  // steady-state input level reaching this section
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const auto& s = sos[k];
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    zi[2 * k] = scale * (dc - s.b0);
    zi[2 * k + 1] = scale * (s.b2 - s.a2 * dc);
    scale *= dc;
  }
  return zi;
}

void sos_filter(const SosCascade& sos, std::span<double> signal, std::span<double> state) {
  if (state.size() != 2 * sos.size()) {
    throw Error(ErrorKind::InvalidFilter, "filter state must hold two values per section");
  }
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const auto& s = sos[k];
    double z1 = state[2 * k];
    double z2 = state[2 * k + 1];
    for (double& v : signal) {
      const double x = v;
      const double y = s.b0 * x + z1;
      z1 = s.b1 * x - s.a1 * y + z2;
      z2 = s.b2 * x - s.a2 * y;
      v = y;
    }
    state[2 * k] = z1;
    state[2 * k + 1] = z2;
  }
}

void sos_filtfilt(const SosCascade& sos, std::span<double> signal, std::size_t pad) {
  const std::size_t n = signal.size();
  if (n == 0) return;
  pad = std::min(pad, n - 1);
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    ext[i] = 2.0 * signal[0] - signal[pad - i];
    ext[pad + n + i] = 2.0 * signal[n - 1] - signal[n - 2 - i];
  }
  std::copy(signal.begin(), signal.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));

  const auto zi = sos_steady_state(sos);
  std::vector<double> state(zi.size());
  auto run = [&] {
    const double x0 = ext.front();
    for (std::size_t i = 0; i < zi.size(); ++i) state[i] = zi[i] * x0;
    sos_filter(sos, ext, state);
  };
  run();
  std::reverse(ext.begin(), ext.end());
  run();
  std::reverse(ext.begin(), ext.end());
  std::copy(ext.begin() + static_cast<std::ptrdiff_t>(pad),
            ext.begin() + static_cast<std::ptrdiff_t>(pad + n), signal.begin());
}

}  // namespace ecgx
