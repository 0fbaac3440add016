#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ecgx {

// One second-order section, a0 normalised to 1:
//   H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

using SosCascade = std::vector<Biquad>;

// Digital Butterworth band-pass via the bilinear transform with
// pre-warped edges. `order` is the analog low-pass prototype order, so the
// cascade has `order` sections (2 * order poles). Each section is scaled to
// unit gain at the geometric centre frequency.
SosCascade butterworth_bandpass(int order, double low_hz, double high_hz, double fs);

// Digital Butterworth low-pass; `order` must be even (order / 2 sections),
// each section normalised to unit DC gain.
SosCascade butterworth_lowpass(int order, double cutoff_hz, double fs);

// |H(e^{j 2 pi f / fs})| of the cascade.
double magnitude_response(const SosCascade& sos, double freq_hz, double fs);

// Steady-state direct-form-II-transposed states for a unit step input,
// two per section.
std::vector<double> sos_steady_state(const SosCascade& sos);

// Causal filtering in place. `state` holds two values per section and is
// updated; pass zeros for a cold start.
void sos_filter(const SosCascade& sos, std::span<double> signal, std::span<double> state);

// Forward-backward filtering with odd reflection padding of `pad` samples
// on each side and steady-state initial conditions. Zero phase, magnitude
// squared. `pad` is clipped to signal.size() - 1.
void sos_filtfilt(const SosCascade& sos, std::span<double> signal, std::size_t pad);

}  // namespace ecgx
