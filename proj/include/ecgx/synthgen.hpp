#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ecgx/ecg_io.hpp"

namespace ecgx {

enum class Wave : std::uint8_t { P, Q, R, S, T };
inline constexpr std::size_t kNumWaves = 5;

struct GaussianWave {
  double amplitude = 0.0;  // mV
  double center = 0.0;     // seconds relative to the R peak
  double width = 0.01;     // seconds (standard deviation)

  double onset() const { return center - 3.0 * width; }
  double offset() const { return center + 3.0 * width; }
};

// A P-QRS-T beat as a sum of five Gaussians, scaled per lead.
struct BeatTemplate {
  std::array<GaussianWave, kNumWaves> waves;
  std::array<double, kNumLeads> lead_scale{};

  const GaussianWave& wave(Wave w) const { return waves[static_cast<std::size_t>(w)]; }
  GaussianWave& wave(Wave w) { return waves[static_cast<std::size_t>(w)]; }
  // Lead-independent beat value at `t` seconds from the R peak.
  double value(double t) const;
  // Throws ConfigError when widths are non-positive, waves out of order or
  // the R amplitude is not positive.
  void validate() const;
};

// Lead II has scale 1.0; the others lie in [0.3, 1.0].
const std::array<double, kNumLeads>& default_lead_scales();
BeatTemplate default_beat_template();

// Global truth columns, in table order.
const std::vector<std::string>& synth_global_features();
// Per-lead amplitude features; columns are named <feature>_<lead>, e.g. R_Amp_II.
const std::vector<std::string>& synth_lead_features();
std::string lead_feature_column(const std::string& feature, LeadId lead);

struct SynthOptions {
  double snr_db = 20.0;
  double duration_s = 10.0;
  double noise_cutoff_hz = 40.0;  // additive noise is white noise low-passed here
};

struct SynthCorpus {
  std::vector<EcgRecord> records;
  FeatureTable truth;
  // Folds cycle 1..10 over record order; paths are relative (records/<id>.hea).
  DatasetManifest manifest;
};

// Deterministic in (n_records, fs, seed, options). fs must be 100 or 500.
SynthCorpus generate_corpus(int n_records, int fs, std::uint64_t seed,
                            const SynthOptions& options = {});

// Writes records/<id>.{hea,dat}, truth.csv and manifest.csv under `dir`.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace ecgx
