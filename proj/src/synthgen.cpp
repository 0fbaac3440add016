#include "ecgx/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ecgx/error.hpp"
#include "ecgx/filter.hpp"
#include "ecgx/random.hpp"

namespace ecgx {

namespace {

constexpr std::array<double, kNumLeads> kLeadScales = {
    0.70,  // I
    1.00,  // II
    0.50,  // III
    0.80,  // aVR
    0.40,  // aVL
    0.75,  // aVF
    0.35,  // V1
    0.50,  // V2
    0.60,  // V3
    0.90,  // V4
    0.85,  // V5
    0.65,  // V6
};

struct RecordDraw {
  BeatTemplate beat;
  double rr_s = 1.0;
  double first_r_s = 0.5;
  std::array<double, kNumLeads> lead_gain{};
};

RecordDraw draw_record(Rng& rng) {
  RecordDraw d;
  d.beat = default_beat_template();
  d.rr_s = rng.uniform(0.600, 1.200);
  // The whole first beat, P onset included, starts inside the record.
  d.first_r_s = rng.uniform(0.35, 0.35 + d.rr_s);

  // QRS spread factor widens or narrows the whole complex.
  const double spread = rng.uniform(0.75, 1.35);
  auto& p = d.beat.wave(Wave::P);
  auto& q = d.beat.wave(Wave::Q);
  auto& r = d.beat.wave(Wave::R);
  auto& s = d.beat.wave(Wave::S);
  auto& t = d.beat.wave(Wave::T);

  q.center = q.center * spread + rng.uniform(-0.004, 0.004);
  s.center = s.center * spread + rng.uniform(-0.004, 0.004);
  q.width *= spread * rng.uniform(0.9, 1.1);
  r.width *= spread * rng.uniform(0.9, 1.1);
  s.width *= spread * rng.uniform(0.9, 1.1);

  p.center += rng.uniform(-0.030, 0.030);
  p.width *= rng.uniform(0.8, 1.2);
  // T follows the rate a little, like a real QT interval.
  t.center = t.center * std::sqrt(d.rr_s) + rng.uniform(-0.030, 0.030);
  t.width *= rng.uniform(0.8, 1.2);

  for (auto& w : d.beat.waves) w.amplitude *= rng.uniform(0.7, 1.3);
  for (auto& g : d.lead_gain) g = rng.uniform(0.9, 1.1);
  return d;
}

}  // namespace

double BeatTemplate::value(double t) const {
  double v = 0.0;
  for (const auto& w : waves) {
    const double z = (t - w.center) / w.width;
    if (std::abs(z) < 8.0) v += w.amplitude * std::exp(-0.5 * z * z);
  }
  return v;
}

void BeatTemplate::validate() const {
  for (std::size_t i = 0; i < kNumWaves; ++i) {
    if (!(waves[i].width > 0.0)) throw Error(ErrorKind::ConfigError, "wave width must be positive");
    if (i > 0 && !(waves[i - 1].center < waves[i].center)) {
      throw Error(ErrorKind::ConfigError, "wave centres must be ordered P < Q < R < S < T");
    }
  }
  if (!(wave(Wave::R).amplitude > 0.0)) {
    throw Error(ErrorKind::ConfigError, "R amplitude must be positive");
  }
}

const std::array<double, kNumLeads>& default_lead_scales() { return kLeadScales; }

BeatTemplate default_beat_template() {
  BeatTemplate b;
  b.wave(Wave::P) = {0.15, -0.200, 0.022};
  b.wave(Wave::Q) = {-0.15, -0.030, 0.008};
  b.wave(Wave::R) = {1.20, 0.000, 0.010};
  b.wave(Wave::S) = {-0.30, 0.030, 0.008};
  b.wave(Wave::T) = {0.35, 0.290, 0.040};
  b.lead_scale = kLeadScales;
  return b;
}

const std::vector<std::string>& synth_global_features() {
  static const std::vector<std::string> names = {
      "RR_Mean", "HR_Ventr", "P_On",    "P_Off",  "QRS_On", "QRS_Off",
      "T_On",    "T_Off",    "QRS_Dur", "PR_Int", "QT_Int"};
  return names;
}

const std::vector<std::string>& synth_lead_features() {
  static const std::vector<std::string> names = {"R_Amp", "S_Amp", "Q_Amp", "QRS_AmpPP"};
  return names;
}

std::string lead_feature_column(const std::string& feature, LeadId lead) {
  return feature + "_" + std::string(lead_name(lead));
}

SynthCorpus generate_corpus(int n_records, int fs, std::uint64_t seed, const SynthOptions& options) {
  if (n_records < 1) throw Error(ErrorKind::ConfigError, "n_records must be at least 1");
  if (fs != 100 && fs != 500) throw Error(ErrorKind::ConfigError, "synthetic fs must be 100 or 500");

  SynthCorpus corpus;
  auto& truth = corpus.truth;
  for (const auto& f : synth_global_features()) truth.ensure_column(f);
  for (const auto& f : synth_lead_features()) {
    for (auto lead : kAllLeads) truth.ensure_column(lead_feature_column(f, lead));
  }

  const auto n_samples = static_cast<std::size_t>(std::lround(options.duration_s * fs));
  const auto noise_lp = butterworth_lowpass(4, std::min(options.noise_cutoff_hz, 0.45 * fs), fs);
  const double noise_ratio = std::pow(10.0, -options.snr_db / 20.0);

  for (int i = 0; i < n_records; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const RecordDraw d = draw_record(rng);
    d.beat.validate();

    char id_buf[32];
    std::snprintf(id_buf, sizeof id_buf, "syn%05d", i + 1);
    EcgRecord rec;
    rec.record_id = id_buf;
    rec.fs = fs;
    rec.leads.assign(kAllLeads.begin(), kAllLeads.end());
    rec.n_samples = n_samples;
    rec.samples.assign(kNumLeads * n_samples, 0.0);

    // Lead-independent waveform; leads are scaled copies plus their own noise.
    std::vector<double> clean(n_samples, 0.0);
    const double margin = 0.5;
    for (double r_time = d.first_r_s; r_time < options.duration_s + margin; r_time += d.rr_s) {
      const double lo = r_time + d.beat.wave(Wave::P).center - 8.0 * d.beat.wave(Wave::P).width;
      const double hi = r_time + d.beat.wave(Wave::T).center + 8.0 * d.beat.wave(Wave::T).width;
      const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(lo * fs)));
      const auto last = std::min(n_samples, static_cast<std::size_t>(std::max(0.0, std::floor(hi * fs)) + 1));
      for (std::size_t k = first; k < last; ++k) {
        clean[k] += d.beat.value(static_cast<double>(k) / fs - r_time);
      }
    }

    std::vector<double> noise(n_samples);
    for (std::size_t l = 0; l < kNumLeads; ++l) {
      const double gain = d.beat.lead_scale[l] * d.lead_gain[l];
      auto lead = rec.lead(l);
      double power = 0.0;
      for (std::size_t k = 0; k < n_samples; ++k) {
        lead[k] = gain * clean[k];
        power += lead[k] * lead[k];
      }
      const double signal_rms = std::sqrt(power / static_cast<double>(n_samples));
      for (auto& v : noise) v = rng.normal();
      std::vector<double> state(2 * noise_lp.size(), 0.0);
      sos_filter(noise_lp, noise, state);
      double noise_power = 0.0;
      for (double v : noise) noise_power += v * v;
      const double noise_rms = std::sqrt(noise_power / static_cast<double>(n_samples));
      const double k_noise = noise_rms > 0.0 ? noise_ratio * signal_rms / noise_rms : 0.0;
      for (std::size_t k = 0; k < n_samples; ++k) lead[k] += k_noise * noise[k];
    }

    // Analytic truth, in ms from record start for the first beat.
    const auto ms = [&](double rel) { return 1000.0 * (d.first_r_s + rel); };
    const double rr = 1000.0 * d.rr_s;
    const double p_on = ms(d.beat.wave(Wave::P).onset());
    const double p_off = ms(d.beat.wave(Wave::P).offset());
    const double qrs_on = ms(d.beat.wave(Wave::Q).onset());
    const double qrs_off = ms(d.beat.wave(Wave::S).offset());
    const double t_on = ms(d.beat.wave(Wave::T).onset());
    const double t_off = ms(d.beat.wave(Wave::T).offset());
    const std::string& id = rec.record_id;
    truth.set(id, "RR_Mean", rr);
    truth.set(id, "HR_Ventr", 60000.0 / rr);
    truth.set(id, "P_On", p_on);
    truth.set(id, "P_Off", p_off);
    truth.set(id, "QRS_On", qrs_on);
    truth.set(id, "QRS_Off", qrs_off);
    truth.set(id, "T_On", t_on);
    truth.set(id, "T_Off", t_off);
    truth.set(id, "QRS_Dur", qrs_off - qrs_on);
    truth.set(id, "PR_Int", qrs_on - p_on);
    truth.set(id, "QT_Int", t_off - qrs_on);
    for (std::size_t l = 0; l < kNumLeads; ++l) {
      const double uv = 1000.0 * d.beat.lead_scale[l] * d.lead_gain[l];
      const double r_amp = uv * d.beat.wave(Wave::R).amplitude;
      const double s_amp = uv * d.beat.wave(Wave::S).amplitude;
      const double q_amp = uv * d.beat.wave(Wave::Q).amplitude;
      truth.set(id, lead_feature_column("R_Amp", kAllLeads[l]), r_amp);
      truth.set(id, lead_feature_column("S_Amp", kAllLeads[l]), s_amp);
      truth.set(id, lead_feature_column("Q_Amp", kAllLeads[l]), q_amp);
      truth.set(id, lead_feature_column("QRS_AmpPP", kAllLeads[l]), r_amp - std::min(q_amp, s_amp));
    }

    corpus.manifest.entries.push_back(
        {id, std::filesystem::path("records") / (id + ".hea"), i % 10 + 1});
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "records");
  for (const auto& rec : corpus.records) write_wfdb_record(rec, dir / "records");
  write_feature_csv(corpus.truth, dir / "truth.csv");
  write_manifest(corpus.manifest, dir / "manifest.csv");
}

}  // namespace ecgx
