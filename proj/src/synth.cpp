// Copyright 2026 The mvrisk Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mvrisk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mvrisk/error.hpp"

namespace mvrisk {
namespace {

constexpr double kQuartileZ = 0.6744897501960817;

struct LogNormal {
  double mu = 0.0;
  double sigma = 1.0;
};

LogNormal fit_lognormal(const MedianIqr& m) {
  return {std::log(m.median), (std::log(m.q3) - std::log(m.q1)) / (2.0 * kQuartileZ)};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Shifts mu so that the distribution truncated below at `lower` keeps the
// requested median.
LogNormal fit_truncated_lognormal(const MedianIqr& m, double lower) {
  LogNormal ln = fit_lognormal(m);
  const double target = std::log(m.median);
  double lo = target - 5.0 * ln.sigma, hi = target;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_lower = normal_cdf((std::log(lower) - mid) / ln.sigma);
    const double f_med = normal_cdf((target - mid) / ln.sigma);
    // Truncated median at `target` means f_med == f_lower + (1 - f_lower) / 2.
    if (f_med > f_lower + 0.5 * (1.0 - f_lower)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  ln.mu = 0.5 * (lo + hi);
  return ln;
}

struct Deterioration {
  const char* column;
  double magnitude;  // in units of the column spread at onset
};

// Baseline pre-onset trajectory for every ventilated patient.
constexpr Deterioration kBaseDeterioration[] = {
    {"o2sat", -1.6}, {"resp_rate", 1.0}, {"fio2", 1.0},     {"pao2", -0.8},
    {"sao2", -0.8},  {"heart_rate", 0.6}, {"paco2", 0.4},   {"lactate", 0.3},
};

// Additional shifts that only appear when the comorbidity is present.
struct ConditionalDeterioration {
  const char* comorbidity;
  const char* column;
  double magnitude;
};

constexpr ConditionalDeterioration kConditionalDeterioration[] = {
    {"copd", "paco2", 1.4},      {"copd", "ph", -1.0},        {"copd", "bicarbonate", 0.8},
    {"chf", "bnp", 1.4},         {"chf", "heart_rate", 0.8},  {"chf", "o2sat", -0.6},
    {"pneumonia", "wbc", 1.2},   {"pneumonia", "temperature", 1.0}, {"pneumonia", "crp", 1.0},
    {"obesity", "resp_rate", 0.6},
};

const std::vector<std::string> kRespiratoryRisk = {
    "copd",      "chf",         "pneumonia",  "obesity",   "sleep_apnea",
    "asthma",    "interstitial_lung_disease", "neuromuscular_disease", "pulmonary_hypertension",
};

bool is_binary(const ClinicalColumn& c) {
  return c.group == FeatureGroup::kMedication || c.name == "sex_male" || c.name == "emergency_admission";
}

template <typename Dist>
double sample_in(Dist& dist, std::mt19937_64& rng, double lo, double hi) {
  for (int i = 0; i < 1000; ++i) {
    const double x = dist(rng);
    if (x >= lo && x <= hi) return x;
  }
  return std::clamp(dist(rng), lo, hi);
}

void check_median_iqr(const MedianIqr& m, const char* name) {
  if (!(m.q1 > 0.0 && m.q1 <= m.median && m.median <= m.q3 && m.q1 < m.q3)) {
    fail(ErrorCode::kConfig, std::string(name) + ": expected 0 < q1 <= median <= q3");
  }
}

void check_fraction(double f, const char* name) {
  if (!(f > 0.0 && f < 1.0)) fail(ErrorCode::kConfig, std::string(name) + " must lie in (0,1)");
}

void check_plan(const MeasurementPlan& p, const std::string& name) {
  if (p.period < 1 || p.period > 4) {
    fail(ErrorCode::kConfig, name + ": measurement period must lie in [1, 4] hours");
  }
  if (!(p.extra_rate >= 0.0 && p.extra_rate <= 1.0)) {
    fail(ErrorCode::kConfig, name + ": extra_rate must lie in [0, 1]");
  }
}

MedianIqr median_iqr_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) fail(ErrorCode::kConfig, "median/IQR triples need exactly 3 values");
  return {v[0], v[1], v[2]};
}

}  // namespace

double MeasurementPlan::expected_rate() const {
  const double backbone = 1.0 / static_cast<double>(period);
  return backbone + (1.0 - backbone) * extra_rate;
}

void SynthConfig::validate() const {
  if (n_patients == 0) fail(ErrorCode::kConfig, "synth.n_patients must be positive");
  check_fraction(ventilated_fraction, "synth.ventilated_fraction");
  check_fraction(mortality_vent, "synth.mortality_vent");
  check_fraction(mortality_nonvent, "synth.mortality_nonvent");
  check_median_iqr(onset, "synth.onset_median_iqr");
  check_median_iqr(los_vent, "synth.los_vent_median_iqr");
  check_median_iqr(los_nonvent, "synth.los_nonvent_median_iqr");
  check_median_iqr(mv_duration, "synth.mv_duration_median_iqr");
  if (onset.median >= los_vent.median) {
    fail(ErrorCode::kConfig, "synth: onset median must be below the ventilated LOS median");
  }
  if (onset.median < kFirstLabeledHour) {
    fail(ErrorCode::kConfig, "synth: onset median must be at least 4 hours");
  }
  if (los_nonvent.median < 4.0 || los_nonvent.median > kMaxStayHours ||
      los_vent.median > kMaxStayHours) {
    fail(ErrorCode::kConfig, "synth: LOS medians must lie in [4, 480] hours");
  }
  check_plan(vital_plan, "synth.vital_plan");
  check_plan(lab_plan, "synth.lab_plan");
  for (const auto& [name, plan] : column_plans) check_plan(plan, "synth.column_plans." + name);
  if (!(medication_rate >= 0.0 && medication_rate <= 1.0)) {
    fail(ErrorCode::kConfig, "synth.medication_rate must lie in [0, 1]");
  }
  if (!(signal_strength >= 0.0)) fail(ErrorCode::kConfig, "synth.signal_strength must be >= 0");
  if (deterioration_hours < 1) fail(ErrorCode::kConfig, "synth.deterioration_hours must be >= 1");
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    c.n_patients = j.value("n_patients", c.n_patients);
    c.ventilated_fraction = j.value("ventilated_fraction", c.ventilated_fraction);
    if (j.contains("onset_median_iqr")) c.onset = median_iqr_from_json(j["onset_median_iqr"]);
    if (j.contains("los_vent_median_iqr")) c.los_vent = median_iqr_from_json(j["los_vent_median_iqr"]);
    if (j.contains("los_nonvent_median_iqr")) c.los_nonvent = median_iqr_from_json(j["los_nonvent_median_iqr"]);
    if (j.contains("mv_duration_median_iqr")) c.mv_duration = median_iqr_from_json(j["mv_duration_median_iqr"]);
    c.mortality_vent = j.value("mortality_vent", c.mortality_vent);
    c.mortality_nonvent = j.value("mortality_nonvent", c.mortality_nonvent);
    c.vital_plan.period = j.value("vital_period", c.vital_plan.period);
    c.vital_plan.extra_rate = j.value("vital_extra_rate", c.vital_plan.extra_rate);
    c.lab_plan.period = j.value("lab_period", c.lab_plan.period);
    c.lab_plan.extra_rate = j.value("lab_extra_rate", c.lab_plan.extra_rate);
    c.medication_rate = j.value("medication_rate", c.medication_rate);
    if (j.contains("column_plans")) {
      for (const auto& [name, plan] : j["column_plans"].items()) {
        c.column_plans[name] = {plan.at("period").get<int>(), plan.at("extra_rate").get<double>()};
      }
    }
    c.signal_strength = j.value("signal_strength", c.signal_strength);
    c.deterioration_hours = j.value("deterioration_hours", c.deterioration_hours);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json synth_config_to_json(const SynthConfig& c) {
  nlohmann::json plans = nlohmann::json::object();
  for (const auto& [name, p] : c.column_plans) plans[name] = {{"period", p.period}, {"extra_rate", p.extra_rate}};
  return {{"n_patients", c.n_patients},
          {"ventilated_fraction", c.ventilated_fraction},
          {"onset_median_iqr", {c.onset.median, c.onset.q1, c.onset.q3}},
          {"los_vent_median_iqr", {c.los_vent.median, c.los_vent.q1, c.los_vent.q3}},
          {"los_nonvent_median_iqr", {c.los_nonvent.median, c.los_nonvent.q1, c.los_nonvent.q3}},
          {"mv_duration_median_iqr", {c.mv_duration.median, c.mv_duration.q1, c.mv_duration.q3}},
          {"mortality_vent", c.mortality_vent},
          {"mortality_nonvent", c.mortality_nonvent},
          {"vital_period", c.vital_plan.period},
          {"vital_extra_rate", c.vital_plan.extra_rate},
          {"lab_period", c.lab_plan.period},
          {"lab_extra_rate", c.lab_plan.extra_rate},
          {"medication_rate", c.medication_rate},
          {"column_plans", plans},
          {"signal_strength", c.signal_strength},
          {"deterioration_hours", c.deterioration_hours},
          {"seed", c.seed}};
}

const std::vector<std::string>& respiratory_risk_comorbidities() { return kRespiratoryRisk; }

Cohort generate_synthetic(const SynthConfig& config, const FeatureSchema& schema) {
  config.validate();
  schema.validate();
  const std::size_t n = config.n_patients;
  const std::size_t width = schema.clinical_width();
  const std::size_t n_comorb = schema.comorbidity_width();
  const std::size_t fio2 = schema.fio2_index();
  const std::size_t peep = schema.peep_index();

  // Exact ventilated count, randomly placed.
  const auto n_vent = static_cast<std::size_t>(std::llround(config.ventilated_fraction * static_cast<double>(n)));
  std::vector<std::uint8_t> vent(n, 0);
  std::fill_n(vent.begin(), n_vent, 1);
  {
    std::mt19937_64 rng(config.seed);
    std::shuffle(vent.begin(), vent.end(), rng);
  }

  // Per-column prevalence is a property of the population, not of the seed.
  std::vector<double> prevalence(n_comorb);
  {
    std::mt19937_64 rng(0x5eed'c0de'0001ull);
    std::uniform_real_distribution<double> u(0.03, 0.25);
    for (double& p : prevalence) p = u(rng);
  }
  std::vector<std::uint8_t> respiratory(n_comorb, 0);
  for (const std::string& name : kRespiratoryRisk) {
    if (auto k = schema.comorbidity_index(name)) respiratory[*k] = 1;
  }

  std::vector<MeasurementPlan> plans(width);
  for (std::size_t j = 0; j < width; ++j) {
    const ClinicalColumn& c = schema.clinical()[j];
    plans[j] = c.group == FeatureGroup::kVital ? config.vital_plan : config.lab_plan;
    if (auto it = config.column_plans.find(c.name); it != config.column_plans.end()) plans[j] = it->second;
  }

  std::vector<double> base_shift(width, 0.0);
  for (const Deterioration& d : kBaseDeterioration) {
    if (auto j = schema.clinical_index(d.column)) base_shift[*j] = d.magnitude;
  }
  struct Conditional {
    std::size_t comorbidity, column;
    double magnitude;
  };
  std::vector<Conditional> conditional;
  for (const ConditionalDeterioration& d : kConditionalDeterioration) {
    auto k = schema.comorbidity_index(d.comorbidity);
    auto j = schema.clinical_index(d.column);
    if (k && j) conditional.push_back({*k, *j, d.magnitude});
  }

  const LogNormal onset_ln = fit_truncated_lognormal(config.onset, kFirstLabeledHour);
  const LogNormal los_vent_ln = fit_lognormal(config.los_vent);
  const LogNormal los_nonvent_ln = fit_lognormal(config.los_nonvent);
  const LogNormal duration_ln = fit_lognormal(config.mv_duration);
  const double s = config.signal_strength;
  const double risk_odds = std::exp(0.9 * s);
  constexpr double kRho = 0.85;
  const double innovation = std::sqrt(1.0 - kRho * kRho);

  Cohort cohort;
  cohort.schema = schema;
  cohort.patients.reserve(n);
  char id_buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(i), 0x6d76u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const bool ventilated = vent[i] != 0;

    OutcomeRecord out;
    int onset = -1;
    if (ventilated) {
      std::lognormal_distribution<double> onset_dist(onset_ln.mu, onset_ln.sigma);
      onset = static_cast<int>(std::llround(sample_in(onset_dist, rng, kFirstLabeledHour, kMaxStayHours - 2)));
      onset = std::max(onset, kFirstLabeledHour);
      std::lognormal_distribution<double> los_dist(los_vent_ln.mu, los_vent_ln.sigma);
      out.los_hours = sample_in(los_dist, rng, onset + 1.0, kMaxStayHours);
      std::lognormal_distribution<double> dur_dist(duration_ln.mu, duration_ln.sigma);
      out.mv_onset_hour = onset;
      out.mv_duration_hours = sample_in(dur_dist, rng, 1.0, 24.0 * 60.0);
      out.died_inpatient = unif(rng) < config.mortality_vent;
    } else {
      std::lognormal_distribution<double> los_dist(los_nonvent_ln.mu, los_nonvent_ln.sigma);
      out.los_hours = sample_in(los_dist, rng, 4.0, kMaxStayHours);
      out.died_inpatient = unif(rng) < config.mortality_nonvent;
    }
    // Values are written with limited precision in CSV; round here so the
    // in-memory and on-disk cohorts agree exactly.
    out.los_hours = std::round(out.los_hours * 100.0) / 100.0;
    if (out.mv_duration_hours) *out.mv_duration_hours = std::round(*out.mv_duration_hours * 100.0) / 100.0;

    std::snprintf(id_buf, sizeof id_buf, "P%06zu", i + 1);
    PatientRecord rec(id_buf, stay_hours(out.los_hours), schema);
    rec.outcome = out;
    const int hours = rec.hours;

    for (std::size_t k = 0; k < n_comorb; ++k) {
      double p = prevalence[k];
      if (ventilated && respiratory[k]) {
        const double odds = p / (1.0 - p) * risk_odds;
        p = odds / (1.0 + odds);
      }
      rec.comorbidities[k] = unif(rng) < p ? 1 : 0;
    }

    // Per-column deterioration magnitude for this patient.
    std::vector<double> shift(width, 0.0);
    if (ventilated && s > 0.0) {
      for (std::size_t j = 0; j < width; ++j) shift[j] = base_shift[j];
      for (const Conditional& c : conditional) {
        if (rec.comorbidities[c.comorbidity]) shift[c.column] += c.magnitude;
      }
      for (double& v : shift) v *= s;
    }
    const int ramp_start = ventilated ? onset - config.deterioration_hours : hours;
    const int mv_end = ventilated
                           ? std::min(hours, onset + static_cast<int>(std::ceil(*out.mv_duration_hours)))
                           : -1;

    for (std::size_t j = 0; j < width; ++j) {
      const ClinicalColumn& col = schema.clinical()[j];
      if (col.group == FeatureGroup::kDemographic) {
        double v;
        if (is_binary(col)) {
          v = unif(rng) < (col.name == "sex_male" ? 0.55 : 0.6) ? 1.0 : 0.0;
        } else {
          v = col.reference + col.spread * normal(rng);
          if (col.name == "age") v = std::clamp(std::round(v), 18.0, 95.0);
        }
        rec.set(0, j, v);
        continue;
      }
      if (col.group == FeatureGroup::kMedication) {
        const double p_on = 0.05 + 0.35 * unif(rng);
        bool on = unif(rng) < p_on;
        for (int t = 0; t < hours; ++t) {
          if (t > 0 && unif(rng) < 0.1) on = unif(rng) < p_on;
          if (t == 0 || unif(rng) < config.medication_rate) rec.set(t, j, on ? 1.0 : 0.0);
        }
        continue;
      }
      // Vitals and labs: stationary AR(1) around a patient-level offset.
      const double offset = 0.6 * normal(rng);
      double z = normal(rng);
      const MeasurementPlan& plan = plans[j];
      const int phase = static_cast<int>(unif(rng) * plan.period);
      for (int t = 0; t < hours; ++t) {
        if (t > 0) z = kRho * z + innovation * normal(rng);
        const double noise = 0.2 * normal(rng);
        bool measure;
        if (j == peep) {
          measure = ventilated && t >= onset && t < mv_end;
        } else if (j == fio2 && ventilated && t >= onset && t < mv_end) {
          measure = true;
        } else {
          const bool scheduled = t >= phase && (t - phase) % plan.period == 0;
          const double extra = unif(rng);
          measure = scheduled || extra < plan.extra_rate;
        }
        if (!measure) continue;
        double latent = offset + 0.6 * z + noise;
        if (t >= ramp_start && t < onset) {
          const double progress = static_cast<double>(t - ramp_start + 1) / config.deterioration_hours;
          latent += shift[j] * progress;
        }
        rec.set(t, j, col.reference + col.spread * latent);
      }
    }
    cohort.patients.push_back(std::move(rec));
  }
  return cohort;
}

}  // namespace mvrisk
