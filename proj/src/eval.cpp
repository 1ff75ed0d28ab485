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

#include "mvrisk/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "mvrisk/cohort_io.hpp"
#include "mvrisk/error.hpp"

namespace mvrisk {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_pair(std::span<const double> scores, std::span<const std::uint8_t> labels, const char* op) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::kShape, std::string(op) + ": " + std::to_string(scores.size()) + " scores vs " +
                                std::to_string(labels.size()) + " labels");
  }
}

// 1-based midranks in ascending score order.
std::vector<double> midranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = mid;
    i = j + 1;
  }
  return r;
}

// Unique scores, descending.
std::vector<double> unique_desc(std::vector<double> v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

Confusion confusion_at(const PatientScores& p, double threshold, int silence_hours) {
  Confusion c;
  const AlarmTrace trace = apply_silencing(p.scores, threshold, silence_hours);
  for (std::size_t i : trace.retained) {
    const bool fire = p.scores[i] >= threshold;
    if (p.labels[i]) {
      (fire ? c.tp : c.fn) += 1;
    } else {
      (fire ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

void check_cohort(const ScoredCohort& cohort) {
  if (cohort.empty()) fail(ErrorCode::kUndefinedMetric, "no patients to evaluate");
  bool pos = false, neg = false;
  for (const PatientScores& p : cohort) {
    check_pair(p.scores, p.labels, "policy metrics");
    for (std::uint8_t l : p.labels) (l ? pos : neg) = true;
  }
  if (!pos || !neg) fail(ErrorCode::kUndefinedMetric, "policy metrics need both positive and negative windows");
}

}  // namespace

AlarmTrace apply_silencing(std::span<const double> scores, double threshold, int silence_hours) {
  if (silence_hours < 0) fail(ErrorCode::kUsage, "silence_hours must be >= 0");
  AlarmTrace trace;
  std::size_t silenced_until = 0;  // first hour that is not silenced
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (t < silenced_until) continue;
    trace.retained.push_back(t);
    if (scores[t] >= threshold) {
      trace.alarms.push_back(t);
      silenced_until = t + 1 + static_cast<std::size_t>(silence_hours);
    }
  }
  return trace;
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_pair(scores, labels, "roc_auc");
  const std::vector<double> r = midranks(scores);
  double rank_sum = 0.0;
  std::size_t n1 = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i]) {
      rank_sum += r[i];
      ++n1;
    }
  }
  const std::size_t n0 = scores.size() - n1;
  if (n1 == 0 || n0 == 0) fail(ErrorCode::kUndefinedMetric, "roc_auc needs both classes");
  const double d1 = static_cast<double>(n1);
  return (rank_sum - d1 * (d1 + 1.0) / 2.0) / (d1 * static_cast<double>(n0));
}

std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_pair(scores, labels, "auc_pr");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t positives = 0;
  for (std::uint8_t l : labels) positives += l ? 1 : 0;
  if (positives == 0) fail(ErrorCode::kUndefinedMetric, "auc_pr needs at least one positive");
  std::vector<PrPoint> curve;
  std::size_t tp = 0, seen = 0, i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      tp += labels[order[i]] ? 1 : 0;
      ++seen;
      ++i;
    }
    curve.push_back({s, static_cast<double>(tp) / static_cast<double>(positives),
                     static_cast<double>(tp) / static_cast<double>(seen)});
  }
  return curve;
}

double auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const std::vector<PrPoint> curve = pr_curve(scores, labels);
  double ap = 0.0, prev_recall = 0.0;
  for (const PrPoint& p : curve) {
    ap += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return ap;
}

double Confusion::tpr() const {
  const std::uint64_t pos = tp + fn;
  return pos == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pos);
}

double Confusion::fpr() const {
  const std::uint64_t neg = fp + tn;
  return neg == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(neg);
}

std::vector<RocPoint> policy_roc(const ScoredCohort& cohort, int silence_hours) {
  check_cohort(cohort);
  std::vector<double> all;
  for (const PatientScores& p : cohort) all.insert(all.end(), p.scores.begin(), p.scores.end());
  const std::vector<double> grid = unique_desc(std::move(all));

  // Each patient's confusion counts only change at its own unique scores, so
  // changes are posted at those grid positions and prefix-summed.
  struct Delta {
    std::int64_t tp = 0, fn = 0, fp = 0, tn = 0;
  };
  std::vector<Delta> delta(grid.size());
  Confusion base;
  for (const PatientScores& p : cohort) {
    Confusion prev;
    for (std::size_t i = 0; i < p.scores.size(); ++i) (p.labels[i] ? prev.fn : prev.tn) += 1;
    base.fn += prev.fn;
    base.tn += prev.tn;
    for (double u : unique_desc(p.scores)) {
      const Confusion cur = confusion_at(p, u, silence_hours);
      const auto pos = static_cast<std::size_t>(
          std::lower_bound(grid.begin(), grid.end(), u, std::greater<>()) - grid.begin());
      Delta& d = delta[pos];
      d.tp += static_cast<std::int64_t>(cur.tp) - static_cast<std::int64_t>(prev.tp);
      d.fn += static_cast<std::int64_t>(cur.fn) - static_cast<std::int64_t>(prev.fn);
      d.fp += static_cast<std::int64_t>(cur.fp) - static_cast<std::int64_t>(prev.fp);
      d.tn += static_cast<std::int64_t>(cur.tn) - static_cast<std::int64_t>(prev.tn);
      prev = cur;
    }
  }

  std::vector<RocPoint> roc;
  roc.reserve(grid.size() + 2);
  roc.push_back({kInf, base.tpr(), base.fpr(), base});
  std::int64_t tp = static_cast<std::int64_t>(base.tp), fn = static_cast<std::int64_t>(base.fn),
               fp = static_cast<std::int64_t>(base.fp), tn = static_cast<std::int64_t>(base.tn);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    tp += delta[g].tp;
    fn += delta[g].fn;
    fp += delta[g].fp;
    tn += delta[g].tn;
    Confusion c{static_cast<std::uint64_t>(tp), static_cast<std::uint64_t>(fn), static_cast<std::uint64_t>(fp),
                static_cast<std::uint64_t>(tn)};
    roc.push_back({grid[g], c.tpr(), c.fpr(), c});
  }
  roc.push_back({-kInf, 1.0, 1.0, roc.back().counts});
  return roc;
}

double policy_auc(const ScoredCohort& cohort, int silence_hours) {
  const std::vector<RocPoint> roc = policy_roc(cohort, silence_hours);
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  }
  return area;
}

OperatingPoint operating_point(const ScoredCohort& cohort, double target_sensitivity, int silence_hours) {
  if (!(target_sensitivity > 0.0 && target_sensitivity <= 1.0)) {
    fail(ErrorCode::kConfig, "target sensitivity must lie in (0, 1]");
  }
  const std::vector<RocPoint> roc = policy_roc(cohort, silence_hours);
  for (std::size_t i = 1; i + 1 < roc.size(); ++i) {
    const RocPoint& r = roc[i];
    if (r.tpr < target_sensitivity) continue;
    OperatingPoint op;
    op.threshold = r.threshold;
    op.counts = r.counts;
    op.sensitivity = r.tpr;
    op.specificity = 1.0 - r.fpr;
    const std::uint64_t flagged = r.counts.tp + r.counts.fp;
    op.ppv = flagged == 0 ? 0.0 : static_cast<double>(r.counts.tp) / static_cast<double>(flagged);
    op.fp_count = r.counts.fp;
    // Every retained window at or above threshold fires an alarm.
    op.false_alarms = r.counts.fp;
    op.alarms = flagged;
    return op;
  }
  fail(ErrorCode::kUnattainable, "no threshold reaches sensitivity " + std::to_string(target_sensitivity));
}

DeLongResult delong_test(std::span<const double> a, std::span<const double> b, std::span<const std::uint8_t> labels) {
  check_pair(a, labels, "delong_test");
  check_pair(b, labels, "delong_test");
  std::vector<double> pa, na, pb, nb;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] ? pa : na).push_back(a[i]);
    (labels[i] ? pb : nb).push_back(b[i]);
  }
  const std::size_t m = pa.size(), n = na.size();
  if (m == 0 || n == 0) fail(ErrorCode::kUndefinedMetric, "delong_test needs both classes");
  if (m < 2 || n < 2) fail(ErrorCode::kUndefinedMetric, "delong_test needs at least two windows per class");

  struct Components {
    double auc;
    std::vector<double> v10, v01;
  };
  auto components = [&](const std::vector<double>& pos, const std::vector<double>& neg) {
    std::vector<double> all(pos);
    all.insert(all.end(), neg.begin(), neg.end());
    const std::vector<double> r = midranks(all);
    const std::vector<double> rp = midranks(pos);
    const std::vector<double> rn = midranks(neg);
    Components c;
    c.v10.resize(m);
    c.v01.resize(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      c.v10[i] = (r[i] - rp[i]) / static_cast<double>(n);
      sum += r[i];
    }
    for (std::size_t j = 0; j < n; ++j) c.v01[j] = 1.0 - (r[m + j] - rn[j]) / static_cast<double>(m);
    const double dm = static_cast<double>(m);
    c.auc = (sum - dm * (dm + 1.0) / 2.0) / (dm * static_cast<double>(n));
    return c;
  };
  const Components ca = components(pa, na);
  const Components cb = components(pb, nb);
  auto cov = [](const std::vector<double>& x, const std::vector<double>& y) {
    const double k = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mx += x[i];
      my += y[i];
    }
    mx /= k;
    my /= k;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
    return s / (k - 1.0);
  };
  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  const double s_aa = cov(ca.v10, ca.v10) / dm + cov(ca.v01, ca.v01) / dn;
  const double s_bb = cov(cb.v10, cb.v10) / dm + cov(cb.v01, cb.v01) / dn;
  const double s_ab = cov(ca.v10, cb.v10) / dm + cov(ca.v01, cb.v01) / dn;

  DeLongResult res;
  res.auc_a = ca.auc;
  res.auc_b = cb.auc;
  res.variance = std::max(0.0, (s_aa + s_bb) - 2.0 * s_ab);
  const double diff = ca.auc - cb.auc;
  if (res.variance > 0.0) {
    res.z = diff / std::sqrt(res.variance);
    res.p = std::erfc(std::fabs(res.z) / std::sqrt(2.0));
  } else if (diff != 0.0) {
    res.degenerate = true;
    res.z = 0.0;
    res.p = 0.0;
  }
  return res;
}

void pool(const ScoredCohort& cohort, std::vector<double>* scores, std::vector<std::uint8_t>* labels) {
  scores->clear();
  labels->clear();
  for (const PatientScores& p : cohort) {
    scores->insert(scores->end(), p.scores.begin(), p.scores.end());
    labels->insert(labels->end(), p.labels.begin(), p.labels.end());
  }
}

EvalReport evaluate_scores(const ScoredCohort& cohort, const EvalSettings& settings) {
  EvalReport r;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  pool(cohort, &scores, &labels);
  r.patients = cohort.size();
  r.windows = scores.size();
  for (std::uint8_t l : labels) r.positive_windows += l;
  if (!scores.empty()) {
    r.score_min = *std::min_element(scores.begin(), scores.end());
    r.score_max = *std::max_element(scores.begin(), scores.end());
  }
  r.roc = policy_roc(cohort, settings.silence_hours);
  for (std::size_t i = 1; i < r.roc.size(); ++i) {
    r.auc += (r.roc[i].fpr - r.roc[i - 1].fpr) * (r.roc[i].tpr + r.roc[i - 1].tpr) / 2.0;
  }
  r.auc_plain = roc_auc(scores, labels);
  r.auc_pr = auc_pr(scores, labels);
  r.pr = pr_curve(scores, labels);
  r.op = operating_point(cohort, settings.target_sensitivity, settings.silence_hours);
  return r;
}

nlohmann::json report_to_json(const EvalReport& r, const EvalSettings& settings) {
  nlohmann::json roc = nlohmann::json::array();
  for (const RocPoint& p : r.roc) {
    nlohmann::json th = std::isinf(p.threshold) ? nlohmann::json(p.threshold > 0 ? "inf" : "-inf")
                                                 : nlohmann::json(p.threshold);
    roc.push_back({{"threshold", th}, {"tpr", p.tpr}, {"fpr", p.fpr}});
  }
  nlohmann::json pr = nlohmann::json::array();
  for (const PrPoint& p : r.pr) pr.push_back({{"threshold", p.threshold}, {"recall", p.recall}, {"precision", p.precision}});
  return {{"patients", r.patients},
          {"windows", r.windows},
          {"positive_windows", r.positive_windows},
          {"silence_hours", settings.silence_hours},
          {"auc", r.auc},
          {"auc_plain", r.auc_plain},
          {"auc_pr", r.auc_pr},
          {"score_range", {r.score_min, r.score_max}},
          {"operating_point",
           {{"target_sensitivity", settings.target_sensitivity},
            {"threshold", r.op.threshold},
            {"sensitivity", r.op.sensitivity},
            {"specificity", r.op.specificity},
            {"ppv", r.op.ppv},
            {"fp_count", r.op.fp_count},
            {"false_alarm_events", r.op.false_alarms},
            {"alarm_events", r.op.alarms},
            {"tp", r.op.counts.tp},
            {"fn", r.op.counts.fn},
            {"fp", r.op.counts.fp},
            {"tn", r.op.counts.tn}}},
          {"roc", roc},
          {"pr", pr}};
}

void write_roc_csv(const std::string& path, const std::vector<RocPoint>& roc) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, "cannot write " + path);
  os << "threshold,tpr,fpr\n";
  for (const RocPoint& p : roc) {
    os << (std::isinf(p.threshold) ? (p.threshold > 0 ? "inf" : "-inf") : format_double(p.threshold)) << ','
       << format_double(p.tpr) << ',' << format_double(p.fpr) << '\n';
  }
}

}  // namespace mvrisk
