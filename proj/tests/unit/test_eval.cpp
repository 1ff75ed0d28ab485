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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mvrisk/error.hpp"
#include "mvrisk/eval.hpp"

namespace mvrisk {
namespace {

using Labels = std::vector<std::uint8_t>;
constexpr double kInf = std::numeric_limits<double>::infinity();

// ---- oracles ---------------------------------------------------------------

double brute_auc(const std::vector<double>& s, const Labels& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

// Precision at each positive's rank, distinct scores.
double rank_ap(const std::vector<double>& s, const Labels& y) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  double total = 0.0, hits = 0.0, positives = 0.0;
  for (std::uint8_t l : y) positives += l;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (y[order[k]]) {
      hits += 1.0;
      total += hits / static_cast<double>(k + 1);
    }
  }
  return total / positives;
}

// Direct silencing scan, independent of apply_silencing.
Confusion scan(const ScoredCohort& cohort, double threshold, int silence) {
  Confusion c;
  for (const PatientScores& p : cohort) {
    int quiet = 0;
    for (std::size_t t = 0; t < p.scores.size(); ++t) {
      if (quiet > 0) {
        --quiet;
        continue;
      }
      const bool fire = p.scores[t] >= threshold;
      if (fire) quiet = silence;
      if (p.labels[t]) {
        (fire ? c.tp : c.fn) += 1;
      } else {
        (fire ? c.fp : c.tn) += 1;
      }
    }
  }
  return c;
}

std::vector<double> grid_of(const ScoredCohort& cohort) {
  std::vector<double> g;
  for (const auto& p : cohort) g.insert(g.end(), p.scores.begin(), p.scores.end());
  std::sort(g.begin(), g.end(), std::greater<>());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

double oracle_policy_auc(const ScoredCohort& cohort, int silence) {
  std::vector<double> tpr, fpr;
  const Confusion top = scan(cohort, kInf, silence);
  tpr.push_back(top.tpr());
  fpr.push_back(top.fpr());
  for (double th : grid_of(cohort)) {
    const Confusion c = scan(cohort, th, silence);
    tpr.push_back(c.tpr());
    fpr.push_back(c.fpr());
  }
  tpr.push_back(1.0);
  fpr.push_back(1.0);
  double area = 0.0;
  for (std::size_t i = 1; i < tpr.size(); ++i) area += (fpr[i] - fpr[i - 1]) * (tpr[i] + tpr[i - 1]) / 2.0;
  return area;
}

ScoredCohort random_cohort(std::mt19937_64& rng, std::size_t patients, std::size_t max_len, int levels) {
  ScoredCohort c;
  std::uniform_int_distribution<int> lvl(0, levels - 1);
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  for (std::size_t p = 0; p < patients; ++p) {
    PatientScores ps;
    const std::size_t n = len(rng);
    const bool vent = rng() % 3 == 0;
    for (std::size_t t = 0; t < n; ++t) {
      const bool pos = vent && t + 6 >= n;
      ps.labels.push_back(pos ? 1 : 0);
      ps.scores.push_back((lvl(rng) + (pos ? 2 : 0)) / static_cast<double>(levels + 2));
    }
    c.push_back(std::move(ps));
  }
  c[0].labels.back() = 1;
  c[1 % patients].labels.front() = 0;
  return c;
}

// ---- silencing ---------------------------------------------------------------

TEST(Silencing, ThresholdAboveMax) {
  const std::vector<double> s = {0.1, 0.5, 0.3};
  const AlarmTrace t = apply_silencing(s, 0.9, 6);
  EXPECT_TRUE(t.alarms.empty());
  EXPECT_EQ(t.retained, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Silencing, ConstantScoresFireEverySevenHours) {
  const std::vector<double> s(20, 2.0);
  const AlarmTrace t = apply_silencing(s, 1.0, 6);
  EXPECT_EQ(t.alarms, (std::vector<std::size_t>{0, 7, 14}));
  EXPECT_EQ(t.retained, t.alarms);
}

TEST(Silencing, ZeroHoursRetainsAll) {
  const std::vector<double> s(9, 2.0);
  const AlarmTrace t = apply_silencing(s, 1.0, 0);
  EXPECT_EQ(t.retained.size(), 9u);
  EXPECT_EQ(t.alarms.size(), 9u);
}

TEST(Silencing, Properties) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> s(1 + rng() % 60);
    for (double& x : s) x = u(rng);
    const double th = u(rng);
    const AlarmTrace t = apply_silencing(s, th, 6);
    for (std::size_t i = 1; i < t.alarms.size(); ++i) EXPECT_GE(t.alarms[i] - t.alarms[i - 1], 7u);
    std::vector<int> silenced(s.size(), 0);
    for (std::size_t a : t.alarms) {
      for (std::size_t k = a + 1; k <= a + 6 && k < s.size(); ++k) silenced[k] = 1;
    }
    std::vector<int> retained(s.size(), 0);
    for (std::size_t r : t.retained) retained[r] = 1;
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(retained[i] + silenced[i], 1) << i;
  }
}

// ---- ROC / PR -----------------------------------------------------------------

TEST(RocAuc, Examples) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.9}, Labels{0, 1}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>(6, 0.4), Labels{0, 1, 0, 1, 1, 0}), 0.5);
  EXPECT_EQ(roc_auc(std::vector<double>{0.8, 0.7, 0.6, 0.5}, Labels{1, 0, 1, 0}), 0.75);
}

TEST(RocAuc, SingleClassUndefined) {
  try {
    roc_auc(std::vector<double>{0.1, 0.2}, Labels{1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefinedMetric);
  }
}

TEST(RocAuc, MatchesPairCountingOnRandomInstances) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    std::vector<double> s(n);
    Labels y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 12) / 11.0;
      y[i] = rng() % 2;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(roc_auc(s, y), brute_auc(s, y), 1e-12);
  }
}

TEST(RocAuc, InvariantUnderIncreasingTransform) {
  std::mt19937_64 rng(5);
  std::vector<double> s(40), t(40);
  Labels y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    s[i] = static_cast<double>(rng() % 9) / 4.0;
    t[i] = std::exp(3.0 * s[i]) - 7.0;
    y[i] = i % 3 == 0;
  }
  EXPECT_EQ(roc_auc(s, y), roc_auc(t, y));
}

TEST(AucPr, Examples) {
  EXPECT_EQ(auc_pr(std::vector<double>{0.9, 0.1}, Labels{1, 0}), 1.0);
  EXPECT_NEAR(auc_pr(std::vector<double>{0.9, 0.8, 0.7}, Labels{1, 0, 1}), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_NEAR(auc_pr(std::vector<double>(10, 0.5), Labels{1, 0, 0, 1, 0, 0, 0, 1, 0, 0}), 0.3, 1e-15);
}

TEST(AucPr, NoPositivesUndefined) {
  EXPECT_THROW(auc_pr(std::vector<double>{0.1, 0.2}, Labels{0, 0}), Error);
}

TEST(AucPr, MatchesRankEnumeration) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    std::vector<double> s(n);
    Labels y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = u(rng);
      y[i] = rng() % 3 == 0;
    }
    y[0] = 1;
    EXPECT_NEAR(auc_pr(s, y), rank_ap(s, y), 1e-10);
  }
}

// ---- policy AUC ----------------------------------------------------------------

TEST(PolicyAuc, SilenceZeroEqualsPooledRocAuc) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const ScoredCohort c = random_cohort(rng, 2 + rng() % 6, 30, 7);
    std::vector<double> s;
    Labels y;
    pool(c, &s, &y);
    EXPECT_NEAR(policy_auc(c, 0), roc_auc(s, y), 1e-12);
  }
}

TEST(PolicyAuc, PerfectSeparationIsOne) {
  ScoredCohort c(2);
  for (int t = 0; t < 20; ++t) {
    c[0].scores.push_back(0.1 + 0.001 * t);
    c[0].labels.push_back(0);
  }
  for (int t = 0; t < 10; ++t) {
    c[1].scores.push_back(t < 4 ? 0.05 : 1.5);
    c[1].labels.push_back(t < 4 ? 0 : 1);
  }
  for (int silence : {0, 3, 6}) EXPECT_EQ(policy_auc(c, silence), 1.0);
}

ScoredCohort three_patient_fixture() {
  ScoredCohort c(3);
  c[0].scores = {0.2, 0.9, 0.4, 0.8, 0.3, 0.1, 0.7, 0.95, 0.6, 0.5};
  c[0].labels = {0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  c[1].scores = {0.3, 0.35, 0.1, 0.9, 0.2, 0.6, 0.6, 0.45};
  c[1].labels = {0, 0, 0, 0, 0, 0, 0, 0};
  c[2].scores = {0.7, 0.65, 0.8, 0.4, 0.85, 0.9, 0.5, 0.75, 0.3};
  c[2].labels = {0, 0, 0, 1, 1, 1, 1, 1, 1};
  return c;
}

TEST(PolicyAuc, ThreePatientFixtureMatchesThresholdOracle) {
  const ScoredCohort c = three_patient_fixture();
  const std::vector<RocPoint> roc = policy_roc(c, 6);
  const std::vector<double> grid = grid_of(c);
  ASSERT_EQ(roc.size(), grid.size() + 2);
  EXPECT_EQ(roc.front().threshold, kInf);
  EXPECT_EQ(roc.back().threshold, -kInf);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Confusion want = scan(c, grid[i], 6);
    const Confusion& got = roc[i + 1].counts;
    EXPECT_EQ(roc[i + 1].threshold, grid[i]);
    EXPECT_EQ(got.tp, want.tp) << grid[i];
    EXPECT_EQ(got.fn, want.fn) << grid[i];
    EXPECT_EQ(got.fp, want.fp) << grid[i];
    EXPECT_EQ(got.tn, want.tn) << grid[i];
  }
  EXPECT_EQ(policy_auc(c, 6), oracle_policy_auc(c, 6));
}

TEST(PolicyAuc, RandomCohortsMatchThresholdOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 150; ++trial) {
    const ScoredCohort c = random_cohort(rng, 2 + rng() % 8, 40, 9);
    for (int silence : {1, 3, 6}) EXPECT_EQ(policy_auc(c, silence), oracle_policy_auc(c, silence));
  }
}

TEST(PolicyAuc, InvariantUnderIncreasingTransform) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    ScoredCohort c = random_cohort(rng, 5, 30, 8);
    const double before = policy_auc(c, 6);
    for (auto& p : c) {
      for (double& s : p.scores) s = 2.0 / (1.0 + std::exp(-5.0 * (s - 0.3)));
    }
    EXPECT_EQ(policy_auc(c, 6), before);
  }
}

TEST(PolicyAuc, SingleClassUndefined) {
  ScoredCohort c(1);
  c[0].scores = {0.1, 0.2};
  c[0].labels = {0, 0};
  EXPECT_THROW(policy_auc(c), Error);
  EXPECT_THROW(policy_auc(ScoredCohort{}), Error);
}

// ---- operating point --------------------------------------------------------------

TEST(OperatingPoint, PerfectSeparation) {
  ScoredCohort c(1);
  c[0].scores = {0.1, 0.2, 0.15, 1.8, 1.9};
  c[0].labels = {0, 0, 0, 1, 1};
  const OperatingPoint op = operating_point(c, 0.8, 0);
  EXPECT_EQ(op.specificity, 1.0);
  EXPECT_EQ(op.ppv, 1.0);
  EXPECT_EQ(op.fp_count, 0u);
  EXPECT_GE(op.sensitivity, 0.8);
}

TEST(OperatingPoint, TenWindowFixtureMatchesScan) {
  ScoredCohort c(2);
  c[0].scores = {0.9, 0.3, 0.8, 0.35, 0.6};
  c[0].labels = {1, 0, 1, 0, 1};
  c[1].scores = {0.7, 0.2, 0.5, 0.4, 0.1};
  c[1].labels = {0, 1, 1, 0, 0};
  for (int silence : {0, 1, 2}) {
    const OperatingPoint op = operating_point(c, 0.8, silence);
    double want = 0.0;
    Confusion wc;
    for (double th : grid_of(c)) {
      const Confusion k = scan(c, th, silence);
      if (k.tpr() >= 0.8) {
        want = th;
        wc = k;
        break;
      }
    }
    EXPECT_EQ(op.threshold, want) << silence;
    EXPECT_EQ(op.fp_count, wc.fp);
    EXPECT_EQ(op.sensitivity, wc.tpr());
    EXPECT_EQ(op.specificity, 1.0 - wc.fpr());
    EXPECT_EQ(op.ppv, static_cast<double>(wc.tp) / static_cast<double>(wc.tp + wc.fp));
    EXPECT_GE(op.sensitivity, 0.8);
  }
}

TEST(OperatingPoint, FpMonotoneWithoutSilencing) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const ScoredCohort c = random_cohort(rng, 6, 30, 10);
    const auto roc = policy_roc(c, 0);
    for (std::size_t i = 1; i < roc.size(); ++i) EXPECT_GE(roc[i].counts.fp, roc[i - 1].counts.fp);
  }
}

TEST(OperatingPoint, SilencingCanRaiseFpAtHigherThreshold) {
  ScoredCohort c(1);
  c[0].scores = {0.6, 0.1, 0.1, 0.7, 0.1, 0.1, 0.1, 0.7, 0.1, 0.1, 0.7};
  c[0].labels = {1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(scan(c, 0.5, 6).fp, 1u);
  EXPECT_EQ(scan(c, 0.65, 6).fp, 2u);
}

TEST(OperatingPoint, BadTargetRejected) {
  EXPECT_THROW(operating_point(three_patient_fixture(), 1.5), Error);
}

// ---- DeLong -------------------------------------------------------------------------

TEST(DeLong, IdenticalModels) {
  const std::vector<double> s = {0.1, 0.7, 0.3, 0.9, 0.5, 0.2};
  const Labels y = {0, 1, 0, 1, 1, 0};
  const DeLongResult r = delong_test(s, s, y);
  EXPECT_EQ(r.z, 0.0);
  EXPECT_EQ(r.p, 1.0);
  EXPECT_FALSE(r.degenerate);
}

double psi(double x, double y) { return x > y ? 1.0 : (x == y ? 0.5 : 0.0); }

double sample_cov(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0, my = 0.0, s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / x.size();
    my += y[i] / y.size();
  }
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / (x.size() - 1.0);
}

TEST(DeLong, EightWindowVarianceMatchesEnumeration) {
  const std::vector<double> a = {0.9, 0.4, 0.7, 0.4, 0.3, 0.6, 0.2, 0.5};
  const std::vector<double> b = {0.8, 0.5, 0.3, 0.6, 0.4, 0.6, 0.1, 0.2};
  const Labels y = {1, 1, 1, 1, 0, 0, 0, 0};
  std::vector<double> v10a, v10b, v01a, v01b;
  for (std::size_t i = 0; i < 8; ++i) {
    if (!y[i]) continue;
    double sa = 0.0, sb = 0.0;
    for (std::size_t j = 0; j < 8; ++j) {
      if (y[j]) continue;
      sa += psi(a[i], a[j]) / 4.0;
      sb += psi(b[i], b[j]) / 4.0;
    }
    v10a.push_back(sa);
    v10b.push_back(sb);
  }
  for (std::size_t j = 0; j < 8; ++j) {
    if (y[j]) continue;
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      if (!y[i]) continue;
      sa += psi(a[i], a[j]) / 4.0;
      sb += psi(b[i], b[j]) / 4.0;
    }
    v01a.push_back(sa);
    v01b.push_back(sb);
  }
  const double var = (sample_cov(v10a, v10a) + sample_cov(v10b, v10b) - 2.0 * sample_cov(v10a, v10b)) / 4.0 +
                     (sample_cov(v01a, v01a) + sample_cov(v01b, v01b) - 2.0 * sample_cov(v01a, v01b)) / 4.0;
  const DeLongResult r = delong_test(a, b, y);
  EXPECT_NEAR(r.variance, var, 1e-10);
  EXPECT_NEAR(r.auc_a, brute_auc(a, y), 1e-15);
  EXPECT_NEAR(r.auc_b, brute_auc(b, y), 1e-15);
  EXPECT_NEAR(r.z, (r.auc_a - r.auc_b) / std::sqrt(var), 1e-9);
}

TEST(DeLong, SwapAntisymmetry) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + rng() % 40;
    std::vector<double> a(n), b(n);
    Labels y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = i % 2;
      a[i] = std::round(10 * (u(rng) + 0.3 * y[i])) / 10;
      b[i] = u(rng);
    }
    const DeLongResult ab = delong_test(a, b, y);
    const DeLongResult ba = delong_test(b, a, y);
    EXPECT_EQ(ab.z, -ba.z);
    EXPECT_EQ(ab.p, ba.p);
    EXPECT_EQ(ab.variance, ba.variance);
  }
}

TEST(DeLong, PerfectVersusRandomIsSignificant) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> perfect(200), random(200);
  Labels y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    y[i] = i < 100;
    perfect[i] = y[i] ? 1.0 + u(rng) : u(rng);
    random[i] = u(rng);
  }
  const DeLongResult r = delong_test(perfect, random, y);
  EXPECT_EQ(r.auc_a, 1.0);
  EXPECT_LT(r.p, 0.05);
  EXPECT_GT(r.z, 0.0);
}

TEST(DeLong, DegenerateZeroVariance) {
  const std::vector<double> a = {1.0, 1.0, 0.0, 0.0};
  const std::vector<double> b = {0.5, 0.5, 0.5, 0.5};
  const DeLongResult r = delong_test(a, b, Labels{1, 1, 0, 0});
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.p, 0.0);
}

TEST(DeLong, NeedsTwoWindowsPerClass) {
  EXPECT_THROW(delong_test(std::vector<double>{0.1, 0.2, 0.3}, std::vector<double>{0.1, 0.2, 0.3}, Labels{1, 0, 0}),
               Error);
}

// ---- report ---------------------------------------------------------------------------

TEST(Report, FieldsAndInvariants) {
  std::mt19937_64 rng(3);
  const ScoredCohort c = random_cohort(rng, 20, 40, 10);
  const EvalReport r = evaluate_scores(c, EvalSettings());
  EXPECT_EQ(r.auc, policy_auc(c, 6));
  std::vector<double> s;
  Labels y;
  pool(c, &s, &y);
  EXPECT_EQ(r.auc_plain, roc_auc(s, y));
  EXPECT_EQ(r.auc_pr, auc_pr(s, y));
  EXPECT_EQ(r.windows, s.size());
  EXPECT_GE(r.op.sensitivity, 0.8);
  const nlohmann::json j = report_to_json(r, EvalSettings());
  EXPECT_TRUE(j.contains("auc"));
  EXPECT_TRUE(j.contains("auc_pr"));
  EXPECT_TRUE(j.contains("operating_point"));
  EXPECT_EQ(j["roc"].front()["threshold"], "inf");
}

}  // namespace
}  // namespace mvrisk
