/*
 * Copyright 2026 the rlvr-lab authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlvr/runlog.hpp"

namespace rlvr {

// Step-indexed metric curve for one run.
struct Curve {
  std::string run_id;
  std::string metric;
  int n = 0;  // dataset size of the producing run, when known
  std::vector<std::pair<int, double>> points;  // strictly increasing steps

  void validate() const;
  int last_step() const;
  // Value at the logged step nearest to `step` (earlier step wins ties).
  double at_nearest(int step) const;
  int nearest_step(int step) const;
};

// Earliest step t <= T - guard with value >= eps_max * (max over all T
// steps); nullopt when no such step exists inside the guard window.
std::optional<int> saturation_step(const Curve& reward_curve,
                                   double eps_max = 0.99, int guard = 50);

struct EfficiencyMetrics {
  std::optional<double> delta_sat;   // M(t_sat) - M(0)
  std::optional<double> delta_post;  // max_{t >= t_sat} M(t) - M(t_sat)
  std::optional<double> g_sat;       // companion(t_sat) - M(t_sat)
};

// All three metrics read the metric curve at the logged step nearest to
// t_sat. An absent t_sat leaves every metric undefined.
EfficiencyMetrics efficiency_metrics(const Curve& metric_curve,
                                     std::optional<int> t_sat,
                                     const Curve* companion = nullptr);

// Unbiased estimator 1 - C(n-c, k)/C(n, k) of the probability that at least
// one of k samples is correct, given c correct among n.
double pass_at_k_unbiased(int c, int n, int k);

// Direct estimator: 1 if any of the first k flags is set.
double pass_at_k_direct(std::span<const bool> flags, int k);

struct EvalMetrics {
  double avg16 = 0.0;
  std::map<int, double> pass_at;  // k -> pass@k
};

// Per-problem metrics from exactly 16 correctness flags.
EvalMetrics eval_metrics(std::span<const bool> correct_flags,
                         std::span<const int> ks);

// Cohen's kappa over two equal-length label sequences. Two constant, equal
// raters (chance agreement 1) are defined as kappa = 1.
double cohen_kappa(std::span<const int> labels_a,
                   std::span<const int> labels_b);

// Curves from run-log files: "train_reward" from step records plus one curve
// per eval metric. Malformed lines and schema mismatches throw FormatError
// naming the line.
std::vector<Curve> ingest(std::span<const std::string> paths);
std::vector<Curve> curves_from_log(const RunLog& log);

struct ReportRow {
  std::string run_id;
  std::string metric;
  std::optional<int> t_sat;
  EfficiencyMetrics metrics;
};

// CSV table, one row per (run, metric): run_id,metric,t_sat,delta_sat,
// delta_post,g_sat. Undefined entries are left empty.
void write_report_csv(std::span<const ReportRow> rows,
                      const std::string& path);

// Static line chart of the given curves with an optional dashed vertical
// marker at t_sat.
void write_curve_svg(std::span<const Curve> curves,
                     std::optional<int> t_sat, const std::string& path);

}  // namespace rlvr
