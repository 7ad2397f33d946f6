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

#include "rlvr/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rlvr/errors.hpp"

namespace rlvr {

void Curve::validate() const {
  if (points.empty()) throw InputError("empty curve");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].second)) {
      throw InputError("non-finite curve value at step " +
                       std::to_string(points[i].first));
    }
    if (i > 0 && points[i].first <= points[i - 1].first) {
      throw InputError("curve steps must be strictly increasing");
    }
  }
}

int Curve::last_step() const {
  if (points.empty()) throw InputError("empty curve");
  return points.back().first;
}

int Curve::nearest_step(int step) const {
  validate();
  int best = points.front().first;
  long best_dist = std::numeric_limits<long>::max();
  for (const auto& [s, v] : points) {
    const long dist = std::labs(static_cast<long>(s) - static_cast<long>(step));
    if (dist < best_dist) {
      best_dist = dist;
      best = s;
    }
  }
  return best;
}

double Curve::at_nearest(int step) const {
  const int s = nearest_step(step);
  for (const auto& [ps, v] : points) {
    if (ps == s) return v;
  }
  throw InputError("unreachable");
}

std::optional<int> saturation_step(const Curve& reward_curve, double eps_max,
                                   int guard) {
  reward_curve.validate();
  const int t_end = reward_curve.last_step();
  if (static_cast<int>(reward_curve.points.size()) <= guard) {
    throw InputError("curve shorter than the guard window");
  }
  double r_max = -std::numeric_limits<double>::infinity();
  for (const auto& [s, v] : reward_curve.points) r_max = std::max(r_max, v);
  const double threshold = eps_max * r_max;
  const int limit = t_end - guard;
  for (const auto& [s, v] : reward_curve.points) {
    if (s > limit) break;
    if (v >= threshold) return s;
  }
  return std::nullopt;
}

EfficiencyMetrics efficiency_metrics(const Curve& metric_curve,
                                     std::optional<int> t_sat,
                                     const Curve* companion) {
  metric_curve.validate();
  EfficiencyMetrics out;
  if (!t_sat) return out;  // undefined, not zero

  const int sat_logged = metric_curve.nearest_step(*t_sat);
  const double m_sat = metric_curve.at_nearest(sat_logged);
  const double m_init = metric_curve.at_nearest(0);
  out.delta_sat = m_sat - m_init;

  double post_max = m_sat;
  for (const auto& [s, v] : metric_curve.points) {
    if (s >= sat_logged) post_max = std::max(post_max, v);
  }
  out.delta_post = post_max - m_sat;

  if (companion != nullptr) {
    out.g_sat = companion->at_nearest(*t_sat) - m_sat;
  }
  return out;
}

namespace {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return r;
}

}  // namespace

double pass_at_k_unbiased(int c, int n, int k) {
  if (n < 1 || k < 1 || k > n) throw InputError("need 1 <= k <= n");
  if (c < 0 || c > n) throw InputError("need 0 <= c <= n");
  if (n - c < k) return 1.0;
  return 1.0 - binomial(n - c, k) / binomial(n, k);
}

double pass_at_k_direct(std::span<const bool> flags, int k) {
  if (k < 1 || k > static_cast<int>(flags.size())) {
    throw InputError("k out of range");
  }
  for (int i = 0; i < k; ++i) {
    if (flags[static_cast<std::size_t>(i)]) return 1.0;
  }
  return 0.0;
}

EvalMetrics eval_metrics(std::span<const bool> correct_flags,
                         std::span<const int> ks) {
  if (correct_flags.size() != 16) {
    throw InputError("eval_metrics expects exactly 16 samples per problem");
  }
  int c = 0;
  for (bool f : correct_flags) c += f ? 1 : 0;
  EvalMetrics out;
  out.avg16 = static_cast<double>(c) / 16.0;
  for (int k : ks) out.pass_at[k] = pass_at_k_unbiased(c, 16, k);
  return out;
}

double cohen_kappa(std::span<const int> labels_a,
                   std::span<const int> labels_b) {
  if (labels_a.size() != labels_b.size() || labels_a.empty()) {
    throw InputError("label sequences must have equal nonzero length");
  }
  const double n = static_cast<double>(labels_a.size());
  std::map<int, double> freq_a;
  std::map<int, double> freq_b;
  double agree = 0.0;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    freq_a[labels_a[i]] += 1.0;
    freq_b[labels_b[i]] += 1.0;
    if (labels_a[i] == labels_b[i]) agree += 1.0;
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [label, ca] : freq_a) {
    const auto it = freq_b.find(label);
    if (it != freq_b.end()) p_e += (ca / n) * (it->second / n);
  }
  if (p_e >= 1.0) return 1.0;  // both raters constant and equal
  return (p_o - p_e) / (1.0 - p_e);
}

std::vector<Curve> curves_from_log(const RunLog& log) {
  std::vector<Curve> curves;
  if (!log.steps.empty()) {
    Curve reward;
    reward.run_id = log.run_id;
    reward.metric = "train_reward";
    reward.n = log.n_prompts;
    for (const auto& s : log.steps) reward.points.emplace_back(s.step, s.mean_reward);
    curves.push_back(std::move(reward));
  }
  std::map<std::string, Curve> by_metric;
  for (const auto& e : log.evals) {
    auto& c = by_metric[e.metric];
    if (c.points.empty()) {
      c.run_id = log.run_id;
      c.metric = e.metric;
      c.n = log.n_prompts;
    }
    c.points.emplace_back(e.step, e.value);
  }
  for (auto& [name, c] : by_metric) curves.push_back(std::move(c));
  for (const auto& c : curves) c.validate();
  return curves;
}

std::vector<Curve> ingest(std::span<const std::string> paths) {
  std::vector<Curve> all;
  for (const auto& path : paths) {
    auto curves = curves_from_log(RunLog::load(path));
    all.insert(all.end(), std::make_move_iterator(curves.begin()),
               std::make_move_iterator(curves.end()));
  }
  return all;
}

namespace {

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << *v;
  return os.str();
}

}  // namespace

void write_report_csv(std::span<const ReportRow> rows,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  out << "run_id,metric,t_sat,delta_sat,delta_post,g_sat\n";
  for (const auto& row : rows) {
    out << row.run_id << "," << row.metric << ","
        << (row.t_sat ? std::to_string(*row.t_sat) : std::string()) << ","
        << cell(row.metrics.delta_sat) << "," << cell(row.metrics.delta_post)
        << "," << cell(row.metrics.g_sat) << "\n";
  }
}

void write_curve_svg(std::span<const Curve> curves, std::optional<int> t_sat,
                     const std::string& path) {
  if (curves.empty()) throw InputError("no curves to plot");
  const int width = 720;
  const int height = 400;
  const int margin = 50;

  int min_step = std::numeric_limits<int>::max();
  int max_step = std::numeric_limits<int>::min();
  double min_v = std::numeric_limits<double>::infinity();
  double max_v = -std::numeric_limits<double>::infinity();
  for (const auto& c : curves) {
    c.validate();
    for (const auto& [s, v] : c.points) {
      min_step = std::min(min_step, s);
      max_step = std::max(max_step, s);
      min_v = std::min(min_v, v);
      max_v = std::max(max_v, v);
    }
  }
  if (max_step == min_step) max_step = min_step + 1;
  if (max_v == min_v) max_v = min_v + 1.0;

  auto sx = [&](double s) {
    return margin + (s - min_step) / (max_step - min_step) *
                        (width - 2 * margin);
  };
  auto sy = [&](double v) {
    return height - margin -
           (v - min_v) / (max_v - min_v) * (height - 2 * margin);
  };

  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b"};
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin
      << "\" x2=\"" << width - margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\""
      << margin << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";

  int ci = 0;
  for (const auto& c : curves) {
    out << "<polyline fill=\"none\" stroke=\"" << kColors[ci % 6]
        << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [s, v] : c.points) {
      out << sx(s) << "," << sy(v) << " ";
    }
    out << "\"/>\n";
    out << "<text x=\"" << width - margin + 4 << "\" y=\""
        << margin + 14 * ci << "\" font-size=\"10\" fill=\"" << kColors[ci % 6]
        << "\">" << c.metric << "</text>\n";
    ++ci;
  }
  if (t_sat) {
    out << "<line x1=\"" << sx(*t_sat) << "\" y1=\"" << margin << "\" x2=\""
        << sx(*t_sat) << "\" y2=\"" << height - margin
        << "\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>\n";
    out << "<text x=\"" << sx(*t_sat) + 3 << "\" y=\"" << margin + 12
        << "\" font-size=\"10\" fill=\"gray\">t_sat=" << *t_sat
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace rlvr
