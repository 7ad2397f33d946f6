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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "rlvr/analytics.hpp"
#include "rlvr/errors.hpp"
#include "rlvr/rng.hpp"

using namespace rlvr;

namespace {

Curve make_curve(std::vector<std::pair<int, double>> pts) {
  Curve c;
  c.run_id = "r";
  c.metric = "m";
  c.points = std::move(pts);
  return c;
}

// Linear ramp saturating at 1: r(t) = min(1, t / ramp), t = 1..T.
Curve ramp_curve(int T, double ramp) {
  std::vector<std::pair<int, double>> pts;
  for (int t = 1; t <= T; ++t) {
    pts.emplace_back(t, std::min(1.0, static_cast<double>(t) / ramp));
  }
  return make_curve(std::move(pts));
}

// Brute-force oracle straight from the definition.
std::optional<int> saturation_oracle(const Curve& c, double eps_max,
                                     int guard) {
  double r_max = -1e300;
  for (const auto& [s, v] : c.points) r_max = std::max(r_max, v);
  for (const auto& [s, v] : c.points) {
    if (s > c.points.back().first - guard) break;
    if (v >= eps_max * r_max) return s;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("curve validation rejects disorder and non-finite values") {
  CHECK_NOTHROW(make_curve({{0, 1.0}, {5, 2.0}}).validate());
  CHECK_THROWS_AS(make_curve({}).validate(), InputError);
  CHECK_THROWS_AS(make_curve({{0, 1.0}, {0, 2.0}}).validate(), InputError);
  CHECK_THROWS_AS(make_curve({{5, 1.0}, {3, 2.0}}).validate(), InputError);
  CHECK_THROWS_AS(make_curve({{0, std::nan("")}}).validate(), InputError);
}

TEST_CASE("nearest logged step favors the earlier step on ties") {
  const Curve c = make_curve({{0, 1.0}, {10, 2.0}, {20, 3.0}});
  CHECK(c.nearest_step(0) == 0);
  CHECK(c.nearest_step(4) == 0);
  CHECK(c.nearest_step(5) == 0);   // tie between 0 and 10
  CHECK(c.nearest_step(6) == 10);
  CHECK(c.nearest_step(15) == 10); // tie between 10 and 20
  CHECK(c.nearest_step(99) == 20);
  CHECK(c.at_nearest(15) == 2.0);
}

TEST_CASE("saturation step on the reference ramp fixture") {
  // r(t) = min(1, t/305) over 496 steps: 301/305 < 0.99 <= 302/305, and 302
  // is inside the 50-step guard window, so t_sat = 302.
  const Curve c = ramp_curve(496, 305.0);
  const auto t_sat = saturation_step(c);
  REQUIRE(t_sat.has_value());
  CHECK(*t_sat == 302);
}

TEST_CASE("late saturation inside the guard window is rejected") {
  // Ramp reaching 0.99 * max only after T - 50.
  std::vector<std::pair<int, double>> pts;
  for (int t = 1; t <= 200; ++t) {
    pts.emplace_back(t, t < 160 ? 0.1 : 1.0);
  }
  const auto t_sat = saturation_step(make_curve(std::move(pts)));
  CHECK(!t_sat.has_value());
}

TEST_CASE("a flat curve saturates at its first step") {
  std::vector<std::pair<int, double>> pts;
  for (int t = 1; t <= 100; ++t) pts.emplace_back(t, 0.5);
  CHECK(saturation_step(make_curve(std::move(pts))) == 1);
}

TEST_CASE("saturation matches a brute-force oracle on random curves") {
  RngStream rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<int, double>> pts;
    const int T = 60 + static_cast<int>(rng.below(200));
    double v = rng.uniform();
    for (int t = 1; t <= T; ++t) {
      v = std::clamp(v + (rng.uniform() - 0.45) * 0.1, 0.0, 1.0);
      pts.emplace_back(t, v);
    }
    const Curve c = make_curve(std::move(pts));
    CHECK(saturation_step(c) == saturation_oracle(c, 0.99, 50));
    CHECK(saturation_step(c, 0.9, 10) == saturation_oracle(c, 0.9, 10));
  }
}

TEST_CASE("saturation rejects curves shorter than the guard window") {
  std::vector<std::pair<int, double>> pts;
  for (int t = 1; t <= 50; ++t) pts.emplace_back(t, 0.5);
  CHECK_THROWS_AS(saturation_step(make_curve(std::move(pts))), InputError);
}

TEST_CASE("efficiency metrics reproduce the reference fixture") {
  // Benchmark curve logged sparsely with the saturation step present:
  // M(0) = 41.0, M(302) = 70.7, post-saturation max 72.2.
  const Curve metric = make_curve(
      {{0, 41.0}, {100, 55.0}, {302, 70.7}, {400, 72.2}, {496, 71.0}});
  const EfficiencyMetrics em = efficiency_metrics(metric, 302);
  REQUIRE(em.delta_sat.has_value());
  REQUIRE(em.delta_post.has_value());
  CHECK(*em.delta_sat == doctest::Approx(29.7));
  CHECK(*em.delta_post == doctest::Approx(1.5));
  CHECK(!em.g_sat.has_value());
}

TEST_CASE("efficiency metrics read the nearest logged step") {
  const Curve metric = make_curve({{0, 10.0}, {300, 50.0}, {400, 60.0}});
  // t_sat = 310 is nearest to logged step 300.
  const EfficiencyMetrics em = efficiency_metrics(metric, 310);
  CHECK(*em.delta_sat == doctest::Approx(40.0));
  CHECK(*em.delta_post == doctest::Approx(10.0));
}

TEST_CASE("generalization gap reads the companion curve at t_sat") {
  const Curve mine = make_curve({{0, 10.0}, {300, 50.0}});
  const Curve other = make_curve({{0, 12.0}, {290, 57.5}});
  const EfficiencyMetrics em = efficiency_metrics(mine, 300, &other);
  REQUIRE(em.g_sat.has_value());
  CHECK(*em.g_sat == doctest::Approx(7.5));
}

TEST_CASE("absent saturation leaves every efficiency metric undefined") {
  const Curve metric = make_curve({{0, 10.0}, {300, 50.0}});
  const Curve other = make_curve({{0, 12.0}, {300, 57.5}});
  const EfficiencyMetrics em =
      efficiency_metrics(metric, std::nullopt, &other);
  CHECK(!em.delta_sat.has_value());
  CHECK(!em.delta_post.has_value());
  CHECK(!em.g_sat.has_value());
}

TEST_CASE("unbiased pass@k matches exhaustive subset enumeration") {
  // All 16-bit masks with popcount k; fraction containing a correct sample.
  for (const int c : {0, 1, 3, 8, 15, 16}) {
    for (const int k : {1, 2, 4, 8, 16}) {
      int subsets = 0;
      int hits = 0;
      for (unsigned mask = 0; mask < (1u << 16); ++mask) {
        if (__builtin_popcount(mask) != k) continue;
        ++subsets;
        // Correct samples occupy the low c positions; any overlap is a hit.
        if ((mask & ((1u << c) - 1u)) != 0u) ++hits;
      }
      const double want = static_cast<double>(hits) / subsets;
      CHECK(pass_at_k_unbiased(c, 16, k) ==
            doctest::Approx(want).epsilon(1e-12));
    }
  }
  CHECK(pass_at_k_unbiased(16, 16, 1) == 1.0);
  CHECK(pass_at_k_unbiased(0, 16, 16) == 0.0);
  CHECK_THROWS_AS(pass_at_k_unbiased(1, 16, 0), InputError);
  CHECK_THROWS_AS(pass_at_k_unbiased(1, 16, 17), InputError);
  CHECK_THROWS_AS(pass_at_k_unbiased(-1, 16, 4), InputError);
}

TEST_CASE("direct pass@k inspects only the first k samples") {
  const std::array<bool, 4> flags = {false, false, true, false};
  CHECK(pass_at_k_direct(flags, 1) == 0.0);
  CHECK(pass_at_k_direct(flags, 2) == 0.0);
  CHECK(pass_at_k_direct(flags, 3) == 1.0);
  CHECK(pass_at_k_direct(flags, 4) == 1.0);
  CHECK_THROWS_AS(pass_at_k_direct(flags, 5), InputError);
  CHECK_THROWS_AS(pass_at_k_direct(flags, 0), InputError);
}

TEST_CASE("eval metrics demand exactly 16 samples") {
  std::array<bool, 16> flags{};
  flags[0] = flags[1] = flags[2] = flags[3] = true;
  const std::vector<int> ks = {1, 4, 16};
  const EvalMetrics em = eval_metrics(flags, ks);
  CHECK(em.avg16 == doctest::Approx(0.25));
  CHECK(em.pass_at.at(1) == doctest::Approx(0.25));
  CHECK(em.pass_at.at(16) == 1.0);
  CHECK(em.pass_at.at(4) ==
        doctest::Approx(pass_at_k_unbiased(4, 16, 4)));

  std::array<bool, 8> wrong{};
  CHECK_THROWS_AS(eval_metrics(wrong, ks), InputError);
}

TEST_CASE("Cohen's kappa on hand-computed confusion fixtures") {
  // p_o = 3/4, p_e = 1/2 -> kappa = 1/2.
  const std::vector<int> a = {1, 1, 0, 0};
  const std::vector<int> b = {1, 0, 0, 0};
  CHECK(cohen_kappa(a, b) == doctest::Approx(0.5));

  const std::vector<int> same = {2, 0, 1, 2, 1};
  CHECK(cohen_kappa(same, same) == 1.0);

  // Perfectly anti-aligned balanced raters: kappa = -1.
  const std::vector<int> x = {0, 1, 0, 1};
  const std::vector<int> y = {1, 0, 1, 0};
  CHECK(cohen_kappa(x, y) == doctest::Approx(-1.0));

  // Constant equal raters: chance agreement 1, defined as kappa 1.
  const std::vector<int> ones(6, 1);
  CHECK(cohen_kappa(ones, ones) == 1.0);

  // Constant but different raters: no chance overlap, kappa 0.
  const std::vector<int> zeros(6, 0);
  CHECK(cohen_kappa(ones, zeros) == doctest::Approx(0.0));

  CHECK_THROWS_AS(cohen_kappa(a, ones), InputError);
  CHECK_THROWS_AS(cohen_kappa(std::vector<int>{}, std::vector<int>{}),
                  InputError);
}

TEST_CASE("curves are reconstructed from run logs") {
  RunLog log;
  log.run_id = "abc";
  log.n_prompts = 8;
  for (int t = 1; t <= 5; ++t) {
    StepRecord s;
    s.step = t;
    s.mean_reward = 0.1 * t;
    log.steps.push_back(s);
  }
  log.evals = {{0, "avg16", 0.2}, {0, "pass@4", 0.5}, {5, "avg16", 0.6},
               {5, "pass@4", 0.9}};
  const auto curves = curves_from_log(log);
  REQUIRE(curves.size() == 3);

  const Curve* reward = nullptr;
  const Curve* avg = nullptr;
  const Curve* p4 = nullptr;
  for (const auto& c : curves) {
    if (c.metric == "train_reward") reward = &c;
    if (c.metric == "avg16") avg = &c;
    if (c.metric == "pass@4") p4 = &c;
  }
  REQUIRE(reward != nullptr);
  REQUIRE(avg != nullptr);
  REQUIRE(p4 != nullptr);
  CHECK(reward->points.size() == 5);
  CHECK(reward->n == 8);
  CHECK(reward->run_id == "abc");
  CHECK(avg->points ==
        std::vector<std::pair<int, double>>{{0, 0.2}, {5, 0.6}});
  CHECK(p4->points ==
        std::vector<std::pair<int, double>>{{0, 0.5}, {5, 0.9}});
}

TEST_CASE("ingest round-trips through a saved run log") {
  const auto path =
      std::filesystem::temp_directory_path() / "rlvr_test_runlog.jsonl";
  RunLog log;
  log.run_id = "deadbeef";
  log.n_prompts = 4;
  log.seed = 7;
  StepRecord s;
  s.step = 1;
  s.mean_reward = 0.25;
  s.per_prompt = {{0, 0.5}, {1, 0.0}};
  log.steps.push_back(s);
  log.evals.push_back({0, "avg16", 0.3});
  log.save(path.string());

  const std::vector<std::string> paths = {path.string()};
  const auto curves = ingest(paths);
  REQUIRE(curves.size() == 2);
  CHECK(curves[0].run_id == "deadbeef");
  std::filesystem::remove(path);
}

TEST_CASE("malformed run logs are rejected with the offending line") {
  const auto path =
      std::filesystem::temp_directory_path() / "rlvr_test_runlog_bad.jsonl";
  {
    std::ofstream out(path);
    out << R"({"schema":"rlvr-runlog/1","run_id":"x","n":1,"seed":0})"
        << "\n";
    out << "garbage\n";
  }
  CHECK_THROWS_WITH_AS(RunLog::load(path.string()), doctest::Contains(":2"),
                       FormatError);
  {
    std::ofstream out(path);
    out << R"({"schema":"rlvr-runlog/9"})" << "\n";
  }
  CHECK_THROWS_AS(RunLog::load(path.string()), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("report CSV leaves undefined metrics empty") {
  const auto path =
      std::filesystem::temp_directory_path() / "rlvr_test_report.csv";
  std::vector<ReportRow> rows(2);
  rows[0].run_id = "a";
  rows[0].metric = "avg16";
  rows[0].t_sat = 302;
  rows[0].metrics.delta_sat = 29.7;
  rows[0].metrics.delta_post = 1.5;
  rows[1].run_id = "b";
  rows[1].metric = "avg16";
  write_report_csv(rows, path.string());

  std::ifstream in(path);
  std::string header;
  std::string line0;
  std::string line1;
  REQUIRE(std::getline(in, header));
  REQUIRE(std::getline(in, line0));
  REQUIRE(std::getline(in, line1));
  CHECK(header == "run_id,metric,t_sat,delta_sat,delta_post,g_sat");
  CHECK(line0 == "a,avg16,302,29.7,1.5,");
  CHECK(line1 == "b,avg16,,,,");
  std::filesystem::remove(path);
}

TEST_CASE("curve SVG contains polylines and the saturation marker") {
  const auto path =
      std::filesystem::temp_directory_path() / "rlvr_test_curve.svg";
  const std::vector<Curve> curves = {ramp_curve(100, 50.0)};
  write_curve_svg(curves, 40, path.string());
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string svg = ss.str();
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  CHECK(svg.find("t_sat=40") != std::string::npos);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(write_curve_svg({}, std::nullopt, path.string()),
                  InputError);
}
