// Copyright 2026 The fedpad-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <limits>

#include "doctest.h"
#include "fedpad/error.hpp"
#include "fedpad/metrics.hpp"
#include "metric_oracles.hpp"

using namespace fedpad;
using metrics::ScoreSet;

namespace {

ScoreSet make(std::initializer_list<std::pair<double, int>> items) {
  ScoreSet s;
  for (const auto& [score, label] : items) s.items.push_back({score, label});
  return s;
}

std::size_t min_class(const ScoreSet& s) { return std::min(s.count(0), s.count(1)); }

}  // namespace

TEST_CASE("auc examples") {
  CHECK(metrics::roc_auc(make({{0.9, 1}, {0.9, 1}, {0.1, 0}, {0.1, 0}})).auc == 1.0);
  CHECK(metrics::roc_auc(make({{0.4, 1}, {0.4, 0}, {0.4, 1}, {0.4, 0}})).auc == 0.5);
  CHECK(metrics::roc_auc(make({{0.8, 1}, {0.6, 0}, {0.7, 1}, {0.4, 0}})).auc == 1.0);
  CHECK(metrics::roc_auc(make({{0.1, 1}, {0.9, 0}})).auc == 0.0);
}

TEST_CASE("eer examples") {
  const auto perfect = metrics::eer(make({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}}));
  CHECK(perfect.eer == 0.0);
  CHECK(metrics::eer(make({{0.3, 1}, {0.7, 1}, {0.3, 0}, {0.7, 0}})).eer == 0.5);
  CHECK(metrics::eer(make({{0.9, 1}, {0.2, 1}, {0.8, 0}, {0.1, 0}})).eer == 0.5);
}

TEST_CASE("hter examples") {
  const ScoreSet s = make({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}});
  CHECK(metrics::hter(s, s) == 0.0);
  const ScoreSet constant = make({{0.5, 1}, {0.5, 0}, {0.5, 1}});
  CHECK(metrics::far_at(constant, 0.5) == 0.0);
  CHECK(metrics::frr_at(constant, 0.5) == 1.0);
  CHECK(metrics::hter_at(constant, 0.5) == 0.5);
}

TEST_CASE("metrics reject undefined inputs") {
  CHECK_THROWS_AS(metrics::roc_auc(make({{0.5, 1}, {0.6, 1}})), MetricUndefinedError);
  CHECK_THROWS_AS(metrics::eer(make({{0.5, 0}})), MetricUndefinedError);
  CHECK_THROWS_AS(metrics::roc_auc(make({{0.5, 1}, {0.6, 2}})), LabelError);
  CHECK_THROWS_AS(metrics::roc_auc(make({{std::nan(""), 1}, {0.6, 0}})), NumericError);
  CHECK_THROWS_AS(ScoreSet::from(Tensor({3}), Tensor({2}), metrics::ScoreSource::kUser),
                  DimensionError);
  CHECK_THROWS_AS(ScoreSet::from(Tensor({1}), Tensor({1}, 0.5), metrics::ScoreSource::kUser),
                  LabelError);
}

TEST_CASE("auc equals pair counting exactly") {
  Rng rng(404, 0);
  for (std::size_t i = 0; i < 200; ++i) {
    const ScoreSet s = testing::random_score_set(rng, 1000, i);
    CAPTURE(i);
    CHECK(metrics::roc_auc(s).auc == testing::brute_auc(s));
  }
}

TEST_CASE("auc is invariant under strictly monotone transforms") {
  Rng rng(405, 0);
  for (std::size_t i = 0; i < 30; ++i) {
    ScoreSet s = testing::random_score_set(rng, 300, i);
    const double base = metrics::roc_auc(s).auc;
    for (auto& it : s.items) it.score = std::exp(3.0 * it.score) - 7.0;
    CHECK(metrics::roc_auc(s).auc == base);
  }
}

TEST_CASE("eer matches an exhaustive sweep") {
  Rng rng(406, 0);
  for (std::size_t i = 0; i < 200; ++i) {
    const ScoreSet s = testing::random_score_set(rng, 1000, i);
    CAPTURE(i);
    const double tol = std::max(1.0 / (2.0 * static_cast<double>(min_class(s))),
                                testing::tie_bounds(s).eer);
    CHECK(std::abs(metrics::eer(s).eer - testing::sweep_eer(s)) <= tol + 1e-12);
  }
}

TEST_CASE("without ties the eer equals the best sweep point") {
  Rng rng(409, 0);
  for (std::size_t i = 1; i < 60; i += 3) {
    const ScoreSet s = testing::random_score_set(rng, 600, i);
    CHECK(testing::tie_bounds(s).eer == 0.0);
    CHECK(metrics::eer(s).eer == doctest::Approx(testing::sweep_eer(s)).epsilon(1e-12));
  }
}

TEST_CASE("hter on the dev set itself equals its eer") {
  Rng rng(407, 0);
  for (std::size_t i = 0; i < 100; ++i) {
    const ScoreSet s = testing::random_score_set(rng, 500, i + 1);
    const double tol = std::max(1.0 / (2.0 * static_cast<double>(min_class(s))),
                                testing::tie_bounds(s).hter);
    CHECK(std::abs(metrics::hter(s, s) - metrics::eer(s).eer) <= tol + 1e-12);
  }
}

TEST_CASE("roc starts at the origin, ends at one and never decreases") {
  Rng rng(408, 0);
  for (std::size_t i = 0; i < 50; ++i) {
    const ScoreSet s = testing::random_score_set(rng, 200, i);
    const auto roc = metrics::roc_auc(s);
    REQUIRE(roc.points.size() >= 2);
    CHECK(roc.points.front().fpr == 0.0);
    CHECK(roc.points.front().tpr == 0.0);
    CHECK(roc.points.back().fpr == 1.0);
    CHECK(roc.points.back().tpr == 1.0);
    for (std::size_t k = 1; k < roc.points.size(); ++k) {
      CHECK(roc.points[k].fpr >= roc.points[k - 1].fpr);
      CHECK(roc.points[k].tpr >= roc.points[k - 1].tpr);
      CHECK(roc.points[k].threshold < roc.points[k - 1].threshold);
      // Each point is the operating point of its own threshold.
      CHECK(roc.points[k].fpr == metrics::far_at(s, roc.points[k].threshold));
      CHECK(1.0 - roc.points[k].tpr == doctest::Approx(metrics::frr_at(s, roc.points[k].threshold)));
    }
    CHECK((roc.auc >= 0.0 && roc.auc <= 1.0));
  }
}

TEST_CASE("eer threshold reproduces the eer operating point") {
  // No ties: the interpolated threshold lands between two distinct scores.
  const ScoreSet s = make({{0.1, 0}, {0.3, 1}, {0.35, 0}, {0.6, 1}, {0.7, 0}, {0.9, 1}});
  const auto e = metrics::eer(s);
  CHECK((e.eer >= 0.0 && e.eer <= 1.0));
  const double far = metrics::far_at(s, e.threshold), frr = metrics::frr_at(s, e.threshold);
  CHECK(std::abs(0.5 * (far + frr) - e.eer) <= 1.0 / 6.0);
}

TEST_CASE("evaluate uses the dev threshold for hter") {
  const ScoreSet dev = make({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}});
  const ScoreSet user = make({{0.4, 1}, {0.3, 1}, {0.6, 0}, {0.05, 0}});
  const auto r = metrics::evaluate(user, dev);
  CHECK(r.threshold_used == metrics::eer(dev).threshold);
  CHECK(r.hter == metrics::hter_at(user, r.threshold_used));
  CHECK(r.auc == metrics::roc_auc(user).auc);
  CHECK(r.eer == metrics::eer(user).eer);
  CHECK(r == metrics::evaluate(user, dev));
}

TEST_CASE("csv writers use shortest round-trip numbers") {
  CHECK(metrics::format_number(0.1) == "0.1");
  CHECK(metrics::format_number(1.0) == "1");
  CHECK(std::stod(metrics::format_number(1.0 / 3.0)) == 1.0 / 3.0);
  metrics::EvalReport r;
  r.hter = 0.25;
  r.eer = 0.125;
  r.auc = 0.9;
  r.threshold_used = 0.5;
  CHECK(metrics::report_csv(r) == "metric,value\nhter,0.25\neer,0.125\nauc,0.9\nthreshold_used,0.5\n");
  CHECK(metrics::roc_csv({{0, 0, 0.9}, {1, 1, 0.1}}) == "fpr,tpr,threshold\n0,0,0.9\n1,1,0.1\n");
}
