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

#include "fedpad/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "fedpad/error.hpp"

namespace fedpad::metrics {

namespace {

struct Counts {
  std::size_t real = 0;
  std::size_t spoof = 0;
};

Counts checked_counts(const ScoreSet& s) {
  Counts c;
  for (const auto& it : s.items) {
    if (!std::isfinite(it.score)) throw NumericError("score set contains a non-finite score");
    if (it.label == 1) {
      ++c.real;
    } else if (it.label == 0) {
      ++c.spoof;
    } else {
      throw LabelError("score set label " + std::to_string(it.label) + " is not 0 or 1");
    }
  }
  if (c.real == 0 || c.spoof == 0) {
    throw MetricUndefinedError("metric needs both labels (real " + std::to_string(c.real) +
                               ", spoof " + std::to_string(c.spoof) + ")");
  }
  return c;
}

/// Distinct scores ascending with per-score label counts.
struct Level {
  double score;
  std::size_t real;
  std::size_t spoof;
};

std::vector<Level> levels(const ScoreSet& s) {
  std::vector<Scored> sorted = s.items;
  std::sort(sorted.begin(), sorted.end(),
            [](const Scored& a, const Scored& b) { return a.score < b.score; });
  std::vector<Level> out;
  for (const auto& it : sorted) {
    if (out.empty() || out.back().score != it.score) out.push_back({it.score, 0, 0});
    (it.label == 1 ? out.back().real : out.back().spoof) += 1;
  }
  return out;
}

double below(double v) { return std::nextafter(v, -std::numeric_limits<double>::infinity()); }

}  // namespace

ScoreSet ScoreSet::from(const Tensor& scores, const Tensor& labels, ScoreSource source) {
  if (scores.size() != labels.size()) {
    throw DimensionError("score set: " + std::to_string(scores.size()) + " scores but " +
                         std::to_string(labels.size()) + " labels");
  }
  ScoreSet s;
  s.source = source;
  s.items.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double y = labels[i];
    if (y != 0.0 && y != 1.0) throw LabelError("score set label is not 0 or 1");
    s.items.push_back({scores[i], static_cast<int>(y)});
  }
  return s;
}

std::size_t ScoreSet::count(int label) const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [&](const Scored& it) { return it.label == label; }));
}

RocCurve roc_auc(const ScoreSet& s) {
  const Counts c = checked_counts(s);
  const std::vector<Level> lv = levels(s);
  const double p = static_cast<double>(c.real);
  const double n = static_cast<double>(c.spoof);

  RocCurve out;
  out.points.push_back({0.0, 0.0, lv.back().score});
  std::size_t tp = 0;
  std::size_t fp = 0;
  // Twice the area in units of one (real, spoof) pair.
  std::uint64_t area2 = 0;
  for (std::size_t j = lv.size(); j-- > 0;) {
    const std::size_t tp_prev = tp;
    tp += lv[j].real;
    fp += lv[j].spoof;
    area2 += static_cast<std::uint64_t>(lv[j].spoof) * (tp_prev + tp);
    const double thr = j > 0 ? lv[j - 1].score : below(lv[0].score);
    out.points.push_back({static_cast<double>(fp) / n, static_cast<double>(tp) / p, thr});
  }
  out.auc = static_cast<double>(area2) /
            (2.0 * static_cast<double>(c.real) * static_cast<double>(c.spoof));
  return out;
}

double far_at(const ScoreSet& s, double theta) {
  const Counts c = checked_counts(s);
  std::size_t accepted = 0;
  for (const auto& it : s.items) accepted += (it.label == 0 && it.score > theta);
  return static_cast<double>(accepted) / static_cast<double>(c.spoof);
}

double frr_at(const ScoreSet& s, double theta) {
  const Counts c = checked_counts(s);
  std::size_t rejected = 0;
  for (const auto& it : s.items) rejected += (it.label == 1 && !(it.score > theta));
  return static_cast<double>(rejected) / static_cast<double>(c.real);
}

EerPoint eer(const ScoreSet& s) {
  const Counts c = checked_counts(s);
  const std::vector<Level> lv = levels(s);
  const double p = static_cast<double>(c.real);
  const double n = static_cast<double>(c.spoof);

  // Threshold 0 sits just below the lowest score (everything accepted);
  // threshold j >= 1 is the j-th distinct score ascending.
  double prev_thr = below(lv[0].score);
  double prev_far = 1.0;
  double prev_frr = 0.0;
  std::size_t spoof_accepted = c.spoof;
  std::size_t real_rejected = 0;
  for (const auto& level : lv) {
    spoof_accepted -= level.spoof;
    real_rejected += level.real;
    const double far = static_cast<double>(spoof_accepted) / n;
    const double frr = static_cast<double>(real_rejected) / p;
    if (frr >= far) {
      const double gap_prev = prev_far - prev_frr;  // > 0
      const double gap_cur = far - frr;             // <= 0
      const double t = gap_prev / (gap_prev - gap_cur);
      return {prev_far + t * (far - prev_far), prev_thr + t * (level.score - prev_thr)};
    }
    prev_thr = level.score;
    prev_far = far;
    prev_frr = frr;
  }
  // Unreachable: at the highest score FRR = 1 and FAR = 0.
  throw ContractError("eer: FAR and FRR curves never crossed");
}

double hter_at(const ScoreSet& user, double theta) {
  return 0.5 * (far_at(user, theta) + frr_at(user, theta));
}

double hter(const ScoreSet& user, const ScoreSet& dev) { return hter_at(user, eer(dev).threshold); }

bool operator==(const EvalReport& a, const EvalReport& b) {
  auto same = [](const RocPoint& x, const RocPoint& y) {
    return x.fpr == y.fpr && x.tpr == y.tpr && x.threshold == y.threshold;
  };
  return a.auc == b.auc && a.eer == b.eer && a.hter == b.hter &&
         a.threshold_used == b.threshold_used &&
         std::equal(a.roc.begin(), a.roc.end(), b.roc.begin(), b.roc.end(), same);
}

EvalReport evaluate(const ScoreSet& user, const ScoreSet& dev) {
  EvalReport r;
  RocCurve roc = roc_auc(user);
  r.roc = std::move(roc.points);
  r.auc = roc.auc;
  r.eer = eer(user).eer;
  r.threshold_used = eer(dev).threshold;
  r.hter = hter_at(user, r.threshold_used);
  return r;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "metric,value\n";
  os << "hter," << format_number(r.hter) << "\n";
  os << "eer," << format_number(r.eer) << "\n";
  os << "auc," << format_number(r.auc) << "\n";
  os << "threshold_used," << format_number(r.threshold_used) << "\n";
  return os.str();
}

std::string roc_csv(const std::vector<RocPoint>& roc) {
  std::ostringstream os;
  os << "fpr,tpr,threshold\n";
  for (const auto& pt : roc) {
    os << format_number(pt.fpr) << "," << format_number(pt.tpr) << ","
       << format_number(pt.threshold) << "\n";
  }
  return os.str();
}

}  // namespace fedpad::metrics
