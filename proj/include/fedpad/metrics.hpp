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

#ifndef FEDPAD_METRICS_HPP_
#define FEDPAD_METRICS_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "fedpad/tensor.hpp"

namespace fedpad::metrics {

// Real (label 1) is the positive class. A sample is accepted as real when
// its score is strictly greater than the threshold.

enum class ScoreSource { kDataCenterPool, kUser };

struct Scored {
  double score = 0.0;
  int label = 0;
};

struct ScoreSet {
  std::vector<Scored> items;
  ScoreSource source = ScoreSource::kUser;

  /// Pairs scores[i] with labels[i]. Throws DimensionError on length
  /// mismatch.
  static ScoreSet from(const Tensor& scores, const Tensor& labels, ScoreSource source);

  std::size_t count(int label) const;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct RocCurve {
  /// Starts at (0, 0) and ends at (1, 1); fpr and tpr never decrease.
  std::vector<RocPoint> points;
  double auc = 0.0;
};

struct EerPoint {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Sweeps the distinct scores from high to low. AUC is the trapezoid area,
/// which equals the Mann-Whitney pair statistic with ties counted 1/2.
/// Throws MetricUndefinedError unless both labels are present.
RocCurve roc_auc(const ScoreSet& s);

/// FAR (spoofs accepted) and FRR (reals rejected) at threshold `theta`.
double far_at(const ScoreSet& s, double theta);
double frr_at(const ScoreSet& s, double theta);

/// Crossing of the FAR and FRR curves, linearly interpolated between the
/// two neighbouring sweep thresholds. The returned threshold is
/// interpolated the same way.
EerPoint eer(const ScoreSet& s);

double hter_at(const ScoreSet& user, double theta);
/// HTER on `user` at the EER threshold of the pooled data-center scores.
double hter(const ScoreSet& user, const ScoreSet& dev);

struct EvalReport {
  std::vector<RocPoint> roc;
  double auc = 0.0;
  double eer = 0.0;
  double hter = 0.0;
  double threshold_used = 0.0;

  friend bool operator==(const EvalReport& a, const EvalReport& b);
};

/// ROC, AUC and EER on `user`; HTER at the EER threshold of `dev`.
EvalReport evaluate(const ScoreSet& user, const ScoreSet& dev);

/// "metric,value" with one row per scalar metric.
std::string report_csv(const EvalReport& r);
/// "fpr,tpr,threshold" per ROC point.
std::string roc_csv(const std::vector<RocPoint>& roc);

/// Shortest round-trip decimal for a double, used by every CSV writer.
std::string format_number(double v);

}  // namespace fedpad::metrics

#endif  // FEDPAD_METRICS_HPP_
