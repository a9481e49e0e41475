#pragma once

#include <cstdint>
#include <span>

#include "adsbae/dae.hpp"

namespace adsbae::eval {

struct Contingency {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  Contingency& operator+=(const Contingency& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  bool operator==(const Contingency&) const = default;
};

struct Metrics {
  double accuracy = 0.0;
  double recall = 0.0;  // NaN without positives
  double fpr = 0.0;     // 0 without negatives
  double f1 = 0.0;      // 0 when 2TP + FP + FN = 0
};

/// Acc = (TP+TN)/total, R = TP/(TP+FN), FPR = FP/(FP+TN), F1 = 2TP/(2TP+FP+FN).
/// Accuracy is NaN for an empty table.
Metrics compute_metrics(const Contingency& c);

/// Counts verdicts by (flagged, label != 0).
Contingency tally(std::span<const dae::AnomalyVerdict> verdicts);

}  // namespace adsbae::eval
