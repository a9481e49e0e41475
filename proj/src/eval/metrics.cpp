#include "adsbae/eval/metrics.hpp"

#include <limits>

namespace adsbae::eval {

namespace {

double ratio(std::uint64_t num, std::uint64_t den, double if_zero) {
  return den == 0 ? if_zero : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Metrics compute_metrics(const Contingency& c) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  Metrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total(), nan);
  m.recall = ratio(c.tp, c.tp + c.fn, nan);
  m.fpr = ratio(c.fp, c.fp + c.tn, 0.0);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, 0.0);
  return m;
}

Contingency tally(std::span<const dae::AnomalyVerdict> verdicts) {
  Contingency c;
  for (const auto& v : verdicts) {
    const bool positive = v.label != 0;
    if (v.flagged) {
      ++(positive ? c.tp : c.fp);
    } else {
      ++(positive ? c.fn : c.tn);
    }
  }
  return c;
}

}  // namespace adsbae::eval
