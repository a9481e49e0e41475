#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "adsbae/dae.hpp"
#include "adsbae/dataset.hpp"

namespace adsbae::eval {

struct IForestConfig {
  std::size_t trees = 100;
  std::size_t subsample = 256;
  std::uint64_t seed = 0;
};

/// Average path length of an unsuccessful search in a binary search tree of
/// n points: c(n) = 2 H(n-1) - 2 (n-1) / n, with c(1) = 0 and c(2) = 1.
double average_path_length(std::size_t n);

class IsolationForest {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 for a leaf
    double split = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::size_t size = 0;  // training points reaching a leaf
  };
  using Tree = std::vector<Node>;

  IsolationForest() = default;

  /// Trees grown on subsamples without replacement, depth limit ceil(log2 psi).
  void fit(const std::vector<std::vector<double>>& data, const IForestConfig& config);

  /// Mean path length of x over the trees (leaf size corrected by c(size)).
  double expected_path_length(std::span<const double> x) const;
  /// s(x) = 2^(-E[h(x)] / c(psi)), in (0, 1).
  double score(std::span<const double> x) const;
  std::vector<double> scores(const std::vector<std::vector<double>>& data) const;

  /// Rebuilds a fitted forest from stored trees.
  static IsolationForest from_parts(std::vector<Tree> trees, std::size_t sample_size, std::size_t dims);

  std::size_t sample_size() const { return psi_; }
  std::size_t dims() const { return dims_; }
  const std::vector<Tree>& trees() const { return trees_; }

  /// mean + 3 sigma of the training scores; set by the caller.
  double threshold = 0.0;

 private:
  std::vector<Tree> trees_;
  std::size_t psi_ = 0;
  std::size_t dims_ = 0;
};

/// Windows as 30 x 5 = 150-element vectors (row-major).
std::vector<std::vector<double>> flatten(std::span<const dataset::FeatureWindow> windows);

/// Fits the forest on standardized training windows and sets its threshold.
IsolationForest train_iforest(std::span<const dataset::FeatureWindow> standardized_training,
                              const IForestConfig& config);

/// Verdicts for standardized windows (flagged when score > threshold).
std::vector<dae::AnomalyVerdict> iforest_detect(const IsolationForest& forest,
                                                std::span<const dataset::FeatureWindow> standardized);

}  // namespace adsbae::eval
