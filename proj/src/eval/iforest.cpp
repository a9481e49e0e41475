#include "adsbae/eval/iforest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "adsbae/error.hpp"

namespace adsbae::eval {

namespace {

constexpr double kEulerGamma = 0.5772156649015329;

struct Pending {
  std::int32_t node;
  std::size_t begin, end;
  std::size_t depth;
};

}  // namespace

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n - 1);
  return 2.0 * (std::log(m) + kEulerGamma) - 2.0 * m / static_cast<double>(n);
}

void IsolationForest::fit(const std::vector<std::vector<double>>& data, const IForestConfig& config) {
  if (data.empty()) throw EmptyInputError("isolation forest: no training data");
  if (config.trees == 0 || config.subsample == 0) throw ContractError("isolation forest: trees and subsample must be >= 1");
  dims_ = data.front().size();
  for (const auto& row : data) {
    if (row.size() != dims_) throw ContractError("isolation forest: rows differ in length");
  }
  psi_ = std::min(config.subsample, data.size());
  const auto depth_limit = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(psi_, 2)))));
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick_dim(0, dims_ == 0 ? 0 : dims_ - 1);

  std::vector<std::size_t> pool(data.size());
  trees_.assign(config.trees, {});
  for (auto& tree : trees_) {
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < psi_; ++i) {
      std::uniform_int_distribution<std::size_t> u(i, pool.size() - 1);
      std::swap(pool[i], pool[u(rng)]);
    }
    std::vector<std::size_t> idx(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(psi_));

    tree.push_back({});
    std::vector<Pending> stack{{0, 0, idx.size(), 0}};
    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      const std::size_t size = job.end - job.begin;
      tree[static_cast<std::size_t>(job.node)].size = size;
      if (job.depth >= depth_limit || size <= 1 || dims_ == 0) continue;

      auto range_of = [&](std::size_t f) {
        double lo = data[idx[job.begin]][f], hi = lo;
        for (std::size_t i = job.begin + 1; i < job.end; ++i) {
          lo = std::min(lo, data[idx[i]][f]);
          hi = std::max(hi, data[idx[i]][f]);
        }
        return std::pair{lo, hi};
      };
      std::size_t feature = pick_dim(rng);
      auto [lo, hi] = range_of(feature);
      if (!(hi > lo)) {
        std::vector<std::size_t> varying;
        for (std::size_t f = 0; f < dims_; ++f) {
          const auto [a, b] = range_of(f);
          if (b > a) varying.push_back(f);
        }
        if (varying.empty()) continue;
        std::uniform_int_distribution<std::size_t> pv(0, varying.size() - 1);
        feature = varying[pv(rng)];
        std::tie(lo, hi) = range_of(feature);
      }
      const double split = std::uniform_real_distribution<double>(lo, hi)(rng);
      const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                      idx.begin() + static_cast<std::ptrdiff_t>(job.end),
                                      [&](std::size_t i) { return data[i][feature] < split; });
      const auto split_at = static_cast<std::size_t>(mid - idx.begin());
      const auto left = static_cast<std::int32_t>(tree.size());
      tree.push_back({});
      tree.push_back({});
      auto& node = tree[static_cast<std::size_t>(job.node)];
      node.feature = static_cast<std::int32_t>(feature);
      node.split = split;
      node.left = left;
      node.right = left + 1;
      stack.push_back({left + 1, split_at, job.end, job.depth + 1});
      stack.push_back({left, job.begin, split_at, job.depth + 1});
    }
  }
}

IsolationForest IsolationForest::from_parts(std::vector<Tree> trees, std::size_t sample_size, std::size_t dims) {
  for (const auto& tree : trees) {
    if (tree.empty()) throw ContractError("isolation forest: empty tree");
    const auto size = static_cast<std::int32_t>(tree.size());
    for (std::int32_t i = 0; i < size; ++i) {
      const auto& n = tree[static_cast<std::size_t>(i)];
      if (n.feature < 0) continue;
      if (static_cast<std::size_t>(n.feature) >= dims || n.left <= i || n.right <= i || n.left >= size ||
          n.right >= size) {
        throw ContractError("isolation forest: malformed tree node");
      }
    }
  }
  IsolationForest forest;
  forest.trees_ = std::move(trees);
  forest.psi_ = sample_size;
  forest.dims_ = dims;
  return forest;
}

double IsolationForest::expected_path_length(std::span<const double> x) const {
  if (trees_.empty()) throw ContractError("isolation forest is not fitted");
  if (x.size() != dims_) throw ContractError("isolation forest: input has the wrong length");
  double total = 0.0;
  for (const auto& tree : trees_) {
    std::size_t at = 0;
    double depth = 0.0;
    while (tree[at].feature >= 0) {
      const auto& n = tree[at];
      at = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.split ? n.left : n.right);
      depth += 1.0;
    }
    total += depth + average_path_length(tree[at].size);
  }
  return total / static_cast<double>(trees_.size());
}

double IsolationForest::score(std::span<const double> x) const {
  const double h = expected_path_length(x);
  const double c = average_path_length(psi_);
  if (c == 0.0) return 0.5;
  return std::exp2(-h / c);
}

std::vector<double> IsolationForest::scores(const std::vector<std::vector<double>>& data) const {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& row : data) out.push_back(score(row));
  return out;
}

std::vector<std::vector<double>> flatten(std::span<const dataset::FeatureWindow> windows) {
  std::vector<std::vector<double>> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(w.values);
  return out;
}

IsolationForest train_iforest(std::span<const dataset::FeatureWindow> standardized_training,
                              const IForestConfig& config) {
  IsolationForest forest;
  const auto data = flatten(standardized_training);
  forest.fit(data, config);
  forest.threshold = dae::three_sigma_threshold(forest.scores(data));
  return forest;
}

std::vector<dae::AnomalyVerdict> iforest_detect(const IsolationForest& forest,
                                                std::span<const dataset::FeatureWindow> standardized) {
  std::vector<dae::AnomalyVerdict> out(standardized.size());
  for (std::size_t i = 0; i < standardized.size(); ++i) {
    const auto& w = standardized[i];
    auto& v = out[i];
    v.flight_id = w.flight_id;
    v.start_timestamp = w.start_timestamp;
    v.window_index = i;
    v.phase = w.phase;
    v.score = forest.score(w.values);
    v.threshold = forest.threshold;
    v.flagged = v.score > v.threshold;
    v.label = w.label;
  }
  return out;
}

}  // namespace adsbae::eval
