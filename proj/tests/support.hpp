#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "adsbae/nn/layers.hpp"

namespace testsupport {

struct GradCheckResult {
  double worst_relative = 0.0;
  std::string worst_name;
  long checked = 0;
  long failures = 0;
};

// Central differences against the gradients already stored in `params`.
// An entry passes when its relative error is within `rel_tol`, or when both
// values sit below `abs_floor` (round-off dominates there).
inline GradCheckResult check_gradients(const adsbae::nn::ParameterList& params, const std::function<double()>& loss,
                                       double eps = 1e-5, double rel_tol = 1e-4, double abs_floor = 1e-8) {
  GradCheckResult r;
  for (auto* p : params) {
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      const double saved = p->value.data()[k];
      p->value.data()[k] = saved + eps;
      const double up = loss();
      p->value.data()[k] = saved - eps;
      const double down = loss();
      p->value.data()[k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad.data()[k];
      const double diff = std::abs(numeric - analytic);
      const double scale = std::max(std::abs(numeric), std::abs(analytic));
      const double rel = scale > 0.0 ? diff / scale : 0.0;
      ++r.checked;
      if (diff > abs_floor && rel > rel_tol) {
        ++r.failures;
        if (rel > r.worst_relative) {
          r.worst_relative = rel;
          r.worst_name = p->name + "[" + std::to_string(k) + "]";
        }
      }
    }
  }
  return r;
}

inline adsbae::nn::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  adsbae::nn::Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("adsbae-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
