#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ltvrec/common.hpp"
#include "ltvrec/state_builder.hpp"

namespace ltvrec {

// One bootstrap resample: user indices drawn with replacement (size equals
// the original user count) plus a seed derived from (master seed, index) for
// any sampling the evaluator does internally.
struct Resample {
  std::vector<int> users;
  int index = 0;
  std::uint64_t seed = 0;
};

using Evaluator = std::function<double(const Resample&)>;

struct BootstrapResult {
  std::vector<double> values;
  double mean = 0.0;
  double half_width = 0.0;  // 1.96 * sd of the resample values
  int b = 0;
  std::uint64_t seed = 0;

  double lo() const { return mean - half_width; }
  double hi() const { return mean + half_width; }
};

BootstrapResult bootstrap_value(int n_users, const Evaluator& evaluator, int b,
                                std::uint64_t seed);

struct WilcoxonResult {
  double w_plus = 0.0;
  int n = 0;  // non-zero differences used
  double p = 1.0;
  bool exact = false;
};

// One-sided signed-rank test of the alternative "differences are positive".
// Exact sign-flip distribution for n <= 25, normal approximation with tie and
// continuity corrections above that.
WilcoxonResult wilcoxon_test(const std::vector<double>& differences);
double wilcoxon_one_sided(const std::vector<double>& differences);

// Both tails computed by the named method regardless of n, for diagnostics.
double wilcoxon_exact_p(const std::vector<double>& differences);
double wilcoxon_normal_p(const std::vector<double>& differences);

struct PairedComparison {
  std::vector<double> values_a;
  std::vector<double> values_b;
  WilcoxonResult test;  // alternative: B > A
};

PairedComparison compare_policies(int n_users, const Evaluator& evaluator_a,
                                  const Evaluator& evaluator_b, int b,
                                  std::uint64_t seed);

// Uniformly samples up to per_trajectory step states from each listed
// trajectory, without replacement within a trajectory.
std::vector<Vec> sample_states(const TrajectoryBatch& trajectories,
                               const std::vector<int>& users, int per_trajectory,
                               std::uint64_t seed);

std::vector<Vec> sample_states(const TrajectoryBatch& trajectories, int per_trajectory,
                               std::uint64_t seed);

}  // namespace ltvrec
