#pragma once

// Shared builders and oracles for the unit suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "ltvrec/estimators.hpp"
#include "ltvrec/policies.hpp"
#include "ltvrec/rng.hpp"
#include "ltvrec/simulator.hpp"
#include "ltvrec/state_builder.hpp"

namespace testutil {

using ltvrec::Mat;
using ltvrec::Vec;

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ltvrec_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline Vec one_hot(int dim, int at) {
  Vec v = Vec::Zero(dim);
  v(at) = 1.0;
  return v;
}

// Expected-model transition batch over one-hot state features: each
// (s, a, s') combination becomes one row weighted pi(a|s) P(s'|s,a) through
// the importance-weight slot, so the accumulated normal equations equal the
// exact I - gamma P_pi system.
inline ltvrec::TransitionBatch expected_model_batch(const ltvrec::TabularMDP& mdp,
                                                    const Mat& policy) {
  ltvrec::TransitionBatch batch;
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double weight = policy(s, a) * mdp.p[static_cast<std::size_t>(a)](s, s2);
        if (weight <= 0.0) continue;
        ltvrec::TransitionRow row;
        row.phi = one_hot(mdp.n_states, s);
        row.phi_next = one_hot(mdp.n_states, s2);
        row.reward = mdp.r(s, a);
        row.rho = weight;
        batch.rows.push_back(std::move(row));
      }
  return batch;
}

// Same idea with indicator joint features of dimension n_states * n_actions;
// the successor action is drawn on-policy, so LSTDQ's fixed point is Q^pi.
inline ltvrec::TransitionBatch expected_model_q_batch(const ltvrec::TabularMDP& mdp,
                                                      const Mat& policy) {
  const int d = mdp.n_states * mdp.n_actions;
  ltvrec::TransitionBatch batch;
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        for (int a2 = 0; a2 < mdp.n_actions; ++a2) {
          const double weight =
              mdp.p[static_cast<std::size_t>(a)](s, s2) * policy(s2, a2);
          if (weight <= 0.0) continue;
          ltvrec::TransitionRow row;
          row.phi = one_hot(d, s * mdp.n_actions + a);
          row.phi_next = one_hot(d, s2 * mdp.n_actions + a2);
          row.reward = mdp.r(s, a);
          row.rho = weight;
          batch.rows.push_back(std::move(row));
        }
  return batch;
}

inline Mat random_catalog(int k, int n, std::uint64_t seed) {
  ltvrec::Rng rng(seed);
  Mat v(k, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < k; ++i) v(i, j) = rng.uniform(-1.0, 1.0);
  return v;
}

inline ltvrec::TrajectoryBatch random_trajectories(int users, int k, int n_items,
                                                   std::uint64_t seed, int min_len = 2,
                                                   int max_len = 8) {
  ltvrec::Rng rng(seed);
  ltvrec::TrajectoryBatch batch;
  batch.k = k;
  batch.lambda = 0.1;
  for (int u = 0; u < users; ++u) {
    ltvrec::Trajectory traj;
    traj.user_id = "u" + std::to_string(u);
    const int len = min_len + rng.index(max_len - min_len + 1);
    for (int t = 0; t < len; ++t) {
      ltvrec::TrajStep step;
      step.state = Vec::NullaryExpr(k, [&](Eigen::Index) { return rng.normal() * 0.5; });
      step.item = rng.index(n_items);
      step.reward = rng.bernoulli(0.4) ? 1.0 : 0.0;
      step.timestamp = t;
      traj.steps.push_back(std::move(step));
    }
    batch.trajectories.push_back(std::move(traj));
  }
  return batch;
}

inline ltvrec::PolicyParams random_policy(int k, std::uint64_t seed, double scale = 0.5) {
  ltvrec::Rng rng(seed);
  ltvrec::PolicyParams p;
  p.w = Vec::NullaryExpr(ltvrec::joint_dim(k),
                         [&](Eigen::Index) { return rng.uniform(-scale, scale); });
  return p;
}

// Mean negative log-probability of the logged actions under the policy.
inline double softmax_log_loss(const ltvrec::PolicyParams& policy,
                               const ltvrec::TrajectoryBatch& trajectories,
                               const Mat& catalog) {
  double total = 0.0;
  long long steps = 0;
  for (const auto& traj : trajectories.trajectories)
    for (const auto& step : traj.steps) {
      const Vec probs = ltvrec::policy_probabilities(policy, step.state, catalog);
      total -= std::log(probs(step.item));
      ++steps;
    }
  return total / static_cast<double>(steps);
}

// Brute-force one-sided signed-rank p-value: drop zeros, midrank |d|, then
// enumerate all 2^n sign assignments. Usable up to n ~ 20.
inline double wilcoxon_bruteforce_p(const std::vector<double>& diffs) {
  std::vector<double> abs_d;
  std::vector<bool> positive;
  for (double d : diffs) {
    if (d == 0.0) continue;
    abs_d.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  const int n = static_cast<int>(abs_d.size());
  std::vector<int> order(abs_d.size());
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return abs_d[static_cast<std::size_t>(i)] < abs_d[static_cast<std::size_t>(j)]; });
  std::vector<double> rank(abs_d.size(), 0.0);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && abs_d[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] ==
                        abs_d[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])])
      ++j;
    const double mid = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (int t = i; t < j; ++t) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] = mid;
    i = j;
  }
  double observed = 0.0;
  for (int t = 0; t < n; ++t)
    if (positive[static_cast<std::size_t>(t)]) observed += rank[static_cast<std::size_t>(t)];
  long long hits = 0;
  const long long total = 1ll << n;
  for (long long mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (int t = 0; t < n; ++t)
      if (mask & (1ll << t)) w += rank[static_cast<std::size_t>(t)];
    if (w >= observed - 1e-12) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

// Value iteration to tolerance, the independent oracle for exact_value.
inline Vec value_iteration(const ltvrec::TabularMDP& mdp, const Mat& policy,
                           double tolerance = 1e-12) {
  Mat p_pi = Mat::Zero(mdp.n_states, mdp.n_states);
  Vec r_pi = Vec::Zero(mdp.n_states);
  for (int a = 0; a < mdp.n_actions; ++a) {
    p_pi += policy.col(a).asDiagonal() * mdp.p[static_cast<std::size_t>(a)];
    r_pi += policy.col(a).cwiseProduct(mdp.r.col(a));
  }
  Vec v = Vec::Zero(mdp.n_states);
  for (int iter = 0; iter < 1000000; ++iter) {
    Vec next = r_pi + mdp.gamma * (p_pi * v);
    const double delta = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    if (delta < tolerance) break;
  }
  return v;
}

}  // namespace testutil
