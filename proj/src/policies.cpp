#include "ltvrec/policies.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "ltvrec/rng.hpp"

namespace ltvrec {

Vec joint_features(const Vec& state, const Vec& item) {
  if (state.size() != item.size())
    throw DataError("joint_features: state and item dimensions differ");
  const int k = static_cast<int>(state.size());
  Vec phi(3 * k + 1);
  phi.head(k) = state;
  phi.segment(k, k) = item;
  phi.segment(2 * k, k) = state.cwiseProduct(item);
  phi(3 * k) = 1.0;
  return phi;
}

std::string policy_kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::behavior: return "behavior";
    case PolicyKind::target: return "target";
    case PolicyKind::myopic: return "myopic";
    case PolicyKind::mixture: return "mixture";
  }
  return "?";
}

PolicyKind parse_policy_kind(const std::string& name) {
  if (name == "behavior") return PolicyKind::behavior;
  if (name == "target") return PolicyKind::target;
  if (name == "myopic") return PolicyKind::myopic;
  if (name == "mixture") return PolicyKind::mixture;
  throw DataError("unknown policy kind '" + name + "'");
}

Vec action_scores(const Vec& w, const Vec& state, const Mat& catalog) {
  const int k = static_cast<int>(catalog.rows());
  if (w.size() != joint_dim(k))
    throw DataError("action_scores: weight dimension does not match 3k+1");
  if (state.size() != k) throw DataError("action_scores: state dimension mismatch");
  // w . phi(s, v) = w_s.s + w_c + (w_v + w_p .* s) . v
  const double base = w.head(k).dot(state) + w(3 * k);
  const Vec t = w.segment(k, k) + w.segment(2 * k, k).cwiseProduct(state);
  Vec scores = catalog.transpose() * t;
  scores.array() += base;
  return scores;
}

Vec policy_probabilities(const PolicyParams& policy, const Vec& state, const Mat& catalog) {
  if (catalog.cols() < 1) throw DataError("policy_probabilities: empty catalog");
  Vec scores = action_scores(policy.w, state, catalog);
  if (!scores.allFinite()) throw NumericError("policy_probabilities: non-finite score");
  const double mx = scores.maxCoeff();
  Vec probs = (scores.array() - mx).exp();
  probs /= probs.sum();
  return probs;
}

namespace {

double softmax_log_likelihood(const Vec& w, const TrajectoryBatch& trajectories,
                              const Mat& catalog,
                              const std::vector<std::pair<int, int>>& steps) {
  PolicyParams p;
  p.w = w;
  double ll = 0.0;
  for (const auto& [ti, si] : steps) {
    const auto& step = trajectories.trajectories[ti].steps[si];
    Vec scores = action_scores(w, step.state, catalog);
    const double mx = scores.maxCoeff();
    const double lse = mx + std::log((scores.array() - mx).exp().sum());
    ll += scores(step.item) - lse;
  }
  return ll;
}

}  // namespace

PolicyParams fit_behavior_policy(const TrajectoryBatch& trajectories, const Mat& catalog,
                                 const BehaviorFitOptions& options) {
  const int k = static_cast<int>(catalog.rows());
  const int d = joint_dim(k);

  Vec g = Vec::Zero(d);
  std::vector<std::pair<int, int>> all_steps;
  for (int ti = 0; ti < trajectories.n_users(); ++ti) {
    const auto& traj = trajectories.trajectories[ti];
    for (int si = 0; si < static_cast<int>(traj.steps.size()); ++si) {
      const auto& step = traj.steps[si];
      g += joint_features(step.state, catalog.col(step.item));
      all_steps.push_back({ti, si});
    }
  }
  if (all_steps.empty()) throw DataError("fit_behavior_policy: no steps");

  PolicyParams fit;
  fit.kind = PolicyKind::behavior;
  const double gnorm = g.norm();
  if (gnorm == 0.0) {
    std::cerr << "fit_behavior_policy: degenerate direction, returning the uniform policy\n";
    fit.w = Vec::Zero(d);
    fit.c = 0.0;
    return fit;
  }

  // The exact likelihood is evaluated on a subsample when the data is large.
  std::vector<std::pair<int, int>> steps = all_steps;
  if (static_cast<long long>(steps.size()) > options.max_steps) {
    Rng rng(derive_seed(options.seed, "behavior-likelihood"));
    for (std::size_t i = 0; i < static_cast<std::size_t>(options.max_steps); ++i) {
      const std::size_t j = i + rng.below(steps.size() - i);
      std::swap(steps[i], steps[j]);
    }
    steps.resize(static_cast<std::size_t>(options.max_steps));
  }

  double best_ll = -std::numeric_limits<double>::infinity();
  double best_c = 0.0;
  for (int gi = 0; gi < options.grid_size; ++gi) {
    const double frac = options.grid_size == 1
                            ? 0.0
                            : static_cast<double>(gi) / (options.grid_size - 1);
    const double c = options.grid_lo / gnorm *
                     std::pow(options.grid_hi / options.grid_lo, frac);
    const double ll = softmax_log_likelihood(c * g, trajectories, catalog, steps);
    if (ll > best_ll) {
      best_ll = ll;
      best_c = c;
    }
  }
  fit.w = best_c * g;
  fit.c = best_c;
  return fit;
}

PolicyParams make_target_policy(const Vec& theta_q, double alpha) {
  if (alpha <= 0.0) throw DataError("make_target_policy: alpha must be > 0");
  PolicyParams p;
  p.w = alpha * theta_q;
  p.kind = PolicyKind::target;
  p.alpha = alpha;
  return p;
}

PolicyParams mix_policies(const PolicyParams& target, const PolicyParams& behavior,
                          double beta) {
  if (beta < 0.0 || beta > 1.0) throw DataError("mix_policies: beta must be in [0, 1]");
  if (target.w.size() != behavior.w.size())
    throw DataError("mix_policies: weight dimensions differ");
  PolicyParams p;
  p.w = beta * target.w + (1.0 - beta) * behavior.w;
  p.kind = PolicyKind::mixture;
  p.alpha = target.alpha;
  p.c = behavior.c;
  p.beta = beta;
  return p;
}

int rank_of_action(const PolicyParams& policy, const Vec& state, const Mat& catalog,
                   int item_index) {
  if (item_index < 0 || item_index >= catalog.cols())
    throw DataError("rank_of_action: item outside the catalog");
  const Vec scores = action_scores(policy.w, state, catalog);
  const double s = scores(item_index);
  int rank = 1;
  for (int j = 0; j < scores.size(); ++j) {
    if (scores(j) > s || (scores(j) == s && j < item_index)) ++rank;
  }
  return rank;
}

double mean_state_kl(const PolicyParams& a, const PolicyParams& b,
                     const std::vector<Vec>& states, const Mat& catalog) {
  if (states.empty()) throw DataError("mean_state_kl: no states");
  double total = 0.0;
  for (const auto& s : states) {
    const Vec pa = policy_probabilities(a, s, catalog);
    const Vec pb = policy_probabilities(b, s, catalog);
    double kl = 0.0;
    for (int j = 0; j < pa.size(); ++j) kl += pa(j) * (std::log(pa(j)) - std::log(pb(j)));
    total += std::max(0.0, kl);
  }
  return total / static_cast<double>(states.size());
}

double choose_alpha_for_kl(const Vec& theta_q, const PolicyParams& behavior,
                           const std::vector<Vec>& states, const Mat& catalog,
                           double target_kl, double alpha_min, double alpha_max) {
  auto kl_at = [&](double alpha) {
    return mean_state_kl(make_target_policy(theta_q, alpha), behavior, states, catalog);
  };
  if (kl_at(alpha_min) > target_kl) return alpha_min;

  double lo = alpha_min;
  double hi = alpha_min;
  while (hi < alpha_max && kl_at(hi) <= target_kl) {
    lo = hi;
    hi *= 2.0;
  }
  if (hi >= alpha_max) return alpha_max;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kl_at(mid) <= target_kl ? lo : hi) = mid;
  }
  return lo;
}

double choose_beta_for_kl(const PolicyParams& target, const PolicyParams& behavior,
                          const std::vector<Vec>& states, const Mat& catalog,
                          double target_kl) {
  auto kl_at = [&](double beta) {
    return mean_state_kl(mix_policies(target, behavior, beta), behavior, states, catalog);
  };
  if (kl_at(1.0) <= target_kl) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kl_at(mid) <= target_kl ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace ltvrec
