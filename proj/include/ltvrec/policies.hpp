#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltvrec/common.hpp"
#include "ltvrec/state_builder.hpp"

namespace ltvrec {

// Joint state-action features (state | item | state .* item | 1), d = 3k+1.
Vec joint_features(const Vec& state, const Vec& item);

inline int joint_dim(int k) { return 3 * k + 1; }

enum class PolicyKind { behavior, target, myopic, mixture };

std::string policy_kind_name(PolicyKind kind);
PolicyKind parse_policy_kind(const std::string& name);

// Softmax policy over the item catalog: pi(v|s) proportional to
// exp(w . phi(s, v)).
struct PolicyParams {
  Vec w;
  PolicyKind kind = PolicyKind::behavior;
  double alpha = 0.0;   // target/myopic: temperature applied to theta_Q
  double c = 0.0;       // behavior: grid-selected scale
  double beta = 1.0;    // mixture weight toward the target
};

// Scores w . phi(s, v_j) for every catalog column, O(n k) per state.
Vec action_scores(const Vec& w, const Vec& state, const Mat& catalog);

// Softmax of the scores, max-subtracted; every entry strictly positive.
Vec policy_probabilities(const PolicyParams& policy, const Vec& state, const Mat& catalog);

struct BehaviorFitOptions {
  int grid_size = 41;
  double grid_lo = 1e-4;      // times 1 / ||g||
  double grid_hi = 1e4;
  long long max_steps = 10000;  // likelihood subsample size
  std::uint64_t seed = 0;
};

PolicyParams fit_behavior_policy(const TrajectoryBatch& trajectories, const Mat& catalog,
                                 const BehaviorFitOptions& options = {});

PolicyParams make_target_policy(const Vec& theta_q, double alpha);

PolicyParams mix_policies(const PolicyParams& target, const PolicyParams& behavior,
                          double beta);

// 1-based descending rank of the logged item's score; ties go to the lower
// item index.
int rank_of_action(const PolicyParams& policy, const Vec& state, const Mat& catalog,
                   int item_index);

// Mean KL(pi_a || pi_b) over a set of states.
double mean_state_kl(const PolicyParams& a, const PolicyParams& b,
                     const std::vector<Vec>& states, const Mat& catalog);

// Largest alpha with mean KL(softmax(alpha theta) || behavior) <= target_kl,
// found by doubling then bisection. Returns alpha_min if even that overshoots.
double choose_alpha_for_kl(const Vec& theta_q, const PolicyParams& behavior,
                           const std::vector<Vec>& states, const Mat& catalog,
                           double target_kl, double alpha_min = 1e-6,
                           double alpha_max = 1e8);

// Largest beta in [0,1] whose mixture stays within target_kl of the behavior
// policy (beta = 0 is the behavior policy itself, so a solution exists).
double choose_beta_for_kl(const PolicyParams& target, const PolicyParams& behavior,
                          const std::vector<Vec>& states, const Mat& catalog,
                          double target_kl);

}  // namespace ltvrec
