#pragma once

#include <cstdint>
#include <vector>

#include "ltvrec/common.hpp"
#include "ltvrec/ingest.hpp"
#include "ltvrec/policies.hpp"
#include "ltvrec/state_builder.hpp"

namespace ltvrec {

struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Mat> p;  // one n_states x n_states row-stochastic matrix per action
  Mat r;               // n_states x n_actions
  Vec nu;              // initial state distribution
  double gamma = 0.9;
};

void validate(const TabularMDP& mdp);

struct ExactValues {
  Vec v;        // per-state values
  double j = 0; // nu . v
};

// Direct solve of (I - gamma P_pi) V = r_pi; policy rows are distributions
// over actions.
ExactValues exact_value(const TabularMDP& mdp, const Mat& policy);

// One-step lookahead on exact_value: Q(s,a) = R(s,a) + gamma sum P(s'|s,a) V(s').
Mat exact_q(const TabularMDP& mdp, const Mat& policy);

// Deterministic argmax policy table; ties go to the lower action index.
Mat greedy_policy(const Mat& q);

TabularMDP random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed);

// Logs a tabular MDP as interaction data: user ids "u<i>", item ids
// "a<action>", episode length geometric with continuation gamma.
Dataset generate_log(const TabularMDP& mdp, const Mat& policy, int n_users,
                     std::uint64_t seed);

struct LatentWorld {
  Mat users;         // k x m, true user vectors as columns
  Mat items;         // k x n
  Vec continuation;  // per-item continue probability; empty means gamma for all
  double gamma = 0.9;
  double drift = 0.1;  // step toward the item after a successful consumption

  int k() const { return static_cast<int>(items.rows()); }
  int n_users() const { return static_cast<int>(users.cols()); }
  int n_items() const { return static_cast<int>(items.cols()); }

  double success_probability(const Vec& user, int item) const;
  double continuation_probability(int item) const;
};

void validate(const LatentWorld& world);

struct GeneratedLog {
  Dataset dataset;             // user ids "u<i>", item ids "i<j>"
  TrajectoryBatch true_states; // pre-event true user vectors, for estimator audits
  std::vector<std::vector<double>> behavior_probabilities;  // per user, per step
};

GeneratedLog generate_log(const LatentWorld& world, const PolicyParams& policy,
                          int n_users, std::uint64_t seed);

// Exact policy value under zero drift, where steps are independent per user:
// J(u) = rbar(u) / (1 - gamma cbar(u)), averaged over the user population.
double closed_form_value(const LatentWorld& world, const PolicyParams& policy,
                         double gamma);

// Exact value of the per-user deterministic greedy reference: lifetime=false
// picks the best immediate success probability, lifetime=true the best
// q / (1 - gamma c) trade-off.
double closed_form_greedy_value(const LatentWorld& world, bool lifetime, double gamma);

// Population expectation of the per-user episode length 1 / (1 - cbar(u)).
double expected_episode_length(const LatentWorld& world, const PolicyParams& policy);

struct SelfPreservationWorld {
  LatentWorld world;
  PolicyParams behavior;
  int first_poison_item = 0;  // items [first_poison_item, n) crash continuation
};

// Scripted scenario where a block of high-immediate-reward items sharply
// lowers the continuation probability, so immediate-reward greed and
// lifetime-value greed pick different items.
SelfPreservationWorld make_self_preservation_world(std::uint64_t seed,
                                                   int n_population = 4000);

struct SidecarTruth {
  double j_behavior = 0.0;
  double j_myopic_greedy = 0.0;
  double j_ltv_greedy = 0.0;
  double gamma = 0.0;            // discount matching the log's drop-out rate
  double mean_episode_length = 0.0;
};

SidecarTruth sidecar_truth(const LatentWorld& world, const PolicyParams& behavior);

}  // namespace ltvrec
