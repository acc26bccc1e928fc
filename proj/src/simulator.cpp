#include "ltvrec/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/LU>

#include "ltvrec/rng.hpp"

namespace ltvrec {

namespace {

void check_distribution(const Vec& row, const char* what) {
  if (row.minCoeff() < 0.0)
    throw DataError(std::string(what) + ": negative probability");
  if (std::abs(row.sum() - 1.0) > 1e-9)
    throw DataError(std::string(what) + ": probabilities do not sum to 1");
}

void check_policy(const Mat& policy, int n_states, int n_actions) {
  if (policy.rows() != n_states || policy.cols() != n_actions)
    throw DataError("policy table shape does not match the MDP");
  for (int s = 0; s < n_states; ++s)
    check_distribution(policy.row(s).transpose(), "policy row");
}

int sample_categorical(const Vec& probs, Rng& rng) {
  const double x = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (x < acc) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

void validate(const TabularMDP& mdp) {
  if (mdp.n_states < 1 || mdp.n_actions < 1)
    throw DataError("mdp needs at least one state and action");
  if (!(mdp.gamma >= 0.0 && mdp.gamma < 1.0))
    throw DataError("mdp gamma must be in [0, 1)");
  if (static_cast<int>(mdp.p.size()) != mdp.n_actions)
    throw DataError("mdp transition tensor has wrong action count");
  for (const auto& pa : mdp.p) {
    if (pa.rows() != mdp.n_states || pa.cols() != mdp.n_states)
      throw DataError("mdp transition matrix has wrong shape");
    for (int s = 0; s < mdp.n_states; ++s)
      check_distribution(pa.row(s).transpose(), "transition row");
  }
  if (mdp.r.rows() != mdp.n_states || mdp.r.cols() != mdp.n_actions)
    throw DataError("mdp reward table has wrong shape");
  if (!mdp.r.allFinite()) throw DataError("mdp rewards must be finite");
  if (mdp.nu.size() != mdp.n_states)
    throw DataError("mdp initial distribution has wrong length");
  check_distribution(mdp.nu, "initial distribution");
}

ExactValues exact_value(const TabularMDP& mdp, const Mat& policy) {
  validate(mdp);
  check_policy(policy, mdp.n_states, mdp.n_actions);
  Mat p_pi = Mat::Zero(mdp.n_states, mdp.n_states);
  Vec r_pi = Vec::Zero(mdp.n_states);
  for (int a = 0; a < mdp.n_actions; ++a) {
    p_pi += policy.col(a).asDiagonal() * mdp.p[static_cast<std::size_t>(a)];
    r_pi += policy.col(a).cwiseProduct(mdp.r.col(a));
  }
  const Mat system = Mat::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * p_pi;
  ExactValues out;
  out.v = system.partialPivLu().solve(r_pi);
  out.j = mdp.nu.dot(out.v);
  return out;
}

Mat exact_q(const TabularMDP& mdp, const Mat& policy) {
  const ExactValues values = exact_value(mdp, policy);
  Mat q(mdp.n_states, mdp.n_actions);
  for (int a = 0; a < mdp.n_actions; ++a)
    q.col(a) = mdp.r.col(a) + mdp.gamma * (mdp.p[static_cast<std::size_t>(a)] * values.v);
  return q;
}

Mat greedy_policy(const Mat& q) {
  Mat policy = Mat::Zero(q.rows(), q.cols());
  for (int s = 0; s < q.rows(); ++s) {
    int best = 0;
    for (int a = 1; a < q.cols(); ++a)
      if (q(s, a) > q(s, best)) best = a;
    policy(s, best) = 1.0;
  }
  return policy;
}

TabularMDP random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed) {
  Rng rng(seed);
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.p.resize(static_cast<std::size_t>(n_actions));
  for (auto& pa : mdp.p) {
    pa.resize(n_states, n_states);
    for (int s = 0; s < n_states; ++s) {
      double total = 0.0;
      for (int t = 0; t < n_states; ++t) {
        pa(s, t) = rng.uniform(0.05, 1.0);
        total += pa(s, t);
      }
      pa.row(s) /= total;
    }
  }
  mdp.r.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) mdp.r(s, a) = rng.uniform(0.0, 1.0);
  mdp.nu.resize(n_states);
  double total = 0.0;
  for (int s = 0; s < n_states; ++s) {
    mdp.nu(s) = rng.uniform(0.05, 1.0);
    total += mdp.nu(s);
  }
  mdp.nu /= total;
  validate(mdp);
  return mdp;
}

Dataset generate_log(const TabularMDP& mdp, const Mat& policy, int n_users,
                     std::uint64_t seed) {
  validate(mdp);
  check_policy(policy, mdp.n_states, mdp.n_actions);
  if (n_users < 0) throw DataError("generate_log: negative user count");
  Dataset dataset;
  dataset.item_ids.reserve(static_cast<std::size_t>(mdp.n_actions));
  for (int a = 0; a < mdp.n_actions; ++a)
    dataset.item_ids.push_back("a" + std::to_string(a));
  for (int i = 0; i < n_users; ++i) {
    Rng rng(derive_seed(seed, "tabular-user", static_cast<std::uint64_t>(i)));
    UserLog log;
    log.user_id = "u" + std::to_string(i);
    int state = sample_categorical(mdp.nu, rng);
    long long t = 0;
    while (true) {
      const int action = sample_categorical(policy.row(state).transpose(), rng);
      log.events.push_back(Event{action, mdp.r(state, action), t});
      ++t;
      if (!rng.bernoulli(mdp.gamma)) break;
      state = sample_categorical(
          mdp.p[static_cast<std::size_t>(action)].row(state).transpose(), rng);
    }
    dataset.n_samples += static_cast<long long>(log.events.size());
    dataset.logs.push_back(std::move(log));
  }
  dataset.users_before_filter = n_users;
  dataset.users_after_count_filter = n_users;
  dataset.users_after_click_filter = n_users;
  return dataset;
}

double LatentWorld::success_probability(const Vec& user, int item) const {
  return std::clamp(user.dot(items.col(item)), 0.0, 1.0);
}

double LatentWorld::continuation_probability(int item) const {
  return continuation.size() > 0 ? continuation(item) : gamma;
}

void validate(const LatentWorld& world) {
  if (world.users.cols() < 1 || world.items.cols() < 1)
    throw DataError("latent world needs users and items");
  if (world.users.rows() != world.items.rows())
    throw DataError("latent world user/item dimensions differ");
  if (world.continuation.size() > 0 && world.continuation.size() != world.items.cols())
    throw DataError("latent world continuation vector has wrong length");
  for (int j = 0; j < world.continuation.size(); ++j)
    if (world.continuation(j) < 0.0 || world.continuation(j) >= 1.0)
      throw DataError("latent world continuation probabilities must be in [0, 1)");
  if (!(world.gamma >= 0.0 && world.gamma < 1.0))
    throw DataError("latent world gamma must be in [0, 1)");
  if (world.drift < 0.0 || world.drift > 1.0)
    throw DataError("latent world drift must be in [0, 1]");
}

GeneratedLog generate_log(const LatentWorld& world, const PolicyParams& policy,
                          int n_users, std::uint64_t seed) {
  validate(world);
  if (n_users < 0) throw DataError("generate_log: negative user count");
  GeneratedLog out;
  out.true_states.k = world.k();
  out.true_states.lambda = 0.0;
  out.dataset.item_ids.reserve(static_cast<std::size_t>(world.n_items()));
  for (int j = 0; j < world.n_items(); ++j)
    out.dataset.item_ids.push_back("i" + std::to_string(j));
  for (int i = 0; i < n_users; ++i) {
    Rng rng(derive_seed(seed, "latent-user", static_cast<std::uint64_t>(i)));
    Vec u = world.users.col(i % world.n_users());
    UserLog log;
    log.user_id = "u" + std::to_string(i);
    Trajectory traj;
    traj.user_id = log.user_id;
    std::vector<double> probs_taken;
    long long t = 0;
    while (true) {
      const Vec probs = policy_probabilities(policy, u, world.items);
      const int item = sample_categorical(probs, rng);
      const double reward = rng.bernoulli(world.success_probability(u, item)) ? 1.0 : 0.0;
      log.events.push_back(Event{item, reward, t});
      traj.steps.push_back(TrajStep{u, item, reward, t});
      probs_taken.push_back(probs(item));
      if (reward > 0.0 && world.drift > 0.0)
        u += world.drift * (world.items.col(item) - u);
      ++t;
      if (!rng.bernoulli(world.continuation_probability(item))) break;
    }
    out.dataset.n_samples += static_cast<long long>(log.events.size());
    out.dataset.logs.push_back(std::move(log));
    out.true_states.trajectories.push_back(std::move(traj));
    out.behavior_probabilities.push_back(std::move(probs_taken));
  }
  out.dataset.users_before_filter = n_users;
  out.dataset.users_after_count_filter = n_users;
  out.dataset.users_after_click_filter = n_users;
  return out;
}

namespace {

struct UserAverages {
  double mean_reward = 0.0;
  double mean_continuation = 0.0;
};

UserAverages user_averages(const LatentWorld& world, const PolicyParams& policy,
                           int user) {
  const Vec u = world.users.col(user);
  const Vec probs = policy_probabilities(policy, u, world.items);
  UserAverages out;
  for (int j = 0; j < world.n_items(); ++j) {
    out.mean_reward += probs(j) * world.success_probability(u, j);
    out.mean_continuation += probs(j) * world.continuation_probability(j);
  }
  return out;
}

void require_zero_drift(const LatentWorld& world, const char* who) {
  if (world.drift != 0.0)
    throw DataError(std::string(who) + ": closed form needs zero drift");
}

}  // namespace

double closed_form_value(const LatentWorld& world, const PolicyParams& policy,
                         double gamma) {
  validate(world);
  require_zero_drift(world, "closed_form_value");
  double total = 0.0;
  for (int i = 0; i < world.n_users(); ++i) {
    const UserAverages avg = user_averages(world, policy, i);
    total += avg.mean_reward / (1.0 - gamma * avg.mean_continuation);
  }
  return total / static_cast<double>(world.n_users());
}

double closed_form_greedy_value(const LatentWorld& world, bool lifetime, double gamma) {
  validate(world);
  require_zero_drift(world, "closed_form_greedy_value");
  double total = 0.0;
  for (int i = 0; i < world.n_users(); ++i) {
    const Vec u = world.users.col(i);
    double best_key = -std::numeric_limits<double>::infinity();
    double best_value = 0.0;
    for (int j = 0; j < world.n_items(); ++j) {
      const double q = world.success_probability(u, j);
      const double value = q / (1.0 - gamma * world.continuation_probability(j));
      const double key = lifetime ? value : q;
      if (key > best_key) {
        best_key = key;
        best_value = value;
      }
    }
    total += best_value;
  }
  return total / static_cast<double>(world.n_users());
}

double expected_episode_length(const LatentWorld& world, const PolicyParams& policy) {
  validate(world);
  require_zero_drift(world, "expected_episode_length");
  double total = 0.0;
  for (int i = 0; i < world.n_users(); ++i) {
    const UserAverages avg = user_averages(world, policy, i);
    total += 1.0 / (1.0 - avg.mean_continuation);
  }
  return total / static_cast<double>(world.n_users());
}

SelfPreservationWorld make_self_preservation_world(std::uint64_t seed, int n_population) {
  if (n_population < 1) throw DataError("self-preservation world needs users");
  const int k = 8;
  const int n_regular = 12;
  const int n_poison = 3;
  Rng rng(derive_seed(seed, "self-preservation"));

  SelfPreservationWorld out;
  LatentWorld& world = out.world;
  world.drift = 0.0;
  world.gamma = 0.9;
  out.first_poison_item = n_regular;

  // Users put weight 1 on the shared base coordinate and small taste noise on
  // the rest, so item success probabilities stay near the item's base level.
  world.users.resize(k, n_population);
  for (int i = 0; i < n_population; ++i) {
    world.users(0, i) = 1.0;
    for (int c = 1; c < k; ++c) world.users(c, i) = rng.uniform(-1.0, 1.0);
  }

  world.items.resize(k, n_regular + n_poison);
  world.items.setZero();
  world.continuation.resize(n_regular + n_poison);
  for (int j = 0; j < n_regular; ++j) {
    world.items(0, j) = 0.25 + 0.30 * static_cast<double>(j) / (n_regular - 1);
    world.items(1 + j % (k - 1), j) = rng.uniform(-0.05, 0.05);
    world.continuation(j) = 0.94;
  }
  for (int j = n_regular; j < n_regular + n_poison; ++j) {
    world.items(0, j) = 0.90;
    world.items(1 + j % (k - 1), j) = rng.uniform(-0.03, 0.03);
    world.continuation(j) = 0.08;
  }

  // State-independent behavior: score = s_b * (base success level), mildly
  // chasing immediate reward, leaving the session-ending items with roughly a
  // quarter of the probability mass.
  PolicyParams& behavior = out.behavior;
  behavior.kind = PolicyKind::behavior;
  behavior.w = Vec::Zero(joint_dim(k));
  behavior.w(k) = 0.8;  // item block, base coordinate
  validate(world);
  return out;
}

SidecarTruth sidecar_truth(const LatentWorld& world, const PolicyParams& behavior) {
  SidecarTruth truth;
  truth.mean_episode_length = expected_episode_length(world, behavior);
  truth.gamma = 1.0 - 1.0 / truth.mean_episode_length;
  truth.j_behavior = closed_form_value(world, behavior, truth.gamma);
  truth.j_myopic_greedy = closed_form_greedy_value(world, false, truth.gamma);
  truth.j_ltv_greedy = closed_form_greedy_value(world, true, truth.gamma);
  return truth;
}

}  // namespace ltvrec
