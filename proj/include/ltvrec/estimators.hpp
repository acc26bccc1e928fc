#pragma once

#include <string>
#include <vector>

#include "ltvrec/common.hpp"
#include "ltvrec/policies.hpp"
#include "ltvrec/state_builder.hpp"

namespace ltvrec {

// Weight vector of a fitted linear value function: V(s) = theta . phi(s)
// (dimension k) or Q(s,a) = theta . phi(s,a) (dimension 3k+1).
struct ValueWeights {
  Vec theta;
  double gamma = 0.0;
  double epsilon = 0.0;  // ridge actually applied
  std::string kind;      // "onpolicy", "q", "offpolicy"
};

// One logged transition. phi/phi_next are the regression features; phi_next
// is the zero vector on the last step of a trajectory. state and action keep
// the raw latent state and item index so off-policy weighting can recompute
// softmax probabilities; they may be left empty for purely synthetic batches.
struct TransitionRow {
  Vec phi;
  Vec phi_next;
  double reward = 0.0;
  double rho = 1.0;
  Vec state;
  int action = -1;
  int user = 0;
};

struct TransitionBatch {
  std::vector<TransitionRow> rows;

  int dim() const { return rows.empty() ? 0 : static_cast<int>(rows[0].phi.size()); }
};

// Negative epsilon requests the automatic ridge 1e-6 * |trace(A)| / dim.
constexpr double kAutoEpsilon = -1.0;

double resolve_epsilon(const Mat& a, double epsilon);

// Rows of state features for V-estimation; successor is the next step's
// pre-event state within the same trajectory.
TransitionBatch state_value_batch(const TrajectoryBatch& trajectories);

// Rows of joint (state, action) features for Q-estimation; the successor
// action is the next logged one.
TransitionBatch q_batch(const TrajectoryBatch& trajectories, const Mat& catalog);

struct RhoDiagnostics {
  double min = 1.0;
  double max = 1.0;
  double mean = 1.0;
  double ess = 0.0;  // (sum rho)^2 / sum rho^2
  long long rows = 0;
};

ValueWeights lstd(const TransitionBatch& batch, double gamma, double epsilon = kAutoEpsilon);
ValueWeights lstdq(const TransitionBatch& batch, double gamma, double epsilon = kAutoEpsilon);

// Returns a copy of the batch with rho set to
// pi_target(a|s) / pi_behavior(a|s) per row. rho_clip > 0 caps the ratio.
TransitionBatch with_importance_weights(TransitionBatch batch, const Mat& catalog,
                                        const PolicyParams& pi_target,
                                        const PolicyParams& pi_behavior,
                                        double rho_clip = 0.0);

struct OffPolicyResult {
  ValueWeights weights;
  RhoDiagnostics rho;
};

OffPolicyResult off_policy_lstd(const TransitionBatch& batch, const Mat& catalog,
                                const PolicyParams& pi_target,
                                const PolicyParams& pi_behavior, double gamma,
                                double epsilon = kAutoEpsilon, double rho_clip = 0.0);

double monte_carlo_value(const std::vector<std::vector<double>>& rewards_per_user,
                         double gamma);
double monte_carlo_value(const TrajectoryBatch& trajectories, double gamma);

double value_from_theta(const Vec& theta, const std::vector<Vec>& states);

// Per-user pieces of the normal equations, so bootstrap resamples can be
// assembled as multiplicity-weighted sums instead of re-scanning rows.
struct UserMoments {
  Mat a;
  Vec b;
  double rho_sum = 0.0;
  double rho_sq_sum = 0.0;
  long long rows = 0;
};

std::vector<UserMoments> per_user_moments(const TransitionBatch& batch, double gamma,
                                          int n_users);

ValueWeights solve_from_moments(const Mat& a, const Vec& b, double gamma, double epsilon,
                                const std::string& kind);

}  // namespace ltvrec
