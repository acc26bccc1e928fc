#include "ltvrec/estimators.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/LU>

namespace ltvrec {

namespace {

void check_inputs(const TransitionBatch& batch, double gamma, const char* who) {
  if (batch.rows.empty()) throw DataError(std::string(who) + ": empty batch");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw DataError(std::string(who) + ": gamma must be in [0, 1)");
}

// Single accumulation routine shared by every estimator; the identical-policy
// reduction relies on both paths executing exactly these operations.
void accumulate(const TransitionBatch& batch, double gamma, Mat& a, Vec& b,
                RhoDiagnostics& diag) {
  const int d = batch.dim();
  a.setZero(d, d);
  b.setZero(d);
  double rho_sum = 0.0;
  double rho_sq = 0.0;
  diag.min = std::numeric_limits<double>::infinity();
  diag.max = -std::numeric_limits<double>::infinity();
  for (const auto& row : batch.rows) {
    if (row.phi.size() != d || row.phi_next.size() != d)
      throw DataError("transition row feature dimension mismatch");
    const double rho = row.rho;
    if (!std::isfinite(rho) || rho <= 0.0)
      throw NumericError("importance weight must be positive and finite");
    a.noalias() += rho * row.phi * (row.phi - gamma * row.phi_next).transpose();
    b.noalias() += (rho * row.reward) * row.phi;
    rho_sum += rho;
    rho_sq += rho * rho;
    diag.min = std::min(diag.min, rho);
    diag.max = std::max(diag.max, rho);
  }
  diag.rows = static_cast<long long>(batch.rows.size());
  diag.mean = rho_sum / static_cast<double>(diag.rows);
  diag.ess = rho_sum * rho_sum / rho_sq;
}

Vec ridge_solve(Mat a, const Vec& b) {
  Eigen::FullPivLU<Mat> lu(a);
  if (!lu.isInvertible()) {
    std::ostringstream msg;
    msg << "normal equations singular even with ridge, rcond ~ " << lu.rcond();
    throw NumericError(msg.str());
  }
  Vec theta = lu.solve(b);
  if (!theta.allFinite()) throw NumericError("non-finite value weights");
  return theta;
}

}  // namespace

double resolve_epsilon(const Mat& a, double epsilon) {
  if (epsilon >= 0.0) return epsilon;
  return 1e-6 * std::abs(a.trace()) / static_cast<double>(a.rows());
}

ValueWeights solve_from_moments(const Mat& a, const Vec& b, double gamma, double epsilon,
                                const std::string& kind) {
  ValueWeights out;
  out.gamma = gamma;
  out.epsilon = resolve_epsilon(a, epsilon);
  out.kind = kind;
  Mat ridged = a;
  ridged.diagonal().array() += out.epsilon;
  out.theta = ridge_solve(std::move(ridged), b);
  return out;
}

TransitionBatch state_value_batch(const TrajectoryBatch& trajectories) {
  TransitionBatch batch;
  batch.rows.reserve(static_cast<std::size_t>(trajectories.n_steps()));
  const Vec zero = Vec::Zero(trajectories.k);
  for (int ti = 0; ti < trajectories.n_users(); ++ti) {
    const auto& steps = trajectories.trajectories[ti].steps;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      TransitionRow row;
      row.phi = steps[i].state;
      row.phi_next = i + 1 < steps.size() ? steps[i + 1].state : zero;
      row.reward = steps[i].reward;
      row.state = steps[i].state;
      row.action = steps[i].item;
      row.user = ti;
      batch.rows.push_back(std::move(row));
    }
  }
  return batch;
}

TransitionBatch q_batch(const TrajectoryBatch& trajectories, const Mat& catalog) {
  TransitionBatch batch;
  batch.rows.reserve(static_cast<std::size_t>(trajectories.n_steps()));
  const Vec zero = Vec::Zero(joint_dim(trajectories.k));
  for (int ti = 0; ti < trajectories.n_users(); ++ti) {
    const auto& steps = trajectories.trajectories[ti].steps;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (steps[i].item < 0 || steps[i].item >= catalog.cols())
        throw DataError("q_batch: item outside the catalog");
      TransitionRow row;
      row.phi = joint_features(steps[i].state, catalog.col(steps[i].item));
      row.phi_next = i + 1 < steps.size()
                         ? joint_features(steps[i + 1].state, catalog.col(steps[i + 1].item))
                         : zero;
      row.reward = steps[i].reward;
      row.state = steps[i].state;
      row.action = steps[i].item;
      row.user = ti;
      batch.rows.push_back(std::move(row));
    }
  }
  return batch;
}

ValueWeights lstd(const TransitionBatch& batch, double gamma, double epsilon) {
  check_inputs(batch, gamma, "lstd");
  Mat a;
  Vec b;
  RhoDiagnostics diag;
  accumulate(batch, gamma, a, b, diag);
  return solve_from_moments(a, b, gamma, epsilon, "onpolicy");
}

ValueWeights lstdq(const TransitionBatch& batch, double gamma, double epsilon) {
  check_inputs(batch, gamma, "lstdq");
  Mat a;
  Vec b;
  RhoDiagnostics diag;
  accumulate(batch, gamma, a, b, diag);
  ValueWeights out = solve_from_moments(a, b, gamma, epsilon, "q");
  return out;
}

TransitionBatch with_importance_weights(TransitionBatch batch, const Mat& catalog,
                                        const PolicyParams& pi_target,
                                        const PolicyParams& pi_behavior,
                                        double rho_clip) {
  for (auto& row : batch.rows) {
    if (row.state.size() == 0 || row.action < 0)
      throw DataError("off-policy rows need a stored state and action");
    if (row.action >= catalog.cols())
      throw DataError("off-policy row action outside the catalog");
    const Vec pt = policy_probabilities(pi_target, row.state, catalog);
    const Vec pb = policy_probabilities(pi_behavior, row.state, catalog);
    const double denom = pb(row.action);
    if (denom < 1e-12)
      throw NumericError("behavior probability below the 1e-12 floor");
    double rho = pt(row.action) / denom;
    if (!std::isfinite(rho)) throw NumericError("non-finite importance ratio");
    if (rho_clip > 0.0 && rho > rho_clip) rho = rho_clip;
    row.rho = rho;
  }
  return batch;
}

OffPolicyResult off_policy_lstd(const TransitionBatch& batch, const Mat& catalog,
                                const PolicyParams& pi_target,
                                const PolicyParams& pi_behavior, double gamma,
                                double epsilon, double rho_clip) {
  check_inputs(batch, gamma, "off_policy_lstd");
  const TransitionBatch weighted =
      with_importance_weights(batch, catalog, pi_target, pi_behavior, rho_clip);
  OffPolicyResult out;
  Mat a;
  Vec b;
  accumulate(weighted, gamma, a, b, out.rho);
  out.weights = solve_from_moments(a, b, gamma, epsilon, "offpolicy");
  return out;
}

double monte_carlo_value(const std::vector<std::vector<double>>& rewards_per_user,
                         double gamma) {
  if (rewards_per_user.empty()) throw DataError("monte_carlo_value: no users");
  double total = 0.0;
  for (const auto& rewards : rewards_per_user) {
    double discount = 1.0;
    double sum = 0.0;
    for (double r : rewards) {
      sum += discount * r;
      discount *= gamma;
    }
    total += sum;
  }
  return total / static_cast<double>(rewards_per_user.size());
}

double monte_carlo_value(const TrajectoryBatch& trajectories, double gamma) {
  std::vector<std::vector<double>> rewards;
  rewards.reserve(trajectories.trajectories.size());
  for (const auto& traj : trajectories.trajectories) {
    std::vector<double> r;
    r.reserve(traj.steps.size());
    for (const auto& step : traj.steps) r.push_back(step.reward);
    rewards.push_back(std::move(r));
  }
  return monte_carlo_value(rewards, gamma);
}

double value_from_theta(const Vec& theta, const std::vector<Vec>& states) {
  if (states.empty()) throw DataError("value_from_theta: no states");
  double total = 0.0;
  for (const auto& s : states) {
    if (s.size() != theta.size())
      throw DataError("value_from_theta: state dimension mismatch");
    total += theta.dot(s);
  }
  return total / static_cast<double>(states.size());
}

std::vector<UserMoments> per_user_moments(const TransitionBatch& batch, double gamma,
                                          int n_users) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw DataError("per_user_moments: gamma must be in [0, 1)");
  const int d = batch.dim();
  std::vector<UserMoments> moments(static_cast<std::size_t>(n_users));
  for (auto& m : moments) {
    m.a = Mat::Zero(d, d);
    m.b = Vec::Zero(d);
  }
  for (const auto& row : batch.rows) {
    if (row.user < 0 || row.user >= n_users)
      throw DataError("per_user_moments: row user index out of range");
    if (row.phi.size() != d || row.phi_next.size() != d)
      throw DataError("transition row feature dimension mismatch");
    if (!std::isfinite(row.rho) || row.rho <= 0.0)
      throw NumericError("importance weight must be positive and finite");
    auto& m = moments[static_cast<std::size_t>(row.user)];
    m.a.noalias() += row.rho * row.phi * (row.phi - gamma * row.phi_next).transpose();
    m.b.noalias() += (row.rho * row.reward) * row.phi;
    m.rho_sum += row.rho;
    m.rho_sq_sum += row.rho * row.rho;
    ++m.rows;
  }
  return moments;
}

}  // namespace ltvrec
