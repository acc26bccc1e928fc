#include "ltvrec/state_builder.hpp"

#include <Eigen/Cholesky>

namespace ltvrec {

UserState::UserState(int k, double lambda) {
  if (k < 1) throw DataError("UserState: k must be >= 1");
  if (lambda <= 0.0) throw NumericError("UserState: lambda must be > 0");
  inv_ = Mat::Identity(k, k) / lambda;
  gram_ = Mat::Identity(k, k) * lambda;
  rhs_ = Vec::Zero(k);
  u_ = Vec::Zero(k);
}

void UserState::update(const Vec& item_vector, double reward) {
  if (item_vector.size() != u_.size())
    throw DataError("UserState::update: item vector dimension mismatch");

  gram_.noalias() += item_vector * item_vector.transpose();
  const Vec av = inv_ * item_vector;
  const double denom = 1.0 + item_vector.dot(av);
  if (denom > 1e-12 && std::isfinite(denom)) {
    inv_.noalias() -= (av * av.transpose()) / denom;
  } else {
    // Cannot happen while the cache is SPD; recover from the forward matrix.
    inv_ = gram_.ldlt().solve(Mat::Identity(gram_.rows(), gram_.cols()));
    ++resolves_;
  }
  inv_ = ((inv_ + inv_.transpose()) * 0.5).eval();  // bound symmetry drift
  rhs_.noalias() += reward * item_vector;
  u_.noalias() = inv_ * rhs_;
}

UserState cold_state(const LatentModel& model) {
  return UserState(model.k, model.lambda > 0.0 ? model.lambda : 0.1);
}

TrajectoryBatch build_trajectories(const Dataset& dataset, const LatentModel& model) {
  const double lambda = model.lambda > 0.0 ? model.lambda : 0.1;
  TrajectoryBatch batch;
  batch.k = model.k;
  batch.lambda = lambda;
  batch.trajectories.reserve(dataset.logs.size());

  for (const auto& log : dataset.logs) {
    Trajectory traj;
    traj.user_id = log.user_id;
    traj.steps.reserve(log.events.size());
    UserState state(model.k, lambda);
    for (const auto& e : log.events) {
      if (e.item < 0 || e.item >= model.V.cols())
        throw DataError("build_trajectories: item index " + std::to_string(e.item) +
                        " outside the model's catalog");
      TrajStep step;
      step.state = state.features();  // pre-event state
      step.item = e.item;
      step.reward = e.reward;
      step.timestamp = e.timestamp;
      traj.steps.push_back(std::move(step));
      state.update(model.V.col(e.item), e.reward);
    }
    batch.trajectories.push_back(std::move(traj));
  }
  return batch;
}

}  // namespace ltvrec
