#pragma once

#include <string>
#include <vector>

#include "ltvrec/common.hpp"
#include "ltvrec/factorize.hpp"
#include "ltvrec/ingest.hpp"

namespace ltvrec {

// A user's running latent state: the regularized least-squares solve over the
// consumed items, maintained incrementally. The cached inverse is advanced by
// Sherman-Morrison rank-one updates; the forward matrix is kept so a direct
// re-solve is possible if the update ever turns numerically unsound.
class UserState {
public:
  UserState(int k, double lambda);

  void update(const Vec& item_vector, double reward);

  const Vec& features() const { return u_; }
  const Mat& inverse_cache() const { return inv_; }
  const Vec& rhs_cache() const { return rhs_; }
  int dim() const { return static_cast<int>(u_.size()); }

  // Direct re-solves taken by the numerical-fault branch; stays 0 on sound
  // update streams.
  int resolve_count() const { return resolves_; }

private:
  Mat inv_;    // (lambda I + sum v v^T)^{-1}
  Mat gram_;   // lambda I + sum v v^T
  Vec rhs_;    // sum r v
  Vec u_;      // inv_ * rhs_
  int resolves_ = 0;
};

UserState cold_state(const LatentModel& model);

struct TrajStep {
  Vec state;          // latent state before the event
  int item = -1;
  double reward = 0.0;
  long long timestamp = 0;
};

struct Trajectory {
  std::string user_id;
  std::vector<TrajStep> steps;
};

struct TrajectoryBatch {
  std::vector<Trajectory> trajectories;
  int k = 0;
  double lambda = 0.0;

  int n_users() const { return static_cast<int>(trajectories.size()); }
  long long n_steps() const {
    long long n = 0;
    for (const auto& t : trajectories) n += static_cast<long long>(t.steps.size());
    return n;
  }
};

TrajectoryBatch build_trajectories(const Dataset& dataset, const LatentModel& model);

}  // namespace ltvrec
