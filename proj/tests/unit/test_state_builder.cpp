#include <doctest.h>

#include <Eigen/Cholesky>

#include "helpers.hpp"
#include "ltvrec/state_builder.hpp"

using namespace ltvrec;

namespace {

LatentModel toy_model(int k, int n_items, double lambda, std::uint64_t seed) {
  LatentModel model;
  model.k = k;
  model.lambda = lambda;
  model.method = "als";
  model.V = testutil::random_catalog(k, n_items, seed);
  model.U = Mat::Zero(1, k);
  return model;
}

Vec direct_solve(const std::vector<std::pair<Vec, double>>& history, int k,
                 double lambda) {
  Mat gram = lambda * Mat::Identity(k, k);
  Vec rhs = Vec::Zero(k);
  for (const auto& [v, r] : history) {
    gram += v * v.transpose();
    rhs += r * v;
  }
  return gram.ldlt().solve(rhs);
}

Dataset dataset_from_items(const std::vector<std::vector<std::pair<int, double>>>& users,
                           int n_items) {
  Dataset ds;
  for (std::size_t u = 0; u < users.size(); ++u) {
    UserLog log;
    log.user_id = "u" + std::to_string(u);
    long long t = 0;
    for (const auto& [item, reward] : users[u]) {
      log.events.push_back({item, reward, t++});
      ++ds.n_samples;
    }
    ds.logs.push_back(std::move(log));
  }
  for (int j = 0; j < n_items; ++j) ds.item_ids.push_back("i" + std::to_string(j));
  ds.gamma = 0.9;
  return ds;
}

}  // namespace

TEST_CASE("cold state is the zero vector with a 1/lambda inverse") {
  LatentModel model = toy_model(2, 3, 0.1, 1);
  const UserState state = cold_state(model);
  CHECK(state.features().isZero(0.0));
  CHECK((state.inverse_cache() - 10.0 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK(state.rhs_cache().isZero(0.0));
}

TEST_CASE("one update matches the single-observation closed form") {
  UserState state(1, 1.0);
  state.update(testutil::vec({1.0}), 1.0);
  CHECK(state.features()(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("a zero item vector leaves the state unchanged") {
  UserState state(3, 0.5);
  state.update(testutil::vec({1.0, 0.0, 2.0}), 1.0);
  const Vec before = state.features();
  const Mat inv_before = state.inverse_cache();
  state.update(Vec::Zero(3), 1.0);
  CHECK((state.features() - before).cwiseAbs().maxCoeff() == 0.0);
  CHECK((state.inverse_cache() - inv_before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("incremental updates match the dense solve on random histories") {
  const int k = 20;
  const double lambda = 0.1;
  Rng rng(77);
  UserState state(k, lambda);
  std::vector<std::pair<Vec, double>> history;
  for (int t = 0; t < 20; ++t) {
    Vec v = Vec::NullaryExpr(k, [&](Eigen::Index) { return rng.normal(); });
    const double r = rng.bernoulli(0.5) ? 1.0 : 0.0;
    state.update(v, r);
    history.emplace_back(std::move(v), r);
    const Vec direct = direct_solve(history, k, lambda);
    CHECK((state.features() - direct).cwiseAbs().maxCoeff() < 1e-8);
  }
  CHECK(state.resolve_count() == 0);
}

TEST_CASE("inverse cache stays symmetric") {
  const int k = 6;
  Rng rng(5);
  UserState state(k, 0.1);
  for (int t = 0; t < 200; ++t) {
    const Vec v = Vec::NullaryExpr(k, [&](Eigen::Index) { return rng.normal(); });
    state.update(v, rng.uniform());
    const Mat& inv = state.inverse_cache();
    CHECK((inv - inv.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("repeated items apply one rank-one update each") {
  UserState repeated(1, 1.0);
  repeated.update(testutil::vec({1.0}), 1.0);
  repeated.update(testutil::vec({1.0}), 1.0);
  // (1 + 2)^{-1} * 2 with multiplicity counting.
  CHECK(repeated.features()(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("build_trajectories starts every user at the cold state") {
  LatentModel model = toy_model(2, 4, 0.1, 2);
  const Dataset ds = dataset_from_items({{{1, 1.0}}}, 4);
  const TrajectoryBatch batch = build_trajectories(ds, model);
  REQUIRE(batch.n_users() == 1);
  REQUIRE(batch.trajectories[0].steps.size() == 1);
  CHECK(batch.trajectories[0].steps[0].state.isZero(0.0));
}

TEST_CASE("identical histories give identical state sequences") {
  LatentModel model = toy_model(3, 5, 0.1, 3);
  const std::vector<std::pair<int, double>> story = {{0, 1.0}, {2, 0.0}, {4, 1.0}};
  const Dataset ds = dataset_from_items({story, story}, 5);
  const TrajectoryBatch batch = build_trajectories(ds, model);
  REQUIRE(batch.n_users() == 2);
  for (std::size_t t = 0; t < story.size(); ++t)
    CHECK((batch.trajectories[0].steps[t].state - batch.trajectories[1].steps[t].state)
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("states are prefix-consistent") {
  LatentModel model = toy_model(3, 6, 0.1, 4);
  Rng rng(8);
  std::vector<std::pair<int, double>> story;
  for (int t = 0; t < 10; ++t)
    story.emplace_back(rng.index(6), rng.bernoulli(0.5) ? 1.0 : 0.0);
  const std::vector<std::pair<int, double>> prefix(story.begin(), story.begin() + 6);
  const TrajectoryBatch full =
      build_trajectories(dataset_from_items({story}, 6), model);
  const TrajectoryBatch cut =
      build_trajectories(dataset_from_items({prefix}, 6), model);
  for (std::size_t t = 0; t < prefix.size(); ++t)
    CHECK((full.trajectories[0].steps[t].state - cut.trajectories[0].steps[t].state)
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("states are causal in the event stream") {
  LatentModel model = toy_model(2, 4, 0.1, 6);
  std::vector<std::pair<int, double>> story = {{0, 1.0}, {1, 0.0}, {2, 1.0}, {3, 0.0}};
  auto perturbed = story;
  perturbed[2] = {1, 1.0};
  const TrajectoryBatch a = build_trajectories(dataset_from_items({story}, 4), model);
  const TrajectoryBatch b =
      build_trajectories(dataset_from_items({perturbed}, 4), model);
  for (std::size_t t = 0; t <= 2; ++t)
    CHECK((a.trajectories[0].steps[t].state - b.trajectories[0].steps[t].state)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  CHECK((a.trajectories[0].steps[3].state - b.trajectories[0].steps[3].state)
            .cwiseAbs()
            .maxCoeff() > 0.0);
}

TEST_CASE("items outside the model are rejected by name") {
  LatentModel model = toy_model(2, 2, 0.1, 9);
  const Dataset ds = dataset_from_items({{{0, 1.0}, {3, 1.0}}}, 4);
  CHECK_THROWS_AS(build_trajectories(ds, model), DataError);
}
