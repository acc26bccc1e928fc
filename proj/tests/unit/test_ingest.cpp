#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "ltvrec/ingest.hpp"

using namespace ltvrec;

namespace {

std::filesystem::path write_log(const std::string& name, const std::string& content) {
  const auto dir = testutil::fresh_dir("ingest_" + name);
  const auto path = dir / "log.csv";
  std::ofstream out(path);
  out << content;
  return path;
}

std::vector<InteractionRecord> synthetic_records(int users, int events_per_user,
                                                 double reward) {
  std::vector<InteractionRecord> records;
  for (int u = 0; u < users; ++u)
    for (int t = 0; t < events_per_user; ++t)
      records.push_back({"u" + std::to_string(u), "i" + std::to_string(t % 3), reward, t});
  return records;
}

}  // namespace

TEST_CASE("parse_log maps fields directly") {
  const auto path =
      write_log("basic", "user_id,item_id,reward,timestamp\n7,42,1,1000\n");
  const auto records = parse_log(path);
  REQUIRE(records.size() == 1);
  CHECK(records[0].user_id == "7");
  CHECK(records[0].item_id == "42");
  CHECK(records[0].reward == 1.0);
  CHECK(records[0].timestamp == 1000);
}

TEST_CASE("parse_log on a header-only file gives an empty list") {
  const auto path = write_log("empty", "user_id,item_id,reward,timestamp\n");
  CHECK(parse_log(path).empty());
}

TEST_CASE("parse_log on a zero-byte file gives an empty list") {
  const auto path = write_log("zerobyte", "");
  CHECK(parse_log(path).empty());
}

TEST_CASE("parse_log reports the offending line") {
  const auto path = write_log(
      "badreward", "user_id,item_id,reward,timestamp\n1,2,1,10\n1,3,notanumber,11\n");
  try {
    parse_log(path);
    FAIL("expected a parse error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("parse_log supports headerless files with declared columns") {
  const auto path = write_log("headerless", "9,5,0.5,100\n9,6,1,101\n");
  FormatConfig format;
  format.columns = {"user_id", "item_id", "reward", "timestamp"};
  const auto records = parse_log(path, format);
  REQUIRE(records.size() == 2);
  CHECK(records[1].item_id == "6");
}

TEST_CASE("parse_log missing file") {
  CHECK_THROWS_AS(parse_log("/nonexistent/ltvrec.csv"), DataError);
}

TEST_CASE("filter_users applies the interaction count threshold") {
  std::vector<InteractionRecord> records;
  const int counts[3] = {25, 19, 30};
  for (int u = 0; u < 3; ++u)
    for (int t = 0; t < counts[u]; ++t)
      records.push_back({"u" + std::to_string(u), "i0", 1.0, t});
  const Dataset ds = filter_users(records, 20, false);
  CHECK(ds.n_users() == 2);
  CHECK(ds.users_before_filter == 3);
  CHECK(ds.users_after_count_filter == 2);
  for (const auto& log : ds.logs)
    CHECK(log.events.size() >= 20);
}

TEST_CASE("filter_users drops all-zero-reward users when asked") {
  std::vector<InteractionRecord> records;
  for (int t = 0; t < 30; ++t) records.push_back({"clicker", "i0", t % 2 ? 1.0 : 0.0, t});
  for (int t = 0; t < 30; ++t) records.push_back({"lurker", "i0", 0.0, t});
  const Dataset ds = filter_users(records, 20, true);
  REQUIRE(ds.n_users() == 1);
  CHECK(ds.logs[0].user_id == "clicker");
  CHECK(ds.users_after_click_filter == 1);
}

TEST_CASE("zero-click rule only fires on binary rewards") {
  std::vector<InteractionRecord> records;
  for (int t = 0; t < 25; ++t) records.push_back({"rater", "i0", 3.5, t});
  for (int t = 0; t < 25; ++t) records.push_back({"zeros", "i0", 0.0, t});
  const Dataset ds = filter_users(records, 20, true);
  CHECK(ds.n_users() == 2);
}

TEST_CASE("filter_users with everything filtered out errors") {
  const auto records = synthetic_records(2, 3, 1.0);
  CHECK_THROWS_AS(filter_users(records, 20, false), DataError);
}

TEST_CASE("filter_users sorts by timestamp with input order on ties") {
  std::vector<InteractionRecord> records = {
      {"u", "late", 1.0, 50},
      {"u", "tie_first", 1.0, 10},
      {"u", "tie_second", 1.0, 10},
      {"u", "early", 1.0, 1},
  };
  const Dataset ds = filter_users(records, 1, false);
  REQUIRE(ds.n_users() == 1);
  const auto& ev = ds.logs[0].events;
  REQUIRE(ev.size() == 4);
  CHECK(ds.item_ids[static_cast<std::size_t>(ev[0].item)] == "early");
  CHECK(ds.item_ids[static_cast<std::size_t>(ev[1].item)] == "tie_first");
  CHECK(ds.item_ids[static_cast<std::size_t>(ev[2].item)] == "tie_second");
  CHECK(ds.item_ids[static_cast<std::size_t>(ev[3].item)] == "late");
}

TEST_CASE("filter_users is idempotent") {
  std::vector<InteractionRecord> records;
  Rng rng(3);
  for (int u = 0; u < 8; ++u) {
    const int len = 1 + rng.index(30);
    for (int t = 0; t < len; ++t)
      records.push_back({"u" + std::to_string(u), "i" + std::to_string(rng.index(4)),
                         rng.bernoulli(0.5) ? 1.0 : 0.0, t});
  }
  const Dataset once = filter_users(records, 10, true);
  std::vector<InteractionRecord> flattened;
  for (const auto& log : once.logs)
    for (const auto& e : log.events)
      flattened.push_back({log.user_id, once.item_ids[static_cast<std::size_t>(e.item)],
                           e.reward, e.timestamp});
  const Dataset twice = filter_users(flattened, 10, true);
  REQUIRE(twice.n_users() == once.n_users());
  for (int u = 0; u < once.n_users(); ++u) {
    CHECK(twice.logs[u].user_id == once.logs[u].user_id);
    REQUIRE(twice.logs[u].events.size() == once.logs[u].events.size());
    for (std::size_t t = 0; t < once.logs[u].events.size(); ++t)
      CHECK(twice.logs[u].events[t].reward == once.logs[u].events[t].reward);
  }
}

TEST_CASE("estimate_gamma formula and bounds") {
  Dataset single;
  single.logs.resize(1);
  single.n_samples = 1;
  CHECK(estimate_gamma(single) == 0.0);

  Dataset movielens_shape;
  movielens_shape.logs.resize(6000);
  movielens_shape.n_samples = 1000000;
  CHECK(estimate_gamma(movielens_shape) == doctest::Approx(0.994).epsilon(1e-12));

  Dataset coupon_shape;
  coupon_shape.logs.resize(13000);
  coupon_shape.n_samples = 2708333;
  CHECK(estimate_gamma(coupon_shape) == doctest::Approx(0.9952).epsilon(1e-4));

  Dataset empty;
  CHECK_THROWS_AS(estimate_gamma(empty), DataError);

  Dataset inverted;
  inverted.logs.resize(5);
  inverted.n_samples = 3;
  CHECK_THROWS_AS(estimate_gamma(inverted), DataError);
}

TEST_CASE("estimate_gamma stays in [0,1) for valid shapes") {
  for (long long m : {1ll, 10ll, 500ll})
    for (long long n : {m, m * 3, m * 1000}) {
      Dataset ds;
      ds.logs.resize(static_cast<std::size_t>(m));
      ds.n_samples = n;
      const double g = estimate_gamma(ds);
      CHECK(g >= 0.0);
      CHECK(g < 1.0);
    }
}

TEST_CASE("scale_rewards maps rating scales onto [0,1]") {
  std::vector<InteractionRecord> records;
  for (int r = 1; r <= 5; ++r) records.push_back({"u", "i" + std::to_string(r), double(r), r});
  Dataset ds = filter_users(records, 1, false);
  const Dataset scaled = scale_rewards(ds);
  const double expected[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int t = 0; t < 5; ++t)
    CHECK(scaled.logs[0].events[static_cast<std::size_t>(t)].reward ==
          doctest::Approx(expected[t]).epsilon(1e-12));
  CHECK(scaled.reward_scale.applied);
  CHECK(scaled.reward_scale.observed_min == 1.0);
  CHECK(scaled.reward_scale.observed_max == 5.0);
}

TEST_CASE("scale_rewards leaves binary clicks unchanged") {
  std::vector<InteractionRecord> records = {{"u", "a", 0.0, 1}, {"u", "b", 1.0, 2}};
  const Dataset scaled = scale_rewards(filter_users(records, 1, false));
  CHECK(scaled.logs[0].events[0].reward == 0.0);
  CHECK(scaled.logs[0].events[1].reward == 1.0);
}

TEST_CASE("scale_rewards degenerate range maps to the midpoint") {
  std::vector<InteractionRecord> records = {{"u", "a", 3.0, 1}, {"u", "b", 3.0, 2}};
  const Dataset scaled = scale_rewards(filter_users(records, 1, false));
  CHECK(scaled.logs[0].events[0].reward == 0.5);
  CHECK(scaled.logs[0].events[1].reward == 0.5);
}

TEST_CASE("scale_rewards preserves within-user reward ordering") {
  std::vector<InteractionRecord> records = {
      {"u", "a", 2.0, 1}, {"u", "b", 5.0, 2}, {"u", "c", 1.0, 3}, {"u", "d", 4.0, 4}};
  const Dataset before = filter_users(records, 1, false);
  const Dataset after = scale_rewards(before);
  for (std::size_t i = 0; i + 1 < before.logs[0].events.size(); ++i)
    for (std::size_t j = i + 1; j < before.logs[0].events.size(); ++j) {
      const bool was_less =
          before.logs[0].events[i].reward < before.logs[0].events[j].reward;
      const bool is_less =
          after.logs[0].events[i].reward < after.logs[0].events[j].reward;
      CHECK(was_less == is_less);
    }
}
