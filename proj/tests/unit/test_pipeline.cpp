#include <doctest.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"
#include "ltvrec/io.hpp"
#include "ltvrec/pipeline.hpp"
#include "ltvrec/simulator.hpp"

using namespace ltvrec;
namespace fs = std::filesystem;

namespace {

fs::path write_world_log(const fs::path& dir) {
  const SelfPreservationWorld sp = make_self_preservation_world(11, 300);
  const GeneratedLog log = generate_log(sp.world, sp.behavior, 300, 12);
  const auto path = dir / "log.csv";
  save_dataset(log.dataset, path);
  return path;
}

RunConfig small_config(const fs::path& input, const fs::path& workdir) {
  RunConfig config;
  config.input = input.string();
  config.workdir = workdir.string();
  config.min_interactions = 1;
  config.require_positive = false;
  config.k = 6;
  config.folds = 5;
  config.resamples = 50;
  config.states_per_trajectory = 3;
  config.seed = 1;
  return config;
}

std::map<std::string, std::string> snapshot_files(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    out[fs::relative(entry.path(), root).string()] = read_text_file(entry.path());
  }
  return out;
}

}  // namespace

TEST_CASE("end-to-end run, resume and determinism") {
  const auto dir = testutil::fresh_dir("pipeline_e2e");
  const auto input = write_world_log(dir);
  const RunConfig config = small_config(input, dir / "work");

  Pipeline pipeline(config);
  pipeline.run_all();

  const fs::path report_dir = dir / "work" / "report";
  REQUIRE(fs::exists(report_dir / "report.txt"));
  REQUIRE(fs::exists(report_dir / "report.json"));
  REQUIRE(fs::exists(report_dir / "gamma_sweep.csv"));
  for (const std::string name : {"behavior", "target", "myopic", "mixture"})
    CHECK(fs::exists(report_dir / ("rank_hist_" + name + ".csv")));

  const auto j = nlohmann::json::parse(read_text_file(report_dir / "report.json"));
  CHECK(j.at("mse_table").size() == 3);
  CHECK(j.at("value_table").size() == 5);
  CHECK(j.at("p_values").size() == 4);
  CHECK(j.at("rho_diagnostics").size() == 3);
  CHECK(j.at("rank_histograms").size() == 4);
  CHECK(j.at("gamma_sweep").at("gammas").size() == 5);
  CHECK(j.at("metadata").contains("gamma"));
  CHECK(j.at("metadata").contains("k_used"));
  CHECK(j.at("metadata").at("method") == "als");

  CHECK(pipeline.dataset().n_users() == 300);
  CHECK(pipeline.evaluate_mc() > 0.0);
  CHECK(pipeline.policy("target").kind == PolicyKind::target);
  CHECK(pipeline.policy("target").alpha > 0.0);

  const PairedComparison cmp = pipeline.compare("behavior", "target", 20, 5);
  CHECK(cmp.values_a.size() == 20);
  CHECK(cmp.test.p >= 0.0);
  CHECK(cmp.test.p <= 1.0);
  CHECK_THROWS_AS(pipeline.compare("behavior", "imagined", 20, 5), DataError);

  // A second pipeline over the same workdir skips every stage: all persisted
  // bytes stay exactly as they were.
  const auto before = snapshot_files(dir / "work");
  Pipeline resumed(config);
  resumed.run_all();
  const auto after = snapshot_files(dir / "work");
  REQUIRE(before.size() == after.size());
  for (const auto& [name, content] : before) {
    REQUIRE(after.count(name) == 1);
    CHECK(after.at(name) == content);
  }

  // Only a deleted stage record is rebuilt; upstream outputs are not touched.
  const auto model_time = fs::last_write_time(dir / "work" / "model.txt");
  const auto stats_time = fs::last_write_time(dir / "work" / "stage_stats.json");
  fs::remove(dir / "work" / "stage_report.json");
  Pipeline partial(config);
  partial.run_all();
  CHECK(fs::last_write_time(dir / "work" / "model.txt") == model_time);
  CHECK(fs::last_write_time(dir / "work" / "stage_stats.json") == stats_time);
  CHECK(read_text_file(report_dir / "report.json") == before.at("report/report.json"));

  // A separate workdir reproduces the report byte for byte.
  RunConfig config2 = config;
  config2.workdir = (dir / "work2").string();
  Pipeline second(config2);
  CHECK(second.run_hash() == Pipeline(config).run_hash());
  second.run_all();
  for (const std::string name :
       {"report.txt", "report.json", "gamma_sweep.csv", "rank_hist_target.csv"})
    CHECK(read_text_file(dir / "work2" / "report" / name) ==
          read_text_file(report_dir / name));
}

TEST_CASE("the run hash tracks config and input, not the workdir") {
  const auto dir = testutil::fresh_dir("pipeline_hash");
  const auto input = write_world_log(dir);
  const RunConfig config = small_config(input, dir / "w1");

  RunConfig moved = config;
  moved.workdir = (dir / "w2").string();
  CHECK(config_fingerprint(config) == config_fingerprint(moved));

  RunConfig other_k = config;
  other_k.k = 5;
  CHECK(config_fingerprint(other_k) != config_fingerprint(config));
  RunConfig other_seed = config;
  other_seed.seed = 2;
  CHECK(config_fingerprint(other_seed) != config_fingerprint(config));

  other_k.workdir = (dir / "w3").string();
  CHECK(Pipeline(other_k).run_hash() != Pipeline(config).run_hash());
}

TEST_CASE("a missing input log is a data error") {
  const auto dir = testutil::fresh_dir("pipeline_noinput");
  RunConfig config = small_config(dir / "nothing.csv", dir / "work");
  Pipeline pipeline(config);
  CHECK_THROWS_AS(pipeline.run_ingest(), DataError);
}

TEST_CASE("stages demand their upstream records") {
  const auto dir = testutil::fresh_dir("pipeline_order");
  const auto input = write_world_log(dir);
  Pipeline pipeline(small_config(input, dir / "work"));
  try {
    pipeline.run_evaluate();
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("missing record") != std::string::npos);
  }
}

TEST_CASE("config files parse comments, both separators and overrides") {
  const auto dir = testutil::fresh_dir("pipeline_config");
  write_text_file(dir / "run.conf",
                  "# pipeline settings\n"
                  "input = logs/in.csv\n"
                  "k = 12\n"
                  "gamma 0.85\n"
                  "require_positive = false\n"
                  "columns = user_id,item_id,reward,timestamp\n"
                  "\n"
                  "reward_scale none\n");
  const RunConfig config = load_config(dir / "run.conf");
  CHECK(config.input == "logs/in.csv");
  CHECK(config.k == 12);
  CHECK(config.gamma == 0.85);
  CHECK_FALSE(config.require_positive);
  CHECK(config.columns.size() == 4);
  CHECK(config.columns[3] == "timestamp");
  CHECK(config.reward_scale == "none");
  CHECK(config.workdir == "work");

  write_text_file(dir / "unknown.conf", "input = a.csv\nshininess = 9\n");
  try {
    load_config(dir / "unknown.conf");
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  write_text_file(dir / "badvalue.conf", "k = twenty\n");
  CHECK_THROWS_AS(load_config(dir / "badvalue.conf"), DataError);

  RunConfig overridden = config;
  set_config_key(overridden, "resamples", "75");
  CHECK(overridden.resamples == 75);
  set_config_key(overridden, "rho_clip", "2.5");
  CHECK(overridden.rho_clip == 2.5);
  CHECK_THROWS_AS(set_config_key(overridden, "nope", "1"), DataError);
}
