#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ltvrec/estimators.hpp"
#include "ltvrec/factorize.hpp"
#include "ltvrec/ingest.hpp"
#include "ltvrec/policies.hpp"
#include "ltvrec/report_gen.hpp"
#include "ltvrec/stats.hpp"

namespace ltvrec {

struct RunConfig {
  std::string input;
  std::string workdir = "work";
  std::string delimiter = ",";
  std::vector<std::string> columns;  // empty: the log starts with a header line

  int min_interactions = 20;
  bool require_positive = true;
  std::string reward_scale = "unit";  // "unit" maps rewards onto [0,1]; "none" keeps them

  std::string method = "als";  // model behind the latent states: als | svd
  int k = 20;
  double lambda = 0.1;
  int folds = 10;

  double gamma = -1.0;    // < 0: estimated as 1 - users/samples
  double epsilon = -1.0;  // < 0: trace-scaled ridge default
  double alpha = -1.0;    // < 0: largest value keeping mean KL <= target_kl
  double target_kl = 0.5;
  double beta = 1.0;
  double rho_clip = 0.0;  // 0: no clipping

  int resamples = 200;
  int states_per_trajectory = 5;
  std::uint64_t seed = 1;
};

RunConfig load_config(const std::filesystem::path& path);
void set_config_key(RunConfig& config, const std::string& key, const std::string& value);

// Canonical textual form of every setting, in a fixed key order; the basis of
// the stage-record freshness hash.
std::string config_fingerprint(const RunConfig& config);

// Linear stage chain over a work directory. Every stage persists a record
// carrying the run hash (config fingerprint + input content hash); a stage
// whose record and outputs are present with a matching hash is skipped.
class Pipeline {
public:
  explicit Pipeline(RunConfig config);

  const RunConfig& config() const { return config_; }
  std::filesystem::path workdir() const { return workdir_; }
  std::string run_hash();

  void run_ingest();
  void run_factorize();
  void run_states();
  void run_behavior();
  void run_evaluate();
  void run_improve();
  void run_offpolicy();
  void run_stats();
  void run_report();
  void run_all();

  // Assembles the report purely from persisted stage records.
  PipelineReport build_report();

  // Monte-Carlo value of the logged data at the dataset gamma.
  double evaluate_mc();

  // Paired bootstrap comparison of two policy value estimates; names are
  // behavior_mc, behavior, target, myopic or mixture.
  PairedComparison compare(const std::string& baseline, const std::string& contender,
                           int resamples, std::uint64_t seed);

  const Dataset& dataset();
  const LatentModel& model();
  const TrajectoryBatch& trajectories();
  PolicyParams policy(const std::string& name);

private:
  struct PolicyValueCache {
    std::vector<UserMoments> moments;
    std::string kind;
  };

  std::string input_hash();
  bool stage_fresh(const std::string& stage, const std::vector<std::string>& outputs);
  void write_stage_record(const std::string& stage, std::string payload_json);
  std::string require_stage(const std::string& stage) const;  // returns record text

  Evaluator make_evaluator(const std::string& name);
  const PolicyValueCache& value_cache(const std::string& name);
  const std::vector<double>& discounted_user_sums();

  RunConfig config_;
  std::filesystem::path workdir_;
  std::optional<std::string> run_hash_;
  std::optional<std::string> input_hash_;
  std::optional<Dataset> dataset_;
  std::optional<LatentModel> model_;
  std::optional<TrajectoryBatch> trajectories_;
  std::optional<TransitionBatch> value_batch_;
  std::map<std::string, PolicyParams> policies_;
  std::map<std::string, PolicyValueCache> value_caches_;
  std::optional<std::vector<double>> discounted_sums_;

  const TransitionBatch& value_batch();
};

}  // namespace ltvrec
