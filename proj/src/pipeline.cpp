#include "ltvrec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ltvrec/io.hpp"
#include "ltvrec/report_gen.hpp"
#include "ltvrec/rng.hpp"
#include "ltvrec/state_builder.hpp"

namespace ltvrec {

namespace {

using nlohmann::json;

std::string trim_copy(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw DataError("config key '" + key + "': unparseable number '" + value + "'");
  }
}

long long to_ll(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const long long out = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw DataError("config key '" + key + "': unparseable integer '" + value + "'");
  }
}

bool to_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw DataError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

std::string hex64(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << x;
  return os.str();
}

json parse_json_text(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const std::exception& e) {
    throw DataError(where + ": malformed record: " + e.what());
  }
}

json bootstrap_to_json(const BootstrapResult& r) {
  return json{{"values", r.values},
              {"mean", r.mean},
              {"half_width", r.half_width},
              {"b", r.b},
              {"seed", r.seed}};
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  RunConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim_copy(line);
    if (line.empty()) continue;
    std::string key, value;
    const std::size_t eq = line.find('=');
    if (eq != std::string::npos) {
      key = trim_copy(line.substr(0, eq));
      value = trim_copy(line.substr(eq + 1));
    } else {
      const std::size_t ws = line.find_first_of(" \t");
      if (ws == std::string::npos)
        throw DataError("config line " + std::to_string(line_no) + ": expected key value");
      key = trim_copy(line.substr(0, ws));
      value = trim_copy(line.substr(ws + 1));
    }
    try {
      set_config_key(config, key, value);
    } catch (const DataError& e) {
      throw DataError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

void set_config_key(RunConfig& config, const std::string& key, const std::string& value) {
  if (key == "input") config.input = value;
  else if (key == "workdir") config.workdir = value;
  else if (key == "delimiter") config.delimiter = value;
  else if (key == "columns") {
    config.columns.clear();
    std::istringstream is(value);
    std::string col;
    while (std::getline(is, col, ',')) {
      col = trim_copy(col);
      if (!col.empty()) config.columns.push_back(col);
    }
  }
  else if (key == "min_interactions") config.min_interactions = static_cast<int>(to_ll(value, key));
  else if (key == "require_positive") config.require_positive = to_bool(value, key);
  else if (key == "reward_scale") config.reward_scale = value;
  else if (key == "method") config.method = value;
  else if (key == "k") config.k = static_cast<int>(to_ll(value, key));
  else if (key == "lambda") config.lambda = to_double(value, key);
  else if (key == "folds") config.folds = static_cast<int>(to_ll(value, key));
  else if (key == "gamma") config.gamma = to_double(value, key);
  else if (key == "epsilon") config.epsilon = to_double(value, key);
  else if (key == "alpha") config.alpha = to_double(value, key);
  else if (key == "target_kl") config.target_kl = to_double(value, key);
  else if (key == "beta") config.beta = to_double(value, key);
  else if (key == "rho_clip") config.rho_clip = to_double(value, key);
  else if (key == "resamples") config.resamples = static_cast<int>(to_ll(value, key));
  else if (key == "states_per_trajectory") config.states_per_trajectory = static_cast<int>(to_ll(value, key));
  else if (key == "seed") config.seed = static_cast<std::uint64_t>(to_ll(value, key));
  else throw DataError("unknown config key '" + key + "'");
}

std::string config_fingerprint(const RunConfig& c) {
  std::ostringstream os;
  os << "input=" << c.input << '\n';
  os << "delimiter=" << c.delimiter << '\n';
  os << "columns=";
  for (std::size_t i = 0; i < c.columns.size(); ++i)
    os << (i ? "," : "") << c.columns[i];
  os << '\n';
  os << "min_interactions=" << c.min_interactions << '\n';
  os << "require_positive=" << (c.require_positive ? "true" : "false") << '\n';
  os << "reward_scale=" << c.reward_scale << '\n';
  os << "method=" << c.method << '\n';
  os << "k=" << c.k << '\n';
  os << "lambda=" << dtos(c.lambda) << '\n';
  os << "folds=" << c.folds << '\n';
  os << "gamma=" << dtos(c.gamma) << '\n';
  os << "epsilon=" << dtos(c.epsilon) << '\n';
  os << "alpha=" << dtos(c.alpha) << '\n';
  os << "target_kl=" << dtos(c.target_kl) << '\n';
  os << "beta=" << dtos(c.beta) << '\n';
  os << "rho_clip=" << dtos(c.rho_clip) << '\n';
  os << "resamples=" << c.resamples << '\n';
  os << "states_per_trajectory=" << c.states_per_trajectory << '\n';
  os << "seed=" << c.seed << '\n';
  return os.str();
}

Pipeline::Pipeline(RunConfig config)
    : config_(std::move(config)), workdir_(config_.workdir) {
  if (config_.workdir.empty()) throw DataError("workdir must be set");
  std::filesystem::create_directories(workdir_);
}

std::string Pipeline::input_hash() {
  if (input_hash_) return *input_hash_;
  if (!config_.input.empty() && std::filesystem::exists(config_.input)) {
    input_hash_ = hex64(fnv1a(read_text_file(config_.input)));
    return *input_hash_;
  }
  const auto ingest_record = workdir_ / "stage_ingest.json";
  if (std::filesystem::exists(ingest_record)) {
    const json j = parse_json_text(read_text_file(ingest_record), "stage_ingest.json");
    if (j.contains("input_hash")) {
      input_hash_ = j["input_hash"].get<std::string>();
      return *input_hash_;
    }
  }
  throw DataError("input log '" + config_.input + "' not found");
}

std::string Pipeline::run_hash() {
  if (!run_hash_) run_hash_ = hex64(fnv1a(config_fingerprint(config_) + "\x1f" + input_hash()));
  return *run_hash_;
}

bool Pipeline::stage_fresh(const std::string& stage,
                           const std::vector<std::string>& outputs) {
  const auto record = workdir_ / ("stage_" + stage + ".json");
  if (!std::filesystem::exists(record)) return false;
  json j;
  try {
    j = parse_json_text(read_text_file(record), record.string());
  } catch (const DataError&) {
    return false;
  }
  if (!j.contains("run_hash") || j["run_hash"].get<std::string>() != run_hash())
    return false;
  for (const auto& out : outputs)
    if (!std::filesystem::exists(workdir_ / out)) return false;
  std::cout << stage << ": skipped (record up to date)\n";
  return true;
}

void Pipeline::write_stage_record(const std::string& stage, std::string payload_json) {
  json j = parse_json_text(payload_json, "stage payload");
  j["stage"] = stage;
  j["run_hash"] = run_hash();
  write_text_file(workdir_ / ("stage_" + stage + ".json"), j.dump(2) + "\n");
}

std::string Pipeline::require_stage(const std::string& stage) const {
  const auto record = workdir_ / ("stage_" + stage + ".json");
  if (!std::filesystem::exists(record))
    throw DataError("missing record for stage '" + stage + "' in " + workdir_.string() +
                    "; run that stage first");
  return read_text_file(record);
}

const Dataset& Pipeline::dataset() {
  if (dataset_) return *dataset_;
  const json meta = parse_json_text(require_stage("ingest"), "stage_ingest.json");
  const auto records = parse_log(workdir_ / "dataset.csv");
  Dataset ds = filter_users(records, 1, false);
  ds.gamma = meta.at("gamma").get<double>();
  ds.users_before_filter = meta.at("users_before_filter").get<long long>();
  ds.users_after_count_filter = meta.at("users_after_count_filter").get<long long>();
  ds.users_after_click_filter = meta.at("users_after_click_filter").get<long long>();
  ds.reward_scale.applied = meta.at("reward_scale_applied").get<bool>();
  ds.reward_scale.observed_min = meta.at("reward_observed_min").get<double>();
  ds.reward_scale.observed_max = meta.at("reward_observed_max").get<double>();
  dataset_ = std::move(ds);
  return *dataset_;
}

const LatentModel& Pipeline::model() {
  if (model_) return *model_;
  require_stage("factorize");
  model_ = load_model(workdir_ / "model.txt");
  return *model_;
}

const TrajectoryBatch& Pipeline::trajectories() {
  if (trajectories_) return *trajectories_;
  require_stage("states");
  TrajectoryBatch batch = load_trajectories(workdir_ / "trajectories.csv");
  batch.lambda = model().lambda > 0.0 ? model().lambda : 0.1;
  trajectories_ = std::move(batch);
  return *trajectories_;
}

PolicyParams Pipeline::policy(const std::string& name) {
  const auto found = policies_.find(name);
  if (found != policies_.end()) return found->second;
  std::string file;
  if (name == "behavior") {
    require_stage("behavior");
    file = "policy_behavior.json";
  } else if (name == "target" || name == "myopic" || name == "mixture") {
    require_stage("improve");
    file = "policy_" + name + ".json";
  } else {
    throw DataError("unknown policy '" + name + "'");
  }
  const PolicyParams p = load_policy(workdir_ / file);
  policies_[name] = p;
  return p;
}

const TransitionBatch& Pipeline::value_batch() {
  if (!value_batch_) value_batch_ = state_value_batch(trajectories());
  return *value_batch_;
}

const std::vector<double>& Pipeline::discounted_user_sums() {
  if (discounted_sums_) return *discounted_sums_;
  const Dataset& ds = dataset();
  std::vector<double> sums;
  sums.reserve(ds.logs.size());
  for (const auto& log : ds.logs) {
    double discount = 1.0;
    double total = 0.0;
    for (const auto& event : log.events) {
      total += discount * event.reward;
      discount *= ds.gamma;
    }
    sums.push_back(total);
  }
  discounted_sums_ = std::move(sums);
  return *discounted_sums_;
}

const Pipeline::PolicyValueCache& Pipeline::value_cache(const std::string& name) {
  const auto found = value_caches_.find(name);
  if (found != value_caches_.end()) return found->second;
  const double gamma = dataset().gamma;
  const int n_users = trajectories().n_users();
  PolicyValueCache cache;
  if (name == "behavior") {
    cache.kind = "onpolicy";
    cache.moments = per_user_moments(value_batch(), gamma, n_users);
  } else {
    cache.kind = "offpolicy";
    const TransitionBatch weighted = with_importance_weights(
        value_batch(), model().V, policy(name), policy("behavior"), config_.rho_clip);
    cache.moments = per_user_moments(weighted, gamma, n_users);
  }
  return value_caches_[name] = std::move(cache);
}

Evaluator Pipeline::make_evaluator(const std::string& name) {
  if (name == "behavior_mc") {
    const std::vector<double>& sums = discounted_user_sums();
    return [&sums](const Resample& resample) {
      double total = 0.0;
      for (int u : resample.users) total += sums[static_cast<std::size_t>(u)];
      return total / static_cast<double>(resample.users.size());
    };
  }
  const PolicyValueCache& cache = value_cache(name);
  const TrajectoryBatch& traj = trajectories();
  const double gamma = dataset().gamma;
  const double epsilon = config_.epsilon;
  const int per_traj = config_.states_per_trajectory;
  return [this, &cache, &traj, gamma, epsilon, per_traj](const Resample& resample) {
    const int d = cache.moments.empty() ? 0 : static_cast<int>(cache.moments[0].b.size());
    Mat a = Mat::Zero(d, d);
    Vec b = Vec::Zero(d);
    std::vector<int> mult(cache.moments.size(), 0);
    for (int u : resample.users) ++mult[static_cast<std::size_t>(u)];
    for (std::size_t u = 0; u < cache.moments.size(); ++u) {
      if (mult[u] == 0) continue;
      const double m = static_cast<double>(mult[u]);
      a.noalias() += m * cache.moments[u].a;
      b.noalias() += m * cache.moments[u].b;
    }
    const Vec theta = solve_from_moments(a, b, gamma, epsilon, cache.kind).theta;
    const std::vector<Vec> states =
        sample_states(traj, resample.users, per_traj, resample.seed);
    return value_from_theta(theta, states);
  };
}

void Pipeline::run_ingest() {
  if (stage_fresh("ingest", {"dataset.csv"})) return;
  FormatConfig format;
  format.delimiter = config_.delimiter;
  format.columns = config_.columns;
  const auto records = parse_log(config_.input, format);
  Dataset ds = filter_users(records, config_.min_interactions, config_.require_positive);
  ds.gamma = config_.gamma >= 0.0 ? config_.gamma : estimate_gamma(ds);
  if (config_.reward_scale == "unit") {
    ds = scale_rewards(ds);
  } else if (config_.reward_scale != "none") {
    throw DataError("reward_scale must be 'unit' or 'none'");
  }
  save_dataset(ds, workdir_ / "dataset.csv");
  json j;
  j["input_hash"] = input_hash();
  j["users_before_filter"] = ds.users_before_filter;
  j["users_after_count_filter"] = ds.users_after_count_filter;
  j["users_after_click_filter"] = ds.users_after_click_filter;
  j["n_users"] = ds.n_users();
  j["n_items"] = ds.n_items();
  j["n_samples"] = ds.n_samples;
  j["gamma"] = ds.gamma;
  j["reward_scale_applied"] = ds.reward_scale.applied;
  j["reward_observed_min"] = ds.reward_scale.observed_min;
  j["reward_observed_max"] = ds.reward_scale.observed_max;
  write_stage_record("ingest", j.dump());
  dataset_ = std::move(ds);
  std::cout << "ingest: " << dataset_->n_users() << " users, " << dataset_->n_samples
            << " events, " << dataset_->n_items() << " items, gamma "
            << dataset_->gamma << "\n";
}

void Pipeline::run_factorize() {
  if (stage_fresh("factorize", {"model.txt"})) return;
  const Dataset& ds = dataset();
  const SparseRatings ratings = ratings_from_dataset(ds);
  const int k_used =
      std::min(config_.k, std::min(ratings.n_rows, ratings.n_cols));
  if (k_used < 1) throw DataError("factorize: dataset too small for any latent factor");

  json cv_table = json::object();
  for (const FactorMethod method :
       {FactorMethod::als, FactorMethod::svd, FactorMethod::mean}) {
    const std::string name = method_name(method);
    const CvResult cv =
        cross_validate(ratings, method, k_used, config_.lambda, config_.folds,
                       derive_seed(config_.seed, "cv-" + name));
    cv_table[name] = {{"fold_mse", cv.fold_mse}, {"mean", cv.mean}, {"sd", cv.sd}};
  }

  LatentModel model;
  json extras = json::object();
  if (config_.method == "als") {
    const AlsResult result = als_fit(ratings, k_used, config_.lambda,
                                     derive_seed(config_.seed, "factorize"));
    model = result.model;
    extras["objective"] = result.objective;
  } else if (config_.method == "svd") {
    SvdOptions options;
    options.seed = derive_seed(config_.seed, "factorize");
    model = svd_fit(ratings, k_used, options);
  } else if (config_.method == "mean") {
    throw DataError("the mean predictor has no latent vectors; use als or svd");
  } else {
    throw DataError("unknown factorization method '" + config_.method + "'");
  }
  save_model(model, workdir_ / "model.txt");
  json j;
  j["cv"] = cv_table;
  j["k_used"] = k_used;
  j["method"] = config_.method;
  j["extras"] = extras;
  write_stage_record("factorize", j.dump());
  model_ = std::move(model);
  std::cout << "factorize: method " << config_.method << ", k " << k_used << "\n";
}

void Pipeline::run_states() {
  if (stage_fresh("states", {"trajectories.csv"})) return;
  TrajectoryBatch batch = build_trajectories(dataset(), model());
  save_trajectories(batch, workdir_ / "trajectories.csv");
  json j;
  j["n_users"] = batch.n_users();
  j["n_steps"] = batch.n_steps();
  j["k"] = batch.k;
  write_stage_record("states", j.dump());
  std::cout << "states: " << batch.n_users() << " trajectories, " << batch.n_steps()
            << " steps\n";
  trajectories_ = std::move(batch);
}

void Pipeline::run_behavior() {
  if (stage_fresh("behavior", {"policy_behavior.json"})) return;
  BehaviorFitOptions options;
  options.seed = derive_seed(config_.seed, "behavior-fit");
  const PolicyParams fit = fit_behavior_policy(trajectories(), model().V, options);
  save_policy(fit, workdir_ / "policy_behavior.json");
  json j;
  j["c"] = fit.c;
  write_stage_record("behavior", j.dump());
  policies_["behavior"] = fit;
  std::cout << "behavior: softmax scale " << fit.c << "\n";
}

void Pipeline::run_evaluate() {
  if (stage_fresh("evaluate", {"value_onpolicy.json", "q_weights.json",
                               "q_weights_myopic.json"})) return;
  const double gamma = dataset().gamma;
  const Mat& catalog = model().V;
  const ValueWeights theta_v = lstd(value_batch(), gamma, config_.epsilon);
  save_value_weights(theta_v, workdir_ / "value_onpolicy.json");
  const TransitionBatch qb = q_batch(trajectories(), catalog);
  const ValueWeights theta_q = lstdq(qb, gamma, config_.epsilon);
  save_value_weights(theta_q, workdir_ / "q_weights.json");
  const ValueWeights theta_myopic = lstdq(qb, 0.0, config_.epsilon);
  save_value_weights(theta_myopic, workdir_ / "q_weights_myopic.json");
  const double mc = monte_carlo_value(trajectories(), gamma);
  json j;
  j["gamma"] = gamma;
  j["epsilon_onpolicy"] = theta_v.epsilon;
  j["epsilon_q"] = theta_q.epsilon;
  j["mc_value"] = mc;
  write_stage_record("evaluate", j.dump());
  std::cout << "evaluate: mc value " << mc << "\n";
}

void Pipeline::run_improve() {
  if (stage_fresh("improve", {"policy_target.json", "policy_myopic.json",
                              "policy_mixture.json"})) return;
  require_stage("evaluate");
  const PolicyParams behavior = policy("behavior");
  const Mat& catalog = model().V;
  const Vec theta_q = load_value_weights(workdir_ / "q_weights.json").weights.theta;
  const Vec theta_myopic =
      load_value_weights(workdir_ / "q_weights_myopic.json").weights.theta;

  std::vector<Vec> kl_states = sample_states(
      trajectories(), config_.states_per_trajectory, derive_seed(config_.seed, "kl-states"));
  if (kl_states.size() > 1000) kl_states.resize(1000);

  const double alpha =
      config_.alpha > 0.0
          ? config_.alpha
          : choose_alpha_for_kl(theta_q, behavior, kl_states, catalog, config_.target_kl);
  PolicyParams target = make_target_policy(theta_q, alpha);
  const double kl_target = mean_state_kl(target, behavior, kl_states, catalog);

  const double alpha_myopic =
      config_.alpha > 0.0
          ? config_.alpha
          : choose_alpha_for_kl(theta_myopic, behavior, kl_states, catalog,
                                config_.target_kl);
  PolicyParams myopic = make_target_policy(theta_myopic, alpha_myopic);
  myopic.kind = PolicyKind::myopic;
  const double kl_myopic = mean_state_kl(myopic, behavior, kl_states, catalog);

  const PolicyParams mixture = mix_policies(target, behavior, config_.beta);

  save_policy(target, workdir_ / "policy_target.json");
  save_policy(myopic, workdir_ / "policy_myopic.json");
  save_policy(mixture, workdir_ / "policy_mixture.json");
  json j;
  j["alpha"] = alpha;
  j["alpha_myopic"] = alpha_myopic;
  j["kl_target"] = kl_target;
  j["kl_myopic"] = kl_myopic;
  j["beta"] = config_.beta;
  j["kl_states"] = kl_states.size();
  write_stage_record("improve", j.dump());
  policies_["target"] = target;
  policies_["myopic"] = myopic;
  policies_["mixture"] = mixture;
  std::cout << "improve: alpha " << alpha << " (mean kl " << kl_target << "), myopic alpha "
            << alpha_myopic << ", beta " << config_.beta << "\n";
}

void Pipeline::run_offpolicy() {
  if (stage_fresh("offpolicy", {"value_target.json", "value_myopic.json",
                                "value_mixture.json"})) return;
  const double gamma = dataset().gamma;
  const Mat& catalog = model().V;
  const PolicyParams behavior = policy("behavior");
  json ess = json::object();
  for (const std::string name : {"target", "myopic", "mixture"}) {
    const OffPolicyResult result =
        off_policy_lstd(value_batch(), catalog, policy(name), behavior, gamma,
                        config_.epsilon, config_.rho_clip);
    save_value_weights(result.weights, workdir_ / ("value_" + name + ".json"),
                       &result.rho);
    ess[name] = result.rho.ess;
  }
  json j;
  j["ess"] = ess;
  write_stage_record("offpolicy", j.dump());
  std::cout << "offpolicy: evaluated target, myopic, mixture\n";
}

void Pipeline::run_stats() {
  if (stage_fresh("stats", {})) return;
  require_stage("offpolicy");
  const int n_users = trajectories().n_users();
  const std::uint64_t stats_seed = derive_seed(config_.seed, "stats");
  const std::vector<std::string> names = {"behavior_mc", "behavior", "target", "myopic",
                                          "mixture"};
  std::map<std::string, BootstrapResult> results;
  json boot = json::object();
  for (const auto& name : names) {
    const Evaluator evaluator = make_evaluator(name);
    results[name] = bootstrap_value(n_users, evaluator, config_.resamples, stats_seed);
    boot[name] = bootstrap_to_json(results[name]);
  }

  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"behavior", "target"},
      {"myopic", "target"},
      {"behavior", "myopic"},
      {"behavior", "mixture"}};
  json comparisons = json::array();
  for (const auto& [baseline, contender] : pairs) {
    const auto& a = results[baseline].values;
    const auto& b = results[contender].values;
    std::vector<double> diffs(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diffs[i] = b[i] - a[i];
    const WilcoxonResult test = wilcoxon_test(diffs);
    comparisons.push_back({{"baseline", baseline},
                           {"contender", contender},
                           {"p", test.p},
                           {"n", test.n},
                           {"w_plus", test.w_plus},
                           {"exact", test.exact}});
  }

  json hists = json::array();
  for (const std::string name : {"behavior", "target", "myopic", "mixture"}) {
    const RankHistogram hist =
        rank_histogram(trajectories(), model().V, policy(name), name);
    hists.push_back({{"policy", hist.policy},
                     {"n_items", hist.n_items},
                     {"total", hist.total},
                     {"counts", hist.counts}});
  }

  std::set<double> grid_set = {0.0, 0.5, 0.9, 0.99, dataset().gamma};
  std::vector<double> grid(grid_set.begin(), grid_set.end());
  const GammaSweepResult sweep =
      gamma_sweep(trajectories(), model().V, grid, config_.epsilon);
  json sweep_json;
  sweep_json["gammas"] = sweep.gammas;
  sweep_json["k"] = sweep.k;
  json rows = json::array();
  for (Eigen::Index g = 0; g < sweep.log_abs.rows(); ++g) {
    json row = json::array();
    for (Eigen::Index i = 0; i < sweep.log_abs.cols(); ++i) {
      const double v = sweep.log_abs(g, i);
      if (std::isinf(v))
        row.push_back(nullptr);
      else
        row.push_back(v);
    }
    rows.push_back(row);
  }
  sweep_json["log_abs"] = rows;

  json j;
  j["bootstrap"] = boot;
  j["comparisons"] = comparisons;
  j["histograms"] = hists;
  j["sweep"] = sweep_json;
  write_stage_record("stats", j.dump());
  std::cout << "stats: " << config_.resamples << " resamples over " << names.size()
            << " policies\n";
}

PipelineReport Pipeline::build_report() {
  const json ingest = parse_json_text(require_stage("ingest"), "stage_ingest.json");
  const json factorize = parse_json_text(require_stage("factorize"), "stage_factorize.json");
  const json behavior = parse_json_text(require_stage("behavior"), "stage_behavior.json");
  const json evaluate = parse_json_text(require_stage("evaluate"), "stage_evaluate.json");
  const json improve = parse_json_text(require_stage("improve"), "stage_improve.json");
  const json stats = parse_json_text(require_stage("stats"), "stage_stats.json");

  PipelineReport report;
  for (const std::string name : {"als", "svd", "mean"}) {
    MseRow row;
    row.method = name;
    row.mean = factorize.at("cv").at(name).at("mean").get<double>();
    row.sd = factorize.at("cv").at(name).at("sd").get<double>();
    report.mse_table.push_back(row);
  }

  for (const std::string name : {"behavior_mc", "behavior", "target", "myopic",
                                 "mixture"}) {
    ValueRow row;
    row.policy = name;
    row.mean = stats.at("bootstrap").at(name).at("mean").get<double>();
    row.half_width = stats.at("bootstrap").at(name).at("half_width").get<double>();
    report.value_table.push_back(row);
  }

  for (const auto& c : stats.at("comparisons")) {
    PValueRow row;
    row.baseline = c.at("baseline").get<std::string>();
    row.contender = c.at("contender").get<std::string>();
    row.p = c.at("p").get<double>();
    row.n = c.at("n").get<int>();
    report.p_values.push_back(row);
  }

  for (const std::string name : {"target", "myopic", "mixture"}) {
    const StoredValue stored = load_value_weights(workdir_ / ("value_" + name + ".json"));
    if (stored.has_rho) report.rho_table.push_back(RhoRow{name, stored.rho});
  }

  for (const auto& h : stats.at("histograms")) {
    RankHistogram hist;
    hist.policy = h.at("policy").get<std::string>();
    hist.n_items = h.at("n_items").get<int>();
    hist.total = h.at("total").get<long long>();
    hist.counts = h.at("counts").get<std::vector<long long>>();
    report.histograms.push_back(std::move(hist));
  }

  const json& sweep = stats.at("sweep");
  report.sweep.gammas = sweep.at("gammas").get<std::vector<double>>();
  report.sweep.k = sweep.at("k").get<int>();
  const auto& rows = sweep.at("log_abs");
  report.sweep.log_abs.resize(static_cast<Eigen::Index>(rows.size()),
                              static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
  for (Eigen::Index g = 0; g < report.sweep.log_abs.rows(); ++g)
    for (Eigen::Index i = 0; i < report.sweep.log_abs.cols(); ++i) {
      const auto& cell = rows[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)];
      report.sweep.log_abs(g, i) = cell.is_null()
                                       ? -std::numeric_limits<double>::infinity()
                                       : cell.get<double>();
    }

  std::map<std::string, std::string> meta;
  meta["alpha"] = dtos(improve.at("alpha").get<double>());
  meta["alpha_myopic"] = dtos(improve.at("alpha_myopic").get<double>());
  meta["behavior_softmax_scale"] = dtos(behavior.at("c").get<double>());
  meta["beta"] = dtos(improve.at("beta").get<double>());
  meta["folds"] = std::to_string(config_.folds);
  meta["gamma"] = dtos(ingest.at("gamma").get<double>());
  meta["k_used"] = std::to_string(factorize.at("k_used").get<int>());
  meta["kl_myopic"] = dtos(improve.at("kl_myopic").get<double>());
  meta["kl_target"] = dtos(improve.at("kl_target").get<double>());
  meta["lambda"] = dtos(config_.lambda);
  meta["mc_value"] = dtos(evaluate.at("mc_value").get<double>());
  meta["method"] = factorize.at("method").get<std::string>();
  meta["min_interactions"] = std::to_string(config_.min_interactions);
  meta["n_items"] = std::to_string(ingest.at("n_items").get<long long>());
  meta["n_samples"] = std::to_string(ingest.at("n_samples").get<long long>());
  meta["n_users"] = std::to_string(ingest.at("n_users").get<long long>());
  meta["resamples"] = std::to_string(config_.resamples);
  meta["reward_scale_applied"] =
      ingest.at("reward_scale_applied").get<bool>() ? "true" : "false";
  meta["rho_clip"] = dtos(config_.rho_clip);
  meta["seed"] = std::to_string(config_.seed);
  meta["states_per_trajectory"] = std::to_string(config_.states_per_trajectory);
  meta["users_after_count_filter"] =
      std::to_string(ingest.at("users_after_count_filter").get<long long>());
  meta["users_after_click_filter"] =
      std::to_string(ingest.at("users_after_click_filter").get<long long>());
  meta["users_before_filter"] =
      std::to_string(ingest.at("users_before_filter").get<long long>());
  for (const auto& [key, value] : meta) report.metadata.push_back({key, value});
  return report;
}

void Pipeline::run_report() {
  if (stage_fresh("report", {"report/report.txt", "report/report.json",
                             "report/gamma_sweep.csv"})) return;
  emit_report(build_report(), workdir_ / "report");
  write_stage_record("report", "{}");
  std::cout << "report: written to " << (workdir_ / "report").string() << "\n";
}

void Pipeline::run_all() {
  run_ingest();
  run_factorize();
  run_states();
  run_behavior();
  run_evaluate();
  run_improve();
  run_offpolicy();
  run_stats();
  run_report();
}

double Pipeline::evaluate_mc() {
  const Dataset& ds = dataset();
  std::vector<std::vector<double>> rewards;
  rewards.reserve(ds.logs.size());
  for (const auto& log : ds.logs) {
    std::vector<double> r;
    r.reserve(log.events.size());
    for (const auto& event : log.events) r.push_back(event.reward);
    rewards.push_back(std::move(r));
  }
  return monte_carlo_value(rewards, ds.gamma);
}

PairedComparison Pipeline::compare(const std::string& baseline,
                                   const std::string& contender, int resamples,
                                   std::uint64_t seed) {
  const Evaluator a = make_evaluator(baseline);
  const Evaluator b = make_evaluator(contender);
  return compare_policies(trajectories().n_users(), a, b, resamples, seed);
}

}  // namespace ltvrec
