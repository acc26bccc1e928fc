#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ltvrec/io.hpp"
#include "ltvrec/pipeline.hpp"
#include "ltvrec/rng.hpp"
#include "ltvrec/simulator.hpp"

namespace {

using ltvrec::DataError;
using ltvrec::NumericError;
using ltvrec::RunConfig;

struct ConfigCapture {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;  // parse order
};

void add_config_flags(CLI::App* cmd, ConfigCapture& capture) {
  cmd->add_option("--config", capture.config_path, "flat key=value settings file");
  static const std::vector<std::pair<std::string, std::string>> flags = {
      {"--input", "input"},
      {"--workdir", "workdir"},
      {"--delimiter", "delimiter"},
      {"--columns", "columns"},
      {"--min-interactions", "min_interactions"},
      {"--require-positive", "require_positive"},
      {"--reward-scale", "reward_scale"},
      {"--method", "method"},
      {"--k", "k"},
      {"--lambda", "lambda"},
      {"--folds", "folds"},
      {"--gamma", "gamma"},
      {"--epsilon", "epsilon"},
      {"--alpha", "alpha"},
      {"--target-kl", "target_kl"},
      {"--beta", "beta"},
      {"--rho-clip", "rho_clip"},
      {"--resamples", "resamples"},
      {"--states-per-trajectory", "states_per_trajectory"},
      {"--seed", "seed"},
  };
  for (const auto& [flag, key] : flags) {
    const std::string name = key;
    cmd->add_option_function<std::string>(
        flag,
        [&capture, name](const std::string& value) {
          capture.overrides.emplace_back(name, value);
        },
        "config key " + name);
  }
}

RunConfig build_config(const ConfigCapture& capture) {
  RunConfig config;
  if (!capture.config_path.empty()) config = ltvrec::load_config(capture.config_path);
  for (const auto& [key, value] : capture.overrides)
    ltvrec::set_config_key(config, key, value);
  return config;
}

ltvrec::Mat uniform_policy(int n_states, int n_actions) {
  return ltvrec::Mat::Constant(n_states, n_actions, 1.0 / n_actions);
}

ltvrec::SidecarTruth tabular_truth(const ltvrec::TabularMDP& mdp,
                                   const ltvrec::Mat& behavior) {
  ltvrec::SidecarTruth truth;
  truth.gamma = mdp.gamma;
  truth.mean_episode_length = 1.0 / (1.0 - mdp.gamma);
  truth.j_behavior = ltvrec::exact_value(mdp, behavior).j;
  truth.j_myopic_greedy = ltvrec::exact_value(mdp, ltvrec::greedy_policy(mdp.r)).j;
  ltvrec::Mat policy = behavior;
  for (int round = 0; round < 100; ++round) {
    const ltvrec::Mat next = ltvrec::greedy_policy(ltvrec::exact_q(mdp, policy));
    if (next == policy) break;
    policy = next;
  }
  truth.j_ltv_greedy = ltvrec::exact_value(mdp, policy).j;
  return truth;
}

void write_truth(const ltvrec::SidecarTruth& truth,
                 const std::vector<std::vector<double>>* behavior_probabilities,
                 int first_poison_item, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "ltvrec-truth";
  j["gamma"] = truth.gamma;
  j["mean_episode_length"] = truth.mean_episode_length;
  j["j_behavior"] = truth.j_behavior;
  j["j_myopic_greedy"] = truth.j_myopic_greedy;
  j["j_ltv_greedy"] = truth.j_ltv_greedy;
  if (first_poison_item >= 0) j["first_poison_item"] = first_poison_item;
  if (behavior_probabilities) j["behavior_probabilities"] = *behavior_probabilities;
  ltvrec::write_text_file(path, j.dump(2) + "\n");
}

int run_simulate(const std::string& world, int users, std::uint64_t seed,
                 const std::string& out, std::string truth_path) {
  if (truth_path.empty()) truth_path = out + ".truth.json";
  if (world == "tabular") {
    const ltvrec::TabularMDP mdp = ltvrec::random_mdp(6, 4, 0.9, seed);
    const ltvrec::Mat behavior = uniform_policy(mdp.n_states, mdp.n_actions);
    const ltvrec::Dataset dataset = ltvrec::generate_log(mdp, behavior, users, seed);
    ltvrec::save_dataset(dataset, out);
    write_truth(tabular_truth(mdp, behavior), nullptr, -1, truth_path);
    std::cout << "simulate: tabular, " << dataset.n_users() << " users, "
              << dataset.n_samples << " events -> " << out << "\n";
    return 0;
  }
  if (world == "latent") {
    const ltvrec::SelfPreservationWorld scenario =
        ltvrec::make_self_preservation_world(seed);
    const ltvrec::GeneratedLog log =
        ltvrec::generate_log(scenario.world, scenario.behavior, users, seed);
    ltvrec::save_dataset(log.dataset, out);
    write_truth(ltvrec::sidecar_truth(scenario.world, scenario.behavior),
                &log.behavior_probabilities, scenario.first_poison_item, truth_path);
    std::cout << "simulate: latent, " << log.dataset.n_users() << " users, "
              << log.dataset.n_samples << " events -> " << out << "\n";
    return 0;
  }
  std::cerr << "unknown world '" << world << "' (expected tabular or latent)\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline lifetime-value policy pipeline for recommender logs"};
  app.require_subcommand(1);

  ConfigCapture capture;

  CLI::App* cmd_ingest = app.add_subcommand("ingest", "parse, filter and scale the log");
  CLI::App* cmd_factorize =
      app.add_subcommand("factorize", "cross-validate and fit the latent model");
  CLI::App* cmd_states =
      app.add_subcommand("build-states", "latent state trajectories from history prefixes");
  CLI::App* cmd_behavior =
      app.add_subcommand("fit-behavior", "softmax fit of the logging policy");
  CLI::App* cmd_evaluate =
      app.add_subcommand("evaluate", "on-policy value and Q weights of the logged policy");
  CLI::App* cmd_improve =
      app.add_subcommand("improve", "target, myopic and mixture policies from the Q weights");
  CLI::App* cmd_compare = app.add_subcommand(
      "compare", "off-policy values, bootstrap intervals and signed-rank tests");
  CLI::App* cmd_report = app.add_subcommand("report", "assemble the report files");
  CLI::App* cmd_run_all = app.add_subcommand("run-all", "the full stage chain");
  for (CLI::App* cmd : {cmd_ingest, cmd_factorize, cmd_states, cmd_behavior, cmd_evaluate,
                        cmd_improve, cmd_compare, cmd_report, cmd_run_all})
    add_config_flags(cmd, capture);

  std::string compare_baseline, compare_contender;
  cmd_compare->add_option("--baseline", compare_baseline,
                          "ad-hoc comparison baseline (behavior_mc, behavior, target, "
                          "myopic, mixture)");
  cmd_compare->add_option("--contender", compare_contender, "ad-hoc comparison contender");

  std::string report_out;
  cmd_report->add_option("--out", report_out,
                         "write the report here instead of <workdir>/report");

  CLI::App* cmd_simulate =
      app.add_subcommand("simulate", "generate a synthetic log with a truth sidecar");
  std::string sim_world = "latent";
  int sim_users = 2000;
  std::uint64_t sim_seed = 7;
  std::string sim_out = "simulated.csv";
  std::string sim_truth;
  cmd_simulate->add_option("--world", sim_world, "tabular | latent");
  cmd_simulate->add_option("--users", sim_users, "episode count");
  cmd_simulate->add_option("--seed", sim_seed, "generator seed");
  cmd_simulate->add_option("--out", sim_out, "log file to write");
  cmd_simulate->add_option("--truth", sim_truth,
                           "truth sidecar path (default <out>.truth.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cmd_simulate->parsed())
      return run_simulate(sim_world, sim_users, sim_seed, sim_out, sim_truth);

    ltvrec::Pipeline pipeline(build_config(capture));
    if (cmd_ingest->parsed()) {
      pipeline.run_ingest();
    } else if (cmd_factorize->parsed()) {
      pipeline.run_factorize();
    } else if (cmd_states->parsed()) {
      pipeline.run_states();
    } else if (cmd_behavior->parsed()) {
      pipeline.run_behavior();
    } else if (cmd_evaluate->parsed()) {
      pipeline.run_evaluate();
    } else if (cmd_improve->parsed()) {
      pipeline.run_improve();
    } else if (cmd_compare->parsed()) {
      if (compare_baseline.empty() != compare_contender.empty()) {
        std::cerr << "compare: --baseline and --contender go together\n";
        return 1;
      }
      if (!compare_baseline.empty()) {
        const ltvrec::PairedComparison result = pipeline.compare(
            compare_baseline, compare_contender, pipeline.config().resamples,
            ltvrec::derive_seed(pipeline.config().seed, "stats"));
        double mean_diff = 0.0;
        for (std::size_t i = 0; i < result.values_a.size(); ++i)
          mean_diff += result.values_b[i] - result.values_a[i];
        mean_diff /= static_cast<double>(result.values_a.size());
        std::cout << "compare: " << compare_contender << " - " << compare_baseline
                  << " mean " << mean_diff << ", one-sided p " << result.test.p
                  << " (n " << result.test.n << ")\n";
      } else {
        pipeline.run_offpolicy();
        pipeline.run_stats();
      }
    } else if (cmd_report->parsed()) {
      if (report_out.empty()) {
        pipeline.run_report();
      } else {
        ltvrec::emit_report(pipeline.build_report(), report_out);
        std::cout << "report: written to " << report_out << "\n";
      }
    } else if (cmd_run_all->parsed()) {
      pipeline.run_all();
    }
    return 0;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
