#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ltvrec/common.hpp"
#include "ltvrec/estimators.hpp"
#include "ltvrec/policies.hpp"
#include "ltvrec/state_builder.hpp"

namespace ltvrec {

struct MseRow {
  std::string method;
  double mean = 0.0;
  double sd = 0.0;
};

struct ValueRow {
  std::string policy;
  double mean = 0.0;
  double half_width = 0.0;
};

struct PValueRow {
  std::string baseline;
  std::string contender;
  double p = 1.0;
  int n = 0;
};

struct RhoRow {
  std::string policy;
  RhoDiagnostics diag;
};

struct RankHistogram {
  std::string policy;
  int n_items = 0;
  long long total = 0;
  std::vector<long long> counts;  // fixed bin count over the rank range
};

// log10 of |theta_Q| per feature after dividing by the absolute
// constant-feature weight, one row per grid gamma. Entries are -inf where the
// weight is exactly zero; the emitters render those as absent.
struct GammaSweepResult {
  std::vector<double> gammas;
  int k = 0;
  Mat log_abs;  // gammas.size() x (3k+1)
};

struct PipelineReport {
  std::vector<MseRow> mse_table;
  std::vector<ValueRow> value_table;
  std::vector<PValueRow> p_values;
  std::vector<RhoRow> rho_table;
  std::vector<RankHistogram> histograms;
  GammaSweepResult sweep;
  std::vector<std::pair<std::string, std::string>> metadata;  // emitted as given
};

constexpr int kRankBins = 50;

GammaSweepResult gamma_sweep(const TrajectoryBatch& trajectories, const Mat& catalog,
                             std::vector<double> grid, double epsilon = kAutoEpsilon);

std::string sweep_block_name(int feature_index, int k);

RankHistogram rank_histogram(const TrajectoryBatch& trajectories, const Mat& catalog,
                             const PolicyParams& policy, const std::string& name,
                             int bins = kRankBins);

// Writes report.txt, report.json, rank_hist_<policy>.csv and gamma_sweep.csv
// into out_dir. Byte-deterministic given an identical report.
void emit_report(const PipelineReport& report, const std::filesystem::path& out_dir);

}  // namespace ltvrec
