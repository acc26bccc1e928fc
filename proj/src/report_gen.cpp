#include "ltvrec/report_gen.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "ltvrec/io.hpp"

namespace ltvrec {

namespace {

using nlohmann::json;

std::string table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c)
      widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << "  ";
      os << row[c];
      if (c + 1 < row.size())
        os << std::string(widths[c] - row[c].size(), ' ');
    }
    os << '\n';
  }
  return os.str();
}

std::string general(double x, int digits) {
  std::ostringstream os;
  os << std::setprecision(digits) << x;
  return os.str();
}

}  // namespace

GammaSweepResult gamma_sweep(const TrajectoryBatch& trajectories, const Mat& catalog,
                             std::vector<double> grid, double epsilon) {
  if (grid.empty()) throw DataError("gamma_sweep: empty grid");
  for (double g : grid)
    if (!(g >= 0.0 && g < 1.0)) throw DataError("gamma_sweep: grid gamma outside [0, 1)");
  const TransitionBatch batch = q_batch(trajectories, catalog);
  const int d = batch.dim();
  GammaSweepResult out;
  out.gammas = std::move(grid);
  out.k = trajectories.k;
  out.log_abs.resize(static_cast<Eigen::Index>(out.gammas.size()), d);
  for (std::size_t gi = 0; gi < out.gammas.size(); ++gi) {
    const Vec theta = lstdq(batch, out.gammas[gi], epsilon).theta;
    const double normalizer = std::abs(theta(d - 1));
    const double scale = normalizer > 0.0 ? normalizer : 1.0;
    for (int i = 0; i < d; ++i) {
      const double a = std::abs(theta(i)) / scale;
      out.log_abs(static_cast<Eigen::Index>(gi), i) =
          a > 0.0 ? std::log10(a) : -std::numeric_limits<double>::infinity();
    }
  }
  return out;
}

std::string sweep_block_name(int feature_index, int k) {
  if (feature_index < k) return "state";
  if (feature_index < 2 * k) return "item";
  if (feature_index < 3 * k) return "product";
  return "constant";
}

RankHistogram rank_histogram(const TrajectoryBatch& trajectories, const Mat& catalog,
                             const PolicyParams& policy, const std::string& name,
                             int bins) {
  if (bins < 1) throw DataError("rank_histogram: bins must be >= 1");
  RankHistogram out;
  out.policy = name;
  out.n_items = static_cast<int>(catalog.cols());
  out.counts.assign(static_cast<std::size_t>(bins), 0);
  for (const auto& traj : trajectories.trajectories) {
    for (const auto& step : traj.steps) {
      const int rank = rank_of_action(policy, step.state, catalog, step.item);
      const int bin = static_cast<int>((static_cast<long long>(rank - 1) * bins) /
                                       out.n_items);
      ++out.counts[static_cast<std::size_t>(bin)];
      ++out.total;
    }
  }
  return out;
}

void emit_report(const PipelineReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  json j;
  j["mse_table"] = json::array();
  for (const auto& row : report.mse_table)
    j["mse_table"].push_back(
        {{"method", row.method}, {"mean_mse", row.mean}, {"sd", row.sd}});
  j["value_table"] = json::array();
  for (const auto& row : report.value_table)
    j["value_table"].push_back(
        {{"policy", row.policy}, {"value", row.mean}, {"half_width", row.half_width}});
  j["p_values"] = json::array();
  for (const auto& row : report.p_values)
    j["p_values"].push_back({{"baseline", row.baseline},
                             {"contender", row.contender},
                             {"p", row.p},
                             {"resamples", row.n}});
  j["rho_diagnostics"] = json::array();
  for (const auto& row : report.rho_table)
    j["rho_diagnostics"].push_back({{"policy", row.policy},
                                    {"min", row.diag.min},
                                    {"mean", row.diag.mean},
                                    {"max", row.diag.max},
                                    {"ess", row.diag.ess},
                                    {"rows", row.diag.rows}});
  j["rank_histograms"] = json::array();
  for (const auto& hist : report.histograms)
    j["rank_histograms"].push_back({{"policy", hist.policy},
                                    {"n_items", hist.n_items},
                                    {"total", hist.total},
                                    {"counts", hist.counts}});
  if (!report.sweep.gammas.empty()) {
    json sweep;
    sweep["gammas"] = report.sweep.gammas;
    sweep["k"] = report.sweep.k;
    sweep["features"] = json::array();
    for (int i = 0; i < report.sweep.log_abs.cols(); ++i) {
      json values = json::array();
      for (Eigen::Index g = 0; g < report.sweep.log_abs.rows(); ++g) {
        const double v = report.sweep.log_abs(g, i);
        if (std::isinf(v))
          values.push_back(nullptr);
        else
          values.push_back(v);
      }
      sweep["features"].push_back({{"index", i},
                                   {"block", sweep_block_name(i, report.sweep.k)},
                                   {"log10_abs", values}});
    }
    j["gamma_sweep"] = sweep;
  }
  json meta = json::object();
  for (const auto& [key, value] : report.metadata) meta[key] = value;
  j["metadata"] = meta;
  write_text_file(out_dir / "report.json", j.dump(2) + "\n");

  std::ostringstream txt;
  txt << "recommender lifetime-value pipeline report\n";

  if (!report.mse_table.empty()) {
    txt << "\n-- prediction mse (cross-validated) --\n";
    std::vector<std::vector<std::string>> rows{{"method", "mean_mse", "sd"}};
    for (const auto& row : report.mse_table)
      rows.push_back({row.method, general(row.mean, 6), general(row.sd, 6)});
    txt << table(rows);
  }

  if (!report.value_table.empty()) {
    txt << "\n-- policy values (bootstrap mean +/- 95% half-width) --\n";
    std::vector<std::vector<std::string>> rows{{"policy", "value", "half_width"}};
    for (const auto& row : report.value_table)
      rows.push_back({row.policy, fixed(row.mean, 4), fixed(row.half_width, 4)});
    txt << table(rows);
  }

  if (!report.p_values.empty()) {
    txt << "\n-- one-sided wilcoxon comparisons (contender > baseline) --\n";
    std::vector<std::vector<std::string>> rows{
        {"baseline", "contender", "p", "resamples"}};
    for (const auto& row : report.p_values)
      rows.push_back({row.baseline, row.contender, general(row.p, 6),
                      std::to_string(row.n)});
    txt << table(rows);
  }

  if (!report.rho_table.empty()) {
    txt << "\n-- importance-weight diagnostics --\n";
    std::vector<std::vector<std::string>> rows{
        {"policy", "rho_min", "rho_mean", "rho_max", "ess", "rows"}};
    for (const auto& row : report.rho_table)
      rows.push_back({row.policy, general(row.diag.min, 6), general(row.diag.mean, 6),
                      general(row.diag.max, 6), general(row.diag.ess, 6),
                      std::to_string(row.diag.rows)});
    txt << table(rows);
  }

  for (const auto& hist : report.histograms) {
    std::ostringstream csv;
    csv << "bin,rank_lo,rank_hi,count\n";
    const int bins = static_cast<int>(hist.counts.size());
    for (int b = 0; b < bins; ++b) {
      const long long lo = (static_cast<long long>(b) * hist.n_items) / bins + 1;
      const long long hi = (static_cast<long long>(b + 1) * hist.n_items) / bins;
      csv << b << ',' << lo << ',' << hi << ',' << hist.counts[static_cast<std::size_t>(b)]
          << '\n';
    }
    write_text_file(out_dir / ("rank_hist_" + hist.policy + ".csv"), csv.str());
  }
  if (!report.histograms.empty()) {
    txt << "\n-- logged-action rank histograms --\n";
    std::vector<std::vector<std::string>> rows{{"policy", "items", "steps", "file"}};
    for (const auto& hist : report.histograms)
      rows.push_back({hist.policy, std::to_string(hist.n_items),
                      std::to_string(hist.total),
                      "rank_hist_" + hist.policy + ".csv"});
    txt << table(rows);
  }

  if (!report.sweep.gammas.empty()) {
    std::ostringstream csv;
    csv << "gamma,feature_index,block,log10_abs_normalized\n";
    for (std::size_t g = 0; g < report.sweep.gammas.size(); ++g)
      for (int i = 0; i < report.sweep.log_abs.cols(); ++i) {
        const double v = report.sweep.log_abs(static_cast<Eigen::Index>(g), i);
        csv << dtos(report.sweep.gammas[g]) << ',' << i << ','
            << sweep_block_name(i, report.sweep.k) << ',';
        if (!std::isinf(v)) csv << general(v, 9);
        csv << '\n';
      }
    write_text_file(out_dir / "gamma_sweep.csv", csv.str());

    txt << "\n-- q-weight magnitudes by gamma (block means of log10, full data in "
           "gamma_sweep.csv) --\n";
    std::vector<std::vector<std::string>> rows{
        {"gamma", "state", "item", "product"}};
    for (std::size_t g = 0; g < report.sweep.gammas.size(); ++g) {
      std::vector<std::string> row{general(report.sweep.gammas[g], 6)};
      for (const std::string block : {"state", "item", "product"}) {
        double sum = 0.0;
        int n = 0;
        for (int i = 0; i < report.sweep.log_abs.cols(); ++i) {
          if (sweep_block_name(i, report.sweep.k) != block) continue;
          const double v = report.sweep.log_abs(static_cast<Eigen::Index>(g), i);
          if (std::isinf(v)) continue;
          sum += v;
          ++n;
        }
        row.push_back(n > 0 ? fixed(sum / n, 4) : std::string("-"));
      }
      rows.push_back(std::move(row));
    }
    txt << table(rows);
  }

  if (!report.metadata.empty()) {
    txt << "\n-- run metadata --\n";
    std::vector<std::vector<std::string>> rows;
    for (const auto& [key, value] : report.metadata) rows.push_back({key, value});
    txt << table(rows);
  }

  write_text_file(out_dir / "report.txt", txt.str());
}

}  // namespace ltvrec
