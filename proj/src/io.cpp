#include "ltvrec/io.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace ltvrec {

namespace {

using nlohmann::json;

double parse_double_token(const std::string& token, const std::string& where) {
  double out = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end)
    throw DataError(where + ": unparseable number '" + token + "'");
  return out;
}

long long parse_ll_token(const std::string& token, const std::string& where) {
  long long out = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end)
    throw DataError(where + ": unparseable integer '" + token + "'");
  return out;
}

std::uint64_t parse_u64_token(const std::string& token, const std::string& where) {
  std::uint64_t out = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end)
    throw DataError(where + ": unparseable integer '" + token + "'");
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

json read_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("malformed json in '" + path.string() + "': " + e.what());
  }
  return j;
}

void write_json(const json& j, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace

std::string dtos(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string fixed(double x, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << x;
  return os.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  auto out = open_out(path);
  out << content;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "user_id,item_id,reward,timestamp\n";
  for (const auto& log : dataset.logs)
    for (const auto& event : log.events)
      out << log.user_id << ',' << dataset.item_ids[static_cast<std::size_t>(event.item)]
          << ',' << dtos(event.reward) << ',' << event.timestamp << '\n';
}

void save_model(const LatentModel& model, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "ltvrec-model 1\n";
  out << "method " << model.method << '\n';
  out << "k " << model.k << '\n';
  out << "lambda " << dtos(model.lambda) << '\n';
  out << "seed " << model.seed << '\n';
  out << "svd_split " << (model.svd_split.empty() ? "-" : model.svd_split) << '\n';
  out << "m " << model.U.rows() << '\n';
  out << "n " << model.V.cols() << '\n';
  out << "U\n";
  for (int i = 0; i < model.U.rows(); ++i) {
    for (int c = 0; c < model.U.cols(); ++c)
      out << (c ? " " : "") << dtos(model.U(i, c));
    out << '\n';
  }
  out << "V\n";
  for (int r = 0; r < model.V.rows(); ++r) {
    for (int c = 0; c < model.V.cols(); ++c)
      out << (c ? " " : "") << dtos(model.V(r, c));
    out << '\n';
  }
}

namespace {

std::string expect_key(std::istream& in, const std::string& key,
                       const std::string& where) {
  std::string k, v;
  if (!(in >> k >> v) || k != key)
    throw DataError(where + ": expected '" + key + "' entry");
  return v;
}

}  // namespace

LatentModel load_model(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string where = "model '" + path.string() + "'";
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "ltvrec-model" || version != 1)
    throw DataError(where + ": not a model file");
  LatentModel model;
  model.method = expect_key(in, "method", where);
  model.k = static_cast<int>(parse_ll_token(expect_key(in, "k", where), where));
  model.lambda = parse_double_token(expect_key(in, "lambda", where), where);
  model.seed = parse_u64_token(expect_key(in, "seed", where), where);
  model.svd_split = expect_key(in, "svd_split", where);
  if (model.svd_split == "-") model.svd_split.clear();
  const long long m = parse_ll_token(expect_key(in, "m", where), where);
  const long long n = parse_ll_token(expect_key(in, "n", where), where);
  if (m < 1 || n < 1 || model.k < 1) throw DataError(where + ": bad dimensions");
  std::string section;
  if (!(in >> section) || section != "U") throw DataError(where + ": missing U block");
  model.U.resize(m, model.k);
  for (int i = 0; i < model.U.rows(); ++i)
    for (int c = 0; c < model.U.cols(); ++c)
      if (!(in >> model.U(i, c))) throw DataError(where + ": truncated U block");
  if (!(in >> section) || section != "V") throw DataError(where + ": missing V block");
  model.V.resize(model.k, n);
  for (int r = 0; r < model.V.rows(); ++r)
    for (int c = 0; c < model.V.cols(); ++c)
      if (!(in >> model.V(r, c))) throw DataError(where + ": truncated V block");
  return model;
}

void save_trajectories(const TrajectoryBatch& trajectories,
                       const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "user_id,step";
  for (int c = 0; c < trajectories.k; ++c) out << ",s" << c;
  out << ",item_index,reward,timestamp\n";
  for (const auto& traj : trajectories.trajectories) {
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
      const auto& step = traj.steps[i];
      out << traj.user_id << ',' << i;
      for (int c = 0; c < trajectories.k; ++c) out << ',' << dtos(step.state(c));
      out << ',' << step.item << ',' << dtos(step.reward) << ',' << step.timestamp
          << '\n';
    }
  }
}

TrajectoryBatch load_trajectories(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string where = "trajectories '" + path.string() + "'";
  std::string line;
  if (!std::getline(in, line)) throw DataError(where + ": empty file");
  const auto header = split_csv(line);
  if (header.size() < 5 || header[0] != "user_id" || header[1] != "step")
    throw DataError(where + ": unexpected header");
  const int k = static_cast<int>(header.size()) - 5;
  if (k < 1) throw DataError(where + ": no state columns");
  TrajectoryBatch batch;
  batch.k = k;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) != k + 5)
      throw DataError(where + ": wrong field count");
    if (batch.trajectories.empty() || batch.trajectories.back().user_id != fields[0]) {
      Trajectory traj;
      traj.user_id = fields[0];
      batch.trajectories.push_back(std::move(traj));
    }
    TrajStep step;
    step.state.resize(k);
    for (int c = 0; c < k; ++c)
      step.state(c) = parse_double_token(fields[static_cast<std::size_t>(2 + c)], where);
    step.item = static_cast<int>(
        parse_ll_token(fields[static_cast<std::size_t>(k + 2)], where));
    step.reward = parse_double_token(fields[static_cast<std::size_t>(k + 3)], where);
    step.timestamp = parse_ll_token(fields[static_cast<std::size_t>(k + 4)], where);
    batch.trajectories.back().steps.push_back(std::move(step));
  }
  if (batch.trajectories.empty()) throw DataError(where + ": no rows");
  return batch;
}

void save_policy(const PolicyParams& policy, const std::filesystem::path& path) {
  json j;
  j["format"] = "ltvrec-policy";
  j["d"] = policy.w.size();
  j["kind"] = policy_kind_name(policy.kind);
  j["w"] = std::vector<double>(policy.w.data(), policy.w.data() + policy.w.size());
  j["alpha"] = policy.alpha;
  j["c"] = policy.c;
  j["beta"] = policy.beta;
  write_json(j, path);
}

PolicyParams load_policy(const std::filesystem::path& path) {
  const json j = read_json(path);
  const std::string where = "policy '" + path.string() + "'";
  try {
    if (j.at("format") != "ltvrec-policy") throw DataError(where + ": wrong format tag");
    PolicyParams policy;
    policy.kind = parse_policy_kind(j.at("kind").get<std::string>());
    const auto w = j.at("w").get<std::vector<double>>();
    if (w.size() != j.at("d").get<std::size_t>())
      throw DataError(where + ": weight length disagrees with d");
    policy.w = Eigen::Map<const Vec>(w.data(), static_cast<Eigen::Index>(w.size()));
    policy.alpha = j.at("alpha").get<double>();
    policy.c = j.at("c").get<double>();
    policy.beta = j.at("beta").get<double>();
    return policy;
  } catch (const json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
}

void save_value_weights(const ValueWeights& weights, const std::filesystem::path& path,
                        const RhoDiagnostics* rho) {
  json j;
  j["format"] = "ltvrec-value";
  j["kind"] = weights.kind;
  j["gamma"] = weights.gamma;
  j["epsilon"] = weights.epsilon;
  j["theta"] = std::vector<double>(weights.theta.data(),
                                   weights.theta.data() + weights.theta.size());
  if (rho != nullptr) {
    j["rho"] = {{"min", rho->min},
                {"max", rho->max},
                {"mean", rho->mean},
                {"ess", rho->ess},
                {"rows", rho->rows}};
  }
  write_json(j, path);
}

StoredValue load_value_weights(const std::filesystem::path& path) {
  const json j = read_json(path);
  const std::string where = "value weights '" + path.string() + "'";
  try {
    if (j.at("format") != "ltvrec-value") throw DataError(where + ": wrong format tag");
    StoredValue out;
    out.weights.kind = j.at("kind").get<std::string>();
    out.weights.gamma = j.at("gamma").get<double>();
    out.weights.epsilon = j.at("epsilon").get<double>();
    const auto theta = j.at("theta").get<std::vector<double>>();
    out.weights.theta =
        Eigen::Map<const Vec>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    if (j.contains("rho")) {
      out.has_rho = true;
      out.rho.min = j["rho"].at("min").get<double>();
      out.rho.max = j["rho"].at("max").get<double>();
      out.rho.mean = j["rho"].at("mean").get<double>();
      out.rho.ess = j["rho"].at("ess").get<double>();
      out.rho.rows = j["rho"].at("rows").get<long long>();
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
}

}  // namespace ltvrec
