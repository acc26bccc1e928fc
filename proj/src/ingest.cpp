#include "ltvrec/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace ltvrec {

namespace {

std::vector<std::string> split(const std::string& line, const std::string& delim) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(delim, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + delim.size();
  }
}

std::string trim(std::string s) {
  auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(s.front())) s.erase(s.begin());
  while (!s.empty() && issp(s.back())) s.pop_back();
  return s;
}

double parse_double(const std::string& field, const char* what, long long line_no) {
  const std::string t = trim(field);
  double v = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || t.empty())
    throw DataError("line " + std::to_string(line_no) + ": unparseable " + what + " '" + field + "'");
  if (!std::isfinite(v))
    throw DataError("line " + std::to_string(line_no) + ": non-finite " + what);
  return v;
}

long long parse_ll(const std::string& field, const char* what, long long line_no) {
  const std::string t = trim(field);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw DataError("line " + std::to_string(line_no) + ": unparseable " + what + " '" + field + "'");
  return v;
}

}  // namespace

std::vector<InteractionRecord> parse_log(const std::filesystem::path& path,
                                         const FormatConfig& format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path.string());

  const std::vector<std::string> known = {"user_id", "item_id", "reward", "timestamp"};
  std::vector<std::string> columns = format.columns;
  long long line_no = 0;
  std::string line;

  if (columns.empty()) {
    if (!std::getline(in, line)) return {};  // empty file, no header
    ++line_no;
    columns.clear();
    for (auto& c : split(line, format.delimiter)) columns.push_back(trim(c));
  }

  int idx[4] = {-1, -1, -1, -1};
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (int f = 0; f < 4; ++f)
      if (columns[c] == known[f]) idx[f] = static_cast<int>(c);
  }
  for (int f = 0; f < 4; ++f)
    if (idx[f] < 0) throw DataError("input header is missing column '" + known[f] + "'");

  std::vector<InteractionRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split(line, format.delimiter);
    if (fields.size() < columns.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(columns.size()) + " fields, got " + std::to_string(fields.size()));
    InteractionRecord rec;
    rec.user_id = trim(fields[idx[0]]);
    rec.item_id = trim(fields[idx[1]]);
    rec.reward = parse_double(fields[idx[2]], "reward", line_no);
    rec.timestamp = parse_ll(fields[idx[3]], "timestamp", line_no);
    if (rec.timestamp < 0)
      throw DataError("line " + std::to_string(line_no) + ": negative timestamp");
    records.push_back(std::move(rec));
  }
  return records;
}

Dataset filter_users(const std::vector<InteractionRecord>& records,
                     int min_interactions, bool require_positive) {
  if (min_interactions < 1) throw DataError("min_interactions must be >= 1");

  // Group by user, keeping first-appearance order.
  std::unordered_map<std::string, std::size_t> user_slot;
  struct RawLog {
    std::string user_id;
    std::vector<const InteractionRecord*> events;
  };
  std::vector<RawLog> raw;
  for (const auto& r : records) {
    auto [it, inserted] = user_slot.try_emplace(r.user_id, raw.size());
    if (inserted) raw.push_back({r.user_id, {}});
    raw[it->second].events.push_back(&r);
  }

  // The zero-clicks rule only makes sense for binary rewards.
  bool binary = true;
  for (const auto& r : records)
    if (r.reward != 0.0 && r.reward != 1.0) { binary = false; break; }

  Dataset ds;
  ds.users_before_filter = static_cast<long long>(raw.size());

  std::vector<const RawLog*> kept;
  for (const auto& log : raw)
    if (static_cast<int>(log.events.size()) >= min_interactions) kept.push_back(&log);
  ds.users_after_count_filter = static_cast<long long>(kept.size());

  if (require_positive && binary) {
    std::vector<const RawLog*> clicked;
    for (const auto* log : kept) {
      bool any = false;
      for (const auto* e : log->events)
        if (e->reward != 0.0) { any = true; break; }
      if (any) clicked.push_back(log);
    }
    kept = std::move(clicked);
  }
  ds.users_after_click_filter = static_cast<long long>(kept.size());

  if (kept.empty()) throw DataError("all users were filtered out");

  std::unordered_map<std::string, int> item_index;
  for (const auto* log : kept) {
    UserLog ul;
    ul.user_id = log->user_id;
    // Stable sort: timestamp ties keep input order.
    std::vector<const InteractionRecord*> evs = log->events;
    std::stable_sort(evs.begin(), evs.end(),
                     [](const InteractionRecord* a, const InteractionRecord* b) {
                       return a->timestamp < b->timestamp;
                     });
    for (const auto* e : evs) {
      auto [it, inserted] = item_index.try_emplace(e->item_id, static_cast<int>(ds.item_ids.size()));
      if (inserted) ds.item_ids.push_back(e->item_id);
      ul.events.push_back({it->second, e->reward, e->timestamp});
    }
    ds.n_samples += static_cast<long long>(ul.events.size());
    ds.logs.push_back(std::move(ul));
  }
  return ds;
}

double estimate_gamma(const Dataset& dataset) {
  const long long m = dataset.n_users();
  const long long n = dataset.n_samples;
  if (m <= 0) throw DataError("gamma estimate needs at least one user");
  if (n < m) throw DataError("gamma estimate needs #samples >= #users");
  return 1.0 - static_cast<double>(m) / static_cast<double>(n);
}

Dataset scale_rewards(const Dataset& dataset, double lo, double hi) {
  Dataset out = dataset;
  double rmin = std::numeric_limits<double>::infinity();
  double rmax = -std::numeric_limits<double>::infinity();
  for (const auto& log : dataset.logs)
    for (const auto& e : log.events) {
      rmin = std::min(rmin, e.reward);
      rmax = std::max(rmax, e.reward);
    }
  if (dataset.n_samples == 0) throw DataError("cannot scale an empty dataset");

  out.reward_scale = {rmin, rmax, true};
  if (rmin == rmax) {
    const double mid = 0.5 * (lo + hi);
    for (auto& log : out.logs)
      for (auto& e : log.events) e.reward = mid;
    return out;
  }
  const double scale = (hi - lo) / (rmax - rmin);
  for (auto& log : out.logs)
    for (auto& e : log.events) e.reward = lo + (e.reward - rmin) * scale;
  return out;
}

}  // namespace ltvrec
