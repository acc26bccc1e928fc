#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ltvrec/common.hpp"

namespace ltvrec {

// One logged (user, item, reward, timestamp) event, straight from the log.
struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  double reward = 0.0;
  long long timestamp = 0;
};

// Post-filter event with dense item index.
struct Event {
  int item = -1;
  double reward = 0.0;
  long long timestamp = 0;
};

// Time-ordered events of one user (ties broken by input order).
struct UserLog {
  std::string user_id;
  std::vector<Event> events;
};

struct RewardScale {
  double observed_min = 0.0;
  double observed_max = 1.0;
  bool applied = false;
};

struct Dataset {
  std::vector<UserLog> logs;           // first-appearance order
  std::vector<std::string> item_ids;   // dense item index -> original id
  long long n_samples = 0;
  double gamma = -1.0;                 // <0 means not yet estimated
  RewardScale reward_scale;

  // Filter bookkeeping, surfaced in the report.
  long long users_before_filter = 0;
  long long users_after_count_filter = 0;
  long long users_after_click_filter = 0;

  int n_users() const { return static_cast<int>(logs.size()); }
  int n_items() const { return static_cast<int>(item_ids.size()); }
};

struct FormatConfig {
  std::string delimiter = ",";
  // Empty: the first line is a header naming the columns. Non-empty: the file
  // has no header and these give the column order (names from the set
  // user_id, item_id, reward, timestamp).
  std::vector<std::string> columns;
};

std::vector<InteractionRecord> parse_log(const std::filesystem::path& path,
                                         const FormatConfig& format = {});

Dataset filter_users(const std::vector<InteractionRecord>& records,
                     int min_interactions, bool require_positive);

// 1 - (#users / #samples), the drop-out MLE.
double estimate_gamma(const Dataset& dataset);

// Affine map of rewards onto [lo, hi]; a degenerate observed range maps to
// the midpoint. Returns a copy with scaling parameters recorded.
Dataset scale_rewards(const Dataset& dataset, double lo = 0.0, double hi = 1.0);

}  // namespace ltvrec
