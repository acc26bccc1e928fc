#include "ltvrec/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ltvrec/rng.hpp"

namespace ltvrec {

namespace {

Resample make_resample(int n_users, std::uint64_t seed, int index) {
  Resample r;
  r.index = index;
  r.seed = derive_seed(seed, "bootstrap-eval", static_cast<std::uint64_t>(index));
  Rng rng(derive_seed(seed, "bootstrap-users", static_cast<std::uint64_t>(index)));
  r.users.resize(static_cast<std::size_t>(n_users));
  for (auto& u : r.users) u = rng.index(n_users);
  return r;
}

double run_evaluator(const Evaluator& evaluator, const Resample& resample) {
  try {
    return evaluator(resample);
  } catch (const NumericError& e) {
    throw NumericError("resample " + std::to_string(resample.index) + ": " + e.what());
  } catch (const std::exception& e) {
    throw DataError("resample " + std::to_string(resample.index) + ": " + e.what());
  }
}

struct RankedDiffs {
  std::vector<double> ranks;  // midranks of |d|, aligned with signs
  std::vector<int> signs;
  std::vector<int> tie_sizes;
  double w_plus = 0.0;
  int n = 0;
};

RankedDiffs rank_differences(const std::vector<double>& differences) {
  std::vector<double> abs_d;
  std::vector<int> signs;
  for (double d : differences) {
    if (!std::isfinite(d)) throw DataError("wilcoxon: non-finite difference");
    if (d == 0.0) continue;
    abs_d.push_back(std::abs(d));
    signs.push_back(d > 0.0 ? 1 : -1);
  }
  if (abs_d.empty())
    throw DataError("wilcoxon: all differences are zero, samples indistinguishable");
  if (abs_d.size() < 5)
    throw DataError("wilcoxon: need at least 5 non-zero differences");

  const int n = static_cast<int>(abs_d.size());
  std::vector<int> order(abs_d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return abs_d[i] < abs_d[j]; });

  RankedDiffs out;
  out.n = n;
  out.signs = signs;
  out.ranks.resize(abs_d.size());
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && abs_d[order[j]] == abs_d[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (int t = i; t < j; ++t) out.ranks[order[t]] = midrank;
    out.tie_sizes.push_back(j - i);
    i = j;
  }
  for (std::size_t s = 0; s < signs.size(); ++s)
    if (signs[s] > 0) out.w_plus += out.ranks[s];
  return out;
}

// P(W+ >= observed) under random independent signs, computed over doubled
// ranks so midranks stay integral.
double exact_upper_tail(const RankedDiffs& ranked) {
  long long total = 0;
  std::vector<long long> doubled(ranked.ranks.size());
  for (std::size_t i = 0; i < ranked.ranks.size(); ++i) {
    doubled[i] = std::llround(2.0 * ranked.ranks[i]);
    total += doubled[i];
  }
  std::vector<double> coef(static_cast<std::size_t>(total) + 1, 0.0);
  coef[0] = 1.0;
  long long reach = 0;
  for (long long r : doubled) {
    for (long long j = reach; j >= 0; --j)
      coef[static_cast<std::size_t>(j + r)] += coef[static_cast<std::size_t>(j)];
    reach += r;
  }
  const long long w2 = std::llround(2.0 * ranked.w_plus);
  double tail = 0.0;
  for (long long j = w2; j <= total; ++j) tail += coef[static_cast<std::size_t>(j)];
  const double p = tail / std::pow(2.0, ranked.n);
  return std::clamp(p, 0.0, 1.0);
}

double normal_upper_tail(const RankedDiffs& ranked) {
  const double n = ranked.n;
  const double mu = n * (n + 1.0) / 4.0;
  double tie_term = 0.0;
  for (int t : ranked.tie_sizes) {
    const double td = t;
    tie_term += (td * td * td - td) / 48.0;
  }
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
  if (var <= 0.0) throw NumericError("wilcoxon: zero variance under ties");
  const double z = (ranked.w_plus - mu - 0.5) / std::sqrt(var);
  return std::clamp(0.5 * std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
}

}  // namespace

BootstrapResult bootstrap_value(int n_users, const Evaluator& evaluator, int b,
                                std::uint64_t seed) {
  if (b < 2) throw DataError("bootstrap_value: need at least 2 resamples");
  if (n_users < 1) throw DataError("bootstrap_value: no users");
  BootstrapResult out;
  out.b = b;
  out.seed = seed;
  out.values.reserve(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    const Resample resample = make_resample(n_users, seed, i);
    out.values.push_back(run_evaluator(evaluator, resample));
  }
  out.mean = std::accumulate(out.values.begin(), out.values.end(), 0.0) /
             static_cast<double>(b);
  double ss = 0.0;
  for (double v : out.values) ss += (v - out.mean) * (v - out.mean);
  out.half_width = 1.96 * std::sqrt(ss / static_cast<double>(b - 1));
  return out;
}

WilcoxonResult wilcoxon_test(const std::vector<double>& differences) {
  const RankedDiffs ranked = rank_differences(differences);
  WilcoxonResult out;
  out.w_plus = ranked.w_plus;
  out.n = ranked.n;
  out.exact = ranked.n <= 25;
  out.p = out.exact ? exact_upper_tail(ranked) : normal_upper_tail(ranked);
  return out;
}

double wilcoxon_one_sided(const std::vector<double>& differences) {
  return wilcoxon_test(differences).p;
}

double wilcoxon_exact_p(const std::vector<double>& differences) {
  return exact_upper_tail(rank_differences(differences));
}

double wilcoxon_normal_p(const std::vector<double>& differences) {
  return normal_upper_tail(rank_differences(differences));
}

PairedComparison compare_policies(int n_users, const Evaluator& evaluator_a,
                                  const Evaluator& evaluator_b, int b,
                                  std::uint64_t seed) {
  if (b < 2) throw DataError("compare_policies: need at least 2 resamples");
  if (n_users < 1) throw DataError("compare_policies: no users");
  PairedComparison out;
  out.values_a.reserve(static_cast<std::size_t>(b));
  out.values_b.reserve(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    const Resample resample = make_resample(n_users, seed, i);
    out.values_a.push_back(run_evaluator(evaluator_a, resample));
    out.values_b.push_back(run_evaluator(evaluator_b, resample));
  }
  std::vector<double> diffs(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) diffs[static_cast<std::size_t>(i)] =
      out.values_b[static_cast<std::size_t>(i)] - out.values_a[static_cast<std::size_t>(i)];
  out.test = wilcoxon_test(diffs);
  return out;
}

std::vector<Vec> sample_states(const TrajectoryBatch& trajectories,
                               const std::vector<int>& users, int per_trajectory,
                               std::uint64_t seed) {
  if (per_trajectory < 1) throw DataError("sample_states: per_trajectory must be >= 1");
  Rng rng(seed);
  std::vector<Vec> states;
  std::vector<int> idx;
  for (int u : users) {
    if (u < 0 || u >= trajectories.n_users())
      throw DataError("sample_states: user index out of range");
    const auto& steps = trajectories.trajectories[static_cast<std::size_t>(u)].steps;
    const int len = static_cast<int>(steps.size());
    if (len == 0) continue;
    const int take = std::min(per_trajectory, len);
    idx.resize(static_cast<std::size_t>(len));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < take; ++i) {
      const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(len - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      states.push_back(steps[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])].state);
    }
  }
  if (states.empty()) throw DataError("sample_states: no states available");
  return states;
}

std::vector<Vec> sample_states(const TrajectoryBatch& trajectories, int per_trajectory,
                               std::uint64_t seed) {
  std::vector<int> users(static_cast<std::size_t>(trajectories.n_users()));
  std::iota(users.begin(), users.end(), 0);
  return sample_states(trajectories, users, per_trajectory, seed);
}

}  // namespace ltvrec
