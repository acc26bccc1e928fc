#include "ltvrec/factorize.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>

#include "ltvrec/rng.hpp"

namespace ltvrec {

SparseRatings ratings_from_dataset(const Dataset& dataset) {
  SparseRatings r;
  r.n_rows = dataset.n_users();
  r.n_cols = dataset.n_items();
  // Last write wins: iterate logs in time order so a repeated (user, item)
  // keeps the most recent reward.
  std::map<std::pair<int, int>, double> cells;
  for (int i = 0; i < dataset.n_users(); ++i)
    for (const auto& e : dataset.logs[i].events)
      cells[{i, e.item}] = e.reward;
  r.row.reserve(cells.size());
  r.col.reserve(cells.size());
  r.value.reserve(cells.size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [key, v] : cells) {
    r.row.push_back(key.first);
    r.col.push_back(key.second);
    r.value.push_back(v);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!r.value.empty()) {
    r.observed_min = lo;
    r.observed_max = hi;
  }
  return r;
}

SparseRatings ratings_from_triplets(int n_rows, int n_cols, std::vector<int> row,
                                    std::vector<int> col, std::vector<double> value) {
  if (row.size() != col.size() || row.size() != value.size())
    throw DataError("triplet arrays must have equal length");
  std::map<std::pair<int, int>, double> cells;
  for (std::size_t t = 0; t < value.size(); ++t) {
    if (row[t] < 0 || row[t] >= n_rows || col[t] < 0 || col[t] >= n_cols)
      throw DataError("triplet index out of range");
    cells[{row[t], col[t]}] = value[t];
  }
  SparseRatings r;
  r.n_rows = n_rows;
  r.n_cols = n_cols;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [key, v] : cells) {
    r.row.push_back(key.first);
    r.col.push_back(key.second);
    r.value.push_back(v);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!r.value.empty()) {
    r.observed_min = lo;
    r.observed_max = hi;
  }
  return r;
}

namespace {

// Observed entries grouped per row (and per column for the transposed solve).
struct ObservedIndex {
  std::vector<std::vector<std::pair<int, double>>> by_row;
  std::vector<std::vector<std::pair<int, double>>> by_col;
};

ObservedIndex build_index(const SparseRatings& r) {
  ObservedIndex ix;
  ix.by_row.resize(r.n_rows);
  ix.by_col.resize(r.n_cols);
  for (std::size_t t = 0; t < r.nnz(); ++t) {
    ix.by_row[r.row[t]].push_back({r.col[t], r.value[t]});
    ix.by_col[r.col[t]].push_back({r.row[t], r.value[t]});
  }
  return ix;
}

double als_objective(const SparseRatings& r, const Mat& U, const Mat& V, double lambda) {
  double sq = 0.0;
  for (std::size_t t = 0; t < r.nnz(); ++t) {
    const double d = r.value[t] - U.row(r.row[t]).dot(V.col(r.col[t]));
    sq += d * d;
  }
  return sq + lambda * (U.squaredNorm() + V.squaredNorm());
}

}  // namespace

AlsResult als_fit(const SparseRatings& ratings, int k, double lambda,
                  std::uint64_t seed, const AlsOptions& options) {
  if (k < 1 || k > std::min(ratings.n_rows, ratings.n_cols))
    throw DataError("als_fit: k must satisfy 1 <= k <= min(m, n)");
  if (lambda <= 0.0) throw DataError("als_fit: lambda must be > 0");
  if (options.max_iters < 1) throw DataError("als_fit: max_iters must be >= 1");
  for (double v : ratings.value)
    if (!std::isfinite(v)) throw NumericError("als_fit: non-finite rating in input");

  const auto ix = build_index(ratings);
  Mat U = Mat::Zero(ratings.n_rows, k);
  Mat V(k, ratings.n_cols);
  Rng rng(seed);
  const double scale = 0.5 / std::sqrt(static_cast<double>(k));
  for (int j = 0; j < ratings.n_cols; ++j)
    for (int d = 0; d < k; ++d) V(d, j) = rng.uniform(-scale, scale);

  const Mat ridge = lambda * Mat::Identity(k, k);
  AlsResult result;
  double prev = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < options.max_iters; ++iter) {
    // Solve user rows against fixed V.
    for (int i = 0; i < ratings.n_rows; ++i) {
      Mat a = ridge;
      Vec b = Vec::Zero(k);
      for (const auto& [j, v] : ix.by_row[i]) {
        a.noalias() += V.col(j) * V.col(j).transpose();
        b.noalias() += v * V.col(j);
      }
      U.row(i) = a.ldlt().solve(b).transpose();
    }
    result.objective.push_back(als_objective(ratings, U, V, lambda));

    // Solve item columns against fixed U.
    for (int j = 0; j < ratings.n_cols; ++j) {
      Mat a = ridge;
      Vec b = Vec::Zero(k);
      for (const auto& [i, v] : ix.by_col[j]) {
        a.noalias() += U.row(i).transpose() * U.row(i);
        b.noalias() += v * U.row(i).transpose();
      }
      V.col(j) = a.ldlt().solve(b);
    }
    const double obj = als_objective(ratings, U, V, lambda);
    result.objective.push_back(obj);

    if (std::isfinite(prev) && prev > 0.0 &&
        std::abs(prev - obj) < options.tolerance * prev)
      break;
    prev = obj;
  }

  result.model.U = std::move(U);
  result.model.V = std::move(V);
  result.model.k = k;
  result.model.lambda = lambda;
  result.model.method = "als";
  result.model.seed = seed;
  return result;
}

namespace {

// y = A x over the triplets (A is the zero-filled ratings matrix).
void apply(const SparseRatings& r, const Mat& x, Mat& y) {
  y.setZero(r.n_rows, x.cols());
  for (std::size_t t = 0; t < r.nnz(); ++t)
    y.row(r.row[t]) += r.value[t] * x.row(r.col[t]);
}

void apply_transposed(const SparseRatings& r, const Mat& x, Mat& y) {
  y.setZero(r.n_cols, x.cols());
  for (std::size_t t = 0; t < r.nnz(); ++t)
    y.row(r.col[t]) += r.value[t] * x.row(r.row[t]);
}

LatentModel model_from_svd(const Mat& left, const Vec& sv, const Mat& right, int k,
                           int effective_rank) {
  const int m = static_cast<int>(left.rows());
  const int n = static_cast<int>(right.rows());
  LatentModel model;
  model.U = Mat::Zero(m, k);
  model.V = Mat::Zero(k, n);
  for (int c = 0; c < k; ++c) {
    if (c >= effective_rank) continue;  // zero-padded component
    model.U.col(c) = left.col(c) * sv(c);
    model.V.row(c) = right.col(c).transpose();
  }
  model.k = k;
  model.method = "svd";
  model.svd_split = "U-scaled";
  return model;
}

}  // namespace

LatentModel svd_fit(const SparseRatings& ratings, int k, const SvdOptions& options) {
  if (k < 1 || k > std::min(ratings.n_rows, ratings.n_cols))
    throw DataError("svd_fit: k must satisfy 1 <= k <= min(m, n)");
  for (double v : ratings.value)
    if (!std::isfinite(v)) throw NumericError("svd_fit: non-finite rating in input");

  const int m = ratings.n_rows, n = ratings.n_cols;
  const double sv_floor = 1e-12;

  if (m < options.dense_threshold && n < options.dense_threshold) {
    Mat dense = Mat::Constant(m, n, ratings.default_value);
    for (std::size_t t = 0; t < ratings.nnz(); ++t)
      dense(ratings.row[t], ratings.col[t]) = ratings.value[t];
    Eigen::BDCSVD<Mat> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    int rank = 0;
    const double tol = sv.size() ? std::max(sv_floor, sv(0) * 1e-14) : sv_floor;
    while (rank < sv.size() && sv(rank) > tol) ++rank;
    if (rank < k)
      std::cerr << "svd_fit: requested k=" << k << " exceeds numerical rank " << rank
                << "; padding with zero components\n";
    LatentModel model = model_from_svd(svd.matrixU(), sv, svd.matrixV(), k, std::min(rank, k));
    model.lambda = 0.0;
    model.seed = options.seed;
    return model;
  }

  // Subspace iteration on the sparse zero-filled matrix.
  const int p = std::min(std::min(m, n), k + options.oversample);
  Rng rng(options.seed);
  Mat q(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) q(i, j) = rng.normal();
  Mat y, z;
  Vec prev_sv = Vec::Zero(k);
  Vec sv = prev_sv;
  Mat left, right;
  for (int it = 0; it < options.max_iters; ++it) {
    apply(ratings, q, y);                       // y = A q        (m x p)
    Eigen::HouseholderQR<Mat> qr_y(y);
    y = qr_y.householderQ() * Mat::Identity(m, p);
    apply_transposed(ratings, y, z);            // z = A^T y      (n x p)
    Eigen::HouseholderQR<Mat> qr_z(z);
    Mat rfac = qr_z.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    q = qr_z.householderQ() * Mat::Identity(n, p);
    // Singular values of A converge to those of the small factor R.
    Eigen::BDCSVD<Mat> small(rfac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    sv = small.singularValues().head(std::min<int>(k, p));
    left = y * small.matrixV();
    right = q * small.matrixU();
    if (it > 0) {
      const double num = (sv - prev_sv).cwiseAbs().maxCoeff();
      const double den = std::max(1e-300, sv.cwiseAbs().maxCoeff());
      if (num / den < options.tolerance) break;
    }
    prev_sv = sv;
  }
  int rank = 0;
  const double tol = sv.size() ? std::max(sv_floor, sv(0) * 1e-14) : sv_floor;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  if (rank < k)
    std::cerr << "svd_fit: requested k=" << k << " exceeds numerical rank " << rank
              << "; padding with zero components\n";
  LatentModel model = model_from_svd(left, sv, right, k, std::min(rank, k));
  model.lambda = 0.0;
  model.seed = options.seed;
  return model;
}

MeanModel mean_predictor(const SparseRatings& ratings) {
  if (ratings.value.empty()) throw DataError("mean_predictor: no observed ratings");
  const double sum = std::accumulate(ratings.value.begin(), ratings.value.end(), 0.0);
  return {sum / static_cast<double>(ratings.value.size())};
}

FactorMethod parse_method(const std::string& name) {
  if (name == "als") return FactorMethod::als;
  if (name == "svd") return FactorMethod::svd;
  if (name == "mean") return FactorMethod::mean;
  throw DataError("unknown factorization method '" + name + "'");
}

std::string method_name(FactorMethod method) {
  switch (method) {
    case FactorMethod::als: return "als";
    case FactorMethod::svd: return "svd";
    case FactorMethod::mean: return "mean";
  }
  return "?";
}

CvResult cross_validate(const SparseRatings& ratings, FactorMethod method, int k,
                        double lambda, int folds, std::uint64_t seed,
                        const AlsOptions& als_options, const SvdOptions& svd_options) {
  if (folds < 2) throw DataError("cross_validate: folds must be >= 2");
  const std::size_t nnz = ratings.nnz();
  if (nnz < static_cast<std::size_t>(folds))
    throw DataError("cross_validate: fewer observations than folds");

  // Seeded shuffle, then round-robin fold assignment.
  std::vector<std::size_t> order(nnz);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = nnz; i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<int> fold_of(nnz);
  for (std::size_t pos = 0; pos < nnz; ++pos)
    fold_of[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));

  const double lo = ratings.observed_min, hi = ratings.observed_max;
  CvResult cv;
  for (int f = 0; f < folds; ++f) {
    SparseRatings train;
    train.n_rows = ratings.n_rows;
    train.n_cols = ratings.n_cols;
    train.default_value = ratings.default_value;
    train.observed_min = lo;
    train.observed_max = hi;
    std::vector<std::size_t> held;
    for (std::size_t t = 0; t < nnz; ++t) {
      if (fold_of[t] == f) {
        held.push_back(t);
      } else {
        train.row.push_back(ratings.row[t]);
        train.col.push_back(ratings.col[t]);
        train.value.push_back(ratings.value[t]);
      }
    }
    if (held.empty()) throw DataError("cross_validate: fold " + std::to_string(f) + " is empty");
    if (train.value.empty()) throw DataError("cross_validate: training split is empty");

    double se = 0.0;
    auto accumulate = [&](auto&& predict) {
      for (std::size_t t : held) {
        const double pred = std::clamp(predict(ratings.row[t], ratings.col[t]), lo, hi);
        const double d = ratings.value[t] - pred;
        se += d * d;
      }
    };
    switch (method) {
      case FactorMethod::als: {
        const auto fit = als_fit(train, k, lambda, derive_seed(seed, "cv-als", f), als_options);
        accumulate([&](int i, int j) { return fit.model.predict(i, j); });
        break;
      }
      case FactorMethod::svd: {
        SvdOptions opts = svd_options;
        opts.seed = derive_seed(seed, "cv-svd", f);
        const auto model = svd_fit(train, k, opts);
        accumulate([&](int i, int j) { return model.predict(i, j); });
        break;
      }
      case FactorMethod::mean: {
        const auto model = mean_predictor(train);
        accumulate([&](int i, int j) { return model.predict(i, j); });
        break;
      }
    }
    cv.fold_mse.push_back(se / static_cast<double>(held.size()));
  }

  cv.mean = std::accumulate(cv.fold_mse.begin(), cv.fold_mse.end(), 0.0) /
            static_cast<double>(folds);
  double var = 0.0;
  for (double v : cv.fold_mse) var += (v - cv.mean) * (v - cv.mean);
  cv.sd = std::sqrt(var / static_cast<double>(folds - 1));
  return cv;
}

}  // namespace ltvrec
