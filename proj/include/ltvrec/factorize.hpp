#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltvrec/common.hpp"
#include "ltvrec/ingest.hpp"

namespace ltvrec {

// Observed (user, item, value) triplets; unobserved cells take default_value.
// Duplicate coordinates collapse last-write-wins.
struct SparseRatings {
  int n_rows = 0;
  int n_cols = 0;
  std::vector<int> row;
  std::vector<int> col;
  std::vector<double> value;
  double default_value = 0.0;
  double observed_min = 0.0;   // valid reward range, used to clip predictions
  double observed_max = 1.0;

  std::size_t nnz() const { return value.size(); }
};

SparseRatings ratings_from_dataset(const Dataset& dataset);
SparseRatings ratings_from_triplets(int n_rows, int n_cols, std::vector<int> row,
                                    std::vector<int> col, std::vector<double> value);

struct LatentModel {
  Mat U;          // m x k, user vectors as rows
  Mat V;          // k x n, item vectors as columns
  int k = 0;
  double lambda = 0.0;
  std::string method;          // "als" | "svd"
  std::string svd_split;       // "U-scaled": singular values absorbed into U
  std::uint64_t seed = 0;

  double predict(int i, int j) const { return U.row(i).dot(V.col(j)); }
  Vec item_vector(int j) const { return V.col(j); }
};

struct AlsOptions {
  int max_iters = 30;
  double tolerance = 1e-4;     // relative objective change
};

struct AlsResult {
  LatentModel model;
  // Regularized objective after every half-iteration (U-solve, then V-solve).
  std::vector<double> objective;
};

AlsResult als_fit(const SparseRatings& ratings, int k, double lambda,
                  std::uint64_t seed, const AlsOptions& options = {});

struct SvdOptions {
  // Matrices smaller than this on both sides use a dense decomposition;
  // larger ones use subspace iteration on the sparse matrix.
  int dense_threshold = 2000;
  int oversample = 10;
  int max_iters = 300;
  double tolerance = 1e-10;    // relative singular value change
  std::uint64_t seed = 7;
};

LatentModel svd_fit(const SparseRatings& ratings, int k, const SvdOptions& options = {});

struct MeanModel {
  double mu = 0.0;
  double predict(int, int) const { return mu; }
};

MeanModel mean_predictor(const SparseRatings& ratings);

enum class FactorMethod { als, svd, mean };

FactorMethod parse_method(const std::string& name);
std::string method_name(FactorMethod method);

struct CvResult {
  std::vector<double> fold_mse;
  double mean = 0.0;
  double sd = 0.0;
};

CvResult cross_validate(const SparseRatings& ratings, FactorMethod method, int k,
                        double lambda, int folds, std::uint64_t seed,
                        const AlsOptions& als_options = {},
                        const SvdOptions& svd_options = {});

}  // namespace ltvrec
