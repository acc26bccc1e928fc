#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace ltvrec {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Bad or missing input data (file problems, schema violations, empty sets).
// The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure (singular systems, non-finite values). Exit code 3.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ltvrec
