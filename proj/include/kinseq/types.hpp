#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace kinseq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Tensor or sequence dimensions disagree.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed, empty, or insufficient input data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An operation was invoked outside its supported domain.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kinseq
