#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace kanlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Consecutive-state pairs (inputs[i] -> targets[i]).
struct Dataset {
  std::vector<Vec> inputs;
  std::vector<Vec> targets;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
};

}  // namespace kanlab
