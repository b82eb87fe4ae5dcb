#pragma once

#include <Eigen/Dense>
#include <limits>
#include <stdexcept>
#include <string>

namespace mlbp {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Magnitude below which an entry counts as zero in sparsity checks.
inline constexpr double kZeroTol = 1e-8;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConvergenceError : std::runtime_error {
    double best_estimate;
    ConvergenceError(const std::string& msg, double best)
        : std::runtime_error(msg), best_estimate(best) {}
};

}  // namespace mlbp
