#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace tapsim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Tap ratio change per position step: 5/8 % p.u.
inline constexpr double kTapStep = 0.00625;

/// Hard position limits of any tap changer; ratio(pos) spans [0.9, 1.1].
inline constexpr int kPosMin = -16;
inline constexpr int kPosMax = 16;

using Timestamp = std::int64_t;  // seconds from episode start

}  // namespace tapsim
