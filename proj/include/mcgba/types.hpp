// Shared scalar/matrix aliases and error types.
#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mcgba {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using VecX = Eigen::VectorXd;

using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat29 = Eigen::Matrix<double, 2, 9>;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat93 = Eigen::Matrix<double, 9, 3>;
using MatX = Eigen::MatrixXd;

// Camera blocks are 9x9 (rotation, translation, focal, two distortion
// coefficients), landmark blocks 3x3.
inline constexpr int kPoseDim = 9;
inline constexpr int kLandmarkDim = 3;

// Malformed BAL input. `line` is 1-based.
class BalParseError : public std::runtime_error {
 public:
  BalParseError(const std::string& msg, long line)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg),
        line_(line) {}

  long line() const { return line_; }

 private:
  long line_;
};

// A projection hit the camera plane (z == 0) or produced non-finite values.
class DegenerateObservation : public std::runtime_error {
 public:
  explicit DegenerateObservation(const std::string& msg, long obs_index = -1)
      : std::runtime_error(msg), obs_index_(obs_index) {}

  long obs_index() const { return obs_index_; }

 private:
  long obs_index_;
};

// Numerical breakdown: singular landmark block, non-SPD diagonal, CG
// breakdown, NaN in a recurrence. The LM loop treats this as a failed step.
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& msg)
      : std::runtime_error(msg) {}
};

}  // namespace mcgba
