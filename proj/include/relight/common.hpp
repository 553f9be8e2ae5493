#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace relight {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
// Channel-wise colors; products are element-wise (the ⊙ of the shading model).
using Rgb = Eigen::Array3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kUnitTolerance = 1e-6;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments to a pure operation: non-unit vectors, mismatched orders, ...
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Malformed or incomplete avatar asset. `channel` names the offending plane
// or file when one is responsible.
class InvalidAsset : public Error {
 public:
  InvalidAsset(const std::string& message, std::string channel = {})
      : Error(channel.empty() ? message : channel + ": " + message),
        channel_(std::move(channel)) {}
  const std::string& channel() const { return channel_; }

 private:
  std::string channel_;
};

// Numeric failure: degenerate normals, singular systems, non-finite values.
class NumericError : public Error {
 public:
  using Error::Error;
};

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

inline bool is_unit(const Vec3& v, double tol = kUnitTolerance) {
  return v.allFinite() && std::abs(v.norm() - 1.0) <= tol;
}

inline void require_unit(const Vec3& v, const char* what) {
  if (!is_unit(v)) {
    throw InvalidInput(std::string(what) + " must be a finite unit vector");
  }
}

}  // namespace relight
