#pragma once

// Real spherical harmonics without the Condon-Shortley phase, flattened as
// index(l, m) = l*l + l + m. With this convention Y_1^{-1} = c*y,
// Y_1^0 = c*z and Y_1^1 = c*x for c = sqrt(3 / 4pi).

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "relight/common.hpp"

namespace relight {

inline constexpr int kMaxShOrder = 4;
inline constexpr int kDefaultShOrder = 3;

class ShOrder {
 public:
  constexpr ShOrder() = default;
  // Throws InvalidInput outside [0, kMaxShOrder].
  explicit ShOrder(int n);

  constexpr int n() const { return n_; }
  constexpr std::size_t count() const {
    return static_cast<std::size_t>((n_ + 1) * (n_ + 1));
  }
  friend constexpr bool operator==(ShOrder, ShOrder) = default;

 private:
  int n_ = kDefaultShOrder;
};

constexpr std::size_t sh_index(int l, int m) {
  return static_cast<std::size_t>(l * l + l + m);
}

// Per-channel SH coefficients: one RGB triplet per basis function.
class ShCoefficients {
 public:
  ShCoefficients() : ShCoefficients(ShOrder{}) {}
  explicit ShCoefficients(ShOrder order);
  ShCoefficients(ShOrder order, std::vector<Rgb> coeffs);

  ShOrder order() const { return order_; }
  std::size_t size() const { return coeffs_.size(); }
  std::span<const Rgb> coeffs() const { return coeffs_; }
  std::span<Rgb> coeffs() { return coeffs_; }
  const Rgb& operator[](std::size_t i) const { return coeffs_[i]; }
  Rgb& operator[](std::size_t i) { return coeffs_[i]; }

  bool all_finite() const;

  ShCoefficients& operator+=(const ShCoefficients& other);
  ShCoefficients& operator*=(double scale);
  friend ShCoefficients operator+(ShCoefficients a, const ShCoefficients& b) { return a += b; }
  friend ShCoefficients operator*(ShCoefficients a, double s) { return a *= s; }
  friend ShCoefficients operator*(double s, ShCoefficients a) { return a *= s; }

 private:
  ShOrder order_;
  std::vector<Rgb> coeffs_;
};

// Writes the (n+1)^2 basis values at `direction` into `out` without
// validating the direction; `out.size()` must be at least order.count().
void eval_sh_basis_unchecked(const Vec3& direction, ShOrder order, std::span<double> out);

// Throws InvalidInput for a non-unit or non-finite direction.
std::vector<double> eval_sh_basis(const Vec3& direction, ShOrder order);

struct QuadratureNode {
  Vec3 direction;
  double weight;
};

struct QuadratureSpec {
  enum class Kind { kFibonacci, kMonteCarlo };
  Kind kind = Kind::kFibonacci;
  std::size_t nodes = 1'000'000;
  std::uint64_t seed = 0;  // Monte Carlo only
};

// Equal-weight sphere nodes; weights sum to 4pi.
std::vector<QuadratureNode> sphere_quadrature(const QuadratureSpec& spec);

using SphericalFunction = std::function<Rgb(const Vec3&)>;

// c_i = integral of f * Y_i over the sphere. Refuses specs with fewer than
// 4 * (n+1)^2 nodes.
ShCoefficients project_to_sh(const SphericalFunction& f, ShOrder order,
                             const QuadratureSpec& quadrature = {});

Rgb sh_dot(std::span<const Rgb> a, std::span<const Rgb> b);
Rgb sh_dot(const ShCoefficients& a, const ShCoefficients& b);

// Coefficients c with sum_i L_i c_i = integral of L(w) max(0, axis . w) dw
// for any L band-limited to `order`.
std::vector<double> clamped_cosine_sh(const Vec3& axis, ShOrder order);

// Band weights A_l of the clamped cosine lobe (pi, 2pi/3, pi/4, 0, -pi/24).
double clamped_cosine_band(int l);

}  // namespace relight
