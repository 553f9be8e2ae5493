#include "relight/sh_basis.hpp"

#include <array>
#include <random>
#include <string>

namespace relight {

ShOrder::ShOrder(int n) : n_(n) {
  if (n < 0 || n > kMaxShOrder) {
    throw InvalidInput("SH order must lie in [0, " + std::to_string(kMaxShOrder) +
                       "], got " + std::to_string(n));
  }
}

ShCoefficients::ShCoefficients(ShOrder order)
    : order_(order), coeffs_(order.count(), Rgb::Zero()) {}

ShCoefficients::ShCoefficients(ShOrder order, std::vector<Rgb> coeffs)
    : order_(order), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != order_.count()) {
    throw InvalidInput("SH coefficient count " + std::to_string(coeffs_.size()) +
                       " does not match order " + std::to_string(order_.n()));
  }
  if (!all_finite()) throw InvalidInput("SH coefficients must be finite");
}

bool ShCoefficients::all_finite() const {
  for (const auto& c : coeffs_) {
    if (!c.allFinite()) return false;
  }
  return true;
}

ShCoefficients& ShCoefficients::operator+=(const ShCoefficients& other) {
  if (!(other.order_ == order_)) throw InvalidInput("SH order mismatch in addition");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
  return *this;
}

ShCoefficients& ShCoefficients::operator*=(double scale) {
  for (auto& c : coeffs_) c *= scale;
  return *this;
}

namespace {

// sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!), with the sqrt(2) of m != 0 folded in.
struct NormTable {
  std::array<double, (kMaxShOrder + 1) * (kMaxShOrder + 1)> k{};
  NormTable() {
    for (int l = 0; l <= kMaxShOrder; ++l) {
      for (int m = 0; m <= l; ++m) {
        double ratio = 1.0;
        for (int i = l - m + 1; i <= l + m; ++i) ratio /= i;
        double v = std::sqrt((2 * l + 1) / (4.0 * kPi) * ratio);
        if (m > 0) v *= std::sqrt(2.0);
        k[sh_index(l, m)] = v;
      }
    }
  }
};

const NormTable& norms() {
  static const NormTable table;
  return table;
}

}  // namespace

void eval_sh_basis_unchecked(const Vec3& d, ShOrder order, std::span<double> out) {
  const int n = order.n();
  const auto& k = norms().k;
  const double x = d.x(), y = d.y(), z = d.z();

  // cos(m phi) sin^m(theta) and sin(m phi) sin^m(theta) as Re/Im of (x+iy)^m,
  // times the associated Legendre polynomial divided by sin^m(theta).
  double cm = 1.0, sm = 0.0;
  for (int m = 0; m <= n; ++m) {
    // P_m^m / sin^m = (2m-1)!!
    double pmm = 1.0;
    for (int i = 1; i <= 2 * m - 1; i += 2) pmm *= i;
    double p_prev = 0.0;
    double p_curr = pmm;
    for (int l = m; l <= n; ++l) {
      if (l == m + 1) {
        p_prev = p_curr;
        p_curr = z * (2 * m + 1) * pmm;
      } else if (l > m + 1) {
        const double next = ((2 * l - 1) * z * p_curr - (l + m - 1) * p_prev) / (l - m);
        p_prev = p_curr;
        p_curr = next;
      }
      if (m == 0) {
        out[sh_index(l, 0)] = k[sh_index(l, 0)] * p_curr;
      } else {
        out[sh_index(l, m)] = k[sh_index(l, m)] * p_curr * cm;
        out[sh_index(l, -m)] = k[sh_index(l, m)] * p_curr * sm;
      }
    }
    const double c_next = cm * x - sm * y;
    sm = cm * y + sm * x;
    cm = c_next;
  }
}

std::vector<double> eval_sh_basis(const Vec3& direction, ShOrder order) {
  require_unit(direction, "SH direction");
  std::vector<double> out(order.count());
  eval_sh_basis_unchecked(direction, order, out);
  return out;
}

std::vector<QuadratureNode> sphere_quadrature(const QuadratureSpec& spec) {
  if (spec.nodes == 0) throw InvalidInput("quadrature needs at least one node");
  std::vector<QuadratureNode> nodes(spec.nodes);
  const double weight = 4.0 * kPi / static_cast<double>(spec.nodes);
  if (spec.kind == QuadratureSpec::Kind::kFibonacci) {
    const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
    const double n = static_cast<double>(spec.nodes);
    for (std::size_t i = 0; i < spec.nodes; ++i) {
      const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / n;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden_angle * static_cast<double>(i);
      nodes[i] = {Vec3(r * std::cos(phi), r * std::sin(phi), z), weight};
    }
  } else {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (auto& node : nodes) {
      const double z = 1.0 - 2.0 * uniform(rng);
      const double phi = 2.0 * kPi * uniform(rng);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      node = {Vec3(r * std::cos(phi), r * std::sin(phi), z), weight};
    }
  }
  return nodes;
}

ShCoefficients project_to_sh(const SphericalFunction& f, ShOrder order,
                             const QuadratureSpec& quadrature) {
  const std::size_t needed = order.count() * 4;
  if (quadrature.nodes < needed) {
    throw InvalidInput("quadrature too coarse for SH order " + std::to_string(order.n()) +
                       ": " + std::to_string(quadrature.nodes) + " nodes, need at least " +
                       std::to_string(needed));
  }
  ShCoefficients result(order);
  std::vector<double> basis(order.count());
  for (const auto& node : sphere_quadrature(quadrature)) {
    const Rgb value = f(node.direction) * node.weight;
    eval_sh_basis_unchecked(node.direction, order, basis);
    for (std::size_t i = 0; i < basis.size(); ++i) result[i] += value * basis[i];
  }
  return result;
}

Rgb sh_dot(std::span<const Rgb> a, std::span<const Rgb> b) {
  if (a.size() != b.size()) throw InvalidInput("SH order mismatch in dot product");
  Rgb sum = Rgb::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

Rgb sh_dot(const ShCoefficients& a, const ShCoefficients& b) {
  if (!(a.order() == b.order())) throw InvalidInput("SH order mismatch in dot product");
  return sh_dot(a.coeffs(), b.coeffs());
}

double clamped_cosine_band(int l) {
  if (l == 0) return kPi;
  if (l == 1) return 2.0 * kPi / 3.0;
  if (l % 2 == 1) return 0.0;
  // 2pi (-1)^(l/2-1) / ((l+2)(l-1)) * l! / (2^l ((l/2)!)^2)
  double binom = 1.0;
  for (int i = 1; i <= l / 2; ++i) binom *= static_cast<double>(l / 2 + i) / i;
  const double sign = ((l / 2 - 1) % 2 == 0) ? 1.0 : -1.0;
  return 2.0 * kPi * sign / ((l + 2.0) * (l - 1.0)) * binom / std::pow(2.0, l);
}

std::vector<double> clamped_cosine_sh(const Vec3& axis, ShOrder order) {
  std::vector<double> basis = eval_sh_basis(axis, order);
  for (int l = 0; l <= order.n(); ++l) {
    const double band = clamped_cosine_band(l);
    for (int m = -l; m <= l; ++m) basis[sh_index(l, m)] *= band;
  }
  return basis;
}

}  // namespace relight
