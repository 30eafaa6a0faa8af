#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "brlab/errors.hpp"

namespace brlab {

// Finite weighted point set standing in for the measure space (S, Sigma, rho).
struct FiniteMeasureSpace {
  std::vector<double> weights;

  FiniteMeasureSpace() = default;
  explicit FiniteMeasureSpace(std::vector<double> w) : weights(std::move(w)) { validate(); }

  std::size_t size() const { return weights.size(); }

  void validate() const {
    require(!weights.empty(), errc::bad_probabilities, "measure space needs at least one point");
    for (double w : weights)
      require(w > 0.0 && std::isfinite(w), errc::bad_probabilities, "point weights must be positive");
  }
};

// An element of L^q(S): one real value per point of the space.
struct LqVector {
  std::vector<double> values;

  LqVector() = default;
  explicit LqVector(std::vector<double> v) : values(std::move(v)) {}
  LqVector(std::initializer_list<double> v) : values(v) {}
  LqVector(std::size_t n, double fill) : values(n, fill) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t j) { return values[j]; }
  double operator[](std::size_t j) const { return values[j]; }

  LqVector& operator+=(const LqVector& o) {
    for (std::size_t j = 0; j < values.size(); ++j) values[j] += o.values[j];
    return *this;
  }
  LqVector& operator-=(const LqVector& o) {
    for (std::size_t j = 0; j < values.size(); ++j) values[j] -= o.values[j];
    return *this;
  }
  LqVector& operator*=(double c) {
    for (double& x : values) x *= c;
    return *this;
  }
  friend LqVector operator+(LqVector a, const LqVector& b) { return a += b; }
  friend LqVector operator-(LqVector a, const LqVector& b) { return a -= b; }
  friend LqVector operator*(double c, LqVector a) { return a *= c; }
};

// (sum_j w_j |v_j|^q)^(1/q)
inline double lq_norm(const FiniteMeasureSpace& s, const LqVector& v, double q) {
  require(q >= 1.0, errc::bad_exponent, "lq_norm needs q >= 1");
  require(v.size() == s.size(), errc::shape_mismatch, "vector/space size mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) acc += s.weights[j] * std::pow(std::fabs(v[j]), q);
  return std::pow(acc, 1.0 / q);
}

inline double pairing(const FiniteMeasureSpace& s, const LqVector& a, const LqVector& b) {
  require(a.size() == s.size() && b.size() == s.size(), errc::shape_mismatch,
          "pairing needs matching sizes");
  double acc = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) acc += s.weights[j] * a[j] * b[j];
  return acc;
}

} // namespace brlab
