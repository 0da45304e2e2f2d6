#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace provbind {

using Vec = std::vector<double>;

/// Every distance in the pipeline goes through this function so that radii
/// computed at profiling time and distances computed at detection time are
/// bitwise comparable.
inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline double l2_norm(std::span<const double> a) {
  double acc = 0.0;
  for (const double x : a) acc += x * x;
  return std::sqrt(acc);
}

/// Cosine similarity; 0 when either vector has zero norm.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (na * nb);
}

}  // namespace provbind
