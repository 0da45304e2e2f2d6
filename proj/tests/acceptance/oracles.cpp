#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

Vec action_frequency(const Vec& counts) {
  double sq = 0.0;
  for (const double c : counts) sq += c * c;
  Vec out(counts.size(), 0.0);
  if (sq == 0.0) return out;
  const double norm = std::sqrt(sq);
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = counts[i] / norm;
  return out;
}

Vec temporal(std::vector<std::int64_t> ts) {
  std::sort(ts.begin(), ts.end());
  if (ts.size() < 2) return {0.0, 0.0, 0.0};
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double sum = 0.0;
  for (std::size_t i = 1; i < ts.size(); ++i) {
    const double gap = static_cast<double>(ts[i] - ts[i - 1]);
    lo = std::min(lo, gap);
    hi = std::max(hi, gap);
    sum += gap;
  }
  const double mean = sum / static_cast<double>(ts.size() - 1);
  const Vec s{lo, hi, mean};
  const double smin = std::min({lo, hi, mean});
  const double smax = std::max({lo, hi, mean});
  if (smax == smin) return {0.0, 0.0, 0.0};
  return {(s[0] - smin) / (smax - smin), (s[1] - smin) / (smax - smin), (s[2] - smin) / (smax - smin)};
}

Vec centroid(const std::vector<Vec>& members) {
  Vec out(members.front().size(), 0.0);
  for (const auto& m : members)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += m[k];
  for (auto& x : out) x /= static_cast<double>(members.size());
  return out;
}

double distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

double radius(const std::vector<Vec>& members, const Vec& c, double eps) {
  const double need = (1.0 - eps) * static_cast<double>(members.size());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& cand : members) {
    const double r = distance(cand, c);
    std::size_t inside = 0;
    for (const auto& m : members)
      if (distance(m, c) <= r) ++inside;
    if (static_cast<double>(inside) >= need - 1e-12) best = std::min(best, r);
  }
  return best;
}

std::string nearest(const Vec& z, const std::map<std::string, Vec>& centroids, double* dist) {
  std::string best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [label, c] : centroids) {
    const double d = distance(z, c);
    if (d < best_d) {  // map order already gives the smallest label on ties
      best_d = d;
      best = label;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

double cosine(const Vec& a, const Vec& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

}  // namespace oracle
