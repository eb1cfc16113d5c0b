#pragma once

// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vcrd {

/// Floor applied to probabilities inside logarithms only. Stored
/// distributions are never modified; softmax outputs are strictly positive,
/// so the floor matters only for hand-constructed point masses.
inline constexpr double kLogFloor = 1e-12;

/// Exact probability vector over a finite vocabulary. The unit of all
/// divergence math in this library; always holds entries >= 0 summing to 1
/// within 1e-12.
struct Categorical {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }

  /// Validating constructor for externally supplied probabilities.
  static Categorical from_probs(std::vector<double> p) {
    if (p.empty()) throw std::invalid_argument("Categorical: empty probability vector");
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("Categorical: entries must be finite and >= 0");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("Categorical: entries sum to " + std::to_string(sum) +
                                  ", expected 1 within 1e-12");
    return Categorical{std::move(p)};
  }
};

/// Softmax with max-subtraction. Logits must be finite.
inline Categorical softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty logit vector");
  double mx = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) throw std::invalid_argument("softmax: non-finite logit");
    mx = std::max(mx, z);
  }
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return Categorical{std::move(p)};
}

/// Skew parameter alpha in [0, 1] controlling teacher/student mixtures.
struct SkewParam {
  double alpha;

  explicit SkewParam(double a) : alpha(a) {
    if (!(a >= 0.0 && a <= 1.0))
      throw std::invalid_argument("SkewParam: alpha must lie in [0, 1]");
  }
};

inline void require_same_vocab(const Categorical& p, const Categorical& q,
                               const char* op) {
  if (p.size() != q.size())
    throw std::invalid_argument(std::string(op) + ": dimension mismatch (" +
                                std::to_string(p.size()) + " vs " +
                                std::to_string(q.size()) + ")");
}

/// Inverse-CDF draw: maps a uniform u in [0, 1) to a token index.
inline std::size_t sample_index(const Categorical& dist, double u) {
  double c = 0.0;
  for (std::size_t i = 0; i + 1 < dist.size(); ++i) {
    c += dist.probs[i];
    if (u < c) return i;
  }
  return dist.size() - 1;
}

inline std::size_t argmax_index(const Categorical& dist) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i)
    if (dist.probs[i] > dist.probs[best]) best = i;  // ties keep lowest index
  return best;
}

}  // namespace vcrd
