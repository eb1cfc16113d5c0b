#pragma once

// SPDX-License-Identifier: Apache-2.0

// KL divergences, skew mixtures, and the skew-KL / skew-reverse-KL pair with
// closed-form gradients with respect to raw student logits. All divergences
// are exact sums over the vocabulary, in nats.

#include <cmath>
#include <span>
#include <vector>

#include "vcrd/categorical.hpp"

namespace vcrd {

/// KL(p || q) in nats, with the 0 log 0 = 0 convention. q entries are
/// floored at 1e-12 inside the log; stored distributions stay untouched.
inline double kl(const Categorical& p, const Categorical& q) {
  require_same_vocab(p, q, "kl");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.probs[i] == 0.0) continue;
    d += p.probs[i] * std::log(p.probs[i] / std::max(q.probs[i], kLogFloor));
  }
  return d;
}

/// alpha * p + (1 - alpha) * q, elementwise.
inline Categorical skew_mixture(const Categorical& p, const Categorical& q,
                                SkewParam alpha) {
  require_same_vocab(p, q, "skew_mixture");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    m[i] = alpha.alpha * p.probs[i] + (1.0 - alpha.alpha) * q.probs[i];
  return Categorical{std::move(m)};
}

/// Skew KL: KL(p || alpha*p + (1-alpha)*q). Zero iff p = q or alpha = 1.
inline double skl(const Categorical& p, const Categorical& q, SkewParam alpha) {
  return kl(p, skew_mixture(p, q, alpha));
}

/// Skew reverse KL: KL(q || (1-alpha)*p + alpha*q).
inline double srkl(const Categorical& p, const Categorical& q, SkewParam alpha) {
  require_same_vocab(p, q, "srkl");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    m[i] = (1.0 - alpha.alpha) * p.probs[i] + alpha.alpha * q.probs[i];
  return kl(q, Categorical{std::move(m)});
}

namespace detail {

/// Projects a gradient in probability space through the softmax Jacobian:
/// grad_z[k] = q_k * (g_k - sum_j g_j q_j).
inline std::vector<double> through_softmax(const Categorical& q,
                                           std::span<const double> g) {
  double dot = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) dot += g[j] * q.probs[j];
  std::vector<double> grad(q.size());
  for (std::size_t k = 0; k < q.size(); ++k)
    grad[k] = q.probs[k] * (g[k] - dot);
  return grad;
}

}  // namespace detail

/// d/d(logits) of skl(p, softmax(logits), alpha). The mixture term gives
/// dL/dq_j = -(1-alpha) * p_j / m_j.
inline std::vector<double> skl_grad_logits(const Categorical& p,
                                           std::span<const double> student_logits,
                                           SkewParam alpha) {
  Categorical q = softmax(student_logits);
  require_same_vocab(p, q, "skl_grad_logits");
  const double a = alpha.alpha;
  std::vector<double> g(p.size(), 0.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p.probs[j] == 0.0) continue;
    const double m = std::max(a * p.probs[j] + (1.0 - a) * q.probs[j], kLogFloor);
    g[j] = -(1.0 - a) * p.probs[j] / m;
  }
  return detail::through_softmax(q, g);
}

/// d/d(logits) of srkl(p, softmax(logits), alpha). q appears both as the
/// outer distribution and inside the mixture:
/// dL/dq_j = log(q_j / u_j) + 1 - alpha * q_j / u_j with u = (1-a)p + a*q.
/// The constant +1 vanishes through the softmax projection.
inline std::vector<double> srkl_grad_logits(const Categorical& p,
                                            std::span<const double> student_logits,
                                            SkewParam alpha) {
  Categorical q = softmax(student_logits);
  require_same_vocab(p, q, "srkl_grad_logits");
  const double a = alpha.alpha;
  std::vector<double> g(p.size(), 0.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double u = std::max((1.0 - a) * p.probs[j] + a * q.probs[j], kLogFloor);
    const double qj = std::max(q.probs[j], kLogFloor);
    g[j] = std::log(qj / u) + 1.0 - a * q.probs[j] / u;
  }
  return detail::through_softmax(q, g);
}

}  // namespace vcrd
