#pragma once

// SPDX-License-Identifier: Apache-2.0

// Weighted prefix-conditioned divergence losses.
//
//   LV-SKL  = (1/T) sum_t w_t^T * SKL(p(.|teacher prefix) || q(.|teacher prefix))
//   LV-SRKL = (1/T) sum_t w_t^S * SRKL(p(.|student prefix) || q(.|student prefix))
//   total   = lambda_T * LV-SKL + lambda_S * LV-SRKL
//
// Divergences are exact sums over the vocabulary. Gradients are taken with
// respect to the student's raw logits at each visited state; weights enter
// as fixed multipliers.

#include <stdexcept>
#include <string>
#include <vector>

#include "vcrd/divergence.hpp"
#include "vcrd/policy.hpp"
#include "vcrd/weights.hpp"

namespace vcrd {

/// One weighted divergence term: scalar, per-position contributions that
/// sum to it, and the gradient table over visited student states.
struct WeightedDivLoss {
  double value = 0.0;
  std::vector<double> per_position;
  GradTable grads;
};

namespace detail {

inline void accumulate_grads(GradTable& table, const StateKey& key,
                             const std::vector<double>& grad, double scale) {
  auto [it, inserted] = table.try_emplace(key, grad.size(), 0.0);
  std::vector<double>& acc = it->second;
  if (acc.size() != grad.size())
    throw std::invalid_argument("accumulate_grads: gradient length mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) acc[i] += scale * grad[i];
}

inline void scale_grads(GradTable& table, double scale) {
  for (auto& [key, grad] : table)
    for (double& g : grad) g *= scale;
}

enum class DivKind { Skl, Srkl };

inline WeightedDivLoss weighted_div_loss(const TabularPolicy& teacher,
                                         const TabularPolicy& student,
                                         const Trajectory& context_traj,
                                         const std::vector<double>& weights, SkewParam alpha,
                                         DivKind kind) {
  if (!(teacher.vocab() == student.vocab()))
    throw std::invalid_argument("weighted_div_loss: teacher and student vocabularies differ");
  if (weights.size() > context_traj.length())
    throw std::invalid_argument("weighted_div_loss: more weights than rollout positions");
  const std::size_t horizon = weights.size();
  if (horizon == 0) throw std::invalid_argument("weighted_div_loss: empty weight series");

  WeightedDivLoss out;
  out.per_position.reserve(horizon);
  Prefix prefix{context_traj.prompt, {}};
  for (std::size_t t = 0; t < horizon; ++t) {
    const Categorical p = teacher.next_dist(prefix);
    const StateKey key = student.state_key(prefix);
    const std::vector<double> logits = student.logits_for(key);
    const Categorical q = softmax(logits);

    double div = 0.0;
    std::vector<double> grad;
    if (kind == DivKind::Skl) {
      div = skl(p, q, alpha);
      grad = skl_grad_logits(p, logits, alpha);
    } else {
      div = srkl(p, q, alpha);
      grad = srkl_grad_logits(p, logits, alpha);
    }
    const double w = weights[t];
    out.per_position.push_back(w * div);
    out.value += w * div;
    accumulate_grads(out.grads, key, grad, w);
    prefix.generated.push_back(context_traj.actions[t]);
  }

  const double inv_t = 1.0 / static_cast<double>(horizon);
  out.value *= inv_t;
  for (double& c : out.per_position) c *= inv_t;
  scale_grads(out.grads, inv_t);
  return out;
}

}  // namespace detail

/// Teacher-prefix term: contexts walk the teacher rollout.
inline WeightedDivLoss lv_skl_loss(const TabularPolicy& teacher, const TabularPolicy& student,
                                   const Trajectory& teacher_traj,
                                   const std::vector<double>& w_teacher, SkewParam alpha) {
  return detail::weighted_div_loss(teacher, student, teacher_traj, w_teacher, alpha,
                                   detail::DivKind::Skl);
}

/// Student-prefix term: contexts walk the student rollout.
inline WeightedDivLoss lv_srkl_loss(const TabularPolicy& teacher, const TabularPolicy& student,
                                    const Trajectory& student_traj,
                                    const std::vector<double>& w_student, SkewParam alpha) {
  return detail::weighted_div_loss(teacher, student, student_traj, w_student, alpha,
                                   detail::DivKind::Srkl);
}

struct LossBreakdown {
  double lv_skl = 0.0;
  double lv_srkl = 0.0;
  double total = 0.0;
  std::vector<double> per_position_skl;
  std::vector<double> per_position_srkl;
  GradTable grads;
};

/// total = lambda_T * lv_skl + lambda_S * lv_srkl, gradients combined with
/// the same coefficients.
inline LossBreakdown total_loss(const WeightedDivLoss& skl_term, const WeightedDivLoss& srkl_term,
                                const TrainConfig& cfg) {
  if (!(cfg.lambda_teacher >= 0.0 && cfg.lambda_student >= 0.0))
    throw std::invalid_argument("total_loss: lambda coefficients must be >= 0");
  LossBreakdown out;
  out.lv_skl = skl_term.value;
  out.lv_srkl = srkl_term.value;
  out.total = cfg.lambda_teacher * skl_term.value + cfg.lambda_student * srkl_term.value;
  out.per_position_skl = skl_term.per_position;
  out.per_position_srkl = srkl_term.per_position;
  // A zero coefficient contributes nothing; skipping it keeps the gradient
  // table free of all-zero entries, so zero-objective runs touch no state.
  if (cfg.lambda_teacher != 0.0)
    for (const auto& [key, grad] : skl_term.grads)
      detail::accumulate_grads(out.grads, key, grad, cfg.lambda_teacher);
  if (cfg.lambda_student != 0.0)
    for (const auto& [key, grad] : srkl_term.grads)
      detail::accumulate_grads(out.grads, key, grad, cfg.lambda_student);
  return out;
}

}  // namespace vcrd
