#pragma once

// SPDX-License-Identifier: Apache-2.0

// Validity-ratio weights. For each position t and each prefix convention
// (teacher rollout prefix, student rollout prefix) the weight is
//
//   w_t = r(prefix, student token) / (r(prefix, teacher token) + epsilon)
//
// under the ratio rule; alternative rules reuse the same scores. Weights are
// plain numbers with no gradient: they rescale updates, never redirect them.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcrd/judge.hpp"
#include "vcrd/policy.hpp"
#include "vcrd/rng.hpp"

namespace vcrd {

/// Teacher rollout y^T and student rollout y^S from one shared prompt.
struct RolloutPair {
  Trajectory teacher_traj;
  Trajectory student_traj;

  void validate() const {
    if (teacher_traj.prompt != student_traj.prompt)
      throw std::invalid_argument("RolloutPair: trajectories have different prompts");
  }

  /// Positions carrying weights and losses: the shorter rollout bounds both.
  std::size_t horizon() const {
    return std::min(teacher_traj.length(), student_traj.length());
  }
};

enum class Regime { Parity, Attenuation, Amplification };

inline std::string regime_name(Regime r) {
  switch (r) {
    case Regime::Parity: return "parity";
    case Regime::Attenuation: return "attenuation";
    case Regime::Amplification: return "amplification";
  }
  throw std::logic_error("regime_name: unreachable");
}

inline Regime classify_regime(double w, double parity_band) {
  if (!(w > 0.0)) throw std::invalid_argument("classify_regime: weight must be > 0");
  if (!(parity_band >= 0.0))
    throw std::invalid_argument("classify_regime: parity_band must be >= 0");
  if (std::abs(w - 1.0) <= parity_band) return Regime::Parity;
  return w < 1.0 ? Regime::Attenuation : Regime::Amplification;
}

enum class WeightRule { Ratio, RsOnly, RsMinusRt, PrmFree, Uniform };

inline std::string weight_rule_name(WeightRule rule) {
  switch (rule) {
    case WeightRule::Ratio: return "ratio";
    case WeightRule::RsOnly: return "rs_only";
    case WeightRule::RsMinusRt: return "rs_minus_rt";
    case WeightRule::PrmFree: return "prm_free";
    case WeightRule::Uniform: return "uniform";
  }
  throw std::logic_error("weight_rule_name: unreachable");
}

inline WeightRule parse_weight_rule(const std::string& name) {
  if (name == "ratio") return WeightRule::Ratio;
  if (name == "rs_only") return WeightRule::RsOnly;
  if (name == "rs_minus_rt") return WeightRule::RsMinusRt;
  if (name == "prm_free") return WeightRule::PrmFree;
  if (name == "uniform") return WeightRule::Uniform;
  throw std::invalid_argument("parse_weight_rule: unknown rule '" + name + "'");
}

enum class TokenSource { Rollout, Resample };

inline std::string token_source_name(TokenSource s) {
  return s == TokenSource::Rollout ? "rollout" : "resample";
}

inline TokenSource parse_token_source(const std::string& name) {
  if (name == "rollout") return TokenSource::Rollout;
  if (name == "resample") return TokenSource::Resample;
  throw std::invalid_argument("parse_token_source: unknown source '" + name + "'");
}

struct TrainConfig {
  double lambda_teacher = 1.0;
  double lambda_student = 1.0;
  SkewParam alpha{0.1};
  double epsilon = 1e-8;
  WeightRule weight_rule = WeightRule::Ratio;
  bool clamp_amplification = false;
  TokenSource weight_token_source = TokenSource::Rollout;
  double parity_band = 0.05;
  int horizon = 0;
  int batch_size = 8;
  int iterations = 200;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lambda_teacher >= 0.0 && lambda_student >= 0.0))
      throw std::invalid_argument("TrainConfig: lambda coefficients must be >= 0");
    if (!(epsilon > 0.0)) throw std::invalid_argument("TrainConfig: epsilon must be > 0");
    if (!(parity_band >= 0.0))
      throw std::invalid_argument("TrainConfig: parity_band must be >= 0");
    if (horizon < 1) throw std::invalid_argument("TrainConfig: horizon must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (iterations < 0) throw std::invalid_argument("TrainConfig: iterations must be >= 0");
  }
};

/// Score-based rules. prm_free is not expressible as f(r_s, r_t) and is
/// handled where the teacher distribution is available.
inline double apply_weight_rule(double r_s, double r_t, WeightRule rule, double epsilon) {
  if (!(r_s >= 0.0 && r_s <= 1.0 && r_t >= 0.0 && r_t <= 1.0))
    throw std::invalid_argument("apply_weight_rule: scores must lie in [0, 1]");
  switch (rule) {
    case WeightRule::Ratio: return r_s / (r_t + epsilon);
    case WeightRule::RsOnly: return r_s;
    case WeightRule::RsMinusRt: return std::exp(r_s - r_t);
    case WeightRule::Uniform: return 1.0;
    case WeightRule::PrmFree: break;
  }
  throw std::invalid_argument("apply_weight_rule: prm_free needs the teacher distribution");
}

/// Per-position weights and diagnostics for one rollout pair. Judge scores
/// are kept so logged weights can be audited against the rule formula.
struct WeightSeries {
  std::vector<double> w_teacher;
  std::vector<double> w_student;
  std::vector<Regime> regimes_teacher;
  std::vector<Regime> regimes_student;
  std::vector<double> rs_teacher_prefix;
  std::vector<double> rt_teacher_prefix;
  std::vector<double> rs_student_prefix;
  std::vector<double> rt_student_prefix;

  std::size_t length() const { return w_teacher.size(); }
};

/// Caps every weight at 1, disabling the amplification regime.
inline WeightSeries clamp_weights(WeightSeries series) {
  for (double& w : series.w_teacher) w = std::min(w, 1.0);
  for (double& w : series.w_student) w = std::min(w, 1.0);
  return series;
}

namespace detail {

inline TokenId draw_token(const TabularPolicy& policy, const Prefix& prefix, RngStream& rng) {
  return static_cast<TokenId>(sample_index(policy.next_dist(prefix), rng.next_double()));
}

}  // namespace detail

/// Computes w_t^T (teacher-prefix) and w_t^S (student-prefix) for every
/// position of the pair. Under rollout sourcing the scored tokens are the
/// rollout tokens at t; under resample each policy proposes a fresh token
/// conditioned on the prefix being scored. Resampling draws in a fixed
/// order (teacher then student, teacher prefix then student prefix), so the
/// series is a pure function of (inputs, rng state).
inline WeightSeries validity_weights(const TabularPolicy& teacher, const TabularPolicy& student,
                                     const Judge& judge, const RolloutPair& pair,
                                     const TrainConfig& cfg, RngStream& rng) {
  pair.validate();
  const std::size_t horizon = pair.horizon();
  WeightSeries series;
  series.w_teacher.reserve(horizon);
  series.w_student.reserve(horizon);

  Prefix teacher_prefix{pair.teacher_traj.prompt, {}};
  Prefix student_prefix{pair.student_traj.prompt, {}};
  for (std::size_t t = 0; t < horizon; ++t) {
    TokenId a_teacher_on_tp = pair.teacher_traj.actions[t];
    TokenId a_student_on_tp = pair.student_traj.actions[t];
    TokenId a_teacher_on_sp = pair.teacher_traj.actions[t];
    TokenId a_student_on_sp = pair.student_traj.actions[t];
    if (cfg.weight_token_source == TokenSource::Resample) {
      a_teacher_on_tp = detail::draw_token(teacher, teacher_prefix, rng);
      a_student_on_tp = detail::draw_token(student, teacher_prefix, rng);
      a_teacher_on_sp = detail::draw_token(teacher, student_prefix, rng);
      a_student_on_sp = detail::draw_token(student, student_prefix, rng);
    }

    double w_t = 0.0;
    double w_s = 0.0;
    if (cfg.weight_rule == WeightRule::PrmFree) {
      series.rs_teacher_prefix.push_back(0.0);
      series.rt_teacher_prefix.push_back(0.0);
      series.rs_student_prefix.push_back(0.0);
      series.rt_student_prefix.push_back(0.0);
      w_t = prm_free_weight(teacher.next_dist(teacher_prefix), a_student_on_tp, judge.config());
      w_s = prm_free_weight(teacher.next_dist(student_prefix), a_student_on_sp, judge.config());
    } else {
      const double rs_tp = judge.score(teacher_prefix, a_student_on_tp).value;
      const double rt_tp = judge.score(teacher_prefix, a_teacher_on_tp).value;
      const double rs_sp = judge.score(student_prefix, a_student_on_sp).value;
      const double rt_sp = judge.score(student_prefix, a_teacher_on_sp).value;
      series.rs_teacher_prefix.push_back(rs_tp);
      series.rt_teacher_prefix.push_back(rt_tp);
      series.rs_student_prefix.push_back(rs_sp);
      series.rt_student_prefix.push_back(rt_sp);
      w_t = apply_weight_rule(rs_tp, rt_tp, cfg.weight_rule, cfg.epsilon);
      w_s = apply_weight_rule(rs_sp, rt_sp, cfg.weight_rule, cfg.epsilon);
    }
    series.w_teacher.push_back(w_t);
    series.w_student.push_back(w_s);

    teacher_prefix.generated.push_back(pair.teacher_traj.actions[t]);
    student_prefix.generated.push_back(pair.student_traj.actions[t]);
  }

  if (cfg.clamp_amplification) series = clamp_weights(std::move(series));
  for (std::size_t t = 0; t < horizon; ++t) {
    series.regimes_teacher.push_back(classify_regime(series.w_teacher[t], cfg.parity_band));
    series.regimes_student.push_back(classify_regime(series.w_student[t], cfg.parity_band));
  }
  return series;
}

}  // namespace vcrd
