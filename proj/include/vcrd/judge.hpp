#pragma once

// SPDX-License-Identifier: Apache-2.0

// Local validity scoring r(c, a) in [0, 1]. An oracle judge scores against a
// task's valid-next sets, a noisy wrapper perturbs scores reproducibly, and
// prm_free_weight turns teacher likelihood into a ratio-like weight without
// any judge at all.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcrd/categorical.hpp"
#include "vcrd/policy.hpp"
#include "vcrd/rng.hpp"
#include "vcrd/tasks.hpp"

namespace vcrd {

struct ValidityScore {
  double value = 0.0;

  explicit ValidityScore(double v) : value(v) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("ValidityScore: value must lie in [0, 1]");
  }
};

enum class JudgeKind { Oracle, NoisyOracle, PrmFree };

inline std::string judge_kind_name(JudgeKind kind) {
  switch (kind) {
    case JudgeKind::Oracle: return "oracle";
    case JudgeKind::NoisyOracle: return "noisy_oracle";
    case JudgeKind::PrmFree: return "prm_free";
  }
  throw std::logic_error("judge_kind_name: unreachable");
}

inline JudgeKind parse_judge_kind(const std::string& name) {
  if (name == "oracle") return JudgeKind::Oracle;
  if (name == "noisy_oracle") return JudgeKind::NoisyOracle;
  if (name == "prm_free") return JudgeKind::PrmFree;
  throw std::invalid_argument("parse_judge_kind: unknown judge '" + name + "'");
}

struct JudgeConfig {
  JudgeKind kind = JudgeKind::Oracle;
  double r_floor = 0.1;
  double noise_scale = 0.0;
  int k = 128;
  double gamma = 0.5;
  double clamp_lo = 0.5;
  double clamp_hi = 2.0;
  double epsilon = 1e-8;

  void validate() const {
    if (!(r_floor > 0.0 && r_floor < 1.0))
      throw std::invalid_argument("JudgeConfig: r_floor must lie in (0, 1)");
    if (!(noise_scale >= 0.0))
      throw std::invalid_argument("JudgeConfig: noise_scale must be >= 0");
    if (k < 1) throw std::invalid_argument("JudgeConfig: k must be >= 1");
    if (!(gamma > 0.0)) throw std::invalid_argument("JudgeConfig: gamma must be > 0");
    if (!(clamp_lo > 0.0 && clamp_lo <= 1.0 && clamp_hi >= 1.0))
      throw std::invalid_argument("JudgeConfig: need 0 < clamp_lo <= 1 <= clamp_hi");
    if (!(epsilon > 0.0)) throw std::invalid_argument("JudgeConfig: epsilon must be > 0");
  }
};

/// 1.0 if the token continues some gold trajectory, else the floor. The
/// floor is positive so ratio weights stay finite off-path.
inline ValidityScore oracle_score(const TaskInstance& instance, const Prefix& prefix,
                                  TokenId token, double r_floor) {
  const std::set<TokenId> valid = valid_next(instance, prefix);
  return ValidityScore{valid.count(token) ? 1.0 : r_floor};
}

/// Multiplicative uniform noise in [1 - s, 1 + s], clipped back to [0, 1].
inline ValidityScore noisy_score(ValidityScore base, double noise_scale, RngStream& rng) {
  if (noise_scale == 0.0) return base;
  const double u = 1.0 - noise_scale + 2.0 * noise_scale * rng.next_double();
  return ValidityScore{std::clamp(base.value * u, 0.0, 1.0)};
}

/// Teacher-likelihood weight: raw = p_t(token) / (top-k collision mass + eps),
/// then w = exp(clip(gamma * ln raw, ln lo, ln hi)). Clamped results return
/// the configured bound bit-exactly.
inline double prm_free_weight(const Categorical& teacher_dist, TokenId student_token,
                              const JudgeConfig& cfg) {
  cfg.validate();
  const std::size_t v = teacher_dist.size();
  if (v == 0) throw std::invalid_argument("prm_free_weight: empty distribution");
  if (student_token < 0 || static_cast<std::size_t>(student_token) >= v)
    throw std::out_of_range("prm_free_weight: token out of range");

  const std::size_t k_eff = std::min<std::size_t>(static_cast<std::size_t>(cfg.k), v);
  std::vector<double> probs = teacher_dist.probs;
  std::partial_sort(probs.begin(), probs.begin() + static_cast<std::ptrdiff_t>(k_eff),
                    probs.end(), std::greater<double>());
  double collision = 0.0;
  for (std::size_t i = 0; i < k_eff; ++i) collision += probs[i] * probs[i];

  const double raw =
      teacher_dist.probs[static_cast<std::size_t>(student_token)] / (collision + cfg.epsilon);
  const double x = cfg.gamma * std::log(std::max(raw, kLogFloor));
  if (x <= std::log(cfg.clamp_lo)) return cfg.clamp_lo;
  if (x >= std::log(cfg.clamp_hi)) return cfg.clamp_hi;
  return std::exp(x);
}

namespace detail {

/// Noise substream tag: prompt and generated segments hashed separately so
/// (prompt=[a b], gen=[]) and (prompt=[a], gen=[b]) draw different noise.
inline std::uint64_t prefix_noise_tag(const Prefix& prefix, TokenId token) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  mix(prefix.prompt.size());
  for (TokenId t : prefix.prompt) mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)));
  mix(0xabcdabcdULL);
  for (TokenId t : prefix.generated)
    mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)));
  mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(token)));
  return h;
}

}  // namespace detail

/// A configured judge, optionally bound to the task instance it scores.
/// Noisy scores are pure functions of (seed, prefix, token), so rescoring
/// the same pair inside one batch is consistent.
class Judge {
 public:
  Judge(JudgeConfig cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) { cfg_.validate(); }

  const JudgeConfig& config() const { return cfg_; }

  void bind(const TaskInstance* instance) { instance_ = instance; }

  ValidityScore score(const Prefix& prefix, TokenId token) const {
    if (cfg_.kind == JudgeKind::PrmFree)
      throw std::logic_error("Judge::score: prm_free weights come from prm_free_weight");
    if (instance_ == nullptr)
      throw std::logic_error("Judge::score: oracle judge is not bound to a task instance");
    const ValidityScore base = oracle_score(*instance_, prefix, token, cfg_.r_floor);
    if (cfg_.kind == JudgeKind::Oracle || cfg_.noise_scale == 0.0) return base;
    RngStream noise =
        derive_stream(seed_, "judge-noise", detail::prefix_noise_tag(prefix, token));
    return noisy_score(base, cfg_.noise_scale, noise);
  }

 private:
  JudgeConfig cfg_;
  std::uint64_t seed_ = 0;
  const TaskInstance* instance_ = nullptr;
};

}  // namespace vcrd
