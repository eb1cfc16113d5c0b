#pragma once

// SPDX-License-Identifier: Apache-2.0

// Reward-ratio distribution diagnostics. For each instance both policies
// are rolled out once; then, at every prefix of each rollout (teacher-
// prefix and student-prefix conventions), both policies propose a next
// token through a shared uniform draw and the raw ratio
//
//   rho = r(prefix, student proposal) / r(prefix, teacher proposal)
//
// is recorded. The shared draw makes identical policies propose identical
// tokens, so rho is exactly 1 there. Ratios are raw (no epsilon): the
// smoothed form belongs to training weights, not to this diagnostic.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcrd/judge.hpp"
#include "vcrd/policy.hpp"
#include "vcrd/rng.hpp"
#include "vcrd/tasks.hpp"

namespace vcrd {

/// Log-spaced histogram with open-ended tails. Every added value lands in
/// exactly one bucket, so counts always sum to the number of additions.
struct RatioHistogram {
  double lo = 1e-2;
  double hi = 1e2;
  int bins = 40;
  std::vector<std::uint64_t> counts;
  std::uint64_t underflow = 0;
  std::uint64_t overflow = 0;

  RatioHistogram() : counts(static_cast<std::size_t>(bins), 0) {}

  RatioHistogram(double lo_, double hi_, int bins_)
      : lo(lo_), hi(hi_), bins(bins_), counts(static_cast<std::size_t>(bins_), 0) {
    if (!(lo > 0.0 && hi > lo)) throw std::invalid_argument("RatioHistogram: need 0 < lo < hi");
    if (bins < 1) throw std::invalid_argument("RatioHistogram: bins must be >= 1");
  }

  double edge(int i) const {
    return lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(bins));
  }

  void add(double value) {
    if (!(value >= 0.0)) throw std::invalid_argument("RatioHistogram: negative value");
    if (value < lo) {
      ++underflow;
      return;
    }
    if (value >= hi) {
      ++overflow;
      return;
    }
    auto idx = static_cast<int>(std::floor(static_cast<double>(bins) * std::log(value / lo) /
                                           std::log(hi / lo)));
    idx = std::min(std::max(idx, 0), bins - 1);
    ++counts[static_cast<std::size_t>(idx)];
  }

  std::uint64_t total() const {
    std::uint64_t sum = underflow + overflow;
    for (std::uint64_t c : counts) sum += c;
    return sum;
  }
};

struct RatioReport {
  RatioHistogram hist_teacher_prefix;
  RatioHistogram hist_student_prefix;
  std::uint64_t positions_teacher_prefix = 0;
  std::uint64_t positions_student_prefix = 0;
  std::uint64_t ge1_teacher_prefix = 0;
  std::uint64_t ge1_student_prefix = 0;

  std::uint64_t positions_total() const {
    return positions_teacher_prefix + positions_student_prefix;
  }
  double fraction_ge1_teacher_prefix() const {
    return static_cast<double>(ge1_teacher_prefix) /
           static_cast<double>(positions_teacher_prefix);
  }
  double fraction_ge1_student_prefix() const {
    return static_cast<double>(ge1_student_prefix) /
           static_cast<double>(positions_student_prefix);
  }
  double fraction_ge1_overall() const {
    return static_cast<double>(ge1_teacher_prefix + ge1_student_prefix) /
           static_cast<double>(positions_total());
  }
};

namespace detail {

/// Equal scores give exactly 1; a zero denominator with a larger numerator
/// lands in the overflow tail instead of dividing by zero.
inline double raw_ratio(double r_s, double r_t) {
  if (r_s == r_t) return 1.0;
  return r_s / std::max(r_t, 1e-300);
}

}  // namespace detail

inline RatioReport analyze_ratios(const TabularPolicy& teacher, const TabularPolicy& student,
                                  const TaskSpec& spec,
                                  const std::vector<TaskInstance>& instances,
                                  const JudgeConfig& judge_cfg, std::uint64_t seed) {
  if (instances.empty()) throw std::invalid_argument("analyze_ratios: empty instance list");
  if (!(teacher.vocab() == student.vocab()))
    throw std::invalid_argument("analyze_ratios: teacher and student vocabularies differ");
  judge_cfg.validate();
  if (judge_cfg.kind == JudgeKind::PrmFree)
    throw std::invalid_argument("analyze_ratios: needs a scoring judge, not prm_free");

  RatioReport report;
  const int horizon = spec.horizon();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const TaskInstance& inst = instances[i];
    RngStream rng = derive_stream(seed, "analyze-ratios", static_cast<std::uint64_t>(i));
    const Trajectory teacher_traj = sample_rollout(teacher, inst.prompt, horizon, rng);
    const Trajectory student_traj = sample_rollout(student, inst.prompt, horizon, rng);
    Judge judge(judge_cfg, seed);
    judge.bind(&inst);

    auto walk = [&](const Trajectory& traj, RatioHistogram& hist, std::uint64_t& positions,
                    std::uint64_t& ge1) {
      Prefix prefix{inst.prompt, {}};
      for (std::size_t t = 0; t < traj.length(); ++t) {
        const double u = rng.next_double();
        const auto a_teacher = static_cast<TokenId>(sample_index(teacher.next_dist(prefix), u));
        const auto a_student = static_cast<TokenId>(sample_index(student.next_dist(prefix), u));
        const double r_t = judge.score(prefix, a_teacher).value;
        const double r_s = judge.score(prefix, a_student).value;
        const double rho = detail::raw_ratio(r_s, r_t);
        hist.add(rho);
        ++positions;
        if (rho >= 1.0) ++ge1;
        prefix.generated.push_back(traj.actions[t]);
      }
    };
    walk(teacher_traj, report.hist_teacher_prefix, report.positions_teacher_prefix,
         report.ge1_teacher_prefix);
    walk(student_traj, report.hist_student_prefix, report.positions_student_prefix,
         report.ge1_student_prefix);
  }
  return report;
}

/// Histogram CSV: one row per bucket, tails included, per-convention and
/// combined counts.
inline void write_ratio_histogram_csv(const RatioReport& report, std::ostream& out) {
  const RatioHistogram& ht = report.hist_teacher_prefix;
  const RatioHistogram& hs = report.hist_student_prefix;
  if (ht.bins != hs.bins) throw std::invalid_argument("write_ratio_histogram_csv: bin mismatch");
  out << "bin_lo,bin_hi,count_teacher_prefix,count_student_prefix,count_total\n";
  out << "0," << ht.lo << "," << ht.underflow << "," << hs.underflow << ","
      << (ht.underflow + hs.underflow) << "\n";
  for (int b = 0; b < ht.bins; ++b) {
    const auto i = static_cast<std::size_t>(b);
    out << ht.edge(b) << "," << ht.edge(b + 1) << "," << ht.counts[i] << "," << hs.counts[i]
        << "," << (ht.counts[i] + hs.counts[i]) << "\n";
  }
  out << ht.hi << ",inf," << ht.overflow << "," << hs.overflow << ","
      << (ht.overflow + hs.overflow) << "\n";
}

inline void write_ratio_histogram_csv(const RatioReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_ratio_histogram_csv: cannot open '" + path + "'");
  write_ratio_histogram_csv(report, out);
  if (!out) throw std::runtime_error("write_ratio_histogram_csv: write failed for '" + path + "'");
}

}  // namespace vcrd
