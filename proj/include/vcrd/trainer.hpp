#pragma once

// SPDX-License-Identifier: Apache-2.0

// The distillation loop. Each iteration samples a prompt minibatch, rolls
// out the frozen teacher and the current student once per prompt, scores
// validity weights, computes the combined weighted loss, and applies one
// optimizer update from the batch-mean gradient.
//
// Determinism: every prompt slot derives its own RNG stream from
// (seed, iteration, slot), per-slot results land in slot-indexed storage,
// and the reduction walks slots in order. Worker count therefore cannot
// change any result bit.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "vcrd/judge.hpp"
#include "vcrd/loss.hpp"
#include "vcrd/policy.hpp"
#include "vcrd/rng.hpp"
#include "vcrd/tasks.hpp"
#include "vcrd/weights.hpp"

namespace vcrd {

struct MetricRecord {
  int iteration = 0;
  double lv_skl = 0.0;
  double lv_srkl = 0.0;
  double total = 0.0;
  double mean_w_teacher = 0.0;
  double mean_w_student = 0.0;
  double f_parity = 0.0;
  double f_atten = 0.0;
  double f_amp = 0.0;
  std::optional<double> eval_acc;
  // Kept in the record for the CSV contract; always 0 so identical runs
  // produce identical bytes. Real timing goes to the run summary.
  std::int64_t ms = 0;
};

using MetricSink = std::function<void(const MetricRecord&)>;

struct DistillResult {
  std::vector<MetricRecord> records;
  double final_eval_acc = 0.0;
};

namespace detail {

struct SlotResult {
  LossBreakdown loss;
  WeightSeries weights;
};

inline SlotResult run_slot(const TabularPolicy& teacher, const TabularPolicy& student,
                           const TaskInstance& instance, const JudgeConfig& judge_cfg,
                           const TrainConfig& cfg, int iteration, int slot) {
  RngStream rng = derive_stream(cfg.seed, "distill-slot", static_cast<std::uint64_t>(iteration),
                                static_cast<std::uint64_t>(slot));
  RolloutPair pair;
  pair.teacher_traj = sample_rollout(teacher, instance.prompt, cfg.horizon, rng);
  pair.student_traj = sample_rollout(student, instance.prompt, cfg.horizon, rng);

  Judge judge(judge_cfg, cfg.seed);
  judge.bind(&instance);
  SlotResult out;
  out.weights = validity_weights(teacher, student, judge, pair, cfg, rng);
  const WeightedDivLoss skl_term =
      lv_skl_loss(teacher, student, pair.teacher_traj, out.weights.w_teacher, cfg.alpha);
  const WeightedDivLoss srkl_term =
      lv_srkl_loss(teacher, student, pair.student_traj, out.weights.w_student, cfg.alpha);
  out.loss = total_loss(skl_term, srkl_term, cfg);
  return out;
}

}  // namespace detail

/// Trains the student in place against a frozen teacher. Emits one metric
/// record per iteration through `sink` (may be null). Throws on non-finite
/// loss with the offending iteration in the message.
inline DistillResult distill(const TabularPolicy& teacher, TabularPolicy& student,
                             const TaskSpec& spec, const std::vector<TaskInstance>& train,
                             const std::vector<TaskInstance>& probe,
                             const JudgeConfig& judge_cfg, const TrainConfig& cfg,
                             OptimizerState& opt, int num_workers, int eval_every,
                             const MetricSink& sink = nullptr) {
  cfg.validate();
  judge_cfg.validate();
  if (train.empty()) throw std::invalid_argument("distill: empty training set");
  if (num_workers < 1) throw std::invalid_argument("distill: num_workers must be >= 1");
  if (!(teacher.vocab() == student.vocab()))
    throw std::invalid_argument("distill: teacher and student vocabularies differ");

  DistillResult result;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    RngStream batch_rng =
        derive_stream(cfg.seed, "distill-batch", static_cast<std::uint64_t>(iter));
    std::vector<std::size_t> picks(batch);
    for (std::size_t& p : picks) p = static_cast<std::size_t>(batch_rng.next_below(train.size()));

    std::vector<detail::SlotResult> slots(batch);
    std::vector<std::exception_ptr> errors(batch);
    const int threads = static_cast<int>(std::min<std::size_t>(
        batch, static_cast<std::size_t>(num_workers)));
    if (threads <= 1) {
      for (std::size_t s = 0; s < batch; ++s)
        slots[s] = detail::run_slot(teacher, student, train[picks[s]], judge_cfg, cfg, iter,
                                    static_cast<int>(s));
    } else {
      std::atomic<std::size_t> next{0};
      auto work = [&]() {
        while (true) {
          const std::size_t s = next.fetch_add(1);
          if (s >= batch) return;
          try {
            slots[s] = detail::run_slot(teacher, student, train[picks[s]], judge_cfg, cfg, iter,
                                        static_cast<int>(s));
          } catch (...) {
            errors[s] = std::current_exception();
          }
        }
      };
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(threads));
      for (int w = 0; w < threads; ++w) pool.emplace_back(work);
      for (std::thread& th : pool) th.join();
      for (std::size_t s = 0; s < batch; ++s)
        if (errors[s]) std::rethrow_exception(errors[s]);
    }

    // Slot-ordered reduction: batch mean of losses and gradients.
    MetricRecord rec;
    rec.iteration = iter;
    GradTable batch_grads;
    const double inv_b = 1.0 / static_cast<double>(batch);
    double w_teacher_sum = 0.0;
    double w_student_sum = 0.0;
    std::size_t positions = 0;
    std::size_t n_parity = 0;
    std::size_t n_atten = 0;
    std::size_t n_amp = 0;
    for (std::size_t s = 0; s < batch; ++s) {
      const detail::SlotResult& slot = slots[s];
      rec.lv_skl += inv_b * slot.loss.lv_skl;
      rec.lv_srkl += inv_b * slot.loss.lv_srkl;
      rec.total += inv_b * slot.loss.total;
      for (const auto& [key, grad] : slot.loss.grads)
        detail::accumulate_grads(batch_grads, key, grad, inv_b);
      for (std::size_t t = 0; t < slot.weights.length(); ++t) {
        w_teacher_sum += slot.weights.w_teacher[t];
        w_student_sum += slot.weights.w_student[t];
        ++positions;
        for (Regime r : {slot.weights.regimes_teacher[t], slot.weights.regimes_student[t]}) {
          if (r == Regime::Parity) ++n_parity;
          else if (r == Regime::Attenuation) ++n_atten;
          else ++n_amp;
        }
      }
    }
    if (!std::isfinite(rec.total))
      throw std::runtime_error("distill: non-finite loss at iteration " + std::to_string(iter) +
                               " (lv_skl=" + std::to_string(rec.lv_skl) +
                               ", lv_srkl=" + std::to_string(rec.lv_srkl) + ")");
    if (positions == 0) throw std::runtime_error("distill: no scored positions in batch");
    rec.mean_w_teacher = w_teacher_sum / static_cast<double>(positions);
    rec.mean_w_student = w_student_sum / static_cast<double>(positions);
    const double labels = static_cast<double>(n_parity + n_atten + n_amp);
    rec.f_parity = static_cast<double>(n_parity) / labels;
    rec.f_atten = static_cast<double>(n_atten) / labels;
    rec.f_amp = static_cast<double>(n_amp) / labels;

    apply_update(student, batch_grads, opt);

    if (eval_every > 0 && (iter % eval_every == 0 || iter + 1 == cfg.iterations) &&
        !probe.empty()) {
      rec.eval_acc = final_answer_accuracy(student, probe, spec.horizon());
    }
    result.records.push_back(rec);
    if (sink) sink(rec);
  }

  result.final_eval_acc =
      probe.empty() ? 0.0 : final_answer_accuracy(student, probe, spec.horizon());
  return result;
}

}  // namespace vcrd
