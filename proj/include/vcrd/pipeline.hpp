#pragma once

// SPDX-License-Identifier: Apache-2.0

// End-to-end run plumbing shared by the CLI and the ablation grid:
// data generation, teacher fit, student supervised initialization, and the
// distillation run, all derived deterministically from one seed.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcrd/config.hpp"
#include "vcrd/judge.hpp"
#include "vcrd/policy.hpp"
#include "vcrd/rng.hpp"
#include "vcrd/tasks.hpp"
#include "vcrd/trainer.hpp"

namespace vcrd {

struct PipelineData {
  TaskSpec spec;
  std::vector<TaskInstance> train;
  std::vector<TaskInstance> probe;
};

inline PipelineData prepare_data(const RunConfig& cfg, std::uint64_t seed) {
  PipelineData data{cfg.make_task_spec(), {}, {}};
  RngStream train_rng = derive_stream(seed, "gen-data", "train");
  RngStream probe_rng = derive_stream(seed, "gen-data", "eval");
  data.train = gen_instances(data.spec, cfg.data_train_count, train_rng);
  data.probe = gen_instances(data.spec, cfg.data_eval_count, probe_rng);
  return data;
}

inline FitResult make_teacher(const RunConfig& cfg, const TaskSpec& spec,
                              const std::vector<TaskInstance>& train, std::uint64_t seed) {
  // The student may be fit under-windowed on purpose; the teacher may not.
  if (spec.kind == TaskKind::Chain && cfg.teacher_window < spec.chain_length + 1)
    throw std::invalid_argument(
        "make_teacher: chain task needs teacher window >= chain_length + 1 to disambiguate "
        "states");
  RngStream rng = derive_stream(seed, "fit-teacher");
  return fit_teacher(spec, train, cfg.teacher_window, cfg.teacher_epochs, cfg.teacher_lr, rng);
}

inline FitResult make_sft_student(const RunConfig& cfg, const TaskSpec& spec,
                                  const std::vector<TaskInstance>& train, std::uint64_t seed) {
  RngStream rng = derive_stream(seed, "sft-student");
  return fit_teacher(spec, train, cfg.student_window, cfg.student_sft_epochs, cfg.student_sft_lr,
                     rng);
}

struct PipelineResult {
  double teacher_acc = 0.0;
  double sft_acc = 0.0;
  double final_acc = 0.0;
  std::vector<MetricRecord> records;
  TabularPolicy student;
};

/// Full run from scratch under one seed. Refuses to distill when the fitted
/// teacher is not strictly better than the supervised student on the probe
/// set; a distillation experiment without that gap measures nothing.
inline PipelineResult run_pipeline(const RunConfig& cfg, std::uint64_t seed,
                                   const MetricSink& sink = nullptr,
                                   bool require_teacher_superiority = true) {
  cfg.validate();
  PipelineData data = prepare_data(cfg, seed);
  FitResult teacher = make_teacher(cfg, data.spec, data.train, seed);
  FitResult student = make_sft_student(cfg, data.spec, data.train, seed);

  const double teacher_acc = final_answer_accuracy(teacher.policy, data.probe,
                                                   data.spec.horizon());
  const double sft_acc = final_answer_accuracy(student.policy, data.probe, data.spec.horizon());
  if (require_teacher_superiority && !(teacher_acc > sft_acc))
    throw std::runtime_error(
        "run_pipeline: teacher does not beat the supervised student on the probe set "
        "(teacher=" + format_double(teacher_acc) + ", student=" + format_double(sft_acc) +
        "); adjust windows or fit epochs");

  TrainConfig train_cfg = cfg.make_train_config();
  train_cfg.seed = seed;
  OptimizerState opt = cfg.make_optimizer();
  DistillResult distilled =
      distill(teacher.policy, student.policy, data.spec, data.train, data.probe,
              cfg.make_judge_config(), train_cfg, opt, cfg.run_num_workers, cfg.run_eval_every,
              sink);

  return PipelineResult{teacher_acc, sft_acc, distilled.final_eval_acc,
                        std::move(distilled.records), std::move(student.policy)};
}

}  // namespace vcrd
