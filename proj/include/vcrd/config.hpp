#pragma once

// SPDX-License-Identifier: Apache-2.0

// Run configuration: a flat `key = value` text file with dotted keys, plus
// command-line overrides in the same syntax. Unknown keys are hard errors;
// a silently ignored typo is the classic way to ship the wrong experiment.
// The full key set echoes back out in canonical order, and the echo
// re-parses to an identical config.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcrd/checkpoint.hpp"
#include "vcrd/judge.hpp"
#include "vcrd/policy.hpp"
#include "vcrd/tasks.hpp"
#include "vcrd/weights.hpp"

namespace vcrd {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::int64_t parse_int(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("config: key '" + key + "' needs an integer, got '" + text + "'");
  return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("config: key '" + key + "' needs a non-negative integer, got '" +
                                text + "'");
  return v;
}

inline double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("config: key '" + key + "' needs a real number, got '" + text +
                                "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw std::invalid_argument("config: key '" + key + "' needs true or false, got '" + text +
                              "'");
}

}  // namespace detail

struct RunConfig {
  // task
  std::string task_kind = "chain";
  int task_modulus = 7;
  int task_chain_length = 3;
  int task_operand_count = 3;
  // data
  int data_train_count = 200;
  int data_eval_count = 200;
  // teacher
  int teacher_window = 4;
  int teacher_epochs = 60;
  double teacher_lr = 0.5;
  // student
  int student_window = 2;
  int student_sft_epochs = 2;
  double student_sft_lr = 0.5;
  // judge
  std::string judge_kind = "oracle";
  double judge_r_floor = 0.1;
  double judge_noise_scale = 0.0;
  int judge_k = 128;
  double judge_gamma = 0.5;
  double judge_clamp_lo = 0.5;
  double judge_clamp_hi = 2.0;
  double judge_epsilon = 1e-8;
  // train
  double train_lambda_teacher = 1.0;
  double train_lambda_student = 1.0;
  double train_alpha = 0.1;
  double train_epsilon = 1e-8;
  std::string train_weight_rule = "ratio";
  bool train_clamp_amplification = false;
  std::string train_weight_token_source = "rollout";
  double train_parity_band = 0.05;
  int train_batch_size = 8;
  int train_iterations = 200;
  // optimizer
  std::string opt_kind = "sgd";
  double opt_lr = 0.1;
  // run
  std::uint64_t run_seed = 0;
  int run_num_workers = 1;
  int run_eval_every = 20;
  std::string run_out_dir = "out";
  // ablate
  int ablate_seeds = 5;

  TaskSpec make_task_spec() const {
    const TaskKind kind = parse_task_kind(task_kind);
    return kind == TaskKind::Chain ? TaskSpec::chain(task_modulus, task_chain_length)
                                   : TaskSpec::multipath(task_modulus, task_operand_count);
  }

  JudgeConfig make_judge_config() const {
    JudgeConfig cfg;
    cfg.kind = parse_judge_kind(judge_kind);
    cfg.r_floor = judge_r_floor;
    cfg.noise_scale = judge_noise_scale;
    cfg.k = judge_k;
    cfg.gamma = judge_gamma;
    cfg.clamp_lo = judge_clamp_lo;
    cfg.clamp_hi = judge_clamp_hi;
    cfg.epsilon = judge_epsilon;
    cfg.validate();
    return cfg;
  }

  TrainConfig make_train_config() const {
    TrainConfig cfg;
    cfg.lambda_teacher = train_lambda_teacher;
    cfg.lambda_student = train_lambda_student;
    cfg.alpha = SkewParam{train_alpha};
    cfg.epsilon = train_epsilon;
    cfg.weight_rule = parse_weight_rule(train_weight_rule);
    cfg.clamp_amplification = train_clamp_amplification;
    cfg.weight_token_source = parse_token_source(train_weight_token_source);
    cfg.parity_band = train_parity_band;
    cfg.horizon = make_task_spec().horizon();
    cfg.batch_size = train_batch_size;
    cfg.iterations = train_iterations;
    cfg.seed = run_seed;
    cfg.validate();
    return cfg;
  }

  OptimizerState make_optimizer() const {
    if (opt_kind == "sgd") return OptimizerState::sgd(opt_lr);
    if (opt_kind == "adam") return OptimizerState::adam(opt_lr);
    throw std::invalid_argument("config: opt.kind must be sgd or adam, got '" + opt_kind + "'");
  }

  void validate() const {
    make_task_spec();
    make_judge_config();
    make_train_config();
    make_optimizer();
    if (data_train_count < 1 || data_eval_count < 1)
      throw std::invalid_argument("config: data counts must be >= 1");
    if (teacher_window < 1 || student_window < 1)
      throw std::invalid_argument("config: policy windows must be >= 1");
    if (teacher_epochs < 0 || student_sft_epochs < 0)
      throw std::invalid_argument("config: epochs must be >= 0");
    if (!(teacher_lr > 0.0 && student_sft_lr > 0.0))
      throw std::invalid_argument("config: fit learning rates must be > 0");
    if (run_num_workers < 1)
      throw std::invalid_argument("config: run.num_workers must be >= 1");
    if (run_eval_every < 0) throw std::invalid_argument("config: run.eval_every must be >= 0");
    if (ablate_seeds < 1) throw std::invalid_argument("config: ablate.seeds must be >= 1");
  }

  void set(const std::string& key, const std::string& value);

  /// Canonical echo: every key, fixed order, values that re-parse exactly.
  std::vector<std::pair<std::string, std::string>> echo() const {
    std::vector<std::pair<std::string, std::string>> out;
    auto put = [&out](const std::string& k, const std::string& v) { out.emplace_back(k, v); };
    put("task.kind", task_kind);
    put("task.modulus", std::to_string(task_modulus));
    put("task.chain_length", std::to_string(task_chain_length));
    put("task.operand_count", std::to_string(task_operand_count));
    put("data.train_count", std::to_string(data_train_count));
    put("data.eval_count", std::to_string(data_eval_count));
    put("teacher.window", std::to_string(teacher_window));
    put("teacher.epochs", std::to_string(teacher_epochs));
    put("teacher.lr", format_double(teacher_lr));
    put("student.window", std::to_string(student_window));
    put("student.sft_epochs", std::to_string(student_sft_epochs));
    put("student.sft_lr", format_double(student_sft_lr));
    put("judge.kind", judge_kind);
    put("judge.r_floor", format_double(judge_r_floor));
    put("judge.noise_scale", format_double(judge_noise_scale));
    put("judge.k", std::to_string(judge_k));
    put("judge.gamma", format_double(judge_gamma));
    put("judge.clamp_lo", format_double(judge_clamp_lo));
    put("judge.clamp_hi", format_double(judge_clamp_hi));
    put("judge.epsilon", format_double(judge_epsilon));
    put("train.lambda_teacher", format_double(train_lambda_teacher));
    put("train.lambda_student", format_double(train_lambda_student));
    put("train.alpha", format_double(train_alpha));
    put("train.epsilon", format_double(train_epsilon));
    put("train.weight_rule", train_weight_rule);
    put("train.clamp_amplification", train_clamp_amplification ? "true" : "false");
    put("train.weight_token_source", train_weight_token_source);
    put("train.parity_band", format_double(train_parity_band));
    put("train.batch_size", std::to_string(train_batch_size));
    put("train.iterations", std::to_string(train_iterations));
    put("opt.kind", opt_kind);
    put("opt.lr", format_double(opt_lr));
    put("run.seed", std::to_string(run_seed));
    put("run.num_workers", std::to_string(run_num_workers));
    put("run.eval_every", std::to_string(run_eval_every));
    put("run.out_dir", run_out_dir);
    put("ablate.seeds", std::to_string(ablate_seeds));
    return out;
  }
};

inline void RunConfig::set(const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_int;
  using detail::parse_real;
  using detail::parse_uint;
  static const auto as_int = [](std::int64_t v) { return static_cast<int>(v); };

  if (key == "task.kind") task_kind = value;
  else if (key == "task.modulus") task_modulus = as_int(parse_int(key, value));
  else if (key == "task.chain_length") task_chain_length = as_int(parse_int(key, value));
  else if (key == "task.operand_count") task_operand_count = as_int(parse_int(key, value));
  else if (key == "data.train_count") data_train_count = as_int(parse_int(key, value));
  else if (key == "data.eval_count") data_eval_count = as_int(parse_int(key, value));
  else if (key == "teacher.window") teacher_window = as_int(parse_int(key, value));
  else if (key == "teacher.epochs") teacher_epochs = as_int(parse_int(key, value));
  else if (key == "teacher.lr") teacher_lr = parse_real(key, value);
  else if (key == "student.window") student_window = as_int(parse_int(key, value));
  else if (key == "student.sft_epochs") student_sft_epochs = as_int(parse_int(key, value));
  else if (key == "student.sft_lr") student_sft_lr = parse_real(key, value);
  else if (key == "judge.kind") judge_kind = value;
  else if (key == "judge.r_floor") judge_r_floor = parse_real(key, value);
  else if (key == "judge.noise_scale") judge_noise_scale = parse_real(key, value);
  else if (key == "judge.k") judge_k = as_int(parse_int(key, value));
  else if (key == "judge.gamma") judge_gamma = parse_real(key, value);
  else if (key == "judge.clamp_lo") judge_clamp_lo = parse_real(key, value);
  else if (key == "judge.clamp_hi") judge_clamp_hi = parse_real(key, value);
  else if (key == "judge.epsilon") judge_epsilon = parse_real(key, value);
  else if (key == "train.lambda_teacher") train_lambda_teacher = parse_real(key, value);
  else if (key == "train.lambda_student") train_lambda_student = parse_real(key, value);
  else if (key == "train.alpha") train_alpha = parse_real(key, value);
  else if (key == "train.epsilon") train_epsilon = parse_real(key, value);
  else if (key == "train.weight_rule") train_weight_rule = value;
  else if (key == "train.clamp_amplification")
    train_clamp_amplification = parse_bool(key, value);
  else if (key == "train.weight_token_source") train_weight_token_source = value;
  else if (key == "train.parity_band") train_parity_band = parse_real(key, value);
  else if (key == "train.batch_size") train_batch_size = as_int(parse_int(key, value));
  else if (key == "train.iterations") train_iterations = as_int(parse_int(key, value));
  else if (key == "opt.kind") opt_kind = value;
  else if (key == "opt.lr") opt_lr = parse_real(key, value);
  else if (key == "run.seed") run_seed = parse_uint(key, value);
  else if (key == "run.num_workers") run_num_workers = as_int(parse_int(key, value));
  else if (key == "run.eval_every") run_eval_every = as_int(parse_int(key, value));
  else if (key == "run.out_dir") run_out_dir = value;
  else if (key == "ablate.seeds") ablate_seeds = as_int(parse_int(key, value));
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

/// Applies one `key = value` assignment line; '#' starts a comment.
/// Returns false for blank/comment-only lines.
inline bool apply_config_line(RunConfig& cfg, const std::string& raw_line) {
  std::string line = raw_line;
  const auto hash = line.find('#');
  if (hash != std::string::npos) line = line.substr(0, hash);
  line = detail::trim(line);
  if (line.empty()) return false;
  const auto eq = line.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config: expected 'key = value', got '" + raw_line + "'");
  const std::string key = detail::trim(line.substr(0, eq));
  const std::string value = detail::trim(line.substr(eq + 1));
  if (key.empty()) throw std::invalid_argument("config: empty key in '" + raw_line + "'");
  cfg.set(key, value);
  return true;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open '" + path + "'");
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    try {
      apply_config_line(cfg, line);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(e.what()) + " (line " + std::to_string(lineno) +
                                  " of '" + path + "')");
    }
  }
  return cfg;
}

/// CLI overrides come as `key=value` strings and win over file values.
inline void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const std::string& item : overrides) {
    if (!apply_config_line(cfg, item))
      throw std::invalid_argument("config: empty override '" + item + "'");
  }
}

}  // namespace vcrd
