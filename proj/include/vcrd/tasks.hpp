#pragma once

// SPDX-License-Identifier: Apache-2.0

// Synthetic multi-step arithmetic tasks with machine-checkable step validity.
//
// chain      start value plus a sequence of +k/-k operations mod m; the unique
//            gold trajectory emits every intermediate value then repeats the
//            final value as the answer. Horizon T = chain_length + 1.
// multipath  sum of n slot-tokenized operands mod m, consumable in any order;
//            every consumption order is gold (n! trajectories), each emitting
//            slot token, running total, ..., then the shared answer.
//            Horizon T = 2 * operand_count + 1.
//
// Vocabularies put the pad token "_" at index 0 and digits "0".."m-1" at
// indices 1..m. Operands are tokenized by slot ("x1", "x2", ...) so distinct
// orders stay distinct token sequences even with repeated values.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcrd/policy.hpp"
#include "vcrd/rng.hpp"

namespace vcrd {

enum class TaskKind { Chain, Multipath };

inline std::string task_kind_name(TaskKind kind) {
  return kind == TaskKind::Chain ? "chain" : "multipath";
}

inline TaskKind parse_task_kind(const std::string& name) {
  if (name == "chain") return TaskKind::Chain;
  if (name == "multipath") return TaskKind::Multipath;
  throw std::invalid_argument("parse_task_kind: unknown task '" + name + "'");
}

inline Vocab build_task_vocab(TaskKind kind, int modulus, int operand_count) {
  std::vector<std::string> symbols;
  symbols.push_back("_");
  for (int v = 0; v < modulus; ++v) symbols.push_back(std::to_string(v));
  if (kind == TaskKind::Chain) {
    for (int k = 1; k < modulus; ++k) symbols.push_back("+" + std::to_string(k));
    for (int k = 1; k < modulus; ++k) symbols.push_back("-" + std::to_string(k));
  } else {
    for (int s = 1; s <= operand_count; ++s) symbols.push_back("x" + std::to_string(s));
  }
  return Vocab{std::move(symbols)};
}

struct TaskSpec {
  TaskKind kind = TaskKind::Chain;
  Vocab vocab;
  int modulus = 7;
  int chain_length = 3;
  int operand_count = 3;

  static TaskSpec chain(int modulus, int chain_length) {
    if (modulus < 2) throw std::invalid_argument("TaskSpec: modulus must be >= 2");
    if (chain_length < 1) throw std::invalid_argument("TaskSpec: chain_length must be >= 1");
    return TaskSpec{TaskKind::Chain, build_task_vocab(TaskKind::Chain, modulus, 0), modulus,
                    chain_length, 0};
  }

  static TaskSpec multipath(int modulus, int operand_count) {
    if (modulus < 2) throw std::invalid_argument("TaskSpec: modulus must be >= 2");
    if (operand_count < 2 || operand_count > 4)
      throw std::invalid_argument("TaskSpec: operand_count must be in [2, 4]");
    return TaskSpec{TaskKind::Multipath,
                    build_task_vocab(TaskKind::Multipath, modulus, operand_count), modulus, 0,
                    operand_count};
  }

  /// Horizon T: one token per emission slot including the final answer.
  int horizon() const {
    return kind == TaskKind::Chain ? chain_length + 1 : 2 * operand_count + 1;
  }

  TokenId pad_token() const { return 0; }

  TokenId digit_token(int value) const {
    if (value < 0 || value >= modulus) throw std::out_of_range("digit_token: value out of range");
    return static_cast<TokenId>(1 + value);
  }

  /// Inverse of digit_token; throws if the token is not a digit.
  int digit_value(TokenId token) const {
    if (token < 1 || token > modulus)
      throw std::invalid_argument("digit_value: token " + std::to_string(token) +
                                  " is not a digit");
    return static_cast<int>(token) - 1;
  }

  TokenId op_token(int delta, bool positive) const {
    if (kind != TaskKind::Chain) throw std::logic_error("op_token: chain tasks only");
    if (delta < 1 || delta >= modulus) throw std::out_of_range("op_token: delta out of range");
    const int base = 1 + modulus;
    return static_cast<TokenId>(positive ? base + (delta - 1)
                                         : base + (modulus - 1) + (delta - 1));
  }

  TokenId slot_token(int slot) const {
    if (kind != TaskKind::Multipath) throw std::logic_error("slot_token: multipath tasks only");
    if (slot < 0 || slot >= operand_count) throw std::out_of_range("slot_token: slot out of range");
    return static_cast<TokenId>(1 + modulus + slot);
  }
};

struct TaskInstance {
  TokenSeq prompt;
  std::vector<TokenSeq> gold_trajectories;
  TokenSeq answer;
};

namespace detail {

inline int positive_mod(int v, int m) {
  const int r = v % m;
  return r < 0 ? r + m : r;
}

inline TaskInstance make_chain_instance(const TaskSpec& spec, int start,
                                        const std::vector<std::pair<int, bool>>& ops) {
  TaskInstance inst;
  inst.prompt.push_back(spec.digit_token(start));
  TokenSeq gold;
  int value = start;
  for (const auto& [delta, positive] : ops) {
    inst.prompt.push_back(spec.op_token(delta, positive));
    value = positive_mod(value + (positive ? delta : -delta), spec.modulus);
    gold.push_back(spec.digit_token(value));
  }
  gold.push_back(spec.digit_token(value));
  inst.answer = {spec.digit_token(value)};
  inst.gold_trajectories.push_back(std::move(gold));
  return inst;
}

inline TaskInstance make_multipath_instance(const TaskSpec& spec,
                                            const std::vector<int>& operands) {
  TaskInstance inst;
  for (int s = 0; s < spec.operand_count; ++s) {
    inst.prompt.push_back(spec.slot_token(s));
    inst.prompt.push_back(spec.digit_token(operands[static_cast<std::size_t>(s)]));
  }
  const int total = positive_mod(
      std::accumulate(operands.begin(), operands.end(), 0), spec.modulus);
  inst.answer = {spec.digit_token(total)};

  std::vector<int> order(static_cast<std::size_t>(spec.operand_count));
  std::iota(order.begin(), order.end(), 0);
  do {
    TokenSeq gold;
    int running = 0;
    for (int slot : order) {
      gold.push_back(spec.slot_token(slot));
      running = positive_mod(running + operands[static_cast<std::size_t>(slot)], spec.modulus);
      gold.push_back(spec.digit_token(running));
    }
    gold.push_back(spec.digit_token(total));
    inst.gold_trajectories.push_back(std::move(gold));
  } while (std::next_permutation(order.begin(), order.end()));
  return inst;
}

}  // namespace detail

/// Deterministic: instance i consumes a fixed number of draws, so it is a
/// pure function of (stream seed, i).
inline std::vector<TaskInstance> gen_chain(const TaskSpec& spec, int count, RngStream& rng) {
  if (spec.kind != TaskKind::Chain) throw std::invalid_argument("gen_chain: spec.kind != chain");
  if (count < 0) throw std::invalid_argument("gen_chain: count must be >= 0");
  std::vector<TaskInstance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int start = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.modulus)));
    std::vector<std::pair<int, bool>> ops;
    ops.reserve(static_cast<std::size_t>(spec.chain_length));
    for (int j = 0; j < spec.chain_length; ++j) {
      const int delta =
          1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.modulus - 1)));
      const bool positive = rng.next_below(2) == 0;
      ops.emplace_back(delta, positive);
    }
    out.push_back(detail::make_chain_instance(spec, start, ops));
  }
  return out;
}

inline std::vector<TaskInstance> gen_multipath(const TaskSpec& spec, int count, RngStream& rng) {
  if (spec.kind != TaskKind::Multipath)
    throw std::invalid_argument("gen_multipath: spec.kind != multipath");
  if (count < 0) throw std::invalid_argument("gen_multipath: count must be >= 0");
  std::vector<TaskInstance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::vector<int> operands(static_cast<std::size_t>(spec.operand_count));
    for (int& v : operands)
      v = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.modulus)));
    out.push_back(detail::make_multipath_instance(spec, operands));
  }
  return out;
}

inline std::vector<TaskInstance> gen_instances(const TaskSpec& spec, int count, RngStream& rng) {
  return spec.kind == TaskKind::Chain ? gen_chain(spec, count, rng)
                                      : gen_multipath(spec, count, rng);
}

/// Rebuilds the full instance (gold set included) from its prompt encoding.
inline TaskInstance instance_from_prompt(const TaskSpec& spec, const TokenSeq& prompt) {
  if (spec.kind == TaskKind::Chain) {
    if (prompt.size() != static_cast<std::size_t>(spec.chain_length + 1))
      throw std::invalid_argument("instance_from_prompt: bad chain prompt length");
    const int start = spec.digit_value(prompt[0]);
    std::vector<std::pair<int, bool>> ops;
    const int base = 1 + spec.modulus;
    for (std::size_t i = 1; i < prompt.size(); ++i) {
      const int raw = static_cast<int>(prompt[i]) - base;
      if (raw < 0 || raw >= 2 * (spec.modulus - 1))
        throw std::invalid_argument("instance_from_prompt: token is not an operation");
      const bool positive = raw < spec.modulus - 1;
      const int delta = positive ? raw + 1 : raw - (spec.modulus - 1) + 1;
      ops.emplace_back(delta, positive);
    }
    return detail::make_chain_instance(spec, start, ops);
  }
  if (prompt.size() != static_cast<std::size_t>(2 * spec.operand_count))
    throw std::invalid_argument("instance_from_prompt: bad multipath prompt length");
  std::vector<int> operands;
  for (int s = 0; s < spec.operand_count; ++s) {
    if (prompt[static_cast<std::size_t>(2 * s)] != spec.slot_token(s))
      throw std::invalid_argument("instance_from_prompt: slot tokens out of order");
    operands.push_back(spec.digit_value(prompt[static_cast<std::size_t>(2 * s + 1)]));
  }
  return detail::make_multipath_instance(spec, operands);
}

/// Tokens that keep the prefix on some gold trajectory; empty once departed.
inline std::set<TokenId> valid_next(const TaskInstance& instance, const Prefix& prefix) {
  if (prefix.prompt != instance.prompt)
    throw std::invalid_argument("valid_next: prefix belongs to a different instance");
  std::set<TokenId> next;
  const std::size_t k = prefix.generated.size();
  for (const TokenSeq& gold : instance.gold_trajectories) {
    if (k >= gold.size()) continue;
    if (!std::equal(prefix.generated.begin(), prefix.generated.end(), gold.begin())) continue;
    next.insert(gold[k]);
  }
  return next;
}

/// Fraction of instances whose greedy rollout ends in the accepted answer.
inline double final_answer_accuracy(const TabularPolicy& policy,
                                    const std::vector<TaskInstance>& instances, int horizon) {
  if (instances.empty()) {
    std::cerr << "final_answer_accuracy: empty instance list, returning 1.0 (vacuous)\n";
    return 1.0;
  }
  std::size_t hits = 0;
  for (const TaskInstance& inst : instances) {
    const Trajectory traj = greedy_rollout(policy, inst.prompt, horizon);
    if (traj.actions.size() < inst.answer.size()) continue;
    if (std::equal(inst.answer.rbegin(), inst.answer.rend(), traj.actions.rbegin())) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(instances.size());
}

struct FitResult {
  TabularPolicy policy;
  double train_accuracy = 0.0;
};

/// Cross-entropy fit on gold trajectories with per-instance SGD steps.
/// Multipath instances contribute one uniformly drawn gold order per epoch.
inline FitResult fit_teacher(const TaskSpec& spec, const std::vector<TaskInstance>& instances,
                             int window, int epochs, double learning_rate, RngStream& rng) {
  if (epochs < 0) throw std::invalid_argument("fit_teacher: epochs must be >= 0");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("fit_teacher: learning_rate must be > 0");

  TabularPolicy policy(spec.vocab, window, spec.pad_token());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (const TaskInstance& inst : instances) {
      const std::size_t pick =
          inst.gold_trajectories.size() == 1
              ? 0
              : static_cast<std::size_t>(rng.next_below(inst.gold_trajectories.size()));
      const TokenSeq& gold = inst.gold_trajectories[pick];
      Prefix prefix{inst.prompt, {}};
      for (TokenId target : gold) {
        const StateKey key = policy.state_key(prefix);
        const Categorical q = softmax(policy.logits_for(key));
        epoch_loss -= std::log(std::max(q.probs[static_cast<std::size_t>(target)], kLogFloor));
        std::vector<double>& logits = policy.mutable_logits(key);
        for (std::size_t j = 0; j < q.size(); ++j) {
          const double grad = q.probs[j] - (j == static_cast<std::size_t>(target) ? 1.0 : 0.0);
          logits[j] -= learning_rate * grad;
        }
        prefix.generated.push_back(target);
      }
    }
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("fit_teacher: non-finite loss at epoch " + std::to_string(epoch));
  }
  const double acc = final_answer_accuracy(policy, instances, spec.horizon());
  return FitResult{std::move(policy), acc};
}

// ---------------------------------------------------------------------------
// Dataset files: one instance per line, `prompt | gold-count | answer`.
// Gold trajectories are regenerated from the prompt, never serialized.
// ---------------------------------------------------------------------------

inline void save_dataset(const std::vector<TaskInstance>& instances, const Vocab& vocab,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_dataset: cannot open '" + path + "'");
  for (const TaskInstance& inst : instances) {
    for (std::size_t i = 0; i < inst.prompt.size(); ++i)
      out << (i ? " " : "") << vocab.symbol(inst.prompt[i]);
    out << " | " << inst.gold_trajectories.size() << " |";
    for (TokenId t : inst.answer) out << " " << vocab.symbol(t);
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for '" + path + "'");
}

inline std::vector<TaskInstance> load_dataset(const TaskSpec& spec, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open '" + path + "'");
  std::vector<TaskInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    {
      std::istringstream is(line);
      std::string f;
      while (is >> f) fields.push_back(f);
    }
    auto fail = [&](const std::string& what) -> std::runtime_error {
      return std::runtime_error("load_dataset: " + what + " at line " + std::to_string(lineno) +
                                " of '" + path + "'");
    };
    const auto bar1 = std::find(fields.begin(), fields.end(), "|");
    if (bar1 == fields.end()) throw fail("missing first '|'");
    const auto bar2 = std::find(bar1 + 1, fields.end(), "|");
    if (bar2 == fields.end()) throw fail("missing second '|'");
    if (bar2 - bar1 != 2) throw fail("gold-count field must be a single integer");

    TokenSeq prompt;
    for (auto it = fields.begin(); it != bar1; ++it) prompt.push_back(spec.vocab.id(*it));
    TaskInstance inst = instance_from_prompt(spec, prompt);

    const std::size_t gold_count = static_cast<std::size_t>(std::stoull(*(bar1 + 1)));
    if (gold_count != inst.gold_trajectories.size())
      throw fail("gold-count mismatch with regenerated instance");
    TokenSeq answer;
    for (auto it = bar2 + 1; it != fields.end(); ++it) answer.push_back(spec.vocab.id(*it));
    if (answer != inst.answer) throw fail("answer mismatch with regenerated instance");
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace vcrd
