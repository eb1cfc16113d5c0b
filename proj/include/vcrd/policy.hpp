#pragma once

// SPDX-License-Identifier: Apache-2.0

// Truncated-window tabular softmax policies: the concrete teacher/student
// realization. A policy maps the last W tokens of a prefix (left-padded) to
// a logit vector over the vocabulary; states are created lazily at zero
// logits, i.e. the uniform distribution.

#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vcrd/categorical.hpp"
#include "vcrd/rng.hpp"

namespace vcrd {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

/// Ordered list of distinct symbol strings; index <-> symbol is a bijection.
class Vocab {
 public:
  explicit Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 2) throw std::invalid_argument("Vocab: need at least 2 symbols");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
        throw std::invalid_argument("Vocab: duplicate symbol '" + tokens_[i] + "'");
    }
  }

  std::size_t size() const { return tokens_.size(); }
  const std::string& symbol(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& symbols() const { return tokens_; }

  TokenId id(const std::string& symbol) const {
    auto it = index_.find(symbol);
    if (it == index_.end()) throw std::invalid_argument("Vocab: unknown symbol '" + symbol + "'");
    return it->second;
  }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Context c = (prompt, generated-so-far).
struct Prefix {
  TokenSeq prompt;
  TokenSeq generated;

  TokenSeq flat() const {
    TokenSeq all = prompt;
    all.insert(all.end(), generated.begin(), generated.end());
    return all;
  }
};

/// Window-state key: exactly the last W token indices, left-padded.
using StateKey = std::vector<TokenId>;

struct StateKeyHash {
  std::size_t operator()(const StateKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (TokenId t : k) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(t));
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

using LogitTable = std::unordered_map<StateKey, std::vector<double>, StateKeyHash>;
using GradTable = std::unordered_map<StateKey, std::vector<double>, StateKeyHash>;

inline std::string format_state(const StateKey& key) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < key.size(); ++i) os << (i ? " " : "") << key[i];
  os << ")";
  return os.str();
}

/// One sampled or greedy rollout: T actions plus their log-probabilities.
struct Trajectory {
  TokenSeq prompt;
  TokenSeq actions;
  std::vector<double> logprobs;

  std::size_t length() const { return actions.size(); }
};

class TabularPolicy {
 public:
  TabularPolicy(Vocab vocab, int window, TokenId pad_token)
      : vocab_(std::move(vocab)), window_(window), pad_(pad_token) {
    if (window_ < 1) throw std::invalid_argument("TabularPolicy: window must be >= 1");
    if (pad_ < 0 || static_cast<std::size_t>(pad_) >= vocab_.size())
      throw std::invalid_argument("TabularPolicy: pad token out of range");
  }

  const Vocab& vocab() const { return vocab_; }
  int window() const { return window_; }
  TokenId pad_token() const { return pad_; }
  const LogitTable& logits() const { return table_; }
  std::size_t state_count() const { return table_.size(); }

  StateKey state_key(const Prefix& prefix) const {
    TokenSeq flat = prefix.flat();
    check_tokens(flat);
    StateKey key(static_cast<std::size_t>(window_), pad_);
    const std::size_t n = flat.size();
    const std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(window_));
    for (std::size_t i = 0; i < take; ++i)
      key[static_cast<std::size_t>(window_) - take + i] = flat[n - take + i];
    return key;
  }

  /// Logits for a state; zero vector if the state was never touched.
  std::vector<double> logits_for(const StateKey& key) const {
    auto it = table_.find(key);
    if (it != table_.end()) return it->second;
    return std::vector<double>(vocab_.size(), 0.0);
  }

  /// Next-token distribution: softmax of the state's logits. Untouched
  /// states read as uniform without materializing an entry.
  Categorical next_dist(const Prefix& prefix) const {
    StateKey key = state_key(prefix);
    auto it = table_.find(key);
    if (it == table_.end()) {
      return Categorical{std::vector<double>(vocab_.size(), 1.0 / static_cast<double>(vocab_.size()))};
    }
    return softmax(it->second);
  }

  std::vector<double>& mutable_logits(const StateKey& key) {
    auto [it, inserted] = table_.try_emplace(key, vocab_.size(), 0.0);
    return it->second;
  }

  void set_logits(const StateKey& key, std::vector<double> logits) {
    if (logits.size() != vocab_.size())
      throw std::invalid_argument("set_logits: wrong vector length");
    for (double v : logits)
      if (!std::isfinite(v)) throw std::invalid_argument("set_logits: non-finite logit");
    if (key.size() != static_cast<std::size_t>(window_))
      throw std::invalid_argument("set_logits: key length must equal window");
    table_[key] = std::move(logits);
  }

 private:
  void check_tokens(const TokenSeq& toks) const {
    for (TokenId t : toks)
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_.size())
        throw std::out_of_range("TabularPolicy: token index " + std::to_string(t) +
                                " out of range for V=" + std::to_string(vocab_.size()));
  }

  Vocab vocab_;
  int window_;
  TokenId pad_;
  LogitTable table_;
};

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

/// Samples a_t ~ next_dist sequentially for t = 1..horizon. Identical
/// (policy, prompt, rng state) gives identical trajectories.
inline Trajectory sample_rollout(const TabularPolicy& policy, const TokenSeq& prompt,
                                 int horizon, RngStream& rng) {
  if (horizon < 1) throw std::invalid_argument("sample_rollout: horizon must be >= 1");
  Trajectory traj;
  traj.prompt = prompt;
  Prefix prefix{prompt, {}};
  for (int t = 0; t < horizon; ++t) {
    Categorical dist = policy.next_dist(prefix);
    const auto a = static_cast<TokenId>(sample_index(dist, rng.next_double()));
    traj.actions.push_back(a);
    traj.logprobs.push_back(std::log(std::max(dist.probs[static_cast<std::size_t>(a)], kLogFloor)));
    prefix.generated.push_back(a);
  }
  return traj;
}

/// Argmax decode; ties break toward the lowest token index.
inline Trajectory greedy_rollout(const TabularPolicy& policy, const TokenSeq& prompt,
                                 int horizon) {
  if (horizon < 1) throw std::invalid_argument("greedy_rollout: horizon must be >= 1");
  Trajectory traj;
  traj.prompt = prompt;
  Prefix prefix{prompt, {}};
  for (int t = 0; t < horizon; ++t) {
    Categorical dist = policy.next_dist(prefix);
    const auto a = static_cast<TokenId>(argmax_index(dist));
    traj.actions.push_back(a);
    traj.logprobs.push_back(std::log(std::max(dist.probs[static_cast<std::size_t>(a)], kLogFloor)));
    prefix.generated.push_back(a);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

enum class OptKind { Sgd, Adam };

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

/// SGD or bias-corrected Adam over the sparse logit table.
struct OptimizerState {
  OptKind kind = OptKind::Sgd;
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::unordered_map<StateKey, AdamMoments, StateKeyHash> moments;

  static OptimizerState sgd(double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("OptimizerState: learning_rate must be > 0");
    OptimizerState s;
    s.kind = OptKind::Sgd;
    s.learning_rate = lr;
    return s;
  }

  static OptimizerState adam(double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("OptimizerState: learning_rate must be > 0");
    OptimizerState s;
    s.kind = OptKind::Adam;
    s.learning_rate = lr;
    return s;
  }
};

/// One optimizer step over every state present in the gradient table.
/// Untouched states stay untouched.
inline void apply_update(TabularPolicy& policy, const GradTable& grads,
                         OptimizerState& opt) {
  for (const auto& [key, g] : grads) {
    if (g.size() != policy.vocab().size())
      throw std::invalid_argument("apply_update: gradient length mismatch at state " +
                                  format_state(key));
    for (double v : g)
      if (!std::isfinite(v))
        throw std::runtime_error("apply_update: non-finite gradient at state " +
                                 format_state(key));
  }
  opt.step += 1;
  for (const auto& [key, g] : grads) {
    std::vector<double>& logits = policy.mutable_logits(key);
    if (opt.kind == OptKind::Sgd) {
      for (std::size_t i = 0; i < g.size(); ++i) logits[i] -= opt.learning_rate * g[i];
    } else {
      auto [it, inserted] = opt.moments.try_emplace(key);
      AdamMoments& mom = it->second;
      if (inserted) {
        mom.m.assign(g.size(), 0.0);
        mom.v.assign(g.size(), 0.0);
      }
      const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
      const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
      for (std::size_t i = 0; i < g.size(); ++i) {
        mom.m[i] = opt.beta1 * mom.m[i] + (1.0 - opt.beta1) * g[i];
        mom.v[i] = opt.beta2 * mom.v[i] + (1.0 - opt.beta2) * g[i] * g[i];
        const double mhat = mom.m[i] / bc1;
        const double vhat = mom.v[i] / bc2;
        logits[i] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.eps);
      }
    }
  }
}

}  // namespace vcrd
