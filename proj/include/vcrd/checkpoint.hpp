#pragma once

// SPDX-License-Identifier: Apache-2.0

// Plain-text policy checkpoints.
//
//   VCRD-CKPT v1
//   vocab=<comma-separated symbols>
//   window=<W> pad=<index>
//   <W token indices> | <V logits>
//   ...
//
// States are written in lexicographic key order so identical policies
// serialize to identical bytes. Logits are formatted with std::to_chars
// shortest round-trip, so save/load is exact.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "vcrd/policy.hpp"

namespace vcrd {

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double: to_chars failed");
  return std::string(buf, ptr);
}

inline double parse_double(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw std::runtime_error("parse_double: bad numeric field '" + text + "'");
  return v;
}

inline std::string checkpoint_to_string(const TabularPolicy& policy) {
  std::ostringstream os;
  os << "VCRD-CKPT v1\n";
  os << "vocab=";
  const auto& symbols = policy.vocab().symbols();
  for (std::size_t i = 0; i < symbols.size(); ++i) os << (i ? "," : "") << symbols[i];
  os << "\n";
  os << "window=" << policy.window() << " pad=" << policy.pad_token() << "\n";

  std::map<StateKey, const std::vector<double>*> ordered;
  for (const auto& [key, logits] : policy.logits()) ordered.emplace(key, &logits);
  for (const auto& [key, logits] : ordered) {
    for (std::size_t i = 0; i < key.size(); ++i) os << (i ? " " : "") << key[i];
    os << " |";
    for (double v : *logits) os << " " << format_double(v);
    os << "\n";
  }
  return os.str();
}

inline void save_checkpoint(const TabularPolicy& policy, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open '" + path + "'");
  out << checkpoint_to_string(policy);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for '" + path + "'");
}

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream is(line);
  std::string field;
  while (is >> field) fields.push_back(field);
  return fields;
}

inline TokenId parse_token_id(const std::string& text) {
  std::int32_t v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw std::runtime_error("checkpoint: bad token index '" + text + "'");
  return v;
}

}  // namespace detail

inline TabularPolicy load_checkpoint_from_stream(std::istream& in, const std::string& origin) {
  auto fail = [&origin](const std::string& what) -> std::runtime_error {
    return std::runtime_error("load_checkpoint: " + what + " in '" + origin + "'");
  };

  std::string line;
  if (!std::getline(in, line) || line != "VCRD-CKPT v1") throw fail("missing magic line");

  if (!std::getline(in, line) || line.rfind("vocab=", 0) != 0) throw fail("missing vocab line");
  std::vector<std::string> symbols;
  {
    std::string body = line.substr(6);
    std::string sym;
    std::istringstream is(body);
    while (std::getline(is, sym, ',')) symbols.push_back(sym);
    if (!body.empty() && body.back() == ',') symbols.push_back("");
  }

  if (!std::getline(in, line)) throw fail("missing window line");
  int window = 0;
  int pad = 0;
  {
    std::istringstream is(line);
    std::string wfield, pfield;
    if (!(is >> wfield >> pfield)) throw fail("malformed window line");
    std::string rest;
    if (is >> rest) throw fail("malformed window line");
    if (wfield.rfind("window=", 0) != 0 || pfield.rfind("pad=", 0) != 0)
      throw fail("malformed window line");
    window = static_cast<int>(detail::parse_token_id(wfield.substr(7)));
    pad = static_cast<int>(detail::parse_token_id(pfield.substr(4)));
  }

  TabularPolicy policy(Vocab{symbols}, window, static_cast<TokenId>(pad));
  const std::size_t vsize = policy.vocab().size();

  std::size_t lineno = 3;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields = detail::split_ws(line);
    const auto bar = std::find(fields.begin(), fields.end(), "|");
    if (bar == fields.end())
      throw fail("missing '|' separator at line " + std::to_string(lineno));
    const auto keylen = static_cast<std::size_t>(bar - fields.begin());
    const auto loglen = static_cast<std::size_t>(fields.end() - bar) - 1;
    if (keylen != static_cast<std::size_t>(window))
      throw fail("state key length " + std::to_string(keylen) + " != window at line " +
                 std::to_string(lineno));
    if (loglen != vsize)
      throw fail("logit count " + std::to_string(loglen) + " != vocab size at line " +
                 std::to_string(lineno));
    StateKey key;
    key.reserve(keylen);
    for (std::size_t i = 0; i < keylen; ++i) key.push_back(detail::parse_token_id(fields[i]));
    std::vector<double> logits;
    logits.reserve(vsize);
    for (auto it = bar + 1; it != fields.end(); ++it) logits.push_back(parse_double(*it));
    policy.set_logits(key, std::move(logits));
  }
  return policy;
}

inline TabularPolicy load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
  return load_checkpoint_from_stream(in, path);
}

}  // namespace vcrd
