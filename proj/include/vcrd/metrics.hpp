#pragma once

// SPDX-License-Identifier: Apache-2.0

// Metric persistence. The CSV stream is append-only with a pinned header;
// every row is flushed as written, so an interrupted run leaves a valid
// file up to the last complete row. Rows contain no wall-clock content
// (the ms column is deterministically 0), keeping identical runs
// byte-identical; real timing lives in the summary JSON.

#include <cstdint>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "vcrd/checkpoint.hpp"
#include "vcrd/config.hpp"
#include "vcrd/rng.hpp"
#include "vcrd/trainer.hpp"

namespace vcrd {

inline constexpr const char* kMetricsCsvHeader =
    "iteration,lv_skl,lv_srkl,total,mean_w_teacher,mean_w_student,f_parity,f_atten,f_amp,"
    "eval_acc,ms";

inline std::string metric_row(const MetricRecord& rec) {
  std::string row = std::to_string(rec.iteration);
  for (double v : {rec.lv_skl, rec.lv_srkl, rec.total, rec.mean_w_teacher, rec.mean_w_student,
                   rec.f_parity, rec.f_atten, rec.f_amp}) {
    row += ",";
    row += format_double(v);
  }
  row += ",";
  if (rec.eval_acc) row += format_double(*rec.eval_acc);
  row += ",";
  row += std::to_string(rec.ms);
  return row;
}

class MetricsCsvWriter {
 public:
  explicit MetricsCsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("MetricsCsvWriter: cannot open '" + path + "'");
    out_ << kMetricsCsvHeader << "\n";
    out_.flush();
  }

  void write(const MetricRecord& rec) {
    out_ << metric_row(rec) << "\n";
    out_.flush();
    if (!out_) throw std::runtime_error("MetricsCsvWriter: write failed");
  }

 private:
  std::ofstream out_;
};

/// Short run id hashed from the config echo: identical configs share an id,
/// any key change produces a new one.
inline std::string run_id(const RunConfig& cfg) {
  std::string blob;
  for (const auto& [key, value] : cfg.echo()) blob += key + "=" + value + "\n";
  const std::uint64_t h = fnv1a64(blob);
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 0; i < 16; ++i) buf[15 - i] = hex[(h >> (4 * i)) & 0xF];
  buf[16] = '\0';
  return std::string(buf);
}

inline nlohmann::json config_echo_json(const RunConfig& cfg) {
  nlohmann::json echo = nlohmann::json::object();
  for (const auto& [key, value] : cfg.echo()) echo[key] = value;
  return echo;
}

inline RunConfig config_from_echo_json(const nlohmann::json& echo) {
  RunConfig cfg;
  for (const auto& [key, value] : echo.items()) cfg.set(key, value.get<std::string>());
  return cfg;
}

inline void write_summary_json(const std::string& path, const RunConfig& cfg,
                               const nlohmann::json& terminal_metrics,
                               std::int64_t elapsed_ms) {
  nlohmann::json doc;
  doc["run_id"] = run_id(cfg);
  doc["config"] = config_echo_json(cfg);
  doc["metrics"] = terminal_metrics;
  doc["elapsed_ms"] = elapsed_ms;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_summary_json: cannot open '" + path + "'");
  out << doc.dump(2) << "\n";
  if (!out) throw std::runtime_error("write_summary_json: write failed for '" + path + "'");
}

}  // namespace vcrd
