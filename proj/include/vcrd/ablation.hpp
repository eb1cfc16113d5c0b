#pragma once

// SPDX-License-Identifier: Apache-2.0

// The ablation grid: weight-rule variants, the clamped variant, the uniform
// baseline, and the single-loss variants, each run end to end over a set of
// seeds with everything else held fixed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcrd/config.hpp"
#include "vcrd/pipeline.hpp"

namespace vcrd {

struct AblationVariant {
  std::string name;
  std::function<void(RunConfig&)> adjust;
};

inline std::vector<AblationVariant> ablation_grid() {
  return {
      {"vcrd", [](RunConfig&) {}},
      {"uniform", [](RunConfig& c) { c.train_weight_rule = "uniform"; }},
      {"clamp", [](RunConfig& c) { c.train_clamp_amplification = true; }},
      {"rs_only", [](RunConfig& c) { c.train_weight_rule = "rs_only"; }},
      {"rs_minus_rt", [](RunConfig& c) { c.train_weight_rule = "rs_minus_rt"; }},
      {"prm_free", [](RunConfig& c) { c.train_weight_rule = "prm_free"; }},
      {"lv_skl_only", [](RunConfig& c) { c.train_lambda_student = 0.0; }},
      {"lv_srkl_only", [](RunConfig& c) { c.train_lambda_teacher = 0.0; }},
  };
}

struct AblationRow {
  std::string name;
  std::vector<double> accuracies;
  double mean = 0.0;
  double stdev = 0.0;
};

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;

  const AblationRow& row(const std::string& name) const {
    for (const AblationRow& r : rows)
      if (r.name == name) return r;
    throw std::invalid_argument("AblationReport: no variant named '" + name + "'");
  }
};

inline AblationRow summarize_row(std::string name, std::vector<double> accs) {
  AblationRow row{std::move(name), std::move(accs), 0.0, 0.0};
  const auto n = static_cast<double>(row.accuracies.size());
  for (double a : row.accuracies) row.mean += a;
  row.mean /= n;
  if (row.accuracies.size() > 1) {
    double ss = 0.0;
    for (double a : row.accuracies) ss += (a - row.mean) * (a - row.mean);
    row.stdev = std::sqrt(ss / (n - 1.0));
  }
  return row;
}

/// Runs every grid variant over seeds base, base+1, ..., base+S-1.
inline AblationReport run_ablation(const RunConfig& base_cfg,
                                   const std::function<void(const std::string&, std::uint64_t)>&
                                       progress = nullptr) {
  AblationReport report;
  for (int s = 0; s < base_cfg.ablate_seeds; ++s)
    report.seeds.push_back(base_cfg.run_seed + static_cast<std::uint64_t>(s));
  for (const AblationVariant& variant : ablation_grid()) {
    std::vector<double> accs;
    for (std::uint64_t seed : report.seeds) {
      if (progress) progress(variant.name, seed);
      RunConfig cfg = base_cfg;
      variant.adjust(cfg);
      cfg.run_seed = seed;
      cfg.run_eval_every = 0;
      accs.push_back(run_pipeline(cfg, seed).final_acc);
    }
    report.rows.push_back(summarize_row(variant.name, std::move(accs)));
  }
  return report;
}

inline std::string render_ablation_table(const AblationReport& report) {
  std::ostringstream os;
  os << "variant        mean_acc  stdev     per-seed\n";
  for (const AblationRow& row : report.rows) {
    std::string name = row.name;
    name.resize(14, ' ');
    std::string mean = format_double(row.mean);
    mean.resize(std::max<std::size_t>(mean.size(), 8), ' ');
    std::string sd = format_double(row.stdev);
    sd.resize(std::max<std::size_t>(sd.size(), 8), ' ');
    os << name << " " << mean << "  " << sd << "  ";
    for (std::size_t i = 0; i < row.accuracies.size(); ++i)
      os << (i ? " " : "") << format_double(row.accuracies[i]);
    os << "\n";
  }
  return os.str();
}

}  // namespace vcrd
