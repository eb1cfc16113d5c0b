// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Subcommands cover the full workflow: dataset
// generation, teacher/student fitting, distillation, evaluation, the
// reward-ratio analysis, the trust-region solver, and the ablation grid.
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "vcrd/vcrd.hpp"

namespace {

using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Run configuration file (key = value lines)");
  cmd->add_option("--set", args.overrides, "Override a config key, e.g. --set train.alpha=0.2");
  cmd->add_option("--seed", args.seed, "Override run.seed");
  cmd->add_option("--out", args.out_dir, "Override run.out_dir");
  cmd->add_option("--workers", args.workers, "Override run.num_workers");
}

/// Config-phase problems are usage errors (exit 1), so this throws
/// invalid_argument for anything wrong with flags or file contents.
vcrd::RunConfig resolve_config(const CommonArgs& args) {
  vcrd::RunConfig cfg;
  if (!args.config_path.empty()) {
    if (!std::filesystem::exists(args.config_path))
      throw std::invalid_argument("config file not found: '" + args.config_path + "'");
    cfg = vcrd::load_config(args.config_path);
  }
  vcrd::apply_overrides(cfg, args.overrides);
  if (args.seed) cfg.run_seed = *args.seed;
  if (args.out_dir) cfg.run_out_dir = *args.out_dir;
  if (args.workers) cfg.run_num_workers = *args.workers;
  cfg.validate();
  return cfg;
}

std::filesystem::path ensure_out_dir(const vcrd::RunConfig& cfg) {
  std::filesystem::path dir(cfg.run_out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::int64_t elapsed_ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                               start)
      .count();
}

vcrd::TabularPolicy load_policy_for(const vcrd::TaskSpec& spec, const std::string& path,
                                    const char* role) {
  vcrd::TabularPolicy policy = vcrd::load_checkpoint(path);
  if (!(policy.vocab() == spec.vocab))
    throw std::runtime_error(std::string(role) + " checkpoint '" + path +
                             "' has a vocabulary that does not match the task");
  return policy;
}

int cmd_gen_data(const CommonArgs& args) {
  const vcrd::RunConfig cfg = resolve_config(args);
  const auto dir = ensure_out_dir(cfg);
  vcrd::PipelineData data = vcrd::prepare_data(cfg, cfg.run_seed);
  vcrd::save_dataset(data.train, data.spec.vocab, (dir / "train.txt").string());
  vcrd::save_dataset(data.probe, data.spec.vocab, (dir / "eval.txt").string());
  std::cout << "wrote " << data.train.size() << " train and " << data.probe.size()
            << " eval instances to " << dir.string() << "\n";
  return 0;
}

int cmd_train_teacher(const CommonArgs& args) {
  const vcrd::RunConfig cfg = resolve_config(args);
  const auto dir = ensure_out_dir(cfg);
  vcrd::PipelineData data = vcrd::prepare_data(cfg, cfg.run_seed);
  vcrd::FitResult fit = vcrd::make_teacher(cfg, data.spec, data.train, cfg.run_seed);
  const double probe_acc =
      vcrd::final_answer_accuracy(fit.policy, data.probe, data.spec.horizon());
  vcrd::save_checkpoint(fit.policy, (dir / "teacher.ckpt").string());
  std::cout << "teacher: train_acc=" << vcrd::format_double(fit.train_accuracy)
            << " probe_acc=" << vcrd::format_double(probe_acc) << " states="
            << fit.policy.state_count() << " -> " << (dir / "teacher.ckpt").string() << "\n";
  return 0;
}

int cmd_sft_student(const CommonArgs& args) {
  const vcrd::RunConfig cfg = resolve_config(args);
  const auto dir = ensure_out_dir(cfg);
  vcrd::PipelineData data = vcrd::prepare_data(cfg, cfg.run_seed);
  vcrd::FitResult fit = vcrd::make_sft_student(cfg, data.spec, data.train, cfg.run_seed);
  const double probe_acc =
      vcrd::final_answer_accuracy(fit.policy, data.probe, data.spec.horizon());
  vcrd::save_checkpoint(fit.policy, (dir / "student_sft.ckpt").string());
  std::cout << "student: train_acc=" << vcrd::format_double(fit.train_accuracy)
            << " probe_acc=" << vcrd::format_double(probe_acc) << " states="
            << fit.policy.state_count() << " -> " << (dir / "student_sft.ckpt").string() << "\n";
  return 0;
}

int cmd_distill(const CommonArgs& args, const std::string& teacher_path,
                const std::string& student_path) {
  const auto start = std::chrono::steady_clock::now();
  const vcrd::RunConfig cfg = resolve_config(args);
  const auto dir = ensure_out_dir(cfg);
  vcrd::PipelineData data = vcrd::prepare_data(cfg, cfg.run_seed);

  vcrd::TabularPolicy teacher =
      teacher_path.empty()
          ? vcrd::make_teacher(cfg, data.spec, data.train, cfg.run_seed).policy
          : load_policy_for(data.spec, teacher_path, "teacher");
  vcrd::TabularPolicy student =
      student_path.empty()
          ? vcrd::make_sft_student(cfg, data.spec, data.train, cfg.run_seed).policy
          : load_policy_for(data.spec, student_path, "student");

  const double teacher_acc =
      vcrd::final_answer_accuracy(teacher, data.probe, data.spec.horizon());
  const double sft_acc = vcrd::final_answer_accuracy(student, data.probe, data.spec.horizon());
  if (!(teacher_acc > sft_acc))
    throw std::runtime_error("distill: teacher probe accuracy (" +
                             vcrd::format_double(teacher_acc) +
                             ") does not exceed the student's (" + vcrd::format_double(sft_acc) +
                             "); a distillation run needs a real gap");

  vcrd::MetricsCsvWriter csv((dir / "metrics.csv").string());
  vcrd::TrainConfig train_cfg = cfg.make_train_config();
  vcrd::OptimizerState opt = cfg.make_optimizer();
  vcrd::DistillResult result = vcrd::distill(
      teacher, student, data.spec, data.train, data.probe, cfg.make_judge_config(), train_cfg,
      opt, cfg.run_num_workers, cfg.run_eval_every, [&csv](const vcrd::MetricRecord& rec) {
        csv.write(rec);
        if (rec.eval_acc)
          std::cout << "iter " << rec.iteration << ": total=" << vcrd::format_double(rec.total)
                    << " eval_acc=" << vcrd::format_double(*rec.eval_acc) << "\n";
      });

  vcrd::save_checkpoint(student, (dir / "student_distilled.ckpt").string());
  json terminal;
  terminal["teacher_acc"] = teacher_acc;
  terminal["sft_acc"] = sft_acc;
  terminal["final_eval_acc"] = result.final_eval_acc;
  if (!result.records.empty()) {
    terminal["final_lv_skl"] = result.records.back().lv_skl;
    terminal["final_lv_srkl"] = result.records.back().lv_srkl;
    terminal["final_total"] = result.records.back().total;
  }
  vcrd::write_summary_json((dir / "summary.json").string(), cfg, terminal,
                           elapsed_ms_since(start));
  std::cout << "distilled: teacher=" << vcrd::format_double(teacher_acc)
            << " sft=" << vcrd::format_double(sft_acc)
            << " final=" << vcrd::format_double(result.final_eval_acc) << " -> "
            << (dir / "metrics.csv").string() << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& ckpt_path) {
  const vcrd::RunConfig cfg = resolve_config(args);
  vcrd::PipelineData data = vcrd::prepare_data(cfg, cfg.run_seed);
  vcrd::TabularPolicy policy = load_policy_for(data.spec, ckpt_path, "eval");
  const double acc = vcrd::final_answer_accuracy(policy, data.probe, data.spec.horizon());
  std::cout << "eval_acc=" << vcrd::format_double(acc) << " over " << data.probe.size()
            << " instances\n";
  return 0;
}

int cmd_analyze_ratios(const CommonArgs& args, const std::string& teacher_path,
                       const std::string& student_path) {
  const auto start = std::chrono::steady_clock::now();
  const vcrd::RunConfig cfg = resolve_config(args);
  const auto dir = ensure_out_dir(cfg);
  vcrd::PipelineData data = vcrd::prepare_data(cfg, cfg.run_seed);
  vcrd::TabularPolicy teacher =
      teacher_path.empty()
          ? vcrd::make_teacher(cfg, data.spec, data.train, cfg.run_seed).policy
          : load_policy_for(data.spec, teacher_path, "teacher");
  vcrd::TabularPolicy student =
      student_path.empty()
          ? vcrd::make_sft_student(cfg, data.spec, data.train, cfg.run_seed).policy
          : load_policy_for(data.spec, student_path, "student");

  vcrd::RatioReport report = vcrd::analyze_ratios(teacher, student, data.spec, data.probe,
                                                  cfg.make_judge_config(), cfg.run_seed);
  vcrd::write_ratio_histogram_csv(report, (dir / "ratio_histogram.csv").string());
  json terminal;
  terminal["positions"] = report.positions_total();
  terminal["fraction_ge1_overall"] = report.fraction_ge1_overall();
  terminal["fraction_ge1_teacher_prefix"] = report.fraction_ge1_teacher_prefix();
  terminal["fraction_ge1_student_prefix"] = report.fraction_ge1_student_prefix();
  vcrd::write_summary_json((dir / "ratio_summary.json").string(), cfg, terminal,
                           elapsed_ms_since(start));
  std::cout << "positions=" << report.positions_total() << " fraction_ge1_overall="
            << vcrd::format_double(report.fraction_ge1_overall())
            << " teacher_prefix=" << vcrd::format_double(report.fraction_ge1_teacher_prefix())
            << " student_prefix=" << vcrd::format_double(report.fraction_ge1_student_prefix())
            << "\n";
  return 0;
}

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> out;
  std::string field;
  std::istringstream is(text);
  while (std::getline(is, field, ',')) {
    try {
      out.push_back(vcrd::parse_double(field));
    } catch (const std::exception&) {
      throw std::invalid_argument("expected comma-separated numbers, got '" + text + "'");
    }
  }
  return out;
}

int cmd_trust_region(const std::string& pi_text, const std::string& r_text, double delta,
                     const std::string& payload_path) {
  std::vector<double> pi_values;
  std::vector<double> r_values;
  if (!payload_path.empty()) {
    std::ifstream in(payload_path);
    if (!in) throw std::invalid_argument("payload file not found: '" + payload_path + "'");
    json payload = json::parse(in);
    pi_values = payload.at("pi").get<std::vector<double>>();
    r_values = payload.at("r").get<std::vector<double>>();
    delta = payload.at("delta").get<double>();
  } else {
    if (pi_text.empty() || r_text.empty())
      throw std::invalid_argument("trust-region needs --pi and --r (or --payload)");
    pi_values = parse_csv_doubles(pi_text);
    r_values = parse_csv_doubles(r_text);
  }
  const vcrd::Categorical pi = vcrd::Categorical::from_probs(pi_values);
  const vcrd::RewardVector reward = vcrd::RewardVector::from(r_values);
  const vcrd::TiltSolution sol = vcrd::solve_trust_region(pi, reward, delta);
  json doc;
  doc["eta"] = sol.eta;
  doc["tilted"] = sol.tilted.probs;
  doc["achieved_kl"] = sol.achieved_kl;
  doc["expected_reward"] = sol.expected_reward;
  doc["constraint_active"] = sol.constraint_active;
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  const vcrd::RunConfig cfg = resolve_config(args);
  const auto dir = ensure_out_dir(cfg);
  vcrd::AblationReport report = vcrd::run_ablation(
      cfg, [](const std::string& name, std::uint64_t seed) {
        std::cout << "running " << name << " seed " << seed << "\n";
      });
  const std::string table = vcrd::render_ablation_table(report);
  std::cout << table;
  {
    std::ofstream out((dir / "ablation.txt").string(), std::ios::binary);
    out << table;
  }
  json terminal = json::object();
  for (const vcrd::AblationRow& row : report.rows) {
    terminal[row.name] = {{"mean", row.mean}, {"stdev", row.stdev}, {"acc", row.accuracies}};
  }
  vcrd::write_summary_json((dir / "ablation_summary.json").string(), cfg, terminal,
                           elapsed_ms_since(start));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Validity-calibrated distillation workbench for tabular policies"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate train/eval dataset files");
  add_common(gen, gen_args);

  CommonArgs teacher_args;
  CLI::App* teach = app.add_subcommand("train-teacher", "Fit the teacher and save a checkpoint");
  add_common(teach, teacher_args);

  CommonArgs sft_args;
  CLI::App* sft = app.add_subcommand("sft-student", "Supervised-fit the student initializer");
  add_common(sft, sft_args);

  CommonArgs distill_args;
  std::string distill_teacher, distill_student;
  CLI::App* dist = app.add_subcommand("distill", "Run validity-weighted distillation");
  add_common(dist, distill_args);
  dist->add_option("--teacher", distill_teacher, "Teacher checkpoint (default: fit in-process)");
  dist->add_option("--student", distill_student, "Student checkpoint (default: fit in-process)");

  CommonArgs eval_args;
  std::string eval_ckpt;
  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the probe set");
  add_common(ev, eval_args);
  ev->add_option("--ckpt", eval_ckpt, "Policy checkpoint to evaluate")->required();

  CommonArgs analyze_args;
  std::string analyze_teacher, analyze_student;
  CLI::App* an = app.add_subcommand("analyze-ratios", "Reward-ratio histogram and summary");
  add_common(an, analyze_args);
  an->add_option("--teacher", analyze_teacher, "Teacher checkpoint (default: fit in-process)");
  an->add_option("--student", analyze_student, "Student checkpoint (default: fit in-process)");

  std::string tr_pi, tr_r, tr_payload;
  double tr_delta = 0.05;
  CLI::App* tr = app.add_subcommand("trust-region", "Solve one KL trust-region instance");
  tr->add_option("--pi", tr_pi, "Anchor distribution, comma-separated");
  tr->add_option("--r", tr_r, "Reward vector, comma-separated");
  tr->add_option("--delta", tr_delta, "KL budget");
  tr->add_option("--payload", tr_payload, "JSON file with pi, r, delta");

  CommonArgs ablate_args;
  CLI::App* ab = app.add_subcommand("ablate", "Run the ablation grid over seeds");
  add_common(ab, ablate_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_data(gen_args);
    if (*teach) return cmd_train_teacher(teacher_args);
    if (*sft) return cmd_sft_student(sft_args);
    if (*dist) return cmd_distill(distill_args, distill_teacher, distill_student);
    if (*ev) return cmd_eval(eval_args, eval_ckpt);
    if (*an) return cmd_analyze_ratios(analyze_args, analyze_teacher, analyze_student);
    if (*tr) return cmd_trust_region(tr_pi, tr_r, tr_delta, tr_payload);
    if (*ab) return cmd_ablate(ablate_args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "usage error: no subcommand\n";
  return 1;
}
