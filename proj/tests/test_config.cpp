// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vcrd/config.hpp"

namespace {

std::filesystem::path repo_config(const std::string& name) {
  return std::filesystem::path(__FILE__).parent_path().parent_path() / "configs" / name;
}

TEST_CASE("the default config is valid and builds every component") {
  const vcrd::RunConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  const vcrd::TaskSpec spec = cfg.make_task_spec();
  REQUIRE(spec.kind == vcrd::TaskKind::Chain);
  REQUIRE(spec.modulus == 7);
  REQUIRE(cfg.make_train_config().horizon == 4);
  REQUIRE(cfg.make_judge_config().kind == vcrd::JudgeKind::Oracle);
  REQUIRE(cfg.make_optimizer().kind == vcrd::OptKind::Sgd);

  vcrd::RunConfig adam = cfg;
  adam.set("opt.kind", "adam");
  adam.set("opt.lr", "0.05");
  const vcrd::OptimizerState opt = adam.make_optimizer();
  REQUIRE(opt.kind == vcrd::OptKind::Adam);
  REQUIRE(opt.learning_rate == 0.05);
}

TEST_CASE("the canonical echo re-parses to an identical config") {
  vcrd::RunConfig cfg;
  cfg.set("task.kind", "multipath");
  cfg.set("task.modulus", "5");
  cfg.set("task.operand_count", "2");
  cfg.set("teacher.lr", "0.125");
  cfg.set("train.alpha", "0.3");
  cfg.set("train.clamp_amplification", "true");
  cfg.set("run.seed", "18446744073709551615");
  cfg.set("run.out_dir", "out/somewhere");

  const auto echoed = cfg.echo();
  REQUIRE(echoed.size() == 37);
  REQUIRE(echoed.front().first == "task.kind");
  REQUIRE(echoed.back().first == "ablate.seeds");

  vcrd::RunConfig rebuilt;
  for (const auto& [key, value] : echoed) rebuilt.set(key, value);
  REQUIRE(rebuilt.echo() == echoed);
  REQUIRE(rebuilt.run_seed == UINT64_MAX);
  REQUIRE(rebuilt.teacher_lr == 0.125);
}

TEST_CASE("assignments reject unknown keys and malformed values") {
  vcrd::RunConfig cfg;
  REQUIRE_THROWS_WITH(cfg.set("task.modulos", "7"),
                      Catch::Matchers::ContainsSubstring("unknown key 'task.modulos'"));
  REQUIRE_THROWS_WITH(cfg.set("task.modulus", "seven"),
                      Catch::Matchers::ContainsSubstring("needs an integer"));
  REQUIRE_THROWS_WITH(cfg.set("teacher.lr", "fast"),
                      Catch::Matchers::ContainsSubstring("needs a real number"));
  REQUIRE_THROWS_WITH(cfg.set("train.clamp_amplification", "yes"),
                      Catch::Matchers::ContainsSubstring("needs true or false"));
  REQUIRE_THROWS_WITH(cfg.set("run.seed", "-1"),
                      Catch::Matchers::ContainsSubstring("non-negative integer"));
}

TEST_CASE("config lines handle comments, blanks, and spacing") {
  vcrd::RunConfig cfg;
  REQUIRE_FALSE(vcrd::apply_config_line(cfg, ""));
  REQUIRE_FALSE(vcrd::apply_config_line(cfg, "   \t"));
  REQUIRE_FALSE(vcrd::apply_config_line(cfg, "# just a comment"));
  REQUIRE(vcrd::apply_config_line(cfg, "  task.modulus =  5  # inline note"));
  REQUIRE(cfg.task_modulus == 5);
  REQUIRE(vcrd::apply_config_line(cfg, "run.out_dir=out/x"));
  REQUIRE(cfg.run_out_dir == "out/x");
  REQUIRE_THROWS_WITH(vcrd::apply_config_line(cfg, "task.modulus"),
                      Catch::Matchers::ContainsSubstring("expected 'key = value'"));
  REQUIRE_THROWS_WITH(vcrd::apply_config_line(cfg, " = 3"),
                      Catch::Matchers::ContainsSubstring("empty key"));
}

TEST_CASE("file loading reports the offending line number") {
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "vcrd_config_error_test.cfg";
  {
    std::ofstream out(path);
    out << "task.kind = chain\n";
    out << "\n";
    out << "task.modulus = banana\n";
  }
  REQUIRE_THROWS_WITH(vcrd::load_config(path.string()),
                      Catch::Matchers::ContainsSubstring("line 3"));
  std::filesystem::remove(path);
  REQUIRE_THROWS_AS(vcrd::load_config("/nonexistent/vcrd.cfg"), std::runtime_error);
}

TEST_CASE("overrides win over file values and must not be empty") {
  vcrd::RunConfig cfg;
  vcrd::apply_overrides(cfg, {"train.alpha = 0.25", "opt.kind=adam"});
  REQUIRE(cfg.train_alpha == 0.25);
  REQUIRE(cfg.opt_kind == "adam");
  REQUIRE_THROWS_WITH(vcrd::apply_overrides(cfg, {"# nothing"}),
                      Catch::Matchers::ContainsSubstring("empty override"));
}

TEST_CASE("validation rejects unusable component settings") {
  auto broken = [](const std::string& key, const std::string& value) {
    vcrd::RunConfig cfg;
    cfg.set(key, value);
    return cfg;
  };
  REQUIRE_THROWS_AS(broken("task.kind", "sudoku").validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(broken("judge.kind", "vibes").validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(broken("train.weight_rule", "sometimes").validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(broken("train.weight_token_source", "psychic").validate(),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(broken("train.alpha", "1.5").validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(broken("opt.kind", "momentum").validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(broken("data.train_count", "0").validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(broken("student.window", "0").validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(broken("teacher.epochs", "-1").validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(broken("run.num_workers", "0").validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(broken("run.eval_every", "-1").validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(broken("ablate.seeds", "0").validate(), std::invalid_argument);
}

TEST_CASE("the shipped reference configs load and validate") {
  const vcrd::RunConfig multi = vcrd::load_config(repo_config("multipath_ref.cfg").string());
  REQUIRE_NOTHROW(multi.validate());
  REQUIRE(multi.task_kind == "multipath");
  REQUIRE(multi.task_modulus == 7);
  REQUIRE(multi.teacher_window == 6);
  REQUIRE(multi.student_window == 3);
  REQUIRE(multi.train_weight_token_source == "resample");

  const vcrd::RunConfig chain = vcrd::load_config(repo_config("chain.cfg").string());
  REQUIRE_NOTHROW(chain.validate());
  REQUIRE(chain.task_kind == "chain");
  REQUIRE(chain.task_modulus == 5);
}

}  // namespace
