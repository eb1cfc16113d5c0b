// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "vcrd/rng.hpp"
#include "vcrd/tasks.hpp"

namespace {

TEST_CASE("task vocabularies lay out pad, digits, then task tokens") {
  const vcrd::TaskSpec chain = vcrd::TaskSpec::chain(7, 3);
  REQUIRE(chain.vocab.size() == 20);
  REQUIRE(chain.vocab.symbol(0) == "_");
  REQUIRE(chain.pad_token() == 0);
  REQUIRE(chain.digit_token(0) == 1);
  REQUIRE(chain.digit_token(6) == 7);
  REQUIRE(chain.vocab.symbol(chain.digit_token(3)) == "3");
  REQUIRE(chain.vocab.symbol(chain.op_token(2, true)) == "+2");
  REQUIRE(chain.vocab.symbol(chain.op_token(2, false)) == "-2");
  REQUIRE(chain.op_token(1, true) == 8);
  REQUIRE(chain.op_token(1, false) == 14);
  REQUIRE(chain.horizon() == 4);

  const vcrd::TaskSpec multi = vcrd::TaskSpec::multipath(7, 3);
  REQUIRE(multi.vocab.size() == 11);
  REQUIRE(multi.slot_token(0) == 8);
  REQUIRE(multi.vocab.symbol(multi.slot_token(1)) == "x2");
  REQUIRE(multi.horizon() == 7);

  for (int v = 0; v < 7; ++v) REQUIRE(chain.digit_value(chain.digit_token(v)) == v);
  REQUIRE_THROWS_AS(chain.digit_value(0), std::invalid_argument);
  REQUIRE_THROWS_AS(chain.digit_value(8), std::invalid_argument);
  REQUIRE_THROWS_AS(chain.slot_token(0), std::logic_error);
  REQUIRE_THROWS_AS(multi.op_token(1, true), std::logic_error);
  REQUIRE_THROWS_AS(vcrd::TaskSpec::chain(1, 3), std::invalid_argument);
  REQUIRE_THROWS_AS(vcrd::TaskSpec::multipath(7, 5), std::invalid_argument);
}

TEST_CASE("a chain instance emits every intermediate value then the answer") {
  const vcrd::TaskSpec spec = vcrd::TaskSpec::chain(7, 2);
  const vcrd::TokenSeq prompt{spec.digit_token(3), spec.op_token(2, true), spec.op_token(4, true)};
  const vcrd::TaskInstance inst = vcrd::instance_from_prompt(spec, prompt);
  REQUIRE(inst.gold_trajectories.size() == 1);
  REQUIRE(inst.gold_trajectories[0] ==
          vcrd::TokenSeq{spec.digit_token(5), spec.digit_token(2), spec.digit_token(2)});
  REQUIRE(inst.answer == vcrd::TokenSeq{spec.digit_token(2)});

  const vcrd::TaskSpec tiny = vcrd::TaskSpec::chain(5, 1);
  const vcrd::TaskInstance neg = vcrd::instance_from_prompt(
      tiny, {tiny.digit_token(1), tiny.op_token(3, false)});
  REQUIRE(neg.gold_trajectories[0] ==
          vcrd::TokenSeq{tiny.digit_token(3), tiny.digit_token(3)});
}

TEST_CASE("a multipath instance is gold under every consumption order") {
  const vcrd::TaskSpec spec = vcrd::TaskSpec::multipath(7, 2);
  const vcrd::TokenSeq prompt{spec.slot_token(0), spec.digit_token(2), spec.slot_token(1),
                              spec.digit_token(5)};
  const vcrd::TaskInstance inst = vcrd::instance_from_prompt(spec, prompt);
  REQUIRE(inst.gold_trajectories.size() == 2);
  REQUIRE(inst.answer == vcrd::TokenSeq{spec.digit_token(0)});
  REQUIRE(inst.gold_trajectories[0] ==
          vcrd::TokenSeq{spec.slot_token(0), spec.digit_token(2), spec.slot_token(1),
                         spec.digit_token(0), spec.digit_token(0)});
  REQUIRE(inst.gold_trajectories[1] ==
          vcrd::TokenSeq{spec.slot_token(1), spec.digit_token(5), spec.slot_token(0),
                         spec.digit_token(0), spec.digit_token(0)});

  const vcrd::TaskSpec three = vcrd::TaskSpec::multipath(5, 3);
  vcrd::RngStream rng(3);
  const auto insts = vcrd::gen_multipath(three, 10, rng);
  for (const auto& i : insts) {
    REQUIRE(i.gold_trajectories.size() == 6);
    for (const auto& gold : i.gold_trajectories) {
      REQUIRE(gold.size() == static_cast<std::size_t>(three.horizon()));
      REQUIRE(gold.back() == i.answer[0]);
    }
  }
}

TEST_CASE("instance generation replays exactly under one stream seed") {
  const vcrd::TaskSpec spec = vcrd::TaskSpec::chain(7, 3);
  vcrd::RngStream a = vcrd::derive_stream(9, "data");
  vcrd::RngStream b = vcrd::derive_stream(9, "data");
  const auto xs = vcrd::gen_instances(spec, 25, a);
  const auto ys = vcrd::gen_instances(spec, 25, b);
  REQUIRE(xs.size() == 25);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    REQUIRE(xs[i].prompt == ys[i].prompt);
    REQUIRE(xs[i].answer == ys[i].answer);
    REQUIRE(xs[i].gold_trajectories == ys[i].gold_trajectories);
  }
  vcrd::RngStream c(0);
  REQUIRE_THROWS_AS(vcrd::gen_chain(vcrd::TaskSpec::multipath(7, 2), 1, c), std::invalid_argument);
  REQUIRE_THROWS_AS(vcrd::gen_chain(spec, -1, c), std::invalid_argument);
}

TEST_CASE("valid_next tracks the surviving gold continuations") {
  const vcrd::TaskSpec spec = vcrd::TaskSpec::multipath(7, 2);
  const vcrd::TaskInstance inst = vcrd::instance_from_prompt(
      spec, {spec.slot_token(0), spec.digit_token(2), spec.slot_token(1), spec.digit_token(5)});

  const std::set<vcrd::TokenId> first = vcrd::valid_next(inst, {inst.prompt, {}});
  REQUIRE(first == std::set<vcrd::TokenId>{spec.slot_token(0), spec.slot_token(1)});

  const std::set<vcrd::TokenId> second =
      vcrd::valid_next(inst, {inst.prompt, {spec.slot_token(0)}});
  REQUIRE(second == std::set<vcrd::TokenId>{spec.digit_token(2)});

  REQUIRE(vcrd::valid_next(inst, {inst.prompt, {spec.digit_token(3)}}).empty());
  REQUIRE(vcrd::valid_next(inst, {inst.prompt, inst.gold_trajectories[0]}).empty());
  REQUIRE_THROWS_AS(vcrd::valid_next(inst, {{spec.slot_token(0)}, {}}), std::invalid_argument);
}

TEST_CASE("every step of every gold trajectory is judged valid") {
  vcrd::RngStream rng(21);
  std::vector<vcrd::TaskSpec> specs{vcrd::TaskSpec::chain(5, 3), vcrd::TaskSpec::multipath(7, 3)};
  for (const vcrd::TaskSpec& spec : specs) {
    for (const vcrd::TaskInstance& inst : vcrd::gen_instances(spec, 25, rng)) {
      for (const vcrd::TokenSeq& gold : inst.gold_trajectories) {
        vcrd::Prefix prefix{inst.prompt, {}};
        for (vcrd::TokenId t : gold) {
          REQUIRE(vcrd::valid_next(inst, prefix).count(t) == 1);
          prefix.generated.push_back(t);
        }
      }
    }
  }
}

TEST_CASE("a wide-window teacher memorizes a small chain corpus") {
  const vcrd::TaskSpec spec = vcrd::TaskSpec::chain(5, 2);
  vcrd::RngStream data = vcrd::derive_stream(4, "data");
  const auto instances = vcrd::gen_instances(spec, 30, data);
  vcrd::RngStream fit = vcrd::derive_stream(4, "fit");
  const vcrd::FitResult result = vcrd::fit_teacher(spec, instances, 5, 30, 0.5, fit);
  REQUIRE(result.train_accuracy == 1.0);
  REQUIRE(vcrd::final_answer_accuracy(result.policy, instances, spec.horizon()) == 1.0);
  REQUIRE(result.policy.state_count() > 0);

  vcrd::RngStream zero = vcrd::derive_stream(4, "zero");
  const vcrd::FitResult untrained = vcrd::fit_teacher(spec, instances, 5, 0, 0.5, zero);
  REQUIRE(untrained.policy.state_count() == 0);
}

TEST_CASE("a multipath teacher keeps both consumption orders alive") {
  const vcrd::TaskSpec spec = vcrd::TaskSpec::multipath(5, 2);
  vcrd::RngStream data = vcrd::derive_stream(6, "data");
  const auto instances = vcrd::gen_instances(spec, 60, data);
  vcrd::RngStream fit = vcrd::derive_stream(6, "fit");
  const vcrd::FitResult result = vcrd::fit_teacher(spec, instances, 5, 40, 0.5, fit);

  const vcrd::Categorical first = result.policy.next_dist({instances[0].prompt, {}});
  double entropy = 0.0;
  for (double p : first.probs)
    if (p > 0.0) entropy -= p * std::log(p);
  REQUIRE(entropy > 0.3);
}

TEST_CASE("an instance-blind answer policy scores near one over the modulus") {
  const vcrd::TaskSpec spec = vcrd::TaskSpec::multipath(7, 2);
  vcrd::TabularPolicy constant(spec.vocab, 1, spec.pad_token());
  for (vcrd::TokenId s = 0; s < static_cast<vcrd::TokenId>(spec.vocab.size()); ++s) {
    std::vector<double> logits(spec.vocab.size(), 0.0);
    logits[static_cast<std::size_t>(spec.digit_token(0))] = 10.0;
    constant.set_logits({s}, std::move(logits));
  }
  vcrd::RngStream rng = vcrd::derive_stream(17, "blind");
  const auto instances = vcrd::gen_instances(spec, 1000, rng);
  const double acc = vcrd::final_answer_accuracy(constant, instances, spec.horizon());
  // Binomial 3 sigma around 1/7 at n = 1000.
  REQUIRE(std::abs(acc - 1.0 / 7.0) <= 3.0 * std::sqrt((1.0 / 7.0) * (6.0 / 7.0) / 1000.0));
}

TEST_CASE("accuracy over an empty instance list is vacuously one") {
  const vcrd::TaskSpec spec = vcrd::TaskSpec::chain(5, 1);
  vcrd::TabularPolicy policy(spec.vocab, 2, spec.pad_token());
  REQUIRE(vcrd::final_answer_accuracy(policy, {}, spec.horizon()) == 1.0);
}

TEST_CASE("datasets round-trip through their text encoding") {
  for (const vcrd::TaskSpec& spec :
       {vcrd::TaskSpec::chain(7, 3), vcrd::TaskSpec::multipath(5, 3)}) {
    vcrd::RngStream rng = vcrd::derive_stream(13, "ds", vcrd::task_kind_name(spec.kind));
    const auto instances = vcrd::gen_instances(spec, 20, rng);
    const std::filesystem::path path =
        std::filesystem::temp_directory_path() /
        ("vcrd_dataset_test_" + vcrd::task_kind_name(spec.kind) + ".txt");
    vcrd::save_dataset(instances, spec.vocab, path.string());
    const auto loaded = vcrd::load_dataset(spec, path.string());
    std::filesystem::remove(path);
    REQUIRE(loaded.size() == instances.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
      REQUIRE(loaded[i].prompt == instances[i].prompt);
      REQUIRE(loaded[i].answer == instances[i].answer);
      REQUIRE(loaded[i].gold_trajectories == instances[i].gold_trajectories);
    }
  }
}

TEST_CASE("dataset loading rejects corrupted lines") {
  const vcrd::TaskSpec spec = vcrd::TaskSpec::chain(5, 1);
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "vcrd_dataset_corrupt_test.txt";
  auto write_and_load = [&](const std::string& text) {
    std::ofstream out(path.string(), std::ios::binary);
    out << text;
    out.close();
    return vcrd::load_dataset(spec, path.string());
  };

  REQUIRE_THROWS_WITH(write_and_load("3 +2 1 4\n"),
                      Catch::Matchers::ContainsSubstring("missing first '|'"));
  REQUIRE_THROWS_WITH(write_and_load("3 +2 | 1\n"),
                      Catch::Matchers::ContainsSubstring("missing second '|'"));
  REQUIRE_THROWS_WITH(write_and_load("3 +2 | 2 | 0\n"),
                      Catch::Matchers::ContainsSubstring("gold-count mismatch"));
  REQUIRE_THROWS_WITH(write_and_load("3 +2 | 1 | 4\n"),
                      Catch::Matchers::ContainsSubstring("answer mismatch"));
  REQUIRE_THROWS_AS(write_and_load("3 banana | 1 | 0\n"), std::invalid_argument);
  std::filesystem::remove(path);
  REQUIRE_THROWS_AS(vcrd::load_dataset(spec, "/nonexistent/vcrd/data.txt"), std::runtime_error);
}

TEST_CASE("prompt decoding rejects foreign encodings") {
  const vcrd::TaskSpec chain = vcrd::TaskSpec::chain(5, 2);
  REQUIRE_THROWS_AS(vcrd::instance_from_prompt(chain, {chain.digit_token(1)}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(
      vcrd::instance_from_prompt(
          chain, {chain.digit_token(1), chain.digit_token(2), chain.op_token(1, true)}),
      std::invalid_argument);

  const vcrd::TaskSpec multi = vcrd::TaskSpec::multipath(5, 2);
  REQUIRE_THROWS_AS(
      vcrd::instance_from_prompt(multi, {multi.slot_token(1), multi.digit_token(0),
                                         multi.slot_token(0), multi.digit_token(1)}),
      std::invalid_argument);
}

}  // namespace
