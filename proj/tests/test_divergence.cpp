// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "vcrd/divergence.hpp"
#include "vcrd/rng.hpp"

namespace {

vcrd::Categorical random_dist(vcrd::RngStream& rng, std::size_t v) {
  std::vector<double> logits(v);
  for (double& z : logits) z = 4.0 * rng.next_double() - 2.0;
  return vcrd::softmax(logits);
}

TEST_CASE("kl hand values") {
  const vcrd::Categorical same = vcrd::Categorical::from_probs({0.3, 0.7});
  REQUIRE(vcrd::kl(same, same) == 0.0);

  const vcrd::Categorical p = vcrd::Categorical::from_probs({0.75, 0.25});
  const vcrd::Categorical q = vcrd::Categorical::from_probs({0.5, 0.5});
  REQUIRE(std::abs(vcrd::kl(p, q) - 0.130812) <= 1e-6);

  const vcrd::Categorical mass = vcrd::Categorical::from_probs({1.0, 0.0});
  REQUIRE(std::abs(vcrd::kl(mass, q) - std::log(2.0)) <= 1e-12);
}

TEST_CASE("kl rejects dimension mismatch") {
  const vcrd::Categorical p = vcrd::Categorical::from_probs({1.0});
  const vcrd::Categorical q = vcrd::Categorical::from_probs({0.5, 0.5});
  REQUIRE_THROWS_AS(vcrd::kl(p, q), std::invalid_argument);
}

TEST_CASE("kl, skl, and srkl are nonnegative on random inputs") {
  vcrd::RngStream rng(21);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t v = 2 + rng.next_below(7);
    const vcrd::Categorical p = random_dist(rng, v);
    const vcrd::Categorical q = random_dist(rng, v);
    const vcrd::SkewParam alpha{rng.next_double()};
    REQUIRE(vcrd::kl(p, q) >= -1e-12);
    REQUIRE(vcrd::skl(p, q, alpha) >= -1e-12);
    REQUIRE(vcrd::srkl(p, q, alpha) >= -1e-12);
  }
}

TEST_CASE("skew_mixture boundaries and hand value") {
  const vcrd::Categorical p = vcrd::Categorical::from_probs({0.8, 0.2});
  const vcrd::Categorical q = vcrd::Categorical::from_probs({0.2, 0.8});
  const vcrd::Categorical at1 = vcrd::skew_mixture(p, q, vcrd::SkewParam{1.0});
  REQUIRE(at1.probs == p.probs);
  const vcrd::Categorical at0 = vcrd::skew_mixture(p, q, vcrd::SkewParam{0.0});
  REQUIRE(at0.probs == q.probs);
  const vcrd::Categorical mid = vcrd::skew_mixture(p, q, vcrd::SkewParam{0.5});
  REQUIRE(std::abs(mid[0] - 0.5) <= 1e-15);
  REQUIRE(std::abs(mid[1] - 0.5) <= 1e-15);
}

TEST_CASE("skew_mixture outputs remain valid distributions") {
  vcrd::RngStream rng(22);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t v = 2 + rng.next_below(7);
    const vcrd::Categorical m =
        vcrd::skew_mixture(random_dist(rng, v), random_dist(rng, v),
                           vcrd::SkewParam{rng.next_double()});
    double sum = 0.0;
    for (double x : m.probs) {
      REQUIRE(x >= 0.0);
      sum += x;
    }
    REQUIRE(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("skl and srkl reduce to plain KL at alpha 0 and vanish at alpha 1") {
  vcrd::RngStream rng(23);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t v = 2 + rng.next_below(7);
    const vcrd::Categorical p = random_dist(rng, v);
    const vcrd::Categorical q = random_dist(rng, v);
    REQUIRE(std::abs(vcrd::skl(p, q, vcrd::SkewParam{0.0}) - vcrd::kl(p, q)) <= 1e-12);
    REQUIRE(std::abs(vcrd::srkl(p, q, vcrd::SkewParam{0.0}) - vcrd::kl(q, p)) <= 1e-12);
    REQUIRE(std::abs(vcrd::skl(p, q, vcrd::SkewParam{1.0})) <= 1e-12);
    REQUIRE(std::abs(vcrd::srkl(p, q, vcrd::SkewParam{1.0})) <= 1e-12);
  }
}

TEST_CASE("skewed divergences match the symmetric hand instance") {
  const vcrd::Categorical p = vcrd::Categorical::from_probs({0.8, 0.2});
  const vcrd::Categorical q = vcrd::Categorical::from_probs({0.2, 0.8});
  const vcrd::SkewParam half{0.5};
  // Both mixtures collapse to (0.5, 0.5); KL(p || uniform) = KL(q || uniform).
  REQUIRE(std::abs(vcrd::skl(p, q, half) - 0.192745) <= 1e-6);
  REQUIRE(std::abs(vcrd::srkl(p, q, half) - 0.192745) <= 1e-6);
}

double fd_grad(const std::function<double(const std::vector<double>&)>& f,
               std::vector<double> z, std::size_t i, double h) {
  z[i] += h;
  const double up = f(z);
  z[i] -= 2.0 * h;
  const double dn = f(z);
  return (up - dn) / (2.0 * h);
}

TEST_CASE("analytic skl and srkl gradients match central differences") {
  vcrd::RngStream rng(24);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t v = 2 + rng.next_below(7);
    const vcrd::Categorical p = random_dist(rng, v);
    std::vector<double> logits(v);
    for (double& z : logits) z = 3.0 * rng.next_double() - 1.5;
    const vcrd::SkewParam alpha{0.999 * rng.next_double()};

    const std::vector<double> g_skl = vcrd::skl_grad_logits(p, logits, alpha);
    const std::vector<double> g_srkl = vcrd::srkl_grad_logits(p, logits, alpha);
    auto f_skl = [&](const std::vector<double>& z) {
      return vcrd::skl(p, vcrd::softmax(z), alpha);
    };
    auto f_srkl = [&](const std::vector<double>& z) {
      return vcrd::srkl(p, vcrd::softmax(z), alpha);
    };
    for (std::size_t i = 0; i < v; ++i) {
      const double fd_s = fd_grad(f_skl, logits, i, 1e-5);
      const double fd_r = fd_grad(f_srkl, logits, i, 1e-5);
      worst = std::max(worst, std::abs(g_skl[i] - fd_s) / std::max({1.0, std::abs(fd_s)}));
      worst = std::max(worst, std::abs(g_srkl[i] - fd_r) / std::max({1.0, std::abs(fd_r)}));
    }
  }
  REQUIRE(worst <= 1e-5);
}

TEST_CASE("gradients vanish at the divergence minimum and at alpha 1") {
  const std::vector<double> logits{0.3, -0.7, 1.1};
  const vcrd::Categorical p = vcrd::softmax(logits);
  for (double a : {0.0, 0.3, 0.9}) {
    for (double g : vcrd::skl_grad_logits(p, logits, vcrd::SkewParam{a}))
      REQUIRE(std::abs(g) <= 1e-10);
    for (double g : vcrd::srkl_grad_logits(p, logits, vcrd::SkewParam{a}))
      REQUIRE(std::abs(g) <= 1e-10);
  }

  const vcrd::Categorical other = vcrd::Categorical::from_probs({0.75, 0.2, 0.05});
  for (double g : vcrd::skl_grad_logits(other, logits, vcrd::SkewParam{1.0}))
    REQUIRE(g == 0.0);
  for (double g : vcrd::srkl_grad_logits(other, logits, vcrd::SkewParam{1.0}))
    REQUIRE(std::abs(g) <= 1e-15);
}

TEST_CASE("hand gradient instance from the contract") {
  const vcrd::Categorical p = vcrd::Categorical::from_probs({0.75, 0.25});
  const std::vector<double> logits{0.0, 0.0};
  const vcrd::SkewParam alpha{0.1};
  const std::vector<double> g = vcrd::skl_grad_logits(p, logits, alpha);
  auto f = [&](const std::vector<double>& z) { return vcrd::skl(p, vcrd::softmax(z), alpha); };
  for (std::size_t i = 0; i < 2; ++i) {
    const double fd = fd_grad(f, logits, i, 1e-5);
    REQUIRE(std::abs(g[i] - fd) / std::max(1.0, std::abs(fd)) <= 1e-5);
  }
}

}  // namespace
