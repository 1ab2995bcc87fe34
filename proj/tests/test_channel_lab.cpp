// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include <gtest/gtest.h>

#include <cmath>

#include "routing_audit/channel_lab.hpp"
#include "routing_audit/error.hpp"
#include "routing_audit/rng.hpp"

namespace ra = routing_audit;

namespace {

std::vector<double> uniform(std::size_t m) {
  return std::vector<double>(m, 1.0 / static_cast<double>(m));
}

ra::ChainSpec erasure_chain(double alpha, std::size_t m, std::size_t length) {
  ra::ChainSpec c;
  c.prior = uniform(m);
  c.prior.push_back(0.0);
  for (std::size_t i = 0; i < length; ++i) {
    c.stages.push_back(ra::ChainStage::from(ra::erasure_copy_or_noise(alpha, m), m + 1));
  }
  return c;
}

ra::DiscreteChannel random_channel(ra::Rng& rng, std::size_t in, std::size_t out) {
  std::vector<double> m(in * out);
  for (std::size_t x = 0; x < in; ++x) {
    double total = 0.0;
    for (std::size_t y = 0; y < out; ++y) total += m[x * out + y] = rng.uniform();
    for (std::size_t y = 0; y < out; ++y) m[x * out + y] /= total;
  }
  return ra::DiscreteChannel(in, out, m);
}

}  // namespace

TEST(SymmetricChannel, Examples) {
  const auto id = ra::symmetric_channel(3, 0.0);
  for (std::size_t x = 0; x < 3; ++x) {
    for (std::size_t y = 0; y < 3; ++y) EXPECT_EQ(id(x, y), x == y ? 1.0 : 0.0);
  }
  const auto flat = ra::symmetric_channel(3, 2.0 / 3.0);
  const auto j = ra::JointDistribution::from_prior_and_channel(uniform(3), 3, flat.data());
  EXPECT_NEAR(ra::mutual_information(j).value(), 0.0, 1e-15);

  const auto k50 = ra::symmetric_channel(50, 0.745);
  const auto j50 = ra::JointDistribution::from_prior_and_channel(uniform(50), 50, k50.data());
  EXPECT_NEAR(ra::mutual_information(j50).value(), ra::fano_lower_bound(50, 0.745).value(), 1e-9);
  EXPECT_THROW(ra::symmetric_channel(3, 0.9), ra::Error);
}

TEST(DiscreteChannel, RejectsNonStochasticRows) {
  EXPECT_THROW(ra::DiscreteChannel::from_rows({{0.5, 0.4}}), ra::Error);
  EXPECT_THROW(ra::DiscreteChannel::from_rows({{1.2, -0.2}}), ra::Error);
  EXPECT_THROW(ra::DiscreteChannel::identity(ra::kMaxChannelAlphabet + 1), ra::Error);
}

TEST(CopyOrNoise, AsMatrix) {
  const auto one = ra::copy_or_noise_as_matrix({1.0, uniform(4)}, 4);
  const auto zero = ra::copy_or_noise_as_matrix({0.0, {0.1, 0.2, 0.3, 0.4}}, 4);
  const auto mix = ra::copy_or_noise_as_matrix({0.8, uniform(4)}, 4);
  for (std::size_t x = 0; x < 4; ++x) {
    for (std::size_t y = 0; y < 4; ++y) {
      EXPECT_EQ(one(x, y), x == y ? 1.0 : 0.0);
      EXPECT_DOUBLE_EQ(zero(x, y), 0.1 * (y + 1));
    }
    EXPECT_NEAR(mix(x, x), 0.85, 1e-15);
  }
  EXPECT_THROW(ra::copy_or_noise_as_matrix({0.5, uniform(3)}, 4), ra::Error);
  EXPECT_THROW(ra::copy_or_noise_as_matrix({1.5, uniform(4)}, 4), ra::Error);
}

TEST(PushJoint, EmptyChainIsIdentityCoupling) {
  ra::ChainSpec c;
  c.prior = {0.1, 0.2, 0.7};
  const auto j = ra::push_joint(c);
  EXPECT_NEAR(ra::mutual_information(j).value(), ra::entropy(c.prior).value(), 1e-15);
}

TEST(PushJoint, PreservesPrior) {
  ra::Rng rng(8);
  ra::ChainSpec c;
  c.prior = {0.5, 0.3, 0.2};
  c.stages.push_back(ra::ChainStage::arbitrary(random_channel(rng, 3, 5)));
  c.stages.push_back(ra::ChainStage::arbitrary(random_channel(rng, 5, 2)));
  const auto marginal = ra::push_joint(c).row_marginal();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(marginal[i], c.prior[i], 1e-15);
}

TEST(PushJoint, IncompatibleAlphabets) {
  ra::Rng rng(9);
  ra::ChainSpec c;
  c.prior = uniform(3);
  c.stages.push_back(ra::ChainStage::arbitrary(random_channel(rng, 3, 4)));
  c.stages.push_back(ra::ChainStage::arbitrary(random_channel(rng, 3, 3)));
  EXPECT_THROW(ra::push_joint(c), ra::Error);
}

TEST(ErasureChain, GeometricDecay) {
  for (double alpha : {0.5, 0.8, 0.95}) {
    for (std::size_t k = 1; k <= 12; ++k) {
      const auto profile = ra::mi_profile(erasure_chain(alpha, 4, k));
      EXPECT_NEAR(profile.back().value() / profile.front().value(), std::pow(alpha, k), 1e-9);
    }
  }
}

TEST(ErasureChain, CheckpointResetsDistance) {
  const std::size_t k = 10;
  ra::ChainSpec c = erasure_chain(0.8, 4, k);
  c.checkpoints.insert(k - 1);
  EXPECT_NEAR(ra::mi_profile(c).back().value(), 0.8 * std::log(4.0), 1e-9);
  for (std::size_t j = 0; j <= k; ++j) {
    ra::ChainSpec cj = erasure_chain(0.8, 4, k);
    cj.checkpoints.insert(j);
    const double suffix = ra::mi_profile(erasure_chain(0.8, 4, k - j)).back().value();
    EXPECT_NEAR(ra::mi_profile(cj).back().value(), suffix, 1e-9) << "j=" << j;
  }
}

TEST(UniformNoiseChain, IsSymmetricChannelComposite) {
  // Uniform noise on the input alphabet composes to an M-ary symmetric
  // channel; its exact MI sits below alpha^k H(V).
  const std::size_t m = 4;
  ra::ChainSpec c;
  c.prior = uniform(m);
  const int k = 3;
  for (int i = 0; i < k; ++i) c.stages.push_back(ra::ChainStage::from({0.8, uniform(m)}, m));
  const double a = std::pow(0.8, k);
  const double eps = (1.0 - a) * (m - 1.0) / m;
  const double mi = ra::mi_profile(c).back().value();
  EXPECT_NEAR(mi, ra::fano_lower_bound(m, eps).value(), 1e-12);
  EXPECT_LT(mi, a * std::log(4.0));
  const auto s = ra::slack_decompose(ra::push_joint(c));
  EXPECT_NEAR(s.jensen_slack.value(), 0.0, 1e-12);
  EXPECT_NEAR(s.confusion_slack.value(), 0.0, 1e-12);

  const auto rep = ra::verify_sdpi_contraction(c);
  EXPECT_TRUE(rep.bound_holds);
  EXPECT_FALSE(rep.equality_expected);
}

TEST(VerifySdpi, Examples) {
  auto rep = ra::verify_sdpi_contraction(erasure_chain(1.0, 4, 3));
  EXPECT_TRUE(rep.bound_holds);
  EXPECT_TRUE(rep.equality_holds);
  EXPECT_EQ(rep.alpha_product, 1.0);
  EXPECT_NEAR(rep.final_mi.value(), rep.initial_mi.value(), 1e-12);

  rep = ra::verify_sdpi_contraction(erasure_chain(0.9, 4, 8));
  EXPECT_TRUE(rep.sdpi_mode);
  EXPECT_TRUE(rep.equality_expected);
  EXPECT_TRUE(rep.equality_holds);
  EXPECT_NEAR(rep.final_mi.value() / rep.initial_mi.value(), 0.43046721, 1e-9);

  ra::Rng rng(1);
  ra::ChainSpec mixed = erasure_chain(0.9, 4, 2);
  mixed.stages.push_back(ra::ChainStage::arbitrary(random_channel(rng, 5, 5)));
  rep = ra::verify_sdpi_contraction(mixed);
  EXPECT_FALSE(rep.sdpi_mode);
  EXPECT_TRUE(rep.bound_holds);
  EXPECT_TRUE(rep.dpi_monotone);
}

TEST(Dpi, NeverViolatedOnRandomChains) {
  ra::Rng rng(1000);
  for (int t = 0; t < 1000; ++t) {
    ra::ChainSpec c;
    std::size_t width = 2 + rng.below(5);
    double total = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      c.prior.push_back(rng.uniform() + 1e-3);
      total += c.prior.back();
    }
    for (auto& p : c.prior) p /= total;
    const std::size_t len = 1 + rng.below(6);
    for (std::size_t s = 0; s < len; ++s) {
      const std::size_t out = 2 + rng.below(5);
      c.stages.push_back(ra::ChainStage::arbitrary(random_channel(rng, width, out)));
      width = out;
    }
    const auto profile = ra::mi_profile(c);
    for (std::size_t i = 1; i < profile.size(); ++i) {
      ASSERT_LE(profile[i].value(), profile[i - 1].value() + 1e-12);
    }
    EXPECT_TRUE(ra::verify_sdpi_contraction(c).dpi_monotone);
  }
}

// A checkpoint makes the final MI independent of the stages before it.
TEST(Checkpoint, PrefixIrrelevant) {
  ra::Rng rng(77);
  for (int t = 0; t < 50; ++t) {
    ra::ChainSpec a;
    a.prior = uniform(3);
    for (int s = 0; s < 5; ++s) a.stages.push_back(ra::ChainStage::arbitrary(random_channel(rng, 3, 3)));
    ra::ChainSpec b = a;
    for (int s = 0; s < 2; ++s) b.stages[s] = ra::ChainStage::arbitrary(random_channel(rng, 3, 3));
    a.checkpoints.insert(2);
    b.checkpoints.insert(2);
    EXPECT_NEAR(ra::mi_profile(a).back().value(), ra::mi_profile(b).back().value(), 1e-12);
  }
}
