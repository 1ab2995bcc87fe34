// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

/**
 * @file channel_lab.hpp
 * @brief Exact finite-channel chains for information-decay experiments.
 *
 * A chain starts from a copy of V, passes through a sequence of discrete
 * channels, and may re-inject a fresh copy of V before any stage
 * (a checkpoint). All quantities are computed by dense enumeration.
 *
 * SDPI coefficients are only known exactly for the copy-or-noise family,
 * where alpha(K) <= copy probability. Equality I(V;X') = alpha I(V;X)
 * additionally needs every symbol the noise can emit to be uninformative
 * about V in the incoming state; verify_sdpi_contraction() checks that
 * condition exactly rather than assuming it.
 */

#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "routing_audit/info_core.hpp"

namespace routing_audit {

inline constexpr std::size_t kMaxChannelAlphabet = 256;

/// Row-stochastic matrix: rows are inputs, columns outputs.
class DiscreteChannel {
 public:
  static constexpr double kRowTolerance = 1e-12;

  DiscreteChannel(std::size_t inputs, std::size_t outputs,
                  std::vector<double> row_major);
  static DiscreteChannel from_rows(const std::vector<std::vector<double>>& rows);
  static DiscreteChannel identity(std::size_t m);

  std::size_t inputs() const { return inputs_; }
  std::size_t outputs() const { return outputs_; }
  double operator()(std::size_t x, std::size_t y) const {
    return m_[x * outputs_ + y];
  }
  std::span<const double> data() const { return m_; }

 private:
  std::size_t inputs_;
  std::size_t outputs_;
  std::vector<double> m_;
};

/// With probability alpha the input is copied, otherwise a symbol is drawn
/// from `noise`.
struct CopyOrNoiseChannel {
  double alpha = 1.0;
  std::vector<double> noise;
};

/// Diagonal 1-eps, off-diagonal eps/(M-1).
DiscreteChannel symmetric_channel(std::size_t m, double epsilon);

/// alpha I + (1-alpha) 1 noise^T over `m` symbols.
DiscreteChannel copy_or_noise_as_matrix(const CopyOrNoiseChannel& c,
                                        std::size_t m);

/// Copy-or-noise on m+1 symbols whose noise is a point mass on the extra
/// erasure symbol (index m). The erasure symbol is absorbing.
CopyOrNoiseChannel erasure_copy_or_noise(double alpha, std::size_t m);

struct ChainStage {
  DiscreteChannel channel;
  /// Set when the stage is known to be copy-or-noise.
  std::optional<CopyOrNoiseChannel> copy_or_noise;

  static ChainStage from(const CopyOrNoiseChannel& c, std::size_t m);
  static ChainStage arbitrary(DiscreteChannel k);
};

struct ChainSpec {
  /// Distribution of V. Zero entries are allowed (e.g. an erasure slot).
  std::vector<double> prior;
  std::vector<ChainStage> stages;
  /// A checkpoint at j replaces the state by V before stage j runs;
  /// j == stages.size() re-injects V after the last stage.
  std::set<std::size_t> checkpoints;
};

/// Exact joint of (V, final state).
JointDistribution push_joint(const ChainSpec& chain);

/// I(V; state) before stage 0 and after every stage (size stages+1),
/// with checkpoints applied.
std::vector<Nats> mi_profile(const ChainSpec& chain);

struct ContractionReport {
  Nats initial_mi;  // at the start of the certified suffix
  Nats final_mi;
  std::vector<Nats> profile;
  /// First stage of the suffix after the last checkpoint.
  std::size_t suffix_start = 0;
  /// True when every suffix stage is copy-or-noise (SDPI bound is checked);
  /// false falls back to a plain DPI check.
  bool sdpi_mode = false;
  double alpha_product = 1.0;
  bool bound_holds = false;
  bool equality_expected = false;
  bool equality_holds = false;
  /// MI never increases between checkpoints.
  bool dpi_monotone = false;
  std::string detail;
};

ContractionReport verify_sdpi_contraction(const ChainSpec& chain,
                                          double tolerance = 1e-10);

}  // namespace routing_audit
