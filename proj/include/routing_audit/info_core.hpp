// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

/**
 * @file info_core.hpp
 * @brief Exact scalar information-theoretic primitives.
 *
 * Everything here works in nats. Conversion to bits happens only when a
 * value is formatted for a human (see Nats::bits()).
 *
 * The joint-distribution routines are exact enumerations over small dense
 * alphabets; nothing in this header estimates from samples.
 */

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace routing_audit {

/// Information quantity in natural-log units.
class Nats {
 public:
  constexpr Nats() = default;
  explicit Nats(double value);

  constexpr double value() const { return value_; }
  double bits() const;

  friend Nats operator+(Nats a, Nats b) { return Nats(a.value_ + b.value_); }
  friend Nats operator-(Nats a, Nats b) { return Nats(a.value_ - b.value_); }
  friend constexpr auto operator<=>(Nats, Nats) = default;

 private:
  double value_ = 0.0;
};

/// A KL divergence, which may be +infinity when the reference puts zero
/// mass where the argument does not. The infinite case is a distinct state
/// so it never leaks into floating-point sums.
class Divergence {
 public:
  /// Zero divergence.
  Divergence() = default;
  static Divergence finite(double nats);
  static Divergence infinite() { return Divergence(true, 0.0); }

  bool is_infinite() const { return infinite_; }
  /// Throws Error(kDomain) when infinite.
  Nats nats() const;
  /// Finite value, or +inf for reporting layers that accept it.
  double value_or_inf() const;

  friend std::partial_ordering operator<=>(const Divergence& a,
                                           const Divergence& b);
  friend bool operator==(const Divergence& a, const Divergence& b);

 private:
  Divergence(bool inf, double v) : infinite_(inf), value_(v) {}
  bool infinite_ = false;
  double value_ = 0.0;
};

/// Dense joint distribution p(x, y), rows indexed by x (the value V),
/// columns by y (the decision / channel output).
class JointDistribution {
 public:
  static constexpr double kNormalizationTolerance = 1e-12;

  /// Validates entries in [0,1] and total mass 1 +- 1e-12.
  JointDistribution(std::size_t rows, std::size_t cols, std::vector<double> p);
  static JointDistribution from_rows(
      const std::vector<std::vector<double>>& rows);
  /// prior[x] * channel[x][y] for a row-stochastic channel.
  static JointDistribution from_prior_and_channel(
      std::span<const double> prior, std::size_t cols,
      std::span<const double> channel_row_major);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t x, std::size_t y) const {
    return p_[x * cols_ + y];
  }
  std::span<const double> data() const { return p_; }

  std::vector<double> row_marginal() const;
  std::vector<double> col_marginal() const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> p_;
};

/// Decomposition I(V;Y) = fano_bound + jensen_slack + confusion_slack.
struct SlackDecomposition {
  std::size_t alphabet_size = 0;
  double error_rate = 0.0;
  Nats fano_bound;
  Nats jensen_slack;
  Nats confusion_slack;
  Nats mutual_information;
};

struct RoutingEfficiency {
  double eta = 0.0;
  /// i_used exceeded i_avail beyond tolerance; inputs are inconsistent.
  bool dpi_violation = false;
};

struct WilsonInterval {
  std::uint64_t successes = 0;
  std::uint64_t n = 0;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double confidence = 0.95;
};

/// -p ln p - (1-p) ln(1-p), with 0 ln 0 = 0.
Nats binary_entropy(double p);

/// Shannon entropy of a probability vector.
Nats entropy(std::span<const double> p);

/// KL(Ber(p) || Ber(q)).
Divergence kl_bernoulli(double p, double q);

/// Minimum information needed to lift success probability from
/// `pseudo_prior` to `target_p`; same value as kl_bernoulli(target_p, pseudo_prior).
Divergence bits_to_trust(double target_p, double pseudo_prior);

/// log M - h(eps) - eps log(M-1), clamped below at 0.
/// Domain: M >= 2, 0 <= eps <= 1 - 1/M.
Nats fano_lower_bound(std::size_t alphabet_size, double epsilon);

/// The error rate eps in [0, 1-1/M] at which fano_lower_bound equals `info`.
double fano_invert(std::size_t alphabet_size, Nats info);

Nats mutual_information(const JointDistribution& joint);

/// Requires a square joint with a uniform V marginal.
SlackDecomposition slack_decompose(const JointDistribution& joint);

/// i_used / i_avail clamped to [0,1].
RoutingEfficiency routing_efficiency(Nats used, Nats available,
                                     double tolerance = 1e-9);

WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t n,
                               double confidence = 0.95);

}  // namespace routing_audit
