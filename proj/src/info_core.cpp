// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include "routing_audit/info_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "routing_audit/error.hpp"

namespace routing_audit {

namespace {

constexpr int kBisectionIterations = 200;
constexpr double kBisectionTolerance = 1e-12;

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw_domain(std::string(name) + " must lie in [0,1], got " +
                 std::to_string(p));
  }
}

double xlogx_over(double x, double y) {
  return x > 0.0 ? x * std::log(x / y) : 0.0;
}

double neg_xlogx(double x) { return x > 0.0 ? -x * std::log(x) : 0.0; }

// Unclamped log M - h(eps) - eps log(M-1).
double fano_phi(std::size_t m, double eps) {
  const double md = static_cast<double>(m);
  return std::log(md) - binary_entropy(eps).value() -
         eps * std::log(md - 1.0);
}

void check_alphabet(std::size_t m) {
  if (m < 2) throw_domain("alphabet size must be >= 2");
}

}  // namespace

Nats::Nats(double value) : value_(value) {
  if (std::isnan(value)) throw_domain("information quantity is NaN");
}

double Nats::bits() const { return value_ / std::numbers::ln2; }

Divergence Divergence::finite(double nats) {
  if (!std::isfinite(nats)) throw_domain("finite divergence must be finite");
  return Divergence(false, nats);
}

Nats Divergence::nats() const {
  if (infinite_) throw_domain("divergence is infinite");
  return Nats(value_);
}

double Divergence::value_or_inf() const {
  return infinite_ ? std::numeric_limits<double>::infinity() : value_;
}

std::partial_ordering operator<=>(const Divergence& a, const Divergence& b) {
  if (a.infinite_ || b.infinite_) {
    return a.infinite_ == b.infinite_ ? std::partial_ordering::equivalent
           : a.infinite_              ? std::partial_ordering::greater
                                      : std::partial_ordering::less;
  }
  return a.value_ <=> b.value_;
}

bool operator==(const Divergence& a, const Divergence& b) {
  return (a <=> b) == std::partial_ordering::equivalent;
}

// ---------------------------------------------------------------------------
// JointDistribution

JointDistribution::JointDistribution(std::size_t rows, std::size_t cols,
                                     std::vector<double> p)
    : rows_(rows), cols_(cols), p_(std::move(p)) {
  if (rows_ == 0 || cols_ == 0) throw_domain("joint distribution is empty");
  if (p_.size() != rows_ * cols_) {
    throw_domain("joint distribution size does not match its shape");
  }
  double total = 0.0;
  for (double v : p_) {
    if (!(v >= 0.0 && v <= 1.0 + kNormalizationTolerance)) {
      throw_domain("joint entry outside [0,1]");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    throw_domain("joint distribution sums to " + std::to_string(total) +
                 ", not 1");
  }
}

JointDistribution JointDistribution::from_rows(
    const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw_domain("joint distribution is empty");
  const std::size_t cols = rows.front().size();
  std::vector<double> p;
  p.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw_domain("ragged joint distribution");
    p.insert(p.end(), r.begin(), r.end());
  }
  return JointDistribution(rows.size(), cols, std::move(p));
}

JointDistribution JointDistribution::from_prior_and_channel(
    std::span<const double> prior, std::size_t cols,
    std::span<const double> channel_row_major) {
  if (channel_row_major.size() != prior.size() * cols) {
    throw_domain("channel shape does not match prior");
  }
  std::vector<double> p(prior.size() * cols);
  for (std::size_t x = 0; x < prior.size(); ++x) {
    for (std::size_t y = 0; y < cols; ++y) {
      p[x * cols + y] = prior[x] * channel_row_major[x * cols + y];
    }
  }
  return JointDistribution(prior.size(), cols, std::move(p));
}

std::vector<double> JointDistribution::row_marginal() const {
  std::vector<double> m(rows_, 0.0);
  for (std::size_t x = 0; x < rows_; ++x) {
    for (std::size_t y = 0; y < cols_; ++y) m[x] += (*this)(x, y);
  }
  return m;
}

std::vector<double> JointDistribution::col_marginal() const {
  std::vector<double> m(cols_, 0.0);
  for (std::size_t x = 0; x < rows_; ++x) {
    for (std::size_t y = 0; y < cols_; ++y) m[y] += (*this)(x, y);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Scalars

Nats binary_entropy(double p) {
  check_probability(p, "p");
  return Nats(neg_xlogx(p) + neg_xlogx(1.0 - p));
}

Nats entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    check_probability(v, "probability");
    h += neg_xlogx(v);
  }
  return Nats(h);
}

Divergence kl_bernoulli(double p, double q) {
  check_probability(p, "p");
  check_probability(q, "q");
  if ((q == 0.0 && p > 0.0) || (q == 1.0 && p < 1.0)) {
    return Divergence::infinite();
  }
  const double kl = xlogx_over(p, q) + xlogx_over(1.0 - p, 1.0 - q);
  // Rounding can produce -1e-17 for p == q.
  return Divergence::finite(std::max(kl, 0.0));
}

Divergence bits_to_trust(double target_p, double pseudo_prior) {
  return kl_bernoulli(target_p, pseudo_prior);
}

Nats fano_lower_bound(std::size_t alphabet_size, double epsilon) {
  check_alphabet(alphabet_size);
  check_probability(epsilon, "epsilon");
  const double limit = 1.0 - 1.0 / static_cast<double>(alphabet_size);
  if (epsilon > limit + 1e-15) {
    throw_domain("epsilon " + std::to_string(epsilon) +
                 " exceeds 1 - 1/M = " + std::to_string(limit));
  }
  return Nats(std::max(0.0, fano_phi(alphabet_size, std::min(epsilon, limit))));
}

double fano_invert(std::size_t alphabet_size, Nats info) {
  check_alphabet(alphabet_size);
  const double log_m = std::log(static_cast<double>(alphabet_size));
  const double target = info.value();
  if (target < 0.0) throw_domain("information must be nonnegative");
  if (target > log_m + 1e-12) {
    throw_domain("information exceeds log M");
  }
  const double limit = 1.0 - 1.0 / static_cast<double>(alphabet_size);
  if (target >= log_m) return 0.0;
  if (target == 0.0) return limit;

  // Phi is strictly decreasing on [0, limit]. Keep bisecting past the
  // 1e-12 residual until the bracket collapses: Phi is flat near `limit`,
  // so a small residual alone does not pin eps.
  double lo = 0.0;
  double hi = limit;
  for (int it = 0; it < kBisectionIterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double phi = fano_phi(alphabet_size, mid);
    if (phi > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= std::numeric_limits<double>::epsilon() * hi &&
        std::abs(phi - target) <= kBisectionTolerance) {
      break;
    }
  }
  return 0.5 * (lo + hi);
}

Nats mutual_information(const JointDistribution& joint) {
  const auto px = joint.row_marginal();
  const auto py = joint.col_marginal();
  double mi = 0.0;
  for (std::size_t x = 0; x < joint.rows(); ++x) {
    for (std::size_t y = 0; y < joint.cols(); ++y) {
      const double pxy = joint(x, y);
      if (pxy > 0.0) mi += pxy * std::log(pxy / (px[x] * py[y]));
    }
  }
  return Nats(std::max(mi, 0.0));
}

SlackDecomposition slack_decompose(const JointDistribution& joint) {
  const std::size_t m = joint.rows();
  if (joint.cols() != m) {
    throw_domain("slack decomposition needs Y on the same alphabet as V");
  }
  check_alphabet(m);
  const auto pv = joint.row_marginal();
  const double uniform = 1.0 / static_cast<double>(m);
  for (double v : pv) {
    if (std::abs(v - uniform) > 1e-10) {
      throw_domain("slack decomposition requires a uniform V marginal");
    }
  }
  const auto py = joint.col_marginal();

  double correct = 0.0;
  for (std::size_t y = 0; y < m; ++y) correct += joint(y, y);
  const double eps = std::clamp(1.0 - correct, 0.0, 1.0);

  // H(E|Y) and H(V|Y,E=1).
  double h_e_given_y = 0.0;
  double h_v_given_y_err = 0.0;
  for (std::size_t y = 0; y < m; ++y) {
    if (py[y] <= 0.0) continue;
    const double err_mass = std::max(py[y] - joint(y, y), 0.0);
    h_e_given_y += py[y] * binary_entropy(std::clamp(err_mass / py[y], 0.0, 1.0)).value();
    if (err_mass <= 0.0) continue;
    double h = 0.0;
    for (std::size_t v = 0; v < m; ++v) {
      if (v == y) continue;
      h += neg_xlogx(joint(v, y) / err_mass);
    }
    // Weight P(Y=y | E=1) = err_mass / eps; times eps below.
    h_v_given_y_err += err_mass * h;
  }

  const double log_m1 = std::log(static_cast<double>(m) - 1.0);
  SlackDecomposition out;
  out.alphabet_size = m;
  out.error_rate = eps;
  out.fano_bound = Nats(fano_phi(m, eps));
  out.jensen_slack = Nats(binary_entropy(eps).value() - h_e_given_y);
  out.confusion_slack = Nats(eps * log_m1 - h_v_given_y_err);
  out.mutual_information = mutual_information(joint);
  return out;
}

RoutingEfficiency routing_efficiency(Nats used, Nats available,
                                     double tolerance) {
  if (available.value() <= 0.0) {
    throw_domain("routing efficiency is undefined for zero available information");
  }
  if (used.value() < 0.0) throw_domain("used information must be nonnegative");
  RoutingEfficiency r;
  r.dpi_violation = used.value() > available.value() + tolerance;
  r.eta = std::clamp(used.value() / available.value(), 0.0, 1.0);
  return r;
}

WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t n,
                               double confidence) {
  if (n == 0) throw_domain("Wilson interval needs n >= 1");
  if (successes > n) throw_domain("successes exceed trials");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw_domain("confidence must lie in (0,1)");
  }
  const boost::math::normal standard;
  const double z = boost::math::quantile(standard, 1.0 - (1.0 - confidence) / 2.0);
  const double nd = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nd;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nd;
  const double centre = (phat + z2 / (2.0 * nd)) / denom;
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / nd + z2 / (4.0 * nd * nd)) / denom;

  WilsonInterval w;
  w.successes = successes;
  w.n = n;
  w.estimate = phat;
  w.confidence = confidence;
  w.lower = successes == 0 ? 0.0 : std::clamp(centre - half, 0.0, phat);
  w.upper = successes == n ? 1.0 : std::clamp(centre + half, phat, 1.0);
  return w;
}

}  // namespace routing_audit
