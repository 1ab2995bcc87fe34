// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include "routing_audit/channel_lab.hpp"

#include <cmath>
#include <sstream>

#include "routing_audit/error.hpp"

namespace routing_audit {

namespace {

void check_alphabet_size(std::size_t m) {
  if (m == 0 || m > kMaxChannelAlphabet) {
    throw_domain("channel alphabet must have 1.." +
                 std::to_string(kMaxChannelAlphabet) + " symbols");
  }
}

void check_distribution(std::span<const double> p, const char* what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw_domain(std::string(what) + " has an entry outside [0,1]");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > JointDistribution::kNormalizationTolerance) {
    throw_domain(std::string(what) + " does not sum to 1");
  }
}

// Dense |V| x |S| joint, kept unnormalised-free (always sums to 1).
struct State {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> p;

  static State copy_of(std::span<const double> prior) {
    State s{prior.size(), prior.size(), std::vector<double>(prior.size() * prior.size(), 0.0)};
    for (std::size_t v = 0; v < prior.size(); ++v) s.p[v * s.cols + v] = prior[v];
    return s;
  }

  State push(const DiscreteChannel& k) const {
    if (k.inputs() != cols) {
      throw_domain("channel expects " + std::to_string(k.inputs()) +
                   " input symbols but the chain state has " + std::to_string(cols));
    }
    State out{rows, k.outputs(), std::vector<double>(rows * k.outputs(), 0.0)};
    for (std::size_t v = 0; v < rows; ++v) {
      for (std::size_t s = 0; s < cols; ++s) {
        const double mass = p[v * cols + s];
        if (mass == 0.0) continue;
        for (std::size_t t = 0; t < k.outputs(); ++t) {
          out.p[v * out.cols + t] += mass * k(s, t);
        }
      }
    }
    return out;
  }

  JointDistribution joint() const {
    // Accumulated rounding stays far inside the 1e-12 normalisation window
    // for the alphabet sizes allowed here.
    return JointDistribution(rows, cols, p);
  }

  // True when every symbol in supp(noise) with positive mass has posterior
  // P(V | S=s) equal to the prior.
  bool noise_support_uninformative(std::span<const double> noise,
                                   std::span<const double> prior) const {
    for (std::size_t s = 0; s < cols && s < noise.size(); ++s) {
      if (noise[s] <= 0.0) continue;
      double ps = 0.0;
      for (std::size_t v = 0; v < rows; ++v) ps += p[v * cols + s];
      if (ps <= 0.0) continue;
      for (std::size_t v = 0; v < rows; ++v) {
        if (std::abs(p[v * cols + s] / ps - prior[v]) > 1e-12) return false;
      }
    }
    return true;
  }
};

void validate_chain(const ChainSpec& chain) {
  check_alphabet_size(chain.prior.size());
  check_distribution(chain.prior, "chain prior");
  for (std::size_t j : chain.checkpoints) {
    if (j > chain.stages.size()) {
      throw_domain("checkpoint position " + std::to_string(j) +
                   " is past the end of the chain");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

DiscreteChannel::DiscreteChannel(std::size_t inputs, std::size_t outputs,
                                 std::vector<double> row_major)
    : inputs_(inputs), outputs_(outputs), m_(std::move(row_major)) {
  check_alphabet_size(inputs_);
  check_alphabet_size(outputs_);
  if (m_.size() != inputs_ * outputs_) {
    throw_domain("channel matrix size does not match its shape");
  }
  for (std::size_t x = 0; x < inputs_; ++x) {
    double total = 0.0;
    for (std::size_t y = 0; y < outputs_; ++y) {
      const double v = m_[x * outputs_ + y];
      if (!(v >= 0.0 && v <= 1.0)) throw_domain("channel entry outside [0,1]");
      total += v;
    }
    if (std::abs(total - 1.0) > kRowTolerance) {
      throw_domain("channel row " + std::to_string(x) + " is not stochastic");
    }
  }
}

DiscreteChannel DiscreteChannel::from_rows(
    const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw_domain("channel has no rows");
  const std::size_t outputs = rows.front().size();
  std::vector<double> m;
  m.reserve(rows.size() * outputs);
  for (const auto& r : rows) {
    if (r.size() != outputs) throw_domain("ragged channel matrix");
    m.insert(m.end(), r.begin(), r.end());
  }
  return DiscreteChannel(rows.size(), outputs, std::move(m));
}

DiscreteChannel DiscreteChannel::identity(std::size_t m) {
  std::vector<double> d(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) d[i * m + i] = 1.0;
  return DiscreteChannel(m, m, std::move(d));
}

DiscreteChannel symmetric_channel(std::size_t m, double epsilon) {
  if (m < 2) throw_domain("symmetric channel needs M >= 2");
  const double limit = 1.0 - 1.0 / static_cast<double>(m);
  if (!(epsilon >= 0.0 && epsilon <= limit + 1e-15)) {
    throw_domain("symmetric channel needs 0 <= eps <= 1 - 1/M");
  }
  const double off = epsilon / static_cast<double>(m - 1);
  std::vector<double> d(m * m, off);
  for (std::size_t i = 0; i < m; ++i) d[i * m + i] = 1.0 - epsilon;
  return DiscreteChannel(m, m, std::move(d));
}

DiscreteChannel copy_or_noise_as_matrix(const CopyOrNoiseChannel& c,
                                        std::size_t m) {
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) {
    throw_domain("copy probability must lie in [0,1]");
  }
  if (c.noise.size() != m) {
    throw_domain("noise distribution has " + std::to_string(c.noise.size()) +
                 " symbols, channel has " + std::to_string(m));
  }
  check_distribution(c.noise, "noise distribution");
  std::vector<double> d(m * m);
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = 0; y < m; ++y) {
      d[x * m + y] = (1.0 - c.alpha) * c.noise[y] + (x == y ? c.alpha : 0.0);
    }
  }
  return DiscreteChannel(m, m, std::move(d));
}

CopyOrNoiseChannel erasure_copy_or_noise(double alpha, std::size_t m) {
  CopyOrNoiseChannel c{alpha, std::vector<double>(m + 1, 0.0)};
  c.noise[m] = 1.0;
  return c;
}

ChainStage ChainStage::from(const CopyOrNoiseChannel& c, std::size_t m) {
  return ChainStage{copy_or_noise_as_matrix(c, m), c};
}

ChainStage ChainStage::arbitrary(DiscreteChannel k) {
  return ChainStage{std::move(k), std::nullopt};
}

// ---------------------------------------------------------------------------

JointDistribution push_joint(const ChainSpec& chain) {
  validate_chain(chain);
  State state = State::copy_of(chain.prior);
  for (std::size_t j = 0; j < chain.stages.size(); ++j) {
    if (chain.checkpoints.contains(j)) state = State::copy_of(chain.prior);
    state = state.push(chain.stages[j].channel);
  }
  if (chain.checkpoints.contains(chain.stages.size())) {
    state = State::copy_of(chain.prior);
  }
  return state.joint();
}

std::vector<Nats> mi_profile(const ChainSpec& chain) {
  validate_chain(chain);
  std::vector<Nats> profile;
  State state = State::copy_of(chain.prior);
  profile.push_back(mutual_information(state.joint()));
  for (std::size_t j = 0; j < chain.stages.size(); ++j) {
    if (chain.checkpoints.contains(j)) state = State::copy_of(chain.prior);
    state = state.push(chain.stages[j].channel);
    profile.push_back(mutual_information(state.joint()));
  }
  if (chain.checkpoints.contains(chain.stages.size())) {
    profile.back() = mutual_information(State::copy_of(chain.prior).joint());
  }
  return profile;
}

ContractionReport verify_sdpi_contraction(const ChainSpec& chain,
                                          double tolerance) {
  validate_chain(chain);
  ContractionReport r;
  const std::size_t n = chain.stages.size();
  r.suffix_start = chain.checkpoints.empty() ? 0 : *chain.checkpoints.rbegin();

  State state = State::copy_of(chain.prior);
  r.profile.push_back(mutual_information(state.joint()));
  r.sdpi_mode = true;
  r.equality_expected = true;
  r.dpi_monotone = true;
  for (std::size_t j = 0; j < n; ++j) {
    const bool reset = chain.checkpoints.contains(j);
    if (reset) state = State::copy_of(chain.prior);
    const ChainStage& stage = chain.stages[j];
    if (j >= r.suffix_start) {
      if (stage.copy_or_noise) {
        r.alpha_product *= stage.copy_or_noise->alpha;
        const double a = stage.copy_or_noise->alpha;
        if (a != 0.0 && a != 1.0 &&
            !state.noise_support_uninformative(stage.copy_or_noise->noise,
                                               chain.prior)) {
          r.equality_expected = false;
        }
      } else {
        r.sdpi_mode = false;
        r.equality_expected = false;
      }
    }
    const Nats before = reset ? mutual_information(state.joint()) : r.profile.back();
    state = state.push(stage.channel);
    r.profile.push_back(mutual_information(state.joint()));
    if (r.profile.back().value() > before.value() + tolerance) r.dpi_monotone = false;
  }
  if (chain.checkpoints.contains(n)) {
    r.profile.back() = mutual_information(State::copy_of(chain.prior).joint());
  }

  r.initial_mi = mutual_information(State::copy_of(chain.prior).joint());
  r.final_mi = r.profile.back();
  std::ostringstream detail;
  if (r.sdpi_mode) {
    const double bound = r.alpha_product * r.initial_mi.value();
    r.bound_holds = r.final_mi.value() <= bound + tolerance;
    r.equality_holds = std::abs(r.final_mi.value() - bound) <= 1e-9;
    detail << "SDPI: I_final=" << r.final_mi.value() << " <= prod(alpha)*I_0="
           << bound;
  } else {
    r.bound_holds = r.final_mi.value() <= r.initial_mi.value() + tolerance;
    r.equality_holds = false;
    detail << "DPI (non copy-or-noise stage present): I_final="
           << r.final_mi.value() << " <= I_0=" << r.initial_mi.value();
  }
  r.detail = detail.str();
  return r;
}

}  // namespace routing_audit
