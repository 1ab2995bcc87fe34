// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "routing_audit/stage_metrics.hpp"

namespace routing_audit {

/// Bundled token inventory with stable ids.
///
/// Ids are positions in a fixed table, so they never depend on a seed.
/// The default tokenization convention is whitespace-delimited words, with
/// '[' split off the front of a word and ']' / '?' split off the back.
class Vocabulary {
 public:
  static const Vocabulary& standard();

  std::optional<TokenId> find(std::string_view text) const;
  /// Throws Error(kDomain) for unknown tokens.
  TokenId id(std::string_view text) const;
  const std::string& text(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

  /// Short English words eligible as candidate values.
  std::span<const TokenId> candidate_words() const { return candidate_words_; }
  /// Words used by RANDOM filler, never candidates.
  std::span<const TokenId> filler_words() const { return filler_words_; }
  /// The bundled COHERENT paragraph.
  std::span<const TokenId> paragraph() const { return paragraph_; }

  /// Id for a token outside the bundled table (e.g. from an HTTP
  /// response). Stable hash placed above the bundled id range.
  static TokenId external_id(std::string_view text);
  /// Bundled id when known, external id otherwise.
  TokenId lookup_or_external(std::string_view text) const;

 private:
  Vocabulary();
  TokenId add(std::string_view text);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<TokenId> candidate_words_;
  std::vector<TokenId> filler_words_;
  std::vector<TokenId> paragraph_;
};

/// Split rendered text into token strings.
std::vector<std::string> tokenize(std::string_view rendered);

/// Inverse of tokenize() for token sequences it produced.
std::string detokenize(std::span<const std::string> tokens);

}  // namespace routing_audit
