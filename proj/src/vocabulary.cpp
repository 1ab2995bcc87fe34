// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include "routing_audit/vocabulary.hpp"

#include <array>

#include "routing_audit/error.hpp"
#include "routing_audit/rng.hpp"

namespace routing_audit {

namespace {

// Template and control tokens. Order is part of the id contract.
constexpr std::array kStructural = {
    "KEY",  "KEY1", "KEY2",  "=",     "[",    "]",     "What",  "is",
    "was",  "the",  "FIRST", "value", "of",   "?",     "CHECKPOINT:",
    "REDACTED", "MASK", "NOTE", "noted", ".",  ",",
};

// Short single-token English words: fruits, Greek letters, colors, animals,
// weather and plants.
constexpr std::array kCandidateWords = {
    "apple",  "banana", "cherry", "grape",   "lemon",   "mango",  "melon",
    "peach",  "pear",   "plum",   "kiwi",    "lime",    "fig",    "date",
    "guava",  "papaya", "olive",  "berry",   "apricot", "coconut",
    "alpha",  "beta",   "gamma",  "delta",   "epsilon", "zeta",   "eta",
    "theta",  "iota",   "kappa",  "lambda",  "mu",      "nu",     "xi",
    "omicron","pi",     "rho",    "sigma",   "tau",     "upsilon","phi",
    "chi",    "psi",    "omega",
    "red",    "blue",   "green",  "yellow",  "orange",  "purple", "pink",
    "brown",  "black",  "white",  "gray",    "cyan",    "magenta","violet",
    "indigo", "teal",   "gold",   "silver",
    "cat",    "dog",    "fox",    "wolf",    "bear",    "lion",   "tiger",
    "horse",  "mouse",  "owl",    "hawk",    "eagle",   "shark",  "whale",
    "seal",   "frog",   "toad",   "duck",    "goose",   "crow",
    "stone",  "river",  "cloud",  "storm",   "snow",    "rain",   "wind",
    "fire",   "ice",    "sand",   "rock",    "tree",    "leaf",   "rose",
    "lily",   "oak",    "pine",   "maple",   "cedar",   "moss",
};

// Function words for RANDOM filler; disjoint from the candidate list.
constexpr std::array kFillerWords = {
    "and",   "to",    "in",    "a",     "that",  "it",    "for",   "on",
    "are",   "with",  "as",    "at",    "be",    "this",  "from",  "by",
    "or",    "had",   "not",   "but",   "some",  "which", "their", "there",
    "about", "would", "these", "other", "into",  "more",  "only",  "then",
    "than",  "over",  "also",  "after", "most",  "where", "while", "under",
};

constexpr std::string_view kParagraph =
    "The committee met early in the morning to review the quarterly notes . "
    "Several members raised questions about the schedule , and the chair "
    "promised a written answer before the next meeting . Nobody objected , "
    "so the discussion moved on to routine matters and the room slowly "
    "emptied .";

constexpr TokenId kExternalBase = TokenId{1} << 40;

}  // namespace

Vocabulary::Vocabulary() {
  for (const char* t : kStructural) add(t);
  for (const char* t : kCandidateWords) candidate_words_.push_back(add(t));
  for (const char* t : kFillerWords) filler_words_.push_back(add(t));
  for (const auto& t : tokenize(kParagraph)) {
    const auto known = find(t);
    paragraph_.push_back(known ? *known : add(t));
  }
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab;
  return vocab;
}

TokenId Vocabulary::add(std::string_view text) {
  const std::string key(text);
  if (index_.contains(key)) {
    throw Error(ErrorKind::kInvariant, "duplicate vocabulary token '" + key + "'");
  }
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(key);
  index_.emplace(key, id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view text) const {
  const auto it = index_.find(std::string(text));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view text) const {
  const auto found = find(text);
  if (!found) throw_domain("unknown token '" + std::string(text) + "'");
  return *found;
}

const std::string& Vocabulary::text(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw_domain("token id " + std::to_string(id) + " is not in the vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::external_id(std::string_view text) {
  return kExternalBase + static_cast<TokenId>(Rng::hash(text) & (kExternalBase - 1));
}

TokenId Vocabulary::lookup_or_external(std::string_view text) const {
  const auto found = find(text);
  return found ? *found : external_id(text);
}

std::vector<std::string> tokenize(std::string_view rendered) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const auto is_space = [](char c) {
    return c == ' ' || c == '\n' || c == '\t' || c == '\r';
  };
  while (i < rendered.size()) {
    while (i < rendered.size() && is_space(rendered[i])) ++i;
    std::size_t j = i;
    while (j < rendered.size() && !is_space(rendered[j])) ++j;
    std::string_view word = rendered.substr(i, j - i);
    i = j;
    while (!word.empty() && word.front() == '[') {
      out.emplace_back("[");
      word.remove_prefix(1);
    }
    std::vector<std::string> tail;
    while (!word.empty() && (word.back() == ']' || word.back() == '?')) {
      tail.emplace_back(1, word.back());
      word.remove_suffix(1);
    }
    if (!word.empty()) out.emplace_back(word);
    out.insert(out.end(), tail.rbegin(), tail.rend());
  }
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  bool glue_next = true;
  for (const auto& t : tokens) {
    const bool glue_prev = t == "]" || t == "?";
    if (!glue_next && !glue_prev) out.push_back(' ');
    out += t;
    glue_next = t == "[";
  }
  return out;
}

}  // namespace routing_audit
