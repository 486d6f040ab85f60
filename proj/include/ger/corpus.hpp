// SPDX-License-Identifier: Apache-2.0
#pragma once

// Token tables, framed sequence pairs and the "source<TAB>target" corpus format.
//
// Target ids: 0 is EOS, 1..|Y| are words, and BOS is the reserved id |Y| + 1
// (== vocab_size). BOS is an input-only symbol and never appears in a softmax,
// so every predicted id is < vocab_size.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ger {

using TokenId = std::uint32_t;

inline constexpr TokenId kEosId = 0;
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kBosToken = "<s>";

class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens);

  TokenId add(const std::string& token);
  /// Throws InvalidInput for tokens not in the table.
  TokenId id(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(TokenId id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Target vocabulary: EOS first, words in order, BOS last.
struct TargetVocab {
  Vocab table;

  static TargetVocab from_words(const std::vector<std::string>& words);
  /// |Y| + 1: the softmax dimension (words plus EOS).
  std::size_t output_size() const noexcept { return table.size() - 1; }
  TokenId bos() const noexcept { return static_cast<TokenId>(table.size() - 1); }
};

struct SeqPair {
  std::vector<TokenId> source;
  /// BOS, body, EOS.
  std::vector<TokenId> target;

  std::size_t steps() const noexcept { return target.size() - 1; }
  std::span<const TokenId> body() const noexcept { return std::span(target).subspan(1, target.size() - 2); }
};

struct Corpus {
  std::vector<SeqPair> pairs;
  Vocab source_vocab;
  TargetVocab target_vocab;

  std::size_t vocab_size() const noexcept { return target_vocab.output_size(); }
  TokenId bos() const noexcept { return target_vocab.bos(); }
  /// Number of predicted positions (body tokens plus one EOS per pair).
  std::size_t token_count() const noexcept;

  /// Frames BOS body EOS and checks ids. Throws InvalidInput.
  void add_pair(std::vector<TokenId> source, std::span<const TokenId> body);
  void validate() const;
};

/// Reads "source<TAB>target" lines. With no vocabularies given, they are built
/// from the file in first-seen order; otherwise unknown tokens are an error.
Corpus read_corpus(std::istream& in, const Vocab* source_vocab = nullptr,
                   const TargetVocab* target_vocab = nullptr);
Corpus read_corpus_file(const std::filesystem::path& path, const Vocab* source_vocab = nullptr,
                        const TargetVocab* target_vocab = nullptr);
void write_corpus(std::ostream& out, const Corpus& corpus);

std::vector<std::string> split_whitespace(std::string_view line);

struct ReversalTaskSpec {
  std::uint64_t seed = 7;
  std::size_t alphabet = 30;
  std::size_t n_train = 2000;
  std::size_t n_dev = 200;
  std::size_t n_test = 200;
  std::size_t min_len = 3;
  std::size_t max_len = 10;
};

struct TaskSplits {
  Corpus train;
  Corpus dev;
  Corpus test;
};

/// Synthetic sequence reversal over a fixed alphabet, deterministic in spec.seed.
TaskSplits make_reversal_task(const ReversalTaskSpec& spec);

}  // namespace ger
