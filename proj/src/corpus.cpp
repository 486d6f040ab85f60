// SPDX-License-Identifier: Apache-2.0
#include "ger/corpus.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "ger/errors.hpp"

namespace ger {

Vocab::Vocab(std::vector<std::string> tokens) {
  for (auto& t : tokens) add(t);
}

TokenId Vocab::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, static_cast<TokenId>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

TokenId Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) throw InvalidInput("unknown token '" + token + "'");
  return it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) throw InvalidInput("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

TargetVocab TargetVocab::from_words(const std::vector<std::string>& words) {
  TargetVocab v;
  v.table.add(std::string(kEosToken));
  for (const auto& w : words) {
    if (w == kEosToken || w == kBosToken) throw InvalidInput("reserved token '" + w + "' in target words");
    v.table.add(w);
  }
  v.table.add(std::string(kBosToken));
  return v;
}

std::size_t Corpus::token_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.steps();
  return n;
}

void Corpus::add_pair(std::vector<TokenId> source, std::span<const TokenId> body) {
  for (TokenId s : source) {
    if (s >= source_vocab.size()) throw InvalidInput("source id " + std::to_string(s) + " out of range");
  }
  SeqPair pair;
  pair.source = std::move(source);
  pair.target.reserve(body.size() + 2);
  pair.target.push_back(bos());
  for (TokenId t : body) {
    if (t == kEosId || t >= vocab_size()) {
      throw InvalidInput("target body id " + std::to_string(t) + " is not a word id");
    }
    pair.target.push_back(t);
  }
  pair.target.push_back(kEosId);
  pairs.push_back(std::move(pair));
}

void Corpus::validate() const {
  if (pairs.empty()) throw InvalidInput("corpus is empty");
  if (target_vocab.table.size() < 3) throw InvalidInput("target vocabulary needs at least one word");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.target.size() < 2 || p.target.front() != bos() || p.target.back() != kEosId) {
      throw InvalidInput("pair " + std::to_string(i) + " is not framed BOS ... EOS");
    }
    for (std::size_t t = 1; t < p.target.size(); ++t) {
      if (p.target[t] >= vocab_size()) throw InvalidInput("pair " + std::to_string(i) + " has an out-of-range id");
    }
    for (TokenId s : p.source) {
      if (s >= source_vocab.size()) throw InvalidInput("pair " + std::to_string(i) + " has an out-of-range source id");
    }
  }
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

Corpus read_corpus(std::istream& in, const Vocab* source_vocab, const TargetVocab* target_vocab) {
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError("corpus line " + std::to_string(lineno) + ": expected 'source<TAB>target'");
    }
    raw.emplace_back(split_whitespace(std::string_view(line).substr(0, tab)),
                     split_whitespace(std::string_view(line).substr(tab + 1)));
  }

  Corpus c;
  if (source_vocab != nullptr) {
    c.source_vocab = *source_vocab;
  } else {
    for (const auto& [src, tgt] : raw) {
      for (const auto& t : src) c.source_vocab.add(t);
    }
  }
  if (target_vocab != nullptr) {
    c.target_vocab = *target_vocab;
  } else {
    std::vector<std::string> words;
    Vocab seen;
    for (const auto& [src, tgt] : raw) {
      for (const auto& t : tgt) {
        if (!seen.contains(t)) {
          seen.add(t);
          words.push_back(t);
        }
      }
    }
    c.target_vocab = TargetVocab::from_words(words);
  }

  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::vector<TokenId> src;
    std::vector<TokenId> body;
    try {
      for (const auto& t : raw[i].first) src.push_back(c.source_vocab.id(t));
      for (const auto& t : raw[i].second) body.push_back(c.target_vocab.table.id(t));
    } catch (const InvalidInput& e) {
      throw InvalidInput("corpus pair " + std::to_string(i + 1) + ": " + e.what());
    }
    c.add_pair(std::move(src), body);
  }
  return c;
}

Corpus read_corpus_file(const std::filesystem::path& path, const Vocab* source_vocab,
                        const TargetVocab* target_vocab) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open corpus file '" + path.string() + "'");
  return read_corpus(in, source_vocab, target_vocab);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& p : corpus.pairs) {
    for (std::size_t i = 0; i < p.source.size(); ++i) {
      if (i) out << ' ';
      out << corpus.source_vocab.token(p.source[i]);
    }
    out << '\t';
    const auto body = p.body();
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (i) out << ' ';
      out << corpus.target_vocab.table.token(body[i]);
    }
    out << '\n';
  }
}

TaskSplits make_reversal_task(const ReversalTaskSpec& spec) {
  if (spec.alphabet < 2 || spec.min_len < 1 || spec.max_len < spec.min_len) {
    throw InvalidInput("reversal task: need alphabet >= 2 and 1 <= min_len <= max_len");
  }
  std::vector<std::string> words;
  for (std::size_t i = 0; i < spec.alphabet; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "w%02zu", i);
    words.emplace_back(buf);
  }
  const Vocab source_vocab(words);
  const TargetVocab target_vocab = TargetVocab::from_words(words);

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> len_dist(spec.min_len, spec.max_len);
  std::uniform_int_distribution<std::size_t> sym_dist(0, spec.alphabet - 1);

  auto fill = [&](Corpus& c, std::size_t n) {
    c.source_vocab = source_vocab;
    c.target_vocab = target_vocab;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t len = len_dist(rng);
      std::vector<TokenId> src(len);
      for (auto& s : src) s = static_cast<TokenId>(sym_dist(rng));
      std::vector<TokenId> body(src.rbegin(), src.rend());
      // Source word i is target word i + 1 (target id 0 is EOS).
      for (auto& t : body) t += 1;
      c.add_pair(std::move(src), body);
    }
  };

  TaskSplits s;
  fill(s.train, spec.n_train);
  fill(s.dev, spec.n_dev);
  fill(s.test, spec.n_test);
  return s;
}

}  // namespace ger
