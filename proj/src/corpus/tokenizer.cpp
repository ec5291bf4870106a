#include "kft/corpus/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "kft/common/error.hpp"
#include "kft/common/text.hpp"
#include "kft/corpus/patent.hpp"

namespace kft::corpus {

using nlohmann::json;

Vocab::Vocab(std::vector<std::string> words) : words_(std::move(words)) {
  word_to_id_.reserve(words_.size());
  for (int i = 0; i < static_cast<int>(words_.size()); ++i) {
    word_to_id_.emplace(words_[i], kWordBase + i);
  }
}

int Vocab::word_id(const std::string& token) const {
  auto it = word_to_id_.find(token);
  return it == word_to_id_.end() ? -1 : it->second;
}

const std::string& Vocab::word_at(int id) const {
  return words_.at(static_cast<size_t>(id - kWordBase));
}

void Vocab::save(const std::filesystem::path& path) const {
  json j;
  j["format"] = "kft-vocab-v1";
  j["words"] = words_;
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot open vocab file for writing: " + path.string());
  out << j.dump(2) << "\n";
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open vocab file: " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("words") ||
      !j["words"].is_array()) {
    fail(Errc::MalformedRecord, "vocab file is not valid: " + path.string());
  }
  std::vector<std::string> words;
  for (const auto& w : j["words"]) {
    if (!w.is_string()) fail(Errc::MalformedRecord, "vocab entry is not a string");
    words.push_back(w.get<std::string>());
  }
  return Vocab(std::move(words));
}

std::vector<std::string> word_tokenize(const std::string& text) {
  std::vector<std::string> out;
  const std::string norm = normalize_ws(text);
  size_t i = 0;
  while (i < norm.size()) {
    char c = norm[i];
    if (c == ' ') {
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      size_t j = i;
      while (j < norm.size() && is_word_char(norm[j])) ++j;
      out.push_back(norm.substr(i, j - i));
      i = j;
    } else {
      out.push_back(std::string(1, c));
      ++i;
    }
  }
  return out;
}

Vocab build_vocab_from_texts(const std::vector<std::string>& texts, int cap) {
  if (cap < 16) fail(Errc::ConfigInvalid, "vocab cap must be at least 16");
  std::map<std::string, long long> freq;
  for (const auto& t : texts) {
    for (auto& tok : word_tokenize(t)) ++freq[tok];
  }
  if (freq.empty()) fail(Errc::EmptyCorpus, "no tokens available to build a vocabulary");
  std::vector<std::pair<std::string, long long>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(ranked.size()) > cap) ranked.resize(static_cast<size_t>(cap));
  std::vector<std::string> words;
  words.reserve(ranked.size());
  for (auto& [w, n] : ranked) words.push_back(w);
  return Vocab(std::move(words));
}

Vocab build_vocab(const std::vector<PatentDoc>& docs, int cap) {
  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& d : docs) {
    std::string t = d.title;
    t += "\n";
    t += d.abstract_text;
    t += "\n";
    t += d.numbered_claims();
    texts.push_back(std::move(t));
  }
  if (texts.empty()) fail(Errc::EmptyCorpus, "cannot build a vocabulary from an empty corpus");
  return build_vocab_from_texts(texts, cap);
}

namespace {

// Emits one subtoken, falling back to glued byte tokens when it has no
// word-level entry.
void emit_subtoken(const std::string& tok, const Vocab& vocab,
                   std::vector<int>& ids) {
  int id = vocab.word_id(tok);
  if (id >= 0) {
    ids.push_back(id);
    return;
  }
  for (size_t k = 0; k < tok.size(); ++k) {
    if (k > 0) ids.push_back(Vocab::kGlue);
    ids.push_back(Vocab::kByteBase + static_cast<unsigned char>(tok[k]));
  }
}

}  // namespace

TokenSeq encode(const std::string& text, const Vocab& vocab) {
  TokenSeq seq;
  const std::string norm = normalize_ws(text);
  seq.source_len_chars = static_cast<int>(norm.size());
  size_t i = 0;
  while (i < norm.size()) {
    if (norm[i] == ' ') {
      ++i;
      continue;
    }
    // One whitespace-delimited chunk; subtokens inside it are glued.
    size_t end = norm.find(' ', i);
    if (end == std::string::npos) end = norm.size();
    bool first_sub = true;
    size_t j = i;
    while (j < end) {
      size_t k = j;
      if (is_word_char(norm[j])) {
        while (k < end && is_word_char(norm[k])) ++k;
      } else {
        k = j + 1;
      }
      if (!first_sub) seq.ids.push_back(Vocab::kGlue);
      emit_subtoken(norm.substr(j, k - j), vocab, seq.ids);
      first_sub = false;
      j = k;
    }
    i = end;
  }
  return seq;
}

std::string decode(const TokenSeq& seq, const Vocab& vocab) {
  std::string out;
  bool glue_pending = false;
  bool any = false;
  for (int id : seq.ids) {
    if (id == Vocab::kGlue) {
      glue_pending = true;
      continue;
    }
    if (id >= 0 && id < Vocab::kGlue) continue;  // PAD/BOS/EOS/SEP
    std::string piece;
    if (Vocab::is_byte(id)) {
      piece = std::string(1, Vocab::byte_of(id));
    } else if (id >= Vocab::kWordBase && id < vocab.size()) {
      piece = vocab.word_at(id);
    } else {
      fail(Errc::MalformedRecord, "token id out of range: " + std::to_string(id));
    }
    if (any && !glue_pending) out += ' ';
    out += piece;
    glue_pending = false;
    any = true;
  }
  return out;
}

}  // namespace kft::corpus
