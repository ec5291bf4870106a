#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace kft::corpus {
struct PatentDoc;
}

namespace kft::corpus {

struct TokenSeq {
  std::vector<int> ids;
  int source_len_chars = 0;
};

// Word-level vocabulary with byte fallback.
//
// Id layout:
//   0..3    PAD, BOS, EOS, SEP (fixed)
//   4       GLUE — marks that the next piece was not preceded by whitespace
//   5..260  byte fallback tokens, one per byte value
//   261..   word/punctuation entries, ranked by descending frequency with
//           lexicographic tie-break; the configured cap bounds only these.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;
  static constexpr int kGlue = 4;
  static constexpr int kByteBase = 5;
  static constexpr int kWordBase = kByteBase + 256;

  Vocab() = default;
  explicit Vocab(std::vector<std::string> words);

  int size() const { return kWordBase + static_cast<int>(words_.size()); }
  int word_count() const { return static_cast<int>(words_.size()); }

  // -1 when the token has no word-level entry.
  int word_id(const std::string& token) const;
  const std::string& word_at(int id) const;  // id must be >= kWordBase
  const std::vector<std::string>& words() const { return words_; }

  static bool is_byte(int id) { return id >= kByteBase && id < kWordBase; }
  static char byte_of(int id) { return static_cast<char>(id - kByteBase); }

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> word_to_id_;
};

// Splits normalized text into word-character runs and single punctuation
// characters; whitespace is dropped. This is the unit stream that vocabulary
// counting, encoding, and the evaluation metrics all share.
std::vector<std::string> word_tokenize(const std::string& text);

// Ranked vocabulary over arbitrary texts; cap bounds the word entries.
Vocab build_vocab_from_texts(const std::vector<std::string>& texts, int cap);

// Vocabulary over a patent corpus (titles, abstracts, claims). cap >= 16.
Vocab build_vocab(const std::vector<PatentDoc>& docs, int cap);

TokenSeq encode(const std::string& text, const Vocab& vocab);
std::string decode(const TokenSeq& seq, const Vocab& vocab);

}  // namespace kft::corpus
