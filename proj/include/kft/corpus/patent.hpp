#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace kft::corpus {

// Top-level International Patent Classification section, A through H.
enum class IpcSection : char {
  A = 'A',
  B = 'B',
  C = 'C',
  D = 'D',
  E = 'E',
  F = 'F',
  G = 'G',
  H = 'H',
};

IpcSection ipc_from_char(char c);            // throws InvalidIpc
char ipc_to_char(IpcSection s);

struct PatentDoc {
  std::string id;
  IpcSection ipc = IpcSection::A;
  std::string title;                         // non-empty after trimming
  std::string abstract_text;
  std::vector<std::string> claims;           // may be empty; entries non-empty

  // "1. <claim>\n2. <claim>..." or "" when there are no claims.
  std::string numbered_claims() const;
};

void validate_doc(const PatentDoc& doc, long line = -1);

// Reads UTF-8 JSON-Lines, one {"id","ipc","title","abstract","claims"} object
// per non-blank line. Unknown keys are rejected.
std::vector<PatentDoc> load_corpus(const std::filesystem::path& path);

void save_corpus(const std::vector<PatentDoc>& docs, const std::filesystem::path& path);

}  // namespace kft::corpus
