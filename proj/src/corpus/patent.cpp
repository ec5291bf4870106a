#include "kft/corpus/patent.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "kft/common/error.hpp"
#include "kft/common/text.hpp"

namespace kft::corpus {

using nlohmann::json;

IpcSection ipc_from_char(char c) {
  if (c < 'A' || c > 'H') {
    fail(Errc::InvalidIpc, std::string("IPC section must be A..H, got '") + c + "'");
  }
  return static_cast<IpcSection>(c);
}

char ipc_to_char(IpcSection s) { return static_cast<char>(s); }

std::string PatentDoc::numbered_claims() const {
  std::string out;
  for (size_t i = 0; i < claims.size(); ++i) {
    if (i > 0) out += '\n';
    out += std::to_string(i + 1);
    out += ". ";
    out += claims[i];
  }
  return out;
}

void validate_doc(const PatentDoc& doc, long line) {
  if (doc.id.empty()) fail(Errc::MalformedRecord, "doc id is empty", line);
  if (trim(doc.title).empty()) fail(Errc::MalformedRecord, "doc title is empty", line);
  for (const auto& c : doc.claims) {
    if (trim(c).empty()) fail(Errc::MalformedRecord, "empty claim string in doc " + doc.id, line);
  }
}

namespace {

PatentDoc parse_record(const json& j, long line) {
  if (!j.is_object()) fail(Errc::MalformedRecord, "record is not a JSON object", line);
  static const std::vector<std::string> known = {"id", "ipc", "title", "abstract", "claims"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : known) ok = ok || (it.key() == k);
    if (!ok) fail(Errc::MalformedRecord, "unknown key '" + it.key() + "'", line);
  }
  for (const auto& k : known) {
    if (!j.contains(k)) fail(Errc::MalformedRecord, "missing key '" + k + "'", line);
  }
  if (!j["id"].is_string() || !j["ipc"].is_string() || !j["title"].is_string() ||
      !j["abstract"].is_string() || !j["claims"].is_array()) {
    fail(Errc::MalformedRecord, "field has wrong JSON type", line);
  }

  PatentDoc doc;
  doc.id = j["id"].get<std::string>();
  const std::string ipc = j["ipc"].get<std::string>();
  if (ipc.size() != 1 || ipc[0] < 'A' || ipc[0] > 'H') {
    fail(Errc::InvalidIpc, "ipc must be a single letter A..H, got \"" + ipc + "\"", line);
  }
  doc.ipc = ipc_from_char(ipc[0]);
  doc.title = j["title"].get<std::string>();
  doc.abstract_text = j["abstract"].get<std::string>();
  for (const auto& c : j["claims"]) {
    if (!c.is_string()) fail(Errc::MalformedRecord, "claims entries must be strings", line);
    doc.claims.push_back(c.get<std::string>());
  }
  validate_doc(doc, line);
  return doc;
}

}  // namespace

std::vector<PatentDoc> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open corpus file: " + path.string());

  std::vector<PatentDoc> docs;
  std::string linebuf;
  long line_no = 0;
  while (std::getline(in, linebuf)) {
    ++line_no;
    if (trim(linebuf).empty()) continue;
    json j = json::parse(linebuf, nullptr, false);
    if (j.is_discarded()) fail(Errc::MalformedRecord, "invalid JSON", line_no);
    docs.push_back(parse_record(j, line_no));
  }
  return docs;
}

void save_corpus(const std::vector<PatentDoc>& docs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot open corpus file for writing: " + path.string());
  for (const auto& d : docs) {
    json j;
    j["id"] = d.id;
    j["ipc"] = std::string(1, ipc_to_char(d.ipc));
    j["title"] = d.title;
    j["abstract"] = d.abstract_text;
    j["claims"] = d.claims;
    out << j.dump() << '\n';
  }
}

}  // namespace kft::corpus
