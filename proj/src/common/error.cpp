#include "kft/common/error.hpp"

namespace kft {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::Io: return "Io";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::InvalidIpc: return "InvalidIpc";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::InsufficientDocs: return "InsufficientDocs";
    case Errc::MalformedTriple: return "MalformedTriple";
    case Errc::UnknownRelation: return "UnknownRelation";
    case Errc::StrengthOutOfRange: return "StrengthOutOfRange";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::SequenceTooLong: return "SequenceTooLong";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::RankTooLarge: return "RankTooLarge";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::DivergedLoss: return "DivergedLoss";
    case Errc::AllPairsTooLong: return "AllPairsTooLong";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::EmptyQueries: return "EmptyQueries";
    case Errc::StageOrderInvalid: return "StageOrderInvalid";
    case Errc::ReferenceTooShort: return "ReferenceTooShort";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyGraph: return "EmptyGraph";
    case Errc::ChoiceTooLong: return "ChoiceTooLong";
    case Errc::MissingStage: return "MissingStage";
    case Errc::UnknownCommand: return "UnknownCommand";
  }
  return "Unknown";
}

namespace {
std::string format_message(Errc code, const std::string& message, long line) {
  std::string out = errc_name(code);
  out += ": ";
  out += message;
  if (line >= 0) {
    out += " (line ";
    out += std::to_string(line);
    out += ")";
  }
  return out;
}
}  // namespace

KftError::KftError(Errc code, const std::string& message, long line)
    : std::runtime_error(format_message(code, message, line)), code_(code), line_(line) {}

void fail(Errc code, const std::string& message, long line) {
  throw KftError(code, message, line);
}

}  // namespace kft
