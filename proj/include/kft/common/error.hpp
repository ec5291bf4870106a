#pragma once

#include <stdexcept>
#include <string>

namespace kft {

// Error categories surfaced by the library. The CLI maps these to exit codes.
enum class Errc {
  Io,
  MalformedRecord,
  InvalidIpc,
  EmptyCorpus,
  InsufficientDocs,
  MalformedTriple,
  UnknownRelation,
  StrengthOutOfRange,
  ConfigInvalid,
  SequenceTooLong,
  EmptyMask,
  RankTooLarge,
  ChecksumMismatch,
  VersionMismatch,
  DivergedLoss,
  AllPairsTooLong,
  EmptyDataset,
  EmptyQueries,
  StageOrderInvalid,
  ReferenceTooShort,
  EmptyInput,
  EmptyGraph,
  ChoiceTooLong,
  MissingStage,
  UnknownCommand,
};

const char* errc_name(Errc c);

class KftError : public std::runtime_error {
 public:
  KftError(Errc code, const std::string& message, long line = -1);

  Errc code() const noexcept { return code_; }
  // 1-based input line for record-level errors, -1 when not applicable.
  long line() const noexcept { return line_; }

 private:
  Errc code_;
  long line_;
};

[[noreturn]] void fail(Errc code, const std::string& message, long line = -1);

}  // namespace kft
