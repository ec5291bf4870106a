#pragma once

#include <string>
#include <vector>

namespace kft::eval {

struct StructuredDraft {
  std::string title;
  std::string abstract_text;
  std::string claims_text;  // numbered "1. ..." items
};

struct ReasonabilityVerdict {
  bool win = false;
  std::vector<std::string> failed_checks;
};

// Splits numbered claims ("1. ...", "2) ...") into (number, text) items.
std::vector<std::pair<int, std::string>> parse_claims(const std::string& claims_text);

// Rule ids: title-nonempty, title-length, abstract-length, has-claims,
// consecutive-numbering, independent-claim, dangling-reference.
ReasonabilityVerdict reasonability_check(const StructuredDraft& draft);

}  // namespace kft::eval
