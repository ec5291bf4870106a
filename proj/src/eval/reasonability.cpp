#include "kft/eval/reasonability.hpp"

#include <regex>
#include <sstream>

#include "kft/common/text.hpp"

namespace kft::eval {

std::vector<std::pair<int, std::string>> parse_claims(const std::string& claims_text) {
  static const std::regex kClaimStart(R"(^\s*(\d+)[.)]\s*)");
  std::vector<std::pair<int, std::string>> claims;
  std::istringstream in(claims_text);
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_search(line, m, kClaimStart)) {
      claims.emplace_back(std::stoi(m[1].str()), trim(m.suffix().str()));
    } else if (!claims.empty()) {
      std::string cont = trim(line);
      if (!cont.empty()) {
        claims.back().second += " ";
        claims.back().second += cont;
      }
    }
  }
  return claims;
}

namespace {

std::vector<int> claim_references(const std::string& claim_text) {
  static const std::regex kRef(R"([Cc]laims?\s+(\d+))");
  std::vector<int> refs;
  auto begin = std::sregex_iterator(claim_text.begin(), claim_text.end(), kRef);
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    refs.push_back(std::stoi((*it)[1].str()));
  }
  return refs;
}

}  // namespace

ReasonabilityVerdict reasonability_check(const StructuredDraft& draft) {
  ReasonabilityVerdict verdict;
  auto flag = [&](const std::string& rule) { verdict.failed_checks.push_back(rule); };

  if (trim(draft.title).empty()) {
    flag("title-nonempty");
  } else if (word_count(draft.title) > 30) {
    flag("title-length");
  }

  int abs_words = word_count(draft.abstract_text);
  if (abs_words < 50 || abs_words > 250) flag("abstract-length");

  auto claims = parse_claims(draft.claims_text);
  if (claims.empty()) {
    flag("has-claims");
  } else {
    bool consecutive = true;
    for (size_t i = 0; i < claims.size(); ++i) {
      if (claims[i].first != static_cast<int>(i) + 1) consecutive = false;
    }
    if (!consecutive) flag("consecutive-numbering");

    bool any_independent = false;
    bool dangling = false;
    for (const auto& [num, text] : claims) {
      auto refs = claim_references(text);
      if (refs.empty()) any_independent = true;
      for (int ref : refs) {
        bool exists = false;
        for (const auto& [other_num, unused] : claims) {
          if (other_num == ref) exists = true;
        }
        if (!exists || ref >= num) dangling = true;
      }
    }
    if (!any_independent) flag("independent-claim");
    if (dangling) flag("dangling-reference");
  }

  verdict.win = verdict.failed_checks.empty();
  return verdict;
}

}  // namespace kft::eval
