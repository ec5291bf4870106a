#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kft {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Collapse runs of whitespace to single spaces and trim both ends. This is
// the canonical normalization applied before encoding.
std::string normalize_ws(std::string_view s);

// Split on whitespace runs.
std::vector<std::string> split_ws(std::string_view s);

// Split into sentences at ./!/? boundaries; the terminator stays attached.
std::vector<std::string> split_sentences(std::string_view s);

bool is_word_char(unsigned char c);

// Number of whitespace-separated words.
size_t word_count(std::string_view s);

}  // namespace kft
