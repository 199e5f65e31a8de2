#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mulr::text {

// Splits on ASCII whitespace; empty tokens are dropped.
std::vector<std::string> split_whitespace(std::string_view s);

// Splits on a single delimiter character, keeping empty fields.
std::vector<std::string> split(std::string_view s, char delim);

std::string trim(std::string_view s);

// ASCII case folding; non-ASCII bytes are left untouched.
std::string to_lower(std::string_view s);

// Corpus tokenization: whitespace, then trailing punctuation is split off
// into separate one-character tokens ("Paris." -> "Paris", ".").
std::vector<std::string> tokenize(std::string_view s);

// Decodes UTF-8 into a sequence of code point strings. Invalid bytes are
// kept as single-byte units.
std::vector<std::string> utf8_chars(std::string_view s);

bool is_ascii_punct(char c);

}  // namespace mulr::text
