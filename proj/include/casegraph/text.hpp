#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace casegraph::text {

// Decodes UTF-8 into Unicode scalar values. Throws Error(parse_error) on
// malformed input, overlong forms, surrogates or values above U+10FFFF.
std::u32string decode_utf8(std::string_view utf8);
std::string encode_utf8(std::u32string_view scalars);
bool is_valid_utf8(std::string_view utf8);

// Number of Unicode scalar values in a valid UTF-8 string.
std::size_t scalar_length(std::string_view utf8);

// NFC, then full case folding, then whitespace runs collapsed to a single
// space with leading/trailing whitespace removed.
std::string normalize(std::string_view utf8);

std::string nfc(std::string_view utf8);
std::string case_fold(std::string_view utf8);

bool is_word_char(char32_t c);
bool is_space(char32_t c);

struct Token {
  std::size_t start = 0;  // scalar offset, half-open
  std::size_t end = 0;
  std::string norm;       // normalized form of the token text
};

// Maximal runs of word characters (letters, digits, combining marks);
// everything else is a boundary.
std::vector<Token> tokenize(std::u32string_view scalars);
std::vector<Token> tokenize(std::string_view utf8);

// Levenshtein distance over Unicode scalars. When `bound` is given the
// computation may stop early and return any value > bound once the distance
// is known to exceed it.
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);
std::size_t edit_distance_bounded(std::u32string_view a, std::u32string_view b,
                                  std::size_t bound);

}  // namespace casegraph::text
