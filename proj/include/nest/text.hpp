#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small text utilities shared by the grammar, reward normalizers, fixture
// digests, and the dataset token estimator.

namespace nest::text {

// Splits on '\n'. A trailing newline does not produce a final empty element;
// `ends_with_newline` reports whether the last line was terminated.
std::vector<std::string> split_lines(std::string_view s);
bool ends_with_newline(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

// Collapses every internal run of whitespace to one space (input should be
// trimmed first if leading/trailing runs matter).
std::string collapse_ws(std::string_view s);

// The answer-equivalence normalizer: trim, casefold, collapse internal
// whitespace runs, strip one trailing '.', ',', '!' or '?'.
std::string normalize_match(std::string_view s);

// Looser form used for dedupe keys: trim, casefold, collapse whitespace.
std::string normalize_loose(std::string_view s);

// Canonical form for request digests: CRLF/CR -> LF, then trim both ends.
std::string canonical_lf(std::string_view s);

std::uint64_t fnv1a64(std::string_view s);
std::string fnv1a64_hex(std::string_view s);

// Whitespace-separated token count (the documented dataset-size estimate).
std::size_t count_ws_tokens(std::string_view s);

// [a-z][a-z0-9_]* -- the lexical shape of a skill name.
bool is_snake_ident(std::string_view s);

bool has_trailing_ws(std::string_view line);

}  // namespace nest::text
