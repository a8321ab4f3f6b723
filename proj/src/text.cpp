#include "nest/text.hpp"

#include <cctype>

namespace nest::text {

namespace {

bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < s.size()) lines.emplace_back(s.substr(start));
      break;
    }
    lines.emplace_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

bool ends_with_newline(std::string_view s) {
  return !s.empty() && s.back() == '\n';
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_ws(s[b])) ++b;
  while (e > b && is_ws(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string collapse_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_run = false;
  for (char c : s) {
    if (is_ws(c)) {
      in_run = true;
      continue;
    }
    if (in_run && !out.empty()) out.push_back(' ');
    in_run = false;
    out.push_back(c);
  }
  return out;
}

std::string normalize_match(std::string_view s) {
  std::string out = collapse_ws(to_lower_ascii(trim(s)));
  if (!out.empty()) {
    char last = out.back();
    if (last == '.' || last == ',' || last == '!' || last == '?') out.pop_back();
  }
  return out;
}

std::string normalize_loose(std::string_view s) {
  return collapse_ws(to_lower_ascii(trim(s)));
}

std::string canonical_lf(std::string_view s) {
  std::string lf;
  lf.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\r') {
      lf.push_back('\n');
      if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
    } else {
      lf.push_back(s[i]);
    }
  }
  return trim(lf);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view s) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(s);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::size_t count_ws_tokens(std::string_view s) {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : s) {
    if (is_ws(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++n;
    }
  }
  return n;
}

bool is_snake_ident(std::string_view s) {
  if (s.empty()) return false;
  if (!(s[0] >= 'a' && s[0] <= 'z')) return false;
  for (char c : s) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

bool has_trailing_ws(std::string_view line) {
  if (line.empty()) return false;
  char c = line.back();
  return c == ' ' || c == '\t' || c == '\r';
}

}  // namespace nest::text
