#pragma once

#include <cctype>
#include <cstdlib>
#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "refx/dataset.hpp"
#include "refx/models.hpp"
#include "refx/rng.hpp"

namespace refx::test {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "refx-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Minimal XML well-formedness check: one root element, balanced and
// properly nested tags, quoted attributes, no stray '<' or '&' in text.
// Enough for hand-emitted SVG; not a general parser.
inline bool xml_well_formed(const std::string& doc, std::string* why = nullptr) {
  auto bad = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  auto name_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':' ||
           c == '.';
  };
  std::vector<std::string> stack;
  bool seen_root = false;
  std::size_t i = 0;
  const std::size_t n = doc.size();
  while (i < n) {
    if (doc[i] == '<') {
      if (doc.compare(i, 5, "<?xml") == 0) {
        const auto end = doc.find("?>", i);
        if (end == std::string::npos || i != 0) return bad("bad xml declaration");
        i = end + 2;
        continue;
      }
      if (doc.compare(i, 4, "<!--") == 0) {
        const auto end = doc.find("-->", i);
        if (end == std::string::npos) return bad("unterminated comment");
        i = end + 3;
        continue;
      }
      const bool closing = i + 1 < n && doc[i + 1] == '/';
      std::size_t j = i + (closing ? 2 : 1);
      const std::size_t name_start = j;
      while (j < n && name_char(doc[j])) ++j;
      const std::string name = doc.substr(name_start, j - name_start);
      if (name.empty()) return bad("empty tag name at " + std::to_string(i));
      if (closing) {
        while (j < n && std::isspace(static_cast<unsigned char>(doc[j]))) ++j;
        if (j >= n || doc[j] != '>') return bad("bad closing tag " + name);
        if (stack.empty() || stack.back() != name) return bad("mismatched </" + name + ">");
        stack.pop_back();
        i = j + 1;
        continue;
      }
      if (stack.empty() && seen_root) return bad("second root element");
      seen_root = true;
      bool self_closing = false;
      while (true) {
        while (j < n && std::isspace(static_cast<unsigned char>(doc[j]))) ++j;
        if (j >= n) return bad("unterminated tag " + name);
        if (doc[j] == '>') {
          ++j;
          break;
        }
        if (doc[j] == '/' && j + 1 < n && doc[j + 1] == '>') {
          self_closing = true;
          j += 2;
          break;
        }
        const std::size_t attr_start = j;
        while (j < n && name_char(doc[j])) ++j;
        if (j == attr_start) return bad("bad attribute in " + name);
        if (j >= n || doc[j] != '=') return bad("attribute without value in " + name);
        ++j;
        if (j >= n || (doc[j] != '"' && doc[j] != '\'')) return bad("unquoted attribute in " + name);
        const char q = doc[j];
        const auto end = doc.find(q, j + 1);
        if (end == std::string::npos) return bad("unterminated attribute in " + name);
        if (doc.substr(j + 1, end - j - 1).find('<') != std::string::npos)
          return bad("'<' in attribute of " + name);
        j = end + 1;
      }
      if (!self_closing) stack.push_back(name);
      i = j;
      continue;
    }
    if (doc[i] == '&') {
      const auto semi = doc.find(';', i);
      if (semi == std::string::npos || semi - i > 8) return bad("bare '&'");
      i = semi + 1;
      continue;
    }
    if (stack.empty() && !std::isspace(static_cast<unsigned char>(doc[i])))
      return bad("text outside the root element");
    ++i;
  }
  if (!stack.empty()) return bad("unclosed <" + stack.back() + ">");
  if (!seen_root) return bad("no root element");
  return true;
}

// Uniform matrix on [lo, hi).
inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double lo = -1, double hi = 1) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = lo + (hi - lo) * rng.uniform();
  return m;
}

inline std::vector<std::string> feature_names(Index p, const std::string& prefix = "x") {
  std::vector<std::string> names;
  for (Index j = 0; j < p; ++j) names.push_back(prefix + std::to_string(j));
  return names;
}

inline std::string external_child() { return REFX_EXTERNAL_CHILD; }
inline std::string cli_binary() { return REFX_CLI; }
inline std::filesystem::path source_dir() { return REFX_SOURCE_DIR; }

}  // namespace refx::test
