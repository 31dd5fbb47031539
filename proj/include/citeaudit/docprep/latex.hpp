#pragma once

// Low-level LaTeX scanning: comments, brace groups, command arguments,
// environment spans, accent macros.

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "citeaudit/common/errors.hpp"

namespace citeaudit::docprep::latex {

/// Removes unescaped % comments; keeps the newline so line numbers survive.
inline std::string strip_comments(std::string_view tex) {
  std::string out;
  out.reserve(tex.size());
  bool in_comment = false;
  for (std::size_t i = 0; i < tex.size(); ++i) {
    const char c = tex[i];
    if (in_comment) {
      if (c == '\n') {
        in_comment = false;
        out.push_back('\n');
      }
      continue;
    }
    if (c == '\\' && i + 1 < tex.size()) {
      out.push_back(c);
      out.push_back(tex[++i]);
      continue;
    }
    if (c == '%') {
      in_comment = true;
      // drop trailing spaces before the comment
      while (!out.empty() && (out.back() == ' ' || out.back() == '\t')) out.pop_back();
      continue;
    }
    out.push_back(c);
  }
  return out;
}

inline int line_of(std::string_view tex, std::size_t pos) {
  int line = 1;
  for (std::size_t i = 0; i < pos && i < tex.size(); ++i) {
    if (tex[i] == '\n') ++line;
  }
  return line;
}

inline std::size_t skip_spaces(std::string_view s, std::size_t pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  return pos;
}

/// Position just after the brace that closes the group opening at `open`
/// (s[open] == '{'), or npos when unbalanced.
inline std::size_t match_brace(std::string_view s, std::size_t open, char lb = '{', char rb = '}') {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\\') {
      ++i;
      continue;
    }
    if (c == lb) ++depth;
    if (c == rb) {
      --depth;
      if (depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

/// Reads a mandatory {arg} at pos (after optional spaces). Returns the argument
/// text and the position after it.
inline std::optional<std::pair<std::string, std::size_t>> read_arg(std::string_view s,
                                                                    std::size_t pos) {
  pos = skip_spaces(s, pos);
  if (pos >= s.size() || s[pos] != '{') return std::nullopt;
  const auto end = match_brace(s, pos);
  if (end == std::string_view::npos) return std::nullopt;
  return std::make_pair(std::string(s.substr(pos + 1, end - pos - 2)), end);
}

/// Skips any number of [optional] arguments.
inline std::size_t skip_optional_args(std::string_view s, std::size_t pos) {
  while (true) {
    const auto p = skip_spaces(s, pos);
    if (p >= s.size() || s[p] != '[') return pos;
    const auto end = match_brace(s, p, '[', ']');
    if (end == std::string_view::npos) return pos;
    pos = end;
  }
}

/// Reads a control word starting at s[pos] == '\\'. Returns the name (without
/// backslash, including a trailing '*') and the position after it.
inline std::pair<std::string, std::size_t> read_command(std::string_view s, std::size_t pos) {
  std::size_t i = pos + 1;
  if (i < s.size() && !std::isalpha(static_cast<unsigned char>(s[i]))) {
    return {std::string(1, s[i]), i + 1};
  }
  while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
  std::string name(s.substr(pos + 1, i - pos - 1));
  if (i < s.size() && s[i] == '*') {
    name.push_back('*');
    ++i;
  }
  return {name, i};
}

/// Finds `\name` as a whole control word at or after pos.
inline std::size_t find_command(std::string_view s, std::string_view name, std::size_t pos = 0) {
  const std::string needle = "\\" + std::string(name);
  while ((pos = s.find(needle, pos)) != std::string_view::npos) {
    const auto after = pos + needle.size();
    if (after >= s.size() || !std::isalpha(static_cast<unsigned char>(s[after]))) {
      // not escaped
      std::size_t bs = 0;
      for (std::size_t k = pos; k > 0 && s[k - 1] == '\\'; --k) ++bs;
      if (bs % 2 == 0) return pos;
    }
    pos = after;
  }
  return std::string_view::npos;
}

struct EnvSpan {
  std::string name;
  std::size_t begin = 0;      // position of "\begin"
  std::size_t body = 0;       // after "\begin{name}"
  std::size_t body_end = 0;   // position of matching "\end"
  std::size_t end = 0;        // after "\end{name}"
};

/// Validates \begin/\end nesting; throws ParseError naming the line.
inline void check_environments(std::string_view tex) {
  std::vector<std::pair<std::string, std::size_t>> stack;
  std::size_t pos = 0;
  while ((pos = tex.find('\\', pos)) != std::string_view::npos) {
    const auto [cmd, after] = read_command(tex, pos);
    if (cmd == "begin" || cmd == "end") {
      const auto arg = read_arg(tex, after);
      if (!arg) throw ParseError("line " + std::to_string(line_of(tex, pos)) + ": \\" + cmd +
                                 " without environment name");
      if (cmd == "begin") {
        stack.emplace_back(arg->first, pos);
      } else {
        if (stack.empty()) {
          throw ParseError("line " + std::to_string(line_of(tex, pos)) + ": \\end{" +
                           arg->first + "} without matching \\begin");
        }
        if (stack.back().first != arg->first) {
          throw ParseError("line " + std::to_string(line_of(tex, pos)) + ": \\end{" +
                           arg->first + "} closes \\begin{" + stack.back().first + "} from line " +
                           std::to_string(line_of(tex, stack.back().second)));
        }
        stack.pop_back();
      }
      pos = arg->second;
      continue;
    }
    pos = after;
  }
  if (!stack.empty()) {
    throw ParseError("line " + std::to_string(line_of(tex, stack.back().second)) +
                     ": unclosed \\begin{" + stack.back().first + "}");
  }
}

/// Finds the next environment whose name satisfies `pred`, handling nesting of
/// the same name.
template <typename Pred>
std::optional<EnvSpan> find_environment_if(std::string_view tex, Pred pred, std::size_t from = 0) {
  std::size_t pos = from;
  while ((pos = find_command(tex, "begin", pos)) != std::string_view::npos) {
    const auto arg = read_arg(tex, pos + 6);
    if (!arg) {
      pos += 6;
      continue;
    }
    if (!pred(arg->first)) {
      pos = arg->second;
      continue;
    }
    EnvSpan span{arg->first, pos, arg->second, 0, 0};
    int depth = 1;
    std::size_t scan = arg->second;
    while (depth > 0) {
      const auto b = find_command(tex, "begin", scan);
      const auto e = find_command(tex, "end", scan);
      if (e == std::string_view::npos) return std::nullopt;
      if (b != std::string_view::npos && b < e) {
        const auto inner = read_arg(tex, b + 6);
        if (inner && inner->first == span.name) ++depth;
        scan = inner ? inner->second : b + 6;
        continue;
      }
      const auto inner = read_arg(tex, e + 4);
      if (inner && inner->first == span.name) {
        if (--depth == 0) {
          span.body_end = e;
          span.end = inner->second;
          return span;
        }
      }
      scan = inner ? inner->second : e + 4;
    }
  }
  return std::nullopt;
}

inline std::optional<EnvSpan> find_environment(std::string_view tex, std::string_view name,
                                               std::size_t from = 0) {
  return find_environment_if(tex, [&](const std::string& n) { return n == name; }, from);
}

/// UTF-8 for TeX accent macros applied to a base letter: \"o, \'{e}, \c{c}.
inline std::string accent(char macro, char base) {
  struct Row {
    char macro;
    char base;
    const char* utf8;
  };
  static constexpr Row kRows[] = {
      {'"', 'a', "ä"}, {'"', 'o', "ö"}, {'"', 'u', "ü"}, {'"', 'A', "Ä"}, {'"', 'O', "Ö"},
      {'"', 'U', "Ü"}, {'"', 'e', "ë"}, {'"', 'i', "ï"}, {'\'', 'a', "á"}, {'\'', 'e', "é"},
      {'\'', 'i', "í"}, {'\'', 'o', "ó"}, {'\'', 'u', "ú"}, {'\'', 'E', "É"}, {'\'', 'c', "ć"},
      {'\'', 'n', "ń"}, {'\'', 's', "ś"}, {'\'', 'y', "ý"}, {'`', 'a', "à"}, {'`', 'e', "è"},
      {'`', 'o', "ò"}, {'`', 'u', "ù"}, {'`', 'i', "ì"}, {'^', 'a', "â"}, {'^', 'e', "ê"},
      {'^', 'i', "î"}, {'^', 'o', "ô"}, {'^', 'u', "û"}, {'~', 'n', "ñ"}, {'~', 'a', "ã"},
      {'~', 'o', "õ"}, {'c', 'c', "ç"}, {'c', 'C', "Ç"}, {'v', 's', "š"}, {'v', 'c', "č"},
      {'v', 'z', "ž"}, {'v', 'S', "Š"}, {'v', 'C', "Č"}, {'v', 'r', "ř"}, {'v', 'e', "ě"},
      {'H', 'o', "ő"}, {'u', 'g', "ğ"}, {'k', 'a', "ą"}, {'k', 'e', "ę"},
  };
  for (const auto& r : kRows) {
    if (r.macro == macro && r.base == base) return r.utf8;
  }
  return std::string(1, base);
}

/// True when the next non-space text is a "[3,4-6]" / "[?]" group, which a
/// preceding macro must not swallow as an optional argument.
inline bool citation_bracket_follows(std::string_view s, std::size_t pos) {
  pos = skip_spaces(s, pos);
  if (pos >= s.size() || s[pos] != '[') return false;
  const auto close = s.find(']', pos);
  if (close == std::string_view::npos || close == pos + 1) return false;
  for (std::size_t i = pos + 1; i < close; ++i) {
    const char c = s[i];
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == ',' || c == '-' || c == ' ' || c == '?')) {
      return false;
    }
  }
  return true;
}

/// Flattens inline LaTeX (as found in titles, author lists, bibliography
/// entries) to plain text: drops formatting commands, keeps their arguments,
/// resolves accents and escapes.
inline std::string flatten_inline(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    const char c = s[i];
    if (c == '\\') {
      if (i + 1 < s.size() && std::string_view("\"'`^~").find(s[i + 1]) != std::string_view::npos) {
        const char macro = s[i + 1];
        std::size_t p = i + 2;
        char base = 0;
        if (p < s.size() && s[p] == '{') {
          const auto end = match_brace(s, p);
          if (end != std::string_view::npos && end - p >= 3) {
            std::string inner(s.substr(p + 1, end - p - 2));
            if (inner.size() == 2 && inner[0] == '\\') inner = inner.substr(1);  // \i
            base = inner.empty() ? 0 : inner[0];
            p = end;
          }
        } else if (p < s.size()) {
          base = s[p];
          if (base == '\\' && p + 1 < s.size()) base = s[++p];  // \"\i
          ++p;
        }
        if (base) out += accent(macro, base);
        i = p;
        continue;
      }
      auto [cmd, after] = read_command(s, i);
      if (cmd.size() == 1 && !std::isalpha(static_cast<unsigned char>(cmd[0]))) {
        if (cmd == "\\") {
          out.push_back(' ');
        } else if (cmd == "," || cmd == ";" || cmd == " " || cmd == "/" || cmd == "@") {
          out.push_back(' ');
        } else if (cmd != "-") {
          out += cmd;  // \& \% \_ \# \$ \{ \}
        }
        i = after;
        continue;
      }
      if ((cmd == "c" || cmd == "v" || cmd == "H" || cmd == "u" || cmd == "k") && after < s.size() &&
          s[after] == '{') {
        const auto end = match_brace(s, after);
        if (end != std::string_view::npos && end - after == 3) {
          out += accent(cmd[0], s[after + 1]);
          i = end;
          continue;
        }
      }
      if (cmd == "ss") {
        out += "ß";
      } else if (cmd == "o") {
        out += "ø";
      } else if (cmd == "l") {
        out += "ł";
      } else if (cmd == "ae") {
        out += "æ";
      } else if (cmd == "i") {
        out += "i";
      } else if (cmd == "and") {
        out += ", ";
      } else if (cmd == "newblock") {
        out.push_back(' ');
      } else if (cmd == "thanks" || cmd == "footnote" || cmd == "label" || cmd == "url" ||
                 cmd == "doi" || cmd == "href") {
        // drop the argument(s), except \href keeps its link text and \url is dropped
        std::size_t p = after;
        if (auto arg = read_arg(s, p)) {
          p = arg->second;
          if (cmd == "href") {
            if (auto text = read_arg(s, p)) {
              out += flatten_inline(text->first);
              p = text->second;
            }
          }
        }
        i = p;
        continue;
      }
      i = citation_bracket_follows(s, after) ? after : skip_optional_args(s, after);
      continue;
    }
    if (c == '{' || c == '}') {
      ++i;
      continue;
    }
    if (c == '~') {
      out.push_back(' ');
      ++i;
      continue;
    }
    if (c == '$') {
      ++i;
      continue;
    }
    if (c == '`' && i + 1 < s.size() && s[i + 1] == '`') {
      out.push_back('"');
      i += 2;
      continue;
    }
    if (c == '\'' && i + 1 < s.size() && s[i + 1] == '\'') {
      out.push_back('"');
      i += 2;
      continue;
    }
    if (c == '-' && s.compare(i, 3, "---") == 0) {
      out += "\xE2\x80\x94";
      i += 3;
      continue;
    }
    if (c == '-' && s.compare(i, 2, "--") == 0) {
      out += "\xE2\x80\x93";
      i += 2;
      continue;
    }
    out.push_back(c);
    ++i;
  }
  // collapse whitespace
  std::string collapsed;
  for (char ch : out) {
    const bool space = std::isspace(static_cast<unsigned char>(ch));
    if (space) {
      if (!collapsed.empty() && collapsed.back() != ' ') collapsed.push_back(' ');
    } else {
      collapsed.push_back(ch);
    }
  }
  while (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
  // spaces before punctuation left by dropped commands
  std::string tidy;
  for (std::size_t k = 0; k < collapsed.size(); ++k) {
    if (collapsed[k] == ' ' && k + 1 < collapsed.size() &&
        (collapsed[k + 1] == ',' || collapsed[k + 1] == '.' || collapsed[k + 1] == ';')) {
      continue;
    }
    tidy.push_back(collapsed[k]);
  }
  return tidy;
}

}  // namespace citeaudit::docprep::latex
