#pragma once

// Compilation backends. The system backend shells out to pdflatex, bibtex and
// pdftotext; the internal backend renders the cleaned document to text
// directly and emulates bibtex ordering.

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/io.hpp"
#include "citeaudit/docprep/bibliography.hpp"
#include "citeaudit/docprep/latex.hpp"
#include "citeaudit/docprep/tex_source.hpp"

namespace citeaudit::docprep {

class LatexToolchain {
 public:
  virtual ~LatexToolchain() = default;
  virtual std::string name() const = 0;

  /// Bibliography of the compiled document in printed order. Throws
  /// NoBibliographyError or CompileError.
  virtual Bibliography resolve_bibliography(std::string_view structural_tex,
                                            const fs::path& source_dir,
                                            const std::string& main_stem) const = 0;

  /// Flattened text of the compiled cleaned document (what a PDF-to-text pass
  /// would yield). Throws CompileError.
  virtual std::string render(std::string_view cleaned_tex, const Bibliography& bib,
                             const fs::path& source_dir) const = 0;
};

namespace detail {

inline std::vector<fs::path> named_bib_files(std::string_view tex, const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& m : bibliography_machinery(tex)) {
    std::string_view sv = m;
    const bool bibcmd = sv.rfind("\\bibliography{", 0) == 0;
    const bool resource = sv.rfind("\\addbibresource{", 0) == 0;
    if (!bibcmd && !resource) continue;
    const auto open = sv.find('{');
    for (const auto& name : text::split(sv.substr(open + 1, sv.size() - open - 2), ',')) {
      fs::path p = dir / text::trim(name);
      if (p.extension() != ".bib") p += ".bib";
      if (fs::exists(p)) out.push_back(p);
    }
  }
  return out;
}

inline std::string bibliography_style(std::string_view tex) {
  const auto pos = latex::find_command(tex, "bibliographystyle");
  if (pos == std::string_view::npos) return "plain";
  const auto arg = latex::read_arg(tex, pos + 18);
  return arg ? text::trim(arg->first) : "plain";
}

inline std::vector<fs::path> files_with_extension(const fs::path& dir, std::string_view ext) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline void check_braces(std::string_view body) {
  int depth = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '\\') {
      ++i;
      continue;
    }
    if (body[i] == '{') ++depth;
    if (body[i] == '}' && --depth < 0) {
      throw CompileError("line " + std::to_string(latex::line_of(body, i)) + ": extra }");
    }
  }
  if (depth != 0) throw CompileError("missing } inserted (unbalanced braces)");
}

inline std::vector<std::string> command_args(std::string_view tex, std::string_view cmd) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = latex::find_command(tex, cmd, pos)) != std::string_view::npos) {
    auto after = latex::skip_optional_args(tex, pos + cmd.size() + 1);
    if (auto arg = latex::read_arg(tex, after)) {
      out.push_back(arg->first);
      pos = arg->second;
    } else {
      pos += cmd.size() + 1;
    }
  }
  return out;
}

/// Removes `\cmd[..]{..}` (with `nargs` mandatory arguments) everywhere.
inline void erase_command(std::string& s, std::string_view cmd, int nargs) {
  std::size_t pos;
  std::size_t from = 0;
  while ((pos = latex::find_command(s, cmd, from)) != std::string::npos) {
    std::size_t after = latex::skip_optional_args(s, pos + cmd.size() + 1);
    for (int i = 0; i < nargs; ++i) {
      if (auto arg = latex::read_arg(s, after)) after = arg->second;
    }
    s.erase(pos, after - pos);
    from = pos;
  }
}

}  // namespace detail

/// Plain-text rendering of a cleaned document: title, authors, body
/// paragraphs with numbered section headings, then "References" and one
/// "[n] entry" line per bibliography item.
inline std::string render_plain_text(std::string_view cleaned_tex, const Bibliography& bib) {
  const std::string src = latex::strip_comments(cleaned_tex);
  const auto begin_doc = src.find("\\begin{document}");
  const auto end_doc = src.rfind("\\end{document}");
  if (begin_doc == std::string::npos || end_doc == std::string::npos) {
    throw CompileError("document markers missing");
  }
  std::string body = src.substr(begin_doc + 16, end_doc - begin_doc - 16);
  detail::check_braces(body);

  std::string out;
  std::vector<std::string> titles = detail::command_args(src, "title");
  for (const auto& t : detail::command_args(src, "icmltitle")) titles.push_back(t);
  if (!titles.empty()) out += latex::flatten_inline(titles.front()) + "\n";
  std::vector<std::string> authors;
  for (const auto& a : detail::command_args(src, "author")) {
    std::string flat = a;
    detail::erase_command(flat, "thanks", 1);
    for (auto& line : text::split(latex::flatten_inline(flat), ',')) {
      auto t = text::trim(line);
      if (!t.empty()) authors.push_back(t);
    }
  }
  for (const auto& a : detail::command_args(src, "icmlauthor")) authors.push_back(latex::flatten_inline(a));
  if (!authors.empty()) out += text::join(authors, ", ") + "\n";
  if (!out.empty()) out += "\n";

  for (const char* cmd : {"title", "icmltitle", "author"}) detail::erase_command(body, cmd, 1);
  detail::erase_command(body, "icmlauthor", 2);
  for (const char* cmd : {"maketitle", "bibliographystyle", "bibliography", "addbibresource",
                          "printbibliography", "appendix"}) {
    detail::erase_command(body, cmd, std::string_view(cmd) == "maketitle" ||
                                             std::string_view(cmd) == "printbibliography" ||
                                             std::string_view(cmd) == "appendix"
                                         ? 0
                                         : 1);
  }
  if (auto env = latex::find_environment(body, "thebibliography")) {
    body.erase(env->begin, env->end - env->begin);
  }

  // Block-level pass: headings and environments become paragraph breaks.
  std::string blocks;
  int section = 0;
  int subsection = 0;
  std::size_t pos = 0;
  while (pos < body.size()) {
    const auto bs = body.find('\\', pos);
    if (bs == std::string::npos) {
      blocks += body.substr(pos);
      break;
    }
    blocks += body.substr(pos, bs - pos);
    const auto [cmd, after] = latex::read_command(body, bs);
    const bool heading = cmd == "section" || cmd == "section*" || cmd == "subsection" ||
                         cmd == "subsection*" || cmd == "paragraph" || cmd == "paragraph*";
    if (heading) {
      const auto arg = latex::read_arg(body, latex::skip_optional_args(body, after));
      const std::string title = arg ? latex::flatten_inline(arg->first) : std::string();
      std::string label;
      if (cmd == "section") {
        label = std::to_string(++section) + " ";
        subsection = 0;
      } else if (cmd == "subsection") {
        label = std::to_string(section) + "." + std::to_string(++subsection) + " ";
      }
      if (cmd.rfind("paragraph", 0) == 0) {
        blocks += "\n\n" + title + ". ";
      } else {
        blocks += "\n\n" + label + title + "\n\n";
      }
      pos = arg ? arg->second : after;
      continue;
    }
    if (cmd == "begin" || cmd == "end") {
      const auto arg = latex::read_arg(body, after);
      const std::string env = arg ? arg->first : std::string();
      if (env == "abstract" && cmd == "begin") blocks += "\n\nAbstract\n\n";
      else blocks += "\n\n";
      pos = arg ? arg->second : after;
      continue;
    }
    if (cmd == "item") {
      blocks += "\n\n";
      pos = latex::skip_optional_args(body, after);
      continue;
    }
    if (cmd == "\\" || cmd == "par") {
      blocks += cmd == "par" ? "\n\n" : "\n";
      pos = after;
      continue;
    }
    blocks += body.substr(bs, after - bs);
    pos = after;
  }

  // Paragraph-level pass.
  std::string para;
  auto flush = [&] {
    const auto flat = latex::flatten_inline(para);
    if (!flat.empty()) out += flat + "\n\n";
    para.clear();
  };
  for (const auto& line : text::split(blocks, '\n')) {
    if (text::trim(line).empty()) {
      flush();
    } else {
      para += line + "\n";
    }
  }
  flush();

  out += "References\n\n";
  for (std::size_t i = 0; i < bib.items.size(); ++i) {
    out += "[" + std::to_string(i + 1) + "] " + bib.items[i].text + "\n";
  }
  return out;
}

class InternalToolchain : public LatexToolchain {
 public:
  std::string name() const override { return "internal"; }

  Bibliography resolve_bibliography(std::string_view structural_tex, const fs::path& source_dir,
                                    const std::string& main_stem) const override {
    if (latex::find_environment(structural_tex, "thebibliography")) {
      Bibliography bib{Bibliography::Source::Inline, parse_bibitems(structural_tex)};
      return bib;
    }
    // A .bib allows a fresh bibtex run restricted to what the cleaned text
    // cites; a .bbl alone fixes the full paper's list.
    auto bibs = detail::named_bib_files(structural_tex, source_dir);
    if (bibs.empty() && !bibliography_machinery(structural_tex).empty()) {
      bibs = detail::files_with_extension(source_dir, ".bib");
    }
    if (!bibs.empty()) {
      std::vector<BibRecord> records;
      for (const auto& f : bibs) {
        auto part = parse_bib(io::read_file(f));
        records.insert(records.end(), part.begin(), part.end());
      }
      return bibtex_emulate(records, cited_keys(structural_tex),
                            detail::bibliography_style(structural_tex));
    }
    fs::path bbl = source_dir / (main_stem + ".bbl");
    if (!fs::exists(bbl)) {
      const auto all = detail::files_with_extension(source_dir, ".bbl");
      if (all.empty()) throw NoBibliographyError("no .bib or .bbl file in " + source_dir.string());
      bbl = all.front();
    }
    return Bibliography{Bibliography::Source::Bbl, parse_bibitems(io::read_file(bbl))};
  }

  std::string render(std::string_view cleaned_tex, const Bibliography& bib,
                     const fs::path&) const override {
    return render_plain_text(cleaned_tex, bib);
  }
};

inline bool executable_on_path(std::string_view exe) {
  const char* path = std::getenv("PATH");
  if (!path) return false;
  for (const auto& dir : text::split(path, ':')) {
    if (dir.empty()) continue;
    std::error_code ec;
    const fs::path p = fs::path(dir) / exe;
    if (fs::exists(p, ec) && !fs::is_directory(p, ec)) return true;
  }
  return false;
}

/// Runs the TeX distribution found on PATH in a scratch copy of the source
/// directory.
class SystemToolchain : public LatexToolchain {
 public:
  static bool available() {
    return executable_on_path("pdflatex") && executable_on_path("bibtex") &&
           executable_on_path("pdftotext");
  }

  std::string name() const override { return "system"; }

  Bibliography resolve_bibliography(std::string_view structural_tex, const fs::path& source_dir,
                                    const std::string& main_stem) const override {
    const auto bibs = detail::named_bib_files(structural_tex, source_dir);
    if (bibs.empty() || latex::find_environment(structural_tex, "thebibliography")) {
      return InternalToolchain().resolve_bibliography(structural_tex, source_dir, main_stem);
    }
    Scratch scratch(source_dir);
    io::write_file_atomic(scratch.dir / "citeaudit_main.tex", structural_tex);
    run(scratch.dir, "pdflatex -interaction=nonstopmode -halt-on-error citeaudit_main.tex");
    run(scratch.dir, "bibtex citeaudit_main");
    const auto bbl = scratch.dir / "citeaudit_main.bbl";
    if (!fs::exists(bbl)) throw CompileError("bibtex produced no .bbl");
    Bibliography bib{Bibliography::Source::Bib, parse_bibitems(io::read_file(bbl))};
    return bib;
  }

  std::string render(std::string_view cleaned_tex, const Bibliography& bib,
                     const fs::path& source_dir) const override {
    std::string tex(cleaned_tex);
    for (const char* cmd : {"bibliography", "addbibresource", "printbibliography"}) {
      detail::erase_command(tex, cmd, std::string_view(cmd) == "printbibliography" ? 0 : 1);
    }
    if (!latex::find_environment(tex, "thebibliography")) {
      std::string env = "\\begin{thebibliography}{99}\n";
      for (const auto& item : bib.items) env += "\\bibitem{" + item.key + "} " + item.text + "\n";
      env += "\\end{thebibliography}\n";
      const auto end_doc = tex.rfind("\\end{document}");
      tex.insert(end_doc, env);
    }
    Scratch scratch(source_dir);
    io::write_file_atomic(scratch.dir / "citeaudit_main.tex", tex);
    run(scratch.dir, "pdflatex -interaction=nonstopmode -halt-on-error citeaudit_main.tex");
    run(scratch.dir, "pdflatex -interaction=nonstopmode -halt-on-error citeaudit_main.tex");
    run(scratch.dir, "pdftotext -enc UTF-8 citeaudit_main.pdf citeaudit_main.txt");
    return io::read_file(scratch.dir / "citeaudit_main.txt");
  }

 private:
  struct Scratch {
    fs::path dir;
    explicit Scratch(const fs::path& source) {
      std::random_device rd;
      dir = fs::temp_directory_path() / ("citeaudit-tex-" + std::to_string(rd()));
      fs::create_directories(dir);
      fs::copy(source, dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    }
    ~Scratch() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
    Scratch(const Scratch&) = delete;
    Scratch& operator=(const Scratch&) = delete;
  };

  static void run(const fs::path& dir, const std::string& command) {
    const std::string full = "cd '" + dir.string() + "' && " + command + " >/dev/null 2>&1";
    const int rc = std::system(full.c_str());
    if (rc != 0) throw CompileError("'" + command + "' failed with status " + std::to_string(rc));
  }
};

/// "internal", "system", or "auto" (system when available).
inline std::unique_ptr<LatexToolchain> make_toolchain(std::string_view kind) {
  if (kind == "internal") return std::make_unique<InternalToolchain>();
  if (kind == "system") {
    if (!SystemToolchain::available()) {
      throw ConfigError("latex toolchain 'system' requested but pdflatex/bibtex/pdftotext missing");
    }
    return std::make_unique<SystemToolchain>();
  }
  if (kind == "auto") {
    if (SystemToolchain::available()) return std::make_unique<SystemToolchain>();
    return std::make_unique<InternalToolchain>();
  }
  throw ConfigError("unknown latex toolchain '" + std::string(kind) + "'");
}

}  // namespace citeaudit::docprep
