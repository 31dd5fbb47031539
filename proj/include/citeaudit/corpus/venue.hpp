#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/io.hpp"
#include "citeaudit/common/text.hpp"

namespace citeaudit {

enum class CanonicalVenue { AAAI, NeurIPS, ICML, ICLR, arXiv, Nature, Others };

inline constexpr std::array<CanonicalVenue, 7> kAllVenues = {
    CanonicalVenue::AAAI,  CanonicalVenue::NeurIPS, CanonicalVenue::ICML,  CanonicalVenue::ICLR,
    CanonicalVenue::arXiv, CanonicalVenue::Nature,  CanonicalVenue::Others};

inline std::string_view to_string(CanonicalVenue v) {
  switch (v) {
    case CanonicalVenue::AAAI: return "AAAI";
    case CanonicalVenue::NeurIPS: return "NeurIPS";
    case CanonicalVenue::ICML: return "ICML";
    case CanonicalVenue::ICLR: return "ICLR";
    case CanonicalVenue::arXiv: return "arXiv";
    case CanonicalVenue::Nature: return "Nature";
    case CanonicalVenue::Others: return "Others";
  }
  return "Others";
}

inline CanonicalVenue venue_from_string(std::string_view s) {
  for (auto v : kAllVenues) {
    if (text::to_lower_ascii(to_string(v)) == text::to_lower_ascii(s)) return v;
  }
  throw ParseError("unknown canonical venue '" + std::string(s) + "'");
}

struct Venue {
  CanonicalVenue canonical = CanonicalVenue::Others;
  std::string raw;

  friend bool operator==(const Venue&, const Venue&) = default;
};

/// Alias table mapping raw venue strings onto canonical labels. An alias
/// matches when it occurs as a whole-word phrase in the normalized raw string;
/// the first matching row wins.
class VenueTable {
 public:
  struct Alias {
    std::string phrase;  // normalized, punctuation replaced by spaces
    CanonicalVenue venue;
  };

  static VenueTable defaults() {
    VenueTable t;
    const std::vector<std::pair<std::string, CanonicalVenue>> rows = {
        {"aaai", CanonicalVenue::AAAI},
        {"association for the advancement of artificial intelligence", CanonicalVenue::AAAI},
        {"neurips", CanonicalVenue::NeurIPS},
        {"nips", CanonicalVenue::NeurIPS},
        {"neural information processing systems", CanonicalVenue::NeurIPS},
        {"icml", CanonicalVenue::ICML},
        {"international conference on machine learning", CanonicalVenue::ICML},
        {"iclr", CanonicalVenue::ICLR},
        {"international conference on learning representations", CanonicalVenue::ICLR},
        {"arxiv", CanonicalVenue::arXiv},
        {"corr", CanonicalVenue::arXiv},
        {"nature", CanonicalVenue::Nature},
    };
    for (const auto& [p, v] : rows) t.add(p, v);
    return t;
  }

  /// Reads `{"aliases": [{"alias": "...", "venue": "NeurIPS"}, ...]}`.
  static VenueTable from_json(const nlohmann::json& j) {
    VenueTable t;
    if (!j.contains("aliases") || !j["aliases"].is_array()) {
      throw ConfigError("venue alias table needs an 'aliases' array");
    }
    for (const auto& row : j["aliases"]) {
      t.add(row.at("alias").get<std::string>(),
            venue_from_string(row.at("venue").get<std::string>()));
    }
    return t;
  }

  static VenueTable load(const std::filesystem::path& path) {
    try {
      return from_json(nlohmann::json::parse(io::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad venue alias table " + path.string() + ": " + e.what());
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& a : aliases_) {
      rows.push_back({{"alias", a.phrase}, {"venue", std::string(to_string(a.venue))}});
    }
    return {{"aliases", rows}};
  }

  void add(std::string_view alias, CanonicalVenue v) { aliases_.push_back({words(alias), v}); }

  /// Total: every input maps to some label, unknown raws to Others.
  Venue canonicalize(std::string_view raw) const {
    const std::string padded = " " + words(raw) + " ";
    for (const auto& a : aliases_) {
      if (a.phrase.empty()) continue;
      if (padded.find(" " + a.phrase + " ") != std::string::npos) {
        return {a.venue, std::string(raw)};
      }
    }
    return {CanonicalVenue::Others, std::string(raw)};
  }

  const std::vector<Alias>& aliases() const { return aliases_; }

 private:
  static std::string words(std::string_view s) {
    std::u32string norm = text::normalize(s);
    for (auto& c : norm) {
      if (text::is_punct(c)) c = U' ';
    }
    std::u32string collapsed;
    for (char32_t c : norm) {
      if (c == U' ' && (collapsed.empty() || collapsed.back() == U' ')) continue;
      collapsed.push_back(c);
    }
    while (!collapsed.empty() && collapsed.back() == U' ') collapsed.pop_back();
    return text::encode_utf8(collapsed);
  }

  std::vector<Alias> aliases_;
};

}  // namespace citeaudit
