#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/ratio.hpp"

namespace citeaudit::stats {

/// Closed integer interval; a missing bound is open.
struct Bin {
  std::string label;
  std::optional<std::int64_t> lo;
  std::optional<std::int64_t> hi;

  bool contains(std::int64_t v) const { return (!lo || v >= *lo) && (!hi || v <= *hi); }
};

/// Ordered, non-overlapping bins.
class Binning {
 public:
  Binning() = default;
  explicit Binning(std::vector<Bin> bins) : bins_(std::move(bins)) {
    for (std::size_t i = 1; i < bins_.size(); ++i) {
      const auto& a = bins_[i - 1];
      const auto& b = bins_[i];
      if (!a.hi || !b.lo || *a.hi >= *b.lo) {
        throw ConfigError("bins '" + a.label + "' and '" + b.label + "' overlap or are unordered");
      }
    }
  }

  /// Consecutive bins starting at each edge; the last is open-ended and the
  /// first is open below when `open_below` is set.
  static Binning from_starts(const std::vector<std::int64_t>& starts, bool open_below = false) {
    if (starts.empty()) throw ConfigError("binning needs at least one edge");
    std::vector<Bin> bins;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      Bin b;
      if (i > 0 || !open_below) b.lo = starts[i];
      if (i + 1 < starts.size()) {
        if (starts[i + 1] <= starts[i]) throw ConfigError("bin edges must increase");
        b.hi = starts[i + 1] - 1;
      }
      if (!b.lo && !b.hi) {
        b.label = "all";
      } else if (!b.lo) {
        b.label = "<=" + std::to_string(b.hi.value_or(0));
      } else if (!b.hi) {
        b.label = ">=" + std::to_string(*b.lo);
      } else if (*b.lo == *b.hi) {
        b.label = std::to_string(*b.lo);
      } else {
        b.label = std::to_string(*b.lo) + "-" + std::to_string(*b.hi);
      }
      bins.push_back(std::move(b));
    }
    return Binning(std::move(bins));
  }

  /// 0, 1-9, 10-99, ... up to >= 10^max_exponent.
  static Binning log10(int max_exponent = 6) {
    std::vector<std::int64_t> starts{0, 1};
    std::int64_t p = 1;
    for (int i = 1; i <= max_exponent; ++i) starts.push_back(p *= 10);
    return from_starts(starts);
  }

  const std::vector<Bin>& bins() const { return bins_; }

  std::optional<std::size_t> find(std::int64_t v) const {
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      if (bins_[i].contains(v)) return i;
    }
    return std::nullopt;
  }

 private:
  std::vector<Bin> bins_;
};

/// Subperiods for publication years: <=1988, configurable interior bins
/// covering 1989-2009, then 2010-2016, 2017-2023 and >=2024. `interior`
/// lists the first year of each interior bin and must start at 1989.
inline Binning subperiod_binning(const std::vector<std::int64_t>& interior = {1989, 2000}) {
  if (interior.empty() || interior.front() != 1989 || interior.back() > 2009) {
    throw ConfigError("subperiod interior bins must start at 1989 and end before 2010");
  }
  // with open_below the first start is never used as a bound
  std::vector<std::int64_t> starts{0};
  starts.insert(starts.end(), interior.begin(), interior.end());
  starts.insert(starts.end(), {2010, 2017, 2024});
  return Binning::from_starts(starts, true);
}

/// Median of the values; even counts average the two middle values exactly.
inline MaybeRatio median(std::vector<std::int64_t> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  if (n % 2 == 1) return Ratio(values[n / 2]);
  return Ratio(values[n / 2 - 1] + values[n / 2], 2);
}

struct Histogram {
  std::vector<std::string> labels;
  std::vector<std::int64_t> counts;
  std::int64_t unknown = 0;
};

/// Histogram plus median over the known values.
struct Distribution {
  Histogram histogram;
  std::int64_t known = 0;
  MaybeRatio median;
};

inline Distribution distribute(const std::vector<std::optional<std::int64_t>>& values, const Binning& binning) {
  Distribution d;
  for (const auto& b : binning.bins()) d.histogram.labels.push_back(b.label);
  d.histogram.counts.assign(binning.bins().size(), 0);
  std::vector<std::int64_t> known;
  for (const auto& v : values) {
    if (!v) {
      ++d.histogram.unknown;
      continue;
    }
    const auto idx = binning.find(*v);
    if (!idx) throw PreconditionError("value " + std::to_string(*v) + " falls outside every bin");
    ++d.histogram.counts[*idx];
    known.push_back(*v);
  }
  d.known = static_cast<std::int64_t>(known.size());
  d.median = median(std::move(known));
  return d;
}

inline nlohmann::json ratio_json(const MaybeRatio& r) {
  if (!r) return nullptr;
  return {{"exact", r->str()}, {"value", r->value()}};
}

inline nlohmann::json to_json(const Distribution& d) {
  nlohmann::json bins = nlohmann::json::array();
  for (std::size_t i = 0; i < d.histogram.labels.size(); ++i) {
    bins.push_back({{"bin", d.histogram.labels[i]}, {"count", d.histogram.counts[i]}});
  }
  return {{"bins", bins}, {"unknown", d.histogram.unknown}, {"known", d.known}, {"median", ratio_json(d.median)}};
}

}  // namespace citeaudit::stats
