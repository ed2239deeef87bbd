#include "labelforge/strategies.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "csv.hpp"
#include "labelforge/error.hpp"

namespace labelforge {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::int64_t parse_int(std::string_view text, std::string_view spec) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidStrategy, "bad number in '" + std::string(spec) + "'");
  }
  return v;
}

std::vector<std::string> read_scanner_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidStrategy, "cannot open scanner list " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto name = detail::trim(line);
    if (name.empty() || name.front() == '#') continue;
    out.push_back(std::move(name));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& drebin_scanners() {
  static const std::vector<std::string> names{"AVG",        "Avira",     "BitDefender", "ClamAV",
                                              "ESET-NOD32", "F-Secure",  "Kaspersky",   "McAfee",
                                              "Panda",      "Sophos"};
  return names;
}

ThresholdStrategy::ThresholdStrategy(Rule rule, std::string name)
    : rule_(std::move(rule)), name_(std::move(name)) {}

ThresholdStrategy ThresholdStrategy::count_at_least(std::int64_t sigma) {
  if (sigma < 1) throw Error(ErrorCode::InvalidStrategy, "count threshold must be >= 1");
  return ThresholdStrategy(CountAtLeast{sigma}, "vt>=" + std::to_string(sigma));
}

ThresholdStrategy ThresholdStrategy::ratio_at_least(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidStrategy, "ratio threshold must lie in (0, 1]");
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "vt>=%g%%", fraction * 100.0);
  return ThresholdStrategy(RatioAtLeast{fraction}, buf);
}

ThresholdStrategy ThresholdStrategy::scanner_subset(std::vector<std::string> scanners,
                                                    std::int64_t k) {
  std::set<std::string> unique(scanners.begin(), scanners.end());
  if (scanners.empty() || unique.size() != scanners.size()) {
    throw Error(ErrorCode::InvalidStrategy, "scanner subset must be non-empty and duplicate-free");
  }
  if (k < 1 || k > static_cast<std::int64_t>(scanners.size())) {
    throw Error(ErrorCode::InvalidStrategy, "subset k must lie in [1, |scanners|]");
  }
  std::string name = "subset:";
  for (std::size_t i = 0; i < scanners.size(); ++i) name += (i ? "|" : "") + scanners[i];
  name += ":k=" + std::to_string(k);
  return ThresholdStrategy(ScannerSubset{std::move(scanners), k}, std::move(name));
}

ThresholdStrategy ThresholdStrategy::drebin() {
  auto s = scanner_subset(drebin_scanners(), 2);
  s.name_ = "subset:drebin";
  return s;
}

ThresholdStrategy ThresholdStrategy::parse(std::string_view spec) {
  const std::string original(spec);
  if (spec.rfind("vt>=", 0) == 0) {
    auto rest = spec.substr(4);
    if (!rest.empty() && rest.back() == '%') {
      auto number = rest.substr(0, rest.size() - 1);
      double pct = 0.0;
      auto [p, ec] = std::from_chars(number.data(), number.data() + number.size(), pct);
      if (ec != std::errc{} || p != number.data() + number.size()) {
        throw Error(ErrorCode::InvalidStrategy, "bad percentage in '" + original + "'");
      }
      auto s = ratio_at_least(pct / 100.0);
      s.name_ = original;
      return s;
    }
    return count_at_least(parse_int(rest, spec));
  }
  if (spec.rfind("subset:", 0) == 0) {
    auto rest = spec.substr(7);
    std::int64_t k = 2;
    if (auto pos = rest.rfind(":k="); pos != std::string_view::npos) {
      k = parse_int(rest.substr(pos + 3), spec);
      rest = rest.substr(0, pos);
    }
    if (rest.empty()) throw Error(ErrorCode::InvalidStrategy, "missing scanner list in '" + original + "'");
    std::vector<std::string> scanners =
        rest == "drebin" ? drebin_scanners() : read_scanner_file(std::string(rest));
    auto s = scanner_subset(std::move(scanners), k);
    s.name_ = original;
    return s;
  }
  throw Error(ErrorCode::InvalidStrategy, "unrecognised strategy '" + original + "'");
}

std::int64_t required_positives(double fraction, std::int64_t total) noexcept {
  const double need = fraction * static_cast<double>(total);
  // Absorb representation error so that e.g. 0.1 * 30 requires 3, not 4.
  return static_cast<std::int64_t>(std::ceil(need - 1e-9 * std::max(1.0, need)));
}

Label ThresholdStrategy::label(const ScanSnapshot& s) const {
  const bool malicious = std::visit(
      Overloaded{
          [&](const CountAtLeast& r) { return s.positives >= r.sigma; },
          [&](const RatioAtLeast& r) {
            return s.total > 0 && s.positives >= required_positives(r.fraction, s.total);
          },
          [&](const ScannerSubset& r) {
            std::int64_t hits = 0;
            for (const auto& name : r.scanners) {
              if (verdict_of(s, name) == Verdict::Malicious) ++hits;
            }
            return hits >= r.k;
          },
      },
      rule_);
  return malicious ? Label::Malicious : Label::Benign;
}

Label label(const ThresholdStrategy& strategy, const ScanSnapshot& snapshot) {
  return strategy.label(snapshot);
}

std::map<std::string, Label> apply_strategy(const Labeler& strategy,
                                            const std::map<std::string, ScanSnapshot>& snapshots) {
  std::map<std::string, Label> out;
  for (const auto& [id, s] : snapshots) out.emplace_hint(out.end(), id, strategy.label(s));
  return out;
}

}  // namespace labelforge
