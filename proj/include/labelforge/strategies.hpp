#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "labelforge/report.hpp"

namespace labelforge {

/// Anything that maps one scan report to a label: threshold rules here,
/// trained forests in forest.hpp.
class Labeler {
 public:
  virtual ~Labeler() = default;
  virtual Label label(const ScanSnapshot& snapshot) const = 0;
  /// Stable display name, used as the strategy column in reports.
  virtual std::string name() const = 0;
};

struct CountAtLeast {
  std::int64_t sigma = 1;
};

struct RatioAtLeast {
  double fraction = 0.5;  // in (0, 1]
};

struct ScannerSubset {
  std::vector<std::string> scanners;
  std::int64_t k = 1;
};

class ThresholdStrategy final : public Labeler {
 public:
  using Rule = std::variant<CountAtLeast, RatioAtLeast, ScannerSubset>;

  /// Throws InvalidStrategy on out-of-range parameters.
  static ThresholdStrategy count_at_least(std::int64_t sigma);
  static ThresholdStrategy ratio_at_least(double fraction);
  static ThresholdStrategy scanner_subset(std::vector<std::string> scanners, std::int64_t k);
  /// Ten named scanners, malicious when at least two detect.
  static ThresholdStrategy drebin();

  /// Accepts `vt>=N`, `vt>=P%`, `subset:drebin[:k=N]` and
  /// `subset:<file>[:k=N]` (one scanner name per line, k defaults to 2).
  static ThresholdStrategy parse(std::string_view spec);

  Label label(const ScanSnapshot& snapshot) const override;
  std::string name() const override { return name_; }
  const Rule& rule() const noexcept { return rule_; }

 private:
  ThresholdStrategy(Rule rule, std::string name);
  Rule rule_;
  std::string name_;
};

const std::vector<std::string>& drebin_scanners();

/// Smallest positives count that satisfies RatioAtLeast(fraction) for `total`.
std::int64_t required_positives(double fraction, std::int64_t total) noexcept;

Label label(const ThresholdStrategy& strategy, const ScanSnapshot& snapshot);

std::map<std::string, Label> apply_strategy(const Labeler& strategy,
                                            const std::map<std::string, ScanSnapshot>& snapshots);

}  // namespace labelforge
