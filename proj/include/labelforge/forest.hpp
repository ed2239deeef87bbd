#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelforge/features.hpp"
#include "labelforge/report.hpp"
#include "labelforge/strategies.hpp"

namespace labelforge {

struct ClassCounts {
  std::int64_t benign = 0;
  std::int64_t malicious = 0;

  std::int64_t total() const noexcept { return benign + malicious; }
  /// Majority class; equal counts give Benign.
  Label majority() const noexcept { return malicious > benign ? Label::Malicious : Label::Benign; }
  void add(Label l) noexcept { (l == Label::Malicious ? malicious : benign) += 1; }

  bool operator==(const ClassCounts&) const = default;
};

enum class Criterion { Gini, Entropy };

std::string_view to_string(Criterion c) noexcept;
/// "gini" or "entropy"; throws InvalidArgument.
Criterion parse_criterion(std::string_view text);

/// Throw EmptyNode when both counts are zero.
double gini(ClassCounts c);
double entropy(ClassCounts c);
double impurity(ClassCounts c, Criterion criterion);

struct HyperParams {
  Criterion criterion = Criterion::Gini;
  std::optional<int> max_depth;            // absent: unbounded
  std::optional<std::size_t> max_features;  // absent: every feature
  std::size_t min_samples_split = 2;
  bool bootstrap = true;
  std::size_t n_trees = 100;

  /// Throws InvalidArgument.
  void validate() const;
  /// e.g. "criterion=gini max_depth=None max_features=5 min_samples_split=2 bootstrap=true"
  std::string describe() const;

  bool operator==(const HyperParams&) const = default;
};

/// Flat node. feature < 0 marks a leaf. Samples with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  ClassCounts counts;

  bool is_leaf() const noexcept { return feature < 0; }
  Label prediction() const noexcept { return counts.majority(); }

  bool operator==(const TreeNode&) const = default;
};

/// Nodes in preorder; nodes[0] is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  Label predict(std::span<const double> x) const;
  /// Longest root-to-leaf path in edges.
  int depth() const;

  bool operator==(const Tree&) const = default;
};

/// Row-major training matrix.
struct Dataset {
  std::size_t n_features = 0;
  std::vector<double> values;
  std::vector<Label> labels;
  std::string schema_id;  // empty for raw matrices

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * n_features, n_features};
  }

  /// Throws EmptyTrainingSet or SchemaMismatch (length or schema id disagreement).
  static Dataset from_vectors(const std::vector<FeatureVector>& x, const std::vector<Label>& y);
  static Dataset from_rows(const std::vector<std::vector<double>>& x, const std::vector<Label>& y);
};

struct TrainingMeta {
  std::string dataset;
  std::string date;
  std::optional<double> cv_accuracy;

  bool operator==(const TrainingMeta&) const = default;
};

struct ForestModel {
  std::vector<Tree> trees;
  HyperParams params;
  std::size_t n_features = 0;
  std::optional<FeatureSchema> schema;
  std::uint64_t seed = 0;
  TrainingMeta training_meta;

  bool operator==(const ForestModel&) const = default;
};

struct TrainOptions {
  unsigned threads = 0;  // 0: hardware concurrency
};

/// splitmix64 finaliser applied to seed + golden-ratio * (index + 1).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// CART on every row of `data`. Throws EmptyTrainingSet or InvalidArgument.
Tree train_tree(const Dataset& data, const HyperParams& params, std::uint64_t rng_seed);

/// Tree i uses derive_seed(seed, i); with bootstrap it first draws n rows with
/// replacement from that stream. Output does not depend on thread count.
ForestModel train_forest(const Dataset& data, const HyperParams& params, std::uint64_t seed,
                         const TrainOptions& options = {});

/// Majority vote; ties give Benign.
Label predict(const ForestModel& model, std::span<const double> x);
/// Throws SchemaMismatch on length or schema id disagreement.
Label predict(const ForestModel& model, const FeatureVector& x);

/// Mean decrease in impurity, normalised per tree, averaged, then renormalised.
std::vector<double> feature_importances(const ForestModel& model);

/// Labels snapshots by extracting features with the model's schema.
class ForestLabeler final : public Labeler {
 public:
  /// Throws InvalidModel when the model has no schema.
  explicit ForestLabeler(std::shared_ptr<const ForestModel> model, std::string name = "forest");
  Label label(const ScanSnapshot& snapshot) const override;
  std::string name() const override { return name_; }

 private:
  std::shared_ptr<const ForestModel> model_;
  std::string name_;
};

struct FoldScore {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

/// Unweighted mean of fold accuracies.
double mean_accuracy(const std::vector<FoldScore>& folds);

/// Seeded stratified partition: each class is shuffled and dealt round-robin,
/// starting where the previous class stopped. Throws TooFewSamples when k > n.
std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<Label>& labels, std::size_t k,
                                                       std::uint64_t seed);

struct CvResult {
  double mean_accuracy = 0.0;
  std::vector<FoldScore> folds;
};

/// Fold f trains with derive_seed(seed, f). Throws TooFewSamples.
CvResult cross_validate(const Dataset& data, const HyperParams& params, std::size_t k, std::uint64_t seed,
                        const TrainOptions& options = {});

/// Hyperparameter lattice, enumerated as criterion, max_depth, max_features,
/// min_samples_split, bootstrap (outermost first).
struct ParamGrid {
  std::vector<Criterion> criteria;
  std::vector<std::optional<int>> max_depth;
  std::vector<std::optional<std::size_t>> max_features;
  std::vector<std::size_t> min_samples_split;
  std::vector<bool> bootstrap;
  std::size_t n_trees = 100;

  /// max_depth {1,3,4,5,10,None}: 288 points.
  static ParamGrid defaults();
  /// max_depth {3,5,10,None}: 192 points.
  static ParamGrid compact();
  /// JSON object with any of the list keys above plus n_trees; null means None.
  /// Throws InvalidArgument.
  static ParamGrid from_json(std::string_view json_text);
  static ParamGrid load(const std::filesystem::path& path);

  std::size_t size() const noexcept;
  std::vector<HyperParams> enumerate() const;
};

/// Index of the first maximum. Throws EmptyGrid on empty input.
std::size_t select_best(const std::vector<double>& scores);

struct SearchOptions {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  TrainOptions train;
};

struct SearchResult {
  HyperParams best_params;
  double best_cv_accuracy = 0.0;
  std::vector<HyperParams> evaluated;
  std::vector<double> scores;
  ForestModel model;  // retrained on all rows with best_params
};

/// Throws EmptyGrid.
SearchResult grid_search(const Dataset& data, const ParamGrid& grid, const SearchOptions& options = {});
/// Samples n_samples lattice points without replacement, evaluates them in
/// enumeration order. Throws EmptyGrid or InvalidArgument.
SearchResult random_search(const Dataset& data, const ParamGrid& grid, std::size_t n_samples,
                           const SearchOptions& options = {});

/// Indented text rendering, one node per line. See README for the format.
std::string export_tree(const Tree& tree, const std::vector<std::string>& feature_names,
                        Criterion criterion = Criterion::Gini);

std::string model_to_json(const ForestModel& model);
/// Throws InvalidModel.
ForestModel model_from_json(std::string_view json_text);
void save_model(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_model(const std::filesystem::path& path);

}  // namespace labelforge
