#include "labelforge/forest.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "labelforge/error.hpp"

namespace labelforge {

using Json = nlohmann::ordered_json;

namespace {

constexpr double kMinDecrease = 1e-12;

// std distributions are implementation-defined; draw from the engine directly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

 private:
  std::mt19937_64 engine_;
};

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

unsigned resolve_threads(unsigned requested, std::size_t jobs) {
  unsigned t = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(1, jobs)));
}

template <class Fn>
void parallel_for(std::size_t jobs, unsigned threads, Fn&& fn) {
  threads = resolve_threads(threads, jobs);
  if (threads <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double decrease = 0.0;
};

double split_threshold(double lo, double hi) {
  const double mid = std::midpoint(lo, hi);
  return mid < hi ? mid : lo;
}

std::vector<std::size_t> sample_features(std::size_t n_features, const std::optional<std::size_t>& max_features,
                                         Rng& rng) {
  std::vector<std::size_t> all(n_features);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (!max_features || *max_features >= n_features) return all;
  const std::size_t m = *max_features;
  for (std::size_t i = 0; i < m; ++i) std::swap(all[i], all[i + rng.below(n_features - i)]);
  all.resize(m);
  std::sort(all.begin(), all.end());
  return all;
}

Split best_split(const Dataset& data, const std::vector<std::size_t>& rows,
                 const std::vector<std::size_t>& features, ClassCounts counts, Criterion criterion) {
  const double parent = impurity(counts, criterion);
  const double n = static_cast<double>(rows.size());
  Split best;
  std::vector<std::pair<double, Label>> column(rows.size());
  for (auto f : features) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      column[i] = {data.values[rows[i] * data.n_features + f], data.labels[rows[i]]};
    }
    std::sort(column.begin(), column.end());
    if (column.front().first == column.back().first) continue;
    ClassCounts left;
    for (std::size_t i = 0; i + 1 < column.size(); ++i) {
      left.add(column[i].second);
      if (column[i].first == column[i + 1].first) continue;
      const ClassCounts right{counts.benign - left.benign, counts.malicious - left.malicious};
      const double weighted = (static_cast<double>(left.total()) * impurity(left, criterion) +
                               static_cast<double>(right.total()) * impurity(right, criterion)) / n;
      const double decrease = parent - weighted;
      if (decrease <= kMinDecrease) continue;
      if (best.feature < 0 || decrease > best.decrease + kMinDecrease) {
        best = {static_cast<int>(f), split_threshold(column[i].first, column[i + 1].first), decrease};
      }
    }
  }
  return best;
}

Tree preorder(const Tree& t) {
  Tree out;
  out.nodes.reserve(t.nodes.size());
  struct Item {
    int old;
    int parent;
    bool is_left;
  };
  std::vector<Item> stack{{0, -1, false}};
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    const int idx = static_cast<int>(out.nodes.size());
    out.nodes.push_back(t.nodes[it.old]);
    if (it.parent >= 0) (it.is_left ? out.nodes[it.parent].left : out.nodes[it.parent].right) = idx;
    const auto& node = t.nodes[it.old];
    if (!node.is_leaf()) {
      stack.push_back({node.right, idx, false});
      stack.push_back({node.left, idx, true});
    }
  }
  return out;
}

Tree grow(const Dataset& data, std::vector<std::size_t> rows, const HyperParams& params, Rng& rng) {
  struct Pending {
    int node;
    std::vector<std::size_t> rows;
    int depth;
  };
  Tree t;
  t.nodes.emplace_back();
  std::vector<Pending> stack;
  stack.push_back({0, std::move(rows), 0});
  while (!stack.empty()) {
    Pending p = std::move(stack.back());
    stack.pop_back();
    ClassCounts c;
    for (auto r : p.rows) c.add(data.labels[r]);
    t.nodes[p.node].counts = c;

    if ((params.max_depth && p.depth >= *params.max_depth) || p.rows.size() < params.min_samples_split ||
        c.benign == 0 || c.malicious == 0) {
      continue;
    }
    const auto features = sample_features(data.n_features, params.max_features, rng);
    const Split s = best_split(data, p.rows, features, c, params.criterion);
    if (s.feature < 0) continue;

    std::vector<std::size_t> left, right;
    for (auto r : p.rows) {
      (data.values[r * data.n_features + s.feature] <= s.threshold ? left : right).push_back(r);
    }
    const int l = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    t.nodes.emplace_back();
    auto& node = t.nodes[p.node];
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = l;
    node.right = l + 1;
    stack.push_back({l + 1, std::move(right), p.depth + 1});
    stack.push_back({l, std::move(left), p.depth + 1});
  }
  return preorder(t);
}

void check_trainable(const Dataset& data, const HyperParams& params) {
  params.validate();
  if (data.size() == 0) throw Error(ErrorCode::EmptyTrainingSet, "no training samples");
  if (data.n_features == 0) throw Error(ErrorCode::SchemaMismatch, "vectors have no features");
  if (data.values.size() != data.size() * data.n_features) {
    throw Error(ErrorCode::SchemaMismatch, "matrix size does not match n_features");
  }
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.n_features = data.n_features;
  out.schema_id = data.schema_id;
  out.values.reserve(rows.size() * data.n_features);
  for (auto r : rows) {
    auto x = data.row(r);
    out.values.insert(out.values.end(), x.begin(), x.end());
    out.labels.push_back(data.labels[r]);
  }
  return out;
}

}  // namespace

std::string_view to_string(Criterion c) noexcept { return c == Criterion::Gini ? "gini" : "entropy"; }

Criterion parse_criterion(std::string_view text) {
  if (text == "gini") return Criterion::Gini;
  if (text == "entropy") return Criterion::Entropy;
  throw Error(ErrorCode::InvalidArgument, "unknown criterion '" + std::string(text) + "'");
}

double gini(ClassCounts c) {
  if (c.benign < 0 || c.malicious < 0 || c.total() == 0) throw Error(ErrorCode::EmptyNode, "no samples");
  const double n = static_cast<double>(c.total());
  const double pb = static_cast<double>(c.benign) / n;
  const double pm = static_cast<double>(c.malicious) / n;
  return 1.0 - pb * pb - pm * pm;
}

double entropy(ClassCounts c) {
  if (c.benign < 0 || c.malicious < 0 || c.total() == 0) throw Error(ErrorCode::EmptyNode, "no samples");
  const double n = static_cast<double>(c.total());
  double h = 0.0;
  for (auto k : {c.benign, c.malicious}) {
    if (k == 0) continue;
    const double p = static_cast<double>(k) / n;
    h -= p * std::log2(p);
  }
  return h;
}

double impurity(ClassCounts c, Criterion criterion) {
  return criterion == Criterion::Gini ? gini(c) : entropy(c);
}

void HyperParams::validate() const {
  if (max_depth && *max_depth < 1) throw Error(ErrorCode::InvalidArgument, "max_depth must be positive");
  if (max_features && *max_features < 1) throw Error(ErrorCode::InvalidArgument, "max_features must be positive");
  if (min_samples_split < 2) throw Error(ErrorCode::InvalidArgument, "min_samples_split must be at least 2");
  if (n_trees < 1) throw Error(ErrorCode::InvalidArgument, "n_trees must be positive");
}

std::string HyperParams::describe() const {
  std::ostringstream out;
  out << "criterion=" << to_string(criterion) << " max_depth=";
  if (max_depth) out << *max_depth; else out << "None";
  out << " max_features=";
  if (max_features) out << *max_features; else out << "None";
  out << " min_samples_split=" << min_samples_split << " bootstrap=" << (bootstrap ? "true" : "false");
  return out.str();
}

Label Tree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].prediction();
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  int deepest = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[i].is_leaf()) {
      stack.emplace_back(nodes[i].left, d + 1);
      stack.emplace_back(nodes[i].right, d + 1);
    }
  }
  return deepest;
}

Dataset Dataset::from_vectors(const std::vector<FeatureVector>& x, const std::vector<Label>& y) {
  if (x.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "vector and label counts differ");
  if (x.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training samples");
  Dataset d;
  d.n_features = x.front().values.size();
  d.schema_id = x.front().schema_id;
  d.values.reserve(x.size() * d.n_features);
  for (const auto& v : x) {
    if (v.values.size() != d.n_features || v.schema_id != d.schema_id) {
      throw Error(ErrorCode::SchemaMismatch, "feature vectors do not share a schema");
    }
    d.values.insert(d.values.end(), v.values.begin(), v.values.end());
  }
  d.labels = y;
  return d;
}

Dataset Dataset::from_rows(const std::vector<std::vector<double>>& x, const std::vector<Label>& y) {
  std::vector<FeatureVector> vectors;
  vectors.reserve(x.size());
  for (const auto& row : x) vectors.push_back({row, {}});
  return from_vectors(vectors, y);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Tree train_tree(const Dataset& data, const HyperParams& params, std::uint64_t rng_seed) {
  check_trainable(data, params);
  Rng rng(rng_seed);
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return grow(data, std::move(rows), params, rng);
}

ForestModel train_forest(const Dataset& data, const HyperParams& params, std::uint64_t seed,
                         const TrainOptions& options) {
  check_trainable(data, params);
  ForestModel model;
  model.params = params;
  model.n_features = data.n_features;
  model.seed = seed;
  model.trees.resize(params.n_trees);
  const std::size_t n = data.size();
  parallel_for(params.n_trees, options.threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      for (auto& r : rows) r = rng.below(n);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    model.trees[i] = grow(data, std::move(rows), params, rng);
  });
  return model;
}

Label predict(const ForestModel& model, std::span<const double> x) {
  if (x.size() != model.n_features) {
    throw Error(ErrorCode::SchemaMismatch, "expected " + std::to_string(model.n_features) + " features, got " +
                                               std::to_string(x.size()));
  }
  std::size_t malicious = 0;
  for (const auto& t : model.trees) malicious += t.predict(x) == Label::Malicious ? 1 : 0;
  return 2 * malicious > model.trees.size() ? Label::Malicious : Label::Benign;
}

Label predict(const ForestModel& model, const FeatureVector& x) {
  if (model.schema && !x.schema_id.empty() && x.schema_id != model.schema->id()) {
    throw Error(ErrorCode::SchemaMismatch, "vector schema " + x.schema_id + " does not match model schema " +
                                               model.schema->id());
  }
  return predict(model, std::span<const double>(x.values));
}

std::vector<double> feature_importances(const ForestModel& model) {
  std::vector<double> total(model.n_features, 0.0);
  const auto criterion = model.params.criterion;
  for (const auto& t : model.trees) {
    std::vector<double> imp(model.n_features, 0.0);
    for (const auto& node : t.nodes) {
      if (node.is_leaf()) continue;
      const auto& l = t.nodes[node.left].counts;
      const auto& r = t.nodes[node.right].counts;
      imp[node.feature] += static_cast<double>(node.counts.total()) * impurity(node.counts, criterion) -
                           static_cast<double>(l.total()) * impurity(l, criterion) -
                           static_cast<double>(r.total()) * impurity(r, criterion);
    }
    const double sum = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (sum <= 0.0) continue;
    for (std::size_t f = 0; f < imp.size(); ++f) total[f] += imp[f] / sum;
  }
  const double sum = std::accumulate(total.begin(), total.end(), 0.0);
  if (sum > 0.0) {
    for (auto& v : total) v /= sum;
  }
  return total;
}

ForestLabeler::ForestLabeler(std::shared_ptr<const ForestModel> model, std::string name)
    : model_(std::move(model)), name_(std::move(name)) {
  if (!model_ || !model_->schema) throw Error(ErrorCode::InvalidModel, "model carries no feature schema");
}

Label ForestLabeler::label(const ScanSnapshot& snapshot) const {
  return predict(*model_, extract(snapshot, *model_->schema));
}

double mean_accuracy(const std::vector<FoldScore>& folds) {
  if (folds.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& f : folds) sum += f.accuracy();
  return sum / static_cast<double>(folds.size());
}

std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<Label>& labels, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least two folds");
  if (labels.size() < k) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(labels.size()) + " samples for " + std::to_string(k) +
                                              " folds");
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t offset = 0;
  for (Label cls : {Label::Benign, Label::Malicious}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    shuffle(members, rng);
    for (std::size_t j = 0; j < members.size(); ++j) folds[(offset + j) % k].push_back(members[j]);
    offset = (offset + members.size()) % k;
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

CvResult cross_validate(const Dataset& data, const HyperParams& params, std::size_t k, std::uint64_t seed,
                        const TrainOptions& options) {
  const auto folds = stratified_folds(data.labels, k, seed);
  CvResult result;
  std::vector<char> held(data.size());
  for (std::size_t f = 0; f < k; ++f) {
    std::fill(held.begin(), held.end(), 0);
    for (auto i : folds[f]) held[i] = 1;
    std::vector<std::size_t> train_rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!held[i]) train_rows.push_back(i);
    }
    const auto model = train_forest(subset(data, train_rows), params, derive_seed(seed, f), options);
    FoldScore score;
    for (auto i : folds[f]) {
      score.correct += predict(model, data.row(i)) == data.labels[i] ? 1 : 0;
      ++score.total;
    }
    result.folds.push_back(score);
  }
  result.mean_accuracy = mean_accuracy(result.folds);
  return result;
}

ParamGrid ParamGrid::defaults() {
  ParamGrid g = compact();
  g.max_depth = {1, 3, 4, 5, 10, std::nullopt};
  return g;
}

ParamGrid ParamGrid::compact() {
  ParamGrid g;
  g.criteria = {Criterion::Gini, Criterion::Entropy};
  g.max_depth = {3, 5, 10, std::nullopt};
  g.max_features = {3, 5, 10, std::nullopt};
  g.min_samples_split = {2, 3, 10};
  g.bootstrap = {true, false};
  return g;
}

ParamGrid ParamGrid::from_json(std::string_view json_text) {
  Json j = Json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::InvalidArgument, "grid must be a JSON object");
  ParamGrid g = defaults();
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "n_trees") {
        g.n_trees = value.get<std::size_t>();
        continue;
      }
      if (!value.is_array()) throw Error(ErrorCode::InvalidArgument, "grid key '" + key + "' must be a list");
      if (key == "criterion") {
        g.criteria.clear();
        for (const auto& v : value) g.criteria.push_back(parse_criterion(v.get<std::string>()));
      } else if (key == "max_depth") {
        g.max_depth.clear();
        for (const auto& v : value) {
          g.max_depth.push_back(v.is_null() ? std::nullopt : std::optional<int>(v.get<int>()));
        }
      } else if (key == "max_features") {
        g.max_features.clear();
        for (const auto& v : value) {
          g.max_features.push_back(v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>()));
        }
      } else if (key == "min_samples_split") {
        g.min_samples_split = value.get<std::vector<std::size_t>>();
      } else if (key == "bootstrap") {
        g.bootstrap = value.get<std::vector<bool>>();
      } else {
        throw Error(ErrorCode::InvalidArgument, "unknown grid key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad grid: ") + e.what());
  }
  for (const auto& p : g.enumerate()) p.validate();
  return g;
}

ParamGrid ParamGrid::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::size_t ParamGrid::size() const noexcept {
  return criteria.size() * max_depth.size() * max_features.size() * min_samples_split.size() *
         bootstrap.size();
}

std::vector<HyperParams> ParamGrid::enumerate() const {
  std::vector<HyperParams> out;
  out.reserve(size());
  for (auto c : criteria)
    for (const auto& d : max_depth)
      for (const auto& f : max_features)
        for (auto m : min_samples_split)
          for (bool b : bootstrap) out.push_back({c, d, f, m, b, n_trees});
  return out;
}

std::size_t select_best(const std::vector<double>& scores) {
  if (scores.empty()) throw Error(ErrorCode::EmptyGrid, "no candidate scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

namespace {

SearchResult evaluate_points(const Dataset& data, std::vector<HyperParams> points, const SearchOptions& options) {
  if (points.empty()) throw Error(ErrorCode::EmptyGrid, "hyperparameter grid is empty");
  SearchResult r;
  for (const auto& p : points) {
    r.scores.push_back(cross_validate(data, p, options.k, options.seed, options.train).mean_accuracy);
  }
  const auto best = select_best(r.scores);
  r.best_params = points[best];
  r.best_cv_accuracy = r.scores[best];
  r.evaluated = std::move(points);
  r.model = train_forest(data, r.best_params, options.seed, options.train);
  r.model.training_meta.cv_accuracy = r.best_cv_accuracy;
  return r;
}

}  // namespace

SearchResult grid_search(const Dataset& data, const ParamGrid& grid, const SearchOptions& options) {
  return evaluate_points(data, grid.enumerate(), options);
}

SearchResult random_search(const Dataset& data, const ParamGrid& grid, std::size_t n_samples,
                           const SearchOptions& options) {
  if (n_samples == 0) throw Error(ErrorCode::InvalidArgument, "n_samples must be positive");
  const auto all = grid.enumerate();
  if (all.empty()) throw Error(ErrorCode::EmptyGrid, "hyperparameter grid is empty");
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t m = std::min(n_samples, all.size());
  Rng rng(derive_seed(options.seed, 0x5a17));
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + rng.below(all.size() - i)]);
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  std::vector<HyperParams> points;
  for (auto i : idx) points.push_back(all[i]);
  return evaluate_points(data, std::move(points), options);
}

namespace {

std::string format_impurity(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

std::string format_number(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

std::string export_tree(const Tree& tree, const std::vector<std::string>& feature_names, Criterion criterion) {
  std::ostringstream out;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty() && !tree.nodes.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    const auto& n = tree.nodes[i];
    out << std::string(static_cast<std::size_t>(2 * d), ' ') << "node " << i << " [depth " << d << "] ";
    if (n.is_leaf()) {
      out << "leaf -> " << to_string(n.prediction());
    } else {
      const auto f = static_cast<std::size_t>(n.feature);
      out << (f < feature_names.size() ? feature_names[f] : "x[" + std::to_string(f) + "]") << " <= "
          << format_number(n.threshold);
      stack.emplace_back(n.right, d + 1);
      stack.emplace_back(n.left, d + 1);
    }
    out << " (" << to_string(criterion) << "=" << format_impurity(impurity(n.counts, criterion))
        << ", samples=" << n.counts.total() << ", value=[" << n.counts.benign << ", " << n.counts.malicious
        << "])\n";
  }
  return out.str();
}

namespace {

Json node_to_json(const Tree& t, int i) {
  const auto& n = t.nodes[i];
  Json j = Json::object();
  if (!n.is_leaf()) {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
  }
  j["counts"] = {n.counts.benign, n.counts.malicious};
  if (n.is_leaf()) {
    j["label"] = to_string(n.prediction());
  } else {
    j["left"] = node_to_json(t, n.left);
    j["right"] = node_to_json(t, n.right);
  }
  return j;
}

[[noreturn]] void bad_model(const std::string& msg) { throw Error(ErrorCode::InvalidModel, msg); }

int node_from_json(const Json& j, std::size_t n_features, Tree& t) {
  if (!j.is_object()) bad_model("tree node must be an object");
  const int idx = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  const auto& c = j.at("counts");
  if (!c.is_array() || c.size() != 2) bad_model("counts must be [benign, malicious]");
  ClassCounts counts{c[0].get<std::int64_t>(), c[1].get<std::int64_t>()};
  if (counts.benign < 0 || counts.malicious < 0 || counts.total() == 0) bad_model("invalid class counts");
  t.nodes[idx].counts = counts;
  if (!j.contains("feature")) return idx;

  const int feature = j.at("feature").get<int>();
  if (feature < 0 || static_cast<std::size_t>(feature) >= n_features) bad_model("feature index out of range");
  const double threshold = j.at("threshold").get<double>();
  const int left = node_from_json(j.at("left"), n_features, t);
  const int right = node_from_json(j.at("right"), n_features, t);
  auto& node = t.nodes[idx];
  node.feature = feature;
  node.threshold = threshold;
  node.left = left;
  node.right = right;
  const auto& lc = t.nodes[left].counts;
  const auto& rc = t.nodes[right].counts;
  if (lc.benign + rc.benign != counts.benign || lc.malicious + rc.malicious != counts.malicious) {
    bad_model("split counts differ from the sum of its children");
  }
  return idx;
}

template <class T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

std::string model_to_json(const ForestModel& model) {
  Json j = Json::object();
  j["format_version"] = 1;
  j["schema"] = model.schema ? Json::parse(schema_to_json(*model.schema)) : Json(nullptr);
  j["n_features"] = model.n_features;
  Json p = Json::object();
  p["criterion"] = to_string(model.params.criterion);
  p["max_depth"] = optional_json(model.params.max_depth);
  p["max_features"] = optional_json(model.params.max_features);
  p["min_samples_split"] = model.params.min_samples_split;
  p["bootstrap"] = model.params.bootstrap;
  p["n_trees"] = model.params.n_trees;
  j["params"] = p;
  j["seed"] = model.seed;
  Json meta = Json::object();
  meta["dataset"] = model.training_meta.dataset;
  meta["date"] = model.training_meta.date;
  meta["cv_accuracy"] = optional_json(model.training_meta.cv_accuracy);
  j["training_meta"] = meta;
  Json trees = Json::array();
  for (const auto& t : model.trees) trees.push_back(node_to_json(t, 0));
  j["trees"] = std::move(trees);
  return j.dump();
}

ForestModel model_from_json(std::string_view json_text) {
  Json j = Json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) bad_model("model must be a JSON object");
  ForestModel m;
  try {
    if (j.at("format_version").get<int>() != 1) bad_model("unsupported format_version");
    if (!j.at("schema").is_null()) {
      try {
        m.schema = schema_from_json(j["schema"].dump());
      } catch (const Error& e) {
        bad_model(e.what());
      }
    }
    m.n_features = j.at("n_features").get<std::size_t>();
    if (m.schema && m.schema->length() != m.n_features) bad_model("n_features disagrees with the schema");
    const auto& p = j.at("params");
    m.params.criterion = parse_criterion(p.at("criterion").get<std::string>());
    if (!p.at("max_depth").is_null()) m.params.max_depth = p["max_depth"].get<int>();
    if (!p.at("max_features").is_null()) m.params.max_features = p["max_features"].get<std::size_t>();
    m.params.min_samples_split = p.at("min_samples_split").get<std::size_t>();
    m.params.bootstrap = p.at("bootstrap").get<bool>();
    m.params.n_trees = p.at("n_trees").get<std::size_t>();
    m.params.validate();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& meta = j.at("training_meta");
    m.training_meta.dataset = meta.value("dataset", "");
    m.training_meta.date = meta.value("date", "");
    if (meta.contains("cv_accuracy") && !meta["cv_accuracy"].is_null()) {
      m.training_meta.cv_accuracy = meta["cv_accuracy"].get<double>();
    }
    for (const auto& t : j.at("trees")) {
      Tree tree;
      node_from_json(t, m.n_features, tree);
      m.trees.push_back(std::move(tree));
    }
  } catch (const nlohmann::json::exception& e) {
    bad_model(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidModel) throw;
    bad_model(e.what());
  }
  if (m.trees.size() != m.params.n_trees) bad_model("tree count differs from n_trees");
  return m;
}

void save_model(const ForestModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << model_to_json(model) << '\n';
}

ForestModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace labelforge
