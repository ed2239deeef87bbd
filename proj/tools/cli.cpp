#include "cli.hpp"

#include <charconv>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>

#include <CLI11.hpp>

#include "labelforge/error.hpp"
#include "labelforge/features.hpp"
#include "labelforge/forest.hpp"
#include "labelforge/metrics.hpp"
#include "labelforge/report_service.hpp"
#include "labelforge/store.hpp"
#include "labelforge/strategies.hpp"
#include "labelforge/threshold_search.hpp"
#include "labelforge/time.hpp"
#include "labelforge/vt_client.hpp"

namespace fs = std::filesystem;

namespace labelforge {
namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fmt_value(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// Writes to --out when given, else to the caller's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (path.empty()) return;
    file_.open(path, std::ios::trunc | std::ios::binary);
    if (!file_) throw Error(ErrorCode::IoError, "cannot write " + path);
    stream_ = &file_;
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

Store open_existing(const std::string& path) {
  if (!fs::is_directory(path)) throw Error(ErrorCode::IoError, "store not found: " + path);
  return Store::open(path);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

// "D1,D2,..." or "A..B" (every scan day of the manifest apps inside [A, B]).
std::vector<Date> resolve_dates(const Store& store, const DatasetManifest& manifest, const std::string& spec) {
  std::vector<Date> dates;
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    const Date from = parse_date(spec.substr(0, dots));
    const Date to = parse_date(spec.substr(dots + 2));
    for (const auto d : store.scan_days(manifest)) {
      if (d >= from && d <= to) dates.push_back(d);
    }
    if (dates.empty()) throw Error(ErrorCode::InvalidArgument, "no scan days in " + spec);
    return dates;
  }
  for (const auto& part : split(spec, ',')) dates.push_back(parse_date(part));
  return dates;
}

Date single_date(const std::string& spec) {
  if (spec.find("..") != std::string::npos || spec.find(',') != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "expected a single --as-of date, got " + spec);
  }
  return parse_date(spec);
}

struct ClientFlags {
  std::string base_url = "http://127.0.0.1:8585";
  std::string flavor = "native";
  std::uint64_t daily = 20'000;
  std::uint64_t per_minute = 4;
  std::int64_t poll_interval = 240;
  int max_polls = 10;

  void attach(CLI::App* cmd) {
    cmd->add_option("--base-url", base_url, "API base URL")->capture_default_str();
    cmd->add_option("--flavor", flavor, "native or vt2")->check(CLI::IsMember({"native", "vt2"}))->capture_default_str();
    cmd->add_option("--daily-quota", daily)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--per-minute", per_minute)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--poll-interval", poll_interval, "seconds between report polls")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--max-polls", max_polls)->check(CLI::PositiveNumber)->capture_default_str();
  }

  ClientConfig config() const {
    ClientConfig c = ClientConfig::from_env();
    c.base_url = base_url;
    c.flavor = flavor == "vt2" ? ApiFlavor::VirusTotalV2 : ApiFlavor::Native;
    c.daily_quota = daily;
    c.per_minute_quota = per_minute;
    c.rescan_poll_interval = std::chrono::seconds(poll_interval);
    c.max_poll_attempts = max_polls;
    return c;
  }
};

struct SchemaFlags {
  std::string kind = "engineered";
  std::string path;
  CLI::Option* kind_opt = nullptr;

  void attach(CLI::App* cmd) {
    kind_opt = cmd->add_option("--features", kind, "engineered or naive")
                   ->check(CLI::IsMember({"engineered", "naive"}))
                   ->capture_default_str();
    cmd->add_option("--schema", path, "feature schema JSON");
  }

  FeatureSchema resolve(const SnapshotMap& snapshots) const {
    const FeatureKind wanted = kind == "naive" ? FeatureKind::Naive : FeatureKind::Engineered;
    if (!path.empty()) {
      auto s = load_schema(path);
      if (kind_opt->count() > 0 && s.kind != wanted) {
        throw Error(ErrorCode::SchemaKindMismatch, "--features " + kind + " disagrees with " + path);
      }
      return s;
    }
    if (wanted == FeatureKind::Engineered) return FeatureSchema::engineered_default();
    std::vector<ScanSnapshot> all;
    for (const auto& [id, s] : snapshots) all.push_back(s);
    return FeatureSchema::naive(observed_scanners(all));
  }
};

struct Matrix {
  std::vector<std::string> ids;
  std::vector<FeatureVector> x;
  std::vector<Label> y;
};

Matrix build_matrix(const SnapshotMap& snapshots, const DatasetManifest& manifest, const FeatureSchema& schema,
                    std::ostream& err) {
  Matrix m;
  UnknownVocabulary unknown;
  for (const auto& [id, entry] : manifest.entries) {
    const auto& snap = snapshots.at(id);
    const auto u = count_unknown_vocabulary(snap, schema);
    unknown.permissions += u.permissions;
    unknown.tags += u.tags;
    m.ids.push_back(id);
    m.x.push_back(extract(snap, schema));
    m.y.push_back(entry.truth.value);
  }
  if (unknown.permissions + unknown.tags > 0) {
    err << "note: " << unknown.permissions << " permission and " << unknown.tags
        << " tag occurrences are outside the schema vocabulary\n";
  }
  return m;
}

std::unique_ptr<Labeler> model_labeler(const std::string& path) {
  auto model = std::make_shared<const ForestModel>(load_model(path));
  return std::make_unique<ForestLabeler>(model, "forest:" + fs::path(path).stem().string());
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label apps from antivirus scan reports", "labelforge"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string store_path, manifest_path, as_of, out_path;
  auto store_opt = [&](CLI::App* cmd) { cmd->add_option("--store", store_path, "store directory")->required(); };
  auto manifest_opt = [&](CLI::App* cmd, bool required) {
    auto* o = cmd->add_option("--manifest", manifest_path, "ground-truth CSV");
    if (required) o->required();
  };
  auto as_of_opt = [&](CLI::App* cmd) {
    cmd->add_option("--as-of", as_of, "dates D1,D2,... or range A..B")->required();
  };
  auto out_opt = [&](CLI::App* cmd) { cmd->add_option("--out", out_path, "write the table here"); };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Add JSONL scan reports to a store");
  std::vector<std::string> ingest_files;
  store_opt(ingest);
  ingest->add_option("files", ingest_files, "JSONL files, - for stdin")->required();
  out_opt(ingest);

  // scanner-correctness
  auto* correctness = app.add_subcommand("scanner-correctness", "Per-scanner agreement with ground truth");
  std::vector<std::string> scanners;
  std::string type_filter;
  double min_avg = 0.90;
  store_opt(correctness);
  manifest_opt(correctness, true);
  as_of_opt(correctness);
  correctness->add_option("--scanner", scanners, "restrict to these scanners");
  correctness->add_option("--type", type_filter, "only malicious apps of this malware type");
  correctness->add_option("--min-avg", min_avg, "mean correctness needed to count as correct")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  out_opt(correctness);

  // scanner-certainty
  auto* certainty = app.add_subcommand("scanner-certainty", "How consistently scanners keep their first verdict");
  std::vector<std::string> windows{"1y", "6m", "3m", "1m", "1w"};
  std::string anchor = "first_seen";
  store_opt(certainty);
  manifest_opt(certainty, false);
  certainty->add_option("--scanner", scanners, "scanners (default: the correct-scanner set)");
  certainty->add_option("--window", windows, "maximum gap between anchor and first scan")->capture_default_str();
  certainty->add_option("--anchor", anchor)->check(CLI::IsMember({"first_seen", "dex_date"}))->capture_default_str();
  out_opt(certainty);

  // stability
  auto* stability = app.add_subcommand("stability", "Date at which positives stopped changing");
  std::vector<std::string> app_ids;
  store_opt(stability);
  manifest_opt(stability, false);
  stability->add_option("--app", app_ids, "app ids (default: manifest or every app)");
  out_opt(stability);

  // find-threshold
  auto* find = app.add_subcommand("find-threshold", "Search the best positives threshold");
  std::string metric = "mcc", range = "1..60";
  bool table = false, refresh = false;
  ClientFlags find_client;
  store_opt(find);
  manifest_opt(find, true);
  find->add_option("--as-of", as_of, "dates D1,D2,... or range A..B");
  find->add_option("--metric", metric)->check(CLI::IsMember({"mcc", "accuracy"}))->capture_default_str();
  find->add_option("--range", range, "sigma range A..B")->capture_default_str();
  find->add_flag("--table", table, "print every sigma");
  find->add_flag("--refresh", refresh, "rescan every app through the API first");
  find_client.attach(find);
  out_opt(find);

  // extract-features
  auto* features = app.add_subcommand("extract-features", "Write feature vectors as CSV");
  SchemaFlags extract_schema;
  std::string schema_out;
  store_opt(features);
  manifest_opt(features, true);
  as_of_opt(features);
  extract_schema.attach(features);
  features->add_option("--schema-out", schema_out, "save the schema used");
  out_opt(features);

  // train
  auto* train = app.add_subcommand("train", "Train a random forest with hyperparameter search");
  SchemaFlags train_schema;
  std::string grid_spec = "default", search = "grid", model_path, trees_path;
  std::size_t samples = 20, folds = 10;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool select = false;
  std::optional<std::size_t> n_trees;
  store_opt(train);
  manifest_opt(train, true);
  as_of_opt(train);
  train_schema.attach(train);
  train->add_option("--grid", grid_spec, "default, compact or a grid JSON file")->capture_default_str();
  train->add_option("--search", search)->check(CLI::IsMember({"grid", "random"}))->capture_default_str();
  train->add_option("--samples", samples, "random-search points")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--folds", folds)->check(CLI::Range(2, 1000))->capture_default_str();
  train->add_option("--seed", seed)->capture_default_str();
  train->add_option("--threads", threads, "0 uses every core")->capture_default_str();
  train->add_option("--trees", n_trees, "override n_trees of the grid")->check(CLI::PositiveNumber);
  train->add_flag("--select", select, "keep features with at least mean importance, then search again");
  train->add_option("--model", model_path, "output model JSON")->required();
  train->add_option("--export-trees", trees_path, "write every tree as text");
  out_opt(train);

  // label
  auto* label_cmd = app.add_subcommand("label", "Label apps with a strategy or model");
  std::string strategy, label_model;
  store_opt(label_cmd);
  manifest_opt(label_cmd, false);
  as_of_opt(label_cmd);
  auto* strat_opt = label_cmd->add_option("--strategy", strategy, "vt>=N, vt>=P%, subset:drebin[:k=N]");
  auto* model_opt = label_cmd->add_option("--model", label_model, "trained model JSON");
  strat_opt->excludes(model_opt);
  out_opt(label_cmd);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score strategies against ground truth");
  std::vector<std::string> strategies, models;
  store_opt(evaluate);
  manifest_opt(evaluate, true);
  as_of_opt(evaluate);
  evaluate->add_option("--strategy", strategies, "repeatable");
  evaluate->add_option("--model", models, "repeatable");
  out_opt(evaluate);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Serve stored report histories over HTTP");
  std::string bind = "127.0.0.1:8585", replay;
  store_opt(serve_cmd);
  serve_cmd->add_option("--bind", bind, "host:port")->capture_default_str();
  serve_cmd->add_option("--replay", replay, "replay script JSON");

  // fetch
  auto* fetch = app.add_subcommand("fetch", "Download reports into the store");
  ClientFlags fetch_client;
  bool do_rescan = false, wait_fresh = false;
  store_opt(fetch);
  manifest_opt(fetch, false);
  fetch->add_option("--app", app_ids, "app ids (default: manifest apps)");
  fetch->add_flag("--rescan", do_rescan, "request a rescan before downloading");
  fetch->add_flag("--wait", wait_fresh, "poll until a newer report appears");
  fetch_client.attach(fetch);
  out_opt(fetch);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    auto manifest = [&] { return load_manifest_file(manifest_path); };

    if (ingest->parsed()) {
      Store store = Store::open(store_path);
      Sink sink(out_path, out);
      *sink << "file,accepted,duplicates,warnings\n";
      for (const auto& f : ingest_files) {
        IngestReport r;
        if (f == "-") {
          r = store.ingest(std::cin);
        } else {
          std::ifstream in(f);
          if (!in) throw Error(ErrorCode::IoError, "cannot open " + f);
          r = store.ingest(in);
        }
        for (const auto& w : r.warnings) err << f << ": " << w << '\n';
        *sink << f << ',' << r.accepted << ',' << r.duplicates << ',' << r.warnings.size() << '\n';
      }
      return 0;
    }

    if (correctness->parsed()) {
      const Store store = open_existing(store_path);
      const auto truth = manifest();
      const auto dates = resolve_dates(store, truth, as_of);
      std::vector<SnapshotMap> snaps;
      std::set<std::string> names(scanners.begin(), scanners.end());
      for (auto d : dates) {
        snaps.push_back(store.snapshots_at(truth, d));
        if (scanners.empty()) {
          for (const auto& [id, s] : snaps.back()) {
            for (const auto& r : s.verdicts) names.insert(r.name);
          }
        }
      }
      const std::optional<std::string> filter =
          type_filter.empty() ? std::nullopt : std::optional<std::string>(type_filter);
      Sink sink(out_path, out);
      *sink << "scanner";
      for (auto d : dates) *sink << ',' << format_date(d);
      *sink << ",mean,correct\n";
      for (const auto& name : names) {
        double sum = 0.0;
        *sink << name;
        for (const auto& s : snaps) {
          const double c = scanner_correctness(s, truth, name, filter);
          sum += c;
          *sink << ',' << fmt3(c);
        }
        const double mean = sum / static_cast<double>(snaps.size());
        *sink << ',' << fmt3(mean) << ',' << (mean >= min_avg ? "yes" : "no") << '\n';
      }
      return 0;
    }

    if (certainty->parsed()) {
      const Store store = open_existing(store_path);
      std::vector<std::string> ids;
      std::map<std::string, Timestamp> dex_dates;
      if (!manifest_path.empty()) {
        for (const auto& [id, e] : manifest().entries) {
          ids.push_back(id);
          if (e.dex_date) dex_dates[id] = *e.dex_date;
        }
      } else {
        ids = store.app_ids();
      }
      std::vector<AppHistory> histories;
      for (const auto& id : ids) histories.push_back(store.history(id));
      const auto& names = scanners.empty() ? default_correct_scanners() : scanners;
      const auto a = anchor == "dex_date" ? CertaintyAnchor::DexDate : CertaintyAnchor::FirstSeen;
      Sink sink(out_path, out);
      *sink << "scanner,anchor,window,mean,std,n_apps\n";
      for (const auto& name : names) {
        for (const auto& w : windows) {
          const auto gap = parse_window(w);
          *sink << name << ',' << anchor << ',' << w << ',';
          try {
            const auto s = scanner_certainty(histories, name, a, gap, dex_dates);
            *sink << fmt3(s.mean) << ',' << fmt3(s.std) << ',' << s.n_apps << '\n';
          } catch (const Error& e) {
            if (e.code() != ErrorCode::NoQualifyingApps) throw;
            *sink << ",,0\n";
          }
        }
      }
      return 0;
    }

    if (stability->parsed()) {
      const Store store = open_existing(store_path);
      std::vector<std::string> ids = app_ids;
      if (ids.empty() && !manifest_path.empty()) {
        for (const auto& [id, e] : manifest().entries) ids.push_back(id);
      }
      if (ids.empty()) ids = store.app_ids();
      Sink sink(out_path, out);
      *sink << "app_id,snapshots,stability_date,stable_thereafter,delta_mismatches\n";
      for (const auto& id : ids) {
        const auto h = store.history(id);
        const auto r = stability_date(h);
        *sink << id << ',' << h.snapshots.size() << ',' << (r.date ? format_date(day_of(*r.date)) : "")
              << ',' << (r.stable_thereafter ? "true" : "false") << ','
              << positives_delta_mismatches(h).size() << '\n';
      }
      return 0;
    }

    if (find->parsed()) {
      const auto m = parse_metric(metric);
      const auto sigma = SigmaRange::parse(range);
      Store store = open_existing(store_path);
      const auto truth = manifest();
      std::vector<std::pair<std::string, ThresholdSearchResult>> results;
      if (refresh) {
        VtClient client(find_client.config());
        auto r = refresh_and_find(client, store, truth, m, sigma);
        for (const auto& f : r.refresh.failures) {
          err << "skipped " << f.app_id << ": " << f.message << '\n';
        }
        results.emplace_back("refreshed", std::move(r.result));
      } else {
        if (as_of.empty()) throw Error(ErrorCode::InvalidArgument, "--as-of is required without --refresh");
        for (auto d : resolve_dates(store, truth, as_of)) {
          results.emplace_back(format_date(d), find_optimal_threshold(store.snapshots_at(truth, d), truth, m, sigma));
        }
      }
      Sink sink(out_path, out);
      if (table) {
        *sink << "as_of,sigma," << metric << ",tp,fp,tn,fn\n";
        for (const auto& [label, r] : results) {
          for (const auto& [s, score] : r.score_table) {
            const auto& cm = r.confusion.at(s);
            *sink << label << ',' << s << ',' << fmt3(score) << ',' << cm.tp << ',' << cm.fp << ',' << cm.tn << ','
                  << cm.fn << '\n';
          }
        }
      } else {
        *sink << "as_of,best_sigma,best_" << metric << '\n';
        for (const auto& [label, r] : results) *sink << label << ',' << r.best_sigma << ',' << fmt3(r.best_score) << '\n';
      }
      return 0;
    }

    if (features->parsed()) {
      const Store store = open_existing(store_path);
      const auto truth = manifest();
      const auto snaps = store.snapshots_at(truth, single_date(as_of));
      const auto schema = extract_schema.resolve(snaps);
      if (!schema_out.empty()) save_schema(schema, schema_out);
      const auto mat = build_matrix(snaps, truth, schema, err);
      Sink sink(out_path, out);
      *sink << "app_id,label";
      for (const auto& n : schema.feature_names()) *sink << ',' << n;
      *sink << '\n';
      for (std::size_t i = 0; i < mat.ids.size(); ++i) {
        *sink << mat.ids[i] << ',' << to_string(mat.y[i]);
        for (double v : mat.x[i].values) *sink << ',' << fmt_value(v);
        *sink << '\n';
      }
      return 0;
    }

    if (train->parsed()) {
      const Store store = open_existing(store_path);
      const auto truth = manifest();
      const Date date = single_date(as_of);
      const auto snaps = store.snapshots_at(truth, date);
      auto schema = train_schema.resolve(snaps);
      ParamGrid grid = grid_spec == "default"   ? ParamGrid::defaults()
                       : grid_spec == "compact" ? ParamGrid::compact()
                                                : ParamGrid::load(grid_spec);
      if (n_trees) grid.n_trees = *n_trees;
      const SearchOptions opts{folds, seed, TrainOptions{threads}};
      auto run = [&](const Dataset& data) {
        return search == "random" ? random_search(data, grid, samples, opts) : grid_search(data, grid, opts);
      };

      auto mat = build_matrix(snaps, truth, schema, err);
      auto result = run(Dataset::from_vectors(mat.x, mat.y));
      if (select) {
        const auto selection = select_features(feature_importances(result.model), schema);
        for (auto& v : mat.x) v = project(v, selection);
        schema = selection.schema;
        result = run(Dataset::from_vectors(mat.x, mat.y));
      }
      ForestModel model = std::move(result.model);
      model.schema = schema;
      model.training_meta.dataset = truth.name;
      model.training_meta.date = format_date(date);
      save_model(model, model_path);
      if (!trees_path.empty()) {
        std::ofstream tf(trees_path, std::ios::trunc);
        if (!tf) throw Error(ErrorCode::IoError, "cannot write " + trees_path);
        const auto names = schema.feature_names();
        for (std::size_t i = 0; i < model.trees.size(); ++i) {
          tf << "tree " << i << '\n' << export_tree(model.trees[i], names, model.params.criterion);
        }
      }
      Sink sink(out_path, out);
      *sink << "params,cv_accuracy,n_features,points_evaluated\n"
            << result.best_params.describe() << ',' << fmt_value(result.best_cv_accuracy) << ','
            << model.n_features << ',' << result.evaluated.size() << '\n';
      return 0;
    }

    if (label_cmd->parsed()) {
      if (strategy.empty() == label_model.empty()) {
        throw CLI::RequiredError("exactly one of --strategy or --model");
      }
      const Store store = open_existing(store_path);
      const auto labeler = strategy.empty() ? model_labeler(label_model)
                                            : std::unique_ptr<Labeler>(new ThresholdStrategy(ThresholdStrategy::parse(strategy)));
      Sink sink(out_path, out);
      *sink << "app_id,as_of,label\n";
      if (!manifest_path.empty()) {
        const auto truth = manifest();
        for (auto d : resolve_dates(store, truth, as_of)) {
          for (const auto& [id, l] : apply_strategy(*labeler, store.snapshots_at(truth, d))) {
            *sink << id << ',' << format_date(d) << ',' << to_string(l) << '\n';
          }
        }
      } else {
        for (const auto& part : split(as_of, ',')) {
          const Date d = parse_date(part);
          for (const auto& id : store.app_ids()) {
            try {
              *sink << id << ',' << format_date(d) << ',' << to_string(labeler->label(store.snapshot_at(id, d)))
                    << '\n';
            } catch (const Error& e) {
              if (e.code() != ErrorCode::NoSnapshotBefore) throw;
            }
          }
        }
      }
      return 0;
    }

    if (evaluate->parsed()) {
      if (strategies.empty() && models.empty()) throw CLI::RequiredError("--strategy or --model");
      const Store store = open_existing(store_path);
      const auto truth = manifest();
      std::vector<std::unique_ptr<Labeler>> labelers;
      for (const auto& s : strategies) labelers.push_back(std::make_unique<ThresholdStrategy>(ThresholdStrategy::parse(s)));
      for (const auto& m : models) labelers.push_back(model_labeler(m));
      const auto dates = resolve_dates(store, truth, as_of);
      Sink sink(out_path, out);
      *sink << "strategy,as_of,mcc,recall,specificity,precision,accuracy,tp,fp,tn,fn\n";
      for (const auto& l : labelers) {
        for (auto d : dates) {
          const auto cm = confusion(apply_strategy(*l, store.snapshots_at(truth, d)), truth);
          *sink << l->name() << ',' << format_date(d) << ',' << fmt3(mcc(cm)) << ',' << fmt3(recall(cm)) << ','
                << fmt3(specificity(cm)) << ',' << fmt3(precision(cm)) << ',' << fmt3(accuracy(cm)) << ',' << cm.tp
                << ',' << cm.fp << ',' << cm.tn << ',' << cm.fn << '\n';
        }
      }
      return 0;
    }

    if (serve_cmd->parsed()) {
      Store store = open_existing(store_path);
      std::optional<ReplayScript> script;
      if (!replay.empty()) script = ReplayScript::load(replay);
      ReportService service(store, std::move(script));
      // Route SIGINT/SIGTERM to sigwait below; the server thread inherits the mask.
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      auto handle = serve(service, bind);
      err << "listening on " << handle.base_url() << std::endl;
      int sig = 0;
      sigwait(&signals, &sig);
      handle.stop();
      return 0;
    }

    if (fetch->parsed()) {
      Store store = Store::open(store_path);
      std::vector<std::string> ids = app_ids;
      if (ids.empty() && !manifest_path.empty()) {
        for (const auto& [id, e] : manifest().entries) ids.push_back(id);
      }
      if (ids.empty()) throw CLI::RequiredError("--app or --manifest");
      VtClient client(fetch_client.config());
      Sink sink(out_path, out);
      *sink << "app_id,status,scan_date,positives,total,new\n";
      std::size_t ok = 0;
      for (const auto& id : ids) {
        try {
          const auto baseline = store.latest(id);
          if (do_rescan && !client.rescan(id).accepted) {
            throw Error(ErrorCode::TransportError, "rescan not accepted");
          }
          const auto snap = client.fetch_report(
              id, wait_fresh, baseline ? std::optional<Timestamp>(baseline->scan_date) : std::nullopt);
          const bool added = store.add(snap);
          *sink << id << ",ok," << format_timestamp(snap.scan_date) << ',' << snap.positives << ',' << snap.total
                << ',' << (added ? "true" : "false") << '\n';
          ++ok;
        } catch (const Error& e) {
          err << id << ": " << e.what() << '\n';
          *sink << id << ',' << to_string(e.code()) << ",,,,\n";
        }
      }
      return ok == 0 ? 1 : 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace labelforge
