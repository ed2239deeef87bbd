#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>

#include "labelforge/error.hpp"
#include "labelforge/features.hpp"
#include "labelforge/forest.hpp"
#include "labelforge/metrics.hpp"
#include "labelforge/store.hpp"
#include "labelforge/strategies.hpp"
#include "labelforge/threshold_search.hpp"

namespace py = pybind11;
using namespace labelforge;

namespace {

Label label_from(bool malicious) { return malicious ? Label::Malicious : Label::Benign; }

HyperParams params_from(const py::dict& d) {
  HyperParams p;
  if (d.contains("criterion")) p.criterion = parse_criterion(d["criterion"].cast<std::string>());
  if (d.contains("max_depth") && !d["max_depth"].is_none()) p.max_depth = d["max_depth"].cast<int>();
  if (d.contains("max_features") && !d["max_features"].is_none()) {
    p.max_features = d["max_features"].cast<std::size_t>();
  }
  if (d.contains("min_samples_split")) p.min_samples_split = d["min_samples_split"].cast<std::size_t>();
  if (d.contains("bootstrap")) p.bootstrap = d["bootstrap"].cast<bool>();
  if (d.contains("n_trees")) p.n_trees = d["n_trees"].cast<std::size_t>();
  p.validate();
  return p;
}

Dataset dataset_from(const std::vector<std::vector<double>>& x, const std::vector<bool>& y) {
  std::vector<Label> labels;
  labels.reserve(y.size());
  for (bool v : y) labels.push_back(label_from(v));
  return Dataset::from_rows(x, labels);
}

}  // namespace

PYBIND11_MODULE(_labelforge, m) {
  m.doc() = "Scan-report labeling toolkit";

  static py::exception<Error> error_type(m, "LabelforgeError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::enum_<Label>(m, "Label").value("Benign", Label::Benign).value("Malicious", Label::Malicious);

  py::class_<ScanSnapshot>(m, "Snapshot")
      .def_readonly("app_id", &ScanSnapshot::app_id)
      .def_readonly("positives", &ScanSnapshot::positives)
      .def_readonly("total", &ScanSnapshot::total)
      .def_readonly("times_submitted", &ScanSnapshot::times_submitted)
      .def_readonly("positives_delta", &ScanSnapshot::positives_delta)
      .def_property_readonly("scan_date", [](const ScanSnapshot& s) { return format_timestamp(s.scan_date); })
      .def("verdict", [](const ScanSnapshot& s, const std::string& scanner) {
        return static_cast<int>(verdict_of(s, scanner));
      })
      .def("to_json", &serialize_snapshot);
  m.def("parse_snapshot", [](const std::string& text) { return parse_snapshot(text).snapshot; });

  py::class_<ConfusionMatrix>(m, "ConfusionMatrix")
      .def(py::init([](std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
             ConfusionMatrix c;
             c.tp = tp;
             c.fp = fp;
             c.tn = tn;
             c.fn = fn;
             return c;
           }),
           py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"))
      .def_readonly("tp", &ConfusionMatrix::tp)
      .def_readonly("fp", &ConfusionMatrix::fp)
      .def_readonly("tn", &ConfusionMatrix::tn)
      .def_readonly("fn", &ConfusionMatrix::fn);
  m.def("mcc", &mcc);
  m.def("recall", &recall);
  m.def("specificity", &specificity);
  m.def("precision", &precision);
  m.def("accuracy", &accuracy);

  py::class_<DatasetManifest>(m, "Manifest")
      .def_readonly("name", &DatasetManifest::name)
      .def("__len__", &DatasetManifest::size)
      .def("app_ids", [](const DatasetManifest& d) {
        std::vector<std::string> ids;
        for (const auto& [id, _] : d.entries) ids.push_back(id);
        return ids;
      })
      .def("is_malicious", [](const DatasetManifest& d, const std::string& id) {
        return d.entries.at(id).truth.value == Label::Malicious;
      });
  m.def("load_manifest", [](const std::filesystem::path& p) { return load_manifest_file(p); });

  py::class_<Store>(m, "Store")
      .def_static("open", &Store::open)
      .def_static("in_memory", &Store::in_memory)
      .def("ingest_file",
           [](Store& s, const std::filesystem::path& p) {
             std::ifstream in(p);
             if (!in) throw Error(ErrorCode::IoError, "cannot open " + p.string());
             const auto r = s.ingest(in);
             return py::make_tuple(r.accepted, r.duplicates, r.warnings);
           })
      .def("app_ids", &Store::app_ids)
      .def("snapshot_count", &Store::snapshot_count)
      .def("history", [](const Store& s, const std::string& id) { return s.history(id).snapshots; })
      .def("snapshot_at", [](const Store& s, const std::string& id, const std::string& day) {
        return s.snapshot_at(id, parse_date(day));
      });

  m.def(
      "find_optimal_threshold",
      [](const Store& store, const DatasetManifest& truth, const std::string& as_of, const std::string& metric,
         const std::string& range) {
        const auto r = find_optimal_threshold(store.snapshots_at(truth, parse_date(as_of)), truth,
                                              parse_metric(metric), SigmaRange::parse(range));
        py::dict out;
        out["best_sigma"] = r.best_sigma;
        out["best_score"] = r.best_score;
        out["scores"] = r.score_table;
        return out;
      },
      py::arg("store"), py::arg("manifest"), py::arg("as_of"), py::arg("metric") = "mcc",
      py::arg("range") = "1..60");

  py::class_<ThresholdStrategy>(m, "Strategy")
      .def_static("parse", &ThresholdStrategy::parse)
      .def_property_readonly("name", &ThresholdStrategy::name)
      .def("label", [](const ThresholdStrategy& s, const ScanSnapshot& snap) {
        return s.label(snap) == Label::Malicious;
      });

  py::class_<FeatureSchema>(m, "FeatureSchema")
      .def_static("engineered_default", &FeatureSchema::engineered_default)
      .def_static("naive", &FeatureSchema::naive)
      .def_static("from_json", &schema_from_json)
      .def("to_json", &schema_to_json)
      .def("__len__", &FeatureSchema::length)
      .def_property_readonly("id", &FeatureSchema::id)
      .def("feature_names", &FeatureSchema::feature_names)
      .def("extract", [](const FeatureSchema& s, const ScanSnapshot& snap) { return extract(snap, s).values; });

  m.def("select_features", [](const std::vector<double>& importances, const FeatureSchema& schema) {
    const auto sel = select_features(importances, schema);
    return py::make_tuple(sel.kept, sel.schema);
  });

  py::class_<ForestModel>(m, "ForestModel")
      .def_property_readonly("n_trees", [](const ForestModel& f) { return f.trees.size(); })
      .def_readonly("n_features", &ForestModel::n_features)
      .def_readonly("seed", &ForestModel::seed)
      .def("predict",
           [](const ForestModel& f, const std::vector<double>& x) { return predict(f, x) == Label::Malicious; })
      .def("feature_importances", [](const ForestModel& f) { return feature_importances(f); })
      .def("export_tree",
           [](const ForestModel& f, std::size_t i, const std::vector<std::string>& names) {
             return export_tree(f.trees.at(i), names, f.params.criterion);
           },
           py::arg("index"), py::arg("feature_names") = std::vector<std::string>{})
      .def("to_json", &model_to_json)
      .def_static("from_json", &model_from_json);

  m.def(
      "train_forest",
      [](const std::vector<std::vector<double>>& x, const std::vector<bool>& y, const py::dict& params,
         std::uint64_t seed, unsigned threads) {
        const auto data = dataset_from(x, y);
        const auto p = params_from(params);
        py::gil_scoped_release release;
        return train_forest(data, p, seed, {threads});
      },
      py::arg("x"), py::arg("y"), py::arg("params") = py::dict(), py::arg("seed") = 0, py::arg("threads") = 0);

  m.def(
      "cross_validate",
      [](const std::vector<std::vector<double>>& x, const std::vector<bool>& y, const py::dict& params,
         std::size_t k, std::uint64_t seed) {
        const auto data = dataset_from(x, y);
        const auto p = params_from(params);
        py::gil_scoped_release release;
        return cross_validate(data, p, k, seed).mean_accuracy;
      },
      py::arg("x"), py::arg("y"), py::arg("params") = py::dict(), py::arg("k") = 10, py::arg("seed") = 0);
}
