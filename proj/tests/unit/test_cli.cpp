#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "labelforge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = labelforge::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

struct Workspace {
  testing::TempDir dir;
  std::string store = (dir / "store").string();
  std::string manifest = testing::fixture("hand_labeled_2019.csv");

  Workspace() {
    const auto r = run({"ingest", "--store", store, testing::fixture("hand_labeled_2019_sept.jsonl"),
                        testing::fixture("hand_labeled_2019_nov.jsonl")});
    REQUIRE(r.code == 0);
  }
};

}  // namespace

TEST_CASE("ingest reports per-file counts") {
  testing::TempDir dir;
  const auto store = (dir / "store").string();
  auto r = run({"ingest", "--store", store, testing::fixture("table_history.jsonl")});
  CHECK(r.code == 0);
  CHECK(lines(r.out) == std::vector<std::string>{"file,accepted,duplicates,warnings",
                                                 testing::fixture("table_history.jsonl") + ",15,0,0"});
  r = run({"ingest", "--store", store, testing::fixture("table_history.jsonl")});
  CHECK(lines(r.out)[1] == testing::fixture("table_history.jsonl") + ",0,15,0");
}

TEST_CASE("evaluate reproduces the November threshold rows") {
  Workspace ws;
  const auto r = run({"evaluate", "--store", ws.store, "--manifest", ws.manifest, "--as-of", "2019-11-08",
                      "--strategy", "vt>=3", "--strategy", "vt>=4"});
  REQUIRE(r.code == 0);
  const auto l = lines(r.out);
  REQUIRE(l.size() == 3);
  CHECK(l[0] == "strategy,as_of,mcc,recall,specificity,precision,accuracy,tp,fp,tn,fn");
  CHECK(l[1] == "vt>=3,2019-11-08,0.823,0.700,1.000,1.000,0.970,7,0,90,3");
  CHECK(l[2] == "vt>=4,2019-11-08,0.758,0.600,1.000,1.000,0.960,6,0,90,4");
}

TEST_CASE("find-threshold prints one row per date") {
  Workspace ws;
  const auto r = run({"find-threshold", "--store", ws.store, "--manifest", ws.manifest, "--as-of",
                      "2019-09-01..2019-12-01", "--range", "1..20"});
  REQUIRE(r.code == 0);
  const auto l = lines(r.out);
  REQUIRE(l.size() == 3);
  CHECK(l[0] == "as_of,best_sigma,best_mcc");
  CHECK(l[1].rfind("2019-09-27,", 0) == 0);
  CHECK(l[2].rfind("2019-11-08,", 0) == 0);
}

TEST_CASE("label writes one row per app") {
  Workspace ws;
  const auto r = run({"label", "--store", ws.store, "--manifest", ws.manifest, "--as-of", "2019-11-08", "--strategy",
                      "subset:drebin"});
  REQUIRE(r.code == 0);
  CHECK(lines(r.out).size() == 101);
  const auto both = run({"label", "--store", ws.store, "--manifest", ws.manifest, "--as-of", "2019-11-08",
                         "--strategy", "vt>=3", "--model", "m.json"});
  CHECK(both.code != 0);
}

TEST_CASE("error and usage exit codes") {
  Workspace ws;
  const auto empty = ws.dir / "empty.csv";
  std::ofstream(empty) << "app_id,label\n";
  auto r = run({"evaluate", "--store", ws.store, "--manifest", empty.string(), "--as-of", "2019-11-08", "--strategy",
                "vt>=3"});
  CHECK(r.code == 1);
  CHECK(r.err.find("EmptyManifest") != std::string::npos);

  r = run({"evaluate", "--store", ws.store, "--manifest", ws.manifest, "--as-of", "2019-11-08", "--strategy",
           "vt>=zero"});
  CHECK(r.code == 1);
  CHECK(r.err.find("InvalidStrategy") != std::string::npos);

  CHECK(run({"evaluate", "--bogus"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"nonsense"}).code == 2);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"stability", "--store", (ws.dir / "missing").string()}).code == 1);
}

TEST_CASE("stability reports the hesitant app") {
  testing::TempDir dir;
  const auto store = (dir / "store").string();
  REQUIRE(run({"ingest", "--store", store, testing::fixture("table_history.jsonl")}).code == 0);
  const auto r = run({"stability", "--store", store});
  REQUIRE(r.code == 0);
  CHECK(lines(r.out)[1] == "5cfda85debe5e9a7341b4eeed01d92807ed29552,15,2019-01-08,false,2");
}

TEST_CASE("training twice with the same seed writes identical models") {
  Workspace ws;
  const auto grid = ws.dir / "grid.json";
  std::ofstream(grid) << R"({"criterion":["gini"],"max_depth":[3,null],"max_features":[5],"min_samples_split":[2],"bootstrap":[true],"n_trees":5})";
  auto train = [&](const std::string& name, const std::string& threads) {
    return run({"train", "--store", ws.store, "--manifest", ws.manifest, "--as-of", "2019-09-27", "--grid",
                grid.string(), "--folds", "5", "--seed", "7", "--threads", threads, "--model",
                (ws.dir / name).string()});
  };
  const auto a = train("a.json", "1");
  const auto b = train("b.json", "3");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out == b.out);
  CHECK(testing::read_file(ws.dir / "a.json") == testing::read_file(ws.dir / "b.json"));

  const auto eval = run({"evaluate", "--store", ws.store, "--manifest", ws.manifest, "--as-of", "2019-09-27",
                         "--model", (ws.dir / "a.json").string()});
  REQUIRE(eval.code == 0);
  CHECK(lines(eval.out)[1].rfind("forest:a,2019-09-27,", 0) == 0);
}

TEST_CASE("extract-features writes a header and one row per app") {
  Workspace ws;
  const auto r = run({"extract-features", "--store", ws.store, "--manifest", ws.manifest, "--as-of", "2019-09-27",
                      "--schema-out", (ws.dir / "schema.json").string()});
  REQUIRE(r.code == 0);
  const auto l = lines(r.out);
  REQUIRE(l.size() == 101);
  CHECK(l[0].rfind("app_id,label,Avira,CAT-QuickHeal,", 0) == 0);
  CHECK(std::filesystem::exists(ws.dir / "schema.json"));
}
