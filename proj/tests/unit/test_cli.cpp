#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "../support/instances.hpp"
#include "cli.hpp"
#include "nnrep/io.hpp"
#include "nnrep/repair.hpp"

using namespace nnrep;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "nnrep");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct Workdir {
  fs::path dir;
  Workdir() {
    dir = fs::temp_directory_path() / ("nnrep_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workdir() { fs::remove_all(dir); }
  std::string operator()(const std::string& name) const { return (dir / name).string(); }
};

const char* kIdentity = R"({"input_dim": 1, "layers": [
    {"weights": [[1]], "bias": [0]}, {"weights": [[1]], "bias": [0]}]})";

}  // namespace

TEST_CASE("help documents flags, schemas and exit codes") {
  const Run top = run_cli({"--help"});
  CHECK(top.code == 0);
  CHECK(top.out.find("Exit codes") != std::string::npos);
  CHECK(top.out.find("rate:D") != std::string::npos);
  const Run rep = run_cli({"repair", "--help"});
  CHECK(rep.code == 0);
  for (const char* flag : {"--model", "--data", "--predicate", "--layer", "--delta-max", "--nodes", "--l1-weight",
                           "--time-limit", "--gap", "--seed", "--threads", "--eps"}) {
    CHECK_MESSAGE(rep.out.find(flag) != std::string::npos, flag);
  }
  const Run loop = run_cli({"loop", "--help"});
  for (const char* flag : {"--max-iters", "--max-cex", "--region"}) {
    CHECK_MESSAGE(loop.out.find(flag) != std::string::npos, flag);
  }
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"repair", "--bogus"}).code == 1);
}

TEST_CASE("repair: toy instance, missing model, zero radius") {
  Workdir w;
  const auto inst = testing::global_bound_instance(3, 20, 3);
  save_model_file(inst.net, w("m.json"));
  write_text_file_atomic(w("d.csv"), write_csv(inst.data));

  const Run ok = run_cli({"repair", "--model", w("m.json"), "--data", w("d.csv"), "--predicate", "global:-10:10",
                          "--layer", "3", "--output", w("out.json"), "--report", w("rep.json"), "--seed", "7"});
  CHECK(ok.code == 0);
  CHECK(fs::exists(w("out.json")));
  const auto report = nlohmann::json::parse(read_text_file(w("rep.json")));
  CHECK(report["metrics"]["re_percent"].get<double>() == 100.0);
  const Network repaired = load_model_file(w("out.json"));
  for (const auto& x : inst.data.inputs) CHECK(eval_predicate(inst.pred, x, repaired.forward(x), 1e-6));

  const Run missing = run_cli({"repair", "--model", w("nope.json"), "--data", w("d.csv"), "--predicate",
                               "global:-10:10", "--output", w("x.json")});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("nope.json") != std::string::npos);

  const Run zero = run_cli({"repair", "--model", w("m.json"), "--data", w("d.csv"), "--predicate", "global:-10:10",
                            "--delta-max", "0", "--output", w("z.json"), "--report", w("z_rep.json")});
  CHECK(zero.code == 2);
  CHECK_FALSE(fs::exists(w("z.json")));
  CHECK(fs::exists(w("z_rep.json")));
}

TEST_CASE("verify: safe, violated with counterexample file") {
  Workdir w;
  write_text_file_atomic(w("id.json"), kIdentity);
  const Run safe = run_cli({"verify", "--model", w("id.json"), "--predicate", "global:-100:10", "--region", "0:5"});
  CHECK(safe.code == 0);
  CHECK(safe.out == "verdict=safe cex=0\n");

  const Run bad = run_cli({"verify", "--model", w("id.json"), "--predicate", "global:-100:3", "--region", "0:5",
                           "--max-cex", "2", "--output", w("cex.csv"), "--report", w("v.json")});
  CHECK(bad.code == 2);
  const Dataset cex = load_csv(read_text_file(w("cex.csv")));
  CHECK(cex.size() == 2);
  for (const auto& x : cex.inputs) CHECK(x(0) > 3.0);

  CHECK(run_cli({"verify", "--model", w("id.json"), "--predicate", "global:-100:3", "--region", "0:5,0:1"}).code == 1);
  CHECK(run_cli({"verify", "--model", w("id.json"), "--predicate", "global:-100:3", "--region", "5"}).code == 1);
}

TEST_CASE("loop: already safe and budget exhaustion") {
  Workdir w;
  write_text_file_atomic(w("id.json"), kIdentity);
  const Run safe = run_cli({"loop", "--model", w("id.json"), "--predicate", "global:-1:10", "--region", "0:1",
                            "--output", w("final.json"), "--log", w("loop.log")});
  CHECK(safe.code == 0);
  CHECK(read_text_file(w("loop.log")) == "iter=1 cex=0 re=100 status=safe\n");
  CHECK(fs::exists(w("final.json")));

  const Run budget = run_cli({"loop", "--model", w("id.json"), "--predicate", "global:-1:3", "--region", "0:5",
                              "--max-iters", "1", "--output", w("b.json")});
  CHECK(budget.code == 3);
}

TEST_CASE("eval: unchanged model, matching metrics, empty test set") {
  Workdir w;
  const auto inst = testing::global_bound_instance(5, 20, 3);
  save_model_file(inst.net, w("m.json"));
  write_text_file_atomic(w("d.csv"), write_csv(inst.data));
  const Run same = run_cli({"eval", "--model", w("m.json"), "--repaired", w("m.json"), "--test", w("d.csv"),
                            "--predicate", "global:-10:10", "--output", w("per.csv"), "--report", w("m_rep.json")});
  CHECK(same.code == 0);
  const Dataset per = load_csv(read_text_file(w("per.csv")), CsvSchema{{"y_orig_0", "y_repaired_0"}, {"sat_orig"}});
  for (std::size_t i = 0; i < per.size(); ++i) CHECK(per.inputs[i](0) == per.inputs[i](1));
  const auto m = nlohmann::json::parse(read_text_file(w("m_rep.json")));
  CHECK(m["mae"].get<double>() == 0.0);

  RepairOptions o;
  o.layer = 3;
  const RepairOutcome r = repair_layer(inst.net, inst.data, inst.pred, o);
  REQUIRE(r.report.feasible());
  save_model_file(r.net, w("r.json"));
  const Run diff = run_cli({"eval", "--model", w("m.json"), "--repaired", w("r.json"), "--test", w("d.csv"),
                            "--data", w("d.csv"), "--predicate", "global:-10:10", "--report", w("r_rep.json")});
  CHECK(diff.code == 0);
  const Metrics direct = compute_metrics(inst.net, load_model_file(w("r.json")), inst.data, inst.data, inst.pred, {});
  const auto j = nlohmann::json::parse(read_text_file(w("r_rep.json")));
  CHECK(j["mae"].get<double>() == direct.mae);
  CHECK(j["re_percent"].get<double>() == direct.re);
  CHECK(j["ib_percent"].get<double>() == direct.ib);

  write_text_file_atomic(w("empty.csv"), "x0,x1,y\n");
  CHECK(run_cli({"eval", "--model", w("m.json"), "--repaired", w("m.json"), "--test", w("empty.csv"), "--predicate",
                 "global:-10:10"})
            .code == 1);
}

TEST_CASE("gen writes series and windowed data") {
  Workdir w;
  const Run g = run_cli({"gen", "--seed", "3", "--steps", "300", "--series", w("s.csv"), "--output", w("win.csv")});
  CHECK(g.code == 0);
  const Dataset ds = load_csv(read_text_file(w("win.csv")));
  CHECK(ds.size() == 290);
  CHECK(ds.input_dim() == 14);
  CHECK(load_series_csv(read_text_file(w("s.csv"))).steps() == 300);
  CHECK(run_cli({"gen", "--steps", "5", "--output", w("short.csv")}).code == 1);
  CHECK_FALSE(fs::exists(w("short.csv")));
}
