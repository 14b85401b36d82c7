// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"
#include "spn/app/commands.hpp"
#include "spn/app/gradcheck_suite.hpp"
#include "spn/app/manifest.hpp"
#include "spn/app/run_config.hpp"
#include "spn/metrics/metrics.hpp"
#include "spn/util/checksum.hpp"
#include "spn/util/errors.hpp"

using namespace spn;
using namespace spn::app;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(# tiny end-to-end configuration
seed = 5
data.manifest = data/manifest.json
data.validation_fraction = 0.25
model.input_channels = 2
model.block_layers = 1,1,1
model.block_channels = 4,4,4
model.hidden = 6
model.snippet_width = 27
model.num_classes = 3
model.policy_bias_init = -1
train.epochs = 1
train.batch_size = 8
train.folds = 2
synth.n_records = 24
synth.min_seconds = 6
synth.max_seconds = 10
)";

struct Workspace {
  fs::path root;
  fs::path config;
  Workspace() {
    root = fs::temp_directory_path() / ("spn_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    config = root / "run.cfg";
    write(config, kTinyConfig);
    CommandOptions o;
    o.config = config;
    o.out = root / "data";
    std::ostringstream log;
    cmd_synth(o, log);
  }
  ~Workspace() { fs::remove_all(root); }
  static void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }
  CommandOptions options(const std::string& out) const {
    CommandOptions o;
    o.config = config;
    o.out = root / out;
    return o;
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SPN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("run config parsing") {
  const RunConfig d = parse_run_config("", "<empty>", {});
  CHECK(d.seed == 1);
  CHECK(d.train.epochs == 100);
  CHECK(d.train.batch_size == 32);
  CHECK(d.train.reward.variant == model::RewardVariant::paper);
  CHECK(d.eval_mode == model::ActionMode::thresholded);

  const RunConfig c = parse_run_config(kTinyConfig, "tiny", "/base");
  CHECK(c.seed == 5);
  CHECK(c.train.seed == 5);
  CHECK(c.synth.seed == 5);
  CHECK(c.data.manifest == fs::path("/base/data/manifest.json"));
  CHECK(c.train.model.block_layers == std::vector<std::size_t>{1, 1, 1});
  CHECK(c.data.snippets.width == 27);
  CHECK(c.synth.channels == 2);

  const RunConfig again = parse_run_config(to_config_text(c), "resolved", {});
  CHECK(to_config_text(again) == to_config_text(c));

  CHECK_THROWS_AS(parse_run_config("train.epoch = 3\n", "typo", {}), ValidationError);
  CHECK_THROWS_AS(parse_run_config("train.epochs = many\n", "bad", {}), ValidationError);
  CHECK_THROWS_AS(parse_run_config("reward.variant = fast\n", "bad", {}), ValidationError);
  CHECK_THROWS_AS(parse_run_config("model.snippet_width = 100\n", "bad", {}), ShapeError);
  CHECK_THROWS_AS(parse_run_config("seed 3\n", "bad", {}), ParseError);
}

TEST_CASE("run manifest round trip") {
  RunManifest m;
  m.command = "train";
  m.config_path = "a.cfg";
  m.seed = 42;
  m.output_dir = "out";
  m.options["mode"] = "thresholded";
  m.artifacts.push_back({"checkpoint.bin", std::string(64, 'a')});
  CHECK(parse_manifest(serialize(m)) == m);
  CHECK_THROWS_AS(parse_manifest("{}"), ParseError);
}

TEST_CASE("synth writes records, manifest and checksums") {
  Workspace& w = workspace();
  const RunManifest m = read_manifest(w.root / "data" / kManifestFile);
  CHECK(m.status == "complete");
  CHECK(m.command == "synth");
  CHECK(m.artifacts.size() == 1 + 24 + 1);
  std::size_t csv = 0;
  for (const auto& entry : fs::directory_iterator(w.root / "data")) csv += entry.path().extension() == ".csv";
  CHECK(csv == 24);

  CommandOptions o;
  o.config = w.config;
  o.out = w.root / "data_again";
  std::ostringstream log;
  cmd_synth(o, log);
  CHECK(read_manifest(o.out / kManifestFile).artifacts == m.artifacts);

  Workspace::write(w.root / "empty.cfg", "synth.n_records = 0\n");
  o.config = w.root / "empty.cfg";
  o.out = w.root / "empty";
  cmd_synth(o, log);
  CHECK(slurp(o.out / "manifest.json").find("\"records\": []") != std::string::npos);

  Workspace::write(w.root / "blocker", "x");
  o.out = w.root / "blocker" / "sub";
  CHECK_THROWS_AS(cmd_synth(o, log), IoError);
}

TEST_CASE("train produces reproducible artifacts") {
  Workspace& w = workspace();
  std::ostringstream log;
  CommandOptions a = w.options("train_a");
  a.workers = 1;
  cmd_train(a, log);
  CommandOptions b = w.options("train_b");
  b.workers = 3;
  cmd_train(b, log);
  for (const char* name : {"checkpoint.bin", "history.csv", "validation_report.json"}) {
    REQUIRE(fs::exists(a.out / name));
    CHECK(file_sha256(a.out / name) == file_sha256(b.out / name));
  }
  const std::string history = slurp(a.out / "history.csv");
  CHECK(std::count(history.begin(), history.end(), '\n') == 2);
  const RunManifest m = read_manifest(a.out / kManifestFile);
  CHECK(m.status == "complete");
  CHECK(m.artifacts.size() == 4);
  CHECK_NOTHROW(metrics::parse_report(slurp(a.out / "validation_report.json")).validate());

  CommandOptions c = w.options("train_c");
  c.seed = 6;
  cmd_train(c, log);
  CHECK(file_sha256(c.out / "checkpoint.bin") != file_sha256(a.out / "checkpoint.bin"));
}

TEST_CASE("eval reports and errors") {
  Workspace& w = workspace();
  std::ostringstream log;
  CommandOptions t = w.options("eval_model");
  cmd_train(t, log);

  CommandOptions e1 = w.options("eval_1");
  e1.checkpoint = t.out / "checkpoint.bin";
  e1.data = w.root / "data" / "manifest.json";
  cmd_eval(e1, log);
  CommandOptions e2 = e1;
  e2.out = w.root / "eval_2";
  e2.workers = 2;
  cmd_eval(e2, log);
  CHECK(slurp(e1.out / "report.json") == slurp(e2.out / "report.json"));
  const metrics::EvalReport r = metrics::parse_report(slurp(e1.out / "report.json"));
  CHECK_NOTHROW(r.validate());
  std::size_t total = 0;
  for (const auto& row : r.confusion) for (std::size_t v : row) total += v;
  CHECK(total == 24);

  CommandOptions base = w.options("eval_baseline");
  base.fraction = 1.0;
  cmd_eval(base, log);
  const metrics::EvalReport b = metrics::parse_report(slurp(base.out / "report.json"));
  CHECK(b.earliness == 1.0);

  std::string wide = kTinyConfig;
  wide.replace(wide.find("model.hidden = 6"), 16, "model.hidden = 7");
  Workspace::write(w.root / "wide.cfg", wide);
  CommandOptions mismatch = e1;
  mismatch.config = w.root / "wide.cfg";
  mismatch.out = w.root / "eval_mismatch";
  CHECK_THROWS_AS(cmd_eval(mismatch, log), ValidationError);
  CHECK(read_manifest(mismatch.out / kManifestFile).status == "failed");

  CommandOptions none = w.options("eval_none");
  CHECK_THROWS_AS(cmd_eval(none, log), UsageError);
}

TEST_CASE("gradcheck table") {
  const std::vector<GradCheckRow> rows = run_gradcheck_suite();
  CHECK(rows.size() >= 8);
  for (const auto& r : rows) CHECK_MESSAGE(r.passed, r.name, " ", r.detail);
  const std::vector<GradCheckRow> broken = run_gradcheck_suite("sigmoid");
  bool any = false;
  for (const auto& r : broken) any = any || !r.passed;
  CHECK(any);
  CHECK(format_gradcheck(rows).rfind("check,max_rel_err,status\n", 0) == 0);
}

TEST_CASE("crossval writes folds and the aggregate") {
  Workspace& w = workspace();
  std::ostringstream log;
  CommandOptions o = w.options("cv");
  cmd_crossval(o, log);
  std::vector<metrics::EvalReport> folds;
  for (const char* name : {"fold_00.json", "fold_01.json"}) folds.push_back(metrics::parse_report(slurp(o.out / name)));
  CHECK_FALSE(fs::exists(o.out / "fold_02.json"));
  const std::string table = slurp(o.out / "crossval.csv");
  CHECK(table.find("\nmean,") != std::string::npos);
  CHECK(table.find("\nstd,") != std::string::npos);
  const metrics::Aggregate agg = metrics::aggregate(folds);
  CHECK(std::abs(agg.mean[0] - (folds[0].accuracy + folds[1].accuracy) / 2) <= 1e-12);
  CHECK(log.str().find("accuracy") != std::string::npos);

  CommandOptions again = w.options("cv_again");
  again.workers = 2;
  cmd_crossval(again, log);
  CHECK(slurp(again.out / "crossval.csv") == table);
}

TEST_CASE("exit codes") {
  Workspace& w = workspace();
  const std::string out = " --out " + (w.root / "cli").string();
  CHECK(run_cli("") == 1);
  CHECK(run_cli("train" + out) == 1);
  CHECK(run_cli("train --config " + (w.root / "missing.cfg").string() + out) == 3);
  Workspace::write(w.root / "bad.cfg", "train.epochs = -3\n");
  CHECK(run_cli("train --config " + (w.root / "bad.cfg").string() + out) == 1);
  CHECK(run_cli("gradcheck" + out) == 0);
  CHECK(run_cli("gradcheck --corrupt conv1d" + out) == 2);
  CHECK(run_cli("eval --mode sideways --config " + w.config.string() + out) == 1);
  std::ostringstream err;
  CHECK(run_guarded([]() -> int { throw NumericError("nan"); }, err) == 2);
  CHECK(run_guarded([]() -> int { throw IoError("disk"); }, err) == 3);
  CHECK(run_guarded([]() -> int { throw ValidationError("bad"); }, err) == 1);
}
