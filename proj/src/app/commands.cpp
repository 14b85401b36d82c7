// SPDX-License-Identifier: Apache-2.0
#include "spn/app/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "spn/app/gradcheck_suite.hpp"
#include "spn/app/manifest.hpp"
#include "spn/app/run_config.hpp"
#include "spn/data/synth.hpp"
#include "spn/metrics/metrics.hpp"
#include "spn/nn/checkpoint.hpp"
#include "spn/train/train.hpp"
#include "spn/util/checksum.hpp"
#include "spn/util/errors.hpp"
#include "spn/util/rng.hpp"

namespace spn::app {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

/// Output directory, resolved config and manifest of one command run.
class Run {
 public:
  Run(std::string command, const CommandOptions& options) : out_(options.out) {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec || !fs::is_directory(out_)) throw IoError("cannot create output directory " + out_.string());
    if (options.config) config_ = load_run_config(*options.config);
    if (options.seed) config_.set_seed(*options.seed);
    if (options.reward) config_.train.reward.variant = *options.reward;
    if (options.mode) config_.eval_mode = *options.mode;

    manifest_.command = std::move(command);
    if (options.config) {
      manifest_.config_path = options.config->string();
      manifest_.config_sha256 = file_sha256(*options.config);
    }
    manifest_.seed = config_.seed;
    manifest_.output_dir = out_.string();
    if (options.seed) manifest_.options["seed"] = std::to_string(*options.seed);
    if (options.mode) manifest_.options["mode"] = model::to_string(*options.mode);
    if (options.reward) manifest_.options["reward"] = model::to_string(*options.reward);
    if (options.fraction) manifest_.options["fraction"] = std::to_string(*options.fraction);
    if (options.checkpoint) manifest_.options["checkpoint"] = options.checkpoint->string();
    if (options.data) manifest_.options["data"] = options.data->string();
    if (!options.corrupt_op.empty()) manifest_.options["corrupt"] = options.corrupt_op;
    write_manifest(out_, manifest_);
    write_text(out_ / "config_resolved.txt", to_config_text(config_));
    artifact("config_resolved.txt");
  }

  const RunConfig& config() const { return config_; }
  const fs::path& out() const { return out_; }
  fs::path path(const std::string& name) const { return out_ / name; }
  void artifact(const std::string& name) { record_artifact(manifest_, out_, name); }

  void finish() {
    manifest_.status = "complete";
    write_manifest(out_, manifest_);
  }
  void fail(const std::string& message) {
    manifest_.status = "failed";
    manifest_.error = message;
    try {
      write_manifest(out_, manifest_);
    } catch (const std::exception&) {
      // The original error matters more than the manifest.
    }
  }

  // Runs `body`, marking the manifest failed when it throws.
  template <class F>
  auto guard(F&& body) {
    try {
      return body();
    } catch (const std::exception& e) {
      fail(e.what());
      throw;
    }
  }

 private:
  fs::path out_;
  RunConfig config_;
  RunManifest manifest_;
};

void write_report(Run& run, const std::string& name, const metrics::EvalReport& report) {
  write_text(run.path(name), metrics::serialize(report));
  run.artifact(name);
}

void log_report(std::ostream& log, const metrics::EvalReport& r) {
  const std::vector<double> row = metrics::summary_row(r);
  const std::vector<std::string> names = metrics::summary_names();
  for (std::size_t i = 0; i < row.size(); ++i) log << (i ? " " : "") << names[i] << "=" << num(row[i]);
  log << "\n";
}

std::vector<signal::SnippetSeries> test_series(const CommandOptions& options, const RunConfig& cfg) {
  if (options.data) return load_series(*options.data, cfg);
  if (!cfg.data.test_manifest.empty()) return load_series(cfg.data.test_manifest, cfg);
  return prepare_training_data(cfg).validation;
}

}  // namespace

void cmd_synth(const CommandOptions& options, std::ostream& log) {
  Run run("synth", options);
  run.guard([&] {
    const data::SynthDataset synth = data::synth_dataset(run.config().synth);
    data::write_dataset(run.out(), synth.dataset);
    for (const signal::EcgRecord& r : synth.dataset.records) run.artifact(r.record_id + ".csv");
    run.artifact("manifest.json");
    log << "wrote " << synth.dataset.size() << " records to " << run.out().string() << " (SNR "
        << num(run.config().synth.snr_db()) << " dB)\n";
    run.finish();
  });
}

void cmd_train(const CommandOptions& options, std::ostream& log) {
  Run run("train", options);
  run.guard([&] {
    const RunConfig& cfg = run.config();
    const PreparedData data = prepare_training_data(cfg);
    if (data.train.empty()) throw ValidationError("training split is empty");
    log << "training on " << data.train.size() << " records, validating on " << data.validation.size() << "\n";

    std::vector<train::HistoryRow> history;
    auto on_epoch = [&](const train::HistoryRow& row) {
      history.push_back(row);
      log << "epoch " << row.stats.epoch << " lr " << row.stats.lr << " loss " << num(row.stats.mean_loss)
          << " reward " << num(row.stats.mean_reward) << " tau " << num(row.stats.mean_tau_fraction);
      if (row.validation) {
        log << " val_acc " << num(row.validation->accuracy) << " val_E " << num(row.validation->earliness);
      }
      log << "\n";
    };
    std::optional<train::FitResult> result;
    try {
      result.emplace(train::fit(cfg.train, data.train, data.validation, on_epoch));
    } catch (const NumericError& e) {
      std::string text = train::history_csv(history);
      text += std::string("# error: ") + e.what() + "\n";
      write_text(run.path("history.csv"), text);
      run.artifact("history.csv");
      throw;
    }
    nn::write_checkpoint(run.path("checkpoint.bin"), result->model.params());
    run.artifact("checkpoint.bin");
    write_text(run.path("history.csv"), train::history_csv(result->history));
    run.artifact("history.csv");
    if (!data.validation.empty()) {
      const train::Evaluation ev =
          train::evaluate(result->model, data.validation, cfg.eval_mode, cfg.train.reward,
                          Rng::derive(cfg.seed, "validation", cfg.train.epochs), options.workers);
      write_report(run, "validation_report.json", ev.report);
      log_report(log, ev.report);
    }
    run.finish();
  });
}

void cmd_eval(const CommandOptions& options, std::ostream& log) {
  Run run("eval", options);
  run.guard([&] {
    const RunConfig& cfg = run.config();
    metrics::EvalReport report;
    if (options.fraction) {
      const double f = *options.fraction;
      if (!(f > 0.0 && f <= 1.0)) throw ValidationError("--fraction must lie in (0, 1]");
      const PreparedData data = prepare_training_data(cfg);
      const std::vector<signal::SnippetSeries> test =
          options.data || !cfg.data.test_manifest.empty() ? test_series(options, cfg) : data.validation;
      if (test.empty()) throw ValidationError("evaluation set is empty");
      report = train::fixed_fraction_baseline(cfg.train, data.train, test, f, options.workers);
    } else {
      if (!options.checkpoint) throw UsageError("eval needs --checkpoint (or --fraction for the baseline)");
      model::SpnModel net(cfg.train.model, Rng::derive(cfg.seed, "init"));
      nn::load_into(net.params(), nn::read_checkpoint(*options.checkpoint));
      const std::vector<signal::SnippetSeries> test = test_series(options, cfg);
      if (test.empty()) throw ValidationError("evaluation set is empty");
      report = train::evaluate(net, test, cfg.eval_mode, cfg.train.reward, Rng::derive(cfg.seed, "eval"),
                               options.workers)
                   .report;
    }
    write_report(run, "report.json", report);
    log_report(log, report);
    run.finish();
  });
}

bool cmd_gradcheck(const CommandOptions& options, std::ostream& log) {
  Run run("gradcheck", options);
  return run.guard([&] {
    const std::vector<GradCheckRow> rows = run_gradcheck_suite(options.corrupt_op);
    const std::string table = format_gradcheck(rows);
    write_text(run.path("gradcheck.csv"), table);
    run.artifact("gradcheck.csv");
    log << table;
    bool all = true;
    for (const GradCheckRow& r : rows) {
      if (r.passed) continue;
      all = false;
      log << r.name << ": " << r.detail;
      if (!options.corrupt_op.empty()) log << " [backward of '" << options.corrupt_op << "' corrupted]";
      log << "\n";
    }
    log << (all ? "all " + std::to_string(rows.size()) + " checks passed\n" : "gradient check failed\n");
    run.finish();
    return all;
  });
}

void cmd_crossval(const CommandOptions& options, std::ostream& log) {
  Run run("crossval", options);
  run.guard([&] {
    const RunConfig& cfg = run.config();
    if (cfg.data.manifest.empty()) throw ValidationError("data.manifest is required for crossval");
    const std::vector<signal::SnippetSeries> all = load_series(cfg.data.manifest, cfg);
    const train::CrossValidation cv = train::cross_validate(cfg.train, all, cfg.train.folds, options.workers);
    for (const std::string& w : cv.warnings) log << "warning: " << w << "\n";
    for (std::size_t f = 0; f < cv.folds.size(); ++f) {
      char name[32];
      std::snprintf(name, sizeof name, "fold_%02zu.json", f);
      write_report(run, name, cv.folds[f]);
    }
    write_text(run.path("crossval.csv"), metrics::format_table(cv.folds));
    run.artifact("crossval.csv");
    const std::vector<std::string> names = metrics::summary_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
      log << names[i] << " " << num(cv.aggregate.mean[i]) << " ± " << num(cv.aggregate.std[i]) << "\n";
    }
    run.finish();
  });
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "shape mismatch: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace spn::app
