// Copyright 2026 The sparsekit Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// sparsekit command-line entry point.
//
// Exit codes: 0 success, 1 validation error (bad flags, keys, files),
// 2 runtime failure (divergence, I/O, unmet verification targets).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "sparsekit/harness.hpp"
#include "sparsekit/l0.hpp"
#include "sparsekit/verify.hpp"

namespace fs = std::filesystem;
using namespace sparsekit;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::int64_t seed = -1;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true) {
  cmd->add_option("--config", c.config, "config file (key = value lines)");
  cmd->add_option("--set", c.sets, "override, key=value (repeatable)");
  if (needs_out) cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "overrides train.seed");
  cmd->add_flag("-q,--quiet", c.quiet, "no progress output");
}

Config load_config(const Common& c) {
  Config cfg = c.config.empty() ? Config() : Config::load(c.config);
  for (const auto& s : c.sets) cfg.set_assignment(s);
  if (c.seed >= 0) cfg.set("train.seed", std::to_string(c.seed));
  return cfg;
}

fs::path out_dir(const Common& c) {
  fs::path dir = c.out.empty() ? fs::path("sparsekit-out") : fs::path(c.out);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

TrainHooks log_hooks(bool quiet) {
  TrainHooks h;
  if (!quiet) {
    h.on_log = [](const StepLog& l) {
      std::fprintf(stderr, "step %lld loss %.4f task %.4f reg %.4g coef %.3g lr %.3g acc %.3f\n",
                   static_cast<long long>(l.step), l.loss, l.task_loss, l.regularizer, l.coefficient, l.lr,
                   l.batch_accuracy);
    };
  }
  return h;
}

std::string summary(const TrainingRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "steps %lld  train_sparsity %.4f  test_sparsity %.4f  test_accuracy %.4f  %.1fs",
                static_cast<long long>(r.steps_run), r.train_sparsity, r.test_sparsity, r.test_accuracy,
                r.wall_clock);
  return buf;
}

int cmd_train(const Common& c) {
  const Config cfg = load_config(c);
  if (cfg.is_sweep()) throw ValidationError("config holds sweep lists; use `sparsekit sweep`");
  train_config_from(cfg);  // fail on bad keys before touching data
  const auto data = load_data(cfg);
  const auto dir = out_dir(c);
  const auto ckpt = dir / ("run-" + cfg.hash_hex() + "-s" + cfg.get("train.seed") + ".sprs");
  const auto rec = run_config(cfg, data, ckpt, log_hooks(c.quiet));
  SweepWriter(dir / "runs.csv").append(sweep_row(rec, cfg));
  std::cout << summary(rec) << "\ncheckpoint " << ckpt.string() << "\n";
  return kOk;
}

int cmd_sweep(const Common& c, bool no_checkpoints) {
  const Config grid = load_config(c);
  const auto points = grid.expand();
  const auto data = load_data(points.front());
  const auto dir = out_dir(c);
  SweepWriter writer(dir / "sweep.csv");
  std::size_t done = 0;
  const auto p = run_sweep(grid, data, writer, no_checkpoints ? fs::path() : dir / "checkpoints",
                           [&](const SweepRow& r) {
                             if (!c.quiet) {
                               std::fprintf(stderr, "[%zu/%zu] %s seed %llu: sparsity %.4f accuracy %.4f\n", ++done,
                                            points.size(), r.config_hash.c_str(),
                                            static_cast<unsigned long long>(r.seed), r.test_sparsity,
                                            r.test_accuracy);
                             }
                           });
  std::cout << "completed " << p.completed << ", skipped " << p.skipped << ", diverged " << p.failed << "\n"
            << (dir / "sweep.csv").string() << "\n";
  return p.failed ? kRuntime : kOk;
}

// lottery / scratch: every checkpoint in harness.base_checkpoint (':'-list)
// is an outer replica; every seed an inner one.
int cmd_harness(const Common& c, Variant forced) {
  Config cfg = load_config(c);
  if (forced == Variant::Lottery) {
    cfg.set("harness.variant", "lottery");
    if (cfg.is_default("harness.reinit")) cfg.set("harness.reinit", "original-init");
  } else if (parse_variant(cfg.get("harness.variant")) == Variant::Lottery) {
    throw ValidationError("`scratch` needs harness.variant scratch-e or scratch-b");
  }
  const ExperimentPlan plan = plan_from_config(cfg);
  const auto bases = cfg.get_list("harness.base_checkpoint");
  if (bases.empty()) throw ValidationError("harness.base_checkpoint is required");
  if (plan.replicas_outer != 1 && plan.replicas_outer != bases.size()) {
    throw ValidationError("harness.replicas_outer must match the number of base checkpoints");
  }
  const auto data = load_data(cfg);
  std::vector<VariantRun> runs, baselines;
  const std::string label = variant_label(plan);
  for (const auto& path : bases) {
    auto base = run_from_checkpoint(Checkpoint::load(path));
    const auto tt = test_time_result(base.spec, base.record.final_state, test_time_options(base.train), data.test);
    base.record.test_accuracy = tt.accuracy;
    const auto [init, snap] = capture(base.record, path);
    baselines.push_back({"pruned", snap.sparsity, base.record});
    for (auto seed : plan.seeds) {
      auto rec = run_variant(base.spec, plan, snap, &init, base.train, data.train, &data.test, seed);
      if (!c.quiet) {
        std::fprintf(stderr, "%s seed %llu from %s: %s\n", label.c_str(), static_cast<unsigned long long>(seed),
                     path.c_str(), rec.failed ? rec.failure.c_str() : summary(rec).c_str());
      }
      runs.push_back({label, snap.sparsity, std::move(rec)});
    }
  }
  const std::string csv = comparison_csv(compare(runs, baselines));
  write_file(out_dir(c) / "comparison.csv", csv);
  std::cout << csv;
  return kOk;
}

// VD log-alpha threshold sweep over one checkpoint; needs the test split.
std::string threshold_report(const std::string& path, const std::string& data_dir) {
  auto run = run_from_checkpoint(Checkpoint::load(path));
  if (run.train.method != Method::VariationalDropout) throw ValidationError("threshold sweep needs a vd checkpoint");
  if (!data_dir.empty()) run.config.set("data.dir", data_dir);
  const auto data = load_data(run.config);
  std::string text = "threshold,sparsity,accuracy\n";
  for (const auto& p : threshold_sweep(run.spec, run.record.final_state, parse_thresholds(run.config), data.test)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%g,%.6f,%.6f\n", p.threshold, p.sparsity, p.accuracy);
    text += buf;
  }
  return text;
}

int cmd_report(const std::string& frontier, const std::string& method, const std::string& distribution,
               const std::string& flops, const std::string& thresholds, const std::string& data_dir,
               const std::string& output) {
  const int chosen = !frontier.empty() + !distribution.empty() + !flops.empty() + !thresholds.empty();
  if (chosen != 1) {
    throw ValidationError("report needs exactly one of --frontier, --distribution, --flops, --thresholds");
  }
  std::string text;
  if (!thresholds.empty()) {
    text = threshold_report(thresholds, data_dir);
  } else if (!frontier.empty()) {
    if (!fs::exists(frontier)) throw ValidationError("no sweep CSV at " + frontier);
    std::map<std::string, std::vector<SweepRow>> by_method;
    for (auto& r : read_sweep_csv(frontier)) {
      if (method.empty() || r.method == method) by_method[r.method].push_back(std::move(r));
    }
    if (by_method.size() > 1) throw ValidationError("sweep mixes methods; pick one with --method");
    text = frontier_series_csv(by_method.empty() ? std::vector<SweepRow>{} : pareto_frontier(by_method.begin()->second));
  } else {
    const auto run = run_from_checkpoint(Checkpoint::load(distribution.empty() ? flops : distribution));
    const auto masks = test_time_masks(run.spec, run.record.final_state, test_time_options(run.train));
    const auto rep = sparsity_distribution_report(run.spec, masks);
    if (!distribution.empty()) {
      text = distribution_csv(rep);
    } else {
      const auto dense = count_dense_flops(run.spec);
      const auto sparse = count_flops(run.spec, masks);
      char buf[256];
      std::snprintf(buf, sizeof buf, "%llu,%llu,%.6f", static_cast<unsigned long long>(dense),
                    static_cast<unsigned long long>(sparse), static_cast<double>(sparse) / static_cast<double>(dense));
      text = std::string("# ") + kFlopConvention + "\ndense_flops,test_time_flops,ratio";
      std::string row = buf;
      if (run.train.method == Method::L0) {
        text += ",train_time_expected_flops";
        std::snprintf(buf, sizeof buf, ",%.1f", l0_expected_flops(run.spec, run.record.final_state, run.train.hc));
        row += buf;
      }
      text += "\n" + row + "\n";
    }
  }
  if (output.empty()) {
    std::cout << text;
  } else {
    write_file(output, text);
  }
  return kOk;
}

int cmd_verify(const Common& c, const std::string& cache_dir, const std::vector<std::string>& suites) {
  Config cfg = load_config(c);
  const auto data = load_data(cfg);
  RunCache cache(cache_dir);
  VerifyLog log;
  if (!c.quiet) log = [](const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); };
  std::vector<CriterionResult> results;
  for (const auto& s : suites) {
    if (s == "vd") {
      std::vector<ThresholdPoint> sweep;
      for (auto& r : verify_vd_lenet300(cache, data, log, &sweep)) results.push_back(std::move(r));
      std::cout << "threshold,sparsity,accuracy\n";
      for (const auto& p : sweep) std::printf("%g,%.6f,%.6f\n", p.threshold, p.sparsity, p.accuracy);
    } else if (s == "lenet5") {
      results.push_back(verify_vd_lenet5(cache, data, log));
    } else if (s == "dominance") {
      results.push_back(verify_dominance(cache, data, log));
    } else if (s == "scratch") {
      results.push_back(report_scratch_gap(cache, data, log));
    }
  }
  bool ok = true;
  for (const auto& r : results) {
    std::cout << format_result(r) << "\n";
    ok = ok && r.passed;
  }
  return ok ? kOk : kRuntime;
}

int cmd_gradcheck() {
  bool ok = true;
  std::printf("%-28s %6s %12s\n", "parameter", "coords", "max_rel_err");
  for (const auto& e : gradient_suite()) {
    const bool pass = e.max_rel_error < targets::kGradTolerance;
    ok = ok && pass;
    std::printf("%-28s %6zu %12.3e %s\n", e.name.c_str(), e.coordinates, e.max_rel_error, pass ? "ok" : "FAIL");
  }
  return ok ? kOk : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparsekit: sparsification methods, training and reporting"};
  app.require_subcommand(1);

  Common common;
  auto* train = app.add_subcommand("train", "train one config");
  add_common(train, common);

  bool no_checkpoints = false;
  auto* sweep = app.add_subcommand("sweep", "expand comma-separated grid values and train every point");
  add_common(sweep, common);
  sweep->add_flag("--no-checkpoints", no_checkpoints, "only write sweep.csv");

  auto* lottery = app.add_subcommand("lottery", "retrain learned masks from the original init");
  add_common(lottery, common);
  auto* scratch = app.add_subcommand("scratch", "retrain learned masks from a fresh init");
  add_common(scratch, common);

  std::string frontier, method, distribution, flops, thresholds, data_dir, output;
  auto* report = app.add_subcommand("report", "frontier / distribution / FLOP reports as CSV");
  report->add_option("--frontier", frontier, "sweep CSV -> Pareto frontier x,y series");
  report->add_option("--method", method, "restrict the frontier to one method");
  report->add_option("--distribution", distribution, "checkpoint -> per-layer sparsity table");
  report->add_option("--flops", flops, "checkpoint -> forward-pass FLOPs");
  report->add_option("--thresholds", thresholds, "vd checkpoint -> threshold,sparsity,accuracy sweep");
  report->add_option("--data", data_dir, "MNIST directory for --thresholds (default: the checkpoint's)");
  report->add_option("--out", output, "output file (default stdout)");

  std::string cache_dir = "sparsekit-cache";
  std::vector<std::string> suites = {"vd"};
  auto* verify = app.add_subcommand("verify", "train the reference runs and check reproduction targets");
  add_common(verify, common, false);
  verify->add_option("--cache", cache_dir, "checkpoint cache directory")->capture_default_str();
  verify->add_option("--suite", suites, "vd | lenet5 | dominance | scratch (repeatable)")
      ->check(CLI::IsMember({"vd", "lenet5", "dominance", "scratch"}))
      ->capture_default_str();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every layer type");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (train->parsed()) return cmd_train(common);
    if (sweep->parsed()) return cmd_sweep(common, no_checkpoints);
    if (lottery->parsed()) return cmd_harness(common, Variant::Lottery);
    if (scratch->parsed()) return cmd_harness(common, Variant::ScratchE);
    if (report->parsed()) return cmd_report(frontier, method, distribution, flops, thresholds, data_dir, output);
    if (verify->parsed()) return cmd_verify(common, cache_dir, suites);
    if (gradcheck->parsed()) return cmd_gradcheck();
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kRuntime;
  }
  return kValidation;
}
