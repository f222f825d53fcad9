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

#include "sparsekit/experiment.hpp"

#include <atomic>
#include <mutex>
#include <thread>

#include "sparsekit/errors.hpp"

namespace sparsekit {
namespace {

// Fixed so every run of a sweep sees the same synthetic samples.
constexpr std::uint64_t kSyntheticTrainSeed = 101;
constexpr std::uint64_t kSyntheticTestSeed = 202;

Dataset limited(Dataset d, std::uint64_t limit) {
  return limit == 0 || limit >= d.size() ? d : d.head(limit);
}

}  // namespace

DataSplits load_data(const Config& config) {
  DataSplits out;
  const std::string& source = config.get("data.source");
  if (source == "mnist") {
    const auto root = data_root(config.get("data.dir"));
    if (!mnist_available(root)) {
      throw ValidationError("MNIST IDX files not found in '" + root.string() +
                            "'; set data.dir or SPARSEKIT_DATA");
    }
    out.train = load_mnist(root, "train");
    out.test = load_mnist(root, "test");
  } else if (source == "synthetic") {
    const auto n = config.get_uint("data.synthetic_n");
    const auto classes = config.get_uint("data.synthetic_classes");
    out.train = synthetic_classification(n, classes, kSyntheticTrainSeed);
    out.test = synthetic_classification(std::max<std::uint64_t>(n / 4, classes), classes, kSyntheticTestSeed);
  } else {
    throw ValidationError("data.source must be mnist or synthetic");
  }
  out.train = limited(std::move(out.train), config.get_uint("data.train_limit"));
  out.test = limited(std::move(out.test), config.get_uint("data.test_limit"));
  return out;
}

std::vector<ThresholdPoint> threshold_sweep(const ModelSpec& spec, const ModelState& state,
                                            const std::vector<double>& thresholds,
                                            const Dataset& test, std::size_t threads) {
  std::vector<ThresholdPoint> out;
  TestTimeOptions opts;
  opts.method = Method::VariationalDropout;
  for (double t : thresholds) {
    opts.vd_threshold = t;
    const auto r = test_time_result(spec, state, opts, test, 1000, threads);
    out.push_back({t, r.sparsity, r.accuracy});
  }
  return out;
}

std::vector<double> parse_thresholds(const Config& config) {
  std::vector<double> out;
  for (const auto& s : config.get_list("vd.thresholds")) {
    Config tmp;
    tmp.set("vd.threshold", s);
    out.push_back(tmp.get_double("vd.threshold"));
  }
  return out;
}

SweepRow sweep_row(const TrainingRecord& run, const Config& config) {
  SweepRow row;
  const Method m = run.config.method;
  row.method = std::string(to_string(m));
  if (m == Method::Magnitude || m == Method::Random) row.sparsity_target = run.config.prune.final_sparsity;
  row.train_sparsity = run.train_sparsity;
  row.test_sparsity = run.test_sparsity;
  row.test_accuracy = run.test_accuracy;
  if (m == Method::VariationalDropout || m == Method::L0) row.reg_coefficient = run.config.reg_ramp.final_value;
  if (m == Method::VariationalDropout) row.threshold = run.config.vd_threshold;
  row.seed = run.config.seed;
  row.steps = run.steps_run;
  row.wall_clock = run.wall_clock;
  row.config_hash = config.hash_hex();
  return row;
}

TrainingRecord run_config(const Config& config, const DataSplits& data,
                          const std::filesystem::path& checkpoint, const TrainHooks& hooks) {
  const auto spec = model_from_config(config);
  const auto tc = train_config_from(config);
  auto rec = train(spec, tc, data.train, &data.test, {}, hooks);
  if (!checkpoint.empty()) {
    if (checkpoint.has_parent_path()) std::filesystem::create_directories(checkpoint.parent_path());
    // Write-then-rename so an interrupted run never leaves a torn file.
    auto tmp = checkpoint;
    tmp += ".tmp";
    checkpoint_from_run(rec, config).save(tmp);
    std::filesystem::rename(tmp, checkpoint);
    rec.checkpoint = checkpoint.string();
  }
  return rec;
}

RunCache::RunCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path RunCache::path_for(const Config& config) const {
  return dir_ / (config.get("model.name") + "-" + config.get("train.method") + "-" + config.hash_hex() + "-s" +
                 config.get("train.seed") + ".sprs");
}

bool RunCache::contains(const Config& config) const { return std::filesystem::exists(path_for(config)); }

LoadedRun RunCache::get(const Config& config, const DataSplits& data, const TrainHooks& hooks) {
  const auto path = path_for(config);
  if (!std::filesystem::exists(path)) run_config(config, data, path, hooks);
  auto loaded = run_from_checkpoint(Checkpoint::load(path));
  if (loaded.config.hash() != config.hash() || loaded.train.seed != train_config_from(config).seed) {
    throw ValidationError("cached checkpoint '" + path.string() + "' does not match its config");
  }
  const auto r = test_time_result(loaded.spec, loaded.record.final_state, test_time_options(loaded.train),
                                  data.test, loaded.train.eval_batch, loaded.train.eval_threads);
  loaded.record.test_accuracy = r.accuracy;
  loaded.record.test_sparsity = r.sparsity;
  loaded.record.layers = r.layers;
  loaded.record.checkpoint = path.string();
  return loaded;
}

SweepProgress run_sweep(const Config& grid, const DataSplits& data, SweepWriter& writer,
                        const std::filesystem::path& checkpoint_dir,
                        const std::function<void(const SweepRow&)>& on_row) {
  const auto points = grid.expand();
  // Validate everything up front: a typo should fail before hours of training.
  for (const auto& p : points) train_config_from(p);
  const auto workers = std::max<std::uint64_t>(1, grid.get_uint("sweep.workers"));

  SweepProgress progress;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  auto work = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      const Config& c = points[i];
      if (writer.contains(c.hash_hex(), c.get_uint("train.seed"))) {
        std::lock_guard lock(mu);
        ++progress.skipped;
        continue;
      }
      try {
        std::filesystem::path ck;
        if (!checkpoint_dir.empty()) {
          ck = checkpoint_dir / (c.get("train.method") + "-" + c.hash_hex() + "-s" + c.get("train.seed") + ".sprs");
        }
        const auto rec = run_config(c, data, ck);
        const auto row = sweep_row(rec, c);
        writer.append(row);
        std::lock_guard lock(mu);
        ++progress.completed;
        if (on_row) on_row(row);
      } catch (const NumericalError&) {
        std::lock_guard lock(mu);
        ++progress.failed;
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = points.size();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::uint64_t w = 1; w < std::min<std::uint64_t>(workers, points.size()); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return progress;
}

}  // namespace sparsekit
