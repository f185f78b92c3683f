#include "m4n/benchmark.hpp"

#include "json.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace m4n {
namespace {

using json = nlohmann::ordered_json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

json config_echo(const BenchConfig& cfg, std::uint64_t hash) {
  json j;
  j["dataset"] = cfg.dataset;
  j["dataset_fnv1a"] = hash;
  j["task"] = to_string(cfg.task);
  j["states"] = cfg.states ? json(*cfg.states) : json(nullptr);
  j["method"] = to_string(cfg.method);
  j["lambda_grid"] = cfg.lambda_grid;
  j["passes"] = cfg.passes;
  j["spmp_iters"] = cfg.spmp_iters;
  j["warm_start"] = cfg.warm_start;
  j["kernel_gamma"] = cfg.kernel_gamma ? json(*cfg.kernel_gamma) : json("median");
  j["seed"] = cfg.seed;
  j["splits"] = cfg.splits;
  j["oracle_error_delta"] = cfg.oracle_error_delta;
  j["standardize"] = cfg.standardize;
  j["gap_every"] = cfg.gap_every;
  j["gap_spmp_iters"] = cfg.gap_spmp_iters;
  j["timing"] = cfg.timing;
  return j;
}

}  // namespace

std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int j = 1; j <= 10; ++j) g.push_back(std::ldexp(1.0, -j));
  return g;
}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t dataset_hash, int split) {
  return splitmix64(splitmix64(seed ^ dataset_hash) + static_cast<std::uint64_t>(split));
}

SplitIndices make_split(std::size_t n, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("need at least 3 examples to split");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.6 * n)));
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.2 * n)));
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  s.test.assign(idx.begin() + n_train + n_val, idx.end());
  if (s.test.empty()) throw std::invalid_argument("split left no test examples");
  return s;
}

Dataset subset(const Dataset& d, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.inputs.resize(static_cast<Eigen::Index>(idx.size()), d.inputs.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = d.inputs.row(static_cast<Eigen::Index>(idx[i]));
    out.labels.push_back(d.labels[idx[i]]);
  }
  return out;
}

void standardize(Dataset& train, Dataset& val, Dataset& test) {
  const Eigen::RowVectorXd mean = train.inputs.colwise().mean();
  Eigen::RowVectorXd sd = ((train.inputs.rowwise() - mean).array().square().colwise().sum() /
                           static_cast<double>(train.inputs.rows()))
                              .sqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (!(sd(j) > 1e-12)) sd(j) = 1.0;
  }
  for (Dataset* d : {&train, &val, &test}) {
    d->inputs = (d->inputs.rowwise() - mean).array().rowwise() / sd.array();
  }
}

ExperimentResult run_benchmark(const BenchConfig& cfg) {
  if (cfg.splits < 1) throw std::invalid_argument("splits must be >= 1");
  if (cfg.lambda_grid.empty()) throw std::invalid_argument("lambda grid is empty");
  const LoadedDataset loaded = load_dataset(cfg.dataset, cfg.task, cfg.states);
  ExperimentResult res;
  res.dataset = std::filesystem::path(cfg.dataset).filename().string();
  res.method = cfg.method;
  res.dataset_hash = fnv1a_file(cfg.dataset);

  const bool write = !cfg.out_dir.empty();
  std::ofstream results, diagnostics;
  if (write) {
    std::filesystem::create_directories(cfg.out_dir);
    results = open_out(std::filesystem::path(cfg.out_dir) / "results.jsonl");
    diagnostics = open_out(std::filesystem::path(cfg.out_dir) / "diagnostics.jsonl");
  }

  using Clock = std::chrono::steady_clock;
  for (int s = 0; s < cfg.splits; ++s) {
    const auto t0 = Clock::now();
    SplitResult sr;
    sr.split = s;
    sr.split_seed = split_seed(cfg.seed, res.dataset_hash, s);
    const SplitIndices idx = make_split(loaded.data.size(), sr.split_seed);
    Dataset train = subset(loaded.data, idx.train);
    Dataset val = subset(loaded.data, idx.val);
    Dataset test = subset(loaded.data, idx.test);
    if (cfg.standardize) standardize(train, val, test);
    sr.kernel_gamma = cfg.kernel_gamma ? *cfg.kernel_gamma : median_heuristic(train.inputs, sr.split_seed);

    double best_val = std::numeric_limits<double>::infinity();
    for (double lambda : cfg.lambda_grid) {
      TrainConfig tc;
      tc.method = cfg.method;
      tc.passes = cfg.passes;
      tc.lambda = lambda;
      tc.spmp_iters = cfg.spmp_iters;
      tc.warm_start = cfg.warm_start;
      tc.seed = sr.split_seed;
      tc.oracle_error_delta = cfg.oracle_error_delta;
      tc.kernel = KernelSpec::gaussian(sr.kernel_gamma);
      tc.gap_every = cfg.gap_every;
      tc.gap_spmp_iters = cfg.gap_spmp_iters;
      auto log_pass = [&](const PassRecord& r) {
        if (!write) return;
        json j;
        j["dataset"] = res.dataset;
        j["method"] = to_string(cfg.method);
        j["split_seed"] = sr.split_seed;
        j["lambda"] = lambda;
        j["pass"] = r.pass;
        j["mean_oracle_gap"] = r.mean_oracle_gap;
        j["mean_oracle_iters"] = r.mean_oracle_iters;
        if (std::isfinite(r.dual_gap)) {
          j["dual_gap"] = r.dual_gap;
          j["dual_objective"] = r.dual_objective;
          j["primal_objective"] = r.primal_objective;
        }
        diagnostics << j.dump() << '\n';
      };
      const TrainResult tr = m4n::train(train, loaded.task, tc, log_pass);
      const double v = mean_loss(tr.model, val.inputs, val.labels);
      if (v < best_val) {
        best_val = v;
        sr.lambda = lambda;
        sr.val_loss = v;
        sr.test_loss = mean_loss(tr.model, test.inputs, test.labels);
      }
    }
    sr.wall_ms = cfg.timing ? std::chrono::duration<double, std::milli>(Clock::now() - t0).count() : 0.0;
    if (write) {
      json j;
      j["dataset"] = res.dataset;
      j["method"] = to_string(cfg.method);
      j["split_seed"] = sr.split_seed;
      j["lambda"] = sr.lambda;
      j["val_loss"] = sr.val_loss;
      j["test_loss"] = sr.test_loss;
      j["passes"] = cfg.passes;
      j["K"] = cfg.spmp_iters;
      j["warm_start"] = cfg.warm_start;
      j["wall_ms"] = sr.wall_ms;
      results << j.dump() << '\n';
    }
    res.splits.push_back(sr);
  }

  std::vector<double> losses;
  for (const SplitResult& s : res.splits) losses.push_back(s.test_loss);
  const double n = static_cast<double>(losses.size());
  res.mean = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
  double ss = 0.0;
  for (double l : losses) ss += (l - res.mean) * (l - res.mean);
  res.stddev = losses.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  res.min = *std::min_element(losses.begin(), losses.end());
  res.max = *std::max_element(losses.begin(), losses.end());

  if (write) {
    const std::filesystem::path dir(cfg.out_dir);
    json sj;
    sj["dataset"] = res.dataset;
    sj["task"] = loaded.task.name();
    sj["method"] = to_string(cfg.method);
    sj["splits"] = res.splits.size();
    sj["mean_test_loss"] = res.mean;
    sj["std_test_loss"] = res.stddev;
    sj["min_test_loss"] = res.min;
    sj["max_test_loss"] = res.max;
    json per = json::array();
    for (const SplitResult& s : res.splits) {
      per.push_back({{"split", s.split}, {"split_seed", s.split_seed}, {"lambda", s.lambda},
                     {"kernel_gamma", s.kernel_gamma}, {"val_loss", s.val_loss}, {"test_loss", s.test_loss}});
    }
    sj["per_split"] = per;
    open_out(dir / "summary.json") << sj.dump(2) << '\n';

    std::ostringstream txt;
    txt << std::left << std::setw(20) << "dataset" << std::setw(8) << "method" << std::setw(8) << "splits"
        << std::setw(14) << "mean" << std::setw(14) << "std" << "\n";
    txt << std::setw(20) << res.dataset << std::setw(8) << to_string(cfg.method) << std::setw(8)
        << res.splits.size() << std::setw(14) << std::setprecision(6) << res.mean << std::setw(14) << res.stddev
        << "\n";
    open_out(dir / "summary.txt") << txt.str();

    json rc = config_echo(cfg, res.dataset_hash);
    json seeds = json::array();
    for (const SplitResult& s : res.splits) seeds.push_back(s.split_seed);
    rc["split_seeds"] = seeds;
    open_out(dir / "run_config.json") << rc.dump(2) << '\n';
  }
  return res;
}

}  // namespace m4n
