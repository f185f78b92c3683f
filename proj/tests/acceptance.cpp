// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance <path-to-cli> <data-dir> <scratch-dir>

#include "oracles.hpp"

#include "m4n/calibration.hpp"
#include "m4n/projections.hpp"
#include "m4n/spmp.hpp"
#include "m4n/synth.hpp"
#include "m4n/trainer.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

using namespace m4n;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string cli_path, data_dir;
fs::path scratch;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int run_cli(const std::string& args) {
  const std::string cmd = cli_path + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Closed-form saddle values at K = 2000.
Outcome closed_forms() {
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  const TaskSpec bin = TaskSpec::multiclass(2);
  for (int rep = 0; rep < 200; ++rep) {
    const bool binary = rep % 2 == 0;
    const TaskSpec task = binary ? bin : TaskSpec::ordinal(rep % 4 == 1 ? 3 : 4);
    const Vector v = oracle::random_normal(rng, task.embed_dim(), 1.5);
    SpmpOptions opts;
    opts.iterations = 2000;
    opts.eta = simplex_span_eta(task);
    const OracleResult r = spmp_solve(v, task, opts);
    // Binary: with s = (v1 - v2) / 2 the value is (v1 + v2) / 2 + max(|s|, 1/2).
    const double want = binary ? 0.5 * (v(0) + v(1)) + oracle::omega_binary(0.5 * (v(0) - v(1)))
                               : oracle::omega_ordinal(v);
    worst = std::max(worst, std::abs(r.saddle_value - want));
  }
  return {worst <= 2e-3, "max |saddle - closed form| = " + fmt(worst) + " (tol 2e-3)"};
}

Outcome spmp_rate() {
  std::mt19937_64 rng(1002);
  double worst_ratio = 0.0;
  bool ok = true;
  for (int rep = 0; rep < 100; ++rep) {
    const TaskSpec task = TaskSpec::multiclass(rep % 2 ? 5 : 3);
    const double L = spmp_constants(task).lipschitz;
    const Vector v = oracle::random_normal(rng, task.embed_dim());
    for (int K : {10, 40, 160}) {
      SpmpOptions opts;
      opts.iterations = K;
      const double gap = spmp_solve(v, task, opts).gap;
      ok = ok && gap <= 4.0 * L / K + 1e-6;
      worst_ratio = std::max(worst_ratio, gap / (4.0 * L / K));
    }
  }
  return {ok, "max gap / (4L/K) = " + fmt(worst_ratio)};
}

Outcome projections() {
  std::mt19937_64 rng(1003);
  double chain_err = 0.0;
  for (int rep = 0; rep < 500; ++rep) {
    const TaskSpec task = TaskSpec::chain(1 + rep % 3, 2 + (rep / 3) % 2);
    const Vector prev = oracle::random_moments(rng, task);
    const Vector g = oracle::random_normal(rng, task.embed_dim());
    const double eta = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
    const PolytopeState out = project_chain_entropic({task.layout(), prev}, g, eta);
    chain_err = std::max(chain_err, (out.values - oracle::chain_projection(task, prev, g, eta)).lpNorm<Eigen::Infinity>());
  }
  double sink_err = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const int M = 2 + rep % 4;
    Matrix prev(M, M), g(M, M);
    for (int i = 0; i < M * M; ++i) {
      prev.data()[i] = std::exponential_distribution<double>()(rng) + 1e-3;
      g.data()[i] = std::normal_distribution<double>()(rng);
    }
    const Matrix q = project_birkhoff_sinkhorn(prev, g, 2.0).plan;
    sink_err = std::max({sink_err, (q.rowwise().sum().array() - 1.0).abs().maxCoeff(),
                         (q.colwise().sum().array() - 1.0).abs().maxCoeff()});
  }
  double simplex_err = 0.0;
  for (int rep = 0; rep < 500; ++rep) {
    const int k = 2 + rep % 5;
    const Vector prev = oracle::random_simplex(rng, k);
    const Vector u = oracle::random_normal(rng, k);
    const double eta = std::exp(std::uniform_real_distribution<double>(-2, 1)(rng));
    const Vector ours = project_simplex_entropic(prev, u, eta);
    const Vector ref = oracle::simplex_bregman_numeric(prev, u, eta);
    simplex_err = std::max(simplex_err, oracle::simplex_bregman_objective(ours, prev, u, eta) -
                                            oracle::simplex_bregman_objective(ref, prev, u, eta));
  }
  const bool ok = chain_err <= 1e-9 && sink_err <= 1e-9 && simplex_err <= 1e-6;
  return {ok, "chain vs Gibbs " + fmt(chain_err) + ", Sinkhorn marginals " + fmt(sink_err) +
                  ", simplex objective excess " + fmt(simplex_err)};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double lx = std::log(x[j]), ly = std::log(y[j]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Outcome gbcfw_trend() {
  SynthParams p;
  p.kind = "blobs";
  p.n = 120;
  p.k = 3;
  p.separation = 2.0;
  p.seed = 42;
  const SynthResult data = synth_generate(p);
  const std::vector<int> checkpoints = {5, 10, 20, 40};
  std::vector<std::vector<double>> gaps(checkpoints.size());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg;
    cfg.lambda = 0.1;
    cfg.passes = 40;
    cfg.seed = seed;
    cfg.spmp_iters = 20;
    cfg.kernel = KernelSpec::gaussian(median_heuristic(data.data.inputs));
    cfg.gap_every = 5;
    cfg.gap_spmp_iters = 1000;
    const TrainResult r = gbcfw_train(data.data, data.task, cfg);
    for (std::size_t j = 0; j < checkpoints.size(); ++j) gaps[j].push_back(r.report.passes[checkpoints[j] - 1].dual_gap);
  }
  std::vector<double> med, xs;
  bool decreasing = true;
  std::string detail = "median gaps";
  for (std::size_t j = 0; j < checkpoints.size(); ++j) {
    med.push_back(median(gaps[j]));
    xs.push_back(checkpoints[j]);
    detail += " " + fmt(med.back());
    if (j > 0 && !(med[j] < med[j - 1])) decreasing = false;
  }
  const double slope = loglog_slope(xs, med);
  return {decreasing && slope <= -0.8, detail + ", slope " + fmt(slope)};
}

struct FlatRun {
  double agreement;
  double error;
};

FlatRun flat_noise_run(const std::vector<double>& rho, std::uint64_t seed, Method method) {
  SynthParams p;
  p.kind = "flat-noise";
  p.rho = rho;
  p.dim = 2;
  p.n = 2000;
  p.seed = 100 + seed;
  const SynthResult tr = synth_generate(p);
  p.n = 1000;
  p.seed = 200 + seed;
  const SynthResult te = synth_generate(p);
  TrainConfig cfg;
  cfg.method = method;
  cfg.lambda = 0.01;
  cfg.passes = 10;
  cfg.spmp_iters = 20;
  cfg.seed = seed;
  cfg.gap_every = 0;
  cfg.gap_spmp_iters = 20;
  cfg.kernel = KernelSpec::gaussian(median_heuristic(tr.data.inputs, seed));
  const TrainResult r = train(tr.data, tr.task, cfg);
  const std::vector<Label> pred = r.model.predict(te.data.inputs);
  double agree = 0, err = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    agree += pred[i] == te.bayes[i];
    err += pred[i] != te.data.labels[i];
  }
  return {agree / pred.size(), err / pred.size()};
}

Outcome consistency() {
  const std::vector<double> flat = {0.4, 0.35, 0.25}, sharp = {0.98, 0.01, 0.01};
  bool m4n_ok = true;
  double m3n_mean = 0.0, worst_gap = 0.0;
  std::string m4n_s = "M4N agreement", m3n_s = "M3N agreement";
  for (std::uint64_t s = 0; s < 5; ++s) {
    const FlatRun a = flat_noise_run(flat, s, Method::m4n);
    const FlatRun b = flat_noise_run(flat, s, Method::m3n);
    m4n_ok = m4n_ok && a.agreement >= 0.95;
    m3n_mean += b.agreement / 5.0;
    m4n_s += " " + fmt(a.agreement);
    m3n_s += " " + fmt(b.agreement);
    const FlatRun c = flat_noise_run(sharp, s, Method::m4n);
    const FlatRun d = flat_noise_run(sharp, s, Method::m3n);
    worst_gap = std::max(worst_gap, std::abs(c.error - d.error));
  }
  const bool ok = m4n_ok && m3n_mean < 0.95 && worst_gap <= 0.01;
  return {ok, m4n_s + "; " + m3n_s + " (mean " + fmt(m3n_mean) + "); near-deterministic |err diff| max " +
                  fmt(worst_gap)};
}

Outcome warm_start() {
  SynthParams p;
  p.kind = "ordinal";
  p.n = 100;
  p.k = 5;
  p.dim = 3;
  p.noise = 0.3;
  p.seed = 7;
  const SynthResult data = synth_generate(p);
  bool ok = true;
  std::string detail;
  for (int K : {10, 50}) {
    double final_gap[2];
    for (int warm = 0; warm < 2; ++warm) {
      double sum = 0.0;
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        TrainConfig cfg;
        cfg.lambda = 0.01;
        cfg.passes = 10;
        cfg.spmp_iters = K;
        cfg.warm_start = warm == 1;
        cfg.seed = seed;
        cfg.gap_every = 0;
        cfg.gap_spmp_iters = 20;
        cfg.kernel = KernelSpec::gaussian(median_heuristic(data.data.inputs));
        sum += gbcfw_train(data.data, data.task, cfg).report.passes.back().mean_oracle_gap;
      }
      final_gap[warm] = sum / 3.0;
    }
    ok = ok && final_gap[1] < final_gap[0];
    detail += (detail.empty() ? "" : "; ") + std::string("K=") + std::to_string(K) + " warm " + fmt(final_gap[1]) +
              " cold " + fmt(final_gap[0]);
  }
  return {ok, "final-pass mean oracle gap " + detail};
}

Outcome calibration() {
  const TaskSpec task = TaskSpec::multiclass(3);
  const std::vector<double> eps = {0.1, 0.2, 0.3, 0.4, 0.5};
  const CalibrationEstimate e = zeta_bruteforce(task, eps);
  bool ok = e.ratio_witness.has_value();
  double worst = INFINITY;
  auto check = [&](const ZetaWitness& w) {
    ok = ok && w.delta_s_lower >= w.delta_l / 3.0 - 0.02 * w.delta_l;
    worst = std::min(worst, w.delta_s_lower / w.delta_l);
  };
  int feasible = 0;
  for (const auto& w : e.witnesses) {
    if (w) check(*w), ++feasible;
  }
  if (e.ratio_witness) check(*e.ratio_witness);
  ok = ok && feasible == static_cast<int>(eps.size());
  double d_err = 0.0;
  for (int M = 1; M <= 5; ++M) {
    const PermutationDecomposition d = ranking_d_bound(M);
    ok = ok && d.d_bound == M && static_cast<int>(d.permutations.size()) == M;
    d_err = std::max(d_err, d.max_error);
  }
  ok = ok && d_err <= 1e-12;
  return {ok, "min delta_s/delta_l = " + fmt(worst) + " over " + std::to_string(e.pairs_evaluated) +
                  " pairs (bound 1/3 - 0.02); ranking decomposition error " + fmt(d_err)};
}

Outcome iris_band() {
  const fs::path out = scratch / "iris";
  const int code = run_cli("bench --data " + data_dir + "/iris.csv --task multiclass --method m4n --seed 0 --out " +
                           out.string());
  if (code != 0) return {false, "cli exited with " + std::to_string(code)};
  const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
  const double mean = j["mean_test_loss"].get<double>();
  const std::size_t splits = j["splits"].get<std::size_t>();
  return {splits == 14 && mean >= 0.01 && mean <= 0.08,
          "mean test error " + fmt(100 * mean) + "% over " + std::to_string(splits) + " splits (band 1%-8%)"};
}

Outcome determinism() {
  const fs::path base = scratch / "rerun";
  std::vector<std::string> cmds = {
      "synth --kind hmm --n 30 --length 4 --states 3 --seed 5 --out " + (base / "RUN" / "hmm.tsv").string(),
      "bench --data " + data_dir + "/iris.csv --splits 2 --passes 3 --lambda-grid 0.1,0.01 --out " +
          (base / "RUN" / "bench").string(),
      // Same input file for both runs: the config echo records its path.
      "train --data " + (base / "a" / "hmm.tsv").string() +
          " --task sequence --passes 2 --lambda 0.1 --method m3n --out " + (base / "RUN" / "seq").string(),
  };
  for (const char* run : {"a", "b"}) {
    for (std::string c : cmds) {
      for (std::size_t at; (at = c.find("RUN")) != std::string::npos;) c.replace(at, 3, run);
      if (const int code = run_cli(c); code != 0) return {false, "cli exited with " + std::to_string(code) + ": " + c};
    }
  }
  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(base / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), base / "a");
    if (slurp(entry.path()) != slurp(base / "b" / rel)) return {false, "differs: " + rel.string()};
    ++files;
  }
  return {files >= 10, std::to_string(files) + " output files byte-identical across reruns"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 4) {
    std::cerr << "usage: acceptance <cli> <data-dir> <scratch-dir>\n";
    return 2;
  }
  cli_path = argv[1];
  data_dir = argv[2];
  scratch = argv[3];
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  struct Criterion {
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"closed-form saddle values", 30, closed_forms},
      {"SP-MP gap rate", 60, spmp_rate},
      {"projection oracles", 120, projections},
      {"GBCFW dual-gap trend", 180, gbcfw_trend},
      {"consistency contrast", 300, consistency},
      {"warm-start effect", 300, warm_start},
      {"calibration constants", 300, calibration},
      {"iris benchmark band", 600, iris_band},
      {"CLI determinism", 600, determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs < criteria[i].limit_s;
    failures += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " " << criteria[i].name << ": " << o.detail
              << " [" << fmt(secs) << " s, limit " << criteria[i].limit_s << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
