// m4n command-line driver: train, bench, synth, calib.
#include "m4n/benchmark.hpp"
#include "m4n/calibration.hpp"
#include "m4n/synth.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitParse = 2;
constexpr int kExitTraining = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    double v;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw UsageError("invalid number '" + tok + "' in list '" + s + "'");
    }
    if (used != tok.size()) throw UsageError("invalid number '" + tok + "' in list '" + s + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

std::optional<double> parse_gamma(const std::string& s) {
  if (s == "median") return std::nullopt;
  const std::vector<double> v = parse_list(s);
  if (v.size() != 1 || !(v[0] > 0.0)) throw UsageError("--kernel-gamma must be 'median' or a positive number");
  return v[0];
}

bool parse_onoff(const std::string& s) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw UsageError("expected 'on' or 'off', found '" + s + "'");
}

// Raw flag values; empty optionals mean "not given on the command line".
struct RunFlags {
  std::string config;
  std::optional<std::string> dataset, task, method, lambda_grid, warm_start, kernel_gamma, out;
  std::optional<double> lambda, oracle_error_delta;
  std::optional<int> states, passes, spmp_iters, splits, gap_every, gap_spmp_iters;
  std::optional<std::uint64_t> seed;
  bool timing = false;
  bool no_standardize = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file; command-line flags override its keys");
  cmd->add_option("--data", f.dataset, "dataset file");
  cmd->add_option("--task", f.task, "multiclass | ordinal | sequence | ranking");
  cmd->add_option("--states", f.states, "number of classes or states (default: largest label)");
  cmd->add_option("--method", f.method, "m4n | m3n");
  cmd->add_option("--lambda", f.lambda, "single regularization value");
  cmd->add_option("--lambda-grid", f.lambda_grid, "comma-separated lambda values");
  cmd->add_option("--passes", f.passes, "passes over the training set");
  cmd->add_option("--spmp-iters", f.spmp_iters, "SP-MP iterations per oracle call");
  cmd->add_option("--warm-start", f.warm_start, "on | off");
  cmd->add_option("--kernel-gamma", f.kernel_gamma, "median | <float>");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--splits", f.splits, "number of random splits");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--oracle-error-delta", f.oracle_error_delta, "SP-MP error schedule scale (0 = fixed K)");
  cmd->add_option("--gap-every", f.gap_every, "passes between logged dual gaps");
  cmd->add_option("--gap-spmp-iters", f.gap_spmp_iters, "SP-MP budget for dual-gap bounds");
  cmd->add_flag("--timing", f.timing, "record wall-clock times (output is no longer byte-reproducible)");
  cmd->add_flag("--no-standardize", f.no_standardize, "keep raw feature scales");
}

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

std::string lambda_list(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (!v.is_array()) throw UsageError("config key '" + key + "' must be a list");
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + json(get_as<double>(x, key)).dump();
  return s;
}

// Fills unset flags from the config file.
void merge_config(RunFlags& f) {
  if (f.config.empty()) return;
  std::ifstream in(f.config);
  if (!in) throw UsageError("cannot open config '" + f.config + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + f.config + "': " + e.what());
  }
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  static const std::set<std::string> known = {
      "dataset", "task", "states", "method", "lambda", "lambda_grid", "passes", "spmp_iters", "warm_start",
      "kernel_gamma", "seed", "splits", "out", "oracle_error_delta", "gap_every", "gap_spmp_iters",
      "timing", "standardize"};
  for (const auto& [key, v] : j.items()) {
    if (!known.count(key)) throw UsageError("config '" + f.config + "': unknown key '" + key + "'");
    if (key == "dataset" && !f.dataset) f.dataset = get_as<std::string>(v, key);
    if (key == "task" && !f.task) f.task = get_as<std::string>(v, key);
    if (key == "states" && !f.states) f.states = get_as<int>(v, key);
    if (key == "method" && !f.method) f.method = get_as<std::string>(v, key);
    if (key == "lambda" && !f.lambda) f.lambda = get_as<double>(v, key);
    if (key == "lambda_grid" && !f.lambda_grid) f.lambda_grid = lambda_list(v, key);
    if (key == "passes" && !f.passes) f.passes = get_as<int>(v, key);
    if (key == "spmp_iters" && !f.spmp_iters) f.spmp_iters = get_as<int>(v, key);
    if (key == "warm_start" && !f.warm_start) {
      f.warm_start = v.is_boolean() ? (v.get<bool>() ? "on" : "off") : get_as<std::string>(v, key);
    }
    if (key == "kernel_gamma" && !f.kernel_gamma) {
      f.kernel_gamma = v.is_number() ? v.dump() : get_as<std::string>(v, key);
    }
    if (key == "seed" && !f.seed) f.seed = get_as<std::uint64_t>(v, key);
    if (key == "splits" && !f.splits) f.splits = get_as<int>(v, key);
    if (key == "out" && !f.out) f.out = get_as<std::string>(v, key);
    if (key == "oracle_error_delta" && !f.oracle_error_delta) f.oracle_error_delta = get_as<double>(v, key);
    if (key == "gap_every" && !f.gap_every) f.gap_every = get_as<int>(v, key);
    if (key == "gap_spmp_iters" && !f.gap_spmp_iters) f.gap_spmp_iters = get_as<int>(v, key);
    if (key == "timing" && get_as<bool>(v, key)) f.timing = true;
    if (key == "standardize" && !get_as<bool>(v, key)) f.no_standardize = true;
  }
}

m4n::BenchConfig to_bench(RunFlags f, bool single_run) {
  merge_config(f);
  m4n::BenchConfig c;
  if (!f.dataset) throw UsageError("no dataset given (--data or config key 'dataset')");
  c.dataset = *f.dataset;
  if (!std::filesystem::is_regular_file(c.dataset)) throw UsageError("dataset file '" + c.dataset + "' not found");
  try {
    if (f.task) c.task = m4n::parse_task_kind(*f.task);
    if (f.method) c.method = m4n::parse_method(*f.method);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  c.states = f.states;
  if (f.lambda && f.lambda_grid) throw UsageError("give --lambda or --lambda-grid, not both");
  if (f.lambda) c.lambda_grid = {*f.lambda};
  if (f.lambda_grid) c.lambda_grid = parse_list(*f.lambda_grid);
  for (double l : c.lambda_grid) {
    if (!(l > 0.0)) throw UsageError("lambda values must be positive");
  }
  if (f.passes) c.passes = *f.passes;
  if (f.spmp_iters) c.spmp_iters = *f.spmp_iters;
  if (f.warm_start) c.warm_start = parse_onoff(*f.warm_start);
  if (f.kernel_gamma) c.kernel_gamma = parse_gamma(*f.kernel_gamma);
  if (f.seed) c.seed = *f.seed;
  c.splits = f.splits ? *f.splits : (single_run ? 1 : 14);
  if (f.out) c.out_dir = *f.out;
  if (f.oracle_error_delta) c.oracle_error_delta = *f.oracle_error_delta;
  if (f.gap_every) c.gap_every = *f.gap_every;
  if (f.gap_spmp_iters) c.gap_spmp_iters = *f.gap_spmp_iters;
  c.timing = f.timing;
  c.standardize = !f.no_standardize;
  if (c.passes < 0 || c.spmp_iters < 1 || c.splits < 1) throw UsageError("passes >= 0, spmp-iters >= 1, splits >= 1 required");
  return c;
}

int run(const RunFlags& f, bool single_run) {
  const m4n::BenchConfig cfg = to_bench(f, single_run);
  const m4n::ExperimentResult r = m4n::run_benchmark(cfg);
  std::cout << r.dataset << " " << m4n::to_string(r.method) << " splits=" << r.splits.size()
            << " mean_test_loss=" << r.mean << " std=" << r.stddev << "\n";
  return 0;
}

int synth(const m4n::SynthParams& p, const std::string& out) {
  const m4n::SynthResult r = m4n::synth_generate(p);
  if (out.empty()) throw UsageError("synth needs --out <file>");
  if (const auto dir = std::filesystem::path(out).parent_path(); !dir.empty()) std::filesystem::create_directories(dir);
  m4n::write_synth(out, r);
  std::cout << "wrote " << r.data.size() << " examples (" << r.task.name() << ") to " << out;
  if (r.bayes_error) std::cout << ", bayes error " << *r.bayes_error;
  std::cout << "\n";
  return 0;
}

int calib(const std::string& task, int k, int length, const std::string& eps, const m4n::ZetaOptions& o,
          const std::string& out) {
  m4n::TaskSpec t = m4n::TaskSpec::multiclass(2);
  const m4n::TaskKind kind = [&] {
    try {
      return m4n::parse_task_kind(task);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  switch (kind) {
    case m4n::TaskKind::multiclass: t = m4n::TaskSpec::multiclass(k); break;
    case m4n::TaskKind::ordinal: t = m4n::TaskSpec::ordinal(k); break;
    case m4n::TaskKind::chain: t = m4n::TaskSpec::chain(length, k); break;
    case m4n::TaskKind::ranking: t = m4n::TaskSpec::ranking(k); break;
  }
  json j;
  j["task"] = t.name();
  j["constant_c"] = m4n::constant_c(t);
  if (kind == m4n::TaskKind::ranking) {
    const auto d = m4n::ranking_d_bound(k);
    j["d_bound"] = d.d_bound;
    j["decomposition_error"] = d.max_error;
  }
  if (t.embed_dim() <= 6) {
    const m4n::CalibrationEstimate e = m4n::zeta_bruteforce(t, parse_list(eps), o);
    json rows = json::array();
    for (std::size_t i = 0; i < e.epsilons.size(); ++i) {
      json r;
      r["epsilon"] = e.epsilons[i];
      if (e.witnesses[i]) {
        const auto& w = *e.witnesses[i];
        r["zeta"] = e.zeta[i];
        r["delta_l"] = w.delta_l;
        r["delta_s_lower"] = w.delta_s_lower;
        r["v"] = std::vector<double>(w.v.data(), w.v.data() + w.v.size());
        r["mu"] = std::vector<double>(w.mu.data(), w.mu.data() + w.mu.size());
      } else {
        r["zeta"] = "no feasible pair found";
      }
      rows.push_back(r);
    }
    j["zeta"] = rows;
    j["pairs_evaluated"] = e.pairs_evaluated;
  }
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::filesystem::create_directories(out);
    std::ofstream(std::filesystem::path(out) / "calibration.json") << j.dump(2) << "\n";
    std::cout << "wrote " << (std::filesystem::path(out) / "calibration.json").string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"m4n: structured prediction training, benchmarks, synthetic data and calibration"};
  app.require_subcommand(1);

  RunFlags train_flags, bench_flags;
  add_run_flags(app.add_subcommand("train", "train on one split and report test loss"), train_flags);
  add_run_flags(app.add_subcommand("bench", "split / lambda-selection benchmark protocol"), bench_flags);

  m4n::SynthParams sp;
  std::string synth_out, rho;
  auto* sc = app.add_subcommand("synth", "generate a synthetic dataset and its Bayes predictor");
  sc->add_option("--kind", sp.kind, "blobs | flat-noise | ordinal | hmm | ranking");
  sc->add_option("--n", sp.n, "number of examples");
  sc->add_option("--k", sp.k, "classes (blobs, ordinal)");
  sc->add_option("--dim", sp.dim, "input dimension (per position for hmm)");
  sc->add_option("--separation", sp.separation, "center spacing (blobs, hmm)");
  sc->add_option("--rho", rho, "class probabilities for flat-noise, comma-separated");
  sc->add_option("--length", sp.length, "sequence length (hmm)");
  sc->add_option("--states", sp.states, "hidden states (hmm)");
  sc->add_option("--stay", sp.stay, "self-transition probability (hmm)");
  sc->add_option("--items", sp.items, "items to rank (ranking)");
  sc->add_option("--noise", sp.noise, "noise scale");
  sc->add_option("--seed", sp.seed, "seed");
  sc->add_option("--out", synth_out, "output file");

  std::string calib_task = "multiclass", calib_eps = "0.1,0.3,0.5", calib_out;
  int calib_k = 3, calib_length = 2;
  m4n::ZetaOptions zo;
  auto* cc = app.add_subcommand("calib", "calibration constants by randomized search");
  cc->add_option("--task", calib_task, "multiclass | ordinal | sequence | ranking");
  cc->add_option("--k", calib_k, "classes, states per position, or items");
  cc->add_option("--length", calib_length, "sequence length");
  cc->add_option("--eps", calib_eps, "comma-separated epsilon grid");
  cc->add_option("--v-samples", zo.v_samples, "score vectors screened");
  cc->add_option("--mu-samples", zo.mu_samples, "random moment vectors screened");
  cc->add_option("--seed", zo.seed, "seed");
  cc->add_option("--out", calib_out, "output directory (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParse;
  }

  try {
    if (app.got_subcommand("train")) return run(train_flags, true);
    if (app.got_subcommand("bench")) return run(bench_flags, false);
    if (app.got_subcommand("synth")) {
      if (!rho.empty()) sp.rho = parse_list(rho);
      return synth(sp, synth_out);
    }
    if (app.got_subcommand("calib")) return calib(calib_task, calib_k, calib_length, calib_eps, zo, calib_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const m4n::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const m4n::TrainingFailure& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kExitTraining;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTraining;
  }
  return 0;
}
