#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hyperembed/config.hpp"
#include "hyperembed/errors.hpp"
#include "hyperembed/estimator.hpp"
#include "hyperembed/hypergraph.hpp"
#include "hyperembed/inference.hpp"
#include "hyperembed/jsonio.hpp"
#include "hyperembed/model.hpp"
#include "hyperembed/rng.hpp"
#include "hyperembed/simulate.hpp"

namespace fs = std::filesystem;
using namespace hyperembed;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool quiet = false;
};

// All outputs of a command are staged and written together, so a failing
// command never leaves partial files behind.
class OutputSet {
 public:
  void stage(const std::string& name, std::string content) {
    staged_.emplace_back(name, std::move(content));
  }

  void commit(const std::string& out_dir) {
    if (staged_.empty()) return;
    if (out_dir.empty()) throw ConfigError("this subcommand requires --out <dir>");
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    try {
      for (const auto& [name, content] : staged_) {
        const fs::path path = fs::path(out_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write output file: " + path.string());
        out << content;
        if (!out) throw DataError("short write on output file: " + path.string());
        written.push_back(path);
      }
    } catch (...) {
      for (const auto& p : written) {
        std::error_code ec;
        fs::remove(p, ec);
      }
      throw;
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> staged_;
};

Logger make_logger(const CommonOpts& opts) {
  if (opts.quiet) return {};
  return [](const std::string& line) { std::cerr << line << '\n'; };
}

ConfigMap load_config(const CommonOpts& opts) {
  if (opts.config_path.empty()) throw ConfigError("missing --config <path>");
  return ConfigMap::from_file(opts.config_path);
}

std::uint64_t effective_seed(const CommonOpts& opts, const ConfigMap& cfg,
                             const std::string& key, std::uint64_t fallback = 0) {
  if (opts.seed) return *opts.seed;
  return static_cast<std::uint64_t>(cfg.get_int_or(key, static_cast<long long>(fallback)));
}

Hypergraph load_input_hypergraph(const ConfigMap& cfg, const std::string& explicit_input) {
  const std::string path =
      !explicit_input.empty() ? explicit_input : cfg.get_string_or("input", "");
  if (path.empty()) throw ConfigError("missing input hyperlink file (config key 'input')");
  std::optional<int> n_hint;
  if (cfg.has("n_hint")) n_hint = static_cast<int>(cfg.get_int("n_hint"));
  return parse_hyperlinks_file(path, n_hint);
}

// ---- subcommands -------------------------------------------------------------

int cmd_audit(const CommonOpts& opts, const std::string& input, std::optional<int> n_hint_flag) {
  Hypergraph hg;
  if (!input.empty()) {
    hg = parse_hyperlinks_file(input, n_hint_flag);
  } else {
    const ConfigMap cfg = load_config(opts);
    hg = load_input_hypergraph(cfg, "");
  }
  const std::string json = audit_to_json(audit(hg));
  std::cout << json << '\n';
  if (!opts.out_dir.empty()) {
    OutputSet outputs;
    outputs.stage("audit.json", json + "\n");
    outputs.commit(opts.out_dir);
  }
  return kExitOk;
}

int cmd_simulate(const CommonOpts& opts) {
  const ConfigMap cfg = load_config(opts);
  SimDesign design = load_sim_design(cfg, "sim.");
  if (opts.seed) design.seed = *opts.seed;

  const GroundTruth gt = gen_ground_truth(design);
  const Hypergraph hg = gen_hypergraph(gt, child_seed(design.seed, 1));

  JsonWriter w;
  w.begin_object();
  w.key("design").begin_object();
  w.field("n", design.n, false);
  w.field("m", design.m);
  w.field("K", design.k);
  w.field("rho", design.rho);
  w.field("beta_star", design.beta_star);
  w.field("seed", static_cast<unsigned long long>(design.seed));
  w.end_object();
  w.comma().key("params").raw(model_params_to_json(gt.params));
  w.field("alpha_dagger", gt.alpha_dagger);
  w.end_object();
  const std::string gt_json = w.str();

  OutputSet outputs;
  outputs.stage("hyperlinks.txt", write_hyperlinks(hg));
  outputs.stage("ground_truth.json", gt_json + "\n");
  outputs.commit(opts.out_dir);
  const Logger log = make_logger(opts);
  if (log) log("simulate: wrote hyperlinks.txt and ground_truth.json");
  return kExitOk;
}

int cmd_fit(const CommonOpts& opts, const std::string& input) {
  const ConfigMap cfg = load_config(opts);
  const Hypergraph hg = load_input_hypergraph(cfg, input);
  FitConfig fc = load_fit_config(cfg, "fit.");
  if (opts.seed) fc.seed = *opts.seed;
  const std::string estimator = cfg.get_string_or("estimator", "f2");

  FitResult result;
  if (estimator == "f2") {
    result = fit(incidence(hg), fc);
  } else if (estimator == "f1") {
    result = fit_f1(incidence(hg), fc);
  } else {
    throw ConfigError("estimator must be 'f2' or 'f1', got '" + estimator + "'");
  }

  const Logger log = make_logger(opts);
  if (log) {
    log("fit: m=" + std::to_string(result.m()) + " n=" + std::to_string(result.n()) +
        " iterations=" + std::to_string(result.iterations) +
        " converged=" + (result.converged ? std::string("true") : std::string("false")));
    if (result.degenerate_spectrum) {
      log("fit: warning: near-degenerate spectral gaps in the identifiability transform");
    }
  }

  OutputSet outputs;
  outputs.stage("fit.json", fit_result_to_json(result) + "\n");
  outputs.commit(opts.out_dir);
  return kExitOk;
}

std::vector<std::pair<int, int>> parse_pairs(const ConfigMap& cfg, const std::string& key,
                                             int m, int n) {
  std::vector<std::pair<int, int>> out;
  if (!cfg.has(key)) return out;
  for (const std::string& s : cfg.get_string_list(key)) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("pair '" + s + "' must look like 'j:i' (1-based)");
    }
    const int j = std::stoi(s.substr(0, colon));
    const int i = std::stoi(s.substr(colon + 1));
    if (j < 1 || j > m || i < 1 || i > n) {
      throw ConfigError("pair '" + s + "' out of range for an " + std::to_string(m) + "x" +
                        std::to_string(n) + " fit");
    }
    out.emplace_back(j - 1, i - 1);
  }
  return out;
}

int cmd_infer(const CommonOpts& opts) {
  const ConfigMap cfg = load_config(opts);
  const std::string fit_path = cfg.get_string_or("fit", "");
  if (fit_path.empty()) throw ConfigError("missing config key 'fit' (path to fit.json)");
  std::ifstream in(fit_path);
  if (!in) throw DataError("cannot open fit file: " + fit_path);
  std::stringstream buf;
  buf << in.rdbuf();
  const FitResult fr = fit_result_from_json(buf.str());
  const double level = cfg.get_double_or("level", 0.95);

  std::vector<std::string> targets =
      cfg.has("targets") ? cfg.get_string_list("targets")
                         : std::vector<std::string>{"alpha_dagger", "z", "f"};
  const PluginCovariances pc(fr.params);

  std::vector<IntervalRow> rows;
  for (const std::string& t : targets) {
    if (t == "all") {
      targets = {"alpha_dagger", "z", "f"};
      if (cfg.has("pairs")) {
        targets.push_back("theta");
        targets.push_back("p");
      }
    }
  }
  for (const std::string& t : targets) {
    if (t == "alpha_dagger" || t == "alpha") {
      for (int i = 0; i < pc.n(); ++i) {
        rows.push_back(make_interval_row(pc, {TargetKind::AlphaDagger, i, -1, -1}, level));
      }
    } else if (t == "z") {
      for (int i = 0; i < pc.n(); ++i) {
        for (int c = 0; c < pc.k(); ++c) {
          rows.push_back(make_interval_row(pc, {TargetKind::ZEntry, i, -1, c}, level));
        }
      }
    } else if (t == "f") {
      for (int j = 0; j < pc.m(); ++j) {
        for (int c = 0; c < pc.k(); ++c) {
          rows.push_back(make_interval_row(pc, {TargetKind::FEntry, -1, j, c}, level));
        }
      }
    } else if (t == "theta") {
      for (const auto& [j, i] : parse_pairs(cfg, "pairs", pc.m(), pc.n())) {
        rows.push_back(make_interval_row(pc, {TargetKind::Theta, i, j, -1}, level));
      }
    } else if (t == "p") {
      for (const auto& [j, i] : parse_pairs(cfg, "pairs", pc.m(), pc.n())) {
        rows.push_back(make_interval_row(pc, {TargetKind::Prob, i, j, -1}, level));
      }
    } else {
      throw ConfigError("unknown target '" + t +
                        "' (expected alpha_dagger, z, f, theta, p, or all)");
    }
  }

  OutputSet outputs;
  outputs.stage("intervals.csv", intervals_to_csv(rows));
  outputs.commit(opts.out_dir);
  const Logger log = make_logger(opts);
  if (log) log("infer: wrote " + std::to_string(rows.size()) + " interval rows");
  return kExitOk;
}

int cmd_ellipses(const CommonOpts& opts) {
  const ConfigMap cfg = load_config(opts);
  const std::string fit_path = cfg.get_string_or("fit", "");
  if (fit_path.empty()) throw ConfigError("missing config key 'fit' (path to fit.json)");
  std::ifstream in(fit_path);
  if (!in) throw DataError("cannot open fit file: " + fit_path);
  std::stringstream buf;
  buf << in.rdbuf();
  const FitResult fr = fit_result_from_json(buf.str());
  const double level = cfg.get_double_or("level", 0.95);

  std::vector<int> vertices;
  if (cfg.has("vertices")) {
    for (long long v : cfg.get_int_list("vertices")) {
      if (v < 1 || v > fr.n()) {
        throw ConfigError("vertex " + std::to_string(v) + " out of range");
      }
      vertices.push_back(static_cast<int>(v - 1));
    }
  } else {
    // default: ten highest-degree-parameter vertices
    std::vector<int> order(fr.n());
    for (int i = 0; i < fr.n(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return fr.params.alpha_dagger[a] > fr.params.alpha_dagger[b];
    });
    order.resize(std::min<std::size_t>(10, order.size()));
    vertices = order;
  }

  std::vector<std::string> labels;
  if (cfg.has("labels")) labels = cfg.get_string_list("labels");

  const PluginCovariances pc(fr.params);
  std::vector<std::pair<int, ConfidenceEllipse>> ellipses;
  ellipses.reserve(vertices.size());
  for (int v : vertices) ellipses.emplace_back(v, confidence_ellipse(pc, v, level));

  std::vector<std::string> vertex_labels(fr.n());
  for (std::size_t idx = 0; idx < vertices.size() && idx < labels.size(); ++idx) {
    vertex_labels[vertices[idx]] = labels[idx];
  }
  for (int i = 0; i < fr.n(); ++i) {
    if (vertex_labels[i].empty()) vertex_labels[i] = std::to_string(i + 1);
  }

  OutputSet outputs;
  outputs.stage("ellipses.json", ellipses_to_json(ellipses) + "\n");
  outputs.stage("ellipses.svg", ellipses_to_svg(fr.params.Z, ellipses, vertex_labels));
  outputs.commit(opts.out_dir);
  const Logger log = make_logger(opts);
  if (log) log("ellipses: wrote " + std::to_string(ellipses.size()) + " confidence regions");
  return kExitOk;
}

int cmd_experiment_error(const CommonOpts& opts) {
  const ConfigMap cfg = load_config(opts);
  ErrorScalingConfig ec;
  for (long long v : cfg.get_int_list("n_grid")) ec.n_grid.push_back(static_cast<int>(v));
  ec.m_ratio = cfg.get_double_or("m_ratio", ec.m_ratio);
  if (cfg.has("m_grid")) {
    for (long long v : cfg.get_int_list("m_grid")) ec.m_grid.push_back(static_cast<int>(v));
  }
  if (cfg.has("k_grid")) {
    ec.k_grid.clear();
    for (long long v : cfg.get_int_list("k_grid")) ec.k_grid.push_back(static_cast<int>(v));
  }
  if (cfg.has("beta_grid")) ec.beta_grid = cfg.get_double_list("beta_grid");
  ec.rho = cfg.get_double_or("rho", ec.rho);
  ec.mc_reps = static_cast<int>(cfg.get_int_or("mc_reps", ec.mc_reps));
  ec.seed = effective_seed(opts, cfg, "seed");
  ec.fit = load_fit_config(cfg, "fit.");
  ec.threads = opts.threads;

  const auto cells = experiment_error_scaling(ec, make_logger(opts));
  OutputSet outputs;
  outputs.stage("error_scaling.csv", error_scaling_to_csv(cells));
  outputs.commit(opts.out_dir);
  return kExitOk;
}

int cmd_experiment_coverage(const CommonOpts& opts) {
  const ConfigMap cfg = load_config(opts);
  CoverageConfig cc;
  for (long long v : cfg.get_int_list("n_grid")) cc.n_grid.push_back(static_cast<int>(v));
  if (cfg.has("beta_grid")) cc.beta_grid = cfg.get_double_list("beta_grid");
  cc.level = cfg.get_double_or("level", cc.level);
  cc.rho = cfg.get_double_or("rho", cc.rho);
  cc.k = static_cast<int>(cfg.get_int_or("k", cc.k));
  cc.mc_reps = static_cast<int>(cfg.get_int_or("mc_reps", cc.mc_reps));
  cc.seed = effective_seed(opts, cfg, "seed");
  cc.fit = load_fit_config(cfg, "fit.");
  cc.threads = opts.threads;

  const auto cells = experiment_coverage(cc, make_logger(opts));
  OutputSet outputs;
  outputs.stage("coverage.csv", coverage_to_csv(cells));
  outputs.commit(opts.out_dir);
  return kExitOk;
}

int cmd_experiment_sparsity(const CommonOpts& opts) {
  const ConfigMap cfg = load_config(opts);
  SparsityConfig sc;
  for (long long v : cfg.get_int_list("n_grid")) sc.n_grid.push_back(static_cast<int>(v));
  const std::string mode = cfg.get_string_or("mode", "a_over_n");
  if (mode == "a_over_n") {
    sc.mode = SparsityMode::ConstantOverN;
  } else if (mode == "n_eps_over_n") {
    sc.mode = SparsityMode::PowerOverN;
  } else {
    throw ConfigError("mode must be 'a_over_n' or 'n_eps_over_n', got '" + mode + "'");
  }
  sc.a = cfg.get_double_or("a", sc.a);
  sc.eps = cfg.get_double_or("eps", sc.eps);
  sc.mc_reps = static_cast<int>(cfg.get_int_or("mc_reps", sc.mc_reps));
  sc.seed = effective_seed(opts, cfg, "seed");
  sc.threads = opts.threads;

  const auto cells = experiment_sparsity(sc, make_logger(opts));
  OutputSet outputs;
  outputs.stage("sparsity.csv", sparsity_to_csv(cells));
  outputs.commit(opts.out_dir);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent embedding models for general hypergraphs"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string audit_input, fit_input;
  std::optional<int> audit_n_hint;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "TOML or JSON config file");
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--seed", opts.seed, "seed override");
    sub->add_option("--threads", opts.threads, "worker threads (0 = all cores)");
    sub->add_flag("--quiet", opts.quiet, "suppress progress output");
  };

  CLI::App* audit_cmd = app.add_subcommand("audit", "degree/order/sparsity audit of a hyperlink file");
  audit_cmd->add_option("--input", audit_input, "hyperlink list file");
  audit_cmd->add_option("--n-hint", audit_n_hint, "vertex count hint");
  add_common(audit_cmd);

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "generate a synthetic hypergraph");
  add_common(simulate_cmd);

  CLI::App* fit_cmd = app.add_subcommand("fit", "constrained maximum likelihood fit");
  fit_cmd->add_option("--input", fit_input, "hyperlink list file (overrides config)");
  add_common(fit_cmd);

  CLI::App* infer_cmd = app.add_subcommand("infer", "confidence intervals from a fit");
  add_common(infer_cmd);

  CLI::App* ellipses_cmd = app.add_subcommand("ellipses", "embedding scatter with confidence regions");
  add_common(ellipses_cmd);

  CLI::App* exp_error_cmd = app.add_subcommand("experiment-error", "error scaling experiment");
  add_common(exp_error_cmd);

  CLI::App* exp_cov_cmd = app.add_subcommand("experiment-coverage", "interval coverage experiment");
  add_common(exp_cov_cmd);

  CLI::App* exp_sparse_cmd = app.add_subcommand("experiment-sparsity", "sparsity phase transition experiment");
  add_common(exp_sparse_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error[" << kExitConfig << "]: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (audit_cmd->parsed()) return cmd_audit(opts, audit_input, audit_n_hint);
    if (simulate_cmd->parsed()) return cmd_simulate(opts);
    if (fit_cmd->parsed()) return cmd_fit(opts, fit_input);
    if (infer_cmd->parsed()) return cmd_infer(opts);
    if (ellipses_cmd->parsed()) return cmd_ellipses(opts);
    if (exp_error_cmd->parsed()) return cmd_experiment_error(opts);
    if (exp_cov_cmd->parsed()) return cmd_experiment_coverage(opts);
    if (exp_sparse_cmd->parsed()) return cmd_experiment_sparsity(opts);
    std::cerr << "error[" << kExitConfig << "]: no subcommand\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error[" << kExitConfig << "]: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "error[" << kExitData << "]: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "error[" << kExitNumerical << "]: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error[" << kExitNumerical << "]: unexpected: " << e.what() << '\n';
    return kExitNumerical;
  }
}
