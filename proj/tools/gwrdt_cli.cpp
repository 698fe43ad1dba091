#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gwrdt/gwrdt.h"

namespace {

using nlohmann::json;

struct Failure {
  gwrdt_status status;
  std::string message;
};

struct UsageFailure {
  std::string message;
};

void check(gwrdt_status s) {
  if (s != GWRDT_OK) throw Failure{s, gwrdt_last_error()};
}

struct ModelDeleter {
  void operator()(gwrdt_model* m) const { gwrdt_model_free(m); }
};
struct TreeDeleter {
  void operator()(gwrdt_tree* t) const { gwrdt_tree_free(t); }
};
struct DistortionDeleter {
  void operator()(gwrdt_distortion* d) const { gwrdt_distortion_free(d); }
};
using ModelPtr = std::unique_ptr<gwrdt_model, ModelDeleter>;
using TreePtr = std::unique_ptr<gwrdt_tree, TreeDeleter>;
using DistortionPtr = std::unique_ptr<gwrdt_distortion, DistortionDeleter>;

// Takes ownership of a string returned by the library.
std::string take(char* s) {
  if (!s) return {};
  std::string out(s);
  gwrdt_string_free(s);
  return out;
}

std::string fnv1a(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Args {
  std::string model = "mtdna";
  double alpha = 0.5;
  std::string config;
  std::string model_y;
  std::optional<double> alpha_y;
  std::string config_y;
  std::string rho = "type-hamming";
  std::size_t n = 0;
  std::string n_list;
  std::uint64_t samples = 0;
  std::uint64_t seed = 1;
  std::string grid;
  std::string t_grid = "-20:0:0.5";
  std::string out;
  double tol = 1e-9;
  bool exact = false;
  bool mc = false;
  std::string order = "source";
  std::string orientation = "right";
  std::size_t budget = 2'000'000;
  std::uint64_t max_rejects = 10'000'000;
  std::size_t size_cap = 1'000'000;
  std::size_t trees = 20;
  int z_points = 9;
  double d = 0.25;
  double lo = 0.0;
  double hi = 0.0;
  std::string tree_x;
  std::string tree_y;
  bool paired = false;
};

std::vector<double> parse_grid(const std::string& text, const char* flag) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageFailure{std::string(flag) + ": not a number: '" + item + "'"};
    }
  }
  if (parts.size() != 3) throw UsageFailure{std::string(flag) + ": expected lo:hi:step"};
  const double lo = parts[0], hi = parts[1], step = parts[2];
  if (!(step > 0.0) || !(hi >= lo)) throw UsageFailure{std::string(flag) + ": need step > 0 and hi >= lo"};
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid(count);
  // Round to 12 significant digits so 0.1 * 3 prints as 0.3.
  for (std::size_t i = 0; i < count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", lo + static_cast<double>(i) * step);
    grid[i] = std::strtod(buf, nullptr);
  }
  return grid;
}

std::vector<std::size_t> parse_n_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size() || v == 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageFailure{"--n-list: not a positive integer: '" + item + "'"};
    }
  }
  if (out.empty()) throw UsageFailure{"--n-list: empty"};
  return out;
}

ModelPtr load_model(const std::string& name, double param, const std::string& config) {
  gwrdt_model* m = nullptr;
  if (!config.empty())
    check(gwrdt_model_load(config.c_str(), &m));
  else
    check(gwrdt_model_builtin(name.c_str(), param, &m));
  return ModelPtr(m);
}

json model_json(const gwrdt_model* m) {
  char* s = nullptr;
  check(gwrdt_model_to_json(m, &s));
  return json::parse(take(s));
}

// Resolved state shared by every subcommand: models, distortion and the
// config record that goes into every output header.
class Run {
 public:
  Run(std::string command, const Args& a) : command_(std::move(command)), args_(a) {
    config_["command"] = command_;
    config_["seed"] = a.seed;
  }

  gwrdt_model* model_x() {
    if (!mx_) {
      mx_ = load_model(args_.model, args_.alpha, args_.config);
      config_["model_x"] = model_json(mx_.get());
    }
    return mx_.get();
  }

  gwrdt_model* model_y() {
    if (!my_) {
      const bool own = !args_.model_y.empty() || !args_.config_y.empty() || args_.alpha_y.has_value();
      if (own) {
        my_ = load_model(args_.model_y.empty() ? args_.model : args_.model_y, args_.alpha_y.value_or(args_.alpha),
                         args_.config_y);
      } else {
        my_ = load_model(args_.model, args_.alpha, args_.config);
      }
      config_["model_y"] = model_json(my_.get());
    }
    return my_.get();
  }

  gwrdt_distortion* rho() {
    if (!rho_) {
      gwrdt_distortion* d = nullptr;
      std::error_code ec;
      if (std::filesystem::is_regular_file(args_.rho, ec)) {
        check(gwrdt_distortion_load(args_.rho.c_str(), model_x(), model_y(), &d));
        std::ifstream in(args_.rho, std::ios::binary);
        std::ostringstream text;
        text << in.rdbuf();
        config_["rho"] = {{"table", args_.rho}, {"digest", fnv1a(text.str())}};
      } else {
        const int cap = std::max(gwrdt_model_cap(model_x()), gwrdt_model_cap(model_y()));
        check(gwrdt_distortion_builtin(args_.rho.c_str(), cap, &d));
        config_["rho"] = args_.rho;
      }
      rho_.reset(d);
    }
    return rho_.get();
  }

  json& config() { return config_; }

  std::string header() const {
    const std::string cfg = config_.dump();
    return "# tool: gwrdt " + std::string(gwrdt_version()) + "\n# config: " + cfg + "\n# config_digest: " +
           fnv1a(cfg) + "\n# seed: " + std::to_string(args_.seed) + "\n";
  }

  // Prints the primary table to stdout and, with --out, writes it to DIR.
  void emit(const std::string& file, const std::string& body, bool primary = true) {
    if (primary) std::cout << header() << body;
    files_.emplace_back(file, body);
  }

  void finish(const json& result = json()) {
    if (args_.out.empty()) return;
    namespace fs = std::filesystem;
    fs::create_directories(args_.out);
    json names = json::array();
    for (const auto& [name, body] : files_) {
      write_file(fs::path(args_.out) / name, header() + body);
      names.push_back(name);
    }
    json side;
    side["tool"] = "gwrdt";
    side["version"] = gwrdt_version();
    side["config"] = config_;
    side["config_digest"] = fnv1a(config_.dump());
    side["seed"] = args_.seed;
    side["outputs"] = names;
    if (!result.is_null()) side["result"] = result;
    write_file(fs::path(args_.out) / (command_ + ".json"), side.dump(2) + "\n");
  }

 private:
  static void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Failure{GWRDT_IO_ERROR, "cannot write " + path.string()};
  }

  std::string command_;
  const Args& args_;
  json config_;
  ModelPtr mx_;
  ModelPtr my_;
  DistortionPtr rho_;
  std::vector<std::pair<std::string, std::string>> files_;
};

gwrdt_options experiment_options(const Args& a, std::uint64_t default_samples) {
  gwrdt_options o = gwrdt_options_default();
  o.mode = a.mc ? GWRDT_MODE_MC : GWRDT_MODE_EXACT;
  o.order = a.order == "codebook" ? GWRDT_ORDER_CODEBOOK_INNER : GWRDT_ORDER_SOURCE_INNER;
  o.samples = a.samples ? a.samples : default_samples;
  o.seed = a.seed;
  o.max_rejects = a.max_rejects;
  o.budget = a.budget;
  o.trees_per_n = a.trees;
  o.z_points = a.z_points;
  return o;
}

void record_options(Run& run, const gwrdt_options& o) {
  auto& c = run.config();
  c["mode"] = o.mode == GWRDT_MODE_MC ? "mc" : "exact";
  c["order"] = o.order == GWRDT_ORDER_CODEBOOK_INNER ? "codebook" : "source";
  c["samples"] = o.samples;
  c["max_rejects"] = o.max_rejects;
  c["budget"] = o.budget;
}

TreePtr tree_from_args(gwrdt_model* model, const std::string& text, std::size_t n, std::uint64_t seed,
                       std::uint64_t max_rejects, const char* what) {
  gwrdt_tree* t = nullptr;
  if (!text.empty()) {
    check(gwrdt_tree_parse(model, text.c_str(), &t));
  } else {
    if (n == 0) throw UsageFailure{std::string(what) + ": give --n or a tree"};
    check(gwrdt_tree_sample_conditioned(model, n, seed, max_rejects, &t));
  }
  return TreePtr(t);
}

std::string format_tree(gwrdt_model* m, gwrdt_tree* t) {
  char* s = nullptr;
  check(gwrdt_tree_format(m, t, &s));
  return take(s);
}

int cmd_validate(const Args& a) {
  Run run("validate", a);
  run.config()["tol"] = a.tol;
  int passed = 0;
  char* report = nullptr;
  check(gwrdt_model_validate(run.model_x(), a.tol, &passed, &report));
  const std::string text = "check,value\n" + take(report);
  run.emit("validate.csv", text);
  run.finish({{"passed", passed != 0}});
  if (!passed) {
    std::cerr << "error: validation failed\n";
    return 1;
  }
  return 0;
}

int cmd_spectral(const Args& a) {
  Run run("spectral", a);
  if (a.orientation != "right" && a.orientation != "left") throw UsageFailure{"--orientation: right or left"};
  run.config()["orientation"] = a.orientation;
  char* csv = nullptr;
  check(gwrdt_spectral_csv(run.model_x(), run.model_y(), a.orientation == "left" ? GWRDT_LEFT : GWRDT_RIGHT, &csv));
  run.emit("spectral.csv", take(csv));
  run.finish();
  return 0;
}

int cmd_simulate(const Args& a) {
  Run run("simulate", a);
  const std::uint64_t count = a.samples ? a.samples : 10;
  auto& c = run.config();
  c["samples"] = count;
  c["n"] = a.n;
  if (a.n == 0) c["size_cap"] = a.size_cap;
  else c["max_rejects"] = a.max_rejects;
  gwrdt_model* m = run.model_x();
  std::string out = "index,size,prob,tree\n";
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t seed = mix_seed(a.seed, i);
    gwrdt_tree* raw = nullptr;
    if (a.n > 0) {
      check(gwrdt_tree_sample_conditioned(m, a.n, seed, a.max_rejects, &raw));
    } else {
      int overflow = 0;
      check(gwrdt_tree_sample(m, seed, a.size_cap, &raw, &overflow));
      if (overflow) {
        out += std::to_string(i) + ",overflow,,\n";
        continue;
      }
    }
    TreePtr t(raw);
    double p = 0.0;
    check(gwrdt_tree_prob(m, t.get(), &p));
    std::ostringstream row;
    row.precision(17);
    row << i << ',' << gwrdt_tree_size(t.get()) << ',' << p << ",\"" << format_tree(m, t.get()) << "\"\n";
    out += row.str();
  }
  run.emit("simulate.csv", out);
  run.finish();
  return 0;
}

int cmd_enumerate(const Args& a) {
  Run run("enumerate", a);
  if (a.n == 0) throw UsageFailure{"--n is required"};
  run.config()["n"] = a.n;
  run.config()["budget"] = a.budget;
  char* csv = nullptr;
  double total = 0.0;
  check(gwrdt_enumerate_csv(run.model_x(), a.n, a.budget, &csv, &total));
  run.emit("enumerate.csv", take(csv));
  run.finish({{"total_probability", total}});
  return 0;
}

int cmd_measures(const Args& a) {
  Run run("measures", a);
  auto& c = run.config();
  c["n"] = a.n;
  c["paired"] = a.paired;
  c["tree_x"] = a.tree_x;
  c["tree_y"] = a.tree_y;
  gwrdt_model* mx = run.model_x();
  gwrdt_model* my = run.model_y();
  auto tx = tree_from_args(mx, a.tree_x, a.n, mix_seed(a.seed, 0), a.max_rejects, "measures");
  auto ty = tree_from_args(my, a.tree_y, a.n, mix_seed(a.seed, 1), a.max_rejects, "measures");
  char* ox = nullptr;
  char* oy = nullptr;
  char* joint = nullptr;
  double defect = 0.0;
  check(gwrdt_offspring_measure_csv(mx, tx.get(), &ox));
  check(gwrdt_offspring_measure_csv(my, ty.get(), &oy));
  check(gwrdt_joint_measure_csv(mx, tx.get(), ty.get(), a.paired ? 1 : 0, &joint, &defect));
  run.emit("joint.csv", take(joint));
  run.emit("offspring_x.csv", take(ox), false);
  run.emit("offspring_y.csv", take(oy), false);
  run.finish({{"tree_x", format_tree(mx, tx.get())},
              {"tree_y", format_tree(my, ty.get())},
              {"max_shift_defect", defect}});
  return 0;
}

int cmd_rdcurve(const Args& a) {
  Run run("rdcurve", a);
  const auto d_grid = parse_grid(a.grid.empty() ? "0:0.5:0.05" : a.grid, "--grid");
  const auto t_grid = parse_grid(a.t_grid, "--t-grid");
  const auto n_list = a.n_list.empty() ? std::vector<std::size_t>{} : parse_n_list(a.n_list);
  auto& c = run.config();
  c["d_grid"] = d_grid;
  c["t_grid"] = t_grid;
  c["n_list"] = n_list;
  c["order"] = a.order;
  gwrdt_model* mx = run.model_x();
  gwrdt_model* my = run.model_y();
  gwrdt_distortion* rho = run.rho();
  char* curve = nullptr;
  char* lambda = nullptr;
  char* finite = nullptr;
  char* summary = nullptr;
  check(gwrdt_rd_curve(mx, my, rho, d_grid.data(), d_grid.size(), t_grid.data(), t_grid.size(), n_list.data(),
                       n_list.size(), a.order == "codebook" ? GWRDT_ORDER_CODEBOOK_INNER : GWRDT_ORDER_SOURCE_INNER,
                       &curve, &lambda, n_list.empty() ? nullptr : &finite, &summary));
  run.emit("rdcurve.csv", take(curve));
  run.emit("lambda.csv", take(lambda), false);
  if (!n_list.empty()) run.emit("finite_n.csv", take(finite), false);
  run.finish(json::parse(take(summary)));
  return 0;
}

int cmd_irho(const Args& a) {
  Run run("irho", a);
  const auto z = parse_grid(a.grid.empty() ? "0:1:0.125" : a.grid, "--grid");
  run.config()["z_grid"] = z;
  gwrdt_model* mx = run.model_x();
  gwrdt_model* my = run.model_y();
  char* csv = nullptr;
  check(gwrdt_irho_csv(mx, my, run.rho(), z.data(), z.size(), 0, &csv));
  run.emit("irho.csv", take(csv));
  run.finish();
  return 0;
}

int cmd_ball(const Args& a) {
  Run run("ball", a);
  const gwrdt_options o = experiment_options(a, 100000);
  record_options(run, o);
  auto& c = run.config();
  c["d"] = a.d;
  c["n"] = a.n;
  c["tree_x"] = a.tree_x;
  gwrdt_model* mx = run.model_x();
  gwrdt_model* my = run.model_y();
  auto x = tree_from_args(mx, a.tree_x, a.n, mix_seed(a.seed, 0), a.max_rejects, "ball");
  char* csv = nullptr;
  check(gwrdt_ball_exponent_csv(x.get(), a.d, my, run.rho(), &o, &csv));
  run.emit("ball.csv", take(csv));
  run.finish({{"tree_x", format_tree(mx, x.get())}});
  return 0;
}

int cmd_verify_aep(const Args& a) {
  Run run("verify-aep", a);
  const gwrdt_options o = experiment_options(a, 100000);
  record_options(run, o);
  const auto n_list = parse_n_list(a.n_list.empty() ? "3,5,7,9" : a.n_list);
  auto& c = run.config();
  c["d"] = a.d;
  c["n_list"] = n_list;
  c["trees"] = a.trees;
  gwrdt_model* mx = run.model_x();
  gwrdt_model* my = run.model_y();
  char* csv = nullptr;
  char* js = nullptr;
  check(gwrdt_verify_aep(mx, my, run.rho(), a.d, n_list.data(), n_list.size(), &o, &csv, &js));
  run.emit("verify_aep.csv", take(csv));
  run.finish(json::parse(take(js)));
  return 0;
}

int cmd_ldp_decay(const Args& a) {
  Run run("ldp-decay", a);
  const gwrdt_options o = experiment_options(a, 100000);
  record_options(run, o);
  const auto n_list = parse_n_list(a.n_list.empty() ? "3,5,7,9" : a.n_list);
  auto& c = run.config();
  c["lo"] = a.lo;
  c["hi"] = a.hi;
  c["n_list"] = n_list;
  c["z_points"] = a.z_points;
  gwrdt_model* mx = run.model_x();
  gwrdt_model* my = run.model_y();
  char* csv = nullptr;
  char* js = nullptr;
  check(gwrdt_ldp_decay(mx, my, run.rho(), a.lo, a.hi, n_list.data(), n_list.size(), &o, &csv, &js));
  run.emit("ldp_decay.csv", take(csv));
  run.finish(json::parse(take(js)));
  return 0;
}

int cmd_stationarity(const Args& a) {
  Run run("stationarity", a);
  gwrdt_options o = experiment_options(a, 2000);
  auto& c = run.config();
  const auto n_list = parse_n_list(a.n_list.empty() ? "11,25,51" : a.n_list);
  c["n_list"] = n_list;
  c["samples"] = o.samples;
  c["max_rejects"] = o.max_rejects;
  gwrdt_model* mx = run.model_x();
  gwrdt_model* my = run.model_y();
  char* csv = nullptr;
  char* js = nullptr;
  check(gwrdt_stationarity(mx, my, n_list.data(), n_list.size(), &o, &csv, &js));
  run.emit("stationarity.csv", take(csv));
  run.finish(json::parse(take(js)));
  return 0;
}

void add_model_flags(CLI::App* sub, Args& a, bool pair) {
  sub->add_option("--model", a.model, "Built-in model: mtdna, uniform-binary, alternating, chain-toy")
      ->capture_default_str();
  sub->add_option("--alpha", a.alpha, "Parameter of the built-in model (mtdna alpha, chain-toy p)")
      ->capture_default_str();
  sub->add_option("--config", a.config, "Model JSON file; overrides --model");
  if (!pair) return;
  sub->add_option("--model-y", a.model_y, "Codebook model (default: same as --model)");
  sub->add_option("--alpha-y", a.alpha_y, "Parameter of the codebook model (default: --alpha)");
  sub->add_option("--config-y", a.config_y, "Codebook model JSON file");
}

void add_rho_flag(CLI::App* sub, Args& a) {
  sub->add_option("--rho", a.rho, "Distortion: type-hamming, mark-hamming, zero, or a CSV table path")
      ->capture_default_str();
}

void add_common(CLI::App* sub, Args& a) {
  sub->add_option("--seed", a.seed, "Master seed")->capture_default_str();
  sub->add_option("--out", a.out, "Output directory for CSV files and the JSON sidecar");
}

void add_mode_flags(CLI::App* sub, Args& a) {
  auto* ex = sub->add_flag("--exact", a.exact, "Exact enumeration where within budget (default)");
  auto* mc = sub->add_flag("--mc", a.mc, "Monte Carlo estimation");
  ex->excludes(mc);
  sub->add_option("--samples", a.samples, "Monte Carlo sample count (default 100000)");
  sub->add_option("--budget", a.budget, "Enumeration budget in trees")->capture_default_str();
  sub->add_option("--max-rejects", a.max_rejects, "Rejection limit of the conditioned sampler")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate-distortion analysis of multitype Galton-Watson trees"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("gwrdt ") + gwrdt_version());
  Args a;

  auto* validate = app.add_subcommand("validate", "Check stochasticity, cap, criticality and irreducibility");
  add_model_flags(validate, a, false);
  validate->add_option("--tol", a.tol, "Criticality tolerance")->capture_default_str();
  add_common(validate, a);

  auto* spectral = app.add_subcommand("spectral", "Pair matrix, Perron eigenvalue and vector with marginals");
  add_model_flags(spectral, a, true);
  spectral->add_option("--orientation", a.orientation, "Perron vector side: right or left")->capture_default_str();
  add_common(spectral, a);

  auto* simulate = app.add_subcommand("simulate", "Sample trees, optionally conditioned on size n");
  add_model_flags(simulate, a, false);
  simulate->add_option("--n", a.n, "Condition on exactly n vertices (0: unconditioned)");
  simulate->add_option("--samples", a.samples, "Number of trees (default 10)");
  simulate->add_option("--size-cap", a.size_cap, "Overflow cap for unconditioned draws")->capture_default_str();
  simulate->add_option("--max-rejects", a.max_rejects, "Rejection limit")->capture_default_str();
  add_common(simulate, a);

  auto* enumerate = app.add_subcommand("enumerate", "All trees of size n with probabilities");
  add_model_flags(enumerate, a, false);
  enumerate->add_option("--n", a.n, "Tree size")->required();
  enumerate->add_option("--budget", a.budget, "Maximum number of trees")->capture_default_str();
  add_common(enumerate, a);

  auto* measures = app.add_subcommand("measures", "Offspring and joint empirical measures of a tree pair");
  add_model_flags(measures, a, true);
  measures->add_option("--n", a.n, "Sample both trees conditioned on size n");
  measures->add_option("--tree-x", a.tree_x, "Source tree in text form");
  measures->add_option("--tree-y", a.tree_y, "Codebook tree in text form");
  measures->add_flag("--paired", a.paired, "Key atoms by (type pair, offspring pair)");
  measures->add_option("--max-rejects", a.max_rejects, "Rejection limit")->capture_default_str();
  add_common(measures, a);

  auto* rdcurve = app.add_subcommand("rdcurve", "Rate-distortion curve R(d) and the log-MGF");
  add_model_flags(rdcurve, a, true);
  add_rho_flag(rdcurve, a);
  rdcurve->add_option("--grid", a.grid, "Distortion grid lo:hi:step (default 0:0.5:0.05)");
  rdcurve->add_option("--t-grid", a.t_grid, "Grid of t for the log-MGF table")->capture_default_str();
  rdcurve->add_option("--n-list", a.n_list, "Comma-separated sizes for finite-n curves");
  rdcurve->add_option("--order", a.order, "Nesting of the limit log-MGF: source or codebook")
      ->check(CLI::IsMember({"source", "codebook"}))
      ->capture_default_str();
  add_common(rdcurve, a);

  auto* irho = app.add_subcommand("irho", "Constrained rate function I_rho(z) on a grid");
  add_model_flags(irho, a, true);
  add_rho_flag(irho, a);
  irho->add_option("--grid", a.grid, "z grid lo:hi:step (default 0:1:0.125)");
  add_common(irho, a);

  auto* ball = app.add_subcommand("ball", "Distortion-ball exponent for one source tree");
  add_model_flags(ball, a, true);
  add_rho_flag(ball, a);
  ball->add_option("--n", a.n, "Sample the source tree conditioned on size n");
  ball->add_option("--tree-x", a.tree_x, "Source tree in text form");
  ball->add_option("--d", a.d, "Ball radius")->capture_default_str();
  add_mode_flags(ball, a);
  add_common(ball, a);

  auto* aep = app.add_subcommand("verify-aep", "Ball exponents against the finite-n Legendre transform");
  add_model_flags(aep, a, true);
  add_rho_flag(aep, a);
  aep->add_option("--d", a.d, "Ball radius")->capture_default_str();
  aep->add_option("--n-list", a.n_list, "Comma-separated sizes (default 3,5,7,9)");
  aep->add_option("--trees", a.trees, "Source trees per size")->capture_default_str();
  aep->add_option("--order", a.order, "Nesting of the limit log-MGF: source or codebook")
      ->check(CLI::IsMember({"source", "codebook"}))
      ->capture_default_str();
  add_mode_flags(aep, a);
  add_common(aep, a);

  auto* ldp = app.add_subcommand("ldp-decay", "Decay of P(rho_n in (lo, hi)) against inf I_rho");
  add_model_flags(ldp, a, true);
  add_rho_flag(ldp, a);
  ldp->add_option("--lo", a.lo, "Interval lower end")->required();
  ldp->add_option("--hi", a.hi, "Interval upper end")->required();
  ldp->add_option("--n-list", a.n_list, "Comma-separated sizes (default 3,5,7,9)");
  ldp->add_option("--z-points", a.z_points, "Grid points for the infimum of I_rho")->capture_default_str();
  add_mode_flags(ldp, a);
  add_common(ldp, a);

  auto* stationarity = app.add_subcommand("stationarity", "Empirical type-pair law against both Perron vectors");
  add_model_flags(stationarity, a, true);
  stationarity->add_option("--n-list", a.n_list, "Comma-separated sizes (default 11,25,51)");
  stationarity->add_option("--samples", a.samples, "Tree pairs per size (default 2000)");
  stationarity->add_option("--max-rejects", a.max_rejects, "Rejection limit")->capture_default_str();
  add_common(stationarity, a);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*validate) return cmd_validate(a);
    if (*spectral) return cmd_spectral(a);
    if (*simulate) return cmd_simulate(a);
    if (*enumerate) return cmd_enumerate(a);
    if (*measures) return cmd_measures(a);
    if (*rdcurve) return cmd_rdcurve(a);
    if (*irho) return cmd_irho(a);
    if (*ball) return cmd_ball(a);
    if (*aep) return cmd_verify_aep(a);
    if (*ldp) return cmd_ldp_decay(a);
    if (*stationarity) return cmd_stationarity(a);
  } catch (const UsageFailure& e) {
    std::cerr << "usage error: " << e.message << "\n";
    return 2;
  } catch (const Failure& e) {
    std::cerr << "error: " << gwrdt_status_name(e.status) << ": " << e.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
