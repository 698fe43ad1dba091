#include "gwrdt/gwrdt.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include <json.hpp>

#include "gwrdt/distortion.hpp"
#include "gwrdt/empirical.hpp"
#include "gwrdt/error.hpp"
#include "gwrdt/experiments.hpp"
#include "gwrdt/format.hpp"
#include "gwrdt/model.hpp"
#include "gwrdt/parallel.hpp"
#include "gwrdt/ratefn.hpp"
#include "gwrdt/spectral.hpp"
#include "gwrdt/trees.hpp"

#ifndef GWRDT_VERSION_STRING
#define GWRDT_VERSION_STRING "0.0.0"
#endif

struct gwrdt_model {
  gwrdt::GWModel m;
};

struct gwrdt_tree {
  gwrdt::Tree t;
};

struct gwrdt_distortion {
  gwrdt::Distortion d;
};

namespace {

thread_local std::string g_last_error;

gwrdt_status to_status(gwrdt::ErrorCode code) { return static_cast<gwrdt_status>(static_cast<int>(code) + 1); }

template <class F>
gwrdt_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return GWRDT_OK;
  } catch (const gwrdt::Error& e) {
    g_last_error = e.detail();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return GWRDT_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GWRDT_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return GWRDT_INTERNAL;
  }
}

template <class... P>
void require(const P*... ptrs) {
  if (((ptrs == nullptr) || ...)) throw gwrdt::Error(gwrdt::ErrorCode::InvalidParameter, "null argument");
}

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

gwrdt::EvalMode mode_of(gwrdt_mode m) {
  return m == GWRDT_MODE_MC ? gwrdt::EvalMode::MonteCarlo : gwrdt::EvalMode::Exact;
}

gwrdt::LambdaOrder order_of(gwrdt_order o) {
  return o == GWRDT_ORDER_CODEBOOK_INNER ? gwrdt::LambdaOrder::CodebookInner : gwrdt::LambdaOrder::SourceInner;
}

nlohmann::json ext_json(const gwrdt::ExtReal& x) {
  if (x.is_inf()) return "inf";
  return x.value();
}

std::string pair_label(const gwrdt::Alphabet& alphabet, std::size_t index) {
  const std::size_t k = alphabet.size();
  return alphabet.symbol(static_cast<gwrdt::TypeIndex>(index / k)) + ":" +
         alphabet.symbol(static_cast<gwrdt::TypeIndex>(index % k));
}

}  // namespace

extern "C" {

const char* gwrdt_version(void) { return GWRDT_VERSION_STRING; }

const char* gwrdt_status_name(gwrdt_status status) {
  switch (status) {
    case GWRDT_OK: return "OK";
    case GWRDT_INVALID_ARGUMENT: return "InvalidArgument";
    case GWRDT_INTERNAL: return "Internal";
    default: break;
  }
  const int code = static_cast<int>(status) - 1;
  if (code >= 0 && code <= static_cast<int>(gwrdt::ErrorCode::IoError))
    return gwrdt::error_name(static_cast<gwrdt::ErrorCode>(code)).data();
  return "Unknown";
}

const char* gwrdt_last_error(void) { return g_last_error.c_str(); }

void gwrdt_string_free(char* s) { std::free(s); }

gwrdt_options gwrdt_options_default(void) {
  gwrdt_options o;
  o.mode = GWRDT_MODE_EXACT;
  o.order = GWRDT_ORDER_SOURCE_INNER;
  o.samples = 100000;
  o.seed = 1;
  o.max_rejects = gwrdt::kDefaultMaxRejects;
  o.budget = gwrdt::kDefaultEnumerationBudget;
  o.trees_per_n = 20;
  o.z_points = 9;
  o.threads = 0;
  return o;
}

gwrdt_status gwrdt_model_builtin(const char* name, double param, gwrdt_model** out) {
  return guard([&] {
    require(name, out);
    *out = new gwrdt_model{gwrdt::builtin_model(name, param)};
  });
}

gwrdt_status gwrdt_model_from_json(const char* text, gwrdt_model** out) {
  return guard([&] {
    require(text, out);
    *out = new gwrdt_model{gwrdt::model_from_json(text)};
  });
}

gwrdt_status gwrdt_model_load(const char* path, gwrdt_model** out) {
  return guard([&] {
    require(path, out);
    *out = new gwrdt_model{gwrdt::load_model(path)};
  });
}

void gwrdt_model_free(gwrdt_model* model) { delete model; }

gwrdt_status gwrdt_model_to_json(const gwrdt_model* model, char** out) {
  return guard([&] {
    require(model, out);
    *out = dup(gwrdt::model_to_json(model->m));
  });
}

size_t gwrdt_model_types(const gwrdt_model* model) { return model ? model->m.types() : 0; }

int gwrdt_model_cap(const gwrdt_model* model) { return model ? model->m.cap : 0; }

gwrdt_status gwrdt_model_validate(const gwrdt_model* model, double tol, int* passed, char** report) {
  return guard([&] {
    require(model, passed);
    const auto r = gwrdt::validate_model(model->m, tol);
    *passed = r.passed() ? 1 : 0;
    put(report, r.to_text(model->m.alphabet));
  });
}

gwrdt_status gwrdt_model_mean_matrix(const gwrdt_model* model, double* out, size_t capacity) {
  return guard([&] {
    require(model, out);
    const Eigen::MatrixXd m = gwrdt::mean_matrix(model->m);
    const auto k = static_cast<std::size_t>(m.rows());
    if (capacity < k * k) throw gwrdt::Error(gwrdt::ErrorCode::SizeMismatch, "output buffer too small");
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t a = 0; a < k; ++a) out[b * k + a] = m(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a));
  });
}

gwrdt_status gwrdt_spectral_csv(const gwrdt_model* mx, const gwrdt_model* my, gwrdt_orientation orientation,
                                char** csv) {
  return guard([&] {
    require(mx, my, csv);
    const auto pm = gwrdt::pair_matrix(mx->m, my->m);
    const Eigen::MatrixXd disp = pm.displayed();
    auto pd = gwrdt::perron(disp, orientation == GWRDT_LEFT ? gwrdt::Orientation::Left : gwrdt::Orientation::Right);
    gwrdt::fill_marginals(pd, pm.types());
    const auto& alphabet = mx->m.alphabet;
    std::string s = "section,row,col,value\n";
    for (Eigen::Index r = 0; r < disp.rows(); ++r)
      for (Eigen::Index c = 0; c < disp.cols(); ++c)
        s += "matrix," + pair_label(alphabet, static_cast<std::size_t>(r)) + ',' +
             pair_label(alphabet, static_cast<std::size_t>(c)) + ',' + gwrdt::format_double(disp(r, c)) + '\n';
    s += "eigenvalue,,," + gwrdt::format_double(pd.eigenvalue) + '\n';
    s += "residual,,," + gwrdt::format_double(pd.residual) + '\n';
    s += "iterations,,," + std::to_string(pd.iterations) + '\n';
    s += std::string("unique,,,") + (pd.unique ? "1" : "0") + '\n';
    for (Eigen::Index i = 0; i < pd.pi.size(); ++i)
      s += "pi," + pair_label(alphabet, static_cast<std::size_t>(i)) + ",," + gwrdt::format_double(pd.pi(i)) + '\n';
    for (Eigen::Index i = 0; i < pd.pi1.size(); ++i)
      s += "pi1," + alphabet.symbol(static_cast<gwrdt::TypeIndex>(i)) + ",," + gwrdt::format_double(pd.pi1(i)) + '\n';
    for (Eigen::Index i = 0; i < pd.pi2.size(); ++i)
      s += "pi2," + alphabet.symbol(static_cast<gwrdt::TypeIndex>(i)) + ",," + gwrdt::format_double(pd.pi2(i)) + '\n';
    *csv = dup(s);
  });
}

gwrdt_status gwrdt_tree_sample(const gwrdt_model* model, uint64_t seed, size_t size_cap, gwrdt_tree** out,
                               int* overflow) {
  return guard([&] {
    require(model, out, overflow);
    auto t = gwrdt::sample_tree(model->m, seed, size_cap);
    *overflow = t ? 0 : 1;
    *out = t ? new gwrdt_tree{std::move(*t)} : nullptr;
  });
}

gwrdt_status gwrdt_tree_sample_conditioned(const gwrdt_model* model, size_t n, uint64_t seed, uint64_t max_rejects,
                                           gwrdt_tree** out) {
  return guard([&] {
    require(model, out);
    *out = new gwrdt_tree{gwrdt::sample_conditioned(model->m, n, seed, max_rejects)};
  });
}

gwrdt_status gwrdt_tree_parse(const gwrdt_model* model, const char* line, gwrdt_tree** out) {
  return guard([&] {
    require(model, line, out);
    gwrdt::Tree t = gwrdt::parse_tree(model->m.alphabet, line);
    gwrdt::tree_prob(model->m, t);  // rejects child counts above the cap
    *out = new gwrdt_tree{std::move(t)};
  });
}

gwrdt_status gwrdt_tree_format(const gwrdt_model* model, const gwrdt_tree* tree, char** out) {
  return guard([&] {
    require(model, tree, out);
    *out = dup(gwrdt::format_tree(model->m.alphabet, tree->t));
  });
}

gwrdt_status gwrdt_tree_prob(const gwrdt_model* model, const gwrdt_tree* tree, double* out) {
  return guard([&] {
    require(model, tree, out);
    *out = gwrdt::tree_prob(model->m, tree->t);
  });
}

size_t gwrdt_tree_size(const gwrdt_tree* tree) { return tree ? tree->t.size() : 0; }

void gwrdt_tree_free(gwrdt_tree* tree) { delete tree; }

gwrdt_status gwrdt_enumerate_csv(const gwrdt_model* model, size_t n, size_t budget, char** csv, double* total) {
  return guard([&] {
    require(model);
    const auto list = gwrdt::enumerate_trees(model->m, n, budget);
    if (total) *total = list.total;
    if (!csv) return;
    std::string s = "index,prob,conditional,tree\n";
    for (std::size_t i = 0; i < list.items.size(); ++i)
      s += std::to_string(i) + ',' + gwrdt::format_double(list.items[i].prob) + ',' +
           gwrdt::format_double(list.items[i].prob / list.total) + ",\"" +
           gwrdt::format_tree(model->m.alphabet, list.items[i].tree) + "\"\n";
    *csv = dup(s);
  });
}

gwrdt_status gwrdt_offspring_measure_csv(const gwrdt_model* model, const gwrdt_tree* tree, char** csv) {
  return guard([&] {
    require(model, tree, csv);
    *csv = dup(gwrdt::measure_csv(model->m.alphabet, gwrdt::offspring_measure(tree->t)));
  });
}

gwrdt_status gwrdt_joint_measure_csv(const gwrdt_model* model, const gwrdt_tree* tx, const gwrdt_tree* ty,
                                     int paired_view, char** csv, double* max_defect) {
  return guard([&] {
    require(model, tx, ty);
    gwrdt::PairMeasure mu = gwrdt::joint_measure(tx->t, ty->t);
    if (max_defect) *max_defect = gwrdt::shift_defect(mu, model->m.types()).max_defect;
    if (paired_view) mu = gwrdt::reindex(mu);
    put(csv, gwrdt::measure_csv(model->m.alphabet, mu));
  });
}

gwrdt_status gwrdt_distortion_builtin(const char* name, int cap, gwrdt_distortion** out) {
  return guard([&] {
    require(name, out);
    *out = new gwrdt_distortion{gwrdt::builtin_distortion(name, cap)};
  });
}

gwrdt_status gwrdt_distortion_load(const char* path, const gwrdt_model* mx, const gwrdt_model* my,
                                   gwrdt_distortion** out) {
  return guard([&] {
    require(path, mx, my, out);
    *out = new gwrdt_distortion{gwrdt::load_distortion_table(path, mx->m.alphabet, my->m.alphabet)};
  });
}

double gwrdt_distortion_bound(const gwrdt_distortion* rho) { return rho ? rho->d.bound() : 0.0; }

void gwrdt_distortion_free(gwrdt_distortion* rho) { delete rho; }

gwrdt_status gwrdt_lambda_inf(const gwrdt_model* mx, const gwrdt_model* my, const gwrdt_distortion* rho, double t,
                              gwrdt_order order, double* out) {
  return guard([&] {
    require(mx, my, rho, out);
    const auto pi = gwrdt::stationary_pair(mx->m, my->m);
    *out = gwrdt::lambda_inf(t, pi, mx->m.kernel, my->m.kernel, rho->d, order_of(order));
  });
}

gwrdt_status gwrdt_d_average(const gwrdt_model* mx, const gwrdt_model* my, const gwrdt_distortion* rho,
                             double* out) {
  return guard([&] {
    require(mx, my, rho, out);
    const auto pi = gwrdt::stationary_pair(mx->m, my->m);
    *out = gwrdt::d_average(pi, mx->m.kernel, my->m.kernel, rho->d);
  });
}

gwrdt_status gwrdt_rd_curve(const gwrdt_model* mx, const gwrdt_model* my, const gwrdt_distortion* rho,
                            const double* d_grid, size_t d_count, const double* t_grid, size_t t_count,
                            const size_t* n_list, size_t n_count, gwrdt_order order, char** curve_csv,
                            char** lambda_csv, char** finite_csv, char** summary_json) {
  return guard([&] {
    require(mx, my, rho);
    if ((d_count && !d_grid) || (t_count && !t_grid) || (n_count && !n_list))
      throw gwrdt::Error(gwrdt::ErrorCode::InvalidParameter, "null grid");
    gwrdt::RdSummaryOptions o;
    if (d_count) o.d_grid.assign(d_grid, d_grid + d_count);
    if (t_count) o.t_grid.assign(t_grid, t_grid + t_count);
    if (n_count) o.n_list.assign(n_list, n_list + n_count);
    o.order = order_of(order);
    const auto r = gwrdt::rd_summary(mx->m, my->m, rho->d, o);
    put(curve_csv, r.curve_csv());
    put(lambda_csv, r.lambda_csv());
    if (finite_csv) {
      std::string s = "n,d,R_n\n";
      for (const auto& [n, d, v] : r.finite_n_curve)
        s += std::to_string(n) + ',' + gwrdt::format_double(d) + ',' + v.to_string() + '\n';
      *finite_csv = dup(s);
    }
    if (summary_json) {
      nlohmann::json j;
      j["d_min"] = r.d_min;
      j["d_av"] = r.d_av;
      j["order"] = r.order == gwrdt::LambdaOrder::SourceInner ? "source-inner" : "codebook-inner";
      j["sup_restricted_to_t_le_0"] = true;
      j["units"] = "nats";
      nlohmann::json dn = nlohmann::json::array();
      for (const auto& [n, v] : r.d_min_n) dn.push_back({{"n", n}, {"d_min_n", v}});
      j["d_min_n"] = dn;
      j["d_min_inf_proxy"] = r.d_min_inf_proxy ? nlohmann::json(*r.d_min_inf_proxy) : nlohmann::json(nullptr);
      j["reference_threshold"] =
          r.reference_threshold ? nlohmann::json(*r.reference_threshold) : nlohmann::json(nullptr);
      nlohmann::json curve = nlohmann::json::array();
      for (const auto& [d, v] : r.curve) curve.push_back({{"d", d}, {"R", ext_json(v)}});
      j["curve"] = curve;
      *summary_json = dup(j.dump(2) + "\n");
    }
  });
}

gwrdt_status gwrdt_irho_csv(const gwrdt_model* mx, const gwrdt_model* my, const gwrdt_distortion* rho,
                            const double* z, size_t z_count, unsigned threads, char** csv) {
  return guard([&] {
    require(mx, my, rho, csv);
    if (z_count && !z) throw gwrdt::Error(gwrdt::ErrorCode::InvalidParameter, "null z grid");
    const gwrdt::IRhoSolver solver(mx->m, my->m, rho->d);
    std::vector<gwrdt::IRhoResult> results(z_count);
    gwrdt::parallel_for(z_count, threads, [&](std::size_t i) { results[i] = solver.solve(z[i]); });
    std::string s = "z,i_rho,constraint_residual,max_defect\n";
    for (std::size_t i = 0; i < z_count; ++i) {
      const auto& r = results[i];
      const bool finite = r.rate.value.is_finite();
      s += gwrdt::format_double(z[i]) + ',' + r.rate.value.to_string() + ',' +
           (finite ? gwrdt::format_double(r.constraint_residual) : std::string()) + ',' +
           (finite ? gwrdt::format_double(r.rate.defect.max_defect) : std::string()) + '\n';
    }
    *csv = dup(s);
  });
}

gwrdt_status gwrdt_ball_exponent_csv(const gwrdt_tree* x, double d, const gwrdt_model* my,
                                     const gwrdt_distortion* rho, const gwrdt_options* opts, char** csv) {
  return guard([&] {
    require(x, my, rho, csv);
    const gwrdt_options o = opts ? *opts : gwrdt_options_default();
    gwrdt::BallOptions bo;
    bo.mode = mode_of(o.mode);
    bo.samples = o.samples;
    bo.seed = o.seed;
    bo.budget = o.budget;
    bo.max_rejects = o.max_rejects;
    const auto e = gwrdt::ball_exponent(x->t, d, my->m, rho->d, bo);
    std::string s = "n,d,method,probability,exponent,stderr,censored,lower_bound,x_digest\n";
    s += std::to_string(e.n) + ',' + gwrdt::format_double(e.d) + ',' +
         (e.method == gwrdt::EvalMode::Exact ? "exact" : "mc") + ',' + gwrdt::format_double(e.probability) + ',' +
         e.exponent.to_string() + ',' + (e.standard_error ? gwrdt::format_double(*e.standard_error) : "") + ',' +
         (e.censored ? "1" : "0") + ',' + (e.lower_bound ? gwrdt::format_double(*e.lower_bound) : "") + ",\"" +
         e.x_digest + "\"\n";
    *csv = dup(s);
  });
}

gwrdt_status gwrdt_verify_aep(const gwrdt_model* mx, const gwrdt_model* my, const gwrdt_distortion* rho, double d,
                              const size_t* n_list, size_t n_count, const gwrdt_options* opts, char** csv,
                              char** json) {
  return guard([&] {
    require(mx, my, rho, n_list);
    const gwrdt_options o = opts ? *opts : gwrdt_options_default();
    gwrdt::AepOptions ao;
    ao.n_list.assign(n_list, n_list + n_count);
    ao.trees_per_n = o.trees_per_n;
    ao.samples = o.samples;
    ao.seed = o.seed;
    ao.mode = mode_of(o.mode);
    ao.budget = o.budget;
    ao.max_rejects = o.max_rejects;
    ao.order = order_of(o.order);
    ao.threads = o.threads;
    const auto r = gwrdt::verify_aep(mx->m, my->m, rho->d, d, ao);
    put(csv, r.to_csv());
    put(json, r.to_json());
  });
}

gwrdt_status gwrdt_ldp_decay(const gwrdt_model* mx, const gwrdt_model* my, const gwrdt_distortion* rho, double lo,
                             double hi, const size_t* n_list, size_t n_count, const gwrdt_options* opts, char** csv,
                             char** json) {
  return guard([&] {
    require(mx, my, rho, n_list);
    const gwrdt_options o = opts ? *opts : gwrdt_options_default();
    gwrdt::LdpOptions lo_opts;
    lo_opts.n_list.assign(n_list, n_list + n_count);
    lo_opts.samples = o.samples;
    lo_opts.seed = o.seed;
    lo_opts.mode = mode_of(o.mode);
    lo_opts.budget = o.budget;
    lo_opts.max_rejects = o.max_rejects;
    lo_opts.z_points = o.z_points;
    lo_opts.threads = o.threads;
    const auto r = gwrdt::ldp_decay(mx->m, my->m, rho->d, lo, hi, lo_opts);
    put(csv, r.to_csv());
    put(json, r.to_json());
  });
}

gwrdt_status gwrdt_stationarity(const gwrdt_model* mx, const gwrdt_model* my, const size_t* n_list, size_t n_count,
                                const gwrdt_options* opts, char** csv, char** json) {
  return guard([&] {
    require(mx, my, n_list);
    const gwrdt_options o = opts ? *opts : gwrdt_options_default();
    gwrdt::StationarityOptions so;
    so.n_list.assign(n_list, n_list + n_count);
    so.samples = o.samples;
    so.seed = o.seed;
    so.max_rejects = o.max_rejects;
    so.threads = o.threads;
    const auto r = gwrdt::stationarity_check(mx->m, my->m, so);
    put(csv, r.to_csv());
    put(json, r.to_json());
  });
}

}  // extern "C"
