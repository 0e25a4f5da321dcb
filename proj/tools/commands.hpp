#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wdro/analytic.hpp"
#include "wdro/data.hpp"
#include "wdro/dro.hpp"
#include "wdro/errors.hpp"
#include "wdro/experiments.hpp"
#include "wdro/geometry.hpp"
#include "wdro/objective.hpp"
#include "wdro/solve.hpp"

namespace wdro::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kOutDirVariable = "WDRO_OUT_DIR";

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3, kIo = 4 };

// ---------------------------------------------------------------------------
// Shared plumbing

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// `out` if given, else `name` inside $WDRO_OUT_DIR (or the working directory).
inline std::string resolve_output(const std::string& out, const std::string& name) {
  if (!out.empty()) return out;
  const char* dir = std::getenv(kOutDirVariable);
  return (std::filesystem::path(dir && *dir ? dir : ".") / name).string();
}

inline void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

/// JSON has no infinity; +inf is written as null.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

inline Json plane_json(const Hyperplane& h) { return {{"w", vector_json(h.w)}, {"b", h.b}}; }

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Runs `body`, mapping library exceptions to exit codes and a JSON error
/// object on stderr.
template <typename Body>
int guarded(Body&& body) {
  auto fail = [](int code, const char* kind, const std::string& message) {
    Json err = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
    std::cerr << err.dump() << '\n';
    return code;
  };
  try {
    return body();
  } catch (const ValidationError& e) {
    return fail(kValidation, "validation", e.what());
  } catch (const NumericalError& e) {
    return fail(kNumerical, "numerical", e.what());
  } catch (const IoError& e) {
    return fail(kIo, "io", e.what());
  } catch (const std::exception& e) {
    return fail(kNumerical, "internal", e.what());
  }
}

// ---------------------------------------------------------------------------
// Dataset source shared by train and oracle

struct DataConfig {
  std::string path;  // load from CSV when set, otherwise generate
  Eigen::Index n = 1000;
  Eigen::Index d = 10;
  std::uint64_t seed = 1;
  double flip_fraction = 0.0;
  double adv_fraction = 0.0;

  void validate() const {
    if (path.empty()) require(n >= 1 && d >= 1, "--n and --d must be at least 1");
    require(flip_fraction >= 0.0 && flip_fraction <= 0.5, "--flip-fraction must lie in [0, 0.5]");
    require(adv_fraction >= 0.0 && adv_fraction <= 0.5, "--adv-fraction must lie in [0, 0.5]");
  }

  Dataset build() const {
    Dataset ds = path.empty() ? generate_separable(n, d, seed) : load_csv(path);
    if (flip_fraction > 0.0) ds = flip_labels(ds, flip_fraction, seed);
    if (adv_fraction > 0.0) ds = inject_adversarial(ds, adv_fraction, seed);
    return ds;
  }

  Json to_json() const {
    Json j;
    if (path.empty()) {
      j["source"] = "generated";
      j["n"] = n;
      j["d"] = d;
    } else {
      j["source"] = "csv";
      j["path"] = path;
    }
    j["seed"] = seed;
    j["flip_fraction"] = flip_fraction;
    j["adv_fraction"] = adv_fraction;
    return j;
  }
};

// ---------------------------------------------------------------------------
// train

struct TrainConfig {
  DataConfig data;
  std::string loss = "sramp";
  double sigma = 0.02;
  double epsilon_bar = 0.1;
  std::size_t starts = 20;
  std::string method = "cg";
  int lbfgs_memory = 10;
  double grad_tol = 1e-8;
  int max_iters = 10000;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_linesearch = 60;
  std::uint64_t start_seed = 0;
  std::vector<double> reference;  // empty: e_1
  bool trace = false;
  std::string out;

  ObjectiveSpec objective() const {
    ObjectiveSpec spec;
    spec.loss = {parse_loss_kind(loss), sigma};
    spec.reg_kind = RegKind::SquaredNorm;
    spec.reg_weight = epsilon_bar;
    return spec;
  }

  SolveOptions solve_options() const {
    SolveOptions o;
    require(method == "cg" || method == "lbfgs", "--method must be cg or lbfgs");
    o.method = method == "cg" ? Method::CgPrPlus : Method::Lbfgs;
    o.lbfgs_memory = lbfgs_memory;
    o.grad_tol = grad_tol;
    o.max_iters = max_iters;
    o.wolfe_c1 = wolfe_c1;
    o.wolfe_c2 = wolfe_c2;
    o.max_linesearch = max_linesearch;
    o.seed = start_seed;
    return o;
  }

  void validate() const {
    data.validate();
    const auto spec = objective();
    spec.validate();
    require(spec.loss.smooth(), "training needs a smoothed loss (sramp or shinge)");
    solve_options().validate();
    require(starts >= 1, "--starts must be at least 1");
    if (!reference.empty()) require(to_vector(reference).norm() > 0.0, "--reference must be nonzero");
  }

  Json to_json() const {
    return {{"data", data.to_json()},
            {"loss", loss},
            {"sigma", sigma},
            {"epsilon_bar", epsilon_bar},
            {"regularizer", "squared_norm"},
            {"regularize_intercept", false},
            {"starts", starts},
            {"start_distribution", "uniform on the unit sphere in R^(d+1)"},
            {"method", method},
            {"lbfgs_memory", lbfgs_memory},
            {"grad_tol", grad_tol},
            {"max_iters", max_iters},
            {"wolfe_c1", wolfe_c1},
            {"wolfe_c2", wolfe_c2},
            {"max_linesearch", max_linesearch},
            {"start_seed", start_seed},
            {"reference", reference.empty() ? Json("e1") : Json(reference)},
            {"cluster_thresholds", {{"sin_angle", 1e-2}, {"intercept", 1e-2}, {"relative_value", 1e-6}}}};
  }
};

inline Json train_report(const TrainConfig& cfg) {
  cfg.validate();
  const Dataset ds = cfg.data.build();
  const Vector reference = cfg.reference.empty() ? Hyperplane::canonical(ds.dim()).w : to_vector(cfg.reference);
  require(reference.size() == ds.dim(), "--reference must have d entries");

  const auto spec = cfg.objective();
  EmpiricalObjective f(spec, ds);
  const auto report = multistart(f, ds.dim() + 1, cfg.starts, cfg.solve_options(), reference);
  if (report.clusters.empty()) throw NumericalError("every restart failed: " + report.failure_messages.front());

  Json runs = Json::array();
  for (std::size_t k = 0; k < report.runs.size(); ++k) {
    if (std::find(report.failed.begin(), report.failed.end(), k) != report.failed.end()) continue;
    const auto& r = report.runs[k];
    Json run = {{"start", k},           {"value", r.value},     {"grad_norm", r.grad_norm},
                {"iterations", r.iterations}, {"converged", r.converged}, {"status", r.status},
                {"evaluations", r.evaluations}, {"restarts", r.restarts}};
    if (cfg.trace) {
      Json t = Json::array();
      for (const auto& e : r.trace) t.push_back({e.iteration, e.value, e.grad_norm});
      run["trace"] = std::move(t);
    }
    runs.push_back(std::move(run));
  }
  Json failed = Json::array();
  for (std::size_t k = 0; k < report.failed.size(); ++k)
    failed.push_back({{"start", report.failed[k]}, {"message", report.failure_messages[k]}});

  Json clusters = Json::array();
  for (const auto& c : report.clusters) {
    const auto h = Hyperplane::from_stacked(c.representative);
    clusters.push_back({{"minimizer", plane_json(h)},
                        {"value", c.value},
                        {"members", c.members},
                        {"sin_angle", c.sin_to_reference}});
  }

  const auto& best = report.best();
  const auto h = Hyperplane::from_stacked(best.representative);
  const auto& best_run = report.runs[best.members.front()];
  const auto dro = to_dro_variables(h);
  const double eps = imputed_epsilon(cfg.epsilon_bar, h);
  ObjectiveSpec ramp_norm{{LossKind::Ramp, cfg.sigma}, RegKind::Norm, eps, false};

  return {{"command", "train"},
          {"generated_at", utc_timestamp()},
          {"config", cfg.to_json()},
          {"dataset", {{"n", ds.size()}, {"d", ds.dim()}}},
          {"best",
           {{"minimizer", plane_json(h)},
            {"value", best.value},
            {"grad_norm", best_run.grad_norm},
            {"sin_angle", best.sin_to_reference},
            {"imputed_epsilon", eps},
            {"ramp_objective_at_imputed_epsilon", evaluate_value(ramp_norm, ds, h)},
            {"misclassified", misclassified_count(ds, h)},
            {"dro_variables", {{"w0", vector_json(dro.w0)}, {"b0", dro.b0}, {"t", dro.t}}}}},
          {"n_clusters", report.clusters.size()},
          {"clusters", std::move(clusters)},
          {"runs", std::move(runs)},
          {"failed_runs", std::move(failed)}};
}

inline int cmd_train(const TrainConfig& cfg) {
  return guarded([&] {
    const Json j = train_report(cfg);
    write_json(resolve_output(cfg.out, "train.json"), j);
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// oracle

struct OracleConfig {
  DataConfig data;
  std::vector<double> w;
  double b = 0.0;
  double epsilon = 0.1;
  double rho = 0.5;
  std::string out;

  void validate() const {
    data.validate();
    require(!w.empty(), "--w is required");
    require(std::isfinite(b), "--b must be finite");
    require(std::isfinite(epsilon) && epsilon >= 0.0, "--epsilon must be nonnegative");
    require(rho > 0.0 && rho < 1.0, "--rho must lie in (0, 1)");
  }

  Json to_json() const {
    return {{"data", data.to_json()}, {"w", w}, {"b", b}, {"epsilon", epsilon}, {"rho", rho}};
  }
};

inline Json oracle_report(const OracleConfig& cfg) {
  cfg.validate();
  const Dataset ds = cfg.data.build();
  const Hyperplane h(to_vector(cfg.w), cfg.b);
  require(h.w.size() == ds.dim(), "--w must have d entries");

  const auto dual = worst_case_prob_dual(ds, h, cfg.epsilon);
  const double knapsack = worst_case_prob_knapsack(ds, h, cfg.epsilon);
  const auto cvar = cvar_distance(ds, h, cfg.rho);
  const auto profile = margin_profile(h, ds);

  Json j = {{"command", "oracle"},
            {"generated_at", utc_timestamp()},
            {"config", cfg.to_json()},
            {"worst_case_probability",
             {{"dual", dual.value},
              {"t_star", number(dual.t_star)},
              {"knapsack", knapsack},
              {"difference", std::abs(dual.value - knapsack)}}},
            {"cvar", {{"value", cvar.value}, {"rho_times_cvar", cvar.scaled}, {"t", cvar.t}}},
            {"margin_profile",
             {{"misclassified", profile.misclassified},
              {"eta", number(profile.eta)},
              {"misclass_mass", profile.misclass_mass}}}};
  if (cfg.epsilon > 0.0) {
    const auto check = check_chance_cvar(ds, h, cfg.epsilon, cfg.rho);
    j["chance_cvar"] = {{"chance_holds", check.chance_holds}, {"cvar_holds", check.cvar_holds}};
  }
  return j;
}

inline int cmd_oracle(const OracleConfig& cfg) {
  return guarded([&] {
    write_json(resolve_output(cfg.out, "oracle.json"), oracle_report(cfg));
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// reproduce

struct ReproduceConfig {
  std::string table = "T1";
  double scale = 1.0;
  std::uint64_t seed = 20240601;
  std::size_t starts = 20;
  std::size_t hinge_starts = 1;
  std::size_t datasets = 10;  // table 3 only
  std::string method = "cg";
  std::string out;         // CSV
  std::string trends_out;  // JSON with trend flags

  void validate() const {
    require(table == "T1" || table == "T2" || table == "T3" || table == "T4", "--table must be T1, T2, T3 or T4");
    require(scale > 0.0 && scale <= 1.0, "--scale must lie in (0, 1]");
    require(starts >= 1 && hinge_starts >= 1 && datasets >= 1, "restart and dataset counts must be positive");
    require(method == "cg" || method == "lbfgs", "--method must be cg or lbfgs");
  }

  Eigen::Index scaled_n(Eigen::Index n) const {
    return std::max<Eigen::Index>(20, static_cast<Eigen::Index>(std::lround(static_cast<double>(n) * scale)));
  }
  std::size_t scaled_count(std::size_t k) const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(k) * scale)));
  }

  experiments::Protocol protocol() const {
    experiments::Protocol p;
    p.seed = seed;
    p.starts = std::max<std::size_t>(2, scaled_count(starts));
    p.hinge_starts = scaled_count(hinge_starts);
    p.solve.method = method == "cg" ? Method::CgPrPlus : Method::Lbfgs;
    return p;
  }

  Json to_json() const {
    const auto p = protocol();
    return {{"table", table},
            {"scale", scale},
            {"seed", seed},
            {"starts", p.starts},
            {"hinge_starts", p.hinge_starts},
            {"datasets_per_row", table == "T3" ? Json(scaled_count(datasets)) : Json(nullptr)},
            {"method", method},
            {"d", p.d},
            {"sigma", p.sigma},
            {"epsilon_bar", p.epsilon_bar},
            {"grad_tol", p.solve.grad_tol},
            {"max_iters", p.solve.max_iters}};
  }
};

namespace detail {

inline std::string joined(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ';';
    s += wdro::detail::format_double(v[k]);
  }
  return s;
}

inline std::string joined(const std::vector<std::uint64_t>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ';';
    s += std::to_string(v[k]);
  }
  return s;
}

}  // namespace detail

struct Reproduction {
  std::string csv;
  std::vector<experiments::Trend> trends;
};

/// Table rows as CSV (lists inside a cell are ';'-separated) and the
/// table's trend checks.
inline Reproduction reproduce(const ReproduceConfig& cfg) {
  cfg.validate();
  const auto p = cfg.protocol();
  std::ostringstream csv;
  Reproduction out;
  using detail::joined;
  using wdro::detail::format_double;

  if (cfg.table == "T1") {
    std::vector<Eigen::Index> ns;
    for (Eigen::Index n : {100, 300, 1000, 3000, 10000, 30000}) ns.push_back(cfg.scaled_n(n));
    const auto rows = experiments::run_table1(ns, p);
    csv << "n,n_solutions,sin_theta,best_sin_theta,best_value,failed_runs,seed\n";
    for (const auto& r : rows)
      csv << r.n << ',' << r.ramp.n_clusters << ',' << joined(r.ramp.sins) << ',' << format_double(r.ramp.best_sin)
          << ',' << format_double(r.ramp.best_value) << ',' << r.ramp.failed << ',' << r.seed << '\n';
    out.trends = experiments::table1_trends(rows);
  } else if (cfg.table == "T2") {
    const auto rows = experiments::run_table2(cfg.scaled_n(10000), {0.001, 0.01, 0.1, 1.0, 10.0}, p);
    csv << "epsilon_bar,n_solutions,norm_w,imputed_epsilon,sin_theta,best_norm_w,best_imputed_epsilon,"
           "best_sin_theta,seed\n";
    for (const auto& r : rows)
      csv << format_double(r.epsilon_bar) << ',' << r.ramp.n_clusters << ',' << joined(r.ramp.norms) << ','
          << joined(r.imputed) << ',' << joined(r.ramp.sins) << ',' << format_double(r.ramp.norms[r.ramp.best])
          << ',' << format_double(r.imputed[r.ramp.best]) << ',' << format_double(r.ramp.best_sin) << ','
          << r.seed << '\n';
    out.trends = experiments::table2_trends(rows);
  } else if (cfg.table == "T3") {
    const auto rows =
        experiments::run_table3(cfg.scaled_n(10000), {0.1, 0.2, 0.3, 0.4}, cfg.scaled_count(cfg.datasets), p);
    csv << "pct_flipped,avg_n_solutions,avg_sin_theta,avg_sin_theta_hinge,n_datasets,seed\n";
    for (const auto& r : rows)
      csv << std::lround(100.0 * r.fraction) << ',' << format_double(r.avg_solutions) << ','
          << format_double(r.avg_sin_ramp) << ',' << format_double(r.avg_sin_hinge) << ',' << r.seeds.size() << ','
          << joined(r.seeds) << '\n';
    out.trends = experiments::table3_trends(rows);
  } else {
    const auto rows = experiments::run_table4(cfg.scaled_n(10000), {0.1, 0.2, 0.3}, p);
    csv << "pct_adv,n_solutions,restarts_at_reported,sin_theta,intercept,value,misclass,misclass_clean,"
           "lowest_value,lowest_value_sin_theta,lowest_value_intercept,"
           "sin_theta_hinge,intercept_hinge,misclass_hinge,misclass_clean_hinge,seed\n";
    for (const auto& r : rows)
      csv << std::lround(100.0 * r.fraction) << ',' << r.ramp.n_clusters << ',' << r.ramp.members << ','
          << format_double(r.ramp.sin) << ',' << format_double(r.ramp.intercept) << ','
          << format_double(r.ramp.value) << ',' << r.ramp.misclassified << ',' << r.ramp.misclassified_clean << ','
          << format_double(r.ramp.lowest_value) << ',' << format_double(r.ramp.lowest_value_sin) << ','
          << format_double(r.ramp.lowest_value_intercept) << ',' << format_double(r.hinge.sin) << ','
          << format_double(r.hinge.intercept) << ',' << r.hinge.misclassified << ',' << r.hinge.misclassified_clean
          << ',' << r.seed << '\n';
    out.trends = experiments::table4_trends(rows);
  }
  out.csv = csv.str();
  return out;
}

inline int cmd_reproduce(const ReproduceConfig& cfg) {
  return guarded([&] {
    const auto result = reproduce(cfg);
    const std::string csv_path = resolve_output(cfg.out, cfg.table + ".csv");
    write_text(csv_path, result.csv);

    Json trends = Json::array();
    bool all = true;
    for (const auto& t : result.trends) {
      trends.push_back({{"name", t.name}, {"pass", t.pass}, {"detail", t.detail}});
      all = all && t.pass;
      std::cout << (t.pass ? "PASS " : "FAIL ") << t.name << " (" << t.detail << ")\n";
    }
    const std::string trends_path =
        cfg.trends_out.empty() ? std::filesystem::path(csv_path).replace_extension(".trends.json").string()
                               : cfg.trends_out;
    write_json(trends_path, {{"command", "reproduce"},
                             {"generated_at", utc_timestamp()},
                             {"config", cfg.to_json()},
                             {"csv", csv_path},
                             {"all_pass", all},
                             {"trends", std::move(trends)}});
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// certify-analytic

struct CertifyConfig {
  std::vector<double> epsilons{0.1, 0.5, 2.0};
  int grid_per_axis = 400;
  int scan_grid = 300;
  double box = 3.0;  // scan over [-box, box]^2
  std::string out;

  void validate() const {
    require(!epsilons.empty(), "--epsilon needs at least one value");
    for (double e : epsilons) require(std::isfinite(e) && e > 0.0, "every epsilon must be positive");
    require(grid_per_axis >= 200, "--grid-per-axis must be at least 200");
    require(scan_grid >= 100, "--scan-grid must be at least 100");
    require(box > 0.0, "--box must be positive");
  }

  Json to_json() const {
    return {{"epsilons", epsilons}, {"grid_per_axis", grid_per_axis}, {"scan_grid", scan_grid}, {"box", box}};
  }
};

struct Tolerances {
  static constexpr double location = 1e-4;
  static constexpr double value = 1e-6;
  static constexpr double residual = 1e-8;
  static constexpr double plus_e1 = 1e-4;
  static constexpr double minus_e1 = 1e-6;
};

inline Json check(const std::string& name, double error, double tolerance) {
  return {{"name", name}, {"error", error}, {"tolerance", tolerance}, {"pass", error <= tolerance}};
}

inline Json certify_report(const CertifyConfig& cfg) {
  cfg.validate();
  Json results = Json::array();
  bool all = true;
  for (double eps : cfg.epsilons) {
    const analytic::UniformModel model{eps, cfg.grid_per_axis};
    const auto closed = analytic::closed_form_minimizer(eps);
    const auto scan = analytic::scan_stationary_points(model, -cfg.box, cfg.box, cfg.scan_grid);
    const auto derivs = analytic::origin_directional_derivatives(model);
    const double residual =
        analytic::stationarity_residual(model, {closed.w1, 0.0}).lpNorm<Eigen::Infinity>();

    Json checks = Json::array();
    checks.push_back({{"name", "single_stationary_point"},
                      {"found", scan.points.size()},
                      {"pass", scan.points.size() == 1}});
    if (scan.points.size() == 1) {
      const auto& p = scan.points.front();
      checks.push_back(
          check("location", std::max(std::abs(p.w.x() - closed.w1), std::abs(p.w.y())), Tolerances::location));
      checks.push_back(check("value", std::abs(p.value - closed.value), Tolerances::value));
    }
    checks.push_back(check("closed_form_residual", residual, Tolerances::residual));
    checks.push_back(check("origin_derivative_plus_e1", std::abs(derivs.along_plus_e1 + 0.5), Tolerances::plus_e1));
    checks.push_back(check("origin_derivative_minus_e1", std::abs(derivs.along_minus_e1), Tolerances::minus_e1));
    bool pass = true;
    for (const auto& c : checks) pass = pass && c["pass"].get<bool>();
    all = all && pass;

    Json points = Json::array();
    for (const auto& p : scan.points)
      points.push_back({{"w", {p.w.x(), p.w.y()}}, {"residual", p.residual}, {"value", p.value}});
    results.push_back({{"epsilon", eps},
                       {"closed_form", {{"w1", closed.w1}, {"value", closed.value}}},
                       {"stationary_points", std::move(points)},
                       {"scan", {{"candidates", scan.candidates}, {"rejected", scan.rejected},
                                 {"threshold", scan.threshold}}},
                       {"origin_derivatives", {{"plus_e1", derivs.along_plus_e1}, {"minus_e1", derivs.along_minus_e1}}},
                       {"checks", std::move(checks)},
                       {"pass", pass}});
  }
  return {{"command", "certify-analytic"},
          {"generated_at", utc_timestamp()},
          {"config", cfg.to_json()},
          {"all_pass", all},
          {"results", std::move(results)}};
}

inline int cmd_certify_analytic(const CertifyConfig& cfg) {
  return guarded([&] {
    write_json(resolve_output(cfg.out, "certify.json"), certify_report(cfg));
    return static_cast<int>(kOk);
  });
}

}  // namespace wdro::cli
