#include "otcurve/runner.hpp"

#include "otcurve/derivatives.hpp"
#include "otcurve/families.hpp"
#include "otcurve/ode.hpp"
#include "otcurve/reduced_kernels.hpp"
#include "otcurve/sinkhorn.hpp"
#include "otcurve/spec_json.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

namespace otcurve {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void write_curve_csv(const fs::path& path, const Problem& p, const DualKernel& k,
                     const SolutionCurve& curve) {
  std::ofstream out(path);
  out << "eps,dual_value,primal_value,grad_inf_norm\n";
  for (const auto& s : curve.samples) {
    Vector gamma = s.has_coupling ? s.coupling : k.coupling(s.phi, s.eps);
    out << num17(s.eps) << ',' << num17(s.dual_value) << ',' << num17(p.primal_value(gamma, s.eps))
        << ',' << num17(s.grad_inf) << '\n';
  }
}

void write_coupling_csv(const fs::path& path, const Problem& p, const Vector& gamma) {
  std::ofstream out(path);
  out << "flat_index";
  for (int a = 0; a < p.grid.axes(); ++a) out << ",i" << a;
  out << ",gamma\n";
  for (Index ell = 0; ell < gamma.size(); ++ell) {
    out << ell;
    for (int a = 0; a < p.grid.axes(); ++a) out << ',' << p.grid.index_of(ell, a);
    out << ',' << num17(gamma[ell]) << '\n';
  }
}

json derivative_report_json(const DerivativeReport& r) {
  return json{{"eps", r.eps},
              {"c_value", r.c_value},
              {"c_prime", r.c_prime},
              {"c_second", r.c_second},
              {"method", r.method}};
}

LoadedSpec bundled_random_two_marginal(unsigned long long seed, std::optional<double> eta) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto marginal = [&](Index n) {
    DiscreteMarginal mu;
    mu.points.resize(n, 1);
    for (Index i = 0; i < n; ++i) mu.points(i, 0) = (double(i) + unif(rng)) / double(n);
    Vector w(n);
    for (Index i = 0; i < n; ++i) w[i] = 0.2 + unif(rng);
    mu.weights = w / w.sum();
    mu.validate();
    return mu;
  };
  DiscreteMarginal mu = marginal(5), nu = marginal(4);
  Vector c(20);
  for (Index i = 0; i < 20; ++i) c[i] = unif(rng);
  LoadedSpec spec;
  spec.problem = make_two_marginal(std::move(mu), std::move(nu), std::move(c),
                                   eta.value_or(0.5));
  return spec;
}

struct SolveOutputs {
  json report = json::object();
};

void run_ode_side(const RunConfig& cfg, const Problem& p, const DualKernel& k, SolveOutputs& out,
                  bool write_curve) {
  IntegrateOptions opts;
  opts.steps = cfg.steps;
  opts.eps_max = cfg.eps_max;
  opts.snapshots = cfg.snapshots;
  opts.polish_every = cfg.polish_every;
  auto t0 = std::chrono::steady_clock::now();
  SolutionCurve curve = integrate(p, k, opts);
  double ms = elapsed_ms(t0);

  Vector gamma_end = curve.back().has_coupling ? curve.back().coupling
                                               : k.coupling(curve.back().phi, curve.back().eps);
  out.report["ode"] = {{"value", p.primal_value(gamma_end, curve.back().eps)},
                       {"dual_value", curve.back().dual_value},
                       {"steps", curve.steps},
                       {"grad_inf_norm", curve.back().grad_inf},
                       {"wall_ms", ms}};
  if (write_curve) {
    write_curve_csv(fs::path(cfg.out_dir) / "curve.csv", p, k, curve);
    int idx = 0;
    for (size_t i = 0; i < curve.samples.size(); ++i) {
      if (!curve.samples[i].has_coupling) continue;
      write_coupling_csv(fs::path(cfg.out_dir) / ("coupling_" + std::to_string(idx) + ".csv"), p,
                         curve.samples[i].coupling);
      ++idx;
    }
  }
}

void run_sinkhorn_side(const RunConfig& cfg, const Problem& p, SolveOutputs& out,
                       bool write_coupling) {
  SinkhornConfig scfg;
  scfg.tol = cfg.tol;
  auto t0 = std::chrono::steady_clock::now();
  SinkhornResult res = sinkhorn_solve(p, cfg.eps_max, scfg);
  double ms = elapsed_ms(t0);
  out.report["sinkhorn"] = {{"value", p.primal_value(res.coupling, cfg.eps_max)},
                            {"dual_value", res.phi_value},
                            {"iterations", res.iterations},
                            {"residual", res.residual},
                            {"converged", res.converged},
                            {"wall_ms", ms}};
  if (write_coupling)
    write_coupling_csv(fs::path(cfg.out_dir) / "coupling_sinkhorn.csv", p, res.coupling);
}

int run_checked(const RunConfig& cfg) {
  if (cfg.steps < 1) throw SchemaError("steps must be >= 1");
  if (cfg.eta && !(*cfg.eta > 0.0)) throw SchemaError("eta must be positive");
  fs::create_directories(cfg.out_dir);

  const std::string& sub = cfg.subcommand;
  LoadedSpec spec;
  if (sub == "derivs" && cfg.input_path.empty()) {
    spec = bundled_random_two_marginal(cfg.seed, cfg.eta);
  } else {
    if (cfg.input_path.empty()) throw SchemaError("missing --input");
    spec = load_problem_spec(cfg.input_path, cfg.eta);
  }
  Problem& p = spec.problem;

  if (sub == "geodesic" && p.family != Family::geodesic)
    throw SchemaError("geodesic subcommand needs a geodesic problem spec");
  if (sub == "barycenter" && p.family != Family::barycenter)
    throw SchemaError("barycenter subcommand needs a barycenter problem spec");

  SolveOutputs out;
  if (spec.bracket) {
    out.report["bracket"] = {{"lower", spec.bracket->first}, {"upper", spec.bracket->second}};
  }

  if (sub == "derivs") {
    DerivativeReport closed = derivative_report_zero(p);
    SinkhornConfig tight;
    tight.tol = 1e-12;
    tight.max_iters = 500000;
    DerivativeReport fd = c_second_finite_difference(p, 1e-2, tight);
    double rel = std::abs(fd.c_second - closed.c_second) /
                 std::max(1e-300, std::abs(closed.c_second));
    json dj = {{"reports", json::array({derivative_report_json(closed),
                                        derivative_report_json(fd)})},
               {"fd_h", 1e-2},
               {"c_second_rel_err", rel}};
    std::ofstream(fs::path(cfg.out_dir) / "derivs.json") << dj.dump(2) << '\n';
    return 0;
  }

  std::unique_ptr<DualKernel> kernel = make_kernel(p, !cfg.use_generic);
  if (sub == "solve-ode" || sub == "curve" || sub == "geodesic" || sub == "barycenter") {
    run_ode_side(cfg, p, *kernel, out, true);
  } else if (sub == "solve-sinkhorn") {
    run_sinkhorn_side(cfg, p, out, true);
  } else if (sub == "compare") {
    run_ode_side(cfg, p, *kernel, out, true);
    run_sinkhorn_side(cfg, p, out, false);
  } else {
    throw SchemaError("unknown subcommand '" + sub + "'");
  }
  std::ofstream(fs::path(cfg.out_dir) / "report.json") << out.report.dump(2) << '\n';
  return 0;
}

}  // namespace

int run(const RunConfig& config) {
  try {
    return run_checked(config);
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver error (" << config.subcommand << "): " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace otcurve
