#include "otcurve/runner.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
  CLI::App app{"entropic optimal transport solution curves: ODE continuation and Sinkhorn"};
  app.require_subcommand(1);

  otcurve::RunConfig cfg;
  const char* names[] = {"solve-ode", "solve-sinkhorn", "curve",     "derivs",
                         "compare",   "geodesic",       "barycenter"};
  const char* descs[] = {
      "integrate the dual ODE and export the solution curve",
      "run the generalized Sinkhorn solver at eps = eps_max",
      "integrate the ODE and export curve plus coupling snapshots",
      "cost derivatives at eps = 0 (closed form and finite differences)",
      "side-by-side ODE vs Sinkhorn report",
      "entropic interpolant between two marginals",
      "barycenter curve along the weight path",
  };
  for (int i = 0; i < 7; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], descs[i]);
    sub->add_option("--input", cfg.input_path, "problem spec (JSON)");
    sub->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
    sub->add_option("--eta", [&cfg](const std::vector<std::string>& v) {
      cfg.eta = std::stod(v[0]);
      return true;
    }, "override the spec's regularization strength");
    sub->add_option("--steps", cfg.steps, "RK4 steps over [0, eps_max]")->capture_default_str();
    sub->add_option("--eps-max", cfg.eps_max, "path endpoint")->capture_default_str();
    sub->add_option("--tol", cfg.tol, "sinkhorn stopping tolerance")->capture_default_str();
    sub->add_option("--polish-every", cfg.polish_every,
                    "Newton polish at every k-th grid point (0 = off)")
        ->capture_default_str();
    sub->add_option("--snapshots", cfg.snapshots, "number of coupling snapshots")
        ->capture_default_str();
    sub->add_option("--seed", cfg.seed, "seed for the bundled random instance")
        ->capture_default_str();
    sub->add_flag("--generic", cfg.use_generic,
                  "cross-check: use the generic objective instead of the family kernel");
    sub->callback([&cfg, i, names] { cfg.subcommand = names[i]; });
  }

  CLI11_PARSE(app, argc, argv);
  return otcurve::run(cfg);
}
