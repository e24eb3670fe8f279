#include "otcurve/spec_json.hpp"

#include "otcurve/families.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace otcurve {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw SchemaError(where + ": " + what);
}

const json& get(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

double get_number(const json& j, const char* key, const std::string& where) {
  const json& v = get(j, key, where);
  if (!v.is_number()) fail(where + "." + key, "expected a number");
  return v.get<double>();
}

Vector parse_vector(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(where + "[" + std::to_string(i) + "]", "expected a number");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

DiscreteMarginal parse_marginal(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  const json& pj = get(j, "points", where);
  if (!pj.is_array() || pj.empty()) fail(where + ".points", "expected a non-empty array");
  if (!pj[0].is_array()) fail(where + ".points", "points must be arrays of coordinates");
  const size_t d = pj[0].size();
  DiscreteMarginal mu;
  mu.points.resize(pj.size(), d);
  for (size_t i = 0; i < pj.size(); ++i) {
    if (!pj[i].is_array() || pj[i].size() != d)
      fail(where + ".points[" + std::to_string(i) + "]", "inconsistent dimension");
    for (size_t k = 0; k < d; ++k) {
      if (!pj[i][k].is_number())
        fail(where + ".points[" + std::to_string(i) + "]", "expected numbers");
      mu.points(static_cast<Index>(i), static_cast<Index>(k)) = pj[i][k].get<double>();
    }
  }
  bool is_free = j.value("free", false);
  if (j.contains("weights")) {
    mu.weights = parse_vector(j["weights"], where + ".weights");
  } else if (is_free) {
    mu.weights = Vector::Constant(mu.points.rows(), 1.0 / double(mu.points.rows()));
  } else {
    fail(where, "missing field 'weights'");
  }
  try {
    mu.validate();
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
  return mu;
}

}  // namespace

LoadedSpec parse_problem_spec(const json& j, std::optional<double> eta_override) {
  if (!j.is_object()) fail("spec", "expected a JSON object");

  const json& mj = get(j, "marginals", "spec");
  if (!mj.is_array() || mj.empty()) fail("spec.marginals", "expected a non-empty array");
  std::vector<DiscreteMarginal> marginals;
  std::vector<bool> free_flags;
  for (size_t i = 0; i < mj.size(); ++i) {
    const std::string where = "spec.marginals[" + std::to_string(i) + "]";
    marginals.push_back(parse_marginal(mj[i], where));
    free_flags.push_back(mj[i].value("free", false));
  }
  const int n = static_cast<int>(marginals.size());

  double eta = eta_override ? *eta_override : get_number(j, "eta", "spec");
  if (!(eta > 0.0)) fail("spec.eta", "must be positive");

  std::vector<Index> sizes;
  for (const auto& mu : marginals) sizes.push_back(mu.size());
  ProductGrid grid(sizes);
  const Index m = grid.size();

  // ---- constraints ----
  std::string ckind = "none";
  ConstraintBasis basis = ConstraintBasis::none(m);
  if (j.contains("constraints")) {
    const json& cj = j["constraints"];
    ckind = get(cj, "kind", "spec.constraints").get<std::string>();
    if (ckind == "none") {
    } else if (ckind == "martingale") {
      if (n != 2) fail("spec.constraints", "martingale needs exactly two marginals");
      basis = martingale_basis(marginals[0], marginals[1]);
    } else if (ckind == "multi_period_martingale") {
      if (n != 3) fail("spec.constraints", "multi-period martingale needs three marginals");
      basis = multi_period_basis(marginals[0], marginals[1], marginals[2]);
    } else if (ckind == "custom") {
      const json& vj = get(cj, "vectors", "spec.constraints");
      if (!vj.is_array()) fail("spec.constraints.vectors", "expected an array");
      basis.m = m;
      for (size_t k = 0; k < vj.size(); ++k) {
        Vector dense = parse_vector(vj[k], "spec.constraints.vectors[" + std::to_string(k) + "]");
        if (dense.size() != m)
          fail("spec.constraints.vectors[" + std::to_string(k) + "]", "inconsistent basis");
        SparseGridVector q;
        for (Index ell = 0; ell < m; ++ell) q.push(ell, dense[ell]);
        basis.add(std::move(q), "q[" + std::to_string(k) + "]");
      }
    } else {
      fail("spec.constraints.kind", "unknown kind '" + ckind + "'");
    }
  }

  // ---- cost ----
  const json& costj = get(j, "cost", "spec");
  const std::string kind = get(costj, "kind", "spec.cost").get<std::string>();
  std::string expr;
  CostPath cost;
  int free_count = 0, free_axis = -1;
  for (int i = 0; i < n; ++i) {
    if (free_flags[i]) {
      ++free_count;
      free_axis = i;
    }
  }
  if (kind == "table") {
    Vector base = costj.contains("base") ? parse_vector(costj["base"], "spec.cost.base")
                                         : Vector::Zero(m);
    Vector slope = costj.contains("slope") ? parse_vector(costj["slope"], "spec.cost.slope")
                                           : Vector::Zero(m);
    if (base.size() != m) fail("spec.cost.base", "length does not match the grid");
    if (slope.size() != m) fail("spec.cost.slope", "length does not match the grid");
    cost = CostPath::affine(std::move(base), std::move(slope));
  } else if (kind == "expr") {
    expr = get(costj, "name", "spec.cost").get<std::string>();
    if (expr == "attractive") {
      if (n != 2) fail("spec.cost", "attractive cost needs two marginals");
      cost = CostPath::scaled(cost_table_squared_distance(marginals[0], marginals[1]));
    } else if (expr == "repulsive") {
      if (n != 2) fail("spec.cost", "repulsive cost needs two marginals");
      cost = CostPath::scaled(cost_table_neg_log_distance(marginals[0], marginals[1]));
    } else if (expr == "pairwise_repulsive") {
      if (n != 3) fail("spec.cost", "pairwise cost needs three marginals");
      cost = CostPath::scaled(cost_table_pairwise_neg_log(marginals[0], marginals[1], marginals[2]));
    } else if (expr == "spence_mirrlees") {
      if (n == 2) {
        cost = CostPath::scaled(cost_table_spence_mirrlees(marginals[0], marginals[1]));
      } else if (n == 3) {
        cost = CostPath::scaled(cost_table_spence_mirrlees3(marginals[0], marginals[1], marginals[2]));
      } else {
        fail("spec.cost", "spence_mirrlees cost needs two or three marginals");
      }
    } else if (expr == "geodesic" || expr == "barycenter") {
      // handled below through the family constructors
    } else {
      fail("spec.cost.name", "unknown expr '" + expr + "'");
    }
  } else {
    fail("spec.cost.kind", "unknown kind '" + kind + "'");
  }

  // ---- assemble ----
  LoadedSpec out;
  try {
    if (expr == "geodesic") {
      if (n != 3 || free_count != 1 || free_axis != 1)
        fail("spec", "geodesic needs marginals [mu1, z(free), mu2]");
      if (ckind != "none") fail("spec.constraints", "geodesic takes no extra constraints");
      out.problem = make_geodesic(marginals[0], marginals[2], marginals[1].points, eta);
    } else if (expr == "barycenter") {
      if (n < 3 || free_count != 1 || free_axis != n - 1)
        fail("spec", "barycenter needs marginals [mu1..muk, z(free)]");
      if (ckind != "none") fail("spec.constraints", "barycenter takes no extra constraints");
      Matrix zp = marginals.back().points;
      marginals.pop_back();
      out.problem = make_barycenter(std::move(marginals), std::move(zp), eta);
    } else {
      Family fam = Family::generic;
      if (ckind == "martingale" && marginals[0].dim() == 1) {
        fam = Family::martingale;
        if (!check_convex_order(marginals[0], marginals[1]))
          throw SolverError("infeasible: mu not dominated in convex order");
      } else if (ckind == "multi_period_martingale" && marginals[0].dim() == 1) {
        fam = Family::multi_period_martingale;
        if (!check_convex_order(marginals[0], marginals[1]) ||
            !check_convex_order(marginals[1], marginals[2]))
          throw SolverError("infeasible: mu not dominated in convex order");
      } else if (ckind == "none" && free_count == 0) {
        if (n == 2) fam = Family::two_marginal;
        if (n == 3) fam = Family::three_marginal;
      }
      out.problem = assemble_problem(std::move(marginals), std::move(free_flags), std::move(cost),
                                     std::move(basis), eta, fam);
    }
  } catch (const std::invalid_argument& e) {
    fail("spec", e.what());
  }

  if (j.contains("reference")) {
    const json& rj = j["reference"];
    double v = get_number(rj, "value", "spec.reference");
    double h = get_number(rj, "entropy", "spec.reference");
    out.bracket = std::make_pair(v, v + out.problem.eta * h);
  }
  return out;
}

LoadedSpec load_problem_spec(const std::string& path, std::optional<double> eta_override) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open input file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("JSON parse error: ") + e.what());
  }
  return parse_problem_spec(j, eta_override);
}

}  // namespace otcurve
