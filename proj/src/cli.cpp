#include "avgcost/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "avgcost/iteration.hpp"
#include "avgcost/oracles.hpp"
#include "avgcost/rolling_horizon.hpp"
#include "avgcost/sensor_lqg.hpp"
#include "avgcost/serialization.hpp"
#include "avgcost/split_chain.hpp"

namespace avgcost {

namespace {

class Summary {
 public:
  explicit Summary(std::string command) { j_["command"] = std::move(command); }

  Json& operator[](const char* key) { return j_[key]; }

  // value <= tolerance passes.
  void check(const std::string& name, double value, double tolerance) {
    add(name, value <= tolerance, value, tolerance);
  }
  void require(const std::string& name, bool ok) { add(name, ok, std::nullopt, std::nullopt); }

  bool passed() const { return passed_; }

  std::string render() {
    j_["checks"] = checks_;
    j_["status"] = passed_ ? "PASS" : "FAIL";
    return dump_json(j_);
  }

 private:
  void add(const std::string& name, bool ok, std::optional<double> value, std::optional<double> tol) {
    Json c;
    c["name"] = name;
    c["status"] = ok ? "PASS" : "FAIL";
    if (value) c["value"] = *value;
    if (tol) c["tolerance"] = *tol;
    checks_.push_back(c);
    passed_ = passed_ && ok;
  }

  Json j_;
  Json checks_ = Json::array();
  bool passed_ = true;
};

struct Context {
  const RunConfig& cfg;
  std::ostream& log;
  std::string out;

  std::string path(const std::string& name) const { return (std::filesystem::path(out) / name).string(); }
  void write(const std::string& name, const std::string& content) const {
    write_file_atomic(path(name), content);
  }
};

SmallSetSpec resolve_smallset(const RunConfig& cfg, const FiniteMdp& m) {
  SmallSetSpec s = cfg.smallset == "auto" ? auto_small_set(m) : load_smallset(cfg.smallset, m);
  const auto problems = validate_small_set(m, s);
  if (!problems.empty()) {
    std::string msg = "small set rejected:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ModelError(msg);
  }
  return s;
}

StopRule stop_rule(const RunConfig& cfg) {
  StopRule stop;
  stop.max_iters = cfg.max_iters;
  stop.span_tol = cfg.span_tol;
  stop.snapshot_every = cfg.snapshot_every;
  return stop;
}

double state_product(const FiniteMdp& m) {
  double count = 1.0;
  for (std::size_t x = 0; x < m.n_states(); ++x) count *= static_cast<double>(m.n_actions(x));
  return count;
}

int cmd_solve(const Context& ctx, const FiniteMdp& m, const SmallSetSpec& s) {
  std::ostringstream tableau;
  LpSolveOptions opt;
  opt.nu = &s.nu;
  if (ctx.cfg.dump_tableau) opt.tableau_dump = &tableau;
  const SolveReport rep = optimal_average_cost_lp(m, opt);

  Summary sum("solve");
  sum["model"] = ctx.cfg.model_path;
  sum["beta"] = rep.beta;
  sum["policy"] = policy_to_json(m, rep.policy);
  sum["value"] = std::vector<double>(rep.value.values.data(), rep.value.values.data() + rep.value.size());
  sum.check("acoe_residual", acoe_residual(m, rep.value, rep.beta), 1e-9);
  sum.check("anchoring", std::abs(s.integrate(rep.value.values) - rep.beta), 1e-10);
  sum.check("occupation_balance", rep.occupation.balance_error(m), 1e-10);
  sum.check("policy_average_cost", std::abs(average_cost(m, rep.policy) - rep.beta), 1e-8);
  if (state_product(m) <= 1e4) {
    const SolveReport en = best_enumerated(m, enumerate_policies_bruteforce(m));
    sum["beta_enumeration"] = en.beta;
    sum.check("lp_vs_enumeration", std::abs(en.beta - rep.beta), 1e-8);
  }
  ctx.write("report.json", dump_json(report_to_json(m, rep)));
  if (ctx.cfg.dump_tableau) ctx.write("tableau.txt", tableau.str());
  ctx.write("summary.json", sum.render());
  ctx.log << "beta = " << format_double(rep.beta) << "\n";
  return sum.passed() ? 0 : 1;
}

int cmd_split(const Context& ctx, const FiniteMdp& m, const SmallSetSpec& s) {
  const SplitChainModel sc = build_split_chain(m, s);
  const FiniteMdp& q = sc.lifted();
  double worst = 0.0;
  for (std::size_t z = 0; z < q.n_states(); ++z)
    for (std::size_t k = 0; k < q.n_actions(z); ++k) {
      double sumrow = 0.0;
      for (double p : q.row(z, k)) sumrow += p;
      worst = std::max(worst, std::abs(sumrow - 1.0));
    }

  Summary sum("split");
  sum["model"] = ctx.cfg.model_path;
  sum["n_split"] = sc.n_split();
  sum["small_set"] = smallset_to_json(s);
  sum.check("row_sums", worst, 1e-12);

  // Marginal law and accumulated cost against the base chain under the LP policy.
  const SolveReport rep = optimal_average_cost_lp(m);
  const Matrix p = policy_kernel(m, rep.policy);
  const Matrix pq = policy_kernel(q, sc.lift(rep.policy));
  const Vector c = policy_cost(m, rep.policy);
  const Vector cq = policy_cost(q, sc.lift(rep.policy));
  double law_err = 0.0, cost_err = 0.0;
  for (std::size_t x0 = 0; x0 < m.n_states(); ++x0) {
    Vector mu = Vector::Zero(static_cast<Eigen::Index>(m.n_states()));
    mu[static_cast<Eigen::Index>(x0)] = 1.0;
    Vector smu = split_measure(mu, s);
    double acc = 0.0, sacc = 0.0;
    for (int n = 0; n <= 20; ++n) {
      law_err = std::max(law_err, (marginalize(smu, s, m.n_states()) - mu).cwiseAbs().maxCoeff());
      acc += mu.dot(c);
      sacc += smu.dot(cq);
      cost_err = std::max(cost_err, std::abs(acc - sacc));
      mu = (mu.transpose() * p).transpose();
      smu = (smu.transpose() * pq).transpose();
    }
  }
  sum.check("marginal_law_n_le_20", law_err, 1e-12);
  sum.check("accumulated_cost_n_le_20", cost_err, 1e-12);
  if (sc.delta_circ()) {
    sum["delta_circ"] = *sc.delta_circ();
    const ValueField h = expected_visits_before_atom(sc, rep.policy);
    double hmax = 0.0;
    for (std::size_t x = 0; x < m.n_states(); ++x) hmax = std::max(hmax, h[x]);
    sum["max_visits_before_atom"] = hmax;
    sum.check("visits_within_delta_circ", hmax - *sc.delta_circ(), 1e-9);
  }
  ctx.write("split.json", dump_json(split_to_json(sc)));
  ctx.write("summary.json", sum.render());
  ctx.log << "split chain: " << sc.n_split() << " states\n";
  return sum.passed() ? 0 : 1;
}

int cmd_iterate(const Context& ctx, const FiniteMdp& m, const SmallSetSpec& s) {
  const SolveReport rep = optimal_average_cost_lp(m, LpSolveOptions{nullptr, &s.nu});
  const double beta = ctx.cfg.beta ? *ctx.cfg.beta : rep.beta;
  const ValueField v0 = ValueField::zeros(m.n_states());
  const StopRule stop = stop_rule(ctx.cfg);
  const bool is_vi = ctx.cfg.command == "vi";

  IterationTrace t;
  if (is_vi) {
    t = value_iteration(m, beta, v0, stop);
  } else if (ctx.cfg.variant == "nu") {
    t = rvi_nu(m, s.nu, v0, stop);
  } else if (ctx.cfg.variant == "min") {
    t = rvi_min(m, v0, stop);
  } else if (ctx.cfg.variant == "anchor") {
    t = rvi_anchor(m, s, ctx.cfg.anchor.value_or(s.B.front()), v0, stop);
  } else {
    throw ModelError("unknown rvi variant \"" + ctx.cfg.variant + "\"");
  }

  Summary sum(is_vi ? "vi" : "rvi " + ctx.cfg.variant);
  sum["model"] = ctx.cfg.model_path;
  sum["beta"] = beta;
  sum["iterations"] = t.iterations();
  sum["final_field"] = std::vector<double>(t.final_field.values.data(),
                                           t.final_field.values.data() + t.final_field.size());
  sum.require("converged", t.converged);
  const Vector diff = t.final_field.values - rep.value.values;
  sum.check("span_to_vstar", span(diff), 1e-8);
  if (is_vi) {
    sum.check("acoe_residual", acoe_residual(m, t.final_field, beta), 1e-8);
  } else {
    const double off = *t.records.back().offset;
    sum["final_offset"] = off;
    sum.check("offset_vs_beta", std::abs(off - rep.beta), 1e-8);
  }
  if (!t.records.empty()) sum["final_policy"] = policy_to_json(m, t.records.back().selector);
  ctx.write("trace.csv", trace_csv(t));
  ctx.write("trace.json", dump_json(trace_to_json(t)));
  ctx.write("summary.json", sum.render());
  ctx.log << t.iterations() << " iterations\n";
  return sum.passed() ? 0 : 1;
}

int cmd_rolling(const Context& ctx, const FiniteMdp& m, const SmallSetSpec& s) {
  const SolveReport rep = optimal_average_cost_lp(m, LpSolveOptions{nullptr, &s.nu});
  StopRule stop = stop_rule(ctx.cfg);
  stop.snapshot_every = 1;
  const IterationTrace t = value_iteration(m, rep.beta, ValueField::zeros(m.n_states()), stop);
  const H2Certificate cert = check_h2(m, rep.value);
  const EnvelopeFit env = fit_envelope(t, rep.value, cert);
  std::vector<std::size_t> ns(t.iterations());
  for (std::size_t n = 0; n < ns.size(); ++n) ns[n] = n;
  const RollingHorizonReport r = evaluate_rolling_horizon(m, t, ns, rep.beta, cert, env.c0);

  Summary sum("rolling");
  sum["model"] = ctx.cfg.model_path;
  sum["beta"] = rep.beta;
  sum["theta1"] = cert.theta1;
  sum["theta2"] = cert.theta2;
  sum["c0"] = env.c0;
  sum["envelope_decay_rate"] = env.decay_rate;
  sum["stabilization_threshold"] = stabilization_threshold(cert, env.c0);
  sum["lock_in"] = r.lock_in ? Json(*r.lock_in) : Json(nullptr);
  sum.require("envelope_holds", env.holds);
  sum.require("lock_in_found", r.lock_in.has_value());
  sum.require("bound_respected", r.bound_respected());
  sum.require("gaps_nonnegative", r.gaps_nonnegative());
  ctx.write("rolling.csv", rolling_csv(r));
  ctx.write("rolling.json", dump_json(rolling_to_json(r)));
  ctx.write("trace.csv", trace_csv(t));
  ctx.write("summary.json", sum.render());
  ctx.log << "lock-in at n = " << (r.lock_in ? std::to_string(*r.lock_in) : "none") << "\n";
  return sum.passed() ? 0 : 1;
}

int cmd_lqg(const Context& ctx) {
  const LqgModel g = ctx.cfg.lqg_path.empty() ? scalar_demo()
                                              : lqg_from_json(Json::parse(read_file(ctx.cfg.lqg_path)));
  const RiccatiSolution ric = solve_riccati(g);
  const VarianceGridMdp grid = build_variance_grid_mdp(g, ric, {ctx.cfg.sigma_max, ctx.cfg.grid_points});
  for (const auto& w : grid.warnings) ctx.log << "warning: " << w << "\n";
  const SolveReport lp = optimal_average_cost_lp(grid.mdp, LpSolveOptions{nullptr, &grid.small_set.nu});
  StopRule stop = stop_rule(ctx.cfg);
  stop.snapshot_every = 0;
  const IterationTrace t = rvi_min(grid.mdp, ValueField::zeros(grid.points.size()), stop);
  const double offset = *t.records.back().offset;

  SimulationOptions so;
  so.horizon = ctx.cfg.horizon;
  so.seed = ctx.cfg.seed;
  so.keep_trace = ctx.cfg.write_simulation;
  const SimulationResult sim = simulate_closed_loop(g, ric, grid_scheduler(grid, lp.policy), so);
  const double target = lp.beta + ric.rho_star_offset;

  Summary sum("lqg-demo");
  sum["riccati"] = riccati_to_json(ric);
  sum["grid_points"] = grid.points.size();
  sum["sigma_max"] = ctx.cfg.sigma_max;
  sum["small_set"] = smallset_to_json(grid.small_set);
  sum["warnings"] = grid.warnings;
  sum["grid_beta"] = lp.beta;
  sum["rvi_offset"] = offset;
  sum["predicted_cost"] = target;
  sum["mc_mean"] = sim.mean;
  sum["mc_std_error"] = sim.std_error;
  sum["seed"] = ctx.cfg.seed;
  sum["horizon"] = ctx.cfg.horizon;
  sum.check("riccati_residual", ric.residual, 1e-10);
  sum.check("closed_loop_radius_below_1", ric.closed_loop_radius - 1.0, -1e-12);
  sum.check("rvi_offset_vs_lp", std::abs(offset - lp.beta), 1e-8);
  sum.check("monte_carlo_within_3se", std::abs(sim.mean - target) - 3.0 * sim.std_error, 0.0);
  ctx.write("lqg.json", dump_json(Json{{"model", lqg_to_json(g)}, {"policy", lp.policy.actions()}}));
  if (ctx.cfg.write_simulation) ctx.write("simulation.csv", simulation_csv(sim));
  ctx.write("summary.json", sum.render());
  ctx.log << "grid beta = " << format_double(lp.beta) << ", Monte Carlo = " << format_double(sim.mean)
          << " +- " << format_double(sim.std_error) << "\n";
  return sum.passed() ? 0 : 1;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& log) {
  Context ctx{cfg, log, cfg.out_dir};
  if (const char* env = std::getenv("AVGCOST_OUT_DIR"); env && *env) ctx.out = env;
  try {
    if (cfg.command == "lqg-demo") return cmd_lqg(ctx);
    if (cfg.model_path.empty()) throw ModelError("--model is required");
    const FiniteMdp m = load_model(cfg.model_path);
    require_valid(m);
    const SmallSetSpec s = resolve_smallset(cfg, m);
    if (cfg.command == "solve") return cmd_solve(ctx, m, s);
    if (cfg.command == "split") return cmd_split(ctx, m, s);
    if (cfg.command == "vi" || cfg.command == "rvi") return cmd_iterate(ctx, m, s);
    if (cfg.command == "rolling") return cmd_rolling(ctx, m, s);
    throw ModelError("unknown command \"" + cfg.command + "\"");
  } catch (const ModelError& e) {
    log << "model error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    log << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    log << "model error: " << e.what() << "\n";
    return 2;
  }
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Average-cost MDP solvers, split-chain diagnostics and the LQG sensor demo"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&cfg](CLI::App* sub, bool iterative) {
    sub->add_option("-m,--model", cfg.model_path, "model JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("-s,--smallset", cfg.smallset, "small-set JSON or \"auto\"");
    sub->add_option("-o,--out", cfg.out_dir, "output directory (AVGCOST_OUT_DIR overrides)");
    if (iterative) {
      sub->add_option("--span-tol", cfg.span_tol, "span stopping tolerance")->check(CLI::PositiveNumber);
      sub->add_option("--max-iters", cfg.max_iters, "iteration cap")->check(CLI::PositiveNumber);
      sub->add_option("--snapshot-every", cfg.snapshot_every, "field snapshot period (0 = none)");
    }
  };

  auto* solve = app.add_subcommand("solve", "occupation-measure LP, Poisson solve and ACOE check");
  common(solve, false);
  solve->add_flag("--dump-tableau", cfg.dump_tableau, "write the final simplex tableau");

  auto* split = app.add_subcommand("split", "build and check the split chain");
  common(split, false);

  auto* vi = app.add_subcommand("vi", "value iteration with known beta");
  common(vi, true);
  double beta = 0.0;
  auto* beta_opt = vi->add_option("--beta", beta, "average cost (default: LP optimum)");

  auto* rvi = app.add_subcommand("rvi", "relative value iteration");
  rvi->add_option("variant", cfg.variant, "nu | min | anchor")
      ->required()
      ->check(CLI::IsMember({"nu", "min", "anchor"}));
  common(rvi, true);
  std::size_t anchor = 0;
  auto* anchor_opt = rvi->add_option("--anchor", anchor, "anchor state (must lie in the small set)");

  auto* rolling = app.add_subcommand("rolling", "rolling-horizon policy report");
  common(rolling, true);

  auto* lqg = app.add_subcommand("lqg-demo", "scalar LQG sensor scheduling end to end");
  lqg->add_option("--lqg", cfg.lqg_path, "LQG model JSON (default: built-in scalar demo)")
      ->check(CLI::ExistingFile);
  lqg->add_option("-o,--out", cfg.out_dir, "output directory (AVGCOST_OUT_DIR overrides)");
  lqg->add_option("--seed", cfg.seed, "simulation seed");
  lqg->add_option("--horizon", cfg.horizon, "simulation steps")->check(CLI::PositiveNumber);
  lqg->add_option("--sigma-max", cfg.sigma_max, "upper end of the variance grid")->check(CLI::PositiveNumber);
  lqg->add_option("--grid", cfg.grid_points, "number of grid points")->check(CLI::Range(2, 1'000'000));
  lqg->add_option("--span-tol", cfg.span_tol, "span stopping tolerance")->check(CLI::PositiveNumber);
  lqg->add_option("--max-iters", cfg.max_iters, "iteration cap")->check(CLI::PositiveNumber);
  lqg->add_flag("--trace", cfg.write_simulation, "write simulation.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  if (*beta_opt) cfg.beta = beta;
  if (*anchor_opt) cfg.anchor = anchor;
  return run(cfg, std::cerr);
}

}  // namespace avgcost
