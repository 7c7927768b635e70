#include "avgcost/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace avgcost {

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void dump_into(const Json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner + Json(it.key()).dump() + ": ";
        dump_into(it.value(), out, indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& e : j)
        if (e.is_structured()) flat = false;
      out += "[";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat ? ", " : ",";
        first = false;
        if (!flat) out += "\n" + inner;
        dump_into(e, out, indent + 1);
      }
      if (!flat) out += "\n" + pad;
      out += "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

std::string pair_key(const FiniteMdp& m, std::size_t x, std::size_t k) {
  return std::to_string(x) + "," + m.action_labels(x)[k];
}

const Json& need(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ModelError(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

}  // namespace

std::string dump_json(const Json& j) {
  std::string out;
  dump_into(j, out, 0);
  out += "\n";
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ModelError("cannot write " + tmp.string());
    os << content;
    if (!os) throw ModelError("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

FiniteMdp model_from_json(const Json& j) {
  try {
    const auto n = need(j, "n_states").get<std::size_t>();
    const Json& actions = need(j, "actions");
    if (!actions.is_array() || actions.size() != n)
      throw ModelError("\"actions\" must list the labels of every state");
    std::vector<std::vector<std::string>> labels(n);
    std::vector<std::vector<std::vector<double>>> kernel(n);
    std::vector<std::vector<double>> cost(n);
    const Json& jk = need(j, "kernel");
    const Json& jc = need(j, "cost");
    for (std::size_t x = 0; x < n; ++x) {
      for (const auto& lab : actions[x]) {
        const std::string label = lab.get<std::string>();
        const std::string key = std::to_string(x) + "," + label;
        if (!jk.contains(key)) throw ModelError("kernel row \"" + key + "\" missing");
        if (!jc.contains(key)) throw ModelError("cost \"" + key + "\" missing");
        labels[x].push_back(label);
        kernel[x].push_back(jk.at(key).get<std::vector<double>>());
        cost[x].push_back(jc.at(key).get<double>());
      }
    }
    const double floor = j.contains("cost_floor") ? j.at("cost_floor").get<double>() : 1.0;
    return FiniteMdp(std::move(labels), std::move(kernel), std::move(cost), floor);
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed model JSON: ") + e.what());
  }
}

Json model_to_json(const FiniteMdp& m, const std::vector<std::string>& state_labels) {
  Json j;
  j["n_states"] = m.n_states();
  if (!state_labels.empty()) j["states"] = state_labels;
  Json actions = Json::array();
  for (std::size_t x = 0; x < m.n_states(); ++x) actions.push_back(m.action_labels(x));
  j["actions"] = actions;
  Json kernel = Json::object();
  Json cost = Json::object();
  for (std::size_t x = 0; x < m.n_states(); ++x)
    for (std::size_t k = 0; k < m.n_actions(x); ++k) {
      const auto row = m.row(x, k);
      kernel[pair_key(m, x, k)] = std::vector<double>(row.begin(), row.end());
      cost[pair_key(m, x, k)] = m.cost(x, k);
    }
  j["kernel"] = kernel;
  j["cost"] = cost;
  j["cost_floor"] = m.cost_floor();
  return j;
}

FiniteMdp load_model(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(path + ": " + e.what());
  }
  return model_from_json(j);
}

SmallSetSpec smallset_from_json(const Json& j, const FiniteMdp& m) {
  try {
    SmallSetSpec s;
    s.B = need(j, "B").get<std::vector<std::size_t>>();
    std::sort(s.B.begin(), s.B.end());
    s.B.erase(std::unique(s.B.begin(), s.B.end()), s.B.end());
    for (std::size_t b : s.B)
      if (b >= m.n_states()) throw ModelError("small set state " + std::to_string(b) + " out of range");
    s.nu.assign(m.n_states(), 0.0);
    for (auto it = need(j, "nu").begin(); it != need(j, "nu").end(); ++it) {
      const std::size_t y = std::stoul(it.key());
      if (y >= m.n_states()) throw ModelError("nu state " + it.key() + " out of range");
      s.nu[y] = it.value().get<double>();
    }
    const Json& d = need(j, "delta");
    if (d.is_string()) {
      if (d.get<std::string>() != "auto") throw ModelError("delta must be a number or \"auto\"");
      s.delta = auto_delta(m, s.B, s.nu);
    } else {
      s.delta = d.get<double>();
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed small-set JSON: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ModelError("nu keys must be state indices");
  }
}

Json smallset_to_json(const SmallSetSpec& s) {
  Json j;
  j["B"] = s.B;
  Json nu = Json::object();
  for (std::size_t y = 0; y < s.nu.size(); ++y)
    if (s.nu[y] != 0.0) nu[std::to_string(y)] = s.nu[y];
  j["nu"] = nu;
  j["delta"] = s.delta;
  return j;
}

SmallSetSpec load_smallset(const std::string& path, const FiniteMdp& m) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(path + ": " + e.what());
  }
  return smallset_from_json(j, m);
}

Json split_to_json(const SplitChainModel& sc) {
  std::vector<std::string> labels;
  for (std::size_t z = 0; z < sc.n_split(); ++z) labels.push_back(sc.label(z));
  Json j = model_to_json(sc.lifted(), labels);
  j["small_set"] = smallset_to_json(sc.small_set());
  if (sc.delta_circ()) j["delta_circ"] = *sc.delta_circ();
  return j;
}

Json policy_to_json(const FiniteMdp& m, const StationaryPolicy& v) {
  Json out = Json::array();
  for (std::size_t x = 0; x < v.n_states(); ++x) {
    if (v.is_deterministic()) {
      out.push_back(m.action_labels(x)[v.action(x)]);
    } else {
      Json w = Json::object();
      for (std::size_t k = 0; k < m.n_actions(x); ++k)
        if (v.weight(x, k) > 0.0) w[m.action_labels(x)[k]] = v.weight(x, k);
      out.push_back(w);
    }
  }
  return out;
}

Json report_to_json(const FiniteMdp& m, const SolveReport& r) {
  Json j;
  j["method"] = r.method == SolveMethod::lp ? "lp" : "enumeration";
  j["beta"] = r.beta;
  j["policy"] = policy_to_json(m, r.policy);
  Json occ = Json::object();
  for (std::size_t x = 0; x < m.n_states(); ++x)
    for (std::size_t k = 0; k < m.n_actions(x); ++k)
      if (r.occupation.zeta.size() > 0 && r.occupation.mass(m, x, k) > 0.0)
        occ[pair_key(m, x, k)] = r.occupation.mass(m, x, k);
  j["occupation"] = occ;
  j["value"] = std::vector<double>(r.value.values.data(), r.value.values.data() + r.value.values.size());
  return j;
}

namespace {

std::string selector_string(const StationaryPolicy& v) {
  std::string s;
  for (std::size_t x = 0; x < v.n_states(); ++x) {
    if (x) s += ';';
    s += std::to_string(v.action(x));
  }
  return s;
}

Json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

std::string trace_csv(const IterationTrace& t) {
  std::string out = "n,offset,span,residual,selector\n";
  for (const auto& r : t.records) {
    out += std::to_string(r.n) + "," + (r.offset ? format_double(*r.offset) : std::string()) + "," +
           format_double(r.span) + "," + format_double(r.residual) + "," + selector_string(r.selector) +
           "\n";
  }
  return out;
}

Json trace_to_json(const IterationTrace& t) {
  Json j;
  j["space"] = t.space == IndexSpace::base ? "base" : "split";
  j["iterations"] = t.records.size();
  j["converged"] = t.converged;
  Json recs = Json::array();
  for (const auto& r : t.records) {
    Json e;
    e["n"] = r.n;
    e["offset"] = r.offset ? Json(*r.offset) : Json(nullptr);
    e["span"] = r.span;
    e["residual"] = r.residual;
    e["selector"] = r.selector.actions();
    recs.push_back(e);
  }
  j["records"] = recs;
  Json snaps = Json::array();
  for (const auto& [n, f] : t.snapshots) snaps.push_back(Json{{"n", n}, {"field", vec_json(f.values)}});
  j["snapshots"] = snaps;
  j["final_field"] = vec_json(t.final_field.values);
  return j;
}

std::string rolling_csv(const RollingHorizonReport& r) {
  std::string out = "n,beta_n,bound,gap,unichain\n";
  for (const auto& e : r.records) {
    out += std::to_string(e.n) + "," + (e.beta_n ? format_double(*e.beta_n) : std::string()) + "," +
           (e.bound ? format_double(*e.bound) : std::string()) + "," +
           (e.gap ? format_double(*e.gap) : std::string()) + "," + (e.unichain ? "1" : "0") + "\n";
  }
  return out;
}

Json rolling_to_json(const RollingHorizonReport& r) {
  Json j;
  j["beta"] = r.beta;
  j["theta1"] = r.cert.theta1;
  j["theta2"] = r.cert.theta2;
  j["rho"] = r.cert.rho;
  j["c0"] = r.c0;
  j["lock_in"] = r.lock_in ? Json(*r.lock_in) : Json(nullptr);
  Json recs = Json::array();
  for (const auto& e : r.records) {
    Json x;
    x["n"] = e.n;
    x["policy"] = e.policy.actions();
    x["unichain"] = e.unichain;
    x["beta_n"] = e.beta_n ? Json(*e.beta_n) : Json(nullptr);
    x["bound"] = e.bound ? Json(*e.bound) : Json(nullptr);
    x["gap"] = e.gap ? Json(*e.gap) : Json(nullptr);
    recs.push_back(x);
  }
  j["records"] = recs;
  return j;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ModelError("matrix must be a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw ModelError("ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(row);
  }
  return out;
}

LqgModel lqg_from_json(const Json& j) {
  try {
    LqgModel g;
    g.A = matrix_from_json(need(j, "A"));
    g.B = matrix_from_json(need(j, "B"));
    g.D = matrix_from_json(need(j, "D"));
    g.R = matrix_from_json(need(j, "R"));
    g.M = matrix_from_json(need(j, "M"));
    for (const auto& q : need(j, "queries")) {
      SensorQuery s;
      s.C = matrix_from_json(need(q, "C"));
      s.F = matrix_from_json(need(q, "F"));
      s.lambda = need(q, "lambda").get<double>();
      s.cost = need(q, "cost").get<double>();
      if (q.contains("label")) s.label = q.at("label").get<std::string>();
      g.queries.push_back(std::move(s));
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed LQG JSON: ") + e.what());
  }
}

Json lqg_to_json(const LqgModel& g) {
  Json j;
  j["A"] = matrix_to_json(g.A);
  j["B"] = matrix_to_json(g.B);
  j["D"] = matrix_to_json(g.D);
  j["R"] = matrix_to_json(g.R);
  j["M"] = matrix_to_json(g.M);
  Json qs = Json::array();
  for (const auto& q : g.queries)
    qs.push_back(Json{{"C", matrix_to_json(q.C)}, {"F", matrix_to_json(q.F)}, {"lambda", q.lambda},
                      {"cost", q.cost}, {"label", q.label}});
  j["queries"] = qs;
  return j;
}

Json riccati_to_json(const RiccatiSolution& r) {
  Json j;
  j["pi_star"] = matrix_to_json(r.pi_star);
  j["pi_tilde"] = matrix_to_json(r.pi_tilde);
  j["k_star"] = matrix_to_json(r.k_star);
  j["trace_pi_dd"] = r.rho_star_offset;
  j["residual"] = r.residual;
  j["closed_loop_radius"] = r.closed_loop_radius;
  j["iterations"] = r.iterations;
  return j;
}

std::string simulation_csv(const SimulationResult& r) {
  std::string out = "t,query,gamma,plant_cost,query_cost,running_avg\n";
  for (std::size_t t = 0; t < r.steps.size(); ++t) {
    const auto& s = r.steps[t];
    out += std::to_string(t) + "," + std::to_string(s.query) + "," + std::to_string(s.gamma) + "," +
           format_double(s.plant_cost) + "," + format_double(s.query_cost) + "," +
           format_double(s.running_avg) + "\n";
  }
  return out;
}

}  // namespace avgcost
