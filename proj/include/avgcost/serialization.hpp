#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "avgcost/iteration.hpp"
#include "avgcost/oracles.hpp"
#include "avgcost/rolling_horizon.hpp"
#include "avgcost/sensor_lqg.hpp"
#include "avgcost/split_chain.hpp"

namespace avgcost {

using Json = nlohmann::ordered_json;

/// 17 significant digits, "null" for non-finite values.
std::string format_double(double v);

/// Compact-but-indented JSON with every float printed by format_double.
std::string dump_json(const Json& j);

/// Writes through a temporary file in the same directory and renames it.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Model schema:
// {"n_states": n, "actions": [[labels of state 0], ...],
//  "kernel": {"x,label": [P(0|x,u), ..., P(n-1|x,u)]},
//  "cost": {"x,label": c}, "cost_floor": 1}
FiniteMdp model_from_json(const Json& j);
Json model_to_json(const FiniteMdp& m, const std::vector<std::string>& state_labels = {});
FiniteMdp load_model(const std::string& path);

// {"B": [states], "nu": {"state": mass}, "delta": real | "auto"}
SmallSetSpec smallset_from_json(const Json& j, const FiniteMdp& m);
Json smallset_to_json(const SmallSetSpec& s);
SmallSetSpec load_smallset(const std::string& path, const FiniteMdp& m);

/// Split kernel in the model schema, states labelled "x:0" / "x:1".
Json split_to_json(const SplitChainModel& sc);

Json policy_to_json(const FiniteMdp& m, const StationaryPolicy& v);
Json report_to_json(const FiniteMdp& m, const SolveReport& r);

std::string trace_csv(const IterationTrace& t);
Json trace_to_json(const IterationTrace& t);

std::string rolling_csv(const RollingHorizonReport& r);
Json rolling_to_json(const RollingHorizonReport& r);

Matrix matrix_from_json(const Json& j);
Json matrix_to_json(const Matrix& m);
// {"A": [[..]], "B", "D", "R", "M",
//  "queries": [{"C": [[..]], "F": [[..]], "lambda": x, "cost": c, "label": s}]}
LqgModel lqg_from_json(const Json& j);
Json lqg_to_json(const LqgModel& g);
Json riccati_to_json(const RiccatiSolution& r);

/// Columns t, query, gamma, plant_cost, query_cost, running_avg.
std::string simulation_csv(const SimulationResult& r);

}  // namespace avgcost
