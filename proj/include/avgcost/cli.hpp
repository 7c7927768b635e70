#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace avgcost {

/// One batch command. Paths are used as given; out_dir is replaced by the
/// AVGCOST_OUT_DIR environment variable when that is set.
struct RunConfig {
  std::string command;   // solve | split | vi | rvi | rolling | lqg-demo
  std::string variant;   // rvi: nu | min | anchor
  std::string model_path;
  std::string smallset = "auto";
  std::string out_dir = "out";
  double span_tol = 1e-10;
  std::size_t max_iters = 100'000;
  std::optional<std::size_t> anchor;
  std::optional<double> beta;  // default: occupation-measure LP
  std::size_t snapshot_every = 1;
  bool dump_tableau = false;
  // lqg-demo
  std::string lqg_path;        // empty: built-in scalar demo
  std::uint64_t seed = 1;
  std::size_t horizon = 1'000'000;
  double sigma_max = 5.0;
  std::size_t grid_points = 1001;
  bool write_simulation = false;
};

/// Exit status: 0 when every check passes, 1 when a check fails, 2 for model
/// or validation errors, 3 when a solver does not converge.
int run(const RunConfig& config, std::ostream& log);

/// Parses argv with CLI11 and dispatches to run().
int cli_main(int argc, char** argv);

}  // namespace avgcost
