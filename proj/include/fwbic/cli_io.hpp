#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fwbic/bic_search.hpp"
#include "fwbic/modal.hpp"
#include "fwbic/problem.hpp"
#include "fwbic/resonance.hpp"

namespace fwbic {

struct Overrides {
  std::optional<double> delta_from, delta_to;
  std::optional<int> delta_steps;
  std::optional<int> resolution;
  std::optional<int> mcav, jwg;
  int threads = 1;
};

ProblemSpec apply_overrides(ProblemSpec spec, const Overrides &o);

// Validates the problem; an IndexSweep without n_base gets the tracked crossing
// index (searched over numerics.crossing_window) as n_base.
ValidatedSpec resolve_spec(const ProblemSpec &spec, int threads = 1, CrossingResult *crossing = nullptr);

// Uniform grid over the configured delta range with the given count.
std::vector<double> delta_grid(const ValidatedSpec &vs, int points);

// Formatting shared by all CSV writers (fixed, round-trip stable).
std::string fmt(double v);

void write_curves_csv(const std::string &path, const std::vector<ScanRow> &rows);
void write_field_csv(const std::string &path, const std::vector<FieldSample> &field);
void write_resonance_csv(const std::string &path, const std::vector<ResonanceTrack> &tracks);

nlohmann::json solution_json(const BicSolution &sol);

// Entry point of the command line tool; returns the process exit code.
int run_cli(int argc, char **argv);

} // namespace fwbic
