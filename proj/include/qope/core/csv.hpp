#pragma once

#include <iosfwd>
#include <string>

#include "qope/core/types.hpp"

namespace qope::core {

// Dataset CSV layout: header `traj_id,stage,x_0..x_{d-1},action,reward` with
// d = max_k d_k, one row per (trajectory, stage), stages 1-indexed. Stages
// with fewer covariates leave the trailing x-cells empty.
Dataset read_dataset_csv(std::istream& in, int action_space = 0);
Dataset read_dataset_csv_file(const std::string& path, int action_space = 0);

void write_dataset_csv(std::ostream& out, const Dataset& dataset);
void write_dataset_csv_file(const std::string& path, const Dataset& dataset);

// Full-precision decimal formatting (round-trips doubles exactly).
std::string format_double(double value);

}  // namespace qope::core
