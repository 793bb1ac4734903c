#include "qope/core/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace qope::core {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

double parse_double(const std::string& cell, int row, int col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw DataError("csv: row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                    ": expected a number, got '" + cell + "'");
  return v;
}

long parse_long(const std::string& cell, int row, int col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const long v = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0')
    throw DataError("csv: row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                    ": expected an integer, got '" + cell + "'");
  return v;
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

Dataset read_dataset_csv(std::istream& in, int action_space) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: empty input");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "traj_id" || header[1] != "stage" ||
      header.back() != "reward" || header[header.size() - 2] != "action")
    throw DataError("csv: header must be traj_id,stage,x_0..x_{d-1},action,reward");
  const int max_dim = static_cast<int>(header.size()) - 4;
  for (int j = 0; j < max_dim; ++j)
    if (header[2 + j] != "x_" + std::to_string(j))
      throw DataError("csv: covariate column " + std::to_string(j + 3) + " must be named x_" +
                      std::to_string(j));

  struct Row {
    int stage;
    std::vector<double> covariates;
    int action;
    double reward;
  };
  std::map<long, std::vector<Row>> by_traj;
  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("csv: row " + std::to_string(row_no) + ": expected " +
                      std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    Row row;
    const long traj_id = parse_long(cells[0], row_no, 0);
    row.stage = static_cast<int>(parse_long(cells[1], row_no, 1));
    if (row.stage < 1)
      throw DataError("csv: row " + std::to_string(row_no) + ": stages are 1-indexed");
    for (int j = 0; j < max_dim; ++j) {
      const auto& cell = cells[2 + j];
      if (cell.empty()) {
        // Trailing empty cells mean this stage has fewer covariates.
        for (int j2 = j + 1; j2 < max_dim; ++j2)
          if (!cells[2 + j2].empty())
            throw DataError("csv: row " + std::to_string(row_no) + ", column " +
                            std::to_string(3 + j2) + ": non-empty cell after an empty one");
        break;
      }
      row.covariates.push_back(parse_double(cell, row_no, 2 + j));
    }
    row.action = static_cast<int>(parse_long(cells[header.size() - 2], row_no,
                                             static_cast<int>(header.size()) - 2));
    row.reward = parse_double(cells.back(), row_no, static_cast<int>(header.size()) - 1);
    by_traj[traj_id].push_back(std::move(row));
  }
  if (by_traj.empty()) throw DataError("csv: no data rows");

  std::vector<Trajectory> trajectories;
  trajectories.reserve(by_traj.size());
  for (auto& [traj_id, rows] : by_traj) {
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.stage < b.stage; });
    Trajectory traj;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k].stage != static_cast<int>(k) + 1)
        throw DataError("csv: trajectory " + std::to_string(traj_id) +
                        ": stages must be contiguous from 1, found stage " +
                        std::to_string(rows[k].stage));
      traj.stages.push_back({std::move(rows[k].covariates), rows[k].action, rows[k].reward});
    }
    trajectories.push_back(std::move(traj));
  }
  try {
    return Dataset::from_trajectories(std::move(trajectories), action_space);
  } catch (const DataError& e) {
    throw DataError(std::string("csv: ") + e.what());
  }
}

Dataset read_dataset_csv_file(const std::string& path, int action_space) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open '" + path + "'");
  return read_dataset_csv(in, action_space);
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
  dataset.validate();
  const int max_dim = *std::max_element(dataset.covariate_dims.begin(), dataset.covariate_dims.end());
  out << "traj_id,stage";
  for (int j = 0; j < max_dim; ++j) out << ",x_" << j;
  out << ",action,reward\n";
  for (int i = 0; i < dataset.size(); ++i) {
    for (int k = 0; k < dataset.horizon; ++k) {
      const auto& st = dataset.trajectories[i].stages[k];
      out << i << ',' << (k + 1);
      for (int j = 0; j < max_dim; ++j) {
        out << ',';
        if (j < static_cast<int>(st.covariates.size())) out << format_double(st.covariates[j]);
      }
      out << ',' << st.action << ',' << format_double(st.reward) << '\n';
    }
  }
}

void write_dataset_csv_file(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw DataError("csv: cannot open '" + path + "' for writing");
  write_dataset_csv(out, dataset);
}

}  // namespace qope::core
