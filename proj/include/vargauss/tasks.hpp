#pragma once

#include "vargauss/config.hpp"
#include "vargauss/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

namespace vg {

inline constexpr const char* kResultSchema = "vargauss.result/1";

struct Observable {
    std::string name;
    std::string unit;
    double value = 0.0;
};

struct NamedTable {
    std::string file;
    Table table;
};

// Outcome of one task on one parameter point.
struct TaskResult {
    std::string status = "ok";  // ok, not_converged or failed
    std::string message;
    std::vector<Observable> observables;
    std::vector<std::pair<std::string, std::string>> labels;  // text-valued observables
    nlohmann::json diagnostics = nlohmann::json::object();
    std::vector<NamedTable> tables;

    bool ok() const { return status == "ok"; }
    const Observable* find(const std::string& name) const;
};

// Runs the task for a configuration without a grid. Numerical failures are reported through the
// status, never thrown; configuration problems throw Config errors.
TaskResult run_task(const RunConfig& cfg, std::ostream& log);

struct GridCell {
    std::vector<double> values;  // one per axis
    RunConfig config;
};

// Cartesian product of the grid axes, first axis outermost; every cell is validated up front.
std::vector<GridCell> expand_grid(const RunConfig& cfg);

// Runs the cells on a pool of worker threads; results are stored by grid index.
std::vector<TaskResult> run_cells(const std::vector<GridCell>& cells, int jobs, std::ostream& log);

// Merged table of a sweep, ordered by grid index.
Table merge_cells(const RunConfig& cfg, const std::vector<GridCell>& cells, const std::vector<TaskResult>& results);

struct RunOutcome {
    int exit_code = 0;
    std::filesystem::path dir;
    nlohmann::json record;
};

// Full run: build the configuration, execute (sweeping when a grid is present), and write
// result.json, the tables and MANIFEST into the output directory.
// Exit codes: 0 success, 1 configuration error, 2 non-convergence or numerical failure.
RunOutcome run(Task task, const YAML::Node& document, std::ostream& log);

std::string build_id();

}  // namespace vg
