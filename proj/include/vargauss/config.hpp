#pragma once

#include "vargauss/flow.hpp"
#include "vargauss/lattice_holstein.hpp"
#include "vargauss/polaron.hpp"
#include "vargauss/spinboson.hpp"

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>
#include <yaml-cpp/yaml.h>

namespace vg {

enum class Task { Ground, Dispersion, Quench, Spectral, PhaseScan, Validate };
Task task_from_string(const std::string& s);
const char* task_name(Task t);

enum class ModelKind { None, Polaron, SpinBoson, Kondo, Lattice };
const char* model_kind_name(ModelKind m);

// One swept parameter: a dotted config key and its values in grid order.
struct GridAxis {
    std::string key;
    std::vector<double> values;
};

struct DispersionOptions {
    std::vector<int> k_indices;  // empty: every momentum of the chain
    int starts = 1;
};

struct SpectralOptions {
    double eta = 0.05;
    double omega_min = -10.0;
    double omega_max = 10.0;
    int omega_points = 4001;
    double peak_threshold = 0.02;  // resolved peaks exceed this fraction of the maximum
};

struct QuenchOptions {
    QuenchEngine engine = QuenchEngine::Structured;
    double early_from = 2.0;
    double early_to = 20.0;
    double late_from = 100.0;
};

struct KondoOptions {
    double x_near = -1.0;  // negative: the cutoff length l_c
    double x_max = -1.0;   // negative: half the system length pi N / omega_c
    int x_points = 201;
};

struct RunConfig {
    Task task = Task::Ground;
    ModelKind model = ModelKind::None;
    PolaronSpec polaron;
    OhmicBathSpec bath;
    SpinBosonFrame frame = SpinBosonFrame::Polaron;
    bool scf_start = false;
    KondoSpec kondo;
    KondoOptions kondo_opts;
    LatticeSpec lattice;
    std::vector<LatticeSeed> seeds = {LatticeSeed::CDW, LatticeSeed::SC};
    FlowConfig flow;
    DispersionOptions dispersion;
    SpectralOptions spectral;
    QuenchOptions quench;
    std::vector<GridAxis> grid;
    std::uint64_t seed = 1;
    int parallel_jobs = 1;
    std::string output;
    YAML::Node document;  // the configuration after overrides, echoed into results
};

// Reads a YAML file; syntax errors become Config errors carrying the line.
YAML::Node load_document(const std::string& path);
YAML::Node parse_document(const std::string& text);

// Applies "dotted.key=value"; the value is read as a YAML scalar or flow sequence.
void apply_override(YAML::Node& doc, const std::string& assignment);
void set_value(YAML::Node& doc, const std::string& dotted_key, const YAML::Node& value);

// Validates the document against the schema for the task. Errors name the field and its line.
RunConfig build_run_config(const YAML::Node& doc, Task task);

nlohmann::json yaml_to_json(const YAML::Node& node);

// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "VARGAUSS_OUTPUT_ROOT";

// Absolute output paths are used as given; relative ones (default: the task name) live under
// $VARGAUSS_OUTPUT_ROOT, or ./vargauss_runs when it is unset.
std::filesystem::path resolve_output_dir(const RunConfig& cfg);

}  // namespace vg
