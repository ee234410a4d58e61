#include "doctest.h"
#include "vargauss/tasks.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace vg;
namespace fs = std::filesystem;

namespace {

struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("vargauss_cli_" + name))
    {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }

    fs::path write(const std::string& file, const std::string& text) const
    {
        const fs::path p = dir / file;
        std::ofstream(p) << text;
        return p;
    }
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct Invocation {
    int code = -1;
    std::string err;
};

// Runs the installed binary with the output root pointed at root; stderr is captured.
Invocation invoke(const fs::path& root, const std::string& args)
{
    const fs::path err = root / "stderr.txt";
    const std::string cmd = "VARGAUSS_OUTPUT_ROOT='" + root.string() + "' '" + VARGAUSS_BIN + "' " + args + " > '" +
                            (root / "stdout.txt").string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Invocation r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
}

nlohmann::json result_of(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "result.json")); }

const char* kSmallPolaron = R"(polaron:
  kind: holstein
  sites: 6
  omega0: 5.0
  g: 0.4
  k: 0
flow:
  t_max: 500
output: small
)";

}  // namespace

TEST_CASE("config errors name the field and its line and exit with code 1")
{
    Scratch s("config_errors");
    const fs::path unknown = s.write("unknown.yaml", "polaron:\n  sites: 6\n  omgea0: 0.5\n");
    Invocation r = invoke(s.dir, "ground --config '" + unknown.string() + "'");
    CHECK(r.code == 1);
    CHECK(r.err.find("polaron.omgea0") != std::string::npos);
    CHECK(r.err.find("line 3") != std::string::npos);

    const fs::path bad = s.write("bad.yaml", "spin_boson:\n  modes: 10\n  alpha: strong\n");
    r = invoke(s.dir, "ground --config '" + bad.string() + "'");
    CHECK(r.code == 1);
    CHECK(r.err.find("spin_boson.alpha (line 3)") != std::string::npos);

    const fs::path two = s.write("two.yaml", "polaron:\n  sites: 6\nlattice:\n  lx: 2\n");
    CHECK(invoke(s.dir, "ground --config '" + two.string() + "'").code == 1);

    const fs::path ok = s.write("ok.yaml", kSmallPolaron);
    r = invoke(s.dir, "quench --config '" + ok.string() + "'");
    CHECK(r.code == 1);
    CHECK(r.err.find("quench") != std::string::npos);
    r = invoke(s.dir, "ground --config '" + ok.string() + "' --set polaron.omega0=-1");
    CHECK(r.code == 1);
    CHECK(r.err.find("polaron.omega0 (set on the command line)") != std::string::npos);
    CHECK(invoke(s.dir, "ground --config '" + ok.string() + "' --set polaron.k=6").code == 1);
    CHECK(invoke(s.dir, "groundstate --config '" + ok.string() + "'").code == 1);
    CHECK(invoke(s.dir, "ground --config '" + (s.dir / "missing.yaml").string() + "'").code == 1);
    CHECK(invoke(s.dir, "ground").code == 1);

    const fs::path broken = s.write("broken.yaml", "polaron:\n  sites: [6\n");
    r = invoke(s.dir, "ground --config '" + broken.string() + "'");
    CHECK(r.code == 1);
    CHECK(r.err.find("line") != std::string::npos);
}

TEST_CASE("ground run: overrides, output root, result record, tables and manifest")
{
    Scratch s("ground");
    const fs::path cfg = s.write("polaron.yaml", kSmallPolaron);
    const Invocation r = invoke(s.dir, "ground --config '" + cfg.string() + "' --set polaron.g=0");
    REQUIRE(r.code == 0);
    const fs::path out = s.dir / "small";
    REQUIRE(fs::exists(out / "result.json"));

    const nlohmann::json j = result_of(out);
    CHECK(j["schema_version"] == kResultSchema);
    CHECK(j["task"] == "ground");
    CHECK(j["model"] == "polaron");
    CHECK(j["status"] == "ok");
    CHECK(j["build_id"] == build_id());
    CHECK(j["config"]["polaron"]["g"] == 0);
    CHECK(j["wall_time_s"].get<double>() >= 0.0);
    CHECK(std::abs(j["observables"]["energy"].get<double>() + 2.0) < 1e-10);
    CHECK(std::abs(j["observables"]["z"].get<double>() - 1.0) < 1e-10);
    CHECK(j["units"]["energy"] == "t0");

    // every table header carries units
    for (const std::string f : {"profile.tsv", "trajectory.tsv"}) {
        std::ifstream in(out / f);
        std::string header;
        std::getline(in, header);
        std::istringstream cols(header);
        std::string col;
        int n = 0;
        while (std::getline(cols, col, '\t')) {
            CHECK(col.find('[') != std::string::npos);
            CHECK(col.back() == ']');
            ++n;
        }
        CHECK(n >= 2);
    }

    // MANIFEST lists every artifact with a matching checksum and size
    std::ifstream man(out / "MANIFEST");
    std::string sum, path;
    long bytes = 0;
    int entries = 0;
    while (man >> sum >> bytes >> path) {
        CHECK(sum == file_checksum(out / path));
        CHECK(bytes == static_cast<long>(fs::file_size(out / path)));
        ++entries;
    }
    CHECK(entries == 3);
}

TEST_CASE("non-convergence exits with code 2 and still writes a record")
{
    Scratch s("nonconv");
    const fs::path cfg = s.write("polaron.yaml", kSmallPolaron);
    const Invocation r =
        invoke(s.dir, "ground --config '" + cfg.string() + "' --set polaron.g=1.5 --set flow.t_max=0.3");
    CHECK(r.code == 2);
    const nlohmann::json j = result_of(s.dir / "small");
    CHECK(j["status"] == "not_converged");
    CHECK(fs::exists(s.dir / "small" / "MANIFEST"));
}

TEST_CASE("sweeps merge by grid index and are independent of the worker count")
{
    Scratch s("sweep");
    const std::string base = std::string(kSmallPolaron) + "grid:\n  - key: polaron.g\n    values: [0.0, 0.3, 0.6]\n"
                                                           "  - key: polaron.k\n    values: [0, 3]\n";
    const fs::path cfg = s.write("sweep.yaml", base);
    REQUIRE(invoke(s.dir, "ground --config '" + cfg.string() + "' --set output=serial").code == 0);
    REQUIRE(invoke(s.dir, "ground --config '" + cfg.string() + "' --set output=pooled --set parallel_jobs=4").code == 0);
    const std::string a = slurp(s.dir / "serial" / "sweep.tsv");
    const std::string b = slurp(s.dir / "pooled" / "sweep.tsv");
    CHECK(a == b);

    std::istringstream lines(a);
    std::string line;
    std::getline(lines, line);
    CHECK(line.rfind("cell[1]\tpolaron.g[input]\tpolaron.k[input]\tstatus[-]", 0) == 0);
    const char* expected[] = {"0\t0\t0\t", "1\t0\t3\t", "2\t0.3\t0\t", "3\t0.3\t3\t", "4\t0.6\t0\t", "5\t0.6\t3\t"};
    for (const char* e : expected) {
        REQUIRE(std::getline(lines, line));
        CHECK(line.rfind(e, 0) == 0);
    }
    CHECK(fs::exists(s.dir / "pooled" / "cells" / "cell_0005" / "profile.tsv"));
    const nlohmann::json j = result_of(s.dir / "pooled");
    CHECK(j["cells"].size() == 6);
    CHECK(j["cells"][3]["point"]["polaron.g"] == 0.3);
}

TEST_CASE("grid expansion and merge in process")
{
    YAML::Node doc = parse_document(kSmallPolaron);
    apply_override(doc, "grid=[{key: polaron.g, values: [0.1, 0.2]}, {key: flow.dt, from: 0.05, to: 0.15, num: 3}]");
    const RunConfig cfg = build_run_config(doc, Task::Ground);
    const std::vector<GridCell> cells = expand_grid(cfg);
    REQUIRE(cells.size() == 6);
    CHECK(cells[0].config.polaron.g == 0.1);
    CHECK(cells[2].config.flow.dt == doctest::Approx(0.15));
    CHECK(cells[3].config.polaron.g == 0.2);
    CHECK(cells[4].config.flow.dt == doctest::Approx(0.1));
    CHECK(cells[5].config.grid.empty());

    std::vector<TaskResult> results(cells.size());
    for (size_t i = 0; i < results.size(); ++i) results[i].observables = {{"index", "1", static_cast<double>(i)}};
    results[1].status = "failed";
    results[1].observables.clear();
    const Table t = merge_cells(cfg, cells, results);
    REQUIRE(t.size() == 6);
    CHECK(t.header() == "cell[1]\tpolaron.g[input]\tflow.dt[input]\tstatus[-]\tindex[1]");
    CHECK(t.to_tsv().find("1\t0.1\t0.1\tfailed\tnan") != std::string::npos);

    YAML::Node bad = parse_document(kSmallPolaron);
    apply_override(bad, "grid=[{key: lattice.mu, values: [1]}]");
    CHECK_THROWS_AS(build_run_config(bad, Task::Ground), Error);
    CHECK_THROWS_AS(apply_override(bad, "novalue"), Error);
}

TEST_CASE("output directory resolution")
{
    RunConfig cfg;
    cfg.task = Task::PhaseScan;
    const char* saved = std::getenv(kOutputRootEnv);
    const std::string keep = saved ? saved : "";
    setenv(kOutputRootEnv, "/tmp/vargauss_root", 1);
    CHECK(resolve_output_dir(cfg) == fs::path("/tmp/vargauss_root/phase-scan"));
    cfg.output = "runs/a";
    CHECK(resolve_output_dir(cfg) == fs::path("/tmp/vargauss_root/runs/a"));
    cfg.output = "/abs/place";
    CHECK(resolve_output_dir(cfg) == fs::path("/abs/place"));
    unsetenv(kOutputRootEnv);
    cfg.output.clear();
    CHECK(resolve_output_dir(cfg) == fs::path("vargauss_runs/phase-scan"));
    if (saved) setenv(kOutputRootEnv, keep.c_str(), 1);
}

TEST_CASE("example configurations parse")
{
    const fs::path dir = fs::path(VARGAUSS_SOURCE_DIR) / "configs";
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".yaml") continue;
        const YAML::Node doc = load_document(e.path().string());
        bool parsed = false;
        for (Task t : {Task::Ground, Task::Dispersion, Task::Quench, Task::Spectral, Task::PhaseScan}) {
            try {
                build_run_config(doc, t);
                parsed = true;
                break;
            } catch (const Error&) {
            }
        }
        CHECK_MESSAGE(parsed, e.path().string());
        ++n;
    }
    CHECK(n >= 6);
}
