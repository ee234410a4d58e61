#include "vargauss/config.hpp"

#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

namespace vg {

Task task_from_string(const std::string& s)
{
    if (s == "ground") return Task::Ground;
    if (s == "dispersion") return Task::Dispersion;
    if (s == "quench") return Task::Quench;
    if (s == "spectral") return Task::Spectral;
    if (s == "phase-scan") return Task::PhaseScan;
    if (s == "validate") return Task::Validate;
    throw Error(ErrorKind::Config,
                "unknown task '" + s + "' (expected ground, dispersion, quench, spectral, phase-scan or validate)");
}

const char* task_name(Task t)
{
    switch (t) {
    case Task::Ground: return "ground";
    case Task::Dispersion: return "dispersion";
    case Task::Quench: return "quench";
    case Task::Spectral: return "spectral";
    case Task::PhaseScan: return "phase-scan";
    case Task::Validate: return "validate";
    }
    return "?";
}

const char* model_kind_name(ModelKind m)
{
    switch (m) {
    case ModelKind::None: return "none";
    case ModelKind::Polaron: return "polaron";
    case ModelKind::SpinBoson: return "spin_boson";
    case ModelKind::Kondo: return "kondo";
    case ModelKind::Lattice: return "lattice";
    }
    return "?";
}

namespace {

std::string where(const YAML::Node& n)
{
    const YAML::Mark m = n.Mark();
    if (m.is_null() || m.line < 0) return " (set on the command line)";
    return " (line " + std::to_string(m.line + 1) + ")";
}

[[noreturn]] void fail(const std::string& field, const YAML::Node& n, const std::string& msg)
{
    throw Error(ErrorKind::Config, "config error: " + field + where(n) + ": " + msg);
}

// Strict view of a mapping: every key must be consumed, unknown keys are reported.
class Block {
public:
    Block(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path))
    {
        if (node_ && !node_.IsMap()) fail(path_, node_, "expected a mapping");
    }

    bool has(const std::string& key) const { return static_cast<bool>(lookup(key)); }

    YAML::Node child(const std::string& key)
    {
        used_.insert(key);
        return lookup(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    T get(const std::string& key, T fallback)
    {
        const YAML::Node n = child(key);
        if (!n) return fallback;
        if (!n.IsScalar()) fail(field(key), n, "expected a scalar");
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            fail(field(key), n, std::string("cannot read '") + n.Scalar() + "' as " + type_name<T>());
        }
    }

    double number(const std::string& key, double fallback)
    {
        const double v = get<double>(key, fallback);
        if (!std::isfinite(v)) fail(field(key), lookup(key), "must be finite");
        return v;
    }

    double positive(const std::string& key, double fallback)
    {
        const double v = number(key, fallback);
        if (!(v > 0.0)) fail(field(key), lookup(key), "must be positive");
        return v;
    }

    int integer(const std::string& key, int fallback, int min_value)
    {
        const int v = get<int>(key, fallback);
        if (v < min_value) fail(field(key), lookup(key), "must be at least " + std::to_string(min_value));
        return v;
    }

    void finish() const
    {
        if (!node_) return;
        for (const auto& kv : node_) {
            const std::string k = kv.first.as<std::string>();
            if (!used_.count(k)) fail(field(k), kv.first, "unknown key");
        }
    }

private:
    // const lookup: a missing key yields an undefined node and never inserts into the document
    YAML::Node lookup(const std::string& key) const
    {
        static const YAML::Node empty(YAML::NodeType::Map);
        const YAML::Node& base = node_ ? node_ : empty;
        return base[key];
    }

    template <class T>
    static const char* type_name()
    {
        if constexpr (std::is_same_v<T, double>) return "a number";
        if constexpr (std::is_same_v<T, int> || std::is_same_v<T, long> || std::is_same_v<T, std::uint64_t>)
            return "an integer";
        if constexpr (std::is_same_v<T, bool>) return "a boolean";
        return "a string";
    }

    YAML::Node node_;
    std::string path_;
    std::set<std::string> used_;
};

PolaronSpec read_polaron(Block b)
{
    PolaronSpec s;
    const YAML::Node kind = b.child("kind");
    if (kind) {
        try {
            s.kind = polaron_kind_from_string(kind.as<std::string>());
        } catch (const Error& e) {
            fail(b.field("kind"), kind, e.what());
        }
    }
    s.n_sites = b.integer("sites", 8, 2);
    s.t0 = b.number("t0", 1.0);
    s.omega0 = b.positive("omega0", 0.5);
    s.g = b.number("g", 0.0);
    s.k_index = b.get<int>("k", 0);
    b.finish();
    return s;
}

OhmicBathSpec read_bath(Block& b)
{
    OhmicBathSpec s;
    s.n_modes = b.integer("modes", 50, 1);
    s.omega_c = b.positive("omega_c", 1.0);
    s.alpha = b.number("alpha", 0.0);
    if (s.alpha < 0.0) fail(b.field("alpha"), b.child("alpha"), "must be nonnegative");
    s.delta = b.number("delta", 0.1);
    if (s.delta < 0.0) fail(b.field("delta"), b.child("delta"), "must be nonnegative");
    return s;
}

LatticeSpec read_lattice(Block& b)
{
    LatticeSpec s;
    s.lx = b.integer("lx", 6, 1);
    s.ly = b.integer("ly", 6, 1);
    if (s.lx * s.ly < 2) fail(b.field("lx"), b.child("lx"), "the lattice needs at least two sites");
    s.t0 = b.number("t0", 1.0);
    s.omega0 = b.positive("omega0", 10.0);
    s.g = b.number("g", 5.0);
    s.mu = b.number("mu", -5.0);
    return s;
}

std::vector<double> read_numbers(const YAML::Node& n, const std::string& field)
{
    if (!n.IsSequence() || n.size() == 0) fail(field, n, "expected a non-empty list of numbers");
    std::vector<double> v;
    for (const auto& e : n) {
        try {
            v.push_back(e.as<double>());
        } catch (const YAML::Exception&) {
            fail(field, e, "expected a number");
        }
    }
    return v;
}

FlowConfig read_flow(Block b, Task task)
{
    FlowConfig f;
    if (task == Task::Quench || task == Task::Spectral) {
        f.mode = FlowMode::Real;
        f.integrator = Integrator::RK45;
        f.dt = 0.5;
        f.t_max = task == Task::Spectral ? 200.0 : 100.0;
        f.abs_tol = 1e-10;
        f.rel_tol = 1e-9;
    } else {
        f.dt = 0.1;
        f.t_max = 2000.0;
        f.fixed_point_tol = 1e-9;
    }
    const YAML::Node integ = b.child("integrator");
    if (integ) {
        const std::string s = integ.as<std::string>();
        if (s == "rk4") f.integrator = Integrator::RK4;
        else if (s == "rk45") f.integrator = Integrator::RK45;
        else fail(b.field("integrator"), integ, "expected rk4 or rk45");
    }
    f.dt = b.positive("dt", f.dt);
    f.t_max = b.positive("t_max", f.t_max);
    f.fixed_point_tol = b.positive("fixed_point_tol", f.fixed_point_tol);
    f.abs_tol = b.positive("abs_tol", f.abs_tol);
    f.rel_tol = b.positive("rel_tol", f.rel_tol);
    f.record_stride = b.integer("record_stride", f.record_stride, 1);
    f.repurify_every = b.integer("repurify_every", f.repurify_every, 0);
    f.purity_tol = b.positive("purity_tol", f.purity_tol);
    f.energy_guard = b.positive("energy_guard", f.energy_guard);
    f.min_dt = b.positive("min_dt", f.min_dt);
    f.max_steps = b.get<long>("max_steps", f.max_steps);
    if (f.max_steps < 1) fail(b.field("max_steps"), b.child("max_steps"), "must be at least 1");
    b.finish();
    return f;
}

std::vector<GridAxis> read_grid(const YAML::Node& n)
{
    if (!n.IsSequence() || n.size() == 0 || n.size() > 2) fail("grid", n, "expected a list of one or two axes");
    std::vector<GridAxis> axes;
    for (size_t i = 0; i < n.size(); ++i) {
        Block b(n[i], "grid[" + std::to_string(i) + "]");
        GridAxis ax;
        ax.key = b.get<std::string>("key", "");
        if (ax.key.empty()) fail(b.field("key"), n[i], "missing");
        if (ax.key.find('.') == std::string::npos || ax.key.rfind("grid", 0) == 0)
            fail(b.field("key"), n[i]["key"], "expected a dotted model or flow key such as spin_boson.alpha");
        if (b.has("values")) {
            ax.values = read_numbers(b.child("values"), b.field("values"));
        } else {
            if (!n[i]["from"] || !n[i]["to"] || !n[i]["num"])
                fail(b.field("values"), n[i], "give either values or from/to/num");
            const double from = b.number("from", 0.0), to = b.number("to", 0.0);
            const int num = b.integer("num", 0, 1);
            for (int j = 0; j < num; ++j) ax.values.push_back(num == 1 ? from : from + (to - from) * j / (num - 1));
        }
        b.finish();
        axes.push_back(ax);
    }
    return axes;
}

}  // namespace

YAML::Node parse_document(const std::string& text)
{
    try {
        YAML::Node n = YAML::Load(text);
        if (n.IsNull()) return YAML::Node(YAML::NodeType::Map);
        return n;
    } catch (const YAML::ParserException& e) {
        throw Error(ErrorKind::Config, "config error: syntax (line " + std::to_string(e.mark.line + 1) + "): " + e.msg);
    }
}

YAML::Node load_document(const std::string& path)
{
    try {
        YAML::Node n = YAML::LoadFile(path);
        if (n.IsNull()) return YAML::Node(YAML::NodeType::Map);
        return n;
    } catch (const YAML::BadFile&) {
        throw Error(ErrorKind::Config, "config error: cannot open '" + path + "'");
    } catch (const YAML::ParserException& e) {
        throw Error(ErrorKind::Config,
                    "config error: syntax in " + path + " (line " + std::to_string(e.mark.line + 1) + "): " + e.msg);
    }
}

void set_value(YAML::Node& doc, const std::string& dotted_key, const YAML::Node& value)
{
    if (!doc.IsMap()) throw Error(ErrorKind::Config, "config error: the document is not a mapping");
    std::vector<std::string> parts;
    std::stringstream ss(dotted_key);
    for (std::string p; std::getline(ss, p, '.');) {
        if (p.empty()) throw Error(ErrorKind::Config, "config error: malformed key '" + dotted_key + "'");
        parts.push_back(p);
    }
    if (parts.empty()) throw Error(ErrorKind::Config, "config error: empty key");
    // yaml-cpp nodes are handles; walk with fresh handles so the assignment does not rebind them
    std::vector<YAML::Node> chain{doc};
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        YAML::Node next = chain.back()[parts[i]];
        if (!next.IsDefined() || next.IsNull()) {
            chain.back()[parts[i]] = YAML::Node(YAML::NodeType::Map);
            next = chain.back()[parts[i]];
        }
        if (!next.IsMap())
            throw Error(ErrorKind::Config, "config error: " + dotted_key + ": '" + parts[i] + "' is not a mapping");
        chain.push_back(next);
    }
    chain.back()[parts.back()] = value;
}

namespace {

// Rebuilds a parsed node programmatically so it carries no source marks.
YAML::Node unmarked(const YAML::Node& n)
{
    switch (n.Type()) {
    case YAML::NodeType::Scalar: return YAML::Node(n.Scalar());
    case YAML::NodeType::Sequence: {
        YAML::Node out(YAML::NodeType::Sequence);
        for (const auto& e : n) out.push_back(unmarked(e));
        return out;
    }
    case YAML::NodeType::Map: {
        YAML::Node out(YAML::NodeType::Map);
        for (const auto& kv : n) out[kv.first.Scalar()] = unmarked(kv.second);
        return out;
    }
    default: return YAML::Node(n.Type());
    }
}

}  // namespace

void apply_override(YAML::Node& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw Error(ErrorKind::Config, "config error: --set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    YAML::Node value;
    try {
        value = YAML::Load(text.empty() ? "''" : text);
    } catch (const YAML::Exception& e) {
        throw Error(ErrorKind::Config, "config error: " + key + " (set on the command line): " + e.msg);
    }
    set_value(doc, key, unmarked(value));
}

RunConfig build_run_config(const YAML::Node& doc, Task task)
{
    RunConfig c;
    c.task = task;
    c.document = YAML::Clone(doc);
    Block top(doc, "");

    const char* model_keys[] = {"polaron", "spin_boson", "kondo", "lattice"};
    std::vector<std::string> present;
    for (const char* k : model_keys)
        if (top.has(k)) present.push_back(k);
    if (present.size() > 1)
        fail(present[1], doc[present[1]], "exactly one model block is allowed, found " + present[0] + " as well");
    if (present.empty() && task != Task::Validate)
        throw Error(ErrorKind::Config, "config error: no model block (expected one of polaron, spin_boson, kondo, lattice)");

    if (top.has("polaron")) {
        c.model = ModelKind::Polaron;
        c.polaron = read_polaron(Block(top.child("polaron"), "polaron"));
    }
    if (top.has("spin_boson")) {
        c.model = ModelKind::SpinBoson;
        Block b(top.child("spin_boson"), "spin_boson");
        c.bath = read_bath(b);
        const YAML::Node fr = b.child("frame");
        if (fr) {
            try {
                c.frame = spin_boson_frame_from_string(fr.as<std::string>());
            } catch (const Error& e) {
                fail(b.field("frame"), fr, e.what());
            }
        }
        c.scf_start = b.get<bool>("scf_start", false);
        b.finish();
    }
    if (top.has("kondo")) {
        c.model = ModelKind::Kondo;
        Block b(top.child("kondo"), "kondo");
        c.kondo.j_perp = b.number("j_perp", 0.1);
        if (c.kondo.j_perp < 0.0) fail(b.field("j_perp"), b.child("j_perp"), "must be nonnegative");
        c.kondo.j_par = b.number("j_par", 0.2);
        c.kondo.n_modes = b.integer("modes", 100, 1);
        c.kondo.omega_c = b.positive("omega_c", 1.0);
        c.kondo_opts.x_near = b.number("x_near", -1.0);
        c.kondo_opts.x_max = b.number("x_max", -1.0);
        c.kondo_opts.x_points = b.integer("x_points", 201, 2);
        b.finish();
    }
    if (top.has("lattice")) {
        c.model = ModelKind::Lattice;
        Block b(top.child("lattice"), "lattice");
        c.lattice = read_lattice(b);
        const YAML::Node seeds = b.child("seeds");
        if (seeds) {
            if (!seeds.IsSequence() || seeds.size() == 0) fail(b.field("seeds"), seeds, "expected a list such as [cdw, sc]");
            c.seeds.clear();
            for (const auto& s : seeds) {
                const std::string v = s.as<std::string>();
                if (v == "cdw") c.seeds.push_back(LatticeSeed::CDW);
                else if (v == "sc") c.seeds.push_back(LatticeSeed::SC);
                else fail(b.field("seeds"), s, "unknown seed '" + v + "' (expected cdw or sc)");
            }
        }
        b.finish();
    }

    c.flow = read_flow(Block(top.child("flow"), "flow"), task);

    if (top.has("dispersion")) {
        Block b(top.child("dispersion"), "dispersion");
        const YAML::Node ks = b.child("k");
        if (ks) {
            for (double k : read_numbers(ks, b.field("k"))) {
                if (k != std::floor(k)) fail(b.field("k"), ks, "momentum indices must be integers");
                c.dispersion.k_indices.push_back(static_cast<int>(k));
            }
        }
        c.dispersion.starts = b.integer("starts", 1, 1);
        b.finish();
    }
    if (top.has("spectral")) {
        Block b(top.child("spectral"), "spectral");
        c.spectral.eta = b.positive("eta", c.spectral.eta);
        c.spectral.omega_min = b.number("omega_min", c.spectral.omega_min);
        c.spectral.omega_max = b.number("omega_max", c.spectral.omega_max);
        c.spectral.omega_points = b.integer("omega_points", c.spectral.omega_points, 3);
        c.spectral.peak_threshold = b.positive("peak_threshold", c.spectral.peak_threshold);
        if (!(c.spectral.omega_max > c.spectral.omega_min))
            fail(b.field("omega_max"), b.child("omega_max"), "must exceed omega_min");
        b.finish();
    }
    if (top.has("quench")) {
        Block b(top.child("quench"), "quench");
        const YAML::Node e = b.child("engine");
        if (e) {
            try {
                c.quench.engine = quench_engine_from_string(e.as<std::string>());
            } catch (const Error& err) {
                fail(b.field("engine"), e, err.what());
            }
        }
        c.quench.early_from = b.number("early_from", c.quench.early_from);
        c.quench.early_to = b.number("early_to", c.quench.early_to);
        c.quench.late_from = b.number("late_from", c.quench.late_from);
        b.finish();
    }
    if (top.has("grid")) c.grid = read_grid(top.child("grid"));
    c.seed = top.get<std::uint64_t>("seed", 1);
    c.parallel_jobs = top.integer("parallel_jobs", 1, 1);
    c.output = top.get<std::string>("output", "");
    top.finish();

    // task and model compatibility
    const auto need = [&](bool ok, const std::string& what) {
        if (!ok)
            throw Error(ErrorKind::Config, std::string("config error: task ") + task_name(task) + " needs " + what +
                                               ", found " + model_kind_name(c.model));
    };
    switch (task) {
    case Task::Dispersion:
    case Task::Spectral: need(c.model == ModelKind::Polaron, "a polaron block"); break;
    case Task::Quench: need(c.model == ModelKind::SpinBoson || c.model == ModelKind::Kondo, "a spin_boson or kondo block"); break;
    case Task::PhaseScan: need(c.model == ModelKind::Lattice, "a lattice block"); break;
    case Task::Ground: break;
    case Task::Validate:
        if (!c.grid.empty()) throw Error(ErrorKind::Config, "config error: grid: the validate task does not sweep");
        break;
    }
    if (c.model == ModelKind::Polaron && (c.polaron.k_index < 0 || c.polaron.k_index >= c.polaron.n_sites))
        fail("polaron.k", doc["polaron"]["k"], "momentum index must lie in [0, sites)");
    for (int k : c.dispersion.k_indices)
        if (k < 0 || k >= c.polaron.n_sites) fail("dispersion.k", doc["dispersion"]["k"], "momentum index out of range");
    for (const GridAxis& ax : c.grid) {
        const std::string head = ax.key.substr(0, ax.key.find('.'));
        if (head != model_kind_name(c.model) && head != "flow")
            throw Error(ErrorKind::Config, "config error: grid key " + ax.key + " must address the " +
                                               model_kind_name(c.model) + " or flow block");
    }
    try {
        switch (c.model) {
        case ModelKind::Polaron: c.polaron.validate(); break;
        case ModelKind::SpinBoson: c.bath.validate(); break;
        case ModelKind::Kondo: c.kondo.validate(); break;
        case ModelKind::Lattice: c.lattice.validate(); break;
        case ModelKind::None: break;
        }
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        throw Error(ErrorKind::Config, std::string("config error: ") + model_kind_name(c.model) + ": " + e.what());
    }
    return c;
}

nlohmann::json yaml_to_json(const YAML::Node& node)
{
    switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Sequence: {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& e : node) a.push_back(yaml_to_json(e));
        return a;
    }
    case YAML::NodeType::Map: {
        nlohmann::json o = nlohmann::json::object();
        for (const auto& kv : node) o[kv.first.as<std::string>()] = yaml_to_json(kv.second);
        return o;
    }
    case YAML::NodeType::Scalar: {
        const std::string s = node.Scalar();
        if (node.Tag() == "!") return s;  // quoted
        long l;
        double d;
        bool b;
        if (YAML::convert<long>::decode(node, l)) return l;
        if (YAML::convert<double>::decode(node, d) && std::isfinite(d)) return d;
        if (YAML::convert<bool>::decode(node, b)) return b;
        return s;
    }
    }
    return nullptr;
}

std::filesystem::path resolve_output_dir(const RunConfig& cfg)
{
    const std::filesystem::path out = cfg.output.empty() ? std::filesystem::path(task_name(cfg.task)) : std::filesystem::path(cfg.output);
    if (out.is_absolute()) return out;
    const char* root = std::getenv(kOutputRootEnv);
    return std::filesystem::path(root && *root ? root : "vargauss_runs") / out;
}

}  // namespace vg
