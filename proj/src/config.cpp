#include "paneitz/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "paneitz/errors.hpp"
#include "paneitz/special_functions.hpp"

namespace paneitz {

using nlohmann::json;

namespace {

// Rejects keys outside `allowed` so typos never silently fall back to defaults.
void expect_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

const json& require(const json& j, const std::string& where, const char* key) {
    if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    return j.at(key);
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return j.get<int>();
}

bool boolean(const json& j, const std::string& where) {
    if (!j.is_boolean()) throw ConfigError(where + ": expected true or false");
    return j.get<bool>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : j) out.push_back(number(x, where));
    return out;
}

json profile_to_json(const RadialProfile& p) {
    if (p.kind() == RadialProfile::Kind::table) {
        return {{"table", {{"r", p.radii()}, {"value", p.values()}}}};
    }
    return {{"polynomial", p.coefficients()}};
}

RadialProfile profile_from_json(const json& j, const std::string& where) {
    if (j.is_number()) return RadialProfile::constant(j.get<double>());
    expect_keys(j, where, {"polynomial", "table"});
    if (j.size() != 1) throw ConfigError(where + ": give exactly one of 'polynomial' or 'table'");
    try {
        if (j.contains("polynomial")) {
            return RadialProfile::polynomial(numbers(j.at("polynomial"), where + ".polynomial"));
        }
        const json& t = j.at("table");
        expect_keys(t, where + ".table", {"r", "value"});
        return RadialProfile::table(numbers(require(t, where + ".table", "r"), where + ".table.r"),
                                    numbers(require(t, where + ".table", "value"), where + ".table.value"));
    } catch (const DomainError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

json boundary_to_json(const BoundaryData& b) {
    return {{"value", b.value}, {"normal_derivative", b.normal_derivative}};
}

BoundaryData boundary_from_json(const json& j, const std::string& where) {
    expect_keys(j, where, {"value", "normal_derivative"});
    BoundaryData b;
    if (j.contains("value")) b.value = number(j.at("value"), where + ".value");
    if (j.contains("normal_derivative")) b.normal_derivative = number(j.at("normal_derivative"), where + ".normal_derivative");
    return b;
}

json grid_to_json(const RadialGrid& g) {
    if (g.is_uniform()) {
        return {{"kind", "uniform"}, {"r_in", g.r_in()}, {"r_out", g.r_out()}, {"nodes", g.size()}};
    }
    if (g.cluster_scale() > 0.0) {
        return {{"kind", "graded"}, {"r_out", g.r_out()}, {"nodes", g.size()}, {"cluster_scale", g.cluster_scale()}};
    }
    const auto x = g.nodes();
    return {{"kind", "explicit"}, {"radii", std::vector<double>(x.begin(), x.end())}};
}

RadialGrid grid_from_json(const json& j, int n, const std::string& where) {
    expect_keys(j, where, {"kind", "r_in", "r_out", "nodes", "cluster_scale", "radii"});
    const json& kind = require(j, where, "kind");
    if (!kind.is_string()) throw ConfigError(where + ".kind: expected a string");
    const std::string k = kind.get<std::string>();
    try {
        if (k == "uniform") {
            expect_keys(j, where, {"kind", "r_in", "r_out", "nodes"});
            return RadialGrid::uniform(number(require(j, where, "r_in"), where + ".r_in"),
                                       number(require(j, where, "r_out"), where + ".r_out"),
                                       integer(require(j, where, "nodes"), where + ".nodes"), n);
        }
        if (k == "graded") {
            expect_keys(j, where, {"kind", "r_out", "nodes", "cluster_scale"});
            return RadialGrid::graded(number(require(j, where, "r_out"), where + ".r_out"),
                                      integer(require(j, where, "nodes"), where + ".nodes"), n,
                                      number(require(j, where, "cluster_scale"), where + ".cluster_scale"));
        }
        if (k == "explicit") {
            expect_keys(j, where, {"kind", "radii"});
            return RadialGrid::from_nodes(numbers(require(j, where, "radii"), where + ".radii"), n);
        }
    } catch (const DomainError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ".kind: expected 'uniform', 'graded' or 'explicit', got '" + k + "'");
}

}  // namespace

json problem_to_json(const ProblemSpec& spec) {
    json metric = {{"preset", to_string(spec.metric.kind())}};
    if (spec.metric.kind() == MetricKind::custom) {
        metric["theta"] = profile_to_json(spec.metric.custom_theta());
        metric["R0"] = spec.metric.R0();
    }
    return {{"dimension", spec.dimension()},
            {"grid", grid_to_json(spec.grid)},
            {"metric", metric},
            {"a", profile_to_json(spec.a)},
            {"alpha", profile_to_json(spec.alpha)},
            {"f", profile_to_json(spec.f)},
            {"boundary", {{"inner", boundary_to_json(spec.inner)}, {"outer", boundary_to_json(spec.outer)}}},
            {"gamma", spec.gamma}};
}

ProblemSpec problem_from_json(const json& j) {
    const std::string w = "problem";
    expect_keys(j, w, {"dimension", "grid", "metric", "a", "alpha", "f", "boundary", "gamma"});
    const int n = integer(require(j, w, "dimension"), w + ".dimension");
    if (n < 5) throw ConfigError("problem.dimension: need n >= 5");
    RadialGrid grid = grid_from_json(require(j, w, "grid"), n, w + ".grid");

    const json& m = require(j, w, "metric");
    expect_keys(m, w + ".metric", {"preset", "theta", "R0"});
    const json& preset = require(m, w + ".metric", "preset");
    if (!preset.is_string()) throw ConfigError("problem.metric.preset: expected a string");
    RadialMetric metric = [&] {
        try {
            const MetricKind kind = metric_kind_from_string(preset.get<std::string>());
            if (kind != MetricKind::custom && (m.contains("theta") || m.contains("R0"))) {
                throw ConfigError("problem.metric: 'theta' and 'R0' are only allowed with the custom preset");
            }
            if (kind == MetricKind::custom) {
                return make_metric_preset(kind, grid, profile_from_json(require(m, w + ".metric", "theta"), w + ".metric.theta"),
                                          number(require(m, w + ".metric", "R0"), w + ".metric.R0"));
            }
            return make_metric_preset(kind, grid);
        } catch (const DomainError& e) {
            throw ConfigError(std::string("problem.metric: ") + e.what());
        }
    }();

    ProblemSpec spec(std::move(grid), std::move(metric));
    if (j.contains("a")) spec.a = profile_from_json(j.at("a"), w + ".a");
    if (j.contains("alpha")) spec.alpha = profile_from_json(j.at("alpha"), w + ".alpha");
    if (j.contains("f")) spec.f = profile_from_json(j.at("f"), w + ".f");
    if (j.contains("boundary")) {
        const json& b = j.at("boundary");
        expect_keys(b, w + ".boundary", {"inner", "outer"});
        if (b.contains("inner")) spec.inner = boundary_from_json(b.at("inner"), w + ".boundary.inner");
        if (b.contains("outer")) spec.outer = boundary_from_json(b.at("outer"), w + ".boundary.outer");
    }
    if (spec.grid.is_ball() && spec.inner != BoundaryData{}) {
        throw ConfigError("problem.boundary.inner: a ball has no inner boundary");
    }
    spec.gamma = number(require(j, w, "gamma"), w + ".gamma");
    if (!(spec.gamma > 0.0)) throw ConfigError("problem.gamma: must be positive");
    try {
        spec.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("problem: ") + e.what());
    }
    return spec;
}

RunConfig parse_config(const json& j) {
    expect_keys(j, "config", {"problem", "solver", "sweep", "output", "seed"});
    RunConfig cfg{problem_from_json(require(j, "config", "problem")), {}, {}, {}, 0, 0, {}, {}};
    if (j.contains("seed")) {
        const json& s = j.at("seed");
        if (!s.is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
        cfg.seed = s.get<std::uint64_t>();
    }
    const double two_sharp = critical_exponent(cfg.problem.dimension());
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        const std::string w = "solver";
        expect_keys(s, w, {"constraint_tol", "stationarity_tol", "max_iterations", "q", "q_schedule", "restarts"});
        if (s.contains("constraint_tol")) cfg.solver.constraint_tol = number(s.at("constraint_tol"), w + ".constraint_tol");
        if (s.contains("stationarity_tol")) cfg.solver.stationarity_tol = number(s.at("stationarity_tol"), w + ".stationarity_tol");
        if (s.contains("max_iterations")) cfg.solver.max_iterations = integer(s.at("max_iterations"), w + ".max_iterations");
        if (s.contains("restarts")) cfg.restarts = integer(s.at("restarts"), w + ".restarts");
        if (s.contains("q")) cfg.q = number(s.at("q"), w + ".q");
        if (s.contains("q_schedule")) cfg.q_schedule = numbers(s.at("q_schedule"), w + ".q_schedule");
        if (!(cfg.solver.constraint_tol > 0.0) || !(cfg.solver.stationarity_tol > 0.0) || cfg.solver.max_iterations < 1 ||
            cfg.restarts < 0) {
            throw ConfigError("solver: tolerances must be positive, max_iterations >= 1, restarts >= 0");
        }
        if (cfg.q && (!(*cfg.q > 2.0) || *cfg.q > two_sharp * (1.0 + 1e-14))) {
            throw ConfigError("solver.q: must lie in (2, " + std::to_string(two_sharp) + "]");
        }
        for (std::size_t k = 0; k < cfg.q_schedule.size(); ++k) {
            if (!(cfg.q_schedule[k] > 2.0) || (k > 0 && !(cfg.q_schedule[k] > cfg.q_schedule[k - 1]))) {
                throw ConfigError("solver.q_schedule: must be strictly increasing in (2, 2#]");
            }
        }
        if (!cfg.q_schedule.empty() && std::abs(cfg.q_schedule.back() - two_sharp) > 1e-12 * two_sharp) {
            throw ConfigError("solver.q_schedule: must end at the critical exponent " + std::to_string(two_sharp));
        }
    }
    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        const std::string w = "sweep";
        expect_keys(s, w, {"eps", "eps_min", "eps_max", "count", "delta", "refine"});
        if (s.contains("eps")) {
            if (s.contains("eps_min") || s.contains("eps_max") || s.contains("count")) {
                throw ConfigError("sweep: give either 'eps' or ('eps_min', 'eps_max', 'count')");
            }
            cfg.sweep.eps = numbers(s.at("eps"), w + ".eps");
        } else if (s.contains("eps_min") || s.contains("eps_max") || s.contains("count")) {
            const double lo = number(require(s, w, "eps_min"), w + ".eps_min");
            const double hi = number(require(s, w, "eps_max"), w + ".eps_max");
            const int count = integer(require(s, w, "count"), w + ".count");
            if (!(lo > 0.0) || !(hi > lo) || count < 2) {
                throw ConfigError("sweep: need 0 < eps_min < eps_max and count >= 2");
            }
            // Geometric spacing, listed from the largest eps down.
            for (int k = 0; k < count; ++k) cfg.sweep.eps.push_back(hi * std::pow(lo / hi, k / (count - 1.0)));
        }
        if (s.contains("delta")) cfg.sweep.delta = number(s.at("delta"), w + ".delta");
        if (s.contains("refine")) cfg.sweep.refine = boolean(s.at("refine"), w + ".refine");
        std::sort(cfg.sweep.eps.begin(), cfg.sweep.eps.end(), std::greater<>());
        for (double e : cfg.sweep.eps) {
            if (!(e > 0.0)) throw ConfigError("sweep.eps: values must be positive");
        }
        if (!(cfg.sweep.delta > 0.0)) throw ConfigError("sweep.delta: must be positive");
    }
    if (j.contains("output")) {
        const json& o = j.at("output");
        expect_keys(o, "output", {"directory", "formats"});
        if (o.contains("directory")) {
            if (!o.at("directory").is_string()) throw ConfigError("output.directory: expected a string");
            cfg.output.directory = o.at("directory").get<std::string>();
        }
        if (o.contains("formats")) {
            const json& f = o.at("formats");
            if (!f.is_array()) throw ConfigError("output.formats: expected an array");
            cfg.output.csv = cfg.output.json = false;
            for (const auto& x : f) {
                const std::string v = x.is_string() ? x.get<std::string>() : "";
                if (v == "csv") {
                    cfg.output.csv = true;
                } else if (v == "json") {
                    cfg.output.json = true;
                } else {
                    throw ConfigError("output.formats: entries must be 'csv' or 'json'");
                }
            }
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const RunConfig& cfg) {
    json solver = {{"constraint_tol", cfg.solver.constraint_tol},
                   {"stationarity_tol", cfg.solver.stationarity_tol},
                   {"max_iterations", cfg.solver.max_iterations},
                   {"restarts", cfg.restarts}};
    if (cfg.q) solver["q"] = *cfg.q;
    if (!cfg.q_schedule.empty()) solver["q_schedule"] = cfg.q_schedule;
    json formats = json::array();
    if (cfg.output.csv) formats.push_back("csv");
    if (cfg.output.json) formats.push_back("json");
    return {{"problem", problem_to_json(cfg.problem)},
            {"solver", solver},
            {"sweep", {{"eps", cfg.sweep.eps}, {"delta", cfg.sweep.delta}, {"refine", cfg.sweep.refine}}},
            {"output", {{"directory", cfg.output.directory}, {"formats", formats}}},
            {"seed", cfg.seed}};
}

void override_grid_size(RunConfig& cfg, int m) {
    const RadialGrid& g = cfg.problem.grid;
    const int n = g.dimension();
    RadialGrid next = [&] {
        try {
            if (g.is_uniform()) return RadialGrid::uniform(g.r_in(), g.r_out(), m, n);
            if (g.cluster_scale() > 0.0) return RadialGrid::graded(g.r_out(), m, n, g.cluster_scale());
        } catch (const DomainError& e) {
            throw ConfigError(std::string("--grid-size: ") + e.what());
        }
        throw ConfigError("--grid-size cannot resize an explicit node list");
    }();
    cfg.problem.grid = std::move(next);
}

std::uint64_t config_hash(const RunConfig& cfg) {
    json j = to_json(cfg);
    j.erase("output");
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace paneitz
