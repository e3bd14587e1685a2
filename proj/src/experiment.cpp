#include "l1zo/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "l1zo/parallel.hpp"
#include "l1zo/report.hpp"

namespace l1zo {

using nlohmann::json;

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::Run: return "run";
        case Mode::Sweep: return "sweep";
        case Mode::Tails: return "tails";
        case Mode::Martingale: return "martingale";
    }
    return "?";
}

Mode mode_from_string(std::string_view name) {
    for (auto m : {Mode::Run, Mode::Sweep, Mode::Tails, Mode::Martingale}) {
        if (name == to_string(m)) return m;
    }
    throw ConfigError("mode: unknown mode '" + std::string(name) + "' (expected run, sweep, tails or martingale)");
}

std::string_view to_string(RateScale scale) { return scale == RateScale::NM ? "nm" : "n"; }

RateScale rate_scale_from_string(std::string_view name) {
    if (name == "nm") return RateScale::NM;
    if (name == "n") return RateScale::N;
    throw ConfigError("fit.scale: expected nm or n, got '" + std::string(name) + "'");
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Strips a trailing '#' comment that is not inside double quotes.
std::string_view strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
    for (const auto& [k, v] : j.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object()) {
            flatten(v, key, out);
        } else if (!out.emplace(key, v).second) {
            throw ConfigError(key + ": duplicate key");
        }
    }
}

std::map<std::string, json> read_document(std::string_view text) {
    std::map<std::string, json> out;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && text[first] == '{') {
        json doc;
        try {
            doc = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config: malformed JSON: ") + e.what());
        }
        flatten(doc, "", out);
        return out;
    }
    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (value.empty()) throw ConfigError(key + ": empty value");
        json v = json::parse(value, nullptr, false);
        if (v.is_discarded()) v = value;  // bare word
        if (!out.emplace(key, std::move(v)).second) throw ConfigError(key + ": duplicate key");
    }
    return out;
}

// Consumes keys from the flat document; whatever is left is unknown.
class Keys {
public:
    explicit Keys(std::map<std::string, json> doc) : doc_(std::move(doc)) {}

    bool has(const std::string& key) const { return doc_.count(key) != 0; }

    std::optional<json> take(const std::string& key) {
        auto it = doc_.find(key);
        if (it == doc_.end()) return std::nullopt;
        json v = std::move(it->second);
        doc_.erase(it);
        return v;
    }

    json require(const std::string& key) {
        auto v = take(key);
        if (!v) throw ConfigError(key + ": missing required key");
        return *v;
    }

    void finish(Mode mode) const {
        if (doc_.empty()) return;
        std::string names;
        for (const auto& [k, v] : doc_) names += (names.empty() ? "'" : ", '") + k + "'";
        throw ConfigError("unknown key " + names + " for mode " + std::string(to_string(mode)));
    }

private:
    std::map<std::string, json> doc_;
};

std::uint64_t as_uint(const json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (x >= 0.0 && x == std::floor(x) && x < 1.8e19) return static_cast<std::uint64_t>(x);
    }
    throw ConfigError(key + ": expected a non-negative integer, got " + v.dump());
}

double as_double(const json& v, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    throw ConfigError(key + ": expected a number, got " + v.dump());
}

std::string as_string(const json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    throw ConfigError(key + ": expected a word, got " + v.dump());
}

bool as_bool(const json& v, const std::string& key) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number_integer()) return v.get<std::int64_t>() != 0;
    throw ConfigError(key + ": expected true or false, got " + v.dump());
}

template <class F>
auto as_list(const json& v, const std::string& key, F&& each) {
    using T = decltype(each(v, key));
    std::vector<T> out;
    if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(each(v[i], key + "[" + std::to_string(i) + "]"));
    } else if (v.is_string() && (v.get<std::string>().find(',') != std::string::npos ||
                                 v.get<std::string>().starts_with('['))) {
        // Bare words in brackets, e.g. [avg, lipschitz], are not JSON.
        std::string text = trim(v.get<std::string>());
        if (text.size() >= 2 && text.front() == '[' && text.back() == ']') text = text.substr(1, text.size() - 2);
        std::istringstream in(text);
        std::string item;
        while (std::getline(in, item, ',')) {
            json j = json::parse(trim(item), nullptr, false);
            if (j.is_discarded()) j = trim(item);
            out.push_back(each(j, key));
        }
    } else {
        out.push_back(each(v, key));
    }
    if (out.empty()) throw ConfigError(key + ": list must not be empty");
    return out;
}

Vec as_vec(const json& v, const std::string& key) { return as_list(v, key, as_double); }

void parse_problem(Keys& k, ProblemSpec& p) {
    p.family = [&] {
        const std::string s = as_string(k.require("problem.family"), "problem.family");
        try {
            return family_from_string(s);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("problem.family: ") + e.what());
        }
    }();
    if (auto v = k.take("problem.sigma")) p.sigma = as_double(*v, "problem.sigma");
    if (auto v = k.take("problem.a")) p.a = as_vec(*v, "problem.a");
    if (auto v = k.take("problem.theta")) p.theta = as_vec(*v, "problem.theta");
    if (auto v = k.take("problem.slopes")) {
        if (!v->is_array()) throw ConfigError("problem.slopes: expected a list of lists");
        for (std::size_t i = 0; i < v->size(); ++i) p.slopes.push_back(as_vec((*v)[i], "problem.slopes"));
    }
    if (auto v = k.take("problem.intercepts")) p.intercepts = as_vec(*v, "problem.intercepts");
    if (auto v = k.take("problem.pieces")) p.pieces = as_uint(*v, "problem.pieces");
    if (auto v = k.take("problem.seed")) p.seed = as_uint(*v, "problem.seed");
    if (!(p.sigma >= 0.0) || !std::isfinite(p.sigma)) throw ConfigError("problem.sigma: must be >= 0");
}

void parse_set(Keys& k, SetSpec& s) {
    if (auto v = k.take("set.kind")) {
        try {
            s.kind = set_kind_from_string(as_string(*v, "set.kind"));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(std::string("set.kind: ") + e.what());
        }
    }
    if (auto v = k.take("set.lower")) s.lower = as_vec(*v, "set.lower");
    if (auto v = k.take("set.upper")) s.upper = as_vec(*v, "set.upper");
    if (auto v = k.take("set.center")) s.center = as_vec(*v, "set.center");
    if (auto v = k.take("set.radius")) s.radius = as_double(*v, "set.radius");
}

std::vector<std::size_t> size_list(const json& v, const std::string& key) {
    auto raw = as_list(v, key, as_uint);
    return {raw.begin(), raw.end()};
}

void parse_common(Keys& k, ExperimentConfig& cfg) {
    if (auto v = k.take("output")) cfg.output = as_string(*v, "output");
    if (auto v = k.take("plot")) cfg.plot = as_bool(*v, "plot");
    if (auto v = k.take("threads")) {
        const auto t = as_uint(*v, "threads");
        if (t < 1 || t > 1024) throw ConfigError("threads: must lie in [1, 1024]");
        cfg.threads = static_cast<unsigned>(t);
    }
    if (auto v = k.take("seed")) cfg.run.seed = as_uint(*v, "seed");
}

void parse_run_keys(Keys& k, ExperimentConfig& cfg, bool sweep) {
    RunConfig& r = cfg.run;
    if (sweep) {
        if (auto v = k.take("sweep.n")) cfg.sweep.n = size_list(*v, "sweep.n");
        if (auto v = k.take("sweep.m")) cfg.sweep.m = size_list(*v, "sweep.m");
        if (auto v = k.take("sweep.d")) cfg.sweep.d = size_list(*v, "sweep.d");
        if (auto v = k.take("sweep.seeds")) cfg.sweep.seeds = as_list(*v, "sweep.seeds", as_uint);
        if (auto v = k.take("fit.scale")) cfg.fit_scale = rate_scale_from_string(as_string(*v, "fit.scale"));
    }
    auto axis = [&](const char* key, std::vector<std::size_t>& list, std::optional<std::size_t> fallback) {
        if (auto v = k.take(key)) {
            if (!list.empty()) throw ConfigError(std::string(key) + ": set either " + key + " or sweep." + key);
            list = {static_cast<std::size_t>(as_uint(*v, key))};
        }
        if (list.empty()) {
            if (!fallback) throw ConfigError(std::string(sweep ? "sweep." : "") + key + ": missing required key");
            list = {*fallback};
        }
    };
    axis("n", cfg.sweep.n, std::nullopt);
    axis("d", cfg.sweep.d, std::nullopt);
    axis("m", cfg.sweep.m, std::size_t{1});
    if (cfg.sweep.seeds.empty()) cfg.sweep.seeds = {r.seed};

    if (auto v = k.take("h")) cfg.h = as_double(*v, "h");
    if (auto v = k.take("eta")) cfg.eta = as_double(*v, "eta");
    if (auto v = k.take("delta")) r.delta = as_double(*v, "delta");
    if (auto v = k.take("x1")) r.x1 = as_vec(*v, "x1");
    parse_problem(k, r.problem);
    parse_set(k, r.set);

    r.n = cfg.sweep.n.front();
    r.m = cfg.sweep.m.front();
    r.d = cfg.sweep.d.front();
    r.problem.d = r.d;
    r.threads = sweep ? 1 : cfg.threads;

    for (std::size_t n : cfg.sweep.n)
        for (std::size_t m : cfg.sweep.m)
            for (std::size_t d : cfg.sweep.d) {
                try {
                    (void)resolve_run(cfg, n, m, d, r.seed);
                } catch (const std::invalid_argument& e) {
                    if (!sweep) throw ConfigError(e.what());
                    throw ConfigError("sweep cell (n=" + std::to_string(n) + ", m=" + std::to_string(m) +
                                      ", d=" + std::to_string(d) + "): " + e.what());
                }
            }
}

void parse_tails(Keys& k, ExperimentConfig& cfg) {
    TailsSpec& t = cfg.tails;
    t.seed = cfg.run.seed;
    if (auto v = k.take("tails.kinds")) {
        t.kinds = as_list(*v, "tails.kinds", [](const json& j, const std::string& key) {
            try {
                return envelope_kind_from_string(as_string(j, key));
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                throw ConfigError(key + ": " + e.what());
            }
        });
    } else {
        t.kinds = {EnvelopeKind::Ratio, EnvelopeKind::Avg, EnvelopeKind::AvgSqrt, EnvelopeKind::Lipschitz,
                   EnvelopeKind::NormToAvg};
    }
    t.d = size_list(k.require("tails.d"), "tails.d");
    if (auto v = k.take("tails.samples")) t.samples = as_uint(*v, "tails.samples");
    if (auto v = k.take("tails.functions")) {
        t.functions = as_list(*v, "tails.functions", [](const json& j, const std::string& key) {
            try {
                return test_function_from_string(as_string(j, key));
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                throw ConfigError(key + ": " + e.what());
            }
        });
    }
    if (t.samples < kMinTailSamples) {
        throw ConfigError("tails.samples: must be at least " + std::to_string(kMinTailSamples));
    }
    for (auto kind : t.kinds)
        for (std::size_t d : t.d) {
            try {
                (void)tail_grid(kind, d);
            } catch (const std::invalid_argument& e) {
                throw ConfigError("tails.d: " + std::string(e.what()));
            }
        }
}

void parse_martingale(Keys& k, ExperimentConfig& cfg) {
    MartingaleLab& lab = cfg.martingale;
    lab.seed = cfg.run.seed;
    if (auto v = k.take("martingale.laws")) {
        lab.laws = as_list(*v, "martingale.laws", [](const json& j, const std::string& key) {
            try {
                return increment_law_from_string(as_string(j, key));
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                throw ConfigError(key + ": " + e.what());
            }
        });
    }
    if (auto v = k.take("martingale.deltas")) lab.deltas = as_list(*v, "martingale.deltas", as_double);
    if (auto v = k.take("martingale.variance")) lab.variance = as_double(*v, "martingale.variance");
    if (auto v = k.take("martingale.scale")) lab.scale = as_double(*v, "martingale.scale");
    if (auto v = k.take("martingale.c")) lab.c = as_double(*v, "martingale.c");
    if (auto v = k.take("martingale.rho")) lab.rho = as_double(*v, "martingale.rho");
    if (auto v = k.take("martingale.steps")) lab.steps = as_uint(*v, "martingale.steps");
    if (auto v = k.take("martingale.replications")) lab.replications = as_uint(*v, "martingale.replications");

    if (!(lab.variance >= 0.0) || !std::isfinite(lab.variance)) {
        throw ConfigError("martingale.variance: must be >= 0");
    }
    if (lab.steps < 1) throw ConfigError("martingale.steps: must be >= 1");
    if (lab.replications < 1) throw ConfigError("martingale.replications: must be >= 1");
    const double default_scale = std::sqrt(lab.variance) / 3.0;
    for (auto law : lab.laws) {
        MartingaleSpec spec;
        spec.law = law;
        spec.variance = lab.variance;
        spec.scale = lab.scale.value_or(default_scale);
        double need = 0.0;
        try {
            need = certified_scale(spec);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (need > spec.scale * (1.0 + 1e-12)) {
            throw ConfigError("martingale.scale: " + std::to_string(spec.scale) + " is below the certified scale " +
                              std::to_string(need) + " of " + std::string(to_string(law)) + " increments");
        }
        const double c = lab.c.value_or(spec.scale);
        if (need > c * (1.0 + 1e-12)) {
            throw ConfigError("martingale.c: " + std::to_string(c) + " is below the increments' scale " +
                              std::to_string(need));
        }
        for (double delta : lab.deltas) {
            try {
                (void)SubGammaBoundary(c, lab.rho, delta);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("martingale.") + e.what());
            }
        }
    }
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
    Keys k(read_document(text));
    ExperimentConfig cfg;
    cfg.mode = mode_from_string(as_string(k.require("mode"), "mode"));
    parse_common(k, cfg);
    switch (cfg.mode) {
        case Mode::Run: parse_run_keys(k, cfg, false); break;
        case Mode::Sweep: parse_run_keys(k, cfg, true); break;
        case Mode::Tails: parse_tails(k, cfg); break;
        case Mode::Martingale: parse_martingale(k, cfg); break;
    }
    k.finish(cfg.mode);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void override_seed(ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.run.seed = seed;
    cfg.sweep.seeds = {seed};
    cfg.tails.seed = seed;
    cfg.martingale.seed = seed;
}

std::filesystem::path resolve_output(const ExperimentConfig& cfg) {
    if (cfg.output.is_absolute()) return cfg.output;
    const char* root = std::getenv(kOutputRootEnv);
    if (root != nullptr && *root != '\0') return std::filesystem::path(root) / cfg.output;
    return cfg.output;
}

RunConfig resolve_run(const ExperimentConfig& cfg, std::size_t n, std::size_t m, std::size_t d, std::uint64_t seed) {
    RunConfig r = cfg.run;
    r.n = n;
    r.m = m;
    r.d = d;
    r.seed = seed;
    r.problem.d = d;
    if (n < 1) throw std::invalid_argument("n: must be >= 1");
    if (m < 1) throw std::invalid_argument("m: must be >= 1");
    if (d < 1) throw std::invalid_argument("d: must be >= 1");
    if (!cfg.h || !cfg.eta) {
        const Problem p(r.problem);
        const double D = make_set(r.set, d).diameter();
        const double L = p.lipschitz();
        if (!(L > 0.0)) throw std::invalid_argument("h: the problem has L = 0, so h and eta must be given explicitly");
        const Hyperparams hp = default_hyperparams(L, D, d, n, m);
        r.h = cfg.h.value_or(hp.h);
        r.eta = cfg.eta.value_or(hp.eta);
    } else {
        r.h = *cfg.h;
        r.eta = *cfg.eta;
    }
    validate(r);
    return r;
}

std::string canonical_json(const RunConfig& cfg) {
    json p = {{"family", std::string(to_string(cfg.problem.family))},
              {"d", cfg.problem.d},
              {"sigma", cfg.problem.sigma},
              {"a", cfg.problem.a},
              {"theta", cfg.problem.theta},
              {"slopes", cfg.problem.slopes},
              {"intercepts", cfg.problem.intercepts},
              {"pieces", cfg.problem.pieces},
              {"seed", cfg.problem.seed}};
    json s = {{"kind", std::string(to_string(cfg.set.kind))},
              {"lower", cfg.set.lower},
              {"upper", cfg.set.upper},
              {"center", cfg.set.center},
              {"radius", cfg.set.radius}};
    json j = {{"n", cfg.n},         {"m", cfg.m},   {"d", cfg.d},       {"h", cfg.h},       {"eta", cfg.eta},
              {"x1", cfg.x1},       {"delta", cfg.delta}, {"seed", cfg.seed}, {"problem", p}, {"set", s}};
    return j.dump();
}

std::string config_hash(const RunConfig& cfg) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : canonical_json(cfg)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

SweepRow row_from_trace(const RunTrace& t, const std::string& hash) {
    SweepRow row;
    row.n = t.config.n;
    row.m = t.config.m;
    row.d = t.config.d;
    row.seed = t.config.seed;
    row.hash = hash;
    row.ok = true;
    row.h = t.config.h;
    row.eta = t.config.eta;
    row.cumulative_regret = t.cumulative_regret;
    row.average_regret = t.average_regret;
    row.last_iterate_regret = t.last_iterate_regret;
    row.average_iterate_regret = t.average_iterate_regret;
    row.bound = theoretical_regret_bound(t.config, t.lipschitz, t.diameter);
    row.total_bytes = t.total_bytes;
    return row;
}

// Loads a finished cell from its summary; nullopt when absent or stale.
std::optional<SweepRow> load_cell(const std::filesystem::path& summary, const std::string& hash) {
    std::ifstream in(summary);
    if (!in) return std::nullopt;
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("config_hash") || j["config_hash"] != hash) return std::nullopt;
    SweepRow row;
    const json& c = j.at("config");
    row.n = c.at("n").get<std::size_t>();
    row.m = c.at("m").get<std::size_t>();
    row.d = c.at("d").get<std::size_t>();
    row.seed = c.at("seed").get<std::uint64_t>();
    row.h = c.at("h").get<double>();
    row.eta = c.at("eta").get<double>();
    row.hash = hash;
    row.ok = true;
    row.cumulative_regret = j.at("cumulative_regret").get<double>();
    row.average_regret = j.at("average_regret").get<double>();
    row.last_iterate_regret = j.at("last_iterate_regret").get<double>();
    row.average_iterate_regret = j.at("average_iterate_regret").get<double>();
    row.bound = j.at("bound").at("total").get<double>();
    row.total_bytes = j.at("total_bytes").get<std::size_t>();
    return row;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg) {
    const std::filesystem::path out = resolve_output(cfg);
    const std::filesystem::path cells = out / "cells";
    ensure_writable_dir(cells);

    struct Cell {
        std::size_t n, m, d;
        std::uint64_t seed;
    };
    std::vector<Cell> grid;
    for (std::size_t n : cfg.sweep.n)
        for (std::size_t m : cfg.sweep.m)
            for (std::size_t d : cfg.sweep.d)
                for (std::uint64_t s : cfg.sweep.seeds) grid.push_back({n, m, d, s});

    enum class Status : char { Computed, Skipped, Failed };
    std::vector<SweepRow> rows(grid.size());
    std::vector<Status> status(grid.size(), Status::Failed);

    parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
        const Cell& c = grid[i];
        SweepRow& row = rows[i];
        row.n = c.n;
        row.m = c.m;
        row.d = c.d;
        row.seed = c.seed;
        try {
            RunConfig rc = resolve_run(cfg, c.n, c.m, c.d, c.seed);
            rc.threads = 1;
            const std::string hash = config_hash(rc);
            row.hash = hash;
            if (auto done = load_cell(cells / ("summary-" + hash + ".json"), hash)) {
                row = *done;
                status[i] = Status::Skipped;
                return;
            }
            const RunTrace trace = run_federated(rc);
            emit_run_report(trace, cells, false);
            row = row_from_trace(trace, hash);
            status[i] = Status::Computed;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
            status[i] = Status::Failed;
        }
    });

    SweepResult result;
    result.rows = std::move(rows);
    for (auto s : status) {
        if (s == Status::Computed) ++result.computed;
        if (s == Status::Skipped) ++result.skipped;
        if (s == Status::Failed) ++result.failed;
    }
    write_file_atomic(out / "sweep.csv", sweep_csv(result.rows));
    return result;
}

RateFit fit_rate_slope(const std::vector<SweepRow>& rows, RateScale scale) {
    RateFit fit;
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::pair<double, std::size_t>> cells;
    for (const auto& r : rows) {
        if (!r.ok) {
            fit.warnings.push_back("excluded failed cell n=" + std::to_string(r.n) + " m=" + std::to_string(r.m) +
                                   " seed=" + std::to_string(r.seed));
            continue;
        }
        if (!(r.average_regret > 0.0)) {
            fit.warnings.push_back("excluded non-positive regret at n=" + std::to_string(r.n) +
                                   " m=" + std::to_string(r.m) + " seed=" + std::to_string(r.seed));
            continue;
        }
        auto& acc = cells[{r.n, r.m, r.d}];
        acc.first += r.average_regret;
        acc.second += 1;
    }
    std::set<double> distinct;
    for (const auto& [key, acc] : cells) {
        const auto [n, m, d] = key;
        const double s = scale == RateScale::NM ? static_cast<double>(n) * static_cast<double>(m)
                                                : static_cast<double>(n);
        fit.points.emplace_back(std::log(s), std::log(acc.first / static_cast<double>(acc.second)));
        distinct.insert(s);
    }
    if (distinct.size() < 3) {
        throw std::invalid_argument("fit_rate_slope: need at least 3 distinct scale values, got " +
                                    std::to_string(distinct.size()));
    }
    const double k = static_cast<double>(fit.points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : fit.points) {
        mx += x;
        my += y;
    }
    mx /= k;
    my /= k;
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [x, y] : fit.points) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (const auto& [x, y] : fit.points) {
        const double r = y - (fit.intercept + fit.slope * x);
        ss += r * r;
    }
    fit.residual_rms = std::sqrt(ss / k);
    return fit;
}

std::vector<TailReport> run_tails(const ExperimentConfig& cfg) {
    std::vector<TailReport> out;
    const TailsSpec& t = cfg.tails;
    for (auto kind : t.kinds) {
        for (std::size_t d : t.d) {
            const auto tag = static_cast<std::uint64_t>(kind) << 8;
            if (needs_test_function(kind)) {
                for (std::size_t i = 0; i < t.functions.size(); ++i) {
                    const RngStream s{t.seed, tag + static_cast<std::uint64_t>(t.functions[i]), d};
                    out.push_back(tail_experiment(kind, d, t.samples, t.functions[i], s, cfg.threads));
                }
            } else {
                out.push_back(tail_experiment(kind, d, t.samples, std::nullopt, RngStream{t.seed, tag, d}, cfg.threads));
            }
        }
    }
    return out;
}

std::vector<MartingaleRow> run_martingale(const ExperimentConfig& cfg) {
    const MartingaleLab& lab = cfg.martingale;
    std::vector<MartingaleRow> out;
    for (auto law : lab.laws) {
        MartingaleSpec spec;
        spec.law = law;
        spec.variance = lab.variance;
        spec.scale = lab.scale.value_or(std::sqrt(lab.variance) / 3.0);
        spec.steps = lab.steps;
        spec.replications = lab.replications;
        spec.seed = lab.seed;
        spec.threads = cfg.threads;
        // Every delta reuses the same paths, so crossing fractions are
        // monotone in delta by construction.
        for (double delta : lab.deltas) {
            const SubGammaBoundary b(lab.c.value_or(spec.scale), lab.rho, delta);
            MartingaleRow row;
            row.law = law;
            row.delta = delta;
            row.variance = spec.variance;
            row.scale = spec.scale;
            row.c = b.c;
            row.rho = b.rho;
            row.steps = spec.steps;
            row.replications = spec.replications;
            row.coverage = boundary_coverage_experiment(spec, b);
            out.push_back(row);
        }
    }
    return out;
}

}  // namespace l1zo
