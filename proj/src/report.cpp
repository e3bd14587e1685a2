#include "l1zo/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace l1zo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt(double v, int digits = 6) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string csv_quote(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch == '\n' ? ' ' : ch;
    }
    return out + "\"";
}

double parse_double(const std::string& s, const char* what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw std::runtime_error(std::string(what) + ": bad number '" + s + "'");
    return v;
}

std::uint64_t parse_uint(const std::string& s, const char* what) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size()) throw std::runtime_error(std::string(what) + ": bad integer '" + s + "'");
    return v;
}

std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(std::move(line));
    }
    return out;
}

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return json::parse(in);
}

std::string read_text_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw std::runtime_error("cannot move output into place at " + path.string());
    }
}

void ensure_writable_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw std::runtime_error("output directory " + dir.string() + " cannot be created");
    const fs::path probe = dir / ".l1zo-write-probe";
    {
        std::ofstream out(probe);
        if (!out) throw std::runtime_error("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

// ---------------------------------------------------------------------------
// Traces

std::string trace_csv(const RunTrace& trace) {
    const std::size_t d = trace.config.d;
    std::ostringstream os;
    os << "t";
    for (std::size_t i = 1; i <= d; ++i) os << ",x_" << i;
    os << ",f_x_t,regret_t,g_norm_sq,bytes\n";
    for (const auto& r : trace.rounds) {
        os << r.t;
        for (double v : r.x) os << ',' << fmt17(v);
        os << ',' << fmt17(r.f_x) << ',' << fmt17(r.regret) << ',' << fmt17(r.g_norm_sq) << ',' << r.bytes_per_worker
           << '\n';
    }
    return os.str();
}

std::vector<RoundRecord> read_trace_csv(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw std::runtime_error("trace csv: empty");
    const auto header = split_csv_line(lines[0]);
    if (header.size() < 5 || header.front() != "t" || header.back() != "bytes") {
        throw std::runtime_error("trace csv: unexpected header");
    }
    const std::size_t d = header.size() - 5;
    std::vector<RoundRecord> out;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto f = split_csv_line(lines[li]);
        if (f.size() != header.size()) throw std::runtime_error("trace csv: row " + std::to_string(li) + " has the wrong width");
        RoundRecord r;
        r.t = parse_uint(f[0], "t");
        r.x.resize(d);
        for (std::size_t i = 0; i < d; ++i) r.x[i] = parse_double(f[1 + i], "x");
        r.f_x = parse_double(f[1 + d], "f_x_t");
        r.regret = parse_double(f[2 + d], "regret_t");
        r.g_norm_sq = parse_double(f[3 + d], "g_norm_sq");
        r.bytes_per_worker = parse_uint(f[4 + d], "bytes");
        out.push_back(std::move(r));
    }
    return out;
}

std::string run_summary_json(const RunTrace& trace, const std::vector<std::string>& figures) {
    const RunConfig& c = trace.config;
    const RegretBound b = regret_bound_terms(c, trace.lipschitz, trace.diameter);
    const Budgets budgets = deviation_and_variance_budgets(c, trace.lipschitz, trace.diameter);
    json j;
    j["config"] = json::parse(canonical_json(c));
    j["config_hash"] = config_hash(c);
    j["lipschitz"] = trace.lipschitz;
    j["diameter"] = trace.diameter;
    j["f_star"] = trace.f_star;
    j["x_star"] = trace.x_star;
    j["cumulative_regret"] = trace.cumulative_regret;
    j["average_regret"] = trace.average_regret;
    j["last_iterate_regret"] = trace.last_iterate_regret;
    j["average_iterate"] = trace.average_iterate;
    j["average_iterate_regret"] = trace.average_iterate_regret;
    j["total_bytes"] = trace.total_bytes;
    j["bytes_per_message"] = message_bytes(c.d);
    j["bound"] = {{"stability", b.stability}, {"bias_step", b.bias_step}, {"variance", b.variance},
                  {"deviation", b.deviation}, {"total", b.total}};
    j["bound_holds"] = trace.cumulative_regret <= b.total;
    j["budgets"] = {{"psi_n", budgets.psi_n}, {"psi_n_prime", budgets.psi_n_prime}};
    j["figures"] = figures;
    return j.dump(2) + "\n";
}

std::vector<fs::path> emit_run_report(const RunTrace& trace, const fs::path& dir, bool plot) {
    ensure_writable_dir(dir);
    const std::string hash = config_hash(trace.config);
    std::vector<fs::path> written;
    std::vector<std::string> figures;
    if (plot) {
        PlotSpec spec;
        spec.title = "Regret, n=" + std::to_string(trace.config.n) + " m=" + std::to_string(trace.config.m) +
                     " d=" + std::to_string(trace.config.d);
        spec.x_label = "round t";
        spec.y_label = "regret";
        spec.log_y = true;
        PlotSeries inst{"f(x_t) - f*", {}, {}, false, false};
        PlotSeries avg{"running average", {}, {}, true, false};
        double sum = 0.0;
        for (const auto& r : trace.rounds) {
            sum += r.regret;
            inst.x.push_back(static_cast<double>(r.t));
            inst.y.push_back(r.regret);
            avg.x.push_back(static_cast<double>(r.t));
            avg.y.push_back(sum / static_cast<double>(r.t));
        }
        spec.series = {inst, avg};
        const std::string name = "regret-" + hash + ".svg";
        write_file_atomic(dir / name, render_svg(spec));
        written.push_back(dir / name);
        figures.push_back(name);
    }
    const fs::path csv = dir / ("trace-" + hash + ".csv");
    write_file_atomic(csv, trace_csv(trace));
    written.push_back(csv);
    // The summary goes last: its presence marks the cell as finished.
    const fs::path summary = dir / ("summary-" + hash + ".json");
    write_file_atomic(summary, run_summary_json(trace, figures));
    written.push_back(summary);
    return written;
}

// ---------------------------------------------------------------------------
// Tails

std::string tail_csv(const std::vector<TailReport>& reports) {
    std::ostringstream os;
    os << "kind,d,N,r,empirical,se,envelope,violated,function\n";
    for (const auto& rep : reports) {
        const std::string fn = rep.function ? std::string(to_string(*rep.function)) : "";
        for (const auto& g : rep.grid) {
            os << to_string(rep.kind) << ',' << rep.d << ',' << rep.samples << ',' << fmt17(g.r) << ','
               << fmt17(g.empirical) << ',' << fmt17(g.std_error) << ',' << fmt17(g.envelope) << ','
               << (g.violated ? 1 : 0) << ',' << fn << '\n';
        }
    }
    return os.str();
}

std::vector<fs::path> emit_tails_report(const std::vector<TailReport>& reports, const fs::path& dir, bool plot) {
    if (reports.empty()) throw std::invalid_argument("emit_tails_report: no reports");
    ensure_writable_dir(dir);
    std::map<std::pair<std::string, std::size_t>, std::vector<TailReport>> groups;
    std::vector<std::pair<std::string, std::size_t>> order;
    for (const auto& r : reports) {
        const auto key = std::make_pair(std::string(to_string(r.kind)), r.d);
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(r);
    }

    std::vector<fs::path> written;
    json summary;
    summary["reports"] = json::array();
    summary["figures"] = json::array();
    std::size_t total_violations = 0, total_counted = 0;
    for (const auto& key : order) {
        const auto& group = groups[key];
        const std::string stem = "tails-" + key.first + "-d" + std::to_string(key.second);
        write_file_atomic(dir / (stem + ".csv"), tail_csv(group));
        written.push_back(dir / (stem + ".csv"));
        for (const auto& rep : group) {
            std::size_t counted = 0;
            for (const auto& g : rep.grid) counted += g.counted ? 1 : 0;
            total_violations += rep.violations;
            total_counted += counted;
            json grid_r = json::array();
            for (const auto& g : rep.grid) grid_r.push_back(g.r);
            summary["reports"].push_back({{"kind", key.first},
                                          {"d", rep.d},
                                          {"N", rep.samples},
                                          {"function", rep.function ? json(to_string(*rep.function)) : json()},
                                          {"stream", {rep.stream.seed, rep.stream.worker, rep.stream.round}},
                                          {"mean_std_error", rep.mean_std_error},
                                          {"grid", grid_r},
                                          {"counted_points", counted},
                                          {"violations", rep.violations},
                                          {"csv", stem + ".csv"}});
        }
        if (plot) {
            PlotSpec spec;
            spec.title = key.first + " tail, d=" + std::to_string(key.second);
            spec.x_label = "r";
            spec.y_label = "P(statistic > r)";
            spec.log_x = true;
            spec.log_y = true;
            for (const auto& rep : group) {
                PlotSeries s{rep.function ? "empirical (" + std::string(to_string(*rep.function)) + ")" : "empirical",
                             {}, {}, false, true};
                for (const auto& g : rep.grid) {
                    s.x.push_back(g.r);
                    s.y.push_back(g.empirical);
                }
                spec.series.push_back(std::move(s));
            }
            PlotSeries env{"envelope", {}, {}, true, false};
            for (const auto& g : group.front().grid) {
                env.x.push_back(g.r);
                env.y.push_back(g.envelope);
            }
            spec.series.push_back(std::move(env));
            write_file_atomic(dir / (stem + ".svg"), render_svg(spec));
            written.push_back(dir / (stem + ".svg"));
            summary["figures"].push_back(stem + ".svg");
        }
    }
    summary["total_violations"] = total_violations;
    summary["total_counted_points"] = total_counted;
    write_file_atomic(dir / "tails_summary.json", summary.dump(2) + "\n");
    written.push_back(dir / "tails_summary.json");
    return written;
}

// ---------------------------------------------------------------------------
// Martingale coverage

std::vector<fs::path> emit_martingale_report(const std::vector<MartingaleRow>& rows, const fs::path& dir, bool plot) {
    if (rows.empty()) throw std::invalid_argument("emit_martingale_report: no rows");
    ensure_writable_dir(dir);
    std::ostringstream os;
    os << "law,delta,variance,scale,c,rho,steps,replications,crossings,fraction,se,limit,within\n";
    json summary;
    summary["rows"] = json::array();
    bool all = true;
    for (const auto& r : rows) {
        const double limit = r.limit();
        os << to_string(r.law) << ',' << fmt17(r.delta) << ',' << fmt17(r.variance) << ',' << fmt17(r.scale) << ','
           << fmt17(r.c) << ',' << fmt17(r.rho) << ',' << r.steps << ',' << r.replications << ','
           << r.coverage.crossings << ',' << fmt17(r.coverage.fraction) << ',' << fmt17(r.coverage.std_error) << ','
           << fmt17(limit) << ',' << (r.within_guarantee() ? 1 : 0) << '\n';
        summary["rows"].push_back({{"law", to_string(r.law)},
                                   {"delta", r.delta},
                                   {"variance", r.variance},
                                   {"scale", r.scale},
                                   {"c", r.c},
                                   {"rho", r.rho},
                                   {"steps", r.steps},
                                   {"replications", r.replications},
                                   {"crossings", r.coverage.crossings},
                                   {"fraction", r.coverage.fraction},
                                   {"std_error", r.coverage.std_error},
                                   {"limit", limit},
                                   {"within", r.within_guarantee()}});
        all = all && r.within_guarantee();
    }
    summary["all_within"] = all;
    summary["figures"] = json::array();

    std::vector<fs::path> written;
    write_file_atomic(dir / "martingale.csv", os.str());
    written.push_back(dir / "martingale.csv");
    if (plot) {
        PlotSpec spec;
        spec.title = "Boundary crossing fraction";
        spec.x_label = "delta";
        spec.y_label = "fraction of paths crossing";
        std::map<std::string, PlotSeries> by_law;
        PlotSeries guarantee{"2 delta", {}, {}, true, false};
        for (const auto& r : rows) {
            auto& s = by_law[std::string(to_string(r.law))];
            s.label = std::string(to_string(r.law));
            s.markers = true;
            s.x.push_back(r.delta);
            s.y.push_back(r.coverage.fraction);
            guarantee.x.push_back(r.delta);
            guarantee.y.push_back(2.0 * r.delta);
        }
        for (auto& [name, s] : by_law) spec.series.push_back(s);
        std::vector<std::size_t> idx(guarantee.x.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return guarantee.x[a] < guarantee.x[b]; });
        PlotSeries sorted{"2 delta", {}, {}, true, false};
        for (auto i : idx) {
            sorted.x.push_back(guarantee.x[i]);
            sorted.y.push_back(guarantee.y[i]);
        }
        spec.series.push_back(sorted);
        write_file_atomic(dir / "martingale.svg", render_svg(spec));
        written.push_back(dir / "martingale.svg");
        summary["figures"].push_back("martingale.svg");
    }
    write_file_atomic(dir / "martingale.json", summary.dump(2) + "\n");
    written.push_back(dir / "martingale.json");
    return written;
}

// ---------------------------------------------------------------------------
// Sweeps

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "n,m,d,seed,hash,status,h,eta,cumulative_regret,average_regret,last_iterate_regret,"
          "average_iterate_regret,bound,total_bytes,error\n";
    for (const auto& r : rows) {
        os << r.n << ',' << r.m << ',' << r.d << ',' << r.seed << ',' << r.hash << ',' << (r.ok ? "ok" : "failed")
           << ',' << fmt17(r.h) << ',' << fmt17(r.eta) << ',' << fmt17(r.cumulative_regret) << ','
           << fmt17(r.average_regret) << ',' << fmt17(r.last_iterate_regret) << ','
           << fmt17(r.average_iterate_regret) << ',' << fmt17(r.bound) << ',' << r.total_bytes << ','
           << csv_quote(r.error) << '\n';
    }
    return os.str();
}

std::vector<SweepRow> read_sweep_csv(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw std::runtime_error("sweep csv: empty");
    std::vector<SweepRow> out;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto f = split_csv_line(lines[li]);
        if (f.size() != 15) throw std::runtime_error("sweep csv: row " + std::to_string(li) + " has the wrong width");
        SweepRow r;
        r.n = parse_uint(f[0], "n");
        r.m = parse_uint(f[1], "m");
        r.d = parse_uint(f[2], "d");
        r.seed = parse_uint(f[3], "seed");
        r.hash = f[4];
        r.ok = f[5] == "ok";
        r.h = parse_double(f[6], "h");
        r.eta = parse_double(f[7], "eta");
        r.cumulative_regret = parse_double(f[8], "cumulative_regret");
        r.average_regret = parse_double(f[9], "average_regret");
        r.last_iterate_regret = parse_double(f[10], "last_iterate_regret");
        r.average_iterate_regret = parse_double(f[11], "average_iterate_regret");
        r.bound = parse_double(f[12], "bound");
        r.total_bytes = parse_uint(f[13], "total_bytes");
        r.error = f[14];
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

json fit_json(const std::vector<SweepRow>& rows, RateScale scale) {
    try {
        const RateFit fit = fit_rate_slope(rows, scale);
        json pts = json::array();
        for (const auto& [x, y] : fit.points) pts.push_back({x, y});
        return {{"scale", to_string(scale)},     {"slope", fit.slope},       {"intercept", fit.intercept},
                {"residual_rms", fit.residual_rms}, {"points", pts},          {"warnings", fit.warnings}};
    } catch (const std::invalid_argument& e) {
        return {{"scale", to_string(scale)}, {"error", e.what()}};
    }
}

}  // namespace

std::vector<fs::path> emit_sweep_summary(const SweepResult& result, const fs::path& dir, bool plot) {
    ensure_writable_dir(dir);
    std::vector<SweepRow> single;
    for (const auto& r : result.rows) {
        if (r.m == 1) single.push_back(r);
    }
    json j;
    j["cells"] = result.rows.size();
    j["computed"] = result.computed;
    j["skipped"] = result.skipped;
    j["failed"] = result.failed;
    std::size_t violations = 0;
    for (const auto& r : result.rows) violations += (r.ok && r.cumulative_regret > r.bound) ? 1 : 0;
    j["bound_violations"] = violations;
    j["fit_nm"] = fit_json(result.rows, RateScale::NM);
    j["fit_n_single_worker"] = fit_json(single, RateScale::N);
    j["figures"] = json::array();

    std::vector<fs::path> written;
    if (plot) {
        PlotSpec spec;
        spec.title = "Average regret against n m";
        spec.x_label = "n m";
        spec.y_label = "mean average regret";
        spec.log_x = true;
        spec.log_y = true;
        std::map<std::size_t, std::map<std::size_t, std::pair<double, std::size_t>>> by_m;
        for (const auto& r : result.rows) {
            if (!r.ok) continue;
            auto& acc = by_m[r.m][r.n];
            acc.first += r.average_regret;
            acc.second += 1;
        }
        for (const auto& [m, cells] : by_m) {
            PlotSeries s{"m = " + std::to_string(m), {}, {}, false, true};
            for (const auto& [n, acc] : cells) {
                s.x.push_back(static_cast<double>(n * m));
                s.y.push_back(acc.first / static_cast<double>(acc.second));
            }
            spec.series.push_back(std::move(s));
        }
        if (j["fit_nm"].contains("slope")) {
            const double slope = j["fit_nm"]["slope"], icpt = j["fit_nm"]["intercept"];
            PlotSeries line{"OLS fit, slope " + fmt(slope, 3), {}, {}, true, false};
            double lo = 1e300, hi = 0.0;
            for (const auto& [x, y] : fit_rate_slope(result.rows, RateScale::NM).points) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            for (double x : {lo, hi}) {
                line.x.push_back(std::exp(x));
                line.y.push_back(std::exp(icpt + slope * x));
            }
            spec.series.push_back(std::move(line));
        }
        write_file_atomic(dir / "sweep.svg", render_svg(spec));
        written.push_back(dir / "sweep.svg");
        j["figures"].push_back("sweep.svg");
    }
    write_file_atomic(dir / "sweep_summary.json", j.dump(2) + "\n");
    written.push_back(dir / "sweep_summary.json");
    return written;
}

// ---------------------------------------------------------------------------
// Directory digest

void describe_directory(const fs::path& dir, std::ostream& out) {
    if (!fs::is_directory(dir)) throw std::runtime_error("report: " + dir.string() + " is not a directory");
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    std::size_t found = 0;

    for (const auto& p : entries) {
        const std::string name = p.filename().string();
        if (name.rfind("summary-", 0) == 0 && p.extension() == ".json") {
            const json j = read_json_file(p);
            const json& c = j.at("config");
            out << "run " << j.at("config_hash").get<std::string>() << ": n=" << c.at("n") << " m=" << c.at("m")
                << " d=" << c.at("d") << " seed=" << c.at("seed") << '\n'
                << "  cumulative regret " << fmt(j.at("cumulative_regret")) << ", bound "
                << fmt(j.at("bound").at("total")) << (j.at("bound_holds").get<bool>() ? " (holds)" : " (VIOLATED)")
                << '\n'
                << "  average regret " << fmt(j.at("average_regret")) << ", average-iterate regret "
                << fmt(j.at("average_iterate_regret")) << ", last-iterate regret "
                << fmt(j.at("last_iterate_regret")) << '\n'
                << "  bytes sent " << j.at("total_bytes") << '\n';
            ++found;
        } else if (name == "tails_summary.json") {
            const json j = read_json_file(p);
            out << "tails: " << j.at("reports").size() << " experiments, " << j.at("total_counted_points")
                << " non-vacuous grid points, " << j.at("total_violations") << " violations\n";
            for (const auto& r : j.at("reports")) {
                out << "  " << r.at("kind").get<std::string>() << " d=" << r.at("d");
                if (!r.at("function").is_null()) out << " f=" << r.at("function").get<std::string>();
                out << ": " << r.at("violations") << " / " << r.at("counted_points") << '\n';
            }
            ++found;
        } else if (name == "martingale.json") {
            const json j = read_json_file(p);
            out << "martingale coverage:\n";
            for (const auto& r : j.at("rows")) {
                out << "  " << r.at("law").get<std::string>() << " delta=" << fmt(r.at("delta"))
                    << ": crossing fraction " << fmt(r.at("fraction")) << " (limit " << fmt(r.at("limit")) << ")"
                    << (r.at("within").get<bool>() ? "" : " EXCEEDED") << '\n';
            }
            ++found;
        } else if (name == "sweep.csv") {
            const auto rows = read_sweep_csv(read_text_file(p));
            std::size_t ok = 0;
            for (const auto& r : rows) ok += r.ok ? 1 : 0;
            out << "sweep: " << rows.size() << " cells, " << ok << " ok\n";
            for (auto scale : {RateScale::NM, RateScale::N}) {
                std::vector<SweepRow> use;
                for (const auto& r : rows) {
                    if (scale == RateScale::NM || r.m == 1) use.push_back(r);
                }
                try {
                    const RateFit fit = fit_rate_slope(use, scale);
                    out << "  slope vs log(" << to_string(scale) << ")" << (scale == RateScale::N ? " [m = 1]" : "")
                        << ": " << fmt(fit.slope, 4) << " (residual rms " << fmt(fit.residual_rms, 3) << ")\n";
                } catch (const std::invalid_argument& e) {
                    out << "  slope vs log(" << to_string(scale) << "): " << e.what() << '\n';
                }
            }
            ++found;
        }
    }
    if (found == 0) throw std::runtime_error("report: no reports found in " + dir.string());
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

struct Axis {
    double lo = 0.0, hi = 1.0;
    bool log = false;

    double map(double v, double a, double b) const {
        const double t = log ? (std::log10(v) - lo) / (hi - lo) : (v - lo) / (hi - lo);
        return a + t * (b - a);
    }

    std::vector<double> ticks() const {
        std::vector<double> out;
        if (log) {
            const int step = std::max(1, static_cast<int>(std::ceil((hi - lo) / 8.0)));
            for (int e = static_cast<int>(std::ceil(lo)); e <= static_cast<int>(std::floor(hi)); e += step)
                out.push_back(std::pow(10.0, e));
            return out;
        }
        const double raw = (hi - lo) / 5.0;
        const double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double f : {1.0, 2.0, 5.0, 10.0}) {
            step = f * mag;
            if (raw <= step) break;
        }
        for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * step; v += step) out.push_back(v);
        return out;
    }
};

bool usable(double v, bool log) { return std::isfinite(v) && (!log || v > 0.0); }

Axis fit_axis(const std::vector<PlotSeries>& series, bool x, bool log) {
    double lo = 1e300, hi = -1e300;
    for (const auto& s : series) {
        for (double raw : x ? s.x : s.y) {
            if (!usable(raw, log)) continue;
            const double v = log ? std::log10(raw) : raw;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (lo > hi) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.03 * (hi - lo);
    return {lo - pad, hi + pad, log};
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
    constexpr double W = 720, H = 440, left = 80, right = 200, top = 40, bottom = 60;
    const double x0 = left, x1 = W - right, y0 = H - bottom, y1 = top;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

    const Axis ax = fit_axis(spec.series, true, spec.log_x);
    const Axis ay = fit_axis(spec.series, false, spec.log_y);

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << xml_escape(spec.title) << "</text>\n";
    os << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\"" << y0 - y1
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : ax.ticks()) {
        const double px = ax.map(t, x0, x1);
        os << "<line x1=\"" << fmt(px) << "\" y1=\"" << y0 << "\" x2=\"" << fmt(px) << "\" y2=\"" << y0 + 5
           << "\" stroke=\"black\"/><text x=\"" << fmt(px) << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\">"
           << fmt(t, 3) << "</text>\n";
    }
    for (double t : ay.ticks()) {
        const double py = ay.map(t, y0, y1);
        os << "<line x1=\"" << x0 - 5 << "\" y1=\"" << fmt(py) << "\" x2=\"" << x0 << "\" y2=\"" << fmt(py)
           << "\" stroke=\"black\"/><text x=\"" << x0 - 8 << "\" y=\"" << fmt(py + 4) << "\" text-anchor=\"end\">"
           << fmt(t, 3) << "</text>\n";
    }
    os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
       << xml_escape(spec.x_label) << "</text>\n";
    os << "<text transform=\"translate(20 " << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << xml_escape(spec.y_label) << "</text>\n";

    for (std::size_t k = 0; k < spec.series.size(); ++k) {
        const auto& s = spec.series[k];
        const char* color = palette[k % std::size(palette)];
        std::ostringstream pts;
        std::size_t count = 0;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!usable(s.x[i], spec.log_x) || !usable(s.y[i], spec.log_y)) continue;
            const double px = ax.map(s.x[i], x0, x1), py = ay.map(s.y[i], y0, y1);
            pts << (count++ ? " " : "") << fmt(px) << ',' << fmt(py);
            if (s.markers) {
                os << "<circle cx=\"" << fmt(px) << "\" cy=\"" << fmt(py) << "\" r=\"2.5\" fill=\"" << color
                   << "\"/>\n";
            }
        }
        if (count > 1) {
            os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
               << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"" << pts.str() << "\"/>\n";
        }
        const double ly = top + 16.0 * static_cast<double>(k) + 8.0;
        os << "<line x1=\"" << x1 + 12 << "\" y1=\"" << ly << "\" x2=\"" << x1 + 36 << "\" y2=\"" << ly
           << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6 4\"" : "")
           << "/><text x=\"" << x1 + 42 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace l1zo
