#include "ctrlrand/harness.hpp"

#include "ctrlrand/backward_scheme.hpp"
#include "ctrlrand/error.hpp"
#include "ctrlrand/fd_oracle.hpp"
#include "ctrlrand/format.hpp"
#include "ctrlrand/policy_eval.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace ctrlrand {

namespace fs = std::filesystem;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& raw)
{
    const std::string s = trim(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + raw + "'");
    }
    return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& raw)
{
    const std::string s = trim(raw);
    Int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + raw + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& raw)
{
    const std::string s = trim(raw);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config: '" + key + "' expects true or false, got '" + raw + "'");
}

template <class Int>
std::vector<Int> parse_list(const std::string& key, const std::string& raw)
{
    std::vector<Int> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_int<Int>(key, item));
    }
    return out;
}

BasisKind parse_basis(const std::string& raw)
{
    const std::string s = trim(raw);
    if (s == "poly_xa") return BasisKind::poly_xa;
    if (s == "poly_x_per_a") return BasisKind::poly_x_per_a;
    throw ConfigError("config: unknown basis '" + raw + "' (expected poly_xa or poly_x_per_a)");
}

using Section = boost::property_tree::ptree;

void reject_unknown(const std::string& section, const Section& node, const std::set<std::string>& allowed)
{
    for (const auto& [key, child] : node) {
        if (!allowed.count(key)) {
            throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
        }
    }
}

std::string mean_label(const std::string& column)
{
    return "mean_" + column;
}

} // namespace

void ExperimentConfig::validate() const
{
    require(!grids.empty(), "config: grids must be nonempty");
    for (std::size_t i = 0; i < grids.size(); ++i) {
        require(grids[i] >= 1, "config: grid sizes must be >= 1");
        require(i == 0 || grids[i] > grids[i - 1], "config: grids must be strictly increasing");
    }
    require(!seeds.empty(), "config: seeds must be nonempty");
    require(n_paths >= 1, "config: n_paths must be >= 1");
    require(intensity_mass > 0.0 && std::isfinite(intensity_mass), "config: intensity_mass must be positive");
    require(problem.control_points >= 1, "config: control_points must be >= 1");
    require(basis.degree_x >= 0 && basis.degree_a >= 0, "config: degrees must be >= 0");
}

ExperimentConfig parse_config(std::istream& in)
{
    Section root;
    try {
        boost::property_tree::ini_parser::read_ini(in, root);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    ExperimentConfig cfg;
    static const std::set<std::string> sections{"problem", "grids", "mc", "regression", "output"};
    for (const auto& [name, node] : root) {
        if (!sections.count(name) || node.empty()) {
            throw ConfigError("config: unknown section or key '" + name + "'");
        }
    }

    const Section empty;
    const Section& prob = root.get_child("problem", empty);
    cfg.problem.name = trim(prob.get<std::string>("name", "lq1d"));
    std::set<std::string> allowed{"name", "reference", "control_points", "fd_n_space", "fd_control_points",
                                  "mc_reference_paths", "mc_reference_seed"};
    for (const auto& k : problem_parameter_names(cfg.problem.name)) {
        allowed.insert(k);
    }
    reject_unknown("problem", prob, allowed);
    cfg.reference = default_reference(cfg.problem.name);
    for (const auto& [key, child] : prob) {
        const std::string v = child.data();
        if (key == "name") {
            continue;
        } else if (key == "reference") {
            cfg.reference = parse_reference(trim(v));
        } else if (key == "control_points") {
            cfg.problem.control_points = parse_int<int>(key, v);
        } else if (key == "fd_n_space") {
            cfg.reference_options.fd_n_space = parse_int<int>(key, v);
        } else if (key == "fd_control_points") {
            cfg.reference_options.fd_control_points = parse_int<int>(key, v);
        } else if (key == "mc_reference_paths") {
            cfg.reference_options.mc_paths = parse_int<std::size_t>(key, v);
        } else if (key == "mc_reference_seed") {
            cfg.reference_options.mc_seed = parse_int<std::uint64_t>(key, v);
        } else {
            cfg.problem.params[key] = parse_double(key, v);
        }
    }

    const Section& grids = root.get_child("grids", empty);
    reject_unknown("grids", grids, {"n"});
    if (auto n = grids.get_optional<std::string>("n")) {
        cfg.grids = parse_list<int>("n", *n);
    }

    const Section& mc = root.get_child("mc", empty);
    reject_unknown("mc", mc, {"n_paths", "n_eval_paths", "seeds", "intensity_mass", "threads"});
    for (const auto& [key, child] : mc) {
        const std::string v = child.data();
        if (key == "n_paths") {
            cfg.n_paths = parse_int<std::size_t>(key, v);
        } else if (key == "n_eval_paths") {
            cfg.n_eval_paths = parse_int<std::size_t>(key, v);
        } else if (key == "seeds") {
            cfg.seeds = parse_list<std::uint64_t>(key, v);
        } else if (key == "intensity_mass") {
            cfg.intensity_mass = parse_double(key, v);
        } else if (key == "threads") {
            const int t = parse_int<int>(key, v);
            cfg.exec = t == 1 ? Execution::serial() : Execution::parallel(t);
        }
    }

    const Section& reg = root.get_child("regression", empty);
    reject_unknown("regression", reg, {"basis", "degree_x", "degree_a", "control_variates"});
    for (const auto& [key, child] : reg) {
        const std::string v = child.data();
        if (key == "basis") {
            cfg.basis.kind = parse_basis(v);
        } else if (key == "degree_x") {
            cfg.basis.degree_x = parse_int<int>(key, v);
        } else if (key == "degree_a") {
            cfg.basis.degree_a = parse_int<int>(key, v);
        } else if (key == "control_variates") {
            cfg.control_variates = parse_bool(key, v);
        }
    }

    const Section& out = root.get_child("output", empty);
    reject_unknown("output", out, {"dir", "diagnostics", "fd_slice"});
    for (const auto& [key, child] : out) {
        const std::string v = child.data();
        if (key == "dir") {
            cfg.output_dir = trim(v);
        } else if (key == "diagnostics") {
            cfg.write_diagnostics = parse_bool(key, v);
        } else if (key == "fd_slice") {
            cfg.write_fd_slice = parse_bool(key, v);
        }
    }

    cfg.validate();
    // fail early on bad problem parameters
    (void)make_named_problem(cfg.problem);
    return cfg;
}

ExperimentConfig load_config(const fs::path& file)
{
    std::ifstream in(file);
    if (!in) {
        throw ConfigError("config: cannot open " + file.string());
    }
    return parse_config(in);
}

bool ErrorReport::has_failures() const
{
    return std::any_of(rows.begin(), rows.end(), [](const ErrorRow& r) { return !r.ok; });
}

void set_errors(ErrorRow& row)
{
    row.err = row.value0 - row.v_ref;
    row.err_plus = std::max(-row.err, 0.0);
    row.err_minus = std::max(row.err, 0.0);
}

double estimate_rate(const std::vector<std::pair<double, double>>& pairs)
{
    std::vector<std::pair<double, double>> logs;
    for (const auto& [h, e] : pairs) {
        require(h > 0.0 && std::isfinite(h), "estimate_rate: moduli must be positive");
        if (e > 0.0 && std::isfinite(e)) {
            logs.emplace_back(std::log(h), std::log(e));
        }
    }
    require(logs.size() >= 3, "estimate_rate: need at least 3 pairs with positive error, got " +
                                  std::to_string(logs.size()));
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : logs) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(logs.size());
    my /= static_cast<double>(logs.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : logs) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    require(sxx > 0.0, "estimate_rate: moduli must not all be equal");
    return sxy / sxx;
}

std::vector<RateFit> fit_rates(const std::vector<ErrorRow>& rows)
{
    // n -> (modulus, sums of |err|, err_plus, err_minus, count)
    struct Acc {
        double modulus = 0.0;
        double abs_err = 0.0, plus = 0.0, minus = 0.0;
        std::size_t count = 0;
    };
    std::map<int, Acc> by_n;
    for (const auto& r : rows) {
        if (!r.ok) {
            continue;
        }
        Acc& a = by_n[r.n];
        a.modulus = r.modulus;
        a.abs_err += std::abs(r.err);
        a.plus += r.err_plus;
        a.minus += r.err_minus;
        ++a.count;
    }
    auto fit = [&](const std::string& column, auto pick) {
        std::vector<std::pair<double, double>> pairs;
        std::size_t usable = 0;
        for (const auto& [n, a] : by_n) {
            const double m = pick(a) / static_cast<double>(a.count);
            pairs.emplace_back(a.modulus, m);
            usable += m > 0.0 ? 1 : 0;
        }
        RateFit f{mean_label(column), kNan, usable};
        if (usable >= 3) {
            f.slope = estimate_rate(pairs);
        }
        return f;
    };
    return {fit("abs_err", [](const Acc& a) { return a.abs_err; }),
            fit("err_plus", [](const Acc& a) { return a.plus; }),
            fit("err_minus", [](const Acc& a) { return a.minus; })};
}

ErrorReport run_experiment(const ExperimentConfig& cfg, std::ostream* log)
{
    cfg.validate();
    const Problem p = make_named_problem(cfg.problem);
    const IntensityMeasure im = IntensityMeasure::uniform(p.grid(), cfg.intensity_mass);

    ErrorReport report;
    report.problem = cfg.problem.name;
    report.reference = to_string(cfg.reference);
    report.v_ref = reference_value(cfg.problem, cfg.reference, cfg.reference_options);
    if (log) {
        *log << "reference " << report.reference << " v_ref = " << g17(report.v_ref) << '\n';
    }

    if (cfg.write_fd_slice || cfg.write_diagnostics) {
        fs::create_directories(cfg.output_dir);
    }
    if (cfg.write_fd_slice && p.dim_d() == 1) {
        FdConfig fc = default_fd_config(p, cfg.reference_options.fd_n_space);
        fc.control_points = p.grid().size() > 1 ? cfg.reference_options.fd_control_points : 0;
        fc.exec = cfg.exec;
        std::ofstream os(cfg.output_dir / "fd_slice.csv");
        write_fd_csv(solve_hjb_fd(p, fc), os);
    }

    SchemeOptions opts;
    opts.basis = cfg.basis;
    opts.brownian_control_variates = cfg.control_variates;
    opts.exec = cfg.exec;
    const bool policy_gain = !p.f_depends_on_y() && cfg.n_eval_paths > 0;

    for (const int n : cfg.grids) {
        std::vector<std::uint64_t> seeds = cfg.seeds;
        std::sort(seeds.begin(), seeds.end());
        for (const std::uint64_t seed : seeds) {
            ErrorRow row;
            row.n = n;
            row.seed = seed;
            row.v_ref = report.v_ref;
            try {
                const TimeGrid grid = make_uniform_grid(n, p.horizon());
                check_grid_for(grid, p);
                row.modulus = grid.modulus();
                const SchemeOutput out = run_scheme(p, grid, im, cfg.n_paths, seed, opts);
                row.value0 = out.value0;
                row.j_hat = kNan;
                row.stderr_j = kNan;
                if (policy_gain) {
                    const FeedbackPolicy policy = extract_policy(out);
                    const GainEstimate g =
                        evaluate_policy(p, policy, cfg.n_eval_paths, seed ^ kEvaluationSeedMask, cfg.exec);
                    row.j_hat = g.mean;
                    row.stderr_j = g.std_error;
                }
                set_errors(row);
                if (cfg.write_diagnostics) {
                    std::ofstream os(cfg.output_dir /
                                     ("diagnostics_n" + std::to_string(n) + "_seed" + std::to_string(seed) + ".csv"));
                    write_diagnostics_csv(out, os);
                }
            } catch (const std::exception& e) {
                row.ok = false;
                row.failure = e.what();
                if (row.modulus == 0.0) {
                    row.modulus = p.horizon() / n;
                }
                row.value0 = row.j_hat = row.stderr_j = kNan;
                row.err = row.err_plus = row.err_minus = kNan;
            }
            if (log) {
                *log << "n = " << n << " seed = " << seed
                     << (row.ok ? " value0 = " + g17(row.value0) : " FAILED: " + row.failure) << '\n';
            }
            report.rows.push_back(std::move(row));
        }
    }
    report.rates = fit_rates(report.rows);
    return report;
}

void write_errors_csv(const std::vector<ErrorRow>& rows, std::ostream& os)
{
    os << "n,modulus,seed,value0,j_hat,stderr_j,v_ref,err,err_plus,err_minus\n";
    for (const auto& r : rows) {
        os << r.n << ',' << g17(r.modulus) << ',' << r.seed << ',' << g17(r.value0) << ',' << g17(r.j_hat) << ','
           << g17(r.stderr_j) << ',' << g17(r.v_ref) << ',' << g17(r.err) << ',' << g17(r.err_plus) << ','
           << g17(r.err_minus) << '\n';
    }
}

void write_rates_csv(const std::vector<RateFit>& rates, std::ostream& os)
{
    os << "quantity,slope,n_grids\n";
    for (const auto& r : rates) {
        os << r.quantity << ',' << g17(r.slope) << ',' << r.n_grids << '\n';
    }
}

std::vector<ErrorRow> read_errors_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || trim(line) != "n,modulus,seed,value0,j_hat,stderr_j,v_ref,err,err_plus,err_minus") {
        throw ConfigError("errors.csv: unexpected header");
    }
    std::vector<ErrorRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(trim(cell));
        }
        if (cells.size() != 10) {
            throw ConfigError("errors.csv line " + std::to_string(lineno) + ": expected 10 columns");
        }
        auto num = [&](std::size_t i) {
            return cells[i] == "nan" ? kNan : parse_double("errors.csv line " + std::to_string(lineno), cells[i]);
        };
        ErrorRow r;
        r.n = parse_int<int>("n", cells[0]);
        r.modulus = num(1);
        r.seed = parse_int<std::uint64_t>("seed", cells[2]);
        r.value0 = num(3);
        r.j_hat = num(4);
        r.stderr_j = num(5);
        r.v_ref = num(6);
        r.err = num(7);
        r.err_plus = num(8);
        r.err_minus = num(9);
        r.ok = std::isfinite(r.err);
        rows.push_back(r);
    }
    return rows;
}

void emit_report(const ErrorReport& report, const fs::path& dir)
{
    fs::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream os(dir / name);
        if (!os) {
            throw Error("cannot write " + (dir / name).string());
        }
        return os;
    };
    {
        auto os = open("errors.csv");
        write_errors_csv(report.rows, os);
    }
    {
        auto os = open("rates.csv");
        write_rates_csv(report.rates, os);
    }
    auto os = open("summary.txt");
    os << "problem: " << report.problem << '\n';
    os << "reference: " << report.reference << " v_ref = " << g17(report.v_ref) << '\n';

    std::map<int, std::vector<const ErrorRow*>> by_n;
    std::size_t failed = 0;
    for (const auto& r : report.rows) {
        by_n[r.n].push_back(&r);
        failed += r.ok ? 0 : 1;
    }
    os << "cells: " << report.rows.size() << " (" << failed << " failed)\n\n";
    os << "n  seeds  mean_value0  seed_stderr  mean_err  mean_abs_err  mean_j_hat\n";
    for (const auto& [n, rows] : by_n) {
        std::vector<double> v, e, j;
        for (const ErrorRow* r : rows) {
            if (r->ok) {
                v.push_back(r->value0);
                e.push_back(r->err);
                j.push_back(r->j_hat);
            }
        }
        const auto mean = [](const std::vector<double>& xs) {
            double s = 0.0;
            for (double x : xs) s += x;
            return xs.empty() ? kNan : s / static_cast<double>(xs.size());
        };
        double abs_e = 0.0;
        for (double x : e) abs_e += std::abs(x);
        abs_e = e.empty() ? kNan : abs_e / static_cast<double>(e.size());
        double se = kNan;
        if (v.size() >= 2) {
            const double m = mean(v);
            double ss = 0.0;
            for (double x : v) ss += (x - m) * (x - m);
            se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
        }
        os << n << "  " << v.size() << "  " << g17(mean(v)) << "  " << g17(se) << "  " << g17(mean(e)) << "  "
           << g17(abs_e) << "  " << g17(mean(j)) << '\n';
    }
    os << "\nfitted log-log slopes against the grid modulus:\n";
    for (const auto& r : report.rates) {
        os << "  " << r.quantity << ": " << g17(r.slope) << " (" << r.n_grids << " grids)\n";
    }
    for (const auto& r : report.rows) {
        if (!r.ok) {
            os << "failed cell n = " << r.n << " seed = " << r.seed << ": " << r.failure << '\n';
        }
    }
}

} // namespace ctrlrand
