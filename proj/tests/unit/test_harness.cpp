#include "ctrlrand/harness.hpp"
#include "ctrlrand/error.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ctrlrand;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text)
{
    std::istringstream in(text);
    return parse_config(in);
}

std::string slurp(const fs::path& f)
{
    std::ifstream in(f, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch_dir(const std::string& name)
{
    const fs::path d = fs::temp_directory_path() / ("ctrlrand_test_" + name);
    fs::remove_all(d);
    return d;
}

const char* small_lq = R"(
[problem]
name = lq1d
[grids]
n = 2, 4, 8
[mc]
n_paths = 3000
n_eval_paths = 2000
seeds = 3, 1
intensity_mass = 20
[regression]
basis = poly_xa
degree_x = 2
degree_a = 2
control_variates = true
)";

} // namespace

TEST_CASE("estimate_rate")
{
    const std::vector<double> h{0.1, 0.05, 0.025, 0.0125};
    std::vector<std::pair<double, double>> lin, root, flat;
    for (double m : h) {
        lin.emplace_back(m, 3.0 * m);
        root.emplace_back(m, 0.7 * std::sqrt(m));
        flat.emplace_back(m, 0.1);
    }
    CHECK(std::abs(estimate_rate(lin) - 1.0) <= 1e-10);
    CHECK(std::abs(estimate_rate(root) - 0.5) <= 1e-10);
    CHECK(std::abs(estimate_rate({flat.begin(), flat.begin() + 3})) <= 1e-10);

    std::vector<std::pair<double, double>> some_zero = lin;
    some_zero[1].second = 0.0;
    CHECK(std::abs(estimate_rate(some_zero) - 1.0) <= 1e-10);
    some_zero[2].second = -1.0;
    CHECK_THROWS_AS(estimate_rate(some_zero), ConfigError);
    CHECK_THROWS_AS(estimate_rate({{0.1, 1.0}, {0.1, 2.0}, {0.1, 3.0}}), ConfigError);
}

TEST_CASE("error split")
{
    ErrorRow r;
    r.v_ref = -0.75;
    r.value0 = -0.80;
    set_errors(r);
    CHECK(r.err == doctest::Approx(-0.05));
    CHECK(r.err_plus == doctest::Approx(0.05));
    CHECK(r.err_minus == 0.0);
    r.value0 = -0.70;
    set_errors(r);
    CHECK(r.err_plus == 0.0);
    CHECK(r.err_minus == doctest::Approx(0.05));
}

TEST_CASE("rate fits from rows")
{
    std::vector<ErrorRow> rows;
    for (int n : {10, 20, 40}) {
        for (std::uint64_t s : {1, 2}) {
            ErrorRow r;
            r.n = n;
            r.modulus = 1.0 / n;
            r.seed = s;
            r.v_ref = 1.0;
            r.value0 = 1.0 - (s == 1 ? 1.0 : 3.0) / n;
            set_errors(r);
            rows.push_back(r);
        }
    }
    ErrorRow failed;
    failed.n = 40;
    failed.ok = false;
    failed.err = NAN;
    rows.push_back(failed);
    const auto rates = fit_rates(rows);
    REQUIRE(rates.size() == 3);
    CHECK(rates[0].quantity == "mean_abs_err");
    CHECK(rates[0].slope == doctest::Approx(1.0));
    CHECK(rates[1].slope == doctest::Approx(1.0));
    CHECK(rates[0].n_grids == 3);
    CHECK(std::isnan(rates[2].slope));
    CHECK(rates[2].n_grids == 0);
}

TEST_CASE("config parsing")
{
    const ExperimentConfig c = parse(small_lq);
    CHECK(c.problem.name == "lq1d");
    CHECK(c.grids == std::vector<int>{2, 4, 8});
    CHECK(c.seeds == std::vector<std::uint64_t>{3, 1});
    CHECK(c.n_paths == 3000);
    CHECK(c.intensity_mass == 20.0);
    CHECK(c.basis.kind == BasisKind::poly_xa);
    CHECK(c.control_variates);
    CHECK(c.reference == ReferenceKind::riccati);

    const ExperimentConfig bsb = parse("[problem]\nname = bsb_call\nsigma_hi = 0.25\ncontrol_points = 5\n");
    CHECK(bsb.reference == ReferenceKind::bsb);
    CHECK(bsb.problem.params.at("sigma_hi") == 0.25);
    CHECK(bsb.problem.control_points == 5);

    const ExperimentConfig fd = parse("[problem]\nname = lq1d\nreference = fd\nfd_n_space = 300\n# comment\n");
    CHECK(fd.reference == ReferenceKind::fd);
    CHECK(fd.reference_options.fd_n_space == 300);

    const ExperimentConfig serial = parse("[mc]\nthreads = 1\n");
    CHECK(serial.exec.backend == Backend::serial);
}

TEST_CASE("config errors")
{
    const char* bad[] = {
        "[problem]\nname = lq1d\nx_zero = 1\n",
        "[solver]\nn = 3\n",
        "[grids]\nn = 10, 5\n",
        "[grids]\nn = 10, ten\n",
        "[mc]\nn_paths = -4\n",
        "[mc]\nseeds =\n",
        "[mc]\nintensity_mass = 0\n",
        "[regression]\nbasis = splines\n",
        "[regression]\ncontrol_variates = maybe\n",
        "[problem]\nname = heston\n",
        "[problem]\nname = lq1d\nreference = exact\n",
        "[problem]\nname = lq1d\nc_a = -1\n",
        "[problem]\nname = bsb_call\nsigma_lo = 0.3\n",
        "[output]\nformat = json\n",
        "[problem\nname = lq1d\n",
    };
    for (const char* text : bad) {
        CAPTURE(text);
        CHECK_THROWS_AS(parse(text), ConfigError);
    }
    CHECK_THROWS_WITH_AS(parse("[mc]\nnpaths = 5\n"), doctest::Contains("npaths"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/file.ini"), ConfigError);
}

TEST_CASE("no-control GBM errors straddle zero")
{
    ExperimentConfig c = parse("[problem]\nname = nocontrol_gbm\nmu = 0.0\n[grids]\nn = 10\n"
                               "[mc]\nn_paths = 20000\nn_eval_paths = 20000\nseeds = 1,2,3,4,5\n");
    c.reference_options.mc_paths = 400000;
    const ErrorReport r = run_experiment(c);
    CHECK(r.reference == "mc_nocontrol");
    REQUIRE(r.rows.size() == 5);
    const double ref_se = 0.2 / std::sqrt(400000.0);
    for (const auto& row : r.rows) {
        REQUIRE(row.ok);
        CHECK(row.v_ref == r.v_ref);
        CHECK(std::abs(row.err) <= 3.0 * std::hypot(row.stderr_j, ref_se));
        CHECK(row.seed == static_cast<std::uint64_t>(&row - r.rows.data()) + 1);
    }
}

TEST_CASE("experiment rows, failures and reports")
{
    const ExperimentConfig c = parse(small_lq);
    const ErrorReport r = run_experiment(c);
    REQUIRE(r.rows.size() == 6);
    CHECK_FALSE(r.has_failures());
    // sorted by n, then seed
    CHECK(r.rows[0].n == 2);
    CHECK(r.rows[0].seed == 1);
    CHECK(r.rows[1].seed == 3);
    CHECK(r.rows[5].n == 8);
    for (const auto& row : r.rows) {
        CHECK(row.modulus == doctest::Approx(1.0 / row.n));
        CHECK(std::isfinite(row.j_hat));
        CHECK(row.stderr_j > 0.0);
    }

    SUBCASE("reruns are byte-identical for any thread count")
    {
        const fs::path a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
        emit_report(r, a);
        ExperimentConfig c2 = c;
        c2.exec = Execution::serial();
        emit_report(run_experiment(c2), b);
        for (const char* f : {"errors.csv", "rates.csv", "summary.txt"}) {
            CHECK(slurp(a / f) == slurp(b / f));
        }
        std::ifstream in(a / "errors.csv");
        const auto back = read_errors_csv(in);
        REQUIRE(back.size() == r.rows.size());
        for (std::size_t i = 0; i < back.size(); ++i) {
            CHECK(back[i].value0 == r.rows[i].value0);
            CHECK(back[i].err_minus == r.rows[i].err_minus);
            CHECK(back[i].seed == r.rows[i].seed);
        }
        fs::remove_all(a);
        fs::remove_all(b);
    }
    SUBCASE("a failing cell is recorded and does not abort the sweep")
    {
        ExperimentConfig f = c;
        f.basis = {BasisKind::poly_x_per_a, 2, 0};
        f.n_paths = 50;
        f.problem.control_points = 21;
        const ErrorReport fr = run_experiment(f);
        CHECK(fr.has_failures());
        REQUIRE(fr.rows.size() == 6);
        CHECK_FALSE(fr.rows[0].ok);
        CHECK(std::isnan(fr.rows[0].value0));
        CHECK(fr.rows[0].failure.find("underdetermined") != std::string::npos);
    }
}

TEST_CASE("report files")
{
    SUBCASE("empty report")
    {
        const fs::path d = scratch_dir("empty");
        ErrorReport r;
        r.problem = "lq1d";
        r.reference = "riccati";
        r.rates = fit_rates({});
        emit_report(r, d);
        CHECK(slurp(d / "errors.csv") == "n,modulus,seed,value0,j_hat,stderr_j,v_ref,err,err_plus,err_minus\n");
        CHECK(slurp(d / "rates.csv").rfind("quantity,slope,n_grids\n", 0) == 0);
        CHECK(fs::exists(d / "summary.txt"));
        fs::remove_all(d);
    }
    SUBCASE("single row gives nan slopes")
    {
        const fs::path d = scratch_dir("single");
        ErrorRow row;
        row.n = 10;
        row.modulus = 0.1;
        row.seed = 1;
        row.value0 = 1.5;
        row.v_ref = 1.0;
        row.j_hat = 1.4;
        row.stderr_j = 0.01;
        set_errors(row);
        ErrorReport r;
        r.rows = {row};
        r.rates = fit_rates(r.rows);
        emit_report(r, d);
        CHECK(slurp(d / "rates.csv") ==
              "quantity,slope,n_grids\nmean_abs_err,nan,1\nmean_err_plus,nan,0\nmean_err_minus,nan,1\n");
        CHECK(slurp(d / "errors.csv").find("\n10,0.10000000000000001,1,1.5,1.3999999999999999,") !=
              std::string::npos);
        fs::remove_all(d);
    }
    SUBCASE("malformed errors.csv")
    {
        std::istringstream bad_header("n,seed\n");
        CHECK_THROWS_AS(read_errors_csv(bad_header), ConfigError);
        std::istringstream short_row("n,modulus,seed,value0,j_hat,stderr_j,v_ref,err,err_plus,err_minus\n1,2\n");
        CHECK_THROWS_AS(read_errors_csv(short_row), ConfigError);
    }
}
