#include "ctrlrand/fd_oracle.hpp"
#include "ctrlrand/error.hpp"
#include "ctrlrand/problems.hpp"

#include "problem_builders.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace ctrlrand;
using testing_support::scalar_problem;

namespace {

FdConfig domain(double lo, double hi, int n)
{
    FdConfig c;
    c.x_lo = lo;
    c.x_hi = hi;
    c.n_space = n;
    return c;
}

} // namespace

TEST_CASE("heat moment")
{
    const double s = 0.3;
    const Problem p = scalar_problem([](double) { return 0.0; }, [s](double) { return s; },
                                     [](double, double) { return 0.0; }, [](double x) { return x * x; }, 1.0);
    const FdSolution sol = solve_hjb_fd(p, domain(-5.0, 7.0, 400));
    CHECK(std::abs(sol(1.0) - 1.09) <= 1e-3);
    CHECK(sol.x().size() == 401);
    CHECK(sol.x().front() == -5.0);
    CHECK(sol.x().back() == 7.0);
    CHECK(sol.n_time() >= 1);
}

TEST_CASE("constants are preserved")
{
    const Problem drift_vol = scalar_problem([](double x) { return 0.5 - x; }, [](double x) { return 0.2 + 0.1 * x * x; },
                                             [](double, double) { return 1.0; }, [](double) { return 0.0; }, 0.5);
    // Dirichlet ends would pin v to g = 0; extrapolated ends keep constants
    FdConfig ext = domain(-2.0, 3.0, 200);
    ext.boundary = FdBoundary::linear_extrapolation;
    const FdSolution unit = solve_hjb_fd(drift_vol, ext);
    for (double v : unit.v()) {
        REQUIRE(std::abs(v - 1.0) <= 1e-12);
    }
    const Problem cst = scalar_problem([](double x) { return std::sin(x); }, [](double) { return 0.7; },
                                       [](double, double) { return 0.0; }, [](double) { return -2.5; }, 0.0);
    const FdSolution c = solve_hjb_fd(cst, domain(-3.0, 3.0, 150));
    for (double v : c.v()) {
        REQUIRE(v == -2.5);
    }
}

TEST_CASE("monotone in the payoff")
{
    auto solve = [](double shift) {
        const Problem p = scalar_problem([](double) { return 0.1; }, [](double) { return 0.4; },
                                         [](double, double) { return 0.0; },
                                         [shift](double x) { return std::abs(x) + shift * std::exp(-x * x); }, 0.0);
        return solve_hjb_fd(p, domain(-3.0, 3.0, 200));
    };
    const FdSolution lo = solve(0.0);
    const FdSolution hi = solve(0.3);
    for (std::size_t i = 0; i < lo.v().size(); ++i) {
        REQUIRE(hi.v()[i] >= lo.v()[i]);
    }
}

TEST_CASE("FD against Riccati")
{
    const LqParams lq{};
    const Problem p = make_lq_problem(lq, 21);
    FdConfig cfg = default_fd_config(p, 800);
    cfg.control_points = 201;
    const double fd = solve_hjb_fd(p, cfg)(lq.x0);
    CHECK(std::abs(fd - riccati_value(lq, lq.x0)) <= 1e-3);

    SUBCASE("sup dominance over frozen controls")
    {
        const FdSolution full = solve_hjb_fd(p, cfg);
        for (double a : {-1.0, 0.0, 0.6}) {
            ProblemData d = p.data();
            d.controls = ControlSet::interval(a, a, 1);
            d.i0 = {a};
            const Problem frozen(d);
            FdConfig fc = cfg;
            fc.control_points = 0;
            CHECK(full(lq.x0) >= solve_hjb_fd(frozen, fc)(lq.x0));
        }
    }
}

TEST_CASE("FD configuration errors")
{
    const Problem p = make_lq_problem(LqParams{}, 5);
    CHECK_THROWS_AS(solve_hjb_fd(p, domain(2.0, 3.0, 100)), ConfigError);
    CHECK_THROWS_AS(solve_hjb_fd(p, domain(-3.0, 3.0, 2)), ConfigError);
    CHECK_THROWS_WITH_AS(solve_hjb_fd(p, domain(-3.0, 3.0, 100000)), doctest::Contains("domain too stiff"),
                         NumericalError);
    const FdSolution sol = solve_hjb_fd(p, domain(-3.0, 3.0, 50));
    CHECK_THROWS_AS(sol(4.0), ConfigError);
    std::ostringstream os;
    write_fd_csv(sol, os);
    CHECK(os.str().rfind("x,v\n-3,", 0) == 0);
}

TEST_CASE("linear extrapolation boundary")
{
    // v(0, x) = x + mu T for g = x, b = mu: exact for the extrapolated edges too
    const Problem p = scalar_problem([](double) { return 0.2; }, [](double) { return 0.5; },
                                     [](double, double) { return 0.0; }, [](double x) { return x; }, 0.0);
    FdConfig cfg = domain(-2.0, 2.0, 100);
    cfg.boundary = FdBoundary::linear_extrapolation;
    const FdSolution sol = solve_hjb_fd(p, cfg);
    CHECK(sol(0.0) == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(sol(-2.0) == doctest::Approx(-1.8).epsilon(1e-9));
}

TEST_CASE("serial and OpenMP FD agree")
{
    const Problem p = make_lq_problem(LqParams{}, 21);
    FdConfig cfg = default_fd_config(p, 200);
    cfg.exec = Execution::serial();
    const FdSolution a = solve_hjb_fd(p, cfg);
    cfg.exec = Execution::parallel(4);
    CHECK(a.v() == solve_hjb_fd(p, cfg).v());
}

TEST_CASE("Riccati closed forms")
{
    SUBCASE("zero costs")
    {
        LqParams lq;
        lq.c_x = 0.0;
        lq.c_g = 0.0;
        for (double x : {-2.0, 0.0, 3.0}) {
            CHECK(riccati_value(lq, x) == 0.0);
        }
    }
    LqParams sep;
    sep.beta = 0.0;
    sep.c_a = 1.0;
    sep.c_x = 0.0;
    sep.c_g = 1.0;
    sep.s = 0.0;
    sep.x0 = 1.0;
    SUBCASE("separable ODE")
    {
        CHECK(riccati_value(sep, 1.0) == doctest::Approx(-0.5).epsilon(1e-10));
        for (double t : {0.0, 0.25, 0.5, 0.9}) {
            CHECK(riccati_p(sep, t) == doctest::Approx(1.0 / (2.0 - t)).epsilon(1e-10));
        }
        CHECK(solve_riccati(sep).gain() == doctest::Approx(0.5).epsilon(1e-10));
    }
    SUBCASE("noise adds the integral of P")
    {
        sep.s = 1.0;
        sep.a_max = 10.0;
        CHECK(riccati_value(sep, 1.0) == doctest::Approx(-0.5 - std::log(2.0)).epsilon(1e-10));
        CHECK(solve_riccati(sep).r0 == doctest::Approx(std::log(2.0)).epsilon(1e-10));
    }
    SUBCASE("active box constraint is rejected")
    {
        sep.a_max = 0.1;
        CHECK_THROWS_AS(riccati_value(sep, 1.0), ConfigError);
    }
    SUBCASE("blow-up is detected")
    {
        LqParams bad;
        bad.beta = 0.0;
        bad.c_a = 1.0;
        bad.c_x = 0.0;
        bad.c_g = -2.0;
        CHECK_THROWS_AS(solve_riccati(bad), NumericalError);
    }
}

TEST_CASE("Black-Scholes-Barenblatt reference")
{
    CHECK(std::abs(bsb_reference(110.0, 100.0, 1e-8, 1e-8, 1.0) - 10.0) <= 1e-6);
    const double atm = 100.0 * (normal_cdf(0.1) - normal_cdf(-0.1));
    CHECK(bsb_reference(100.0, 100.0, 0.1, 0.2, 1.0) == doctest::Approx(atm).epsilon(1e-12));
    CHECK(atm == doctest::Approx(7.965567455405798).epsilon(1e-12));
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (int i = 0; i < 10; ++i) {
        const double x0 = 100.0 * u(rng);
        const double K = 100.0 * u(rng);
        const double lo = 0.1 * u(rng);
        const double hi = lo + 0.2 * u(rng);
        const double T = u(rng);
        CHECK(bsb_reference(x0, K, lo, hi, T) >= std::max(x0 - K, 0.0));
        CHECK(bsb_reference(x0, K, lo, hi, T) == black_scholes_call(x0, K, hi, T));
    }
    CHECK_THROWS_AS(bsb_reference(100.0, 100.0, 0.3, 0.2, 1.0), ConfigError);
    CHECK_THROWS_AS(bsb_reference(-1.0, 100.0, 0.1, 0.2, 1.0), ConfigError);
    CHECK_THROWS_AS(bsb_reference(100.0, 0.0, 0.1, 0.2, 1.0), ConfigError);
}

TEST_CASE("FD on the uncertain-volatility call")
{
    const Problem p = make_bsb_problem(BsbParams{}, 21);
    FdConfig cfg = default_fd_config(p, 800);
    const double fd = solve_hjb_fd(p, cfg)(100.0);
    CHECK(std::abs(fd - bsb_reference(100.0, 100.0, 0.1, 0.2, 1.0)) <= 2e-2);
}
