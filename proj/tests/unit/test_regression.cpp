#include "ctrlrand/regression.hpp"
#include "ctrlrand/error.hpp"
#include "ctrlrand/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

using namespace ctrlrand;

namespace {

struct Sample {
    std::vector<double> x, a, y;
    std::vector<std::uint32_t> idx;
};

/// x ~ N(0,1), a uniform over the grid points, y = fn(x, a).
template <class Fn>
Sample draw(const ControlGrid& g, std::size_t n, std::uint64_t seed, Fn fn)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<std::size_t> ud(0, g.size() - 1);
    Sample s;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = nd(rng);
        const std::size_t j = ud(rng);
        s.x.push_back(x);
        s.a.push_back(g.point(j)[0]);
        s.idx.push_back(static_cast<std::uint32_t>(j));
        s.y.push_back(fn(x, g.point(j)[0]));
    }
    return s;
}

/// Dense Gaussian elimination with partial pivoting on the normal equations.
std::vector<double> normal_equations(const std::vector<std::vector<double>>& rows, const std::vector<double>& y)
{
    const std::size_t m = rows.front().size();
    std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                a[i][j] += rows[r][i] * rows[r][j];
            }
            a[i][m] += rows[r][i] * y[r];
        }
    }
    for (std::size_t c = 0; c < m; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < m; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) {
                piv = r;
            }
        }
        std::swap(a[c], a[piv]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r != c) {
                const double f = a[r][c] / a[c][c];
                for (std::size_t j = c; j <= m; ++j) {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        out[i] = a[i][m] / a[i][i];
    }
    return out;
}

double ipow(double z, int e)
{
    double v = 1.0;
    for (int i = 0; i < e; ++i) {
        v *= z;
    }
    return v;
}

const BasisSpec xa11{BasisKind::poly_xa, 1, 1};

} // namespace

TEST_CASE("basis sizes")
{
    CHECK(basis_size({BasisKind::poly_x_per_a, 2, 0}, 1, 1) == 3);
    CHECK(basis_size({BasisKind::poly_xa, 2, 1}, 1, 1) == 6);
    CHECK(basis_size({BasisKind::poly_xa, 2, 2}, 2, 1) == 18);
    CHECK(basis_size({BasisKind::poly_x_per_a, 0, 0}, 3, 2) == 1);
    const Monomials m(2, 2);
    CHECK(m.size() == 6);
    // graded order: total degree never decreases
    int prev = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const int deg = m.exponent(i)[0] + m.exponent(i)[1];
        CHECK(deg >= prev);
        prev = deg;
    }
}

TEST_CASE("affine scaling maps the sample range onto [-1, 1]")
{
    const std::vector<double> s{2.0, 10.0, 4.0, 10.0, 6.0, 10.0};
    const AffineScaling sc = AffineScaling::fit(s, 2);
    CHECK(sc.apply(0, 2.0) == doctest::Approx(-1.0));
    CHECK(sc.apply(0, 6.0) == doctest::Approx(1.0));
    CHECK(sc.half_width[1] == 1.0);
    CHECK(sc.apply(1, 10.0) == 0.0);
}

TEST_CASE("constant targets")
{
    const ControlGrid g = control_grid(ControlSet::interval(-1.0, 1.0, 5));
    for (const BasisSpec spec : {BasisSpec{BasisKind::poly_xa, 2, 2}, BasisSpec{BasisKind::poly_x_per_a, 2, 0}}) {
        const Sample s = draw(g, 400, 1, [](double, double) { return 3.25; });
        const RegressionModel m = fit(spec, g, s.x, 1, s.a, s.y);
        for (double x : {-3.0, -0.4, 0.0, 1.7}) {
            for (std::size_t j = 0; j < g.size(); ++j) {
                CHECK(m.predict_at(std::vector<double>{x}, j) == doctest::Approx(3.25).epsilon(1e-12));
            }
        }
        const Sample z = draw(g, 400, 2, [](double, double) { return 0.0; });
        const RegressionModel m0 = fit(spec, g, z.x, 1, z.a, z.y);
        CHECK(m0.predict(std::vector<double>{0.3}, g.point(1)) == doctest::Approx(0.0));
    }
}

TEST_CASE("targets in the span are reproduced and recover exact coefficients")
{
    const ControlGrid g = control_grid(ControlSet::interval(-1.0, 1.0, 11));
    const Sample s = draw(g, 100, 3, [](double x, double a) { return 2.0 + 3.0 * x - a; });
    const RegressionModel m = fit(xa11, g, s.x, 1, s.a, s.y);
    double worst = 0.0;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
        const double p = m.predict(std::vector<double>{s.x[i]}, std::vector<double>{s.a[i]});
        worst = std::max(worst, std::abs(p - s.y[i]));
    }
    CHECK(worst <= 1e-8);
    CHECK(m.predict(std::vector<double>{1.0}, std::vector<double>{0.5}) == doctest::Approx(4.5).epsilon(1e-10));
    CHECK_FALSE(m.ridge_used());
    CHECK(m.sample_size() == 100);

    SUBCASE("argmax of 2 + 3x - a is the lower endpoint")
    {
        const ControlChoice c = argmax_over_controls(m, std::vector<double>{0.0}, g);
        CHECK(c.index == 0);
        CHECK(c.value == doctest::Approx(3.0).epsilon(1e-10));
    }
}

TEST_CASE("coefficients match brute-force normal equations")
{
    const ControlGrid g = control_grid(ControlSet::interval(-2.0, 2.0, 9));
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nd;
    const Sample s = draw(g, 50, 4, [&](double x, double a) { return std::sin(x) + a * x + 0.3 * nd(rng); });
    const BasisSpec spec{BasisKind::poly_xa, 2, 1};
    const RegressionModel m = fit(spec, g, s.x, 1, s.a, s.y);

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
        const double zx = m.x_scaling().apply(0, s.x[i]);
        const double za = m.a_scaling().apply(0, s.a[i]);
        std::vector<double> row;
        for (int ex = 0; ex <= 2; ++ex) {
            for (int ea = 0; ea <= 1; ++ea) {
                row.push_back(ipow(zx, ex) * ipow(za, ea));
            }
        }
        rows.push_back(row);
    }
    const std::vector<double> oracle = normal_equations(rows, s.y);
    const auto& c = m.coefficients();
    REQUIRE(c.size() == oracle.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(c[i] == doctest::Approx(oracle[i]).epsilon(1e-6));
    }
}

TEST_CASE("poly_x_per_a slices are independent")
{
    const ControlGrid g = control_grid(ControlSet::interval(0.0, 1.0, 3));
    const Sample s = draw(g, 300, 5, [](double x, double a) { return x * x + a; });
    const BasisSpec spec{BasisKind::poly_x_per_a, 2, 0};
    const RegressionModel m = fit(spec, g, s.x, 1, s.a, s.y);
    CHECK(m.slices() == 3);
    const std::vector<double> x{0.7};
    const double before = m.predict(x, g.point(1));
    const RegressionModel changed = m.with_coefficients(0, {5.0, -1.0, 2.0}).with_coefficients(2, {0.0, 0.0, 0.0});
    CHECK(changed.predict(x, g.point(1)) == before);
    CHECK(changed.predict(x, g.point(2)) == 0.0);
    CHECK(before == doctest::Approx(0.49 + 0.5).epsilon(1e-10));

    CHECK_THROWS_WITH_AS(m.predict(x, std::vector<double>{0.25}), "regime not in control grid", ConfigError);
}

TEST_CASE("argmax over a concave surface in a")
{
    const ControlGrid g(1, {-1.0, 0.0, 0.5, 1.0});
    std::vector<double> xs, as, ys;
    for (int i = 0; i < 40; ++i) {
        const double a = g.point(static_cast<std::size_t>(i % 4))[0];
        xs.push_back(0.1 * i);
        as.push_back(a);
        ys.push_back(-(a - 0.3) * (a - 0.3));
    }
    const RegressionModel m = fit({BasisKind::poly_xa, 0, 2}, g, xs, 1, as, ys);
    const ControlChoice c = argmax_over_controls(m, std::vector<double>{1.0}, g);
    CHECK(g.point(c.index)[0] == 0.5);
    CHECK(c.value == doctest::Approx(-0.04).epsilon(1e-10));

    SUBCASE("increasing affine maps keep the maximizer")
    {
        for (auto [alpha, beta] : {std::pair{2.0, 5.0}, std::pair{0.01, -3.0}, std::pair{100.0, 0.0}}) {
            std::vector<double> y2;
            for (double y : ys) {
                y2.push_back(alpha * y + beta);
            }
            const RegressionModel m2 = fit({BasisKind::poly_xa, 0, 2}, g, xs, 1, as, y2);
            CHECK(argmax_over_controls(m2, std::vector<double>{1.0}, g).index == c.index);
        }
    }
}

TEST_CASE("ties go to the first grid point")
{
    const ControlGrid g = control_grid(ControlSet::interval(-1.0, 1.0, 7));
    const Sample s = draw(g, 200, 6, [](double, double) { return -2.0; });
    for (const BasisSpec spec : {BasisSpec{BasisKind::poly_xa, 1, 2}, BasisSpec{BasisKind::poly_x_per_a, 1, 0}}) {
        const RegressionModel m = fit(spec, g, s.x, 1, s.a, s.y);
        const RegressionModel exact =
            spec.kind == BasisKind::poly_xa
                ? m.with_coefficients(0, [&] {
                      std::vector<double> c(m.coefficients().size(), 0.0);
                      c[0] = -2.0;
                      return c;
                  }())
                : m;
        const ControlChoice c = argmax_over_controls(exact, std::vector<double>{0.4}, g);
        CHECK(c.value == doctest::Approx(-2.0));
        if (spec.kind == BasisKind::poly_xa) {
            CHECK(c.index == 0);
        }
    }
    // exact ties on poly_x_per_a
    const RegressionModel per = fit({BasisKind::poly_x_per_a, 0, 0}, g, s.x, 1, s.a, s.y);
    RegressionModel tied = per;
    for (std::size_t j = 0; j < g.size(); ++j) {
        tied = tied.with_coefficients(j, {1.5});
    }
    CHECK(tied.argmax(std::vector<double>{0.0}).index == 0);
}

TEST_CASE("shift equivariance")
{
    const ControlGrid g = control_grid(ControlSet::interval(-1.0, 1.0, 5));
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    const Sample s = draw(g, 500, 9, [&](double x, double a) { return std::exp(0.3 * x) * (1 + a) + nd(rng); });
    std::vector<double> shifted(s.y);
    for (double& v : shifted) {
        v += 12.5;
    }
    for (const BasisSpec spec : {BasisSpec{BasisKind::poly_xa, 3, 2}, BasisSpec{BasisKind::poly_x_per_a, 3, 0}}) {
        const RegressionModel m = fit(spec, g, s.x, 1, s.a, s.y);
        const RegressionModel ms = fit(spec, g, s.x, 1, s.a, shifted);
        for (double x : {-2.0, 0.0, 0.5, 2.2}) {
            for (std::size_t j = 0; j < g.size(); ++j) {
                const std::vector<double> xv{x};
                CHECK(std::abs(ms.predict_at(xv, j) - m.predict_at(xv, j) - 12.5) <= 1e-10);
            }
        }
    }
}

TEST_CASE("fit errors")
{
    const ControlGrid g = control_grid(ControlSet::interval(-1.0, 1.0, 3));
    const std::vector<double> xs{0.0, 1.0, 2.0};
    const std::vector<double> as{-1.0, 0.0, 1.0};
    SUBCASE("underdetermined")
    {
        const std::vector<double> y{1.0, 2.0, 3.0};
        CHECK_THROWS_WITH_AS(fit({BasisKind::poly_xa, 2, 1}, g, xs, 1, as, y),
                             doctest::Contains("underdetermined regression"), NumericalError);
        CHECK_THROWS_WITH_AS(fit({BasisKind::poly_x_per_a, 1, 0}, g, xs, 1, as, y),
                             doctest::Contains("underdetermined regression"), NumericalError);
    }
    SUBCASE("non-finite target names the sample")
    {
        const std::vector<double> y{1.0, NAN, 3.0};
        CHECK_THROWS_WITH_AS(fit({BasisKind::poly_xa, 0, 0}, g, xs, 1, as, y), doctest::Contains("sample 1"),
                             NumericalError);
    }
    SUBCASE("off-grid regime for slices")
    {
        const std::vector<double> y{1.0, 2.0, 3.0};
        const std::vector<double> off{-1.0, 0.3, 1.0};
        CHECK_THROWS_WITH_AS(fit({BasisKind::poly_x_per_a, 0, 0}, g, xs, 1, off, y),
                             doctest::Contains("regime not in control grid"), ConfigError);
    }
}

TEST_CASE("degenerate sample triggers the ridge fallback")
{
    const ControlGrid g = control_grid(ControlSet::interval(0.0, 0.0, 1));
    const std::vector<double> xs(100, 1.0), as(100, 0.0), y(100, 2.0);
    std::vector<double> xs2(xs);
    for (std::size_t i = 0; i < xs2.size(); ++i) {
        xs2[i] = 1.0 + 1e-9 * static_cast<double>(i % 2);
    }
    const RegressionModel m = fit({BasisKind::poly_x_per_a, 3, 0}, g, xs2, 1, as, y);
    CHECK(m.ridge_used());
    CHECK(m.condition_estimate() > 1e8);
    CHECK(m.predict(std::vector<double>{1.0}, std::vector<double>{0.0}) == doctest::Approx(2.0).epsilon(1e-6));
    const RegressionModel constant_x = fit({BasisKind::poly_x_per_a, 2, 0}, g, xs, 1, as, y);
    CHECK(std::isfinite(constant_x.predict(std::vector<double>{1.0}, std::vector<double>{0.0})));
}

TEST_CASE("serial and parallel fits agree bit for bit")
{
    const ControlGrid g = control_grid(ControlSet::interval(-1.0, 1.0, 5));
    const Sample s = draw(g, 5000, 10, [](double x, double a) { return std::cos(x) * a; });
    for (const BasisSpec spec : {BasisSpec{BasisKind::poly_xa, 3, 2}, BasisSpec{BasisKind::poly_x_per_a, 3, 0}}) {
        const RegressionModel a = fit(spec, g, s.x, 1, s.a, s.y, Execution::serial());
        const RegressionModel b = fit(spec, g, s.x, 1, s.a, s.y, Execution::parallel(3));
        for (std::size_t k = 0; k < a.slices(); ++k) {
            CHECK(a.coefficients(k) == b.coefficients(k));
        }
    }
}

TEST_CASE("control variates")
{
    const ControlGrid g = control_grid(ControlSet::interval(-1.0, 1.0, 3));
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    const std::size_t n = 20000;

    SUBCASE("the surface is unchanged when the noise is exactly spanned")
    {
        // y = x^2 + a + (1 + x) h: the h-term is an (x,a)-basis function times h
        Sample s = draw(g, n, 12, [](double, double) { return 0.0; });
        std::vector<double> h(n);
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = nd(rng);
            s.y[i] = s.x[i] * s.x[i] + s.a[i] + (1.0 + s.x[i]) * h[i];
        }
        const BasisSpec spec{BasisKind::poly_xa, 2, 1};
        const RegressionModel with = fit_indexed(spec, g, s.x, 1, s.idx, s.y, {}, {h, 1});
        for (double x : {-1.0, 0.0, 1.5}) {
            for (std::size_t j = 0; j < 3; ++j) {
                const double expect = x * x + g.point(j)[0];
                CHECK(std::abs(with.predict_at(std::vector<double>{x}, j) - expect) <= 1e-9);
            }
        }
        const RegressionModel without = fit_indexed(spec, g, s.x, 1, s.idx, s.y);
        CHECK(std::abs(without.predict_at(std::vector<double>{0.0}, 1)) > 1e-6);
    }
    SUBCASE("zero-mean multipliers leave the estimate unbiased")
    {
        // E[y | x, a] = 1 + x; h independent noise, y carries 2 h
        std::vector<double> est;
        for (std::uint64_t rep = 0; rep < 20; ++rep) {
            Sample s = draw(g, 2000, 100 + rep, [](double, double) { return 0.0; });
            std::vector<double> h(2000);
            for (std::size_t i = 0; i < 2000; ++i) {
                h[i] = nd(rng);
                s.y[i] = 1.0 + s.x[i] + 2.0 * h[i] + 0.1 * nd(rng);
            }
            const RegressionModel m = fit_indexed({BasisKind::poly_x_per_a, 1, 0}, g, s.x, 1, s.idx, s.y, {}, {h, 1});
            est.push_back(m.predict_at(std::vector<double>{0.5}, 1));
        }
        double mean = 0.0;
        for (double e : est) {
            mean += e;
        }
        mean /= static_cast<double>(est.size());
        CHECK(std::abs(mean - 1.5) <= 0.01);
    }
    SUBCASE("size mismatch is rejected")
    {
        const Sample s = draw(g, 100, 13, [](double x, double) { return x; });
        const std::vector<double> h(99, 0.0);
        CHECK_THROWS_AS(fit_indexed({BasisKind::poly_xa, 1, 1}, g, s.x, 1, s.idx, s.y, {}, {h, 1}), ConfigError);
    }
}
