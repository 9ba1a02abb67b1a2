#include "ctrlrand/fd_oracle.hpp"

#include "ctrlrand/error.hpp"
#include "ctrlrand/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace ctrlrand {

namespace {

constexpr double kMaxTimeSteps = 1e7;

} // namespace

FdConfig default_fd_config(const Problem& p, int n_space)
{
    require(p.dim_d() == 1, "fd oracle: only one-dimensional problems");
    const double x0 = p.x0()[0];
    double smax = 0.0;
    double sig = 0.0;
    for (std::size_t j = 0; j < p.grid().size(); ++j) {
        p.diffusion(p.x0(), p.grid().point(j), MutVec(&sig, 1));
        smax = std::max(smax, std::abs(sig));
    }
    const double half = std::max(5.0 * smax * std::sqrt(p.horizon()), 1e-3 * (1.0 + std::abs(x0)));
    FdConfig cfg;
    cfg.x_lo = x0 - half;
    cfg.x_hi = x0 + half;
    cfg.n_space = n_space;
    return cfg;
}

FdSolution::FdSolution(std::vector<double> x, std::vector<double> v, int n_time)
    : x_(std::move(x)), v_(std::move(v)), n_time_(n_time)
{}

double FdSolution::operator()(double x) const
{
    require(x >= x_.front() && x <= x_.back(), "fd solution: point outside the spatial domain");
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - x_.begin()), x_.size() - 1);
    const std::size_t lo = i - 1;
    const double w = (x - x_[lo]) / (x_[i] - x_[lo]);
    return (1.0 - w) * v_[lo] + w * v_[i];
}

FdSolution solve_hjb_fd(const Problem& problem, const FdConfig& cfg)
{
    require(problem.dim_d() == 1, "fd oracle: only one-dimensional problems");
    require(cfg.n_space >= 3, "fd oracle: n_space must be >= 3");
    require(cfg.x_lo < problem.x0()[0] && problem.x0()[0] < cfg.x_hi, "fd oracle: x0 outside (x_lo, x_hi)");

    const Problem p = cfg.control_points > 0
                          ? problem.with_controls(ControlSet{problem.controls().lower,
                                                             problem.controls().upper, cfg.control_points})
                          : problem;
    const ControlGrid& cg = p.grid();
    const std::size_t na = cg.size();
    const std::size_t nx = static_cast<std::size_t>(cfg.n_space) + 1;
    const double dx = (cfg.x_hi - cfg.x_lo) / cfg.n_space;
    const double T = p.horizon();

    std::vector<double> xs(nx);
    for (std::size_t i = 0; i < nx; ++i) {
        xs[i] = cfg.x_lo + dx * static_cast<double>(i);
    }
    xs.back() = cfg.x_hi;

    // time-homogeneous coefficients, stored per (node, control)
    std::vector<double> up(nx * na), down(nx * na), drive(nx * na);
    double max_s2 = 0.0, max_b = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < na; ++j) {
            double b = 0.0, sig = 0.0;
            const ConstVec x(&xs[i], 1);
            p.drift(x, cg.point(j), MutVec(&b, 1));
            p.diffusion(x, cg.point(j), MutVec(&sig, 1));
            const double s2 = sig * sig;
            if (!std::isfinite(b) || !std::isfinite(s2)) {
                throw NumericalError("fd oracle: non-finite coefficient at x = " + g17(xs[i]));
            }
            max_s2 = std::max(max_s2, s2);
            max_b = std::max(max_b, std::abs(b));
            const double diff = 0.5 * s2 / (dx * dx);
            if (s2 >= dx * std::abs(b)) {
                up[i * na + j] = diff + 0.5 * b / dx;
                down[i * na + j] = diff - 0.5 * b / dx;
            } else {
                up[i * na + j] = diff + std::max(b, 0.0) / dx;
                down[i * na + j] = diff + std::max(-b, 0.0) / dx;
            }
            drive[i * na + j] = p.f_depends_on_y() ? 0.0 : p.driver(x, cg.point(j), 0.0);
        }
    }

    const double rate = max_s2 + dx * max_b;
    const double dt_max = rate > 0.0 ? dx * dx / rate : T;
    const double needed = std::ceil(T / dt_max * (1.0 + 1e-12));
    if (needed > kMaxTimeSteps || static_cast<double>(cfg.n_time) > kMaxTimeSteps) {
        throw NumericalError("domain too stiff: " + g17(needed) + " time steps needed");
    }
    const int n_time = std::max({cfg.n_time, static_cast<int>(needed), 1});
    const double dt = T / n_time;

    std::vector<double> v(nx), next(nx);
    for (std::size_t i = 0; i < nx; ++i) {
        v[i] = p.terminal(ConstVec(&xs[i], 1));
    }
    const double g_lo = v.front();
    const double g_hi = v.back();

    for (int step = 0; step < n_time; ++step) {
        for_each_index(cfg.exec, nx - 2, [&](std::size_t idx) {
            const std::size_t i = idx + 1;
            const double vi = v[i];
            const double dp = v[i + 1] - vi;
            const double dm = v[i - 1] - vi;
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < na; ++j) {
                const std::size_t c = i * na + j;
                double h = up[c] * dp + down[c] * dm;
                h += p.f_depends_on_y() ? p.driver(ConstVec(&xs[i], 1), cg.point(j), vi) : drive[c];
                best = std::max(best, h);
            }
            next[i] = vi + dt * best;
        });
        if (cfg.boundary == FdBoundary::dirichlet_payoff) {
            next.front() = g_lo;
            next.back() = g_hi;
        } else {
            next.front() = 2.0 * next[1] - next[2];
            next.back() = 2.0 * next[nx - 2] - next[nx - 3];
        }
        std::swap(v, next);
    }
    return {std::move(xs), std::move(v), n_time};
}

void write_fd_csv(const FdSolution& sol, std::ostream& os)
{
    os << "x,v\n";
    for (std::size_t i = 0; i < sol.x().size(); ++i) {
        os << g17(sol.x()[i]) << ',' << g17(sol.v()[i]) << '\n';
    }
}

void LqParams::validate() const
{
    require(c_a > 0.0, "lq: c_a must be positive");
    require(c_x >= 0.0 && c_g >= 0.0, "lq: c_x and c_g must be >= 0");
    require(s >= 0.0, "lq: s must be >= 0");
    require(a_max > 0.0, "lq: a_max must be positive");
    require(T > 0.0, "lq: T must be positive");
    const double x_range = std::abs(x0) + 3.0 * s * std::sqrt(T);
    const int steps = 1000;
    double pmax = 0.0;
    for (int i = 0; i <= steps; ++i) {
        pmax = std::max(pmax, std::abs(riccati_p(*this, T * i / steps, 2000)));
    }
    require(pmax * x_range / c_a <= a_max,
            "lq: box constraint |a| <= a_max is active on the probed range; closed form invalid");
}

namespace {

struct Pr {
    double p, r;
};

Pr rk4_backward(const LqParams& lq, double t_end, int steps)
{
    auto rhs = [&](Pr y) {
        return Pr{-2.0 * lq.beta * y.p + y.p * y.p / lq.c_a - lq.c_x, -lq.s * lq.s * y.p};
    };
    Pr y{lq.c_g, 0.0};
    const double h = (lq.T - t_end) / steps;
    for (int i = 0; i < steps; ++i) {
        // integrate dy/dt backward: y(t - h) = y(t) - h * RK4 slope
        const Pr k1 = rhs(y);
        const Pr k2 = rhs({y.p - 0.5 * h * k1.p, y.r - 0.5 * h * k1.r});
        const Pr k3 = rhs({y.p - 0.5 * h * k2.p, y.r - 0.5 * h * k2.r});
        const Pr k4 = rhs({y.p - h * k3.p, y.r - h * k3.r});
        y.p -= h / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
        y.r -= h / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r);
        if (!(std::abs(y.p) <= 1e8)) {
            throw NumericalError("Riccati blow-up: |P| > 1e8");
        }
    }
    return y;
}

} // namespace

double riccati_p(const LqParams& lq, double t, int steps)
{
    require(t >= 0.0 && t <= lq.T, "riccati: time outside [0, T]");
    if (t == lq.T) {
        return lq.c_g;
    }
    return rk4_backward(lq, t, steps).p;
}

RiccatiSolution solve_riccati(const LqParams& lq, int steps)
{
    require(lq.c_a > 0.0 && lq.T > 0.0 && steps >= 1, "riccati: invalid parameters");
    const Pr y = rk4_backward(lq, 0.0, steps);
    return {y.p, y.r, lq.c_a};
}

double riccati_value(const LqParams& lq, double x)
{
    lq.validate();
    return solve_riccati(lq).value(x);
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double black_scholes_call(double x0, double K, double sigma, double T)
{
    require(x0 > 0.0 && K > 0.0 && sigma > 0.0 && T > 0.0, "black-scholes: invalid parameters");
    const double sd = sigma * std::sqrt(T);
    const double d1 = (std::log(x0 / K) + 0.5 * sd * sd) / sd;
    return x0 * normal_cdf(d1) - K * normal_cdf(d1 - sd);
}

double bsb_reference(double x0, double K, double sigma_lo, double sigma_hi, double T)
{
    require(sigma_lo > 0.0 && sigma_lo <= sigma_hi, "bsb: need 0 < sigma_lo <= sigma_hi");
    require(x0 > 0.0 && K > 0.0 && T > 0.0, "bsb: x0, K, T must be positive");
    return black_scholes_call(x0, K, sigma_hi, T);
}

} // namespace ctrlrand
