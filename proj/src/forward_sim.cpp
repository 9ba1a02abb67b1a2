#include "ctrlrand/forward_sim.hpp"

#include "ctrlrand/error.hpp"
#include "ctrlrand/format.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

namespace ctrlrand {

std::uint32_t RegimePath::at(double t) const
{
    // last jump with T_m <= t
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) {
        return i0;
    }
    return marks[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

RegimePath sample_regime_path(const IntensityMeasure& im, double T, std::uint32_t i0, PathRng& rng)
{
    require(T > 0.0, "sample_regime_path: T must be positive");
    RegimePath rp;
    rp.i0 = i0;
    std::exponential_distribution<double> wait(im.total_mass());
    double t = wait(rng);
    while (t <= T) {
        rp.jump_times.push_back(t);
        rp.marks.push_back(static_cast<std::uint32_t>(im.sample_mark(rng.uniform())));
        t += wait(rng);
    }
    return rp;
}

std::vector<std::uint32_t> regime_at_grid(const RegimePath& rp, const TimeGrid& grid)
{
    std::vector<std::uint32_t> out(grid.steps() + 1);
    std::size_t m = 0;
    std::uint32_t current = rp.i0;
    for (std::size_t k = 0; k <= grid.steps(); ++k) {
        while (m < rp.jump_times.size() && rp.jump_times[m] <= grid.time(k)) {
            current = rp.marks[m++];
        }
        out[k] = current;
    }
    return out;
}

PathBundle::PathBundle(std::size_t n_paths, TimeGrid grid, int dim_d, ControlGrid controls,
                       std::uint64_t seed)
    : n_paths_(n_paths), grid_(std::move(grid)), d_(dim_d), controls_(std::move(controls)), seed_(seed)
{
    require(n_paths >= 1, "path bundle: n_paths must be >= 1");
    const std::size_t n = grid_.steps();
    x_.assign((n + 1) * n_paths * d_, 0.0);
    regime_.assign((n + 1) * n_paths, 0);
    dw_.assign(n * n_paths * d_, 0.0);
}

std::size_t PathBundle::bytes_for(std::size_t n_paths, std::size_t steps, int dim_d)
{
    const std::size_t d = static_cast<std::size_t>(dim_d);
    return n_paths * ((steps + 1) * d * sizeof(double) + (steps + 1) * sizeof(std::uint32_t) +
                      steps * d * sizeof(double));
}

namespace {

[[noreturn]] void non_finite(std::size_t path, std::size_t k, ConstVec x)
{
    std::ostringstream os;
    os << "non-finite coefficient evaluation on path " << path << " at step " << k << ", state (";
    for (std::size_t i = 0; i < x.size(); ++i) {
        os << (i ? ", " : "") << g17(x[i]);
    }
    os << ")";
    throw NumericalError(os.str());
}

/// x_next = x + b(x, a) dt + sigma(x, a) dw
void euler_step(const Problem& p, ConstVec x, ConstVec a, double dt, ConstVec dw, MutVec x_next,
                MutVec b, MutVec sig, std::size_t path, std::size_t k)
{
    const std::size_t d = x.size();
    p.drift(x, a, b);
    p.diffusion(x, a, sig);
    for (std::size_t i = 0; i < d; ++i) {
        double v = x[i] + b[i] * dt;
        for (std::size_t j = 0; j < d; ++j) {
            v += sig[i * d + j] * dw[j];
        }
        if (!std::isfinite(v)) {
            non_finite(path, k, x);
        }
        x_next[i] = v;
    }
}

} // namespace

PathGenerator::PathGenerator(const Problem& p, const TimeGrid& grid, const IntensityMeasure& im,
                             std::uint64_t seed, InitialRegime init)
    : problem_(p), grid_(grid), im_(im), seed_(seed), init_(init)
{
    require(im.size() == p.grid().size(), "intensity measure size does not match the control grid");
    check_grid_for(grid, p);
}

void PathGenerator::generate(std::size_t path, std::size_t last, MutVec x,
                             std::span<std::uint32_t> regimes, MutVec dw) const
{
    const std::size_t d = static_cast<std::size_t>(problem_.dim_d());
    PathRng regime_rng(seed_, path, StreamTag::regime);
    std::uint32_t i0 = static_cast<std::uint32_t>(problem_.i0_index());
    if (init_ == InitialRegime::from_mark_law) {
        i0 = static_cast<std::uint32_t>(im_.sample_mark(regime_rng.uniform()));
    }
    const RegimePath rp = sample_regime_path(im_, grid_.horizon(), i0, regime_rng);
    std::size_t m = 0;
    std::uint32_t current = rp.i0;
    for (std::size_t k = 0; k <= last; ++k) {
        while (m < rp.jump_times.size() && rp.jump_times[m] <= grid_.time(k)) {
            current = rp.marks[m++];
        }
        regimes[k] = current;
    }

    PathRng bm_rng(seed_, path, StreamTag::brownian);
    std::normal_distribution<double> normal;
    std::vector<double> b(d), sig(d * d);
    std::copy(problem_.x0().begin(), problem_.x0().end(), x.begin());
    for (std::size_t k = 0; k < last; ++k) {
        const double dt = grid_.dt(k);
        const double sq = std::sqrt(dt);
        MutVec dwk = dw.subspan(k * d, d);
        for (std::size_t j = 0; j < d; ++j) {
            dwk[j] = sq * normal(bm_rng);
        }
        euler_step(problem_, x.subspan(k * d, d), problem_.grid().point(regimes[k]), dt, dwk,
                   x.subspan((k + 1) * d, d), b, sig, path, k);
    }
}

PathBundle simulate_forward(const Problem& p, const TimeGrid& grid, const IntensityMeasure& im,
                            std::size_t n_paths, std::uint64_t seed, const SimOptions& opts)
{
    const PathGenerator gen(p, grid, im, seed, opts.initial_regime);
    PathBundle bundle(n_paths, grid, p.dim_d(), p.grid(), seed);
    const std::size_t n = grid.steps();
    const std::size_t d = static_cast<std::size_t>(p.dim_d());

    for_each_index(opts.exec, n_paths, [&](std::size_t path) {
        std::vector<double> x((n + 1) * d), dw(n * d);
        std::vector<std::uint32_t> reg(n + 1);
        gen.generate(path, n, x, reg, dw);
        for (std::size_t k = 0; k <= n; ++k) {
            std::copy_n(&x[k * d], d, bundle.x(k, path).begin());
            bundle.regime(k, path) = reg[k];
            if (k < n) {
                std::copy_n(&dw[k * d], d, bundle.dw(k, path).begin());
            }
        }
    });
    return bundle;
}

ConstantRule::ConstantRule(ControlGrid controls, std::size_t index)
    : controls_(std::move(controls)), index_(index)
{
    require(index_ < controls_.size(), "constant rule: control index out of range");
}

void simulate_controlled_path(const Problem& p, const TimeGrid& grid, const FeedbackRule& rule,
                              std::uint64_t seed, std::size_t path, MutVec x,
                              std::span<std::uint32_t> controls, MutVec dw_out)
{
    const std::size_t n = grid.steps();
    const std::size_t d = static_cast<std::size_t>(p.dim_d());
    const ControlGrid& cg = rule.controls();
    PathRng bm_rng(seed, path, StreamTag::brownian);
    std::normal_distribution<double> normal;
    std::vector<double> b(d), sig(d * d), dw(d);
    std::copy(p.x0().begin(), p.x0().end(), x.begin());
    for (std::size_t k = 0; k < n; ++k) {
        const double dt = grid.dt(k);
        const double sq = std::sqrt(dt);
        for (std::size_t j = 0; j < d; ++j) {
            dw[j] = sq * normal(bm_rng);
        }
        const ConstVec xk = x.subspan(k * d, d);
        const std::size_t a = rule.control_index(k, xk);
        controls[k] = static_cast<std::uint32_t>(a);
        if (!dw_out.empty()) {
            std::copy_n(dw.begin(), d, dw_out.begin() + static_cast<std::ptrdiff_t>(k * d));
        }
        euler_step(p, xk, cg.point(a), dt, dw, x.subspan((k + 1) * d, d), b, sig, path, k);
    }
    controls[n] = n > 0 ? controls[n - 1] : 0;
}

PathBundle simulate_controlled(const Problem& p, const TimeGrid& grid, const FeedbackRule& rule,
                               std::size_t n_paths, std::uint64_t seed, const Execution& exec)
{
    check_grid_for(grid, p);
    require(rule.controls().dim() == p.dim_q(), "feedback rule control dimension mismatch");
    PathBundle bundle(n_paths, grid, p.dim_d(), rule.controls(), seed);
    const std::size_t n = grid.steps();
    const std::size_t d = static_cast<std::size_t>(p.dim_d());

    for_each_index(exec, n_paths, [&](std::size_t path) {
        std::vector<double> x((n + 1) * d);
        std::vector<double> dw(n * d);
        std::vector<std::uint32_t> ctl(n + 1);
        simulate_controlled_path(p, grid, rule, seed, path, x, ctl, dw);
        for (std::size_t k = 0; k <= n; ++k) {
            std::copy_n(&x[k * d], d, bundle.x(k, path).begin());
            bundle.regime(k, path) = ctl[k];
            if (k < n) {
                std::copy_n(&dw[k * d], d, bundle.dw(k, path).begin());
            }
        }
    });
    return bundle;
}

void write_bundle_csv(const PathBundle& bundle, std::ostream& os)
{
    const int d = bundle.dim_d();
    const int q = bundle.controls().dim();
    os << "path,k,t";
    for (int i = 0; i < d; ++i) {
        os << ",x" << i;
    }
    for (int i = 0; i < q; ++i) {
        os << ",a" << i;
    }
    os << '\n';
    for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
        for (std::size_t k = 0; k <= bundle.steps(); ++k) {
            os << p << ',' << k << ',' << g17(bundle.grid().time(k));
            for (double v : bundle.x(k, p)) {
                os << ',' << g17(v);
            }
            for (double v : bundle.regime_point(k, p)) {
                os << ',' << g17(v);
            }
            os << '\n';
        }
    }
}

} // namespace ctrlrand
