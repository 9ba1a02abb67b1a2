#include "ctrlrand/backward_scheme.hpp"

#include "ctrlrand/error.hpp"
#include "ctrlrand/format.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

namespace ctrlrand {

void SchemeOptions::validate() const
{
    require(implicit_tol > 0.0, "scheme options: implicit_tol must be positive");
    require(implicit_max_iter >= 1, "scheme options: implicit_max_iter must be >= 1");
    require(basis.degree_x >= 0 && basis.degree_a >= 0, "scheme options: basis degrees must be >= 0");
}

std::size_t bundle_cap_from_env()
{
    const char* v = std::getenv("CTRLRAND_MAX_BUNDLE_MB");
    if (v == nullptr || *v == '\0') {
        return 0;
    }
    char* end = nullptr;
    const double mb = std::strtod(v, &end);
    if (end == v || !(mb > 0.0)) {
        throw ConfigError(std::string("CTRLRAND_MAX_BUNDLE_MB is not a positive number: ") + v);
    }
    return static_cast<std::size_t>(mb * 1024.0 * 1024.0);
}

namespace {

std::string describe_implicit_failure(std::size_t k, const std::vector<double>& x,
                                      const std::vector<double>& a, const std::vector<double>& it)
{
    std::ostringstream os;
    os << "implicit step did not converge at step " << k << ", x = (";
    for (std::size_t i = 0; i < x.size(); ++i) {
        os << (i ? ", " : "") << g17(x[i]);
    }
    os << "), a = (";
    for (std::size_t i = 0; i < a.size(); ++i) {
        os << (i ? ", " : "") << g17(a[i]);
    }
    os << "), last iterates:";
    for (double v : it) {
        os << ' ' << g17(v);
    }
    return os.str();
}

} // namespace

ImplicitStepError::ImplicitStepError(std::size_t k, std::vector<double> x, std::vector<double> a,
                                     std::vector<double> iterates)
    : NumericalError(describe_implicit_failure(k, x, a, iterates)),
      k_(k), x_(std::move(x)), a_(std::move(a)), iterates_(std::move(iterates))
{}

ImplicitResult solve_implicit_step(double e, ConstVec x, ConstVec a, double dt, const Problem& p,
                                   const SchemeOptions& opts, std::size_t k)
{
    if (!p.f_depends_on_y()) {
        return {e + p.driver(x, a, e) * dt, 1};
    }
    double y = e;
    for (int it = 1; it <= opts.implicit_max_iter; ++it) {
        const double next = e + p.driver(x, a, y) * dt;
        if (std::abs(next - y) <= opts.implicit_tol * (1.0 + std::abs(next))) {
            return {next, it};
        }
        if (it == opts.implicit_max_iter || !std::isfinite(next)) {
            throw ImplicitStepError(k, {x.begin(), x.end()}, {a.begin(), a.end()}, {y, next});
        }
        y = next;
    }
    throw ImplicitStepError(k, {x.begin(), x.end()}, {a.begin(), a.end()}, {y});
}

StepResult backward_step(const StepInput& in, ConstVec next_values, const Problem& p,
                         const SchemeOptions& opts)
{
    const std::size_t n_paths = in.regimes.size();
    const int d = p.dim_d();
    const ControlGrid& cg = p.grid();
    require(next_values.size() == n_paths && in.x.size() == n_paths * d,
            "backward_step: inconsistent path counts");
    for (std::size_t i = 0; i < n_paths; ++i) {
        if (!std::isfinite(next_values[i])) {
            throw NumericalError("backward step " + std::to_string(in.k) +
                                 ": non-finite continuation target on path " + std::to_string(i));
        }
    }

    auto with_step = [&](auto&& fn) {
        try {
            return fn();
        } catch (const ImplicitStepError&) {
            throw;
        } catch (const Error& e) {
            throw NumericalError("backward step " + std::to_string(in.k) + ": " + e.what());
        }
    };

    StepResult out;
    out.diagnostics.k = in.k;

    // (i) continuation surface c(x, a) ~ E[Ybar_{k+1} | X_k = x, I_k = a]
    std::vector<double> hermite;
    ControlVariates cv;
    if (opts.brownian_control_variates) {
        require(in.dw.size() == n_paths * d, "backward_step: Brownian increments required for control variates");
        const std::size_t nh = 2 * static_cast<std::size_t>(d);
        hermite.resize(n_paths * nh);
        const double inv_sd = 1.0 / std::sqrt(in.dt);
        for (std::size_t i = 0; i < n_paths; ++i) {
            for (int j = 0; j < d; ++j) {
                const double z = in.dw[i * d + j] * inv_sd;
                hermite[i * nh + 2 * j] = z;
                hermite[i * nh + 2 * j + 1] = (z * z - 1.0) / std::sqrt(2.0);
            }
        }
        cv = {hermite, nh};
    }
    const RegressionModel cont = with_step(
        [&] { return fit_indexed(opts.basis, cg, in.x, d, in.regimes, next_values, opts.exec, cv); });
    out.diagnostics.continuation_condition = cont.condition_estimate();

    // (ii) implicit driver step per path, then re-regress in (x, a)
    std::vector<double> ycal(n_paths);
    std::vector<int> iters(n_paths, 0);
    with_step([&] {
        for_each_index(opts.exec, n_paths, [&](std::size_t i) {
            const ConstVec x = in.x.subspan(i * d, d);
            const std::size_t a = in.regimes[i];
            const double e = cont.predict_at(x, a);
            const ImplicitResult r = solve_implicit_step(e, x, cg.point(a), in.dt, p, opts, in.k);
            ycal[i] = r.y;
            iters[i] = r.iterations;
        });
        return 0;
    });
    out.diagnostics.max_implicit_iterations = *std::max_element(iters.begin(), iters.end());
    out.theta = std::make_shared<const RegressionModel>(
        with_step([&] { return fit_indexed(opts.basis, cg, in.x, d, in.regimes, ycal, opts.exec); }));
    out.diagnostics.theta_condition = out.theta->condition_estimate();
    out.diagnostics.ridge = cont.ridge_used() || out.theta->ridge_used();

    // (iii) Ybar_k = max_a theta_k(X_k, a)
    out.values.resize(n_paths);
    out.argmax_control.resize(n_paths);
    const RegressionModel& theta = *out.theta;
    for_each_index(opts.exec, n_paths, [&](std::size_t i) {
        const ControlChoice c = theta.argmax(in.x.subspan(i * d, d));
        out.values[i] = c.value;
        out.argmax_control[i] = static_cast<std::uint32_t>(c.index);
    });
    const auto [lo, hi] = std::minmax_element(out.values.begin(), out.values.end());
    out.diagnostics.min_value = *lo;
    out.diagnostics.max_value = *hi;

    // (iv) Zbar_k component-wise
    if (opts.compute_z) {
        require(in.dw.size() == n_paths * d, "backward_step: Brownian increments required for Z");
        std::vector<double> target(n_paths);
        for (int j = 0; j < d; ++j) {
            for (std::size_t i = 0; i < n_paths; ++i) {
                target[i] = next_values[i] * in.dw[i * d + j] / in.dt;
            }
            out.z.push_back(with_step(
                [&] { return fit_indexed(opts.basis, cg, in.x, d, in.regimes, target, opts.exec); }));
        }
    }
    return out;
}

StepResult backward_step(std::size_t k, const PathBundle& bundle, ConstVec next_values, const Problem& p,
                         const SchemeOptions& opts)
{
    require(k < bundle.steps(), "backward_step: step index out of range");
    StepInput in{k, bundle.grid().dt(k), bundle.x_slice(k), bundle.regime_slice(k), bundle.dw_slice(k)};
    return backward_step(in, next_values, p, opts);
}

namespace {

/// Supplies step slices either from a stored bundle or by regenerating paths.
class StepSource {
public:
    StepSource(const Problem& p, const TimeGrid& grid, const IntensityMeasure& im, std::size_t n_paths,
               std::uint64_t seed, const SchemeOptions& opts, bool streamed)
        : p_(p), grid_(grid), n_paths_(n_paths), exec_(opts.exec), streamed_(streamed),
          gen_(p, grid, im, seed, opts.initial_regime)
    {
        if (!streamed_) {
            bundle_.emplace(simulate_forward(p, grid, im, n_paths, seed, {opts.initial_regime, opts.exec}));
        }
    }

    std::vector<double> terminal_values() const
    {
        const std::size_t n = grid_.steps();
        const std::size_t d = static_cast<std::size_t>(p_.dim_d());
        std::vector<double> out(n_paths_);
        if (bundle_) {
            for_each_index(exec_, n_paths_, [&](std::size_t i) { out[i] = p_.terminal(bundle_->x(n, i)); });
            return out;
        }
        for_each_index(exec_, n_paths_, [&](std::size_t i) {
            std::vector<double> x((n + 1) * d), dw(n * d);
            std::vector<std::uint32_t> reg(n + 1);
            gen_.generate(i, n, x, reg, dw);
            out[i] = p_.terminal(ConstVec(x).subspan(n * d, d));
        });
        return out;
    }

    /// Fills the slice buffers for step k and returns a view on them.
    StepInput slice(std::size_t k)
    {
        if (bundle_) {
            return {k, grid_.dt(k), bundle_->x_slice(k), bundle_->regime_slice(k), bundle_->dw_slice(k)};
        }
        const std::size_t d = static_cast<std::size_t>(p_.dim_d());
        x_.resize(n_paths_ * d);
        dw_.resize(n_paths_ * d);
        reg_.resize(n_paths_);
        for_each_index(exec_, n_paths_, [&](std::size_t i) {
            std::vector<double> x((k + 2) * d), dw((k + 1) * d);
            std::vector<std::uint32_t> reg(k + 2);
            gen_.generate(i, k + 1, x, reg, dw);
            std::copy_n(&x[k * d], d, &x_[i * d]);
            std::copy_n(&dw[k * d], d, &dw_[i * d]);
            reg_[i] = reg[k];
        });
        return {k, grid_.dt(k), x_, reg_, dw_};
    }

private:
    const Problem& p_;
    const TimeGrid& grid_;
    std::size_t n_paths_;
    Execution exec_;
    bool streamed_;
    PathGenerator gen_;
    std::optional<PathBundle> bundle_;
    std::vector<double> x_, dw_;
    std::vector<std::uint32_t> reg_;
};

} // namespace

SchemeOutput run_scheme(const Problem& p, const TimeGrid& grid, const IntensityMeasure& im,
                        std::size_t n_paths, std::uint64_t seed, const SchemeOptions& opts)
{
    opts.validate();
    check_grid_for(grid, p);
    require(n_paths >= basis_size(opts.basis, p.dim_d(), p.dim_q()),
            "run_scheme: n_paths smaller than the basis size");

    const std::size_t n = grid.steps();
    const std::size_t cap = opts.max_bundle_bytes > 0 ? opts.max_bundle_bytes : bundle_cap_from_env();
    const bool streamed = cap > 0 && PathBundle::bytes_for(n_paths, n, p.dim_d()) > cap;

    SchemeOutput out{grid, p.grid(), p.dim_d(), n_paths, seed, streamed, 0.0, {}, {}, {}, {}, {}};
    out.theta.resize(n);
    out.diagnostics.resize(n);
    if (opts.compute_z) {
        out.z.resize(n);
    }
    if (opts.keep_policy_points) {
        out.policy_x.resize(n);
        out.policy_a.resize(n);
    }

    StepSource source(p, grid, im, n_paths, seed, opts, streamed);
    std::vector<double> values = source.terminal_values();
    for (std::size_t kk = n; kk-- > 0;) {
        const StepInput in = source.slice(kk);
        StepResult r = backward_step(in, values, p, opts);
        out.theta[kk] = r.theta;
        out.diagnostics[kk] = r.diagnostics;
        if (opts.compute_z) {
            out.z[kk] = std::move(r.z);
        }
        if (opts.keep_policy_points) {
            out.policy_x[kk].assign(in.x.begin(), in.x.end());
            out.policy_a[kk] = std::move(r.argmax_control);
        }
        values = std::move(r.values);
    }
    out.value0 = out.theta[0]->argmax(p.x0()).value;
    return out;
}

double value_at(const SchemeOutput& out, std::size_t k, ConstVec x)
{
    require(k < out.theta.size(), "value_at: step index out of range");
    require(static_cast<int>(x.size()) == out.dim_d, "value_at: state dimension mismatch");
    return out.theta[k]->argmax(x).value;
}

void write_diagnostics_csv(const SchemeOutput& out, std::ostream& os)
{
    os << "k,continuation_condition,theta_condition,ridge,implicit_iterations,min_value,max_value\n";
    for (const auto& d : out.diagnostics) {
        os << d.k << ',' << g17(d.continuation_condition) << ',' << g17(d.theta_condition) << ','
           << (d.ridge ? 1 : 0) << ',' << d.max_implicit_iterations << ',' << g17(d.min_value) << ','
           << g17(d.max_value) << '\n';
    }
}

} // namespace ctrlrand
