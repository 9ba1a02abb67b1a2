#include "ctrlrand/core_model.hpp"

#include "ctrlrand/error.hpp"
#include "ctrlrand/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ctrlrand {

void ControlSet::validate() const
{
    require(!lower.empty(), "control set: dimension must be positive");
    require(lower.size() == upper.size(), "control set: lower/upper size mismatch");
    require(grid_points_per_dim >= 1, "control set: grid_points_per_dim must be >= 1");
    for (std::size_t i = 0; i < lower.size(); ++i) {
        require(std::isfinite(lower[i]) && std::isfinite(upper[i]),
                "control set: bounds must be finite");
        require(lower[i] <= upper[i], "control set: lower > upper on axis " + std::to_string(i));
    }
}

ControlSet ControlSet::interval(double lo, double hi, int points)
{
    ControlSet cs{{lo}, {hi}, points};
    cs.validate();
    return cs;
}

ControlGrid::ControlGrid(int dim, std::vector<double> coords)
    : dim_(dim), coords_(std::move(coords))
{
    require(dim_ >= 1, "control grid: dimension must be positive");
    require(!coords_.empty() && coords_.size() % dim_ == 0, "control grid: bad coordinate count");
}

std::optional<std::size_t> ControlGrid::index_of(ConstVec a) const
{
    if (static_cast<int>(a.size()) != dim_) {
        return std::nullopt;
    }
    for (std::size_t i = 0; i < size(); ++i) {
        const auto pt = point(i);
        bool same = true;
        for (int j = 0; j < dim_ && same; ++j) {
            same = std::abs(pt[j] - a[j]) <= 1e-12 * (1.0 + std::abs(pt[j]));
        }
        if (same) {
            return i;
        }
    }
    return std::nullopt;
}

ControlGrid control_grid(const ControlSet& cs)
{
    cs.validate();
    const int q = cs.dim();
    std::vector<std::vector<double>> axes(q);
    for (int i = 0; i < q; ++i) {
        const double lo = cs.lower[i];
        const double hi = cs.upper[i];
        const int m = (lo == hi) ? 1 : cs.grid_points_per_dim;
        if (m == 1) {
            axes[i] = {lo == hi ? lo : 0.5 * (lo + hi)};
            continue;
        }
        axes[i].resize(m);
        for (int j = 0; j < m; ++j) {
            axes[i][j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(m - 1);
        }
        axes[i].back() = hi;
    }

    std::size_t total = 1;
    for (const auto& ax : axes) {
        total *= ax.size();
    }
    std::vector<double> coords;
    coords.reserve(total * q);
    std::vector<std::size_t> idx(q, 0);
    for (std::size_t n = 0; n < total; ++n) {
        for (int i = 0; i < q; ++i) {
            coords.push_back(axes[i][idx[i]]);
        }
        // odometer, last axis fastest
        for (int i = q - 1; i >= 0; --i) {
            if (++idx[i] < axes[i].size()) {
                break;
            }
            idx[i] = 0;
        }
    }
    return ControlGrid(q, std::move(coords));
}

IntensityMeasure::IntensityMeasure(double total_mass, std::vector<double> weights)
    : total_mass_(total_mass)
{
    require(std::isfinite(total_mass) && total_mass > 0.0,
            "intensity measure: total mass must be positive and finite");
    require(!weights.empty(), "intensity measure: empty mark law");
    double sum = 0.0;
    for (double w : weights) {
        require(std::isfinite(w) && w > 0.0, "intensity measure: mark weights must be positive");
        sum += w;
    }
    cumulative_.resize(weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i] / sum;
        cumulative_[i] = acc;
    }
    cumulative_.back() = 1.0;
}

IntensityMeasure IntensityMeasure::uniform(const ControlGrid& grid, double total_mass)
{
    return {total_mass, std::vector<double>(grid.size(), 1.0)};
}

double IntensityMeasure::probability(std::size_t i) const
{
    return i == 0 ? cumulative_[0] : cumulative_[i] - cumulative_[i - 1];
}

std::size_t IntensityMeasure::sample_mark(double u) const
{
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                 cumulative_.size() - 1);
}

namespace {

bool all_finite(ConstVec v)
{
    return std::all_of(v.begin(), v.end(), [](double z) { return std::isfinite(z); });
}

} // namespace

Problem::Problem(ProblemData data)
    : data_(std::move(data))
{
    const int d = data_.dim_d;
    require(d >= 1, "problem: dim_d must be positive");
    data_.controls.validate();
    require(data_.drift && data_.diffusion && data_.driver && data_.terminal,
            "problem '" + data_.name + "': all coefficient functions must be set");
    require(std::isfinite(data_.horizon) && data_.horizon > 0.0, "problem: horizon must be positive");
    require(static_cast<int>(data_.x0.size()) == d, "problem: x0 has wrong dimension");
    require(all_finite(data_.x0), "problem: x0 must be finite");
    require(static_cast<int>(data_.i0.size()) == data_.controls.dim(), "problem: i0 has wrong dimension");
    require(data_.lipschitz_x >= 0.0 && data_.lipschitz_y >= 0.0, "problem: Lipschitz bounds must be >= 0");

    grid_ = control_grid(data_.controls);
    const auto idx = grid_.index_of(data_.i0);
    require(idx.has_value(), "problem '" + data_.name + "': initial regime i0 is not a control grid point");
    i0_index_ = *idx;

    // Spot evaluation around x0 at every control grid point.
    PathRng rng(0x5eedULL, 0, StreamTag::validation);
    std::vector<std::vector<double>> probes{data_.x0};
    for (int s = 0; s < 10; ++s) {
        std::vector<double> x(data_.x0);
        for (double& xi : x) {
            xi += (2.0 * rng.uniform() - 1.0) * (1.0 + std::abs(xi));
        }
        probes.push_back(std::move(x));
    }
    std::vector<double> b(d), sig(static_cast<std::size_t>(d) * d);
    std::vector<double> b_ref(d), sig_ref(static_cast<std::size_t>(d) * d);
    for (const auto& x : probes) {
        for (std::size_t j = 0; j < grid_.size(); ++j) {
            const auto a = grid_.point(j);
            data_.drift(x, a, b);
            data_.diffusion(x, a, sig);
            const double f0 = data_.driver(x, a, 0.0);
            const double f1 = data_.driver(x, a, 1.0);
            const double gv = data_.terminal(x);
            if (!all_finite(b) || !all_finite(sig) || !std::isfinite(f0) || !std::isfinite(f1) ||
                !std::isfinite(gv)) {
                std::ostringstream os;
                os << "problem '" << data_.name << "': non-finite coefficient at spot check x[0]=" << x[0];
                throw ConfigError(os.str());
            }
            if (!data_.f_depends_on_y && f0 != f1) {
                throw ConfigError("problem '" + data_.name +
                                  "': driver depends on y but f_depends_on_y is false");
            }
            if (data_.control_free) {
                if (j == 0) {
                    b_ref = b;
                    sig_ref = sig;
                } else if (b != b_ref || sig != sig_ref) {
                    throw ConfigError("problem '" + data_.name +
                                      "': declared control_free but coefficients depend on a");
                }
            }
        }
    }
}

Problem Problem::with_controls(const ControlSet& cs) const
{
    ProblemData d = data_;
    d.controls = cs;
    const ControlGrid g = control_grid(cs);
    // nearest grid point to the old i0
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.size(); ++j) {
        double dist = 0.0;
        for (int i = 0; i < g.dim(); ++i) {
            dist += (g.point(j)[i] - data_.i0[i]) * (g.point(j)[i] - data_.i0[i]);
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = j;
        }
    }
    d.i0.assign(g.point(best).begin(), g.point(best).end());
    return Problem(std::move(d));
}

TimeGrid::TimeGrid(std::vector<double> times)
    : times_(std::move(times))
{
    require(times_.size() >= 2, "time grid: need at least one step");
    require(times_.front() == 0.0, "time grid: must start at 0");
    for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
        require(times_[k + 1] > times_[k], "time grid: times must be strictly increasing");
        modulus_ = std::max(modulus_, times_[k + 1] - times_[k]);
    }
    require(static_cast<double>(steps()) * modulus_ <= 2.0 * times_.back() * (1.0 + 1e-12),
            "time grid: n |pi| must not exceed 2T");
}

double TimeGrid::dt(std::size_t k) const
{
    return uniform_step_ > 0.0 ? uniform_step_ : times_[k + 1] - times_[k];
}

TimeGrid make_uniform_grid(std::size_t n, double T)
{
    require(n >= 1, "uniform grid: n must be >= 1");
    require(std::isfinite(T) && T > 0.0, "uniform grid: T must be positive");
    const double h = T / static_cast<double>(n);
    std::vector<double> t(n + 1);
    for (std::size_t k = 0; k < n; ++k) {
        t[k] = static_cast<double>(k) * h;
    }
    t[n] = T;
    TimeGrid g(std::move(t));
    g.modulus_ = h;
    g.uniform_step_ = h;
    return g;
}

void check_grid_for(const TimeGrid& grid, const Problem& p)
{
    require(grid.horizon() == p.horizon(), "time grid does not end at the problem horizon");
    require(p.lipschitz_y() * grid.modulus() < 1.0,
            "time grid too coarse: L2 |pi| must be < 1 for the implicit step");
}

} // namespace ctrlrand
