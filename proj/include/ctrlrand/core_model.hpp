#pragma once

// Shared vocabulary: control sets and their grids, the intensity measure of
// the regime process, problem coefficients and time partitions.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctrlrand {

using ConstVec = std::span<const double>;
using MutVec = std::span<double>;

/// Compact box A = [lower, upper] in R^q, discretized per axis.
struct ControlSet {
    std::vector<double> lower;
    std::vector<double> upper;
    int grid_points_per_dim = 1;

    int dim() const { return static_cast<int>(lower.size()); }
    void validate() const;

    static ControlSet interval(double lo, double hi, int points);
};

/// Finite tensor grid A_h of a ControlSet, stored point-major.
class ControlGrid {
public:
    ControlGrid() = default;
    ControlGrid(int dim, std::vector<double> coords);

    int dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
    ConstVec point(std::size_t i) const
    {
        return {coords_.data() + i * dim_, static_cast<std::size_t>(dim_)};
    }
    const std::vector<double>& coords() const { return coords_; }

    /// Index of the grid point equal to `a` (up to 1e-12 relative), if any.
    std::optional<std::size_t> index_of(ConstVec a) const;

    bool operator==(const ControlGrid&) const = default;

private:
    int dim_ = 0;
    std::vector<double> coords_;
};

/// Lexicographic tensor grid (first axis slowest), endpoints included.
/// Degenerate axes (lower == upper) contribute a single point.
ControlGrid control_grid(const ControlSet& cs);

/// Finite intensity measure lambda(da) restricted to the points of A_h.
class IntensityMeasure {
public:
    IntensityMeasure(double total_mass, std::vector<double> weights);
    static IntensityMeasure uniform(const ControlGrid& grid, double total_mass = 1.0);

    double total_mass() const { return total_mass_; }
    std::size_t size() const { return cumulative_.size(); }
    double probability(std::size_t i) const;

    /// Mark index for a uniform variate u in [0, 1).
    std::size_t sample_mark(double u) const;

private:
    double total_mass_;
    std::vector<double> cumulative_;
};

using DriftFn = std::function<void(ConstVec x, ConstVec a, MutVec out)>;
/// Fills a d x d row-major matrix.
using DiffusionFn = std::function<void(ConstVec x, ConstVec a, MutVec out)>;
using DriverFn = std::function<double(ConstVec x, ConstVec a, double y)>;
using TerminalFn = std::function<double(ConstVec x)>;

struct ProblemData {
    std::string name = "custom";
    int dim_d = 1;
    ControlSet controls;
    DriftFn drift;
    DiffusionFn diffusion;
    DriverFn driver;
    TerminalFn terminal;
    double horizon = 1.0;
    std::vector<double> x0;
    std::vector<double> i0;
    double lipschitz_x = 0.0;
    double lipschitz_y = 0.0;
    bool f_depends_on_y = false;
    bool control_free = false;
};

/// Coefficients b, sigma, f, g of the controlled diffusion, validated at
/// construction by spot evaluation. Immutable afterwards.
class Problem {
public:
    explicit Problem(ProblemData data);

    const std::string& name() const { return data_.name; }
    int dim_d() const { return data_.dim_d; }
    int dim_q() const { return data_.controls.dim(); }
    const ControlSet& controls() const { return data_.controls; }
    const ControlGrid& grid() const { return grid_; }
    double horizon() const { return data_.horizon; }
    const std::vector<double>& x0() const { return data_.x0; }
    const std::vector<double>& i0() const { return data_.i0; }
    std::size_t i0_index() const { return i0_index_; }
    double lipschitz_x() const { return data_.lipschitz_x; }
    double lipschitz_y() const { return data_.lipschitz_y; }
    bool f_depends_on_y() const { return data_.f_depends_on_y; }
    bool control_free() const { return data_.control_free; }

    void drift(ConstVec x, ConstVec a, MutVec out) const { data_.drift(x, a, out); }
    void diffusion(ConstVec x, ConstVec a, MutVec out) const { data_.diffusion(x, a, out); }
    double driver(ConstVec x, ConstVec a, double y) const { return data_.driver(x, a, y); }
    double terminal(ConstVec x) const { return data_.terminal(x); }

    /// Same coefficients with a different control set (and i0 snapped into it).
    Problem with_controls(const ControlSet& cs) const;

    const ProblemData& data() const { return data_; }

private:
    ProblemData data_;
    ControlGrid grid_;
    std::size_t i0_index_ = 0;
};

/// Partition 0 = t_0 < ... < t_n = T.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> times);

    std::size_t steps() const { return times_.size() - 1; }
    double time(std::size_t k) const { return times_[k]; }
    double dt(std::size_t k) const;
    double modulus() const { return modulus_; }
    double horizon() const { return times_.back(); }
    const std::vector<double>& times() const { return times_; }
    bool uniform() const { return uniform_step_ > 0.0; }

private:
    friend TimeGrid make_uniform_grid(std::size_t n, double T);

    std::vector<double> times_;
    double modulus_ = 0.0;
    double uniform_step_ = 0.0;
};

TimeGrid make_uniform_grid(std::size_t n, double T);

/// Throws unless the grid spans [0, T] of `p` and L2 |pi| < 1.
void check_grid_for(const TimeGrid& grid, const Problem& p);

} // namespace ctrlrand
