#pragma once

// Regime process driven by a Poisson random measure on [0, T] x A_h and the
// Euler scheme of the regime-switching diffusion.

#include "ctrlrand/core_model.hpp"
#include "ctrlrand/execution.hpp"
#include "ctrlrand/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace ctrlrand {

/// Piecewise-constant regime: i0 on [0, T_1), marks[m] on [T_{m+1}, T_{m+2}).
/// Marks are control-grid indices.
struct RegimePath {
    std::vector<double> jump_times;
    std::vector<std::uint32_t> marks;
    std::uint32_t i0 = 0;

    std::uint32_t at(double t) const;
};

/// Exponential(total_mass) inter-arrivals truncated at T, i.i.d. marks.
RegimePath sample_regime_path(const IntensityMeasure& im, double T, std::uint32_t i0, PathRng& rng);

/// Regime at each grid time; a jump landing exactly on t_k is visible at k.
std::vector<std::uint32_t> regime_at_grid(const RegimePath& rp, const TimeGrid& grid);

enum class InitialRegime {
    fixed,         ///< I_0 = i0 on every path
    from_mark_law, ///< I_0 drawn from the normalized intensity measure
};

struct SimOptions {
    InitialRegime initial_regime = InitialRegime::fixed;
    Execution exec{};
};

/// Simulated paths stored time-major: slice k holds n_paths consecutive states.
class PathBundle {
public:
    PathBundle(std::size_t n_paths, TimeGrid grid, int dim_d, ControlGrid controls, std::uint64_t seed);

    std::size_t n_paths() const { return n_paths_; }
    std::size_t steps() const { return grid_.steps(); }
    int dim_d() const { return d_; }
    const TimeGrid& grid() const { return grid_; }
    const ControlGrid& controls() const { return controls_; }
    std::uint64_t seed() const { return seed_; }

    ConstVec x(std::size_t k, std::size_t p) const { return {&x_[(k * n_paths_ + p) * d_], size_d()}; }
    MutVec x(std::size_t k, std::size_t p) { return {&x_[(k * n_paths_ + p) * d_], size_d()}; }
    ConstVec x_slice(std::size_t k) const { return {&x_[k * n_paths_ * d_], n_paths_ * d_}; }

    std::uint32_t regime(std::size_t k, std::size_t p) const { return regime_[k * n_paths_ + p]; }
    std::uint32_t& regime(std::size_t k, std::size_t p) { return regime_[k * n_paths_ + p]; }
    std::span<const std::uint32_t> regime_slice(std::size_t k) const
    {
        return {&regime_[k * n_paths_], n_paths_};
    }
    ConstVec regime_point(std::size_t k, std::size_t p) const { return controls_.point(regime(k, p)); }

    ConstVec dw(std::size_t k, std::size_t p) const { return {&dw_[(k * n_paths_ + p) * d_], size_d()}; }
    MutVec dw(std::size_t k, std::size_t p) { return {&dw_[(k * n_paths_ + p) * d_], size_d()}; }
    ConstVec dw_slice(std::size_t k) const { return {&dw_[k * n_paths_ * d_], n_paths_ * d_}; }

    bool operator==(const PathBundle& o) const
    {
        return x_ == o.x_ && regime_ == o.regime_ && dw_ == o.dw_;
    }

    static std::size_t bytes_for(std::size_t n_paths, std::size_t steps, int dim_d);

private:
    std::size_t size_d() const { return static_cast<std::size_t>(d_); }

    std::size_t n_paths_;
    TimeGrid grid_;
    int d_;
    ControlGrid controls_;
    std::uint64_t seed_;
    std::vector<double> x_;
    std::vector<std::uint32_t> regime_;
    std::vector<double> dw_;
};

/// Regenerates single training paths from (seed, path index). Every path is a
/// pure function of its key, which is what makes parallel and streamed
/// simulation bit-identical to the serial bundle.
class PathGenerator {
public:
    PathGenerator(const Problem& p, const TimeGrid& grid, const IntensityMeasure& im,
                  std::uint64_t seed, InitialRegime init);

    /// Fills steps 0..last (inclusive) of path `path`. Buffers hold
    /// (last+1)*d states, last+1 regimes and last*d increments.
    void generate(std::size_t path, std::size_t last, MutVec x, std::span<std::uint32_t> regimes,
                  MutVec dw) const;

private:
    const Problem& problem_;
    const TimeGrid& grid_;
    const IntensityMeasure& im_;
    std::uint64_t seed_;
    InitialRegime init_;
};

PathBundle simulate_forward(const Problem& p, const TimeGrid& grid, const IntensityMeasure& im,
                            std::size_t n_paths, std::uint64_t seed, const SimOptions& opts = {});

/// Feedback control x -> a_k(x), returned as a control-grid index.
class FeedbackRule {
public:
    virtual ~FeedbackRule() = default;
    virtual std::size_t control_index(std::size_t k, ConstVec x) const = 0;
    virtual const ControlGrid& controls() const = 0;
};

/// Same control at every (k, x).
class ConstantRule final : public FeedbackRule {
public:
    ConstantRule(ControlGrid controls, std::size_t index);
    std::size_t control_index(std::size_t, ConstVec) const override { return index_; }
    const ControlGrid& controls() const override { return controls_; }

private:
    ControlGrid controls_;
    std::size_t index_;
};

/// One controlled Euler path: x holds (n+1)*d states, controls n+1 indices
/// (the last entry repeats the control applied on the final step). dw_out,
/// when non-empty, receives the n*d Brownian increments.
void simulate_controlled_path(const Problem& p, const TimeGrid& grid, const FeedbackRule& rule,
                              std::uint64_t seed, std::size_t path, MutVec x,
                              std::span<std::uint32_t> controls, MutVec dw_out = {});

PathBundle simulate_controlled(const Problem& p, const TimeGrid& grid, const FeedbackRule& rule,
                               std::size_t n_paths, std::uint64_t seed, const Execution& exec = {});

/// Columns path,k,t,x_0..x_{d-1},a_0..a_{q-1}; 17 significant digits.
void write_bundle_csv(const PathBundle& bundle, std::ostream& os);

} // namespace ctrlrand
