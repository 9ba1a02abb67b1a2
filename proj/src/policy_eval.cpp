#include "ctrlrand/policy_eval.hpp"

#include "ctrlrand/error.hpp"

#include <cmath>

namespace ctrlrand {

FeedbackPolicy::FeedbackPolicy(TimeGrid grid, ControlGrid controls,
                               std::vector<std::shared_ptr<const RegressionModel>> theta,
                               std::uint64_t training_seed)
    : grid_(std::move(grid)), controls_(std::move(controls)), theta_(std::move(theta)),
      training_seed_(training_seed)
{
    require(theta_.size() == grid_.steps(), "feedback policy: need one surface per step");
    for (const auto& t : theta_) {
        require(t != nullptr, "feedback policy: missing surface");
        require(t->controls() == controls_, "feedback policy: surface fitted on another control grid");
    }
}

std::size_t FeedbackPolicy::control_index(std::size_t k, ConstVec x) const
{
    require(k < theta_.size(), "feedback policy: step index out of range");
    return theta_[k]->argmax(x).index;
}

FeedbackPolicy extract_policy(const SchemeOutput& out)
{
    return {out.grid, out.controls, out.theta, out.seed};
}

GainEstimate evaluate_rule(const Problem& p, const TimeGrid& grid, const FeedbackRule& rule,
                           std::size_t n_eval_paths, std::uint64_t seed, const Execution& exec)
{
    require(n_eval_paths >= 1, "evaluate_policy: need at least one path");
    if (p.f_depends_on_y()) {
        throw ConfigError("policy gain defined only for f(x,a)");
    }
    check_grid_for(grid, p);
    const std::size_t n = grid.steps();
    const std::size_t d = static_cast<std::size_t>(p.dim_d());
    const ControlGrid& cg = rule.controls();

    std::vector<double> gains(n_eval_paths);
    for_each_index(exec, n_eval_paths, [&](std::size_t path) {
        std::vector<double> x((n + 1) * d);
        std::vector<std::uint32_t> ctl(n + 1);
        simulate_controlled_path(p, grid, rule, seed, path, x, ctl);
        double gain = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            gain += p.driver(ConstVec(x).subspan(k * d, d), cg.point(ctl[k]), 0.0) * grid.dt(k);
        }
        gains[path] = gain + p.terminal(ConstVec(x).subspan(n * d, d));
    });

    // two-pass in index order: identical for every backend
    double sum = 0.0;
    for (double g : gains) {
        sum += g;
    }
    const double mean = sum / static_cast<double>(n_eval_paths);
    double ss = 0.0;
    for (double g : gains) {
        ss += (g - mean) * (g - mean);
    }
    const double var = n_eval_paths > 1 ? ss / static_cast<double>(n_eval_paths - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n_eval_paths)), n_eval_paths, seed};
}

GainEstimate evaluate_policy(const Problem& p, const FeedbackPolicy& policy, std::size_t n_eval_paths,
                             std::uint64_t seed, const Execution& exec)
{
    if (seed == policy.training_seed()) {
        throw ConfigError("evaluate_policy: evaluation seed equals the training seed");
    }
    return evaluate_rule(p, policy.grid(), policy, n_eval_paths, seed, exec);
}

} // namespace ctrlrand
