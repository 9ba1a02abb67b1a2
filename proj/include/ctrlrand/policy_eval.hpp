#pragma once

#include "ctrlrand/backward_scheme.hpp"
#include "ctrlrand/forward_sim.hpp"

#include <memory>
#include <vector>

namespace ctrlrand {

/// Feedback control a_k(x) = argmax_a theta_k(x, a) over the control grid.
class FeedbackPolicy final : public FeedbackRule {
public:
    FeedbackPolicy(TimeGrid grid, ControlGrid controls,
                   std::vector<std::shared_ptr<const RegressionModel>> theta, std::uint64_t training_seed);

    std::size_t control_index(std::size_t k, ConstVec x) const override;
    const ControlGrid& controls() const override { return controls_; }
    ConstVec control(std::size_t k, ConstVec x) const { return controls_.point(control_index(k, x)); }

    const TimeGrid& grid() const { return grid_; }
    std::uint64_t training_seed() const { return training_seed_; }

private:
    TimeGrid grid_;
    ControlGrid controls_;
    std::vector<std::shared_ptr<const RegressionModel>> theta_;
    std::uint64_t training_seed_;
};

FeedbackPolicy extract_policy(const SchemeOutput& out);

struct GainEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

/// Monte-Carlo estimate of
///   J(alpha) = E[ sum_k f(X_k, alpha_k) dt_k + g(X_n) ]
/// along fresh controlled Euler paths. The seed must differ from the
/// training seed, and f must not depend on y.
GainEstimate evaluate_policy(const Problem& p, const FeedbackPolicy& policy, std::size_t n_eval_paths,
                             std::uint64_t seed, const Execution& exec = {});

/// Same estimator for an arbitrary rule (no seed restriction).
GainEstimate evaluate_rule(const Problem& p, const TimeGrid& grid, const FeedbackRule& rule,
                           std::size_t n_eval_paths, std::uint64_t seed, const Execution& exec = {});

} // namespace ctrlrand
