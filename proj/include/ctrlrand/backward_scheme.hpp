#pragma once

// Backward regression scheme for the discretely jump-constrained BSDE:
//
//   Ybar_n = g(X_n)
//   Ycal_k = E[Ybar_{k+1} | X_k, I_k] + f(X_k, I_k, Ycal_k) dt_k    (implicit)
//   theta_k(x, a) = regression of Ycal_k on (X_k, I_k)
//   Ybar_k = vbar_k(X_k) = max_{a in A_h} theta_k(X_k, a)
//
// with an optional Z_k = E[Ybar_{k+1} dW_k / dt_k | X_k, I_k].

#include "ctrlrand/core_model.hpp"
#include "ctrlrand/error.hpp"
#include "ctrlrand/execution.hpp"
#include "ctrlrand/forward_sim.hpp"
#include "ctrlrand/regression.hpp"

#include <iosfwd>
#include <memory>
#include <vector>

namespace ctrlrand {

struct SchemeOptions {
    BasisSpec basis{};
    double implicit_tol = 1e-12;
    int implicit_max_iter = 50;
    bool compute_z = false;
    /// Adds phi(x, a) He_j(dW / sqrt(dt)), j = 1, 2, per Brownian component to
    /// the continuation regression. These terms have zero conditional mean, so
    /// only the residual variance of the fit changes.
    bool brownian_control_variates = false;
    /// With I_0 = i0 on every path, theta_0(x0, a) is only observed at a = i0,
    /// so training paths draw I_0 from the mark law by default.
    InitialRegime initial_regime = InitialRegime::from_mark_law;
    bool keep_policy_points = true;
    /// 0: read CTRLRAND_MAX_BUNDLE_MB from the environment (unset: no cap).
    std::size_t max_bundle_bytes = 0;
    Execution exec{};

    void validate() const;
};

/// Bundle size cap in bytes from CTRLRAND_MAX_BUNDLE_MB, or 0 when unset.
std::size_t bundle_cap_from_env();

class ImplicitStepError : public NumericalError {
public:
    ImplicitStepError(std::size_t k, std::vector<double> x, std::vector<double> a,
                      std::vector<double> iterates);

    std::size_t step() const { return k_; }
    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& a() const { return a_; }
    const std::vector<double>& iterates() const { return iterates_; }

private:
    std::size_t k_;
    std::vector<double> x_, a_, iterates_;
};

struct ImplicitResult {
    double y = 0.0;
    int iterations = 0;
};

/// Solves y = e + f(x, a, y) dt by Picard iteration started at y = e.
ImplicitResult solve_implicit_step(double e, ConstVec x, ConstVec a, double dt, const Problem& p,
                                   const SchemeOptions& opts, std::size_t k = 0);

/// Data of one grid step for all training paths.
struct StepInput {
    std::size_t k = 0;
    double dt = 0.0;
    ConstVec x;                            ///< N x d states at t_k
    std::span<const std::uint32_t> regimes; ///< N regimes at t_k
    ConstVec dw;                           ///< N x d increments (needed only for Z)
};

struct StepDiagnostics {
    std::size_t k = 0;
    double continuation_condition = 0.0;
    double theta_condition = 0.0;
    bool ridge = false;
    int max_implicit_iterations = 0;
    double min_value = 0.0;
    double max_value = 0.0;
};

struct StepResult {
    std::shared_ptr<const RegressionModel> theta;
    std::vector<RegressionModel> z; ///< one model per component of R^d
    std::vector<double> values;     ///< Ybar_k per path
    std::vector<std::uint32_t> argmax_control;
    StepDiagnostics diagnostics;
};

StepResult backward_step(const StepInput& in, ConstVec next_values, const Problem& p,
                         const SchemeOptions& opts);

StepResult backward_step(std::size_t k, const PathBundle& bundle, ConstVec next_values, const Problem& p,
                         const SchemeOptions& opts);

struct SchemeOutput {
    TimeGrid grid;
    ControlGrid controls;
    int dim_d = 1;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    bool streamed = false;
    double value0 = 0.0;
    std::vector<std::shared_ptr<const RegressionModel>> theta; ///< k = 0..n-1
    std::vector<std::vector<RegressionModel>> z;               ///< empty unless compute_z
    /// Training states X_k (N x d) and argmax controls a_k(X_k) per step.
    std::vector<std::vector<double>> policy_x;
    std::vector<std::vector<std::uint32_t>> policy_a;
    std::vector<StepDiagnostics> diagnostics;
};

/// Simulates the training bundle and runs the backward induction on it. When
/// the bundle would exceed the memory cap, paths are regenerated per step
/// instead of stored; the output is bit-identical either way.
SchemeOutput run_scheme(const Problem& p, const TimeGrid& grid, const IntensityMeasure& im,
                        std::size_t n_paths, std::uint64_t seed, const SchemeOptions& opts = {});

/// vbar_k(x) = max_a theta_k(x, a).
double value_at(const SchemeOutput& out, std::size_t k, ConstVec x);

/// Columns k,continuation_condition,theta_condition,ridge,implicit_iterations,min_value,max_value.
void write_diagnostics_csv(const SchemeOutput& out, std::ostream& os);

} // namespace ctrlrand
