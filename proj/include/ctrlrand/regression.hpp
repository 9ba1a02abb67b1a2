#pragma once

// Least-squares estimation of conditional expectations E[Y | X = x, I = a] on
// polynomial bases over R^d x A_h.

#include "ctrlrand/core_model.hpp"
#include "ctrlrand/execution.hpp"

#include <cstdint>
#include <vector>

namespace ctrlrand {

enum class BasisKind {
    poly_xa,      ///< tensor product of polynomials in x and in a
    poly_x_per_a, ///< independent polynomial in x for each point of A_h
};

struct BasisSpec {
    BasisKind kind = BasisKind::poly_x_per_a;
    int degree_x = 2; ///< total degree in x
    int degree_a = 0; ///< total degree in a (poly_xa only)
};

/// Number of coefficients per fitted polynomial (per slice for poly_x_per_a).
std::size_t basis_size(const BasisSpec& spec, int dim_x, int dim_a);

/// z -> (z - center) / half_width per coordinate.
struct AffineScaling {
    std::vector<double> center;
    std::vector<double> half_width;

    /// Maps the sample range onto [-1, 1]; constant coordinates get width 1.
    static AffineScaling fit(ConstVec samples, int dim);
    double apply(std::size_t i, double z) const { return (z - center[i]) / half_width[i]; }
};

/// Monomials of total degree <= degree in `dim` variables, graded order.
class Monomials {
public:
    Monomials() = default;
    Monomials(int dim, int degree);

    std::size_t size() const { return exponents_.size() / (dim_ ? dim_ : 1); }
    int dim() const { return dim_; }
    int degree() const { return degree_; }
    /// Evaluates every monomial at an already-scaled point.
    void eval(ConstVec z, MutVec out) const;
    std::span<const int> exponent(std::size_t i) const { return {&exponents_[i * dim_], static_cast<std::size_t>(dim_)}; }

private:
    int dim_ = 0;
    int degree_ = 0;
    std::vector<int> exponents_;
};

struct ControlChoice {
    std::size_t index = 0; ///< position in the control grid
    double value = 0.0;
};

/// Fitted surface theta(x, a). Immutable and safe to share between threads.
class RegressionModel {
public:
    const BasisSpec& spec() const { return spec_; }
    int dim_x() const { return dim_x_; }
    int dim_a() const { return dim_a_; }
    const ControlGrid& controls() const { return controls_; }
    const AffineScaling& x_scaling() const { return x_scale_; }
    const AffineScaling& a_scaling() const { return a_scale_; }
    std::size_t slices() const { return coefficients_.size(); }
    /// poly_xa: single slice, indexed [i_x * n_a_monomials + i_a].
    const std::vector<double>& coefficients(std::size_t slice = 0) const { return coefficients_[slice]; }
    double condition_estimate() const { return condition_; }
    bool ridge_used() const { return ridge_; }
    std::size_t sample_size() const { return sample_size_; }

    /// theta(x, a); poly_x_per_a requires a to be a control grid point.
    double predict(ConstVec x, ConstVec a) const;
    /// theta(x, a_j) for the j-th point of the model's control grid.
    double predict_at(ConstVec x, std::size_t control) const;
    /// Max over the model's own control grid, first maximizer on ties.
    ControlChoice argmax(ConstVec x) const;

    /// Copy with one slice's coefficients replaced (tests and diagnostics).
    RegressionModel with_coefficients(std::size_t slice, std::vector<double> c) const;

private:
    friend class RegressionBuilder;

    void x_features(ConstVec x, MutVec out) const;
    void a_features(ConstVec a, MutVec out) const;

    BasisSpec spec_;
    int dim_x_ = 0;
    int dim_a_ = 0;
    ControlGrid controls_;
    AffineScaling x_scale_;
    AffineScaling a_scale_;
    Monomials x_mono_;
    Monomials a_mono_;
    std::vector<double> grid_a_features_; ///< a-monomials at each grid point (poly_xa)
    std::vector<std::vector<double>> coefficients_;
    double condition_ = 1.0;
    bool ridge_ = false;
    std::size_t sample_size_ = 0;
};

/// Zero-conditional-mean multipliers h_c, N x count row-major. Every basis
/// function also enters the design multiplied by each h_c; those coefficients
/// are dropped after the solve, so the h-terms act as control variates and
/// leave the fitted surface a regression on (x, a) only.
struct ControlVariates {
    ConstVec h;
    std::size_t count = 0;
};

/// Least squares by Householder QR; if the normal-equation condition estimate
/// exceeds 1e8 the fit is redone with a ridge penalty 1e-8 * mean(target^2).
/// xs holds N points of dimension dim_x; `regimes` are control-grid indices.
RegressionModel fit_indexed(const BasisSpec& spec, const ControlGrid& controls, ConstVec xs, int dim_x,
                            std::span<const std::uint32_t> regimes, ConstVec targets,
                            const Execution& exec = {}, const ControlVariates& cv = {});

/// Same with regimes given by coordinates (N points of dimension q). For
/// poly_x_per_a every coordinate must be a point of `controls`; poly_xa
/// accepts any a.
RegressionModel fit(const BasisSpec& spec, const ControlGrid& controls, ConstVec xs, int dim_x,
                    ConstVec as, ConstVec targets, const Execution& exec = {});

double predict(const RegressionModel& model, ConstVec x, ConstVec a);

/// max_{a in grid} theta(x, a) with the first maximizer in grid order.
ControlChoice argmax_over_controls(const RegressionModel& model, ConstVec x, const ControlGrid& grid);

} // namespace ctrlrand
