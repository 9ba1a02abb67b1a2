#include "ctrlrand/regression.hpp"

#include "ctrlrand/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace ctrlrand {

namespace {

constexpr double kConditionLimit = 1e8;
constexpr double kRidgeScale = 1e-8;

/// Stack storage for the common small case, heap beyond it.
class Scratch {
public:
    explicit Scratch(std::size_t n)
    {
        if (n > small_.size()) {
            big_.resize(n);
            view_ = {big_.data(), n};
        } else {
            view_ = {small_.data(), n};
        }
    }
    MutVec span() { return view_; }
    double& operator[](std::size_t i) { return view_[i]; }

private:
    std::array<double, 64> small_{};
    std::vector<double> big_;
    MutVec view_;
};

struct LsqResult {
    Eigen::VectorXd coef;
    double condition = 1.0;
    bool ridge = false;
};

LsqResult least_squares(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y)
{
    const Eigen::Index m = phi.cols();
    LsqResult out;
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(phi);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
    out.condition = (smin > 0.0 && smax > 0.0) ? (smax / smin) * (smax / smin)
                                               : std::numeric_limits<double>::infinity();
    if (out.condition <= kConditionLimit) {
        out.coef = qr.solve(y);
        return out;
    }

    out.ridge = true;
    const double lambda = std::max(kRidgeScale * y.squaredNorm() / static_cast<double>(y.size()),
                                   std::numeric_limits<double>::min());
    Eigen::MatrixXd aug(phi.rows() + m, m);
    aug.topRows(phi.rows()) = phi;
    aug.bottomRows(m) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(phi.rows() + m);
    rhs.head(phi.rows()) = y;
    out.coef = Eigen::HouseholderQR<Eigen::MatrixXd>(aug).solve(rhs);
    return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v)
{
    return {v.data(), v.data() + v.size()};
}

} // namespace

std::size_t basis_size(const BasisSpec& spec, int dim_x, int dim_a)
{
    const std::size_t mx = Monomials(dim_x, spec.degree_x).size();
    if (spec.kind == BasisKind::poly_x_per_a) {
        return mx;
    }
    return mx * Monomials(dim_a, spec.degree_a).size();
}

AffineScaling AffineScaling::fit(ConstVec samples, int dim)
{
    AffineScaling s;
    s.center.assign(dim, 0.0);
    s.half_width.assign(dim, 1.0);
    const std::size_t n = samples.size() / static_cast<std::size_t>(dim);
    for (int i = 0; i < dim; ++i) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t p = 0; p < n; ++p) {
            const double v = samples[p * dim + i];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (n == 0) {
            continue;
        }
        s.center[i] = 0.5 * (lo + hi);
        const double hw = 0.5 * (hi - lo);
        s.half_width[i] = hw > 1e-12 * (1.0 + std::abs(s.center[i])) ? hw : 1.0;
    }
    return s;
}

Monomials::Monomials(int dim, int degree)
    : dim_(dim), degree_(degree)
{
    require(dim >= 1, "monomials: dimension must be positive");
    require(degree >= 0, "monomials: degree must be >= 0");
    std::vector<int> e(dim, 0);
    for (int total = 0; total <= degree; ++total) {
        // all exponent vectors summing to `total`, lexicographically decreasing in e[0]
        std::fill(e.begin(), e.end(), 0);
        e[0] = total;
        while (true) {
            exponents_.insert(exponents_.end(), e.begin(), e.end());
            // next composition of `total` into dim parts
            int j = dim - 2;
            while (j >= 0 && e[j] == 0) {
                --j;
            }
            if (j < 0) {
                break;
            }
            --e[j];
            const int rest = std::accumulate(e.begin() + j + 1, e.end(), 0) + 1;
            std::fill(e.begin() + j + 1, e.end(), 0);
            e[j + 1] = rest;
        }
    }
}

void Monomials::eval(ConstVec z, MutVec out) const
{
    if (dim_ == 1) {
        double v = 1.0;
        for (int i = 0; i <= degree_; ++i) {
            out[i] = v;
            v *= z[0];
        }
        return;
    }
    Scratch pw(static_cast<std::size_t>(dim_) * (degree_ + 1));
    for (int v = 0; v < dim_; ++v) {
        double acc = 1.0;
        for (int e = 0; e <= degree_; ++e) {
            pw[v * (degree_ + 1) + e] = acc;
            acc *= z[v];
        }
    }
    const std::size_t m = size();
    for (std::size_t i = 0; i < m; ++i) {
        double prod = 1.0;
        for (int v = 0; v < dim_; ++v) {
            prod *= pw[v * (degree_ + 1) + exponents_[i * dim_ + v]];
        }
        out[i] = prod;
    }
}

void RegressionModel::x_features(ConstVec x, MutVec out) const
{
    Scratch z(static_cast<std::size_t>(dim_x_));
    for (int i = 0; i < dim_x_; ++i) {
        z[i] = x_scale_.apply(i, x[i]);
    }
    x_mono_.eval(z.span(), out);
}

double RegressionModel::predict_at(ConstVec x, std::size_t control) const
{
    const std::size_t mx = x_mono_.size();
    Scratch fx(mx);
    x_features(x, fx.span());
    if (spec_.kind == BasisKind::poly_x_per_a) {
        const auto& c = coefficients_[control];
        double v = 0.0;
        for (std::size_t i = 0; i < mx; ++i) {
            v += c[i] * fx[i];
        }
        return v;
    }
    const std::size_t ma = a_mono_.size();
    const double* fa = &grid_a_features_[control * ma];
    const auto& c = coefficients_[0];
    double v = 0.0;
    for (std::size_t i = 0; i < mx; ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < ma; ++j) {
            inner += c[i * ma + j] * fa[j];
        }
        v += inner * fx[i];
    }
    return v;
}

double RegressionModel::predict(ConstVec x, ConstVec a) const
{
    require(static_cast<int>(x.size()) == dim_x_ && static_cast<int>(a.size()) == dim_a_,
            "predict: argument dimension mismatch");
    if (spec_.kind == BasisKind::poly_x_per_a) {
        const auto idx = controls_.index_of(a);
        if (!idx) {
            throw ConfigError("regime not in control grid");
        }
        return predict_at(x, *idx);
    }
    const std::size_t mx = x_mono_.size();
    const std::size_t ma = a_mono_.size();
    Scratch fx(mx), za(static_cast<std::size_t>(dim_a_)), fa(ma);
    x_features(x, fx.span());
    for (int i = 0; i < dim_a_; ++i) {
        za[i] = a_scale_.apply(i, a[i]);
    }
    a_mono_.eval(za.span(), fa.span());
    const auto& c = coefficients_[0];
    double v = 0.0;
    for (std::size_t i = 0; i < mx; ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < ma; ++j) {
            inner += c[i * ma + j] * fa[j];
        }
        v += inner * fx[i];
    }
    return v;
}

ControlChoice RegressionModel::argmax(ConstVec x) const
{
    const std::size_t mx = x_mono_.size();
    Scratch fx(mx);
    x_features(x, fx.span());
    ControlChoice best{0, -std::numeric_limits<double>::infinity()};
    const std::size_t na = controls_.size();

    if (spec_.kind == BasisKind::poly_x_per_a) {
        for (std::size_t j = 0; j < na; ++j) {
            const auto& c = coefficients_[j];
            double v = 0.0;
            for (std::size_t i = 0; i < mx; ++i) {
                v += c[i] * fx[i];
            }
            if (v > best.value) {
                best = {j, v};
            }
        }
        return best;
    }

    // collapse the x-part once: theta(x, a) = sum_j g_j phi_j(a)
    const std::size_t ma = a_mono_.size();
    Scratch g(ma);
    const auto& c = coefficients_[0];
    for (std::size_t j = 0; j < ma; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < mx; ++i) {
            s += c[i * ma + j] * fx[i];
        }
        g[j] = s;
    }
    for (std::size_t k = 0; k < na; ++k) {
        const double* fa = &grid_a_features_[k * ma];
        double v = 0.0;
        for (std::size_t j = 0; j < ma; ++j) {
            v += g[j] * fa[j];
        }
        if (v > best.value) {
            best = {k, v};
        }
    }
    return best;
}

RegressionModel RegressionModel::with_coefficients(std::size_t slice, std::vector<double> c) const
{
    require(slice < coefficients_.size() && c.size() == coefficients_[slice].size(),
            "with_coefficients: bad slice or size");
    RegressionModel m = *this;
    m.coefficients_[slice] = std::move(c);
    return m;
}

class RegressionBuilder {
public:
    /// `as` holds a-coordinates (N x q); `regimes` holds grid indices (may be
    /// empty for poly_xa).
    static RegressionModel build(const BasisSpec& spec, const ControlGrid& controls, ConstVec xs,
                                 int dim_x, ConstVec as, std::span<const std::uint32_t> regimes,
                                 ConstVec targets, const Execution& exec, const ControlVariates& cv)
    {
        require(dim_x >= 1, "fit: dim_x must be positive");
        const int q = controls.dim();
        const std::size_t n = targets.size();
        const std::size_t nh = cv.count;
        require(cv.h.size() == n * nh, "fit: control variate matrix does not match targets");
        require(xs.size() == n * static_cast<std::size_t>(dim_x), "fit: xs size does not match targets");
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(targets[i])) {
                throw NumericalError("fit: non-finite target at sample " + std::to_string(i));
            }
        }
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!std::isfinite(xs[i])) {
                throw NumericalError("fit: non-finite state at sample " + std::to_string(i / dim_x));
            }
        }

        RegressionModel model;
        model.spec_ = spec;
        model.dim_x_ = dim_x;
        model.dim_a_ = q;
        model.controls_ = controls;
        model.sample_size_ = n;
        model.x_mono_ = Monomials(dim_x, spec.degree_x);
        model.x_scale_ = AffineScaling::fit(xs, dim_x);
        const std::size_t mx = model.x_mono_.size();

        if (spec.kind == BasisKind::poly_x_per_a) {
            require(regimes.size() == n, "fit: regime count does not match targets");
            model.a_scale_ = AffineScaling{std::vector<double>(q, 0.0), std::vector<double>(q, 1.0)};
            const std::size_t na = controls.size();
            std::vector<std::vector<std::size_t>> members(na);
            for (std::size_t i = 0; i < n; ++i) {
                require(regimes[i] < na, "fit: regime index out of range");
                members[regimes[i]].push_back(i);
            }
            model.coefficients_.resize(na);
            model.condition_ = 0.0;
            for (std::size_t s = 0; s < na; ++s) {
                const auto& rows = members[s];
                const std::size_t cols = mx * (1 + nh);
                if (rows.size() < cols) {
                    throw NumericalError("underdetermined regression: control grid point " +
                                         std::to_string(s) + " has " + std::to_string(rows.size()) +
                                         " samples for " + std::to_string(cols) + " basis functions");
                }
                Eigen::MatrixXd phi(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
                Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
                for_each_index(exec, rows.size(), [&](std::size_t r) {
                    Scratch fx(mx);
                    model.x_features(xs.subspan(rows[r] * dim_x, dim_x), fx.span());
                    const auto row = static_cast<Eigen::Index>(r);
                    for (std::size_t j = 0; j < mx; ++j) {
                        phi(row, static_cast<Eigen::Index>(j)) = fx[j];
                        for (std::size_t c = 0; c < nh; ++c) {
                            phi(row, static_cast<Eigen::Index>((c + 1) * mx + j)) = fx[j] * cv.h[rows[r] * nh + c];
                        }
                    }
                    y(row) = targets[rows[r]];
                });
                const LsqResult res = least_squares(phi, y);
                model.coefficients_[s] = to_std(res.coef.head(static_cast<Eigen::Index>(mx)));
                model.condition_ = std::max(model.condition_, res.condition);
                model.ridge_ = model.ridge_ || res.ridge;
            }
            return model;
        }

        require(as.size() == n * static_cast<std::size_t>(q), "fit: regime coordinates do not match targets");
        model.a_mono_ = Monomials(q, spec.degree_a);
        model.a_scale_ = AffineScaling::fit(as, q);
        const std::size_t ma = model.a_mono_.size();
        const std::size_t m = mx * ma;
        const std::size_t cols = m * (1 + nh);
        if (n < cols) {
            throw NumericalError("underdetermined regression: " + std::to_string(n) + " samples for " +
                                 std::to_string(cols) + " basis functions");
        }
        model.grid_a_features_.resize(controls.size() * ma);
        for (std::size_t k = 0; k < controls.size(); ++k) {
            model.a_features(controls.point(k), {&model.grid_a_features_[k * ma], ma});
        }

        Eigen::MatrixXd phi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        for_each_index(exec, n, [&](std::size_t r) {
            Scratch fx(mx), fa(ma);
            model.x_features(xs.subspan(r * dim_x, dim_x), fx.span());
            model.a_features(as.subspan(r * q, q), fa.span());
            const auto row = static_cast<Eigen::Index>(r);
            for (std::size_t i = 0; i < mx; ++i) {
                for (std::size_t j = 0; j < ma; ++j) {
                    const double v = fx[i] * fa[j];
                    phi(row, static_cast<Eigen::Index>(i * ma + j)) = v;
                    for (std::size_t c = 0; c < nh; ++c) {
                        phi(row, static_cast<Eigen::Index>((c + 1) * m + i * ma + j)) = v * cv.h[r * nh + c];
                    }
                }
            }
            y(row) = targets[r];
        });
        const LsqResult res = least_squares(phi, y);
        model.coefficients_ = {to_std(res.coef.head(static_cast<Eigen::Index>(m)))};
        model.condition_ = res.condition;
        model.ridge_ = res.ridge;
        return model;
    }
};

void RegressionModel::a_features(ConstVec a, MutVec out) const
{
    Scratch z(static_cast<std::size_t>(dim_a_));
    for (int i = 0; i < dim_a_; ++i) {
        z[i] = a_scale_.apply(i, a[i]);
    }
    a_mono_.eval(z.span(), out);
}

RegressionModel fit_indexed(const BasisSpec& spec, const ControlGrid& controls, ConstVec xs, int dim_x,
                            std::span<const std::uint32_t> regimes, ConstVec targets, const Execution& exec,
                            const ControlVariates& cv)
{
    std::vector<double> as;
    if (spec.kind == BasisKind::poly_xa) {
        const int q = controls.dim();
        as.resize(regimes.size() * q);
        for (std::size_t i = 0; i < regimes.size(); ++i) {
            require(regimes[i] < controls.size(), "fit: regime index out of range");
            std::copy_n(controls.point(regimes[i]).begin(), q, as.begin() + static_cast<std::ptrdiff_t>(i * q));
        }
    }
    return RegressionBuilder::build(spec, controls, xs, dim_x, as, regimes, targets, exec, cv);
}

RegressionModel fit(const BasisSpec& spec, const ControlGrid& controls, ConstVec xs, int dim_x,
                    ConstVec as, ConstVec targets, const Execution& exec)
{
    const int q = controls.dim();
    std::vector<std::uint32_t> regimes;
    if (spec.kind == BasisKind::poly_x_per_a) {
        require(as.size() == targets.size() * static_cast<std::size_t>(q),
                "fit: regime coordinates do not match targets");
        regimes.resize(targets.size());
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const auto idx = controls.index_of(as.subspan(i * q, q));
            if (!idx) {
                throw ConfigError("regime not in control grid (sample " + std::to_string(i) + ")");
            }
            regimes[i] = static_cast<std::uint32_t>(*idx);
        }
    }
    return RegressionBuilder::build(spec, controls, xs, dim_x, as, regimes, targets, exec, {});
}

double predict(const RegressionModel& model, ConstVec x, ConstVec a)
{
    return model.predict(x, a);
}

ControlChoice argmax_over_controls(const RegressionModel& model, ConstVec x, const ControlGrid& grid)
{
    require(grid.size() > 0, "argmax_over_controls: empty control grid");
    if (grid == model.controls()) {
        return model.argmax(x);
    }
    ControlChoice best{0, -std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double v = model.predict(x, grid.point(k));
        if (v > best.value) {
            best = {k, v};
        }
    }
    return best;
}

} // namespace ctrlrand
