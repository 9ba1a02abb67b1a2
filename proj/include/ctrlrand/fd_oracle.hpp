#pragma once

// Reference values for v(0, x0): an explicit monotone finite-difference solver
// for one-dimensional HJB equations
//
//   v_t + max_a [ b(x,a) v_x + 1/2 sigma(x,a)^2 v_xx + f(x,a,v) ] = 0,  v(T,.) = g,
//
// plus closed forms for the linear-quadratic and uncertain-volatility benchmarks.

#include "ctrlrand/core_model.hpp"
#include "ctrlrand/execution.hpp"

#include <iosfwd>
#include <vector>

namespace ctrlrand {

enum class FdBoundary {
    dirichlet_payoff,     ///< v = g on both ends
    linear_extrapolation, ///< v_0 = 2 v_1 - v_2 (and symmetric)
};

struct FdConfig {
    double x_lo = -1.0;
    double x_hi = 1.0;
    int n_space = 400; ///< number of intervals
    int n_time = 0;    ///< minimum time steps; raised to satisfy the stability bound
    FdBoundary boundary = FdBoundary::dirichlet_payoff;
    /// Control grid points per axis used for the max; 0 keeps the problem's grid.
    int control_points = 0;
    Execution exec{};
};

/// Domain x0 +- 5 sigma(x0) sqrt(T) (largest sigma over the control grid).
FdConfig default_fd_config(const Problem& p, int n_space = 400);

/// Time-zero slice of the FD solution with linear interpolation.
class FdSolution {
public:
    FdSolution(std::vector<double> x, std::vector<double> v, int n_time);

    double operator()(double x) const;
    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& v() const { return v_; }
    int n_time() const { return n_time_; }

private:
    std::vector<double> x_;
    std::vector<double> v_;
    int n_time_;
};

/// Monotone explicit scheme: central differences where sigma^2 >= dx |b|,
/// upwind drift otherwise. Throws "domain too stiff" if more than 1e7 time
/// steps would be needed.
FdSolution solve_hjb_fd(const Problem& p, const FdConfig& cfg);

/// Columns x,v.
void write_fd_csv(const FdSolution& sol, std::ostream& os);

/// dX = (beta X + a) dt + s dW, f = -(c_x x^2 + c_a a^2), g = -c_g x^2, a in [-a_max, a_max].
struct LqParams {
    double beta = 0.0;
    double c_a = 1.0;
    double c_x = 0.1;
    double c_g = 1.0;
    double s = 0.5;
    double a_max = 3.0;
    double x0 = 1.0;
    double T = 1.0;

    /// Also checks that the box constraint is inactive on |x| <= |x0| + 3 s sqrt(T).
    void validate() const;
};

/// v(t, x) = -P(t) x^2 - r(t) with P' = -2 beta P + P^2 / c_a - c_x, P(T) = c_g,
/// r' = -s^2 P, r(T) = 0.
struct RiccatiSolution {
    double p0 = 0.0;
    double r0 = 0.0;
    double c_a = 1.0;

    double value(double x) const { return -p0 * x * x - r0; }
    /// Optimal feedback at t = 0 is a*(x) = -gain() x.
    double gain() const { return p0 / c_a; }
};

/// Classical RK4 on [0, T], `steps` fixed steps backward from T.
RiccatiSolution solve_riccati(const LqParams& lq, int steps = 10000);
/// P(t) at an arbitrary time, same integrator.
double riccati_p(const LqParams& lq, double t, int steps = 10000);
double riccati_value(const LqParams& lq, double x);

double normal_cdf(double x);
/// Zero-rate Black-Scholes call.
double black_scholes_call(double x0, double K, double sigma, double T);
/// Black-Scholes-Barenblatt superreplication price of (x - K)^+ with
/// volatility in [sigma_lo, sigma_hi]; for this convex payoff it is the
/// Black-Scholes price at sigma_hi.
double bsb_reference(double x0, double K, double sigma_lo, double sigma_hi, double T);

} // namespace ctrlrand
