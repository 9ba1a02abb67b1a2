#pragma once

#include "ctrlrand/core_model.hpp"

#include <cmath>
#include <utility>

namespace testing_support {

using namespace ctrlrand;

/// One-dimensional control-free problem with scalar coefficient lambdas.
template <class B, class S, class F, class G>
Problem scalar_problem(B b, S s, F f, G g, double x0 = 1.0, double T = 1.0, bool y_dep = false)
{
    ProblemData d;
    d.dim_d = 1;
    d.controls = ControlSet::interval(0.0, 0.0, 1);
    d.drift = [b](ConstVec x, ConstVec, MutVec out) { out[0] = b(x[0]); };
    d.diffusion = [s](ConstVec x, ConstVec, MutVec out) { out[0] = s(x[0]); };
    d.driver = [f](ConstVec x, ConstVec, double y) { return f(x[0], y); };
    d.terminal = [g](ConstVec x) { return g(x[0]); };
    d.horizon = T;
    d.x0 = {x0};
    d.i0 = {0.0};
    d.lipschitz_x = 1.0;
    d.f_depends_on_y = y_dep;
    d.lipschitz_y = y_dep ? 1.0 : 0.0;
    d.control_free = true;
    return Problem(std::move(d));
}

inline Problem gbm(double mu, double s, double x0 = 1.0, double T = 1.0)
{
    return scalar_problem([mu](double x) { return mu * x; }, [s](double x) { return s * x; },
                          [](double, double) { return 0.0; }, [](double x) { return x; }, x0, T);
}

} // namespace testing_support
