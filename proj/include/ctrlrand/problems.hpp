#pragma once

// Built-in named problems exposed by the CLI.

#include "ctrlrand/core_model.hpp"
#include "ctrlrand/fd_oracle.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ctrlrand {

using ParamMap = std::map<std::string, double>;

struct BsbParams {
    double x0 = 100.0;
    double K = 100.0;
    double sigma_lo = 0.1;
    double sigma_hi = 0.2;
    double T = 1.0;
};

/// Control-free geometric Brownian motion, dX = mu X dt + s X dW, g(x) = x.
struct GbmParams {
    double x0 = 1.0;
    double mu = 0.0;
    double s = 0.2;
    double T = 1.0;
};

/// "lq1d", "bsb_call" or "nocontrol_gbm" with numeric overrides.
struct ProblemSpec {
    std::string name = "lq1d";
    ParamMap params;
    int control_points = 21;
};

enum class ReferenceKind { riccati, bsb, fd, mc_nocontrol };

ReferenceKind parse_reference(const std::string& s);
std::string to_string(ReferenceKind r);
ReferenceKind default_reference(const std::string& problem_name);

/// Parameter names accepted by a named problem.
std::vector<std::string> problem_parameter_names(const std::string& name);

LqParams lq_params(const ParamMap& params);
BsbParams bsb_params(const ParamMap& params);
GbmParams gbm_params(const ParamMap& params);

Problem make_lq_problem(const LqParams& lq, int control_points);
Problem make_bsb_problem(const BsbParams& bp, int control_points);
Problem make_gbm_problem(const GbmParams& gp);
Problem make_named_problem(const ProblemSpec& spec);

struct ReferenceOptions {
    int fd_n_space = 800;
    int fd_control_points = 201;
    std::size_t mc_paths = 1000000;
    std::uint64_t mc_seed = 20140101;
};

/// Reference value v(0, x0) for a named problem.
double reference_value(const ProblemSpec& spec, ReferenceKind kind, const ReferenceOptions& opts = {});

} // namespace ctrlrand
