#include "ctrlrand/problems.hpp"

#include "ctrlrand/error.hpp"
#include "ctrlrand/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ctrlrand {

ReferenceKind parse_reference(const std::string& s)
{
    if (s == "riccati") return ReferenceKind::riccati;
    if (s == "bsb") return ReferenceKind::bsb;
    if (s == "fd") return ReferenceKind::fd;
    if (s == "mc_nocontrol") return ReferenceKind::mc_nocontrol;
    throw ConfigError("unknown reference '" + s + "' (expected riccati, bsb, fd or mc_nocontrol)");
}

std::string to_string(ReferenceKind r)
{
    switch (r) {
    case ReferenceKind::riccati: return "riccati";
    case ReferenceKind::bsb: return "bsb";
    case ReferenceKind::fd: return "fd";
    case ReferenceKind::mc_nocontrol: return "mc_nocontrol";
    }
    return "?";
}

ReferenceKind default_reference(const std::string& name)
{
    if (name == "lq1d") return ReferenceKind::riccati;
    if (name == "bsb_call") return ReferenceKind::bsb;
    if (name == "nocontrol_gbm") return ReferenceKind::mc_nocontrol;
    throw ConfigError("unknown problem '" + name + "'");
}

std::vector<std::string> problem_parameter_names(const std::string& name)
{
    if (name == "lq1d") return {"beta", "c_a", "c_x", "c_g", "s", "a_max", "x0", "T"};
    if (name == "bsb_call") return {"x0", "K", "sigma_lo", "sigma_hi", "T"};
    if (name == "nocontrol_gbm") return {"x0", "mu", "s", "T"};
    throw ConfigError("unknown problem '" + name + "' (expected lq1d, bsb_call or nocontrol_gbm)");
}

namespace {

void check_keys(const std::string& name, const ParamMap& params)
{
    const auto allowed = problem_parameter_names(name);
    for (const auto& [k, v] : params) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            throw ConfigError("unknown parameter '" + k + "' for problem " + name);
        }
    }
}

double get(const ParamMap& m, const std::string& k, double fallback)
{
    const auto it = m.find(k);
    return it == m.end() ? fallback : it->second;
}

} // namespace

LqParams lq_params(const ParamMap& params)
{
    check_keys("lq1d", params);
    LqParams lq;
    lq.beta = get(params, "beta", lq.beta);
    lq.c_a = get(params, "c_a", lq.c_a);
    lq.c_x = get(params, "c_x", lq.c_x);
    lq.c_g = get(params, "c_g", lq.c_g);
    lq.s = get(params, "s", lq.s);
    lq.a_max = get(params, "a_max", lq.a_max);
    lq.x0 = get(params, "x0", lq.x0);
    lq.T = get(params, "T", lq.T);
    return lq;
}

BsbParams bsb_params(const ParamMap& params)
{
    check_keys("bsb_call", params);
    BsbParams b;
    b.x0 = get(params, "x0", b.x0);
    b.K = get(params, "K", b.K);
    b.sigma_lo = get(params, "sigma_lo", b.sigma_lo);
    b.sigma_hi = get(params, "sigma_hi", b.sigma_hi);
    b.T = get(params, "T", b.T);
    return b;
}

GbmParams gbm_params(const ParamMap& params)
{
    check_keys("nocontrol_gbm", params);
    GbmParams g;
    g.x0 = get(params, "x0", g.x0);
    g.mu = get(params, "mu", g.mu);
    g.s = get(params, "s", g.s);
    g.T = get(params, "T", g.T);
    return g;
}

Problem make_lq_problem(const LqParams& lq, int control_points)
{
    lq.validate();
    ProblemData d;
    d.name = "lq1d";
    d.dim_d = 1;
    d.controls = ControlSet::interval(-lq.a_max, lq.a_max, control_points);
    d.drift = [beta = lq.beta](ConstVec x, ConstVec a, MutVec out) { out[0] = beta * x[0] + a[0]; };
    d.diffusion = [s = lq.s](ConstVec, ConstVec, MutVec out) { out[0] = s; };
    d.driver = [cx = lq.c_x, ca = lq.c_a](ConstVec x, ConstVec a, double) {
        return -(cx * x[0] * x[0] + ca * a[0] * a[0]);
    };
    d.terminal = [cg = lq.c_g](ConstVec x) { return -cg * x[0] * x[0]; };
    d.horizon = lq.T;
    d.x0 = {lq.x0};
    // regime closest to a = 0
    const ControlGrid g = control_grid(d.controls);
    std::size_t best = 0;
    for (std::size_t j = 1; j < g.size(); ++j) {
        if (std::abs(g.point(j)[0]) < std::abs(g.point(best)[0])) {
            best = j;
        }
    }
    d.i0 = {g.point(best)[0]};
    d.lipschitz_x = std::max(std::abs(lq.beta), 1.0);
    return Problem(std::move(d));
}

Problem make_bsb_problem(const BsbParams& bp, int control_points)
{
    require(bp.sigma_lo > 0.0 && bp.sigma_lo <= bp.sigma_hi, "bsb_call: need 0 < sigma_lo <= sigma_hi");
    require(bp.x0 > 0.0 && bp.K > 0.0 && bp.T > 0.0, "bsb_call: x0, K, T must be positive");
    ProblemData d;
    d.name = "bsb_call";
    d.dim_d = 1;
    d.controls = ControlSet::interval(bp.sigma_lo, bp.sigma_hi, control_points);
    d.drift = [](ConstVec, ConstVec, MutVec out) { out[0] = 0.0; };
    d.diffusion = [](ConstVec x, ConstVec a, MutVec out) { out[0] = a[0] * x[0]; };
    d.driver = [](ConstVec, ConstVec, double) { return 0.0; };
    d.terminal = [K = bp.K](ConstVec x) { return std::max(x[0] - K, 0.0); };
    d.horizon = bp.T;
    d.x0 = {bp.x0};
    d.i0 = {bp.sigma_hi};
    d.lipschitz_x = bp.sigma_hi;
    return Problem(std::move(d));
}

Problem make_gbm_problem(const GbmParams& gp)
{
    require(gp.T > 0.0 && gp.s >= 0.0, "nocontrol_gbm: need T > 0 and s >= 0");
    ProblemData d;
    d.name = "nocontrol_gbm";
    d.dim_d = 1;
    d.controls = ControlSet::interval(0.0, 0.0, 1);
    d.drift = [mu = gp.mu](ConstVec x, ConstVec, MutVec out) { out[0] = mu * x[0]; };
    d.diffusion = [s = gp.s](ConstVec x, ConstVec, MutVec out) { out[0] = s * x[0]; };
    d.driver = [](ConstVec, ConstVec, double) { return 0.0; };
    d.terminal = [](ConstVec x) { return x[0]; };
    d.horizon = gp.T;
    d.x0 = {gp.x0};
    d.i0 = {0.0};
    d.lipschitz_x = std::abs(gp.mu) + gp.s;
    d.control_free = true;
    return Problem(std::move(d));
}

Problem make_named_problem(const ProblemSpec& spec)
{
    if (spec.name == "lq1d") return make_lq_problem(lq_params(spec.params), spec.control_points);
    if (spec.name == "bsb_call") return make_bsb_problem(bsb_params(spec.params), spec.control_points);
    if (spec.name == "nocontrol_gbm") return make_gbm_problem(gbm_params(spec.params));
    throw ConfigError("unknown problem '" + spec.name + "' (expected lq1d, bsb_call or nocontrol_gbm)");
}

double reference_value(const ProblemSpec& spec, ReferenceKind kind, const ReferenceOptions& opts)
{
    switch (kind) {
    case ReferenceKind::riccati: {
        require(spec.name == "lq1d", "riccati reference is only available for lq1d");
        const LqParams lq = lq_params(spec.params);
        return riccati_value(lq, lq.x0);
    }
    case ReferenceKind::bsb: {
        require(spec.name == "bsb_call", "bsb reference is only available for bsb_call");
        const BsbParams b = bsb_params(spec.params);
        return bsb_reference(b.x0, b.K, b.sigma_lo, b.sigma_hi, b.T);
    }
    case ReferenceKind::fd: {
        const Problem p = make_named_problem(spec);
        FdConfig cfg = default_fd_config(p, opts.fd_n_space);
        cfg.control_points = p.grid().size() > 1 ? opts.fd_control_points : 0;
        return solve_hjb_fd(p, cfg)(p.x0()[0]);
    }
    case ReferenceKind::mc_nocontrol: {
        require(spec.name == "nocontrol_gbm", "mc_nocontrol reference is only available for nocontrol_gbm");
        require(opts.mc_paths >= 1, "mc_nocontrol: need at least one path");
        const GbmParams g = gbm_params(spec.params);
        // exact log-normal sampling of X_T
        PathRng rng(opts.mc_seed, 0, StreamTag::oracle);
        std::normal_distribution<double> normal;
        const double drift = (g.mu - 0.5 * g.s * g.s) * g.T;
        const double vol = g.s * std::sqrt(g.T);
        double sum = 0.0;
        for (std::size_t i = 0; i < opts.mc_paths; ++i) {
            sum += g.x0 * std::exp(drift + vol * normal(rng));
        }
        return sum / static_cast<double>(opts.mc_paths);
    }
    }
    throw ConfigError("unknown reference kind");
}

} // namespace ctrlrand
