#pragma once

// Grid and seed sweeps over a named problem, error tables and log-log rate fits.

#include "ctrlrand/execution.hpp"
#include "ctrlrand/problems.hpp"
#include "ctrlrand/regression.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ctrlrand {

/// XOR-ed with the training seed to get the policy evaluation seed.
inline constexpr std::uint64_t kEvaluationSeedMask = 0x9E3779B97F4A7C15ULL;

struct ExperimentConfig {
    ProblemSpec problem{};
    ReferenceKind reference = ReferenceKind::riccati;
    ReferenceOptions reference_options{};
    std::vector<int> grids{10, 20, 40};
    std::size_t n_paths = 100000;
    std::size_t n_eval_paths = 100000;
    std::vector<std::uint64_t> seeds{1};
    double intensity_mass = 1.0;
    BasisSpec basis{};
    bool control_variates = false;
    std::filesystem::path output_dir = "out";
    bool write_diagnostics = false;
    bool write_fd_slice = false;
    Execution exec{};

    void validate() const;
};

/// Sections [problem], [grids], [mc], [regression], [output]; unknown
/// sections or keys throw ConfigError.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& file);

struct ErrorRow {
    int n = 0;
    double modulus = 0.0;
    std::uint64_t seed = 0;
    double value0 = 0.0;
    double j_hat = 0.0;
    double stderr_j = 0.0;
    double v_ref = 0.0;
    double err = 0.0;       ///< value0 - v_ref
    double err_plus = 0.0;  ///< undershoot max(v_ref - value0, 0)
    double err_minus = 0.0; ///< overshoot max(value0 - v_ref, 0)
    bool ok = true;
    std::string failure;
};

/// Slope fitted to the per-grid mean of one error column; nan when fewer than
/// three grids carry a positive mean.
struct RateFit {
    std::string quantity;
    double slope = 0.0;
    std::size_t n_grids = 0;
};

struct ErrorReport {
    std::string problem;
    std::string reference;
    double v_ref = 0.0;
    std::vector<ErrorRow> rows; ///< sorted by n, then seed
    std::vector<RateFit> rates;

    bool has_failures() const;
};

/// Fills err, err_plus, err_minus from value0 and v_ref.
void set_errors(ErrorRow& row);

/// Least-squares slope of log(error) against log(modulus). Nonpositive errors
/// are dropped; fewer than three usable pairs throw.
double estimate_rate(const std::vector<std::pair<double, double>>& pairs);

/// Per-grid means of |err|, err_plus and err_minus over the successful rows,
/// fitted with estimate_rate.
std::vector<RateFit> fit_rates(const std::vector<ErrorRow>& rows);

ErrorReport run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// errors.csv, rates.csv and summary.txt in `dir` (created if missing).
void emit_report(const ErrorReport& report, const std::filesystem::path& dir);

void write_errors_csv(const std::vector<ErrorRow>& rows, std::ostream& os);
void write_rates_csv(const std::vector<RateFit>& rates, std::ostream& os);
/// Reads the columns written by write_errors_csv.
std::vector<ErrorRow> read_errors_csv(std::istream& in);

} // namespace ctrlrand
