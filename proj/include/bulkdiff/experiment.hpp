#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bulkdiff/cell.hpp"
#include "bulkdiff/coefficient.hpp"
#include "bulkdiff/functional.hpp"

namespace bulkdiff {

/// Exit code contract shared by the library entry points and the CLI.
enum class RunStatus : int {
    Ok = 0,
    ValidationError = 2,
    NumericError = 3,
    CheckFailed = 4,
};

struct TwoPointSettings {
    double torus_side = 27.0;
    double dt = 0.05;
    std::size_t replicas = 2000;
    int grid_intervals = 432;
    std::vector<std::array<double, 2>> pairs = {{0.5, 0.0}, {1.0, 0.0}};
    double f_center = -3.0;
    double f_sigma = 1.0;
    double g_center = 3.0;
    double g_sigma = 1.5;
};

/// Declarative description of an experiment; schema-validated before any
/// compute. The JSON layout is documented in the README.
struct ExperimentConfig {
    std::string model_kind = "count-indicator";
    double model_lambda = 2.0;
    int model_threshold = 2;
    double model_smoothing = 0.25;

    int dimension = 1;
    double rho = 1.0;
    std::vector<double> direction; // empty: e1
    std::vector<int> m_list = {0, 1, 2};
    BasisSpec basis;

    std::size_t samples = 4000;
    std::size_t eval_samples = 0;
    std::size_t palm_samples = 16000;
    std::uint64_t seed = 1;
    std::vector<double> lambda_grid = {0.0, 0.1, 1.0, 10.0};

    TwoPointSettings two_point;

    std::optional<double> alpha_override;
    std::optional<double> abar_reference; // p . abar p for the unit direction
    std::string output_dir = "out";
    int workers = 0;

    CoefficientModel model() const;
    Vec direction_vec() const;
    CellProblemSpec cell_spec(int m) const;

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
    std::string to_json_text() const;
    std::uint64_t config_hash() const;
    void validate() const; // throws std::invalid_argument
};

struct CommandResult {
    std::vector<std::string> files;
    std::string summary;
};

/// Cell-problem sweep over the configured scales: per-scale matrices and
/// duality gaps as CSV, rate extrapolation as JSON, plus the run manifest.
CommandResult cmd_abar(const ExperimentConfig& cfg);

/// Chain-versus-kernel two-point table over the configured time pairs.
CommandResult cmd_two_point(const ExperimentConfig& cfg);

/// Localized transport-coefficient sweep over (m, lambda).
CommandResult cmd_green_kubo(const ExperimentConfig& cfg);

/// Fast self-check battery; prints one line per check.
struct SelftestReport {
    int passed = 0;
    int failed = 0;
    std::vector<std::string> lines;
    bool ok() const { return failed == 0; }
};
SelftestReport run_selftest(std::ostream& log);

struct AuditResult {
    bool pass = true;
    std::string invariant; // named invariant that failed (or checked)
    std::string message;
};

/// Spectrum of the rule inside [1, lambda] over random inputs; the named
/// invariant is "uniform-ellipticity".
AuditResult ellipticity_audit(const CoefficientModel& model, int trials, std::uint64_t seed);

/// Coefficient changes under edits outside the unit ball; named "finite-range".
AuditResult locality_audit(const CoefficientModel& model, int trials, std::uint64_t seed);

/// Detailed-balance certificate of the discretized two-particle chain on a
/// small periodic lattice: max |pi K - (pi K)^T| over the sweep kernel.
double detailed_balance_defect(int sites, double dt, const CoefficientModel& model);

/// Entry point shared with the C API: runs one of
/// abar | two-point | green-kubo | selftest against a config file or inline
/// JSON, applying optional overrides. Never throws; errors map to statuses.
RunStatus run_command(const std::string& command, const std::string& config_path_or_json,
                      const std::string& output_dir_override, int workers_override,
                      std::optional<std::uint64_t> seed_override,
                      std::optional<double> alpha_override, std::ostream& log);

/// Output root fallback: $BULKDIFF_OUTPUT_ROOT, else the current directory.
std::string resolve_output_dir(const std::string& configured);

} // namespace bulkdiff
