#pragma once

// Study orchestration behind the command line: a validated configuration,
// the runs it describes, and their CSV/JSON serialization.

#include "ladder/params.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ladder::study {

inline constexpr int schema_version = 1;

enum class Command { graph_bands, graph_gaps, graph_eigs, fem_bands, fem_localized, study_convergence };
std::string to_string(Command c);
Command parse_command(const std::string& text);

enum class StudyKind { bands, eigs, quasimode, flatband, all };
std::string to_string(StudyKind k);
StudyKind parse_study_kind(const std::string& text);

struct StudyConfig {
    Command command = Command::graph_gaps;
    LengthSpec L{2, 1};
    std::vector<double> eps;
    std::vector<double> mu{1.0};
    SymmetryClass cls = SymmetryClass::symmetric;
    double omega_max = 12.0;
    int ntheta = 64;
    /// Mesh size; unset means h = eps * h_factor for every eps.
    std::optional<double> h;
    double h_factor = 0.25;
    int cells = 10;
    int nev = 5;
    /// Gap index (1-based) for localized runs.
    int gap = 1;
    /// Omega interval for localized runs.
    std::optional<std::pair<double, double>> window;
    std::string out;
    std::uint64_t seed = 20240611;
    double tol = 1e-10;
    StudyKind study = StudyKind::all;
    /// Slope windows used by the convergence study.
    std::pair<double, double> band_slope{0.8, 1.2};
    double eig_slope_min = 0.8;
    double residual_exponent_min = 0.5;
    /// Relative tolerance on the width-halving ratio of the flat-band study.
    double halving_tol = 0.3;
    bool dump_modes = false;

    /// Throws ConfigError naming the first invalid field.
    void validate() const;
    double mesh_size(double eps) const { return h ? *h : eps * h_factor; }

    friend bool operator==(const StudyConfig&, const StudyConfig&) = default;
};

std::string config_to_json(const StudyConfig& c);
StudyConfig config_from_json(const std::string& text);

struct Output {
    /// CSV with a leading "# " line holding the schema version and the config.
    std::string csv;
    /// {"schema_version", "config", "results"}.
    std::string json;
    /// Extra files (mesh dumps) keyed by suffix.
    std::vector<std::pair<std::string, std::string>> attachments;
    /// Convergence studies only: all slope checks passed.
    std::optional<bool> pass;
};

Output run(const StudyConfig& config);

/// Config and results parsed back from a report written by run().
struct ParsedReport {
    StudyConfig config;
    std::string results_json;
};
ParsedReport parse_report(const std::string& json);

/// Convergence of one quantity against eps.
struct Series {
    std::string name;
    std::vector<double> eps;
    std::vector<double> value;
    std::vector<double> reference;
    std::vector<double> error;
    double slope = 0.0;
};

struct ConvergenceResult {
    StudyKind kind = StudyKind::bands;
    std::vector<Series> series;
    bool pass = false;
    std::vector<std::string> notes;
    /// Extra scalar diagnostics (fitted constants, counts).
    std::map<std::string, double> values;
};

/// First-gap FEM edges against the graph edges.
ConvergenceResult band_edge_study(const StudyConfig& c);
/// Supercell eigenvalues in the same-eps FEM gap against the graph roots.
ConvergenceResult eigenvalue_study(const StudyConfig& c);
/// Residual of the fattened graph eigenfunctions.
ConvergenceResult quasimode_study(const StudyConfig& c);
/// Width of the FEM band growing out of the first flat band.
ConvergenceResult flatband_study(const StudyConfig& c);

/// %.16e formatting used in every CSV.
std::string format_number(double v);

} // namespace ladder::study
