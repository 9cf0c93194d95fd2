#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eomsim/analysis.hpp"
#include "eomsim/pipeline.hpp"
#include "eomsim/scenario.hpp"

namespace eomsim {

struct RunReport {
    SimulationResult sim;
    std::string config_digest;
    /// Measured D1 rate and summed D2 + D3 rate, in 1/s.
    double stokes_rate_hz = 0.0;
    double antistokes_rate_hz = 0.0;
    double window_offset_ns = 0.0;
    double signal_window_ns = 0.0;
    double floor_per_herald_per_ns = 0.0;
    double retrieval_efficiency = 0.0;
    bool efficiency_clamped = false;
    std::vector<LedgerEntry> backout_factors;
    double retrieval_backed_out = 0.0;
    /// Empty when N12 or N13 is zero.
    std::optional<G2Cond> g2;
    std::vector<LedgerEntry> eta_ledger;
    double eta = 1.0;
    std::vector<std::string> warnings;
};

/// η factors of a scenario: duty cycle, beamsplitter port and excess loss,
/// Stokes path, every named anti-Stokes loss, both detectors and the
/// modulator insertion loss.
std::vector<LedgerEntry> scenario_eta_ledger(const Scenario &scenario);

/// Anti-Stokes losses backed out of the measured E_R. The beamsplitter split
/// itself is excluded because both ports are summed.
std::vector<LedgerEntry> scenario_backout_factors(const Scenario &scenario);

/// Analysis of a finished simulation. Throws EmptyRun when there are no heralds.
RunReport analyze(SimulationResult sim);

RunReport run(const Scenario &scenario, const RunOptions &options = {});

/// Background-only control: fiber delay removed and the coincidence window
/// moved to the electronic delay, so the drive only ever gates light that is
/// not correlated with the herald.
Scenario control_no_fiber(const Scenario &base);

/// Drive fired by an external clock (default 10 MHz) instead of by D1.
Scenario control_random_trigger(const Scenario &base, double clock_rate_hz = 1e7);

std::pair<RunReport, RunReport> run_controls(const Scenario &base, const RunOptions &options = {});

struct FloorPoint {
    double stokes_rate_hz = 0.0;
    /// Background-free, lossless anti-Stokes path.
    G2Cond floor;
    /// The scenario itself at this Stokes rate; empty if undefined.
    std::optional<G2Cond> with_background;
    std::uint64_t heralds = 0;
};

/// Reduced scenario for the multi-pair floor: no uncorrelated anti-Stokes
/// light, unit anti-Stokes transmission and detection. Normalized g2 is
/// invariant under anti-Stokes loss, so removing it only cuts variance.
Scenario floor_scenario(const Scenario &base, double stokes_rate_hz);

/// g2_cond against the emitted Stokes rate. Each grid point runs long enough
/// to collect about `heralds_per_point` heralds.
std::vector<FloorPoint> multi_pair_floor(
    const Scenario &base,
    const std::vector<double> &stokes_rate_grid,
    const RunOptions &options = {},
    double heralds_per_point = 2e5,
    bool with_background = true);

nlohmann::json report_json(const RunReport &report);
/// Deterministic serialization: no wall-clock data, fixed key order.
std::string report_text(const RunReport &report);

/// report.json, per-port and summed histogram CSVs, drive CSVs, a gnuplot
/// script and (optionally) the photon event list.
void write_outputs(const RunReport &report, const std::filesystem::path &directory);

nlohmann::json floor_curve_json(const std::vector<FloorPoint> &curve);

}  // namespace eomsim
