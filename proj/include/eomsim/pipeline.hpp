#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eomsim/biphoton_source.hpp"
#include "eomsim/detection.hpp"
#include "eomsim/scenario.hpp"
#include "eomsim/waveform.hpp"

namespace eomsim {

struct RunOptions {
    /// Overrides the scenario seed.
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    /// Multiplies the run duration.
    double time_scale = 1.0;
    /// Retain every generated photon event in the result.
    bool keep_events = false;
};

/// Scenario with the seed override and time scale applied.
Scenario effective_scenario(Scenario scenario, const RunOptions &options);

struct SynthesizedDrive {
    DriveWaveform programmed;
    /// After V_max clamping and the generator's bandwidth limit.
    DriveWaveform output;
    std::uint64_t clamped_samples = 0;
    double active_duration_ns = 0.0;
};

std::optional<SynthesizedDrive> synthesize_drive(const Scenario &scenario);

struct SimulationStats {
    std::uint64_t stokes_emitted = 0;
    std::uint64_t paired_antistokes = 0;
    std::uint64_t single_antistokes = 0;
    std::uint64_t d1_candidates = 0;
    std::uint64_t accepted_triggers = 0;
    std::uint64_t ignored_triggers = 0;
    std::uint64_t arrived_d2 = 0;
    std::uint64_t arrived_d3 = 0;
    /// Anti-Stokes photons lost per chain element label.
    std::map<std::string, std::uint64_t> lost_at;
};

struct SimulationResult {
    Scenario scenario;
    std::optional<SynthesizedDrive> drive;
    TagStream tags;
    Histogram d2;
    Histogram d3;
    Histogram sum;
    CoincidenceCounts counts;
    SimulationStats stats;
    double live_time_s = 0.0;
    std::vector<PhotonEvent> events;
};

/// Runs the full source, chain, detection and histogram pipeline. Results
/// depend only on the scenario and the effective seed; `workers` changes
/// nothing but wall-clock time.
SimulationResult simulate(const Scenario &scenario, const RunOptions &options = {});

}  // namespace eomsim
