#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>

#include "eomsim/biphoton_source.hpp"
#include "eomsim/detection.hpp"
#include "eomsim/optical_chain.hpp"
#include "eomsim/waveform.hpp"

namespace eomsim {

enum class TriggerMode {
    /// Each D1 tag fires the generator.
    Herald,
    /// An external clock at `rate_hz` with a random phase fires the generator.
    ExternalClock,
};

struct TriggerSpec {
    TriggerMode mode = TriggerMode::Herald;
    double rate_hz = 0.0;
};

struct DriveSpec {
    /// Programmed generator waveform, before bandwidth limiting. Empty when
    /// the scenario has no drive.
    std::optional<DriveWaveform> waveform;
    /// Produced by arcsin predistortion; such waveforms are never clamped.
    bool predistorted = false;
    TriggerSpec trigger;
    std::string kind_name = "none";
};

struct AnalysisOptions {
    /// Start of the coincidence and signal windows relative to the D1 tag.
    /// Empty means the total fiber delay of the chain.
    std::optional<double> window_offset_ns;
    double tail_window_ns = 200.0;
    /// Length of the window used for the paired-count area. Empty means T_c.
    std::optional<double> signal_window_ns;
};

struct OutputOptions {
    std::string directory;
    bool events_csv = false;
    bool gnuplot = true;
};

struct Scenario {
    std::string name;
    SourceParams source;
    BiphotonShape shape;
    double stokes_path_transmission = 1.0;
    ChainConfig chain;
    GeneratorParams generator;
    double synthesis_sample_period_ns = 0.25;
    DriveSpec drive;
    DetectorBank detectors;
    TdcConfig tdc;
    AnalysisOptions analysis;
    OutputOptions outputs;
    /// Free-form descriptive metadata; not part of the config digest.
    std::map<std::string, std::string> annotations;

    double window_offset_ns() const;
    double signal_window_ns() const;
};

Scenario parse_scenario(const std::filesystem::path &path);
Scenario parse_scenario_text(std::string_view text, const std::filesystem::path &base_dir, std::string_view source_name);

/// Cross-module checks; throws ValidationError naming the offending field.
void validate_scenario(const Scenario &scenario);

/// Canonical description of every field that affects results. Outputs and
/// annotations are excluded.
nlohmann::json canonical_json(const Scenario &scenario);

/// Hex SHA-256 of the canonical description.
std::string config_digest(const Scenario &scenario);

}  // namespace eomsim
