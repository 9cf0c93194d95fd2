#pragma once

#include <complex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "eomsim/biphoton_source.hpp"
#include "eomsim/rng.hpp"
#include "eomsim/waveform.hpp"

namespace eomsim {

using ComplexAmplitude = std::complex<double>;

struct ModulatorParams {
    double v_pi = 1.3;
    /// Chirp: phase accrued per radian of drive phase (0 for an x-cut device).
    double alpha = 0.75;
    double insertion_transmission = 0.5;
    /// Recorded only; the generator bandwidth dominates.
    double max_frequency_hz = 10e9;
    /// Voltage seen by the modulator when no generator drive is configured.
    double idle_voltage = 0.0;
    /// Intensity transmission floor at extinction; 0 means perfect extinction.
    double leakage = 0.0;
};

struct LossElement {
    double transmission = 1.0;
    std::string label;
};

struct FiberDelay {
    double delay_ns = 0.0;
};

struct ModulatorElement {
    ModulatorParams params;
};

struct Beamsplitter {
    /// Probability of routing to D3; D2 gets the complement.
    double reflect_probability = 0.5;
    /// Excess loss of the splitter assembly, applied before routing.
    double excess_transmission = 1.0;
    /// Measured transmission to one output port; used only for the eta ledger.
    double measured_port_transmission = 0.5;
};

using ChainElement = std::variant<LossElement, FiberDelay, ModulatorElement, Beamsplitter>;

/// Ordered anti-Stokes path. Valid chains hold at most one modulator, at most
/// one fiber delay, and end in exactly one beamsplitter.
struct ChainConfig {
    std::vector<ChainElement> elements;

    double total_delay_ns() const;
    const ModulatorElement *modulator() const;
    const Beamsplitter &beamsplitter() const;
};

void validate_modulator(const ModulatorParams &p);
void validate_chain(const ChainConfig &chain);

/// sin(phi) * exp(i alpha phi) with phi = pi V / (2 V_pi).
ComplexAmplitude modulator_transfer(double volts, const ModulatorParams &p);

/// |m|^2. Throws AmplitudeOutOfRange when |m| > 1 + 1e-12.
double survival_probability(ComplexAmplitude m);

enum class Port : std::uint8_t { D2 = 0, D3 = 1 };

struct Arrived {
    Port port;
    double arrival_time_ns;
};

struct Lost {
    /// Points into the chain's element labels; valid while the chain lives.
    std::string_view at;
};

using PropagationOutcome = std::variant<Arrived, Lost>;

/// Pushes one anti-Stokes photon through the chain. Losses are Bernoulli
/// trials drawn from `engine` in element order. The modulator reads the drive
/// at the photon's arrival time at the modulator (emission plus upstream delay);
/// with no drive it sees the modulator's idle voltage.
PropagationOutcome propagate(
    const PhotonEvent &event, const ChainConfig &chain, const DriveSchedule *drive, rng::Engine &engine);

bool stokes_path_survival(double transmission_product, rng::Engine &engine);

}  // namespace eomsim
