#include "eomsim/optical_chain.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "eomsim/errors.hpp"

namespace eomsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool is_probability(double p) {
    return p >= 0.0 && p <= 1.0;
}

[[noreturn]] void invalid(const std::string &what) {
    throw Error(ErrorKind::InvalidParams, what);
}

constexpr std::string_view kModulatorLabel = "modulator";
constexpr std::string_view kBeamsplitterLabel = "beamsplitter";

}  // namespace

double ChainConfig::total_delay_ns() const {
    double total = 0.0;
    for (const auto &e : elements) {
        if (const auto *f = std::get_if<FiberDelay>(&e)) {
            total += f->delay_ns;
        }
    }
    return total;
}

const ModulatorElement *ChainConfig::modulator() const {
    for (const auto &e : elements) {
        if (const auto *m = std::get_if<ModulatorElement>(&e)) {
            return m;
        }
    }
    return nullptr;
}

const Beamsplitter &ChainConfig::beamsplitter() const {
    if (elements.empty() || !std::holds_alternative<Beamsplitter>(elements.back())) {
        invalid("chain must end with a beamsplitter");
    }
    return std::get<Beamsplitter>(elements.back());
}

void validate_modulator(const ModulatorParams &p) {
    if (!(std::isfinite(p.v_pi) && p.v_pi > 0.0)) {
        invalid("modulator V_pi must be > 0");
    }
    if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) {
        invalid("modulator alpha must lie in [0, 1]");
    }
    if (!is_probability(p.insertion_transmission)) {
        invalid("modulator insertion_transmission must lie in [0, 1]");
    }
    if (!(std::isfinite(p.max_frequency_hz) && p.max_frequency_hz > 0.0)) {
        invalid("modulator max_frequency must be > 0");
    }
    if (!std::isfinite(p.idle_voltage)) {
        invalid("modulator idle_voltage must be finite");
    }
    if (!is_probability(p.leakage)) {
        invalid("modulator leakage must lie in [0, 1]");
    }
}

void validate_chain(const ChainConfig &chain) {
    int modulators = 0;
    int delays = 0;
    int splitters = 0;
    for (std::size_t i = 0; i < chain.elements.size(); ++i) {
        std::visit(overloaded{
                       [&](const LossElement &l) {
                           if (!is_probability(l.transmission)) {
                               invalid("loss element '" + l.label + "' transmission must lie in [0, 1]");
                           }
                       },
                       [&](const FiberDelay &f) {
                           ++delays;
                           if (!(std::isfinite(f.delay_ns) && f.delay_ns >= 0.0)) {
                               invalid("fiber delay must be >= 0");
                           }
                       },
                       [&](const ModulatorElement &m) {
                           ++modulators;
                           validate_modulator(m.params);
                       },
                       [&](const Beamsplitter &b) {
                           ++splitters;
                           if (!is_probability(b.reflect_probability) || !is_probability(b.excess_transmission) ||
                               !is_probability(b.measured_port_transmission)) {
                               invalid("beamsplitter probabilities must lie in [0, 1]");
                           }
                           if (i + 1 != chain.elements.size()) {
                               invalid("beamsplitter must be the last chain element");
                           }
                       },
                   },
                   chain.elements[i]);
    }
    if (modulators > 1) {
        invalid("chain may contain at most one modulator");
    }
    if (delays > 1) {
        invalid("chain may contain at most one fiber delay");
    }
    if (splitters != 1) {
        invalid("chain must contain exactly one beamsplitter");
    }
}

ComplexAmplitude modulator_transfer(double volts, const ModulatorParams &p) {
    const double phi = std::numbers::pi * volts / (2.0 * p.v_pi);
    return std::sin(phi) * std::polar(1.0, p.alpha * phi);
}

double survival_probability(ComplexAmplitude m) {
    const double mag2 = std::norm(m);
    if (mag2 > (1.0 + 1e-12) * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "|m| = " << std::sqrt(mag2) << " exceeds 1";
        throw Error(ErrorKind::AmplitudeOutOfRange, msg.str());
    }
    return std::min(mag2, 1.0);
}

PropagationOutcome propagate(
    const PhotonEvent &event, const ChainConfig &chain, const DriveSchedule *drive, rng::Engine &engine) {
    if (event.channel != PhotonChannel::AntiStokes) {
        throw Error(ErrorKind::ChannelMismatch, "only anti-Stokes photons propagate through the chain");
    }
    double t = event.emit_time_ns;
    for (const auto &element : chain.elements) {
        if (const auto *loss = std::get_if<LossElement>(&element)) {
            if (!engine.bernoulli(loss->transmission)) {
                return Lost{loss->label};
            }
        } else if (const auto *fiber = std::get_if<FiberDelay>(&element)) {
            t += fiber->delay_ns;
        } else if (const auto *mod = std::get_if<ModulatorElement>(&element)) {
            const auto &p = mod->params;
            const double volts = drive ? drive->voltage(t) : p.idle_voltage;
            const double mag2 = survival_probability(modulator_transfer(volts, p));
            const double pass = p.insertion_transmission * (p.leakage + (1.0 - p.leakage) * mag2);
            if (!engine.bernoulli(pass)) {
                return Lost{kModulatorLabel};
            }
        } else {
            const auto &bs = std::get<Beamsplitter>(element);
            if (!engine.bernoulli(bs.excess_transmission)) {
                return Lost{kBeamsplitterLabel};
            }
            const Port port = engine.bernoulli(bs.reflect_probability) ? Port::D3 : Port::D2;
            return Arrived{port, t};
        }
    }
    return Lost{kBeamsplitterLabel};
}

bool stokes_path_survival(double transmission_product, rng::Engine &engine) {
    return engine.bernoulli(transmission_product);
}

}  // namespace eomsim
