#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace eomsim {

struct RectPulse {
    double start_ns;
    double stop_ns;
    double volts;
};

struct RectPulses {
    std::vector<RectPulse> pulses;
};

/// Defined on [max(0, center - 5 sigma), center + 5 sigma].
struct GaussianPulse {
    double center_ns;
    double sigma_ns;
    double peak_volts;
};

/// peak * exp((t - end) / time_constant) on [0, end].
struct RisingExponential {
    double time_constant_ns;
    double end_ns;
    double peak_volts;
};

/// Samples at start + k * sample_period, linearly interpolated.
struct TabulatedWave {
    double start_ns = 0.0;
    double sample_period_ns = 1.0;
    std::vector<double> volts;
};

/// Function-generator output relative to its trigger origin. Outside the
/// kind's support the generator holds `bias_voltage`.
struct DriveWaveform {
    std::variant<RectPulses, GaussianPulse, RisingExponential, TabulatedWave> kind;
    double bias_voltage = 0.0;
};

struct GeneratorParams {
    double electronic_delay_ns = 190.0;
    /// Single-pole low-pass cutoff.
    double bandwidth_hz = 80e6;
    double v_max = 5.0;
    bool retriggerable = false;
};

void validate_generator(const GeneratorParams &params);
/// Structural checks (ordering, positive periods). Magnitudes are checked
/// against V_max only where the caller asks, since synthesis clamps.
void validate_waveform(const DriveWaveform &w);

double voltage_at(const DriveWaveform &w, double t_ns);

/// Support of the kind as [begin, end) relative to the trigger origin.
std::pair<double, double> waveform_support(const DriveWaveform &w);

/// Samples an amplitude target f(tau) in [0, 1] and inverts the modulator's
/// sine transfer: V = (2 V_pi / pi) * asin(f). Throws TargetOutOfRange with
/// the offending delay if f leaves [0, 1].
DriveWaveform predistort(
    const std::function<double(double)> &target,
    double v_pi,
    double sample_period_ns,
    std::pair<double, double> support_ns);

/// Filters `w` through a single-pole low-pass of the generator's bandwidth.
/// Uses the exact ramp-invariant discretization of the RC filter, so DC gain
/// is exactly 1 and the response is linear in the input samples. The result
/// starts at 0 (the trigger) and runs 10 filter time constants past the end
/// of the input support.
DriveWaveform bandwidth_limit(const DriveWaveform &w, const GeneratorParams &params, double sample_period_ns);

/// Clamps a waveform's programmed values into [-V_max, V_max]. Returns the
/// number of values that had to be clamped.
std::size_t clamp_to_vmax(DriveWaveform &w, double v_max);

/// Trigger at `herald_time` starts the waveform after the electronic delay.
double trigger_schedule(double herald_time_ns, const GeneratorParams &params);

/// Generator output over the whole run: a waveform restarted at each
/// accepted trigger origin, bias outside any active waveform.
class DriveSchedule {
   public:
    DriveSchedule(DriveWaveform waveform, std::vector<double> origins_ns);

    /// `count` origins at first + k * period, without materializing them.
    static DriveSchedule periodic(DriveWaveform waveform, double first_origin_ns, double period_ns, std::uint64_t count);

    double voltage(double t_ns) const;

    const DriveWaveform &waveform() const noexcept {
        return waveform_;
    }
    /// Explicit origins; empty for a periodic schedule.
    const std::vector<double> &origins() const noexcept {
        return origins_;
    }
    std::uint64_t origin_count() const noexcept {
        return period_ns_ > 0.0 ? periodic_count_ : origins_.size();
    }
    double active_duration() const noexcept {
        return active_ns_;
    }

   private:
    DriveWaveform waveform_;
    std::vector<double> origins_;
    double active_ns_;
    double first_origin_ns_ = 0.0;
    double period_ns_ = 0.0;
    std::uint64_t periodic_count_ = 0;
};

struct ScheduleBuild {
    std::vector<double> origins_ns;
    std::uint64_t ignored_triggers = 0;
};

/// Applies the electronic delay to sorted trigger times and, for a
/// non-retriggerable generator, drops triggers that arrive while a waveform
/// is still running.
ScheduleBuild schedule_triggers(
    const std::vector<double> &trigger_times_ns, const GeneratorParams &params, double active_duration_ns);

struct ClockSchedule {
    double first_origin_ns = 0.0;
    /// Spacing of accepted origins: the clock period, or the smallest
    /// multiple of it that outlasts the waveform when not retriggerable.
    double period_ns = 0.0;
    std::uint64_t accepted = 0;
    std::uint64_t ignored_triggers = 0;
};

/// External clock ticks at phase + k / rate over [0, total_ns), each delayed
/// by the electronic delay.
ClockSchedule clock_schedule(
    double phase_ns, double rate_hz, const GeneratorParams &params, double active_duration_ns, double total_ns);

/// Two-column CSV `time_ns,volts` with 6 significant digits.
void write_waveform_csv(std::ostream &out, const DriveWaveform &w, double sample_period_ns);
/// Reads a uniformly sampled `time_ns,volts` CSV into a tabulated waveform.
DriveWaveform read_waveform_csv(std::istream &in, const std::string &source_name);

}  // namespace eomsim
