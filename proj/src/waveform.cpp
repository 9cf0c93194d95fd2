#include "eomsim/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <utility>

#include "eomsim/errors.hpp"

namespace eomsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void invalid(const std::string &what) {
    throw Error(ErrorKind::InvalidParams, what);
}

double tau_rc_ns(double bandwidth_hz) {
    return 1e9 / (2.0 * std::numbers::pi * bandwidth_hz);
}

}  // namespace

void validate_generator(const GeneratorParams &p) {
    if (!(std::isfinite(p.electronic_delay_ns) && p.electronic_delay_ns >= 0.0)) {
        invalid("electronic_delay must be >= 0");
    }
    if (!(std::isfinite(p.bandwidth_hz) && p.bandwidth_hz > 0.0)) {
        invalid("bandwidth must be > 0");
    }
    if (!(std::isfinite(p.v_max) && p.v_max > 0.0)) {
        invalid("v_max must be > 0");
    }
}

void validate_waveform(const DriveWaveform &w) {
    if (!std::isfinite(w.bias_voltage)) {
        invalid("bias_voltage must be finite");
    }
    std::visit(overloaded{
                   [](const RectPulses &r) {
                       double last_stop = -std::numeric_limits<double>::infinity();
                       for (const auto &p : r.pulses) {
                           if (!(std::isfinite(p.start_ns) && std::isfinite(p.stop_ns) && std::isfinite(p.volts))) {
                               invalid("rectangular pulse fields must be finite");
                           }
                           if (!(p.stop_ns > p.start_ns)) {
                               invalid("rectangular pulse must have stop > start");
                           }
                           if (p.start_ns < last_stop) {
                               invalid("rectangular pulses must be sorted and non-overlapping");
                           }
                           last_stop = p.stop_ns;
                       }
                   },
                   [](const GaussianPulse &g) {
                       if (!(std::isfinite(g.center_ns) && std::isfinite(g.peak_volts) && g.sigma_ns > 0.0)) {
                           invalid("gaussian pulse needs a finite center/peak and sigma > 0");
                       }
                   },
                   [](const RisingExponential &e) {
                       if (!(e.time_constant_ns > 0.0 && e.end_ns > 0.0 && std::isfinite(e.peak_volts))) {
                           invalid("rising exponential needs time_constant > 0 and end > 0");
                       }
                   },
                   [](const TabulatedWave &t) {
                       if (!(std::isfinite(t.sample_period_ns) && t.sample_period_ns > 0.0)) {
                           invalid("tabulated waveform sample period must be > 0");
                       }
                       if (t.volts.empty() || !std::isfinite(t.start_ns)) {
                           invalid("tabulated waveform needs at least one sample");
                       }
                       for (double v : t.volts) {
                           if (!std::isfinite(v)) {
                               invalid("tabulated waveform values must be finite");
                           }
                       }
                   },
               },
               w.kind);
}

double voltage_at(const DriveWaveform &w, double t) {
    return std::visit(
        overloaded{
            [&](const RectPulses &r) {
                for (const auto &p : r.pulses) {
                    if (t < p.start_ns) {
                        break;
                    }
                    if (t < p.stop_ns) {
                        return p.volts;
                    }
                }
                return w.bias_voltage;
            },
            [&](const GaussianPulse &g) {
                const double lo = std::max(0.0, g.center_ns - 5.0 * g.sigma_ns);
                if (t < lo || t > g.center_ns + 5.0 * g.sigma_ns) {
                    return w.bias_voltage;
                }
                const double z = (t - g.center_ns) / g.sigma_ns;
                return g.peak_volts * std::exp(-0.5 * z * z);
            },
            [&](const RisingExponential &e) {
                if (t < 0.0 || t > e.end_ns) {
                    return w.bias_voltage;
                }
                return e.peak_volts * std::exp((t - e.end_ns) / e.time_constant_ns);
            },
            [&](const TabulatedWave &tab) {
                const double x = (t - tab.start_ns) / tab.sample_period_ns;
                const auto last = static_cast<double>(tab.volts.size() - 1);
                if (!(x >= -1e-9) || x > last + 1e-9) {
                    return w.bias_voltage;
                }
                if (x >= last) {
                    return tab.volts.back();
                }
                if (x < 0.0) {
                    return tab.volts.front();
                }
                const auto i = static_cast<std::size_t>(x);
                if (i + 1 >= tab.volts.size()) {
                    return tab.volts.back();
                }
                const double frac = x - static_cast<double>(i);
                return tab.volts[i] + frac * (tab.volts[i + 1] - tab.volts[i]);
            },
        },
        w.kind);
}

std::pair<double, double> waveform_support(const DriveWaveform &w) {
    return std::visit(
        overloaded{
            [](const RectPulses &r) {
                if (r.pulses.empty()) {
                    return std::pair{0.0, 0.0};
                }
                return std::pair{r.pulses.front().start_ns, r.pulses.back().stop_ns};
            },
            [](const GaussianPulse &g) {
                return std::pair{std::max(0.0, g.center_ns - 5.0 * g.sigma_ns), g.center_ns + 5.0 * g.sigma_ns};
            },
            [](const RisingExponential &e) { return std::pair{0.0, e.end_ns}; },
            [](const TabulatedWave &t) {
                return std::pair{
                    t.start_ns, t.start_ns + t.sample_period_ns * static_cast<double>(t.volts.size() - 1)};
            },
        },
        w.kind);
}

DriveWaveform predistort(
    const std::function<double(double)> &target,
    double v_pi,
    double sample_period_ns,
    std::pair<double, double> support_ns) {
    if (!(v_pi > 0.0) || !(sample_period_ns > 0.0) || !(support_ns.second >= support_ns.first)) {
        invalid("predistort needs V_pi > 0, sample_period > 0 and an ordered support");
    }
    const auto n = static_cast<std::size_t>(
                       std::floor((support_ns.second - support_ns.first) / sample_period_ns + 1e-9)) +
                   1;
    TabulatedWave tab;
    tab.start_ns = support_ns.first;
    tab.sample_period_ns = sample_period_ns;
    tab.volts.reserve(n);
    const double gain = 2.0 * v_pi / std::numbers::pi;
    for (std::size_t k = 0; k < n; ++k) {
        const double tau = support_ns.first + static_cast<double>(k) * sample_period_ns;
        const double f = target(tau);
        if (!(f >= 0.0 && f <= 1.0)) {
            std::ostringstream msg;
            msg << "target amplitude " << f << " at tau=" << tau << " ns is outside [0, 1]";
            throw Error(ErrorKind::TargetOutOfRange, msg.str());
        }
        tab.volts.push_back(gain * std::asin(f));
    }
    return DriveWaveform{std::move(tab), 0.0};
}

DriveWaveform bandwidth_limit(const DriveWaveform &w, const GeneratorParams &params, double dt) {
    validate_generator(params);
    const double max_period = 1e9 / (20.0 * params.bandwidth_hz);
    if (!(dt > 0.0) || dt > max_period * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "sample period " << dt << " ns exceeds 1/(20 * bandwidth) = " << max_period << " ns";
        throw Error(ErrorKind::UndersampledInput, msg.str());
    }
    const double tau = tau_rc_ns(params.bandwidth_hz);
    const double a = std::exp(-dt / tau);
    const double end = std::max(0.0, waveform_support(w).second) + 10.0 * tau;
    const auto n = static_cast<std::size_t>(std::ceil(end / dt)) + 1;

    TabulatedWave out;
    out.start_ns = 0.0;
    out.sample_period_ns = dt;
    out.volts.reserve(n);
    double x_prev = voltage_at(w, -dt);
    double y = x_prev;
    for (std::size_t k = 0; k < n; ++k) {
        const double x = voltage_at(w, static_cast<double>(k) * dt);
        // Exact response of dy/dt = (x - y) / tau to a linear ramp x_prev -> x over dt.
        const double slope_tau = (x - x_prev) / dt * tau;
        y = x - slope_tau + (y - x_prev + slope_tau) * a;
        out.volts.push_back(y);
        x_prev = x;
    }
    return DriveWaveform{std::move(out), w.bias_voltage};
}

std::size_t clamp_to_vmax(DriveWaveform &w, double v_max) {
    std::size_t clamped = 0;
    auto clamp = [&](double &v) {
        const double c = std::clamp(v, -v_max, v_max);
        if (c != v) {
            ++clamped;
            v = c;
        }
    };
    clamp(w.bias_voltage);
    std::visit(overloaded{
                   [&](RectPulses &r) {
                       for (auto &p : r.pulses) {
                           clamp(p.volts);
                       }
                   },
                   [&](GaussianPulse &g) { clamp(g.peak_volts); },
                   [&](RisingExponential &e) { clamp(e.peak_volts); },
                   [&](TabulatedWave &t) {
                       for (auto &v : t.volts) {
                           clamp(v);
                       }
                   },
               },
               w.kind);
    return clamped;
}

double trigger_schedule(double herald_time_ns, const GeneratorParams &params) {
    return herald_time_ns + params.electronic_delay_ns;
}

DriveSchedule::DriveSchedule(DriveWaveform waveform, std::vector<double> origins_ns)
    : waveform_(std::move(waveform)), origins_(std::move(origins_ns)) {
    active_ns_ = std::max(0.0, waveform_support(waveform_).second);
}

DriveSchedule DriveSchedule::periodic(
    DriveWaveform waveform, double first_origin_ns, double period_ns, std::uint64_t count) {
    if (!(period_ns > 0.0)) {
        throw Error(ErrorKind::InvalidParams, "periodic schedule needs a positive period");
    }
    DriveSchedule s(std::move(waveform), {});
    s.first_origin_ns_ = first_origin_ns;
    s.period_ns_ = period_ns;
    s.periodic_count_ = count;
    return s;
}

double DriveSchedule::voltage(double t_ns) const {
    if (period_ns_ > 0.0) {
        if (periodic_count_ == 0 || t_ns < first_origin_ns_) {
            return waveform_.bias_voltage;
        }
        const double j = std::min(std::floor((t_ns - first_origin_ns_) / period_ns_),
                                  static_cast<double>(periodic_count_ - 1));
        const double local = t_ns - (first_origin_ns_ + j * period_ns_);
        return local >= active_ns_ ? waveform_.bias_voltage : voltage_at(waveform_, local);
    }
    auto it = std::upper_bound(origins_.begin(), origins_.end(), t_ns);
    if (it == origins_.begin()) {
        return waveform_.bias_voltage;
    }
    const double local = t_ns - *(it - 1);
    if (local >= active_ns_) {
        return waveform_.bias_voltage;
    }
    return voltage_at(waveform_, local);
}

ScheduleBuild schedule_triggers(
    const std::vector<double> &trigger_times_ns, const GeneratorParams &params, double active_duration_ns) {
    ScheduleBuild out;
    out.origins_ns.reserve(trigger_times_ns.size());
    for (double t : trigger_times_ns) {
        const double origin = trigger_schedule(t, params);
        if (!params.retriggerable && !out.origins_ns.empty() &&
            origin < out.origins_ns.back() + active_duration_ns) {
            ++out.ignored_triggers;
            continue;
        }
        out.origins_ns.push_back(origin);
    }
    return out;
}

ClockSchedule clock_schedule(
    double phase_ns, double rate_hz, const GeneratorParams &params, double active_duration_ns, double total_ns) {
    if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
        throw Error(ErrorKind::InvalidParams, "clock rate must be > 0");
    }
    const double tick = 1e9 / rate_hz;
    if (!(phase_ns >= 0.0 && phase_ns < tick)) {
        throw Error(ErrorKind::InvalidParams, "clock phase must lie in [0, period)");
    }
    ClockSchedule out;
    const double ticks = phase_ns < total_ns ? std::floor((total_ns - phase_ns) / tick - 1e-12) + 1.0 : 0.0;
    const auto total_ticks = static_cast<std::uint64_t>(ticks);
    std::uint64_t stride = 1;
    if (!params.retriggerable && active_duration_ns > 0.0) {
        stride = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(active_duration_ns / tick - 1e-9)));
    }
    out.first_origin_ns = trigger_schedule(phase_ns, params);
    out.period_ns = tick * static_cast<double>(stride);
    out.accepted = total_ticks == 0 ? 0 : (total_ticks - 1) / stride + 1;
    out.ignored_triggers = total_ticks - out.accepted;
    return out;
}

void write_waveform_csv(std::ostream &out, const DriveWaveform &w, double sample_period_ns) {
    out << "time_ns,volts\n";
    char buf[64];
    if (const auto *tab = std::get_if<TabulatedWave>(&w.kind)) {
        for (std::size_t k = 0; k < tab->volts.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.6g,%.6g\n",
                          tab->start_ns + static_cast<double>(k) * tab->sample_period_ns, tab->volts[k]);
            out << buf;
        }
        return;
    }
    const auto [begin, end] = waveform_support(w);
    const double t0 = std::min(0.0, begin);
    const auto n = static_cast<std::size_t>(std::floor((end - t0) / sample_period_ns + 1e-9)) + 1;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = t0 + static_cast<double>(k) * sample_period_ns;
        std::snprintf(buf, sizeof(buf), "%.6g,%.6g\n", t, voltage_at(w, t));
        out << buf;
    }
}

DriveWaveform read_waveform_csv(std::istream &in, const std::string &source_name) {
    std::vector<double> times;
    std::vector<double> volts;
    std::string line;
    std::size_t line_no = 0;
    bool header_allowed = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (std::exchange(header_allowed, false) && line.rfind("time_ns", 0) == 0) {
            continue;
        }
        double t = 0.0;
        double v = 0.0;
        char comma = 0;
        std::istringstream row(line);
        if (!(row >> t >> comma >> v) || comma != ',') {
            throw Error(
                ErrorKind::ParseError, source_name + ":" + std::to_string(line_no) + ": expected `time_ns,volts`");
        }
        times.push_back(t);
        volts.push_back(v);
    }
    if (times.size() < 2) {
        throw Error(ErrorKind::ParseError, source_name + ": waveform CSV needs at least two samples");
    }
    const double period = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    if (!(period > 0.0)) {
        throw Error(ErrorKind::ParseError, source_name + ": waveform times must increase");
    }
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double expected = times.front() + static_cast<double>(k) * period;
        if (std::abs(times[k] - expected) > 1e-5 * std::max(1.0, std::abs(expected)) + 1e-9) {
            throw Error(ErrorKind::ParseError, source_name + ": waveform samples must be uniformly spaced");
        }
    }
    TabulatedWave tab;
    tab.start_ns = times.front();
    tab.sample_period_ns = period;
    tab.volts = std::move(volts);
    return DriveWaveform{std::move(tab), 0.0};
}

}  // namespace eomsim
