#include "eomsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eomsim/errors.hpp"

namespace eomsim {

std::vector<CurvePoint> g2_of_tau(const Histogram &h) {
    if (h.total_heralds == 0 || !(h.live_time_s > 0.0)) {
        throw Error(ErrorKind::EmptyRun, "histogram has no heralds or no live time");
    }
    std::vector<CurvePoint> curve;
    curve.reserve(h.counts.size());
    const double norm = 1.0 / (static_cast<double>(h.total_heralds) * h.bin_width_ns);
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        curve.push_back({h.origin_ns + h.bin_width_ns * static_cast<double>(i), static_cast<double>(h.counts[i]) * norm});
    }
    return curve;
}

double background_floor(double stokes_rate_hz, double antistokes_rate_hz) {
    return stokes_rate_hz * antistokes_rate_hz;
}

double estimate_floor(const Histogram &h, double tail_ns) {
    if (h.total_heralds == 0) {
        throw Error(ErrorKind::EmptyRun, "no heralds to normalize the floor");
    }
    const double range = h.range_ns();
    if (!(tail_ns > 0.0) || tail_ns > range) {
        throw Error(ErrorKind::WindowTooSmall, "tail window must fit inside the histogram range");
    }
    const auto counts = h.sum_between(h.origin_ns + range - tail_ns, h.origin_ns + range + h.bin_width_ns);
    return static_cast<double>(counts) / (static_cast<double>(h.total_heralds) * tail_ns);
}

double retrieval_efficiency(
    const Histogram &h_sum,
    std::uint64_t n1,
    double floor_per_herald_per_ns,
    double window_begin_ns,
    double window_end_ns,
    bool *clamped) {
    if (n1 == 0) {
        throw Error(ErrorKind::EmptyRun, "no heralds");
    }
    if (window_end_ns > h_sum.origin_ns + h_sum.range_ns() + 1e-9 || window_begin_ns < h_sum.origin_ns - 1e-9) {
        std::ostringstream msg;
        msg << "signal window [" << window_begin_ns << ", " << window_end_ns << ") ns exceeds histogram range "
            << h_sum.range_ns() << " ns";
        throw Error(ErrorKind::WindowTooSmall, msg.str());
    }
    const double counts = static_cast<double>(h_sum.sum_between(window_begin_ns, window_end_ns));
    const double n = static_cast<double>(n1);
    const double e = (counts - floor_per_herald_per_ns * (window_end_ns - window_begin_ns) * n) / n;
    const double out = std::clamp(e, 0.0, 1.0);
    if (clamped) {
        *clamped = out != e;
    }
    return out;
}

double back_out_losses(double measured, std::span<const double> factors) {
    double product = 1.0;
    for (double f : factors) {
        if (!(f > 0.0)) {
            throw Error(ErrorKind::ZeroFactor, "loss factors must be > 0");
        }
        product *= f;
    }
    return measured / product;
}

double eta_ledger(std::span<const LedgerEntry> entries) {
    double product = 1.0;
    for (const auto &e : entries) {
        product *= e.factor;
    }
    return product;
}

std::vector<LedgerEntry> reference_eta_ledger() {
    return {
        {"duty_cycle", 0.10},
        {"beamsplitter_port", 0.57},
        {"beamsplitter_excess", 0.8},
        {"stokes_filter", 0.48},
        {"antistokes_filter", 0.42},
        {"fiber_coupling", 0.75},
        {"stokes_detector", 0.5},
        {"antistokes_detector", 0.5},
        {"modulator_insertion", 0.5},
    };
}

std::vector<LedgerEntry> reference_backout_factors() {
    return {
        {"beamsplitter_excess", 0.8},
        {"antistokes_filter", 0.42},
        {"fiber_coupling", 0.75},
        {"antistokes_detector", 0.5},
        {"modulator_insertion", 0.5},
    };
}

std::vector<double> factors_of(std::span<const LedgerEntry> entries) {
    std::vector<double> out;
    out.reserve(entries.size());
    for (const auto &e : entries) {
        out.push_back(e.factor);
    }
    return out;
}

G2Cond g2_cond(std::uint64_t n1, std::uint64_t n12, std::uint64_t n13, std::uint64_t n123) {
    if (n12 == 0 || n13 == 0) {
        throw Error(ErrorKind::DivisionByZero, "g2_cond needs N12 > 0 and N13 > 0");
    }
    const double d1 = static_cast<double>(n1);
    const double d12 = static_cast<double>(n12);
    const double d13 = static_cast<double>(n13);
    G2Cond out;
    if (n123 == 0) {
        out.value = 0.0;
        out.upper_bound = 2.3 * d1 / (d12 * d13);
        return out;
    }
    const double d123 = static_cast<double>(n123);
    out.value = d123 * d1 / (d12 * d13);
    out.standard_error = out.value * std::sqrt(1.0 / d123 + 1.0 / d1 + 1.0 / d12 + 1.0 / d13);
    return out;
}

std::vector<double> theory_overlay(
    std::span<const double> tau_ns,
    std::span<const double> g2_theory,
    const DriveWaveform *drive,
    double drive_offset_ns,
    const ModulatorParams &modulator,
    double eta) {
    if (tau_ns.size() != g2_theory.size()) {
        throw Error(ErrorKind::GridMismatch, "tau grid and theory curve differ in length");
    }
    for (std::size_t i = 1; i < tau_ns.size(); ++i) {
        if (!(tau_ns[i] > tau_ns[i - 1])) {
            throw Error(ErrorKind::GridMismatch, "tau grid must be strictly increasing");
        }
    }
    std::vector<double> out(tau_ns.size());
    for (std::size_t i = 0; i < tau_ns.size(); ++i) {
        double mag2 = 1.0;
        if (drive) {
            mag2 = survival_probability(modulator_transfer(voltage_at(*drive, tau_ns[i] - drive_offset_ns), modulator));
        }
        out[i] = eta * mag2 * g2_theory[i];
    }
    return out;
}

std::vector<double> expected_bin_counts(
    const BiphotonShape &normalized_shape,
    double pair_probability,
    double offset_ns,
    double floor_per_herald_per_ns,
    double bin_width_ns,
    std::size_t bins) {
    std::vector<double> out(bins);
    double lower_cdf = shape_cumulative(normalized_shape, -offset_ns);
    for (std::size_t i = 0; i < bins; ++i) {
        const double hi = bin_width_ns * static_cast<double>(i + 1) - offset_ns;
        const double upper_cdf = shape_cumulative(normalized_shape, hi);
        out[i] = pair_probability * (upper_cdf - lower_cdf) + floor_per_herald_per_ns * bin_width_ns;
        lower_cdf = upper_cdf;
    }
    return out;
}

}  // namespace eomsim
