#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eomsim/biphoton_source.hpp"
#include "eomsim/detection.hpp"
#include "eomsim/optical_chain.hpp"
#include "eomsim/waveform.hpp"

namespace eomsim {

struct CurvePoint {
    double tau_ns;
    double value;
};

/// Per-herald coincidence rate density counts / (N_heralds * T_b), in 1/ns,
/// at each bin's lower edge. Multiplying by the herald rate R_s (1/s) and by
/// 1e9 recovers G2(tau) = R_c(tau) / T_b in 1/s^2.
std::vector<CurvePoint> g2_of_tau(const Histogram &h);

/// Accidental floor R_s * R_as of G2.
double background_floor(double stokes_rate_hz, double antistokes_rate_hz);

/// Per-herald floor density (1/ns) from the last `tail_ns` of the histogram.
double estimate_floor(const Histogram &h, double tail_ns);

/// (counts in [window_begin, window_end) - floor * window * N1) / N1, clamped
/// to [0, 1]. `clamped` is set when the clamp was needed.
double retrieval_efficiency(
    const Histogram &h_sum,
    std::uint64_t n1,
    double floor_per_herald_per_ns,
    double window_begin_ns,
    double window_end_ns,
    bool *clamped = nullptr);

double back_out_losses(double measured, std::span<const double> factors);

struct LedgerEntry {
    std::string label;
    double factor;
};

double eta_ledger(std::span<const LedgerEntry> entries);

/// Nine-factor ledger of the reference apparatus: duty cycle, beamsplitter
/// port, beamsplitter excess loss, Stokes filter, anti-Stokes filter, fiber
/// coupling, two detectors and the modulator insertion loss.
std::vector<LedgerEntry> reference_eta_ledger();

/// Anti-Stokes losses removed when backing out an intrinsic retrieval
/// efficiency. The 50/50 split itself is not a loss: both ports are counted.
std::vector<LedgerEntry> reference_backout_factors();

std::vector<double> factors_of(std::span<const LedgerEntry> entries);

struct G2Cond {
    double value = 0.0;
    double standard_error = 0.0;
    /// 90% upper bound, reported when no three-fold coincidences were seen.
    std::optional<double> upper_bound;
};

G2Cond g2_cond(std::uint64_t n1, std::uint64_t n12, std::uint64_t n13, std::uint64_t n123);

/// eta * |m(tau)|^2 * G2_theory(tau). The drive is read at tau - drive_offset;
/// pass no drive for an unmodulated overlay (|m| = 1).
std::vector<double> theory_overlay(
    std::span<const double> tau_ns,
    std::span<const double> g2_theory,
    const DriveWaveform *drive,
    double drive_offset_ns,
    const ModulatorParams &modulator,
    double eta);

/// Expected counts per herald in each histogram bin for a normalized shape
/// delayed by `offset_ns`, scaled by `pair_probability`, on top of a flat
/// per-herald floor density.
std::vector<double> expected_bin_counts(
    const BiphotonShape &normalized_shape,
    double pair_probability,
    double offset_ns,
    double floor_per_herald_per_ns,
    double bin_width_ns,
    std::size_t bins);

}  // namespace eomsim
