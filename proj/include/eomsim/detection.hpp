#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eomsim/rng.hpp"

namespace eomsim {

struct DetectorParams {
    double efficiency = 0.5;
    double jitter_sigma_ns = 0.04;
    /// Non-paralyzable dead time after each accepted click.
    double dead_time_ns = 50.0;
};

struct DetectorBank {
    DetectorParams d1;
    DetectorParams d2;
    DetectorParams d3;
};

struct TdcConfig {
    double bin_width_ns = 1.0;
    double histogram_range_ns = 1000.0;
    double coincidence_window_ns = 285.0;
};

void validate_detector(const DetectorParams &p);
void validate_tdc(const TdcConfig &cfg);

enum class DetectorChannel : std::uint8_t { D1 = 0, D2 = 1, D3 = 2 };

struct Arrival {
    double time_ns;
    DetectorChannel channel;
};

/// Sorted detection timestamps per channel.
struct TagStream {
    std::vector<double> d1;
    std::vector<double> d2;
    std::vector<double> d3;

    const std::vector<double> &channel(DetectorChannel c) const;
    std::vector<double> &channel(DetectorChannel c);
};

/// Efficiency trial then gaussian jitter for one photon; returns false if the
/// photon is not detected.
bool detector_click(const DetectorParams &p, double arrival_ns, rng::Engine &engine, double &tag_ns);

/// Sorts `tags` and drops every click that falls within the dead time of the
/// previously accepted click.
void apply_dead_time(std::vector<double> &tags, double dead_time_ns);

TagStream detect(std::span<const Arrival> arrivals, const DetectorBank &bank, rng::Engine &engine);

struct Histogram {
    double bin_width_ns = 1.0;
    double origin_ns = 0.0;
    std::vector<std::uint64_t> counts;
    std::uint64_t total_heralds = 0;
    double live_time_s = 0.0;

    double range_ns() const noexcept {
        return bin_width_ns * static_cast<double>(counts.size());
    }
    std::uint64_t total() const noexcept;
    /// Sum of counts over bins whose lower edge lies in [begin, end).
    std::uint64_t sum_between(double begin_ns, double end_ns) const;
};

/// Multi-start, multi-stop histogram of stop - start over [0, range).
Histogram start_stop_histogram(
    std::span<const double> starts, std::span<const double> stops, const TdcConfig &cfg, double live_time_s = 0.0);

/// Bin-wise sum of two histograms with identical binning; heralds are taken from `a`.
Histogram add_histograms(const Histogram &a, const Histogram &b);

struct CoincidenceCounts {
    std::uint64_t n1 = 0;
    std::uint64_t n12 = 0;
    std::uint64_t n13 = 0;
    std::uint64_t n123 = 0;
};

/// Each D1 tag opens the window [t1 + offset, t1 + offset + T_c) and counts at
/// most once towards each of N12, N13 and N123.
CoincidenceCounts coincidence_counts(const TagStream &tags, double coincidence_window_ns, double offset_ns = 0.0);

/// `tau_ns,counts` with `# key=value` metadata lines first.
void write_histogram_csv(
    std::ostream &out, const Histogram &h, const std::vector<std::pair<std::string, std::string>> &metadata);

}  // namespace eomsim
