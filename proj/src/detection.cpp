#include "eomsim/detection.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "eomsim/errors.hpp"

namespace eomsim {

namespace {

[[noreturn]] void invalid(const std::string &what) {
    throw Error(ErrorKind::InvalidParams, what);
}

}  // namespace

void validate_detector(const DetectorParams &p) {
    if (!(p.efficiency >= 0.0 && p.efficiency <= 1.0)) {
        invalid("detector efficiency must lie in [0, 1]");
    }
    if (!(std::isfinite(p.jitter_sigma_ns) && p.jitter_sigma_ns >= 0.0)) {
        invalid("detector jitter_sigma must be >= 0");
    }
    if (!(std::isfinite(p.dead_time_ns) && p.dead_time_ns >= 0.0)) {
        invalid("detector dead_time must be >= 0");
    }
}

void validate_tdc(const TdcConfig &cfg) {
    if (!(std::isfinite(cfg.bin_width_ns) && cfg.bin_width_ns > 0.0)) {
        invalid("bin_width must be > 0");
    }
    if (!(cfg.coincidence_window_ns > 0.0)) {
        invalid("coincidence_window must be > 0");
    }
    if (!(cfg.histogram_range_ns >= cfg.coincidence_window_ns)) {
        invalid("histogram_range must be >= coincidence_window");
    }
    const double bins = cfg.histogram_range_ns / cfg.bin_width_ns;
    if (std::abs(bins - std::round(bins)) > 1e-9 * std::max(1.0, bins)) {
        throw Error(ErrorKind::ConfigMismatch, "histogram_range must be an integer multiple of bin_width");
    }
}

const std::vector<double> &TagStream::channel(DetectorChannel c) const {
    switch (c) {
        case DetectorChannel::D1:
            return d1;
        case DetectorChannel::D2:
            return d2;
        case DetectorChannel::D3:
            break;
    }
    return d3;
}

std::vector<double> &TagStream::channel(DetectorChannel c) {
    return const_cast<std::vector<double> &>(static_cast<const TagStream &>(*this).channel(c));
}

bool detector_click(const DetectorParams &p, double arrival_ns, rng::Engine &engine, double &tag_ns) {
    if (!engine.bernoulli(p.efficiency)) {
        return false;
    }
    tag_ns = arrival_ns;
    if (p.jitter_sigma_ns > 0.0) {
        std::normal_distribution<double> jitter(0.0, p.jitter_sigma_ns);
        tag_ns += jitter(engine);
    }
    return true;
}

void apply_dead_time(std::vector<double> &tags, double dead_time_ns) {
    std::sort(tags.begin(), tags.end());
    std::size_t kept = 0;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (kept > 0) {
            const double gap = tags[i] - tags[kept - 1];
            if (gap < dead_time_ns || gap <= 0.0) {
                continue;
            }
        }
        tags[kept++] = tags[i];
    }
    tags.resize(kept);
}

TagStream detect(std::span<const Arrival> arrivals, const DetectorBank &bank, rng::Engine &engine) {
    TagStream out;
    for (const auto &a : arrivals) {
        const DetectorParams &p =
            a.channel == DetectorChannel::D1 ? bank.d1 : (a.channel == DetectorChannel::D2 ? bank.d2 : bank.d3);
        double tag = 0.0;
        if (detector_click(p, a.time_ns, engine, tag)) {
            out.channel(a.channel).push_back(tag);
        }
    }
    apply_dead_time(out.d1, bank.d1.dead_time_ns);
    apply_dead_time(out.d2, bank.d2.dead_time_ns);
    apply_dead_time(out.d3, bank.d3.dead_time_ns);
    return out;
}

std::uint64_t Histogram::total() const noexcept {
    std::uint64_t sum = 0;
    for (auto c : counts) {
        sum += c;
    }
    return sum;
}

std::uint64_t Histogram::sum_between(double begin_ns, double end_ns) const {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double lower = origin_ns + bin_width_ns * static_cast<double>(i);
        if (lower >= begin_ns - 1e-9 && lower < end_ns - 1e-9) {
            sum += counts[i];
        }
    }
    return sum;
}

Histogram start_stop_histogram(
    std::span<const double> starts, std::span<const double> stops, const TdcConfig &cfg, double live_time_s) {
    validate_tdc(cfg);
    Histogram h;
    h.bin_width_ns = cfg.bin_width_ns;
    h.origin_ns = 0.0;
    const auto bins = static_cast<std::size_t>(std::llround(cfg.histogram_range_ns / cfg.bin_width_ns));
    h.counts.assign(bins, 0);
    h.total_heralds = starts.size();
    h.live_time_s = live_time_s;
    const double range = cfg.histogram_range_ns;
    std::size_t first = 0;
    for (double t1 : starts) {
        while (first < stops.size() && stops[first] < t1) {
            ++first;
        }
        for (std::size_t j = first; j < stops.size(); ++j) {
            const double dt = stops[j] - t1;
            if (dt >= range) {
                break;
            }
            const auto bin = static_cast<std::size_t>(dt / cfg.bin_width_ns);
            if (bin < bins) {
                ++h.counts[bin];
            }
        }
    }
    return h;
}

Histogram add_histograms(const Histogram &a, const Histogram &b) {
    if (a.counts.size() != b.counts.size() || a.bin_width_ns != b.bin_width_ns || a.origin_ns != b.origin_ns) {
        throw Error(ErrorKind::ConfigMismatch, "histograms have different binning");
    }
    Histogram out = a;
    for (std::size_t i = 0; i < out.counts.size(); ++i) {
        out.counts[i] += b.counts[i];
    }
    return out;
}

namespace {

bool any_in_window(const std::vector<double> &tags, double begin, double end) {
    auto it = std::lower_bound(tags.begin(), tags.end(), begin);
    return it != tags.end() && *it < end;
}

}  // namespace

CoincidenceCounts coincidence_counts(const TagStream &tags, double coincidence_window_ns, double offset_ns) {
    CoincidenceCounts c;
    c.n1 = tags.d1.size();
    for (double t1 : tags.d1) {
        const double begin = t1 + offset_ns;
        const double end = begin + coincidence_window_ns;
        const bool hit2 = any_in_window(tags.d2, begin, end);
        const bool hit3 = any_in_window(tags.d3, begin, end);
        c.n12 += hit2;
        c.n13 += hit3;
        c.n123 += hit2 && hit3;
    }
    return c;
}

void write_histogram_csv(
    std::ostream &out, const Histogram &h, const std::vector<std::pair<std::string, std::string>> &metadata) {
    out << "# bin_width_ns=" << h.bin_width_ns << '\n';
    out << "# total_heralds=" << h.total_heralds << '\n';
    out << "# live_time_s=" << h.live_time_s << '\n';
    for (const auto &[key, value] : metadata) {
        out << "# " << key << '=' << value << '\n';
    }
    out << "tau_ns,counts\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        out << h.origin_ns + h.bin_width_ns * static_cast<double>(i) << ',' << h.counts[i] << '\n';
    }
}

}  // namespace eomsim
