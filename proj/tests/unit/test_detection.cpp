#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "eomsim/detection.hpp"
#include "eomsim/errors.hpp"

using namespace eomsim;

namespace {

std::vector<double> poisson_times(double rate_per_ns, double duration_ns, std::uint64_t key) {
    rng::Engine engine(key, rng::Stream::Test, 0);
    std::exponential_distribution<double> gap(rate_per_ns);
    std::vector<double> out;
    for (double t = gap(engine); t < duration_ns; t += gap(engine)) {
        out.push_back(t);
    }
    return out;
}

// Direct pairwise definition of the start-stop histogram.
std::vector<std::uint64_t> brute_histogram(
    const std::vector<double> &starts, const std::vector<double> &stops, double bin, std::size_t bins) {
    std::vector<std::uint64_t> out(bins, 0);
    for (double a : starts) {
        for (double b : stops) {
            const double dt = b - a;
            if (dt >= 0.0 && dt < bin * static_cast<double>(bins)) {
                ++out[static_cast<std::size_t>(std::floor(dt / bin))];
            }
        }
    }
    return out;
}

CoincidenceCounts brute_coincidences(const TagStream &t, double window, double offset) {
    CoincidenceCounts c;
    c.n1 = t.d1.size();
    for (double a : t.d1) {
        bool h2 = false;
        bool h3 = false;
        for (double b : t.d2) {
            h2 |= b >= a + offset && b < a + offset + window;
        }
        for (double b : t.d3) {
            h3 |= b >= a + offset && b < a + offset + window;
        }
        c.n12 += h2;
        c.n13 += h3;
        c.n123 += h2 && h3;
    }
    return c;
}

}  // namespace

TEST(DetectorClick, EfficiencyAndJitter) {
    const DetectorParams p{0.5, 0.04, 50};
    rng::Engine engine(1, rng::Stream::Test, 0);
    const int n = 400000;
    int clicks = 0;
    double sum = 0;
    double sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double tag = 0;
        if (detector_click(p, 100.0, engine, tag)) {
            ++clicks;
            sum += tag - 100.0;
            sum2 += (tag - 100.0) * (tag - 100.0);
        }
    }
    EXPECT_NEAR(clicks, n * 0.5, 5 * std::sqrt(n * 0.25));
    const double mean = sum / clicks;
    const double sd = std::sqrt(sum2 / clicks - mean * mean);
    EXPECT_NEAR(mean, 0.0, 5 * 0.04 / std::sqrt(clicks));
    EXPECT_NEAR(sd, 0.04, 0.04 * 5 / std::sqrt(2.0 * clicks));
}

TEST(DetectorClick, ZeroJitterIsExact) {
    rng::Engine engine(1, rng::Stream::Test, 0);
    double tag = 0;
    ASSERT_TRUE(detector_click({1.0, 0.0, 0.0}, 17.125, engine, tag));
    EXPECT_EQ(tag, 17.125);
    EXPECT_FALSE(detector_click({0.0, 0.0, 0.0}, 17.125, engine, tag));
}

TEST(DeadTime, NonParalyzableExample) {
    std::vector<double> tags = {200, 0, 10, 60, 60.5, 49.999};
    apply_dead_time(tags, 50);
    EXPECT_EQ(tags, (std::vector<double>{0, 60, 200}));
}

TEST(DeadTime, ZeroDeadTimeKeepsDistinctTags) {
    std::vector<double> tags = {3, 1, 2, 2};
    apply_dead_time(tags, 0);
    EXPECT_EQ(tags, (std::vector<double>{1, 2, 3}));
}

TEST(DeadTime, MinimumGapAndIdempotence) {
    auto tags = poisson_times(0.05, 1e6, 5);
    apply_dead_time(tags, 50);
    for (std::size_t i = 1; i < tags.size(); ++i) {
        ASSERT_GE(tags[i] - tags[i - 1], 50.0);
    }
    auto again = tags;
    apply_dead_time(again, 50);
    EXPECT_EQ(again, tags);
}

TEST(DeadTime, ThroughputMatchesNonParalyzableModel) {
    const double rate = 0.01;
    const double tau = 50;
    const double duration = 5e7;
    auto tags = poisson_times(rate, duration, 6);
    apply_dead_time(tags, tau);
    const double expected = duration * rate / (1 + rate * tau);
    EXPECT_NEAR(static_cast<double>(tags.size()), expected, 0.01 * expected);
}

TEST(Detect, RoutesByChannelAndAppliesPerChannelDeadTime) {
    DetectorBank bank;
    bank.d1 = {1.0, 0.0, 100};
    bank.d2 = {1.0, 0.0, 0};
    bank.d3 = {0.0, 0.0, 0};
    const std::vector<Arrival> arrivals = {
        {0, DetectorChannel::D1}, {50, DetectorChannel::D1}, {10, DetectorChannel::D2},
        {11, DetectorChannel::D2}, {12, DetectorChannel::D3},
    };
    rng::Engine engine(1, rng::Stream::Test, 0);
    const auto tags = detect(arrivals, bank, engine);
    EXPECT_EQ(tags.d1, (std::vector<double>{0}));
    EXPECT_EQ(tags.d2, (std::vector<double>{10, 11}));
    EXPECT_TRUE(tags.d3.empty());
    EXPECT_EQ(&tags.channel(DetectorChannel::D2), &tags.d2);
}

TEST(ValidateTdc, RangeMustBeWholeBins) {
    EXPECT_NO_THROW(validate_tdc({1.0, 1000, 285}));
    try {
        validate_tdc({0.3, 1000, 285});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConfigMismatch);
    }
    EXPECT_THROW(validate_tdc({1.0, 100, 285}), Error);
    EXPECT_THROW(validate_tdc({0.0, 100, 50}), Error);
    EXPECT_THROW(validate_detector({1.5, 0, 0}), Error);
    EXPECT_THROW(validate_detector({0.5, -1, 0}), Error);
}

TEST(StartStopHistogram, MatchesPairwiseDefinition) {
    const auto starts = poisson_times(0.002, 2e5, 10);
    const auto stops = poisson_times(0.01, 2e5, 11);
    const TdcConfig cfg{2.0, 600, 285};
    const auto h = start_stop_histogram(starts, stops, cfg, 1.5);
    EXPECT_EQ(h.counts, brute_histogram(starts, stops, 2.0, 300));
    EXPECT_EQ(h.total_heralds, starts.size());
    EXPECT_EQ(h.live_time_s, 1.5);
    EXPECT_EQ(h.range_ns(), 600.0);
}

TEST(StartStopHistogram, EdgesAndCoincidentTags) {
    const TdcConfig cfg{1.0, 10, 5};
    const std::vector<double> starts = {100};
    const std::vector<double> stops = {99.5, 100, 100.999, 101, 109.999, 110};
    const auto h = start_stop_histogram(starts, stops, cfg);
    EXPECT_EQ(h.counts[0], 2u);
    EXPECT_EQ(h.counts[1], 1u);
    EXPECT_EQ(h.counts[9], 1u);
    EXPECT_EQ(h.total(), 4u);
}

TEST(StartStopHistogram, UncorrelatedStreamsGiveFlatFloor) {
    const double r1 = 0.001;
    const double r2 = 0.02;
    const double duration = 2e7;
    const auto starts = poisson_times(r1, duration, 12);
    const auto stops = poisson_times(r2, duration, 13);
    const auto h = start_stop_histogram(starts, stops, {10.0, 1000, 285});
    const double per_bin = static_cast<double>(starts.size()) * r2 * 10.0;
    for (auto c : h.counts) {
        ASSERT_NEAR(static_cast<double>(c), per_bin, 5 * std::sqrt(per_bin));
    }
}

TEST(Histogram, SumBetweenUsesLowerEdges) {
    Histogram h;
    h.bin_width_ns = 2.0;
    h.origin_ns = 10.0;
    h.counts = {1, 2, 4, 8};
    EXPECT_EQ(h.sum_between(10, 14), 3u);
    EXPECT_EQ(h.sum_between(11, 16), 6u);
    EXPECT_EQ(h.sum_between(0, 100), 15u);
    EXPECT_EQ(h.total(), 15u);
}

TEST(Histogram, AddRequiresMatchingBinning) {
    Histogram a;
    a.counts = {1, 2};
    a.total_heralds = 7;
    Histogram b = a;
    b.total_heralds = 9;
    const auto s = add_histograms(a, b);
    EXPECT_EQ(s.counts, (std::vector<std::uint64_t>{2, 4}));
    EXPECT_EQ(s.total_heralds, 7u);
    b.bin_width_ns = 2.0;
    try {
        add_histograms(a, b);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConfigMismatch);
    }
}

TEST(CoincidenceCounts, MatchesDirectDefinition) {
    TagStream t;
    t.d1 = poisson_times(0.001, 1e6, 20);
    t.d2 = poisson_times(0.002, 1e6, 21);
    t.d3 = poisson_times(0.002, 1e6, 22);
    for (double offset : {0.0, 140.0}) {
        const auto fast = coincidence_counts(t, 285, offset);
        const auto slow = brute_coincidences(t, 285, offset);
        EXPECT_EQ(fast.n1, slow.n1);
        EXPECT_EQ(fast.n12, slow.n12);
        EXPECT_EQ(fast.n13, slow.n13);
        EXPECT_EQ(fast.n123, slow.n123);
    }
}

TEST(CoincidenceCounts, EachHeraldCountsOnce) {
    TagStream t;
    t.d1 = {0, 1000};
    t.d2 = {150, 160, 170, 1200};
    t.d3 = {150, 2000};
    const auto c = coincidence_counts(t, 285, 140);
    EXPECT_EQ(c.n1, 2u);
    EXPECT_EQ(c.n12, 2u);
    EXPECT_EQ(c.n13, 1u);
    EXPECT_EQ(c.n123, 1u);
    // Window is half-open at its upper edge.
    t.d2 = {425};
    EXPECT_EQ(coincidence_counts(t, 285, 140).n12, 0u);
    t.d2 = {140};
    EXPECT_EQ(coincidence_counts(t, 285, 140).n12, 1u);
}

TEST(HistogramCsv, Format) {
    Histogram h;
    h.bin_width_ns = 0.5;
    h.counts = {3, 0};
    h.total_heralds = 12;
    h.live_time_s = 2;
    std::ostringstream out;
    write_histogram_csv(out, h, {{"port", "d2"}});
    EXPECT_EQ(out.str(),
              "# bin_width_ns=0.5\n# total_heralds=12\n# live_time_s=2\n# port=d2\ntau_ns,counts\n0,3\n0.5,0\n");
}
