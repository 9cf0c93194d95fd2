#include "eomsim/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "eomsim/errors.hpp"
#include "eomsim/optical_chain.hpp"
#include "eomsim/rng.hpp"

namespace eomsim {

Scenario effective_scenario(Scenario scenario, const RunOptions &options) {
    if (!(options.time_scale > 0.0) || !std::isfinite(options.time_scale)) {
        throw Error(ErrorKind::InvalidParams, "time scale must be > 0");
    }
    if (options.seed) {
        scenario.source.seed = *options.seed;
    }
    scenario.source.run_duration_s *= options.time_scale;
    return scenario;
}

std::optional<SynthesizedDrive> synthesize_drive(const Scenario &scenario) {
    if (!scenario.drive.waveform) {
        return std::nullopt;
    }
    SynthesizedDrive out;
    out.programmed = *scenario.drive.waveform;
    DriveWaveform clamped = out.programmed;
    out.clamped_samples = clamp_to_vmax(clamped, scenario.generator.v_max);
    out.output = bandwidth_limit(clamped, scenario.generator, scenario.synthesis_sample_period_ns);
    out.active_duration_ns = std::max(0.0, waveform_support(out.output).second);
    return out;
}

namespace {

/// Runs fn(shard) for every shard on up to `workers` threads. Shards are
/// handed out in index order; the first exception is rethrown.
template <typename F>
void for_each_shard(std::uint64_t count, unsigned workers, F &&fn) {
    const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::uint64_t>(count, 1))));
    if (n == 1) {
        for (std::uint64_t s = 0; s < count; ++s) {
            fn(s);
        }
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(n);
    for (unsigned w = 0; w < n; ++w) {
        threads.emplace_back([&] {
            for (std::uint64_t s = next++; s < count; s = next++) {
                try {
                    fn(s);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    next = count;
                }
            }
        });
    }
    for (auto &t : threads) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

struct HeraldShard {
    std::vector<double> d1;
    std::vector<PhotonEvent> events;
    std::uint64_t stokes = 0;
    std::uint64_t paired = 0;
    std::uint64_t singles = 0;
};

struct ChainShard {
    std::vector<double> d2;
    std::vector<double> d3;
    std::uint64_t arrived_d2 = 0;
    std::uint64_t arrived_d3 = 0;
    std::map<std::string, std::uint64_t> lost_at;
};

template <typename T>
std::vector<T> concatenate(std::vector<std::vector<T>> &parts) {
    std::size_t total = 0;
    for (const auto &p : parts) {
        total += p.size();
    }
    std::vector<T> out;
    out.reserve(total);
    for (auto &p : parts) {
        out.insert(out.end(), p.begin(), p.end());
        std::vector<T>().swap(p);
    }
    return out;
}

}  // namespace

SimulationResult simulate(const Scenario &input, const RunOptions &options) {
    SimulationResult result;
    result.scenario = effective_scenario(input, options);
    const Scenario &s = result.scenario;
    validate_scenario(s);

    const DelaySampler sampler(normalize_shape(s.shape));
    const ShardPlan plan = make_shard_plan(s.source);
    const unsigned workers = std::max(1u, options.workers);
    const std::uint64_t seed = s.source.seed;
    result.live_time_s = s.source.run_duration_s;

    // Pass 1: Stokes photons to D1.
    std::vector<HeraldShard> heralds(plan.count);
    for_each_shard(plan.count, workers, [&](std::uint64_t shard) {
        auto events = generate_shard(s.source, sampler, plan, shard);
        rng::Engine engine(seed, rng::Stream::Herald, shard);
        auto &out = heralds[shard];
        for (const auto &e : events) {
            if (e.channel == PhotonChannel::Stokes) {
                ++out.stokes;
                double tag = 0.0;
                if (stokes_path_survival(s.stokes_path_transmission, engine) &&
                    detector_click(s.detectors.d1, e.emit_time_ns, engine, tag)) {
                    out.d1.push_back(tag);
                }
            } else if (e.pair_id) {
                ++out.paired;
            } else {
                ++out.singles;
            }
        }
        if (options.keep_events) {
            out.events = std::move(events);
        }
    });
    std::vector<std::vector<double>> d1_parts(plan.count);
    std::vector<std::vector<PhotonEvent>> event_parts(plan.count);
    for (std::uint64_t i = 0; i < plan.count; ++i) {
        auto &h = heralds[i];
        result.stats.stokes_emitted += h.stokes;
        result.stats.paired_antistokes += h.paired;
        result.stats.single_antistokes += h.singles;
        result.stats.d1_candidates += h.d1.size();
        d1_parts[i] = std::move(h.d1);
        event_parts[i] = std::move(h.events);
    }
    heralds.clear();
    result.tags.d1 = concatenate(d1_parts);
    apply_dead_time(result.tags.d1, s.detectors.d1.dead_time_ns);
    if (options.keep_events) {
        result.events = concatenate(event_parts);
        std::sort(result.events.begin(), result.events.end(), event_before);
    }

    // Generator schedule from the heralds (or from the external clock).
    result.drive = synthesize_drive(s);
    std::optional<DriveSchedule> schedule;
    if (result.drive) {
        const double active = result.drive->active_duration_ns;
        if (s.drive.trigger.mode == TriggerMode::Herald) {
            auto built = schedule_triggers(result.tags.d1, s.generator, active);
            result.stats.accepted_triggers = built.origins_ns.size();
            result.stats.ignored_triggers = built.ignored_triggers;
            schedule.emplace(result.drive->output, std::move(built.origins_ns));
        } else {
            rng::Engine engine(seed, rng::Stream::Trigger, 0);
            const double tick = 1e9 / s.drive.trigger.rate_hz;
            const auto clock =
                clock_schedule(engine.uniform() * tick, s.drive.trigger.rate_hz, s.generator, active, plan.total_ns);
            result.stats.accepted_triggers = clock.accepted;
            result.stats.ignored_triggers = clock.ignored_triggers;
            schedule = DriveSchedule::periodic(result.drive->output, clock.first_origin_ns, clock.period_ns,
                                               clock.accepted);
        }
    }
    const DriveSchedule *drive = schedule ? &*schedule : nullptr;

    // Pass 2: the same events again, anti-Stokes photons through the chain.
    std::vector<ChainShard> chain(plan.count);
    for_each_shard(plan.count, workers, [&](std::uint64_t shard) {
        const auto events = generate_shard(s.source, sampler, plan, shard);
        rng::Engine chain_engine(seed, rng::Stream::Chain, shard);
        rng::Engine detect_engine(seed, rng::Stream::AntiStokesDetection, shard);
        auto &out = chain[shard];
        std::map<std::string_view, std::uint64_t> lost;
        for (const auto &e : events) {
            if (e.channel != PhotonChannel::AntiStokes) {
                continue;
            }
            const auto outcome = propagate(e, s.chain, drive, chain_engine);
            if (const auto *arrived = std::get_if<Arrived>(&outcome)) {
                double tag = 0.0;
                if (arrived->port == Port::D2) {
                    ++out.arrived_d2;
                    if (detector_click(s.detectors.d2, arrived->arrival_time_ns, detect_engine, tag)) {
                        out.d2.push_back(tag);
                    }
                } else {
                    ++out.arrived_d3;
                    if (detector_click(s.detectors.d3, arrived->arrival_time_ns, detect_engine, tag)) {
                        out.d3.push_back(tag);
                    }
                }
            } else {
                ++lost[std::get<Lost>(outcome).at];
            }
        }
        for (const auto &[label, n] : lost) {
            out.lost_at[std::string(label)] += n;
        }
    });
    std::vector<std::vector<double>> d2_parts(plan.count);
    std::vector<std::vector<double>> d3_parts(plan.count);
    for (std::uint64_t i = 0; i < plan.count; ++i) {
        auto &c = chain[i];
        result.stats.arrived_d2 += c.arrived_d2;
        result.stats.arrived_d3 += c.arrived_d3;
        for (const auto &[label, n] : c.lost_at) {
            result.stats.lost_at[label] += n;
        }
        d2_parts[i] = std::move(c.d2);
        d3_parts[i] = std::move(c.d3);
    }
    chain.clear();
    result.tags.d2 = concatenate(d2_parts);
    result.tags.d3 = concatenate(d3_parts);
    apply_dead_time(result.tags.d2, s.detectors.d2.dead_time_ns);
    apply_dead_time(result.tags.d3, s.detectors.d3.dead_time_ns);

    result.d2 = start_stop_histogram(result.tags.d1, result.tags.d2, s.tdc, result.live_time_s);
    result.d3 = start_stop_histogram(result.tags.d1, result.tags.d3, s.tdc, result.live_time_s);
    result.sum = add_histograms(result.d2, result.d3);
    result.counts = coincidence_counts(result.tags, s.tdc.coincidence_window_ns, s.window_offset_ns());
    return result;
}

}  // namespace eomsim
