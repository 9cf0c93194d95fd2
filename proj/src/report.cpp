#include "eomsim/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "eomsim/errors.hpp"

namespace eomsim {

std::vector<LedgerEntry> scenario_eta_ledger(const Scenario &s) {
    std::vector<LedgerEntry> out;
    out.push_back({"duty_cycle", s.source.duty_cycle});
    const auto &bs = s.chain.beamsplitter();
    out.push_back({"beamsplitter_port", bs.measured_port_transmission});
    out.push_back({"beamsplitter_excess", bs.excess_transmission});
    out.push_back({"stokes_filter", s.stokes_path_transmission});
    for (const auto &e : s.chain.elements) {
        if (const auto *loss = std::get_if<LossElement>(&e)) {
            out.push_back({loss->label, loss->transmission});
        }
    }
    out.push_back({"stokes_detector", s.detectors.d1.efficiency});
    out.push_back({"antistokes_detector", s.detectors.d2.efficiency});
    if (const auto *mod = s.chain.modulator()) {
        out.push_back({"modulator_insertion", mod->params.insertion_transmission});
    }
    return out;
}

std::vector<LedgerEntry> scenario_backout_factors(const Scenario &s) {
    std::vector<LedgerEntry> out;
    out.push_back({"beamsplitter_excess", s.chain.beamsplitter().excess_transmission});
    for (const auto &e : s.chain.elements) {
        if (const auto *loss = std::get_if<LossElement>(&e)) {
            out.push_back({loss->label, loss->transmission});
        }
    }
    out.push_back({"antistokes_detector", s.detectors.d2.efficiency});
    if (const auto *mod = s.chain.modulator()) {
        out.push_back({"modulator_insertion", mod->params.insertion_transmission});
    }
    return out;
}

RunReport analyze(SimulationResult sim) {
    RunReport r;
    r.sim = std::move(sim);
    const Scenario &s = r.sim.scenario;
    const auto &counts = r.sim.counts;
    r.config_digest = config_digest(s);
    r.window_offset_ns = s.window_offset_ns();
    r.signal_window_ns = s.signal_window_ns();
    if (r.sim.live_time_s > 0.0) {
        r.stokes_rate_hz = static_cast<double>(r.sim.tags.d1.size()) / r.sim.live_time_s;
        r.antistokes_rate_hz =
            static_cast<double>(r.sim.tags.d2.size() + r.sim.tags.d3.size()) / r.sim.live_time_s;
    }
    r.floor_per_herald_per_ns = estimate_floor(r.sim.sum, s.analysis.tail_window_ns);
    r.retrieval_efficiency = retrieval_efficiency(r.sim.sum, counts.n1, r.floor_per_herald_per_ns, r.window_offset_ns,
                                                  r.window_offset_ns + r.signal_window_ns, &r.efficiency_clamped);
    if (r.efficiency_clamped) {
        r.warnings.push_back("retrieval efficiency clamped to [0, 1] after floor subtraction");
    }
    r.backout_factors = scenario_backout_factors(s);
    const auto factors = factors_of(r.backout_factors);
    try {
        r.retrieval_backed_out = std::min(1.0, back_out_losses(r.retrieval_efficiency, factors));
    } catch (const Error &e) {
        r.warnings.push_back(std::string("loss back-out skipped: ") + e.what());
    }
    if (counts.n12 > 0 && counts.n13 > 0) {
        r.g2 = g2_cond(counts.n1, counts.n12, counts.n13, counts.n123);
    } else {
        r.warnings.push_back("g2_cond undefined: no two-fold coincidences on one of the ports");
    }
    r.eta_ledger = scenario_eta_ledger(s);
    r.eta = eta_ledger(r.eta_ledger);
    if (r.sim.drive && r.sim.drive->clamped_samples > 0) {
        r.warnings.push_back("drive clamped to generator v_max at " + std::to_string(r.sim.drive->clamped_samples) +
                             " sample(s)");
    }
    return r;
}

RunReport run(const Scenario &scenario, const RunOptions &options) {
    RunOptions opts = options;
    opts.keep_events = opts.keep_events || scenario.outputs.events_csv;
    return analyze(simulate(scenario, opts));
}

Scenario control_no_fiber(const Scenario &base) {
    Scenario s = base;
    s.name = base.name + "_control_no_fiber";
    for (auto &e : s.chain.elements) {
        if (auto *fiber = std::get_if<FiberDelay>(&e)) {
            fiber->delay_ns = 0.0;
        }
    }
    s.analysis.window_offset_ns = s.generator.electronic_delay_ns;
    return s;
}

Scenario control_random_trigger(const Scenario &base, double clock_rate_hz) {
    Scenario s = base;
    s.name = base.name + "_control_random_trigger";
    s.drive.trigger = TriggerSpec{TriggerMode::ExternalClock, clock_rate_hz};
    return s;
}

std::pair<RunReport, RunReport> run_controls(const Scenario &base, const RunOptions &options) {
    return {run(control_no_fiber(base), options), run(control_random_trigger(base), options)};
}

Scenario floor_scenario(const Scenario &base, double stokes_rate_hz) {
    Scenario s = base;
    s.name = base.name + "_floor";
    s.source.stokes_rate_hz = stokes_rate_hz;
    s.source.antistokes_singles_rate_hz = 0.0;
    for (auto &e : s.chain.elements) {
        if (auto *loss = std::get_if<LossElement>(&e)) {
            loss->transmission = 1.0;
        } else if (auto *mod = std::get_if<ModulatorElement>(&e)) {
            mod->params.insertion_transmission = 1.0;
            mod->params.leakage = 0.0;
            mod->params.idle_voltage = mod->params.v_pi;
        } else if (auto *bs = std::get_if<Beamsplitter>(&e)) {
            bs->excess_transmission = 1.0;
        }
    }
    s.drive = DriveSpec{};
    s.detectors.d2.efficiency = 1.0;
    s.detectors.d3.efficiency = 1.0;
    return s;
}

namespace {

double expected_herald_rate(const Scenario &s) {
    const double on = s.source.duty_cycle;
    return s.source.stokes_rate_hz * on * s.stokes_path_transmission * s.detectors.d1.efficiency;
}

std::optional<G2Cond> maybe_g2(const CoincidenceCounts &c) {
    if (c.n12 == 0 || c.n13 == 0) {
        return std::nullopt;
    }
    return g2_cond(c.n1, c.n12, c.n13, c.n123);
}

}  // namespace

std::vector<FloorPoint> multi_pair_floor(
    const Scenario &base,
    const std::vector<double> &grid,
    const RunOptions &options,
    double heralds_per_point,
    bool with_background) {
    if (grid.empty()) {
        throw Error(ErrorKind::InvalidParams, "stokes rate grid is empty");
    }
    std::vector<FloorPoint> out;
    out.reserve(grid.size());
    RunOptions opts = options;
    opts.time_scale = 1.0;
    opts.keep_events = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double rate = grid[i];
        if (!(rate > 0.0) || !std::isfinite(rate)) {
            throw Error(ErrorKind::InvalidParams, "stokes rates must be > 0");
        }
        FloorPoint p;
        p.stokes_rate_hz = rate;
        Scenario floor = floor_scenario(base, rate);
        floor.source.run_duration_s = heralds_per_point / expected_herald_rate(floor);
        if (options.seed) {
            opts.seed = *options.seed + i;
        } else {
            opts.seed = base.source.seed + i;
        }
        const auto sim = simulate(floor, opts);
        p.heralds = sim.counts.n1;
        const auto g2 = maybe_g2(sim.counts);
        p.floor = g2.value_or(G2Cond{});
        if (with_background) {
            Scenario full = base;
            full.source.stokes_rate_hz = rate;
            full.source.run_duration_s = floor.source.run_duration_s;
            p.with_background = maybe_g2(simulate(full, opts).counts);
        }
        out.push_back(p);
    }
    return out;
}

namespace {

nlohmann::json g2_json(const std::optional<G2Cond> &g2) {
    if (!g2) {
        return nullptr;
    }
    nlohmann::json j = {{"value", g2->value}, {"standard_error", g2->standard_error}};
    j["upper_bound_90"] = g2->upper_bound ? nlohmann::json(*g2->upper_bound) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json histogram_json(const Histogram &h) {
    return {
        {"bin_width_ns", h.bin_width_ns},
        {"origin_ns", h.origin_ns},
        {"total_heralds", h.total_heralds},
        {"live_time_s", h.live_time_s},
        {"total_counts", h.total()},
        {"counts", h.counts},
    };
}

nlohmann::json ledger_json(const std::vector<LedgerEntry> &entries) {
    auto list = nlohmann::json::array();
    for (const auto &e : entries) {
        list.push_back({{"label", e.label}, {"factor", e.factor}});
    }
    return list;
}

}  // namespace

nlohmann::json report_json(const RunReport &r) {
    const auto &sim = r.sim;
    const auto &st = sim.stats;
    nlohmann::json j;
    j["scenario"] = sim.scenario.name;
    j["seed"] = sim.scenario.source.seed;
    j["config_digest"] = r.config_digest;
    j["live_time_s"] = sim.live_time_s;
    j["histograms"] = {
        {"d2", histogram_json(sim.d2)},
        {"d3", histogram_json(sim.d3)},
        {"sum", histogram_json(sim.sum)},
    };
    j["counts"] = {
        {"N1", sim.counts.n1},
        {"N12", sim.counts.n12},
        {"N13", sim.counts.n13},
        {"N123", sim.counts.n123},
        {"D2_tags", sim.tags.d2.size()},
        {"D3_tags", sim.tags.d3.size()},
    };
    j["rates"] = {
        {"R_s_hz", r.stokes_rate_hz},
        {"R_as_hz", r.antistokes_rate_hz},
        {"G2_floor_hz2", background_floor(r.stokes_rate_hz, r.antistokes_rate_hz)},
    };
    j["efficiency"] = {
        {"E_R_measured", r.retrieval_efficiency},
        {"E_R_backed_out", r.retrieval_backed_out},
        {"clamped", r.efficiency_clamped},
        {"floor_per_herald_per_ns", r.floor_per_herald_per_ns},
        {"tail_window_ns", sim.scenario.analysis.tail_window_ns},
        {"signal_window_ns", {r.window_offset_ns, r.window_offset_ns + r.signal_window_ns}},
        {"backout_factors", ledger_json(r.backout_factors)},
        {"backout_product", eta_ledger(r.backout_factors)},
    };
    j["g2_cond"] = {
        {"estimate", g2_json(r.g2)},
        {"coincidence_window_ns", sim.scenario.tdc.coincidence_window_ns},
        {"window_offset_ns", r.window_offset_ns},
    };
    j["eta_ledger"] = {
        {"factors", ledger_json(r.eta_ledger)},
        {"product", r.eta},
        {"note", "detector efficiency enters twice: once for the Stokes detector, once for the anti-Stokes detector"},
    };
    nlohmann::json lost = nlohmann::json::object();
    for (const auto &[label, n] : st.lost_at) {
        lost[label] = n;
    }
    j["diagnostics"] = {
        {"stokes_emitted", st.stokes_emitted},
        {"paired_antistokes_emitted", st.paired_antistokes},
        {"single_antistokes_emitted", st.single_antistokes},
        {"d1_candidates", st.d1_candidates},
        {"accepted_triggers", st.accepted_triggers},
        {"ignored_triggers", st.ignored_triggers},
        {"arrived_d2", st.arrived_d2},
        {"arrived_d3", st.arrived_d3},
        {"lost_at", lost},
        {"drive_clamped_samples", sim.drive ? sim.drive->clamped_samples : 0},
        {"drive_active_duration_ns", sim.drive ? sim.drive->active_duration_ns : 0.0},
        {"warnings", r.warnings},
    };
    return j;
}

std::string report_text(const RunReport &r) {
    return report_json(r).dump(2) + "\n";
}

namespace {

std::ofstream open_output(const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    }
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_gnuplot(std::ostream &out, const RunReport &r, bool has_drive) {
    out << "# gnuplot -persist plot.gp\n"
        << "set datafile separator ','\n"
        << "set datafile commentschars '#'\n"
        << "set key autotitle columnhead\n"
        << "set xlabel 'tau (ns)'\n"
        << "set ylabel 'coincidences per " << fmt(r.sim.sum.bin_width_ns) << " ns bin'\n"
        << "set title '" << r.sim.scenario.name << "'\n"
        << "plot 'histogram_sum.csv' using 1:2 with steps title 'D2 + D3', \\\n"
        << "     'histogram_d2.csv' using 1:2 with steps title 'D2', \\\n"
        << "     'histogram_d3.csv' using 1:2 with steps title 'D3'\n";
    if (has_drive) {
        out << "pause -1\n"
            << "set ylabel 'volts'\n"
            << "set xlabel 'time after trigger origin (ns)'\n"
            << "plot 'waveform_programmed.csv' using 1:2 with lines title 'programmed', \\\n"
            << "     'waveform_output.csv' using 1:2 with lines title 'generator output'\n";
    }
}

}  // namespace

void write_outputs(const RunReport &r, const std::filesystem::path &dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::IoError, "cannot create output directory " + dir.string() + ": " + ec.message());
    }
    {
        auto out = open_output(dir / "report.json");
        out << report_text(r);
    }
    const std::vector<std::pair<std::string, std::string>> meta = {
        {"scenario", r.sim.scenario.name},
        {"seed", std::to_string(r.sim.scenario.source.seed)},
        {"config_digest", r.config_digest},
        {"window_offset_ns", fmt(r.window_offset_ns)},
    };
    auto histogram = [&](const char *file, const Histogram &h, const char *port) {
        auto out = open_output(dir / file);
        auto m = meta;
        m.emplace_back("port", port);
        write_histogram_csv(out, h, m);
    };
    histogram("histogram_d2.csv", r.sim.d2, "D2");
    histogram("histogram_d3.csv", r.sim.d3, "D3");
    histogram("histogram_sum.csv", r.sim.sum, "D2+D3");
    const bool has_drive = r.sim.drive.has_value();
    if (has_drive) {
        const double dt = r.sim.scenario.synthesis_sample_period_ns;
        auto programmed = open_output(dir / "waveform_programmed.csv");
        write_waveform_csv(programmed, r.sim.drive->programmed, dt);
        auto output = open_output(dir / "waveform_output.csv");
        write_waveform_csv(output, r.sim.drive->output, dt);
    }
    if (r.sim.scenario.outputs.gnuplot) {
        auto out = open_output(dir / "plot.gp");
        write_gnuplot(out, r, has_drive);
    }
    if (r.sim.scenario.outputs.events_csv) {
        auto out = open_output(dir / "events.csv");
        write_event_csv(out, r.sim.events);
    }
}

nlohmann::json floor_curve_json(const std::vector<FloorPoint> &curve) {
    auto list = nlohmann::json::array();
    for (const auto &p : curve) {
        list.push_back({
            {"stokes_rate_hz", p.stokes_rate_hz},
            {"heralds", p.heralds},
            {"floor", g2_json(p.floor)},
            {"with_background", g2_json(p.with_background)},
        });
    }
    return list;
}

}  // namespace eomsim
