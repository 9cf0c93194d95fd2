// Acceptance gate. `eomsim_acceptance` runs every criterion; `eomsim_acceptance N`
// runs criterion N only. Each criterion prints one PASS or FAIL line, followed
// by indented detail lines. Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "eomsim/analysis.hpp"
#include "eomsim/biphoton_source.hpp"
#include "eomsim/errors.hpp"
#include "eomsim/pipeline.hpp"
#include "eomsim/report.hpp"
#include "eomsim/scenario.hpp"
#include "stats.hpp"

using namespace eomsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string summary;
    std::vector<std::string> details;

    void require(bool ok, const std::string &what) {
        pass = pass && ok;
        details.push_back(std::string(ok ? "ok    " : "FAILED") + "  " + what);
    }
    void note(const std::string &what) {
        details.push_back("        " + what);
    }
};

std::string fmt(const char *pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

unsigned workers() {
    return std::max(1u, std::thread::hardware_concurrency());
}

Scenario bundled(const std::string &name) {
    return parse_scenario(fs::path(EOMSIM_SCENARIO_DIR) / (name + ".scn"));
}

double herald_rate(const Scenario &s) {
    return s.source.stokes_rate_hz * s.source.duty_cycle * s.stokes_path_transmission * s.detectors.d1.efficiency;
}

/// Scenario shortened or lengthened to collect about `heralds` D1 tags.
Scenario with_heralds(Scenario s, double heralds) {
    s.source.run_duration_s = heralds / herald_rate(s);
    return s;
}

RunReport run_at(const Scenario &s) {
    RunOptions o;
    o.workers = workers();
    return run(s, o);
}

void make_lossless(Scenario &s) {
    for (auto &e : s.chain.elements) {
        if (auto *l = std::get_if<LossElement>(&e)) {
            l->transmission = 1.0;
        } else if (auto *m = std::get_if<ModulatorElement>(&e)) {
            m->params.insertion_transmission = 1.0;
        } else if (auto *b = std::get_if<Beamsplitter>(&e)) {
            b->excess_transmission = 1.0;
        }
    }
    s.detectors.d2.efficiency = 1.0;
    s.detectors.d3.efficiency = 1.0;
}

/// The reference run shared by several criteria: the unmodulated scenario at
/// one million heralds.
const RunReport &unmodulated_reference() {
    static const RunReport r = run_at(with_heralds(bundled("unmodulated"), 1e6));
    return r;
}

/// Sum histogram counts as doubles.
std::vector<double> counts_of(const RunReport &r) {
    return test::as_doubles(r.sim.sum.counts);
}

/// Per-herald density of the unmodulated histogram on its own axis: signal
/// shape delayed by the fiber plus the flat floor.
std::function<double(double)> unmodulated_density(const RunReport &u) {
    const auto shape = normalize_shape(u.sim.scenario.shape);
    const double delay = u.sim.scenario.chain.total_delay_ns();
    const double pair = u.retrieval_efficiency;
    const double floor = u.floor_per_herald_per_ns;
    return [=](double tau) { return pair * shape_density(shape, tau - delay) + floor; };
}

/// Bin average of `ratio` weighted by `density`, on 1 / `sub` of a bin.
std::vector<double> bin_average(
    const std::function<double(double)> &ratio,
    const std::function<double(double)> &density,
    const Histogram &h,
    int sub = 40) {
    std::vector<double> out(h.counts.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double num = 0.0;
        double den = 0.0;
        for (int k = 0; k < sub; ++k) {
            const double t = h.origin_ns + h.bin_width_ns * (static_cast<double>(i) + (k + 0.5) / sub);
            const double w = density(t);
            num += w * ratio(t);
            den += w;
        }
        out[i] = den > 0.0 ? num / den : 0.0;
    }
    return out;
}

struct Selected {
    std::vector<double> m;
    std::vector<double> u;
    std::vector<double> r;
};

/// Bins with at least 100 reference counts and at least 5 expected test counts.
Selected select_bins(
    const std::vector<double> &m,
    const std::vector<double> &u,
    const std::vector<double> &r,
    double scale,
    const std::function<bool(double)> &keep_tau = [](double) { return true; }) {
    Selected s;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (u[i] >= 100.0 && scale * r[i] * u[i] >= 5.0 && keep_tau(static_cast<double>(i))) {
            s.m.push_back(m[i]);
            s.u.push_back(u[i]);
            s.r.push_back(r[i]);
        }
    }
    return s;
}

double heralds_ratio(const RunReport &a, const RunReport &b) {
    return static_cast<double>(a.sim.counts.n1) / static_cast<double>(b.sim.counts.n1);
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
    Outcome o;
    const std::vector<double> factors = {0.10, 0.57, 0.8, 0.48, 0.42, 0.75, 0.5, 0.5, 0.5};
    const double product = std::accumulate(factors.begin(), factors.end(), 1.0, std::multiplies<>());
    const double ledger = eta_ledger(reference_eta_ledger());
    const double from_scenario = eta_ledger(scenario_eta_ledger(bundled("unmodulated")));
    o.require(std::abs(product - 8.6e-4) / 8.6e-4 < 0.005, fmt("nine-factor product %.4e rounds to 8.6e-4", product));
    o.require(std::abs(ledger - product) < 1e-15, fmt("reference ledger %.6e equals the product", ledger));
    o.require(std::abs(from_scenario - product) < 1e-15,
              fmt("unmodulated scenario ledger %.6e equals the product", from_scenario));
    const double rel = std::abs(ledger - 8.8e-4) / 8.8e-4;
    o.require(rel <= 0.05, fmt("within 5%% of 8.8e-4 (relative difference %.2f%%)", 100 * rel));
    o.summary = fmt("eta ledger = %.3e", ledger);
    return o;
}

Outcome criterion_2() {
    Outcome o;
    const double factor = eta_ledger(reference_backout_factors());
    o.require(std::abs(factor - 0.063) < 1e-12, fmt("back-out factor %.4f", factor));
    struct Case {
        const char *name;
        double measured;
        double lo;
        double hi;
    };
    const Case cases[] = {
        {"unmodulated", 0.035, 0.53, 0.58},
        {"two-pulse", 0.013, 0.19, 0.23},
        {"rising exponential", 0.0061, 0.085, 0.105},
        {"gaussian", 0.009, 0.112 * 0.75, 0.112 * 1.25},
    };
    for (const auto &c : cases) {
        const double backed = back_out_losses(c.measured, factors_of(reference_backout_factors()));
        o.require(backed >= c.lo && backed <= c.hi,
                  fmt("%s: %.4f / %.3f = %.4f in [%.3f, %.3f]", c.name, c.measured, factor, backed, c.lo, c.hi));
    }
    o.note("gaussian reference pair (0.9% -> 11.2%) implies a factor of 0.080, not 0.063;");
    o.note("0.009 / 0.063 = 0.143 lies just above the +25% band, so this sub-check is expected to fail");
    o.summary = "loss back-out of measured retrieval efficiencies";
    return o;
}

Outcome criterion_3() {
    Outcome o;
    const auto &u = unmodulated_reference();
    const auto m = run_at(with_heralds(bundled("two_pulse"), 1e6));
    const auto &mod = m.sim.scenario.chain.modulator()->params;
    const auto &drive = m.sim.drive->output;
    const double origin = m.sim.scenario.generator.electronic_delay_ns;
    auto r_of = [&](double tau) {
        return survival_probability(modulator_transfer(voltage_at(drive, tau - origin), mod));
    };
    const auto r = bin_average(r_of, unmodulated_density(u), u.sim.sum);
    const double c = heralds_ratio(m, u);
    const auto sel = select_bins(counts_of(m), counts_of(u), r, c);
    const auto chi = test::binomial_ratio_test(sel.m, sel.u, sel.r, c);
    o.note(fmt("heralds: modulated %llu, unmodulated %llu", (unsigned long long)m.sim.counts.n1,
               (unsigned long long)u.sim.counts.n1));
    o.require(u.sim.counts.n1 >= 9.5e5 && m.sim.counts.n1 >= 9.5e5, "about 1e6 heralds per run");
    o.require(sel.m.size() >= 50, fmt("%zu bins with >= 100 reference counts", sel.m.size()));
    o.require(chi.p_value > 0.01, fmt("ratio = |m|^2: chi2 = %.1f, dof = %d, p = %.3f", chi.statistic, chi.dof,
                                      chi.p_value));
    o.note(fmt("E_R modulated %.4f, unmodulated %.4f", m.retrieval_efficiency, u.retrieval_efficiency));
    o.summary = fmt("two-pulse / unmodulated ratio closure p = %.3f", chi.p_value);
    return o;
}

Outcome criterion_4() {
    Outcome o;
    const auto &u = unmodulated_reference();
    o.require(std::abs(u.retrieval_efficiency - 0.035) <= 0.004,
              fmt("full loss chain: E_R = %.4f (0.035 +/- 0.004), backed out %.3f", u.retrieval_efficiency,
                  u.retrieval_backed_out));
    auto lossless = with_heralds(bundled("unmodulated"), 1e6);
    make_lossless(lossless);
    const auto l = run_at(lossless);
    o.require(std::abs(l.retrieval_efficiency - 0.55) <= 0.01,
              fmt("lossless chain: E_R = %.4f (0.55 +/- 0.01)", l.retrieval_efficiency));
    o.summary = fmt("E_R = %.4f (full chain), %.4f (lossless)", u.retrieval_efficiency, l.retrieval_efficiency);
    return o;
}

Outcome criterion_5() {
    Outcome o;
    // (a) Single pairs, no background.
    {
        auto s = bundled("unmodulated");
        s.source.stokes_rate_hz = 100;
        s.source.duty_cycle = 1.0;
        s.source.antistokes_singles_rate_hz = 0;
        make_lossless(s);
        const auto r = run_at(with_heralds(s, 1e6));
        const auto &g = *r.g2;
        const double bound = g.upper_bound ? *g.upper_bound : g.value + 2 * g.standard_error;
        o.require(bound < 0.02, fmt("(a) single pairs: N123 = %llu, bound %.2e < 0.02 at %llu heralds",
                                    (unsigned long long)r.sim.counts.n123, bound,
                                    (unsigned long long)r.sim.counts.n1));
    }
    // (b) Uncorrelated streams.
    {
        auto s = bundled("unmodulated");
        s.source.stokes_rate_hz = 1e6;
        s.source.duty_cycle = 1.0;
        s.source.intrinsic_retrieval = 0;
        s.source.antistokes_singles_rate_hz = 1.4e6;
        make_lossless(s);
        const auto r = run_at(with_heralds(s, 3e5));
        const auto &g = *r.g2;
        o.require(std::abs(g.value - 1.0) <= 0.05,
                  fmt("(b) uncorrelated: g2 = %.3f +/- %.3f (1.00 +/- 0.05)", g.value, g.standard_error));
    }
    // (c) Operating point.
    const auto op = bundled("g2_operating_point");
    {
        const auto r = run_at(op);
        const auto &g = *r.g2;
        o.require(g.value >= 0.12 && g.value <= 0.30 && g.value < 0.5,
                  fmt("(c) operating point: g2 = %.3f +/- %.3f in [0.12, 0.30] and < 0.5", g.value, g.standard_error));
        o.note(fmt("    N1 = %llu, N12 = %llu, N13 = %llu, N123 = %llu", (unsigned long long)r.sim.counts.n1,
                   (unsigned long long)r.sim.counts.n12, (unsigned long long)r.sim.counts.n13,
                   (unsigned long long)r.sim.counts.n123));
    }
    // (d) Multi-pair floor.
    {
        RunOptions opts;
        opts.workers = workers();
        const auto curve = multi_pair_floor(op, {1.15e4, 2.3e4, 4.6e4, 9.2e4}, opts, 2e5, true);
        bool monotone = true;
        bool below = true;
        for (std::size_t i = 0; i < curve.size(); ++i) {
            const auto &p = curve[i];
            const double bg = p.with_background ? p.with_background->value : NAN;
            o.note(fmt("    R_s = %.3g /s: floor %.4f +/- %.4f, with background %.3f", p.stokes_rate_hz, p.floor.value,
                       p.floor.standard_error, bg));
            if (i > 0) {
                monotone = monotone && p.floor.value > curve[i - 1].floor.value;
            }
            below = below && p.with_background && p.floor.value < bg;
        }
        o.require(monotone, "(d) floor increases with Stokes rate");
        o.require(below, "(d) floor lies below the with-background curve at every grid point");
    }
    o.summary = "g2_cond limits, operating point and multi-pair floor";
    return o;
}

Outcome criterion_6() {
    Outcome o;
    const auto m0 = bundled("rising_exponential");
    const auto &mod = m0.chain.modulator()->params;
    auto target = [](double t) { return std::exp((t - 210.0) / 100.0); };
    const auto &tab = std::get<TabulatedWave>(m0.drive.waveform->kind);
    double worst = 0.0;
    for (std::size_t k = 0; k < tab.volts.size(); ++k) {
        const double t = tab.start_ns + tab.sample_period_ns * static_cast<double>(k);
        worst = std::max(worst, std::abs(std::abs(modulator_transfer(tab.volts[k], mod)) - target(t)));
    }
    o.require(worst <= 1e-9, fmt("predistortion round trip: max | |m| - f | = %.2e over %zu samples", worst,
                                 tab.volts.size()));

    const auto &u = unmodulated_reference();
    const auto m = run_at(with_heralds(m0, 1e6));
    const double origin = m0.generator.electronic_delay_ns;
    auto r_of = [&](double tau) {
        const double t = tau - origin;
        return t >= 0.0 && t <= 210.0 ? target(t) * target(t) : 0.0;
    };
    const auto r = bin_average(r_of, unmodulated_density(u), u.sim.sum);
    const double edge = 13.0;
    const auto sel = select_bins(counts_of(m), counts_of(u), r, heralds_ratio(m, u), [&](double tau) {
        const double t = tau - origin;
        return t >= edge && t + 1.0 <= 210.0 - edge;
    });
    const auto chi = test::binomial_ratio_test(sel.m, sel.u, sel.r, heralds_ratio(m, u), true);
    o.require(sel.m.size() >= 50, fmt("%zu bins inside the waveform, %g ns from its edges", sel.m.size(), edge));
    o.require(chi.p_value > 0.01,
              fmt("shape = f^2 (scale fitted): chi2 = %.1f, dof = %d, p = %.3f", chi.statistic, chi.dof, chi.p_value));
    o.note(fmt("E_R modulated %.4f", m.retrieval_efficiency));
    o.summary = fmt("predistortion round trip %.1e, shape p = %.3f", worst, chi.p_value);
    return o;
}

Outcome criterion_7() {
    Outcome o;
    const double slow = group_delay_from_velocity(0.017, 2e4);
    const double fast = group_delay_from_velocity(0.017, 3e5);
    o.require(std::abs(slow - 850.0) < 1e-9, fmt("1.7 cm at 2e4 m/s: %.3f ns", slow));
    o.require(std::abs(fast - 56.7) < 0.05, fmt("1.7 cm at 3e5 m/s: %.3f ns", fast));
    o.require(slow >= 50 && slow <= 900 && fast >= 50 && fast <= 900, "both inside 50 to 900 ns");
    o.summary = fmt("group delays %.1f ns and %.1f ns", slow, fast);
    return o;
}

Outcome criterion_8() {
    Outcome o;
    {
        const auto a = run_at(bundled("control_no_fiber"));
        const auto &g = *a.g2;
        o.require(g.value + 2 * g.standard_error >= 1.0,
                  fmt("A (no fiber): g2 = %.3f +/- %.3f, >= 1 within 2 sigma", g.value, g.standard_error));
        o.note(fmt("    N1 = %llu, N123 = %llu", (unsigned long long)a.sim.counts.n1,
                   (unsigned long long)a.sim.counts.n123));
    }
    {
        const auto &u = unmodulated_reference();
        const auto b0 = with_heralds(bundled("control_random_trigger"), 1e6);
        const auto b = run_at(b0);
        const double c = heralds_ratio(b, u);
        const std::vector<double> ones(u.sim.sum.counts.size(), 1.0);
        const auto sel = select_bins(counts_of(b), counts_of(u), ones, c / 3.0);
        const auto chi = test::binomial_ratio_test(sel.m, sel.u, sel.r, c, true);
        o.require(chi.p_value > 0.01, fmt("B (external clock): shape vs unmodulated chi2 = %.1f, dof = %d, p = %.3f",
                                          chi.statistic, chi.dof, chi.p_value));
        // Duty fraction: mean |m|^2 of the periodic drive over one period.
        const auto &drive = *b.sim.drive;
        const auto &mod = b0.chain.modulator()->params;
        const auto clock = clock_schedule(0.0, b0.drive.trigger.rate_hz, b0.generator, drive.active_duration_ns,
                                          b0.source.run_duration_s * 1e9);
        const double period = clock.period_ns;
        const auto density = [&](double t) {
            const double v = t < drive.active_duration_ns ? voltage_at(drive.output, t) : drive.output.bias_voltage;
            return survival_probability(modulator_transfer(v, mod));
        };
        const double duty = test::richardson_trapezoid(density, 0.0, period, 0.01) / period;
        const double ratio = b.retrieval_efficiency / u.retrieval_efficiency;
        o.require(std::abs(ratio / duty - 1.0) <= 0.05,
                  fmt("B: paired rate ratio %.4f vs duty fraction %.4f (period %.0f ns), relative %.2f%%", ratio,
                      duty, period, 100 * (ratio / duty - 1.0)));
    }
    o.summary = "controls: no-fiber background and externally clocked drive";
    return o;
}

Outcome criterion_9() {
    Outcome o;
    std::vector<fs::path> files;
    for (const auto &e : fs::directory_iterator(EOMSIM_SCENARIO_DIR)) {
        if (e.path().extension() == ".scn") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto &f : files) {
        const auto s = parse_scenario(f);
        RunOptions opts;
        // About 2e4 heralds per check keeps the whole sweep short.
        opts.time_scale = std::min(1.0, 2e4 / (herald_rate(s) * s.source.run_duration_s));
        opts.workers = 1;
        const auto a = report_text(run(s, opts));
        opts.workers = 4;
        const auto b = report_text(run(s, opts));
        o.require(a == b, fmt("%s: workers 1 and 4 give identical reports (%zu bytes)", s.name.c_str(), a.size()));
    }
    o.require(files.size() >= 7, fmt("%zu bundled scenarios", files.size()));
    o.summary = "byte-identical reports across worker counts";
    return o;
}

const std::map<int, std::pair<const char *, std::function<Outcome()>>> kCriteria = {
    {1, {"eta ledger", criterion_1}},
    {2, {"loss back-out", criterion_2}},
    {3, {"modulation ratio closure", criterion_3}},
    {4, {"retrieval efficiency end to end", criterion_4}},
    {5, {"conditional g2 properties", criterion_5}},
    {6, {"predistortion", criterion_6}},
    {7, {"group delay", criterion_7}},
    {8, {"controls", criterion_8}},
    {9, {"determinism", criterion_9}},
};

}  // namespace

int main(int argc, char **argv) {
    std::vector<int> chosen;
    for (int i = 1; i < argc; ++i) {
        chosen.push_back(std::atoi(argv[i]));
        if (!kCriteria.count(chosen.back())) {
            std::fprintf(stderr, "unknown criterion '%s' (expected 1-%zu)\n", argv[i], kCriteria.size());
            return 2;
        }
    }
    if (chosen.empty()) {
        for (const auto &[n, _] : kCriteria) {
            chosen.push_back(n);
        }
    }
    int failures = 0;
    for (int n : chosen) {
        const auto &[name, fn] = kCriteria.at(n);
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = fn();
        } catch (const std::exception &e) {
            out.pass = false;
            out.summary = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s  criterion %d (%s): %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", n, name, out.summary.c_str(),
                    secs);
        for (const auto &d : out.details) {
            std::printf("      %s\n", d.c_str());
        }
        std::fflush(stdout);
        failures += !out.pass;
    }
    return failures == 0 ? 0 : 1;
}
