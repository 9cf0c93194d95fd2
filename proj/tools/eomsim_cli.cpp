// eomsim: run, validate and control scenario files from the command line.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "eomsim/errors.hpp"
#include "eomsim/report.hpp"
#include "eomsim/scenario.hpp"

namespace {

constexpr int kValidation = 2;
constexpr int kRuntime = 3;

struct Common {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    double time_scale = 1.0;
    std::string out;
};

eomsim::RunOptions options_of(const Common &c) {
    eomsim::RunOptions o;
    o.seed = c.seed;
    o.workers = c.workers;
    o.time_scale = c.time_scale;
    return o;
}

std::filesystem::path output_dir(const Common &c, const eomsim::Scenario &s) {
    if (!c.out.empty()) {
        return c.out;
    }
    if (!s.outputs.directory.empty()) {
        return s.outputs.directory;
    }
    if (const char *env = std::getenv("EOMSIM_OUT_DIR"); env && *env) {
        return std::filesystem::path(env) / s.name;
    }
    return std::filesystem::path("eomsim_out") / s.name;
}

void add_run_flags(CLI::App *cmd, Common &c) {
    cmd->add_option("scenario", c.scenario, "Scenario file (.scn)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Override the scenario seed");
    cmd->add_option("--workers", c.workers, "Worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--time-scale", c.time_scale, "Multiply the scenario run duration")->check(CLI::PositiveNumber);
    cmd->add_option("--out", c.out, "Output directory (default: $EOMSIM_OUT_DIR/<name> or ./eomsim_out/<name>)");
}

std::vector<double> parse_rates(const std::string &text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception &) {
            throw eomsim::Error(eomsim::ErrorKind::ValidationError, "--rates: cannot parse '" + item + "'");
        }
    }
    if (out.empty()) {
        throw eomsim::Error(eomsim::ErrorKind::ValidationError, "--rates: empty grid");
    }
    return out;
}

void summarize(std::ostream &out, const eomsim::RunReport &r, const std::filesystem::path &dir) {
    const auto &c = r.sim.counts;
    out << r.sim.scenario.name << ": N1=" << c.n1 << " N12=" << c.n12 << " N13=" << c.n13 << " N123=" << c.n123
        << " E_R=" << r.retrieval_efficiency << " (backed out " << r.retrieval_backed_out << ")";
    if (r.g2) {
        out << " g2_cond=" << r.g2->value << " +/- " << r.g2->standard_error;
    }
    out << "\n  outputs: " << dir.string() << "\n";
    for (const auto &w : r.warnings) {
        out << "  warning: " << w << "\n";
    }
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Heralded single-photon modulation simulator"};
    app.require_subcommand(1);

    Common run_args;
    auto *run_cmd = app.add_subcommand("run", "Simulate a scenario and write its report and data files");
    add_run_flags(run_cmd, run_args);

    std::string validate_path;
    auto *validate_cmd = app.add_subcommand("validate", "Parse and validate a scenario, print its digest");
    validate_cmd->add_option("scenario", validate_path, "Scenario file (.scn)")->required()->check(CLI::ExistingFile);

    Common control_args;
    auto *controls_cmd = app.add_subcommand("controls", "Run the no-fiber and external-clock controls");
    add_run_flags(controls_cmd, control_args);

    Common floor_args;
    std::string rates;
    double heralds_per_point = 2e5;
    auto *floor_cmd = app.add_subcommand("floor-curve", "g2_cond against Stokes rate, with and without background");
    add_run_flags(floor_cmd, floor_args);
    floor_cmd->add_option("--rates", rates, "Comma-separated emitted Stokes rates in 1/s")->required();
    floor_cmd->add_option("--heralds", heralds_per_point, "Target heralds per grid point")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kValidation;
    }

    try {
        if (*validate_cmd) {
            const auto s = eomsim::parse_scenario(validate_path);
            std::cout << s.name << ": ok\nconfig_digest " << eomsim::config_digest(s) << "\n";
            return 0;
        }
        if (*run_cmd) {
            const auto s = eomsim::parse_scenario(run_args.scenario);
            const auto report = eomsim::run(s, options_of(run_args));
            const auto dir = output_dir(run_args, report.sim.scenario);
            eomsim::write_outputs(report, dir);
            summarize(std::cout, report, dir);
            return 0;
        }
        if (*controls_cmd) {
            const auto s = eomsim::parse_scenario(control_args.scenario);
            const auto [a, b] = eomsim::run_controls(s, options_of(control_args));
            const auto dir = output_dir(control_args, s);
            eomsim::write_outputs(a, dir / "control_no_fiber");
            eomsim::write_outputs(b, dir / "control_random_trigger");
            summarize(std::cout, a, dir / "control_no_fiber");
            summarize(std::cout, b, dir / "control_random_trigger");
            return 0;
        }
        if (*floor_cmd) {
            const auto s = eomsim::effective_scenario(eomsim::parse_scenario(floor_args.scenario), {});
            const auto grid = parse_rates(rates);
            auto opts = options_of(floor_args);
            const auto curve = eomsim::multi_pair_floor(s, grid, opts, heralds_per_point * floor_args.time_scale);
            const auto dir = output_dir(floor_args, s);
            std::filesystem::create_directories(dir);
            std::ofstream csv(dir / "floor_curve.csv");
            csv << "stokes_rate_hz,heralds,g2_floor,g2_floor_err,g2_with_background,g2_with_background_err\n";
            for (const auto &p : curve) {
                csv << p.stokes_rate_hz << ',' << p.heralds << ',' << p.floor.value << ',' << p.floor.standard_error
                    << ',';
                if (p.with_background) {
                    csv << p.with_background->value << ',' << p.with_background->standard_error;
                } else {
                    csv << ',';
                }
                csv << '\n';
            }
            std::ofstream json(dir / "floor_curve.json");
            json << eomsim::floor_curve_json(curve).dump(2) << "\n";
            std::cout << eomsim::floor_curve_json(curve).dump(2) << "\n  outputs: " << dir.string() << "\n";
            return 0;
        }
    } catch (const eomsim::Error &e) {
        std::cerr << "eomsim: " << e.what() << "\n";
        const auto k = e.kind();
        return k == eomsim::ErrorKind::ValidationError || k == eomsim::ErrorKind::ParseError ? kValidation : kRuntime;
    } catch (const std::exception &e) {
        std::cerr << "eomsim: " << e.what() << "\n";
        return kRuntime;
    }
    return 0;
}
