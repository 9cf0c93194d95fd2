#include "eomsim/scenario.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "eomsim/errors.hpp"

namespace eomsim {

double Scenario::window_offset_ns() const {
    return analysis.window_offset_ns.value_or(chain.total_delay_ns());
}

double Scenario::signal_window_ns() const {
    return analysis.signal_window_ns.value_or(tdc.coincidence_window_ns);
}

namespace {

struct Context {
    std::string source;
    std::filesystem::path base_dir;
};

std::string location(const Context &ctx, const YAML::Node &node, const std::string &path) {
    std::ostringstream out;
    out << ctx.source;
    const auto mark = node.Mark();
    if (mark.line >= 0) {
        out << ':' << mark.line + 1;
    }
    out << ": " << (path.empty() ? "<root>" : path);
    return out.str();
}

[[noreturn]] void fail(const Context &ctx, const YAML::Node &node, const std::string &path, const std::string &what) {
    throw Error(ErrorKind::ValidationError, location(ctx, node, path) + ": " + what);
}

/// One YAML mapping whose keys must all be consumed before `finish()`.
class Fields {
   public:
    Fields(const Context &ctx, YAML::Node node, std::string path) : ctx_(ctx), node_(std::move(node)), path_(std::move(path)) {
        if (!node_.IsMap()) {
            fail(ctx_, node_, path_, "expected a mapping");
        }
    }

    const YAML::Node &node() const {
        return node_;
    }
    const Context &ctx() const {
        return ctx_;
    }

    std::string child_path(const std::string &key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    bool has(const std::string &key) const {
        return static_cast<bool>(node_[key]);
    }

    YAML::Node take(const std::string &key) {
        seen_.insert(key);
        return node_[key];
    }

    double number(const std::string &key, double fallback) {
        auto n = take(key);
        return n ? as_number(n, child_path(key)) : fallback;
    }

    double required_number(const std::string &key) {
        auto n = take(key);
        if (!n) {
            fail(ctx_, node_, child_path(key), "required field is missing");
        }
        return as_number(n, child_path(key));
    }

    double probability(const std::string &key, double fallback) {
        const double v = number(key, fallback);
        if (!(v >= 0.0 && v <= 1.0)) {
            fail(ctx_, node_[key], child_path(key), "must lie in [0, 1]");
        }
        return v;
    }

    double non_negative(const std::string &key, double fallback) {
        const double v = number(key, fallback);
        if (!(v >= 0.0)) {
            fail(ctx_, node_[key], child_path(key), "must be >= 0");
        }
        return v;
    }

    double positive(const std::string &key, double fallback) {
        const double v = number(key, fallback);
        if (!(v > 0.0)) {
            fail(ctx_, node_[key], child_path(key), "must be > 0");
        }
        return v;
    }

    bool boolean(const std::string &key, bool fallback) {
        auto n = take(key);
        if (!n) {
            return fallback;
        }
        try {
            return n.as<bool>();
        } catch (const YAML::Exception &) {
            fail(ctx_, n, child_path(key), "expected true or false");
        }
    }

    std::string string(const std::string &key, const std::string &fallback) {
        auto n = take(key);
        if (!n) {
            return fallback;
        }
        if (!n.IsScalar()) {
            fail(ctx_, n, child_path(key), "expected a string");
        }
        return n.Scalar();
    }

    std::string required_string(const std::string &key) {
        if (!has(key)) {
            fail(ctx_, node_, child_path(key), "required field is missing");
        }
        return string(key, "");
    }

    std::optional<Fields> section(const std::string &key) {
        auto n = take(key);
        if (!n) {
            return std::nullopt;
        }
        return Fields(ctx_, n, child_path(key));
    }

    void finish() const {
        for (const auto &kv : node_) {
            const auto key = kv.first.Scalar();
            if (!seen_.count(key)) {
                fail(ctx_, kv.first, child_path(key), "unknown field");
            }
        }
    }

    double as_number(const YAML::Node &n, const std::string &path) const {
        if (!n.IsScalar()) {
            fail(ctx_, n, path, "expected a number");
        }
        double v = 0.0;
        try {
            v = n.as<double>();
        } catch (const YAML::Exception &) {
            fail(ctx_, n, path, "expected a number, got '" + n.Scalar() + "'");
        }
        if (!std::isfinite(v)) {
            fail(ctx_, n, path, "must be finite");
        }
        return v;
    }

   private:
    const Context &ctx_;
    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

/// Runs a module validator and re-raises its failure with scenario context.
template <typename F>
void checked(const Context &ctx, const YAML::Node &node, const std::string &path, F &&f) {
    try {
        f();
    } catch (const Error &e) {
        fail(ctx, node, path, e.what());
    }
}

BiphotonShape parse_shape(Fields f) {
    const auto model = f.string("model", "flat_top_precursor");
    BiphotonShape shape;
    if (model == "flat_top_precursor") {
        shape = BiphotonShape::flat_top_precursor(
            f.required_number("group_delay"), f.non_negative("precursor_width", 0.0),
            f.non_negative("precursor_height_ratio", 0.0), f.non_negative("tail_decay", 0.0));
    } else if (model == "tabulated") {
        auto samples = f.take("samples");
        if (!samples || !samples.IsSequence()) {
            fail(f.ctx(), f.node(), f.child_path("samples"), "expected a list of [tau_ns, density] pairs");
        }
        std::vector<ShapeSample> pts;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto path = f.child_path("samples") + "[" + std::to_string(i) + "]";
            const auto &item = samples[i];
            if (!item.IsSequence() || item.size() != 2) {
                fail(f.ctx(), item, path, "expected [tau_ns, density]");
            }
            pts.push_back({f.as_number(item[0], path), f.as_number(item[1], path)});
        }
        shape = BiphotonShape::tabulated(std::move(pts));
    } else {
        fail(f.ctx(), f.node()["model"], f.child_path("model"), "unknown shape model '" + model + "'");
    }
    f.finish();
    checked(f.ctx(), f.node(), f.child_path("model"), [&] { validate_shape(shape); });
    return shape;
}

void parse_source(Fields f, Scenario &s) {
    auto &p = s.source;
    p.stokes_rate_hz = f.non_negative("stokes_rate", 0.0);
    p.antistokes_singles_rate_hz = f.non_negative("antistokes_singles_rate", 0.0);
    p.intrinsic_retrieval = f.probability("intrinsic_retrieval", 0.0);
    p.duty_cycle = f.number("duty_cycle", 1.0);
    if (!(p.duty_cycle > 0.0 && p.duty_cycle <= 1.0)) {
        fail(f.ctx(), f.node()["duty_cycle"], f.child_path("duty_cycle"), "must lie in (0, 1]");
    }
    const auto mode = f.string("duty_mode", "thinning");
    if (mode == "thinning") {
        p.duty_mode = DutyMode::Thinning;
    } else if (mode == "gated") {
        p.duty_mode = DutyMode::Gated;
    } else {
        fail(f.ctx(), f.node()["duty_mode"], f.child_path("duty_mode"), "expected thinning or gated");
    }
    p.gate_period_ns = f.positive("gate_period", p.gate_period_ns);
    p.run_duration_s = f.non_negative("run_duration", 2000.0);
    const double seed = f.number("seed", 1.0);
    if (!(seed >= 0.0 && seed == std::floor(seed) && seed < 0x1p64)) {
        fail(f.ctx(), f.node()["seed"], f.child_path("seed"), "must be a non-negative integer");
    }
    p.seed = f.node()["seed"] ? f.node()["seed"].as<std::uint64_t>() : 1;
    auto shape = f.section("shape");
    if (!shape) {
        fail(f.ctx(), f.node(), f.child_path("shape"), "required section is missing");
    }
    s.shape = parse_shape(std::move(*shape));
    f.finish();
    checked(f.ctx(), f.node(), "source", [&] { validate_source(p); });
}

ChainElement parse_element(const Context &ctx, const YAML::Node &item, const std::string &path) {
    if (!item.IsMap() || item.size() != 1) {
        fail(ctx, item, path, "each chain element is a single-key mapping such as {loss: {...}}");
    }
    const auto kind = item.begin()->first.Scalar();
    Fields f(ctx, item.begin()->second, path + "." + kind);
    ChainElement out;
    if (kind == "loss") {
        LossElement e;
        e.transmission = f.probability("transmission", 1.0);
        e.label = f.string("label", "loss");
        out = e;
    } else if (kind == "fiber_delay") {
        out = FiberDelay{f.non_negative("delay", 0.0)};
    } else if (kind == "modulator") {
        ModulatorParams m;
        m.v_pi = f.positive("v_pi", m.v_pi);
        m.alpha = f.number("alpha", m.alpha);
        m.insertion_transmission = f.probability("insertion_transmission", m.insertion_transmission);
        m.max_frequency_hz = f.positive("max_frequency", m.max_frequency_hz);
        m.idle_voltage = f.number("idle_voltage", m.idle_voltage);
        m.leakage = f.probability("leakage", m.leakage);
        checked(ctx, f.node(), path + ".modulator", [&] { validate_modulator(m); });
        out = ModulatorElement{m};
    } else if (kind == "beamsplitter") {
        Beamsplitter b;
        b.reflect_probability = f.probability("reflect_probability", b.reflect_probability);
        b.excess_transmission = f.probability("excess_transmission", b.excess_transmission);
        b.measured_port_transmission = f.probability("measured_port_transmission", b.measured_port_transmission);
        out = b;
    } else {
        fail(ctx, item, path, "unknown chain element '" + kind + "'");
    }
    f.finish();
    return out;
}

void parse_chain(const Context &ctx, const YAML::Node &node, Scenario &s) {
    if (!node || !node.IsSequence()) {
        fail(ctx, node ? node : YAML::Node(), "chain", "expected a list of elements");
    }
    for (std::size_t i = 0; i < node.size(); ++i) {
        s.chain.elements.push_back(parse_element(ctx, node[i], "chain[" + std::to_string(i) + "]"));
    }
    checked(ctx, node, "chain", [&] { validate_chain(s.chain); });
}

GeneratorParams parse_generator(Fields f, double &sample_period_ns) {
    GeneratorParams g;
    g.electronic_delay_ns = f.non_negative("electronic_delay", g.electronic_delay_ns);
    g.bandwidth_hz = f.positive("bandwidth", g.bandwidth_hz);
    g.v_max = f.positive("v_max", g.v_max);
    g.retriggerable = f.boolean("retriggerable", g.retriggerable);
    sample_period_ns = f.positive("sample_period", sample_period_ns);
    f.finish();
    checked(f.ctx(), f.node(), "generator", [&] { validate_generator(g); });
    return g;
}

std::vector<double> number_list(Fields &f, const std::string &key) {
    auto n = f.take(key);
    if (!n || !n.IsSequence()) {
        fail(f.ctx(), n ? n : f.node(), f.child_path(key), "expected a list of numbers");
    }
    std::vector<double> out;
    out.reserve(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
        out.push_back(f.as_number(n[i], f.child_path(key) + "[" + std::to_string(i) + "]"));
    }
    return out;
}

std::function<double(double)> parse_target(Fields f) {
    const auto shape = f.required_string("shape");
    std::function<double(double)> target;
    if (shape == "rising_exponential") {
        const double tc = f.positive("time_constant", 1.0);
        const double end = f.required_number("end");
        target = [tc, end](double t) { return std::exp((t - end) / tc); };
    } else if (shape == "gaussian") {
        const double c = f.required_number("center");
        const double sigma = f.positive("sigma", 1.0);
        target = [c, sigma](double t) { return std::exp(-0.5 * (t - c) * (t - c) / (sigma * sigma)); };
    } else if (shape == "constant") {
        const double level = f.required_number("level");
        target = [level](double) { return level; };
    } else {
        fail(f.ctx(), f.node()["shape"], f.child_path("shape"), "unknown target shape '" + shape + "'");
    }
    f.finish();
    return target;
}

void parse_waveform(Fields f, Scenario &s) {
    auto &d = s.drive;
    const auto kind = f.required_string("kind");
    d.kind_name = kind;
    DriveWaveform w;
    w.bias_voltage = f.number("bias", 0.0);
    if (kind == "rect_pulses") {
        auto list = f.take("pulses");
        if (!list || !list.IsSequence()) {
            fail(f.ctx(), f.node(), f.child_path("pulses"), "expected a list of [start_ns, stop_ns, volts]");
        }
        RectPulses pulses;
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto path = f.child_path("pulses") + "[" + std::to_string(i) + "]";
            const auto &item = list[i];
            if (!item.IsSequence() || item.size() != 3) {
                fail(f.ctx(), item, path, "expected [start_ns, stop_ns, volts]");
            }
            pulses.pulses.push_back(
                {f.as_number(item[0], path), f.as_number(item[1], path), f.as_number(item[2], path)});
        }
        w.kind = std::move(pulses);
    } else if (kind == "gaussian") {
        w.kind = GaussianPulse{f.required_number("center"), f.positive("sigma", 1.0), f.required_number("peak")};
    } else if (kind == "rising_exponential") {
        w.kind =
            RisingExponential{f.positive("time_constant", 1.0), f.required_number("end"), f.required_number("peak")};
    } else if (kind == "tabulated") {
        TabulatedWave tab;
        tab.start_ns = f.number("start", 0.0);
        tab.sample_period_ns = f.positive("sample_period", 1.0);
        tab.volts = number_list(f, "volts");
        w.kind = std::move(tab);
    } else if (kind == "csv") {
        const auto rel = f.required_string("path");
        const auto path = f.ctx().base_dir / rel;
        std::ifstream in(path);
        if (!in) {
            fail(f.ctx(), f.node()["path"], f.child_path("path"), "cannot open waveform file " + path.string());
        }
        const double bias = w.bias_voltage;
        checked(f.ctx(), f.node()["path"], f.child_path("path"), [&] { w = read_waveform_csv(in, path.string()); });
        w.bias_voltage = bias;
    } else if (kind == "predistorted") {
        const auto *mod = s.chain.modulator();
        if (!mod) {
            fail(f.ctx(), f.node(), f.child_path("kind"), "predistortion needs a modulator in the chain");
        }
        auto target_fields = f.section("target");
        if (!target_fields) {
            fail(f.ctx(), f.node(), f.child_path("target"), "required section is missing");
        }
        auto target = parse_target(std::move(*target_fields));
        const auto support = number_list(f, "support");
        if (support.size() != 2) {
            fail(f.ctx(), f.node()["support"], f.child_path("support"), "expected [begin_ns, end_ns]");
        }
        const double dt = f.positive("sample_period", s.synthesis_sample_period_ns);
        const double bias = w.bias_voltage;
        checked(f.ctx(), f.node(), f.child_path("target"),
                [&] { w = predistort(target, mod->params.v_pi, dt, {support[0], support[1]}); });
        w.bias_voltage = bias;
        d.predistorted = true;
    } else {
        fail(f.ctx(), f.node()["kind"], f.child_path("kind"), "unknown waveform kind '" + kind + "'");
    }
    f.finish();
    checked(f.ctx(), f.node(), f.child_path("kind"), [&] { validate_waveform(w); });
    d.waveform = std::move(w);
}

void parse_drive(const Context &ctx, const YAML::Node &node, Scenario &s) {
    if (node.IsScalar() && node.Scalar() == "none") {
        return;
    }
    Fields f(ctx, node, "drive");
    auto wf = f.section("waveform");
    if (!wf) {
        fail(ctx, node, "drive.waveform", "required section is missing (or write `drive: none`)");
    }
    parse_waveform(std::move(*wf), s);
    auto trig = f.take("trigger");
    if (!trig || (trig.IsScalar() && trig.Scalar() == "herald")) {
        s.drive.trigger.mode = TriggerMode::Herald;
    } else {
        Fields t(ctx, trig, "drive.trigger");
        auto clock = t.section("external_clock");
        if (!clock) {
            fail(ctx, trig, "drive.trigger", "expected `herald` or {external_clock: {rate: ...}}");
        }
        s.drive.trigger.mode = TriggerMode::ExternalClock;
        s.drive.trigger.rate_hz = clock->positive("rate", 1e7);
        clock->finish();
        t.finish();
    }
    f.finish();
}

DetectorParams parse_detector(Fields f) {
    DetectorParams d;
    d.efficiency = f.probability("efficiency", d.efficiency);
    d.jitter_sigma_ns = f.non_negative("jitter_sigma", d.jitter_sigma_ns);
    d.dead_time_ns = f.non_negative("dead_time", d.dead_time_ns);
    f.finish();
    return d;
}

void parse_detection(Fields f, Scenario &s) {
    if (auto d = f.section("d1")) {
        s.detectors.d1 = parse_detector(std::move(*d));
    }
    if (auto d = f.section("d2")) {
        s.detectors.d2 = parse_detector(std::move(*d));
    }
    if (auto d = f.section("d3")) {
        s.detectors.d3 = parse_detector(std::move(*d));
    }
    if (auto t = f.section("tdc")) {
        auto &tdc = s.tdc;
        tdc.bin_width_ns = t->positive("bin_width", tdc.bin_width_ns);
        tdc.histogram_range_ns = t->positive("histogram_range", tdc.histogram_range_ns);
        tdc.coincidence_window_ns = t->positive("coincidence_window", tdc.coincidence_window_ns);
        t->finish();
        checked(f.ctx(), t->node(), "detection.tdc", [&] { validate_tdc(tdc); });
    }
    f.finish();
}

void parse_analysis(Fields f, Scenario &s) {
    auto &a = s.analysis;
    auto offset = f.take("window_offset");
    if (offset && !(offset.IsScalar() && offset.Scalar() == "auto")) {
        a.window_offset_ns = f.as_number(offset, "analysis.window_offset");
        if (!(*a.window_offset_ns >= 0.0)) {
            fail(f.ctx(), offset, "analysis.window_offset", "must be >= 0 or auto");
        }
    }
    a.tail_window_ns = f.positive("tail_window", a.tail_window_ns);
    if (f.has("signal_window")) {
        a.signal_window_ns = f.positive("signal_window", 1.0);
    }
    f.finish();
}

void parse_outputs(Fields f, Scenario &s) {
    s.outputs.directory = f.string("directory", s.outputs.directory);
    s.outputs.events_csv = f.boolean("events_csv", s.outputs.events_csv);
    s.outputs.gnuplot = f.boolean("gnuplot", s.outputs.gnuplot);
    f.finish();
}

}  // namespace

Scenario parse_scenario_text(std::string_view text, const std::filesystem::path &base_dir, std::string_view source_name) {
    Context ctx{std::string(source_name), base_dir};
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::ParserException &e) {
        std::ostringstream msg;
        msg << ctx.source << ':' << e.mark.line + 1 << ':' << e.mark.column + 1 << ": " << e.msg;
        throw Error(ErrorKind::ParseError, msg.str());
    }
    Fields top(ctx, root, "");
    Scenario s;
    s.name = top.string("name", std::filesystem::path(ctx.source).stem().string());
    if (auto g = top.section("generator")) {
        s.generator = parse_generator(std::move(*g), s.synthesis_sample_period_ns);
    }
    auto src = top.section("source");
    if (!src) {
        fail(ctx, root, "source", "required section is missing");
    }
    parse_source(std::move(*src), s);
    if (auto sp = top.section("stokes_path")) {
        s.stokes_path_transmission = sp->probability("transmission", 1.0);
        sp->finish();
    }
    parse_chain(ctx, top.take("chain"), s);
    if (auto drive = top.take("drive")) {
        parse_drive(ctx, drive, s);
    }
    if (auto det = top.section("detection")) {
        parse_detection(std::move(*det), s);
    }
    if (auto an = top.section("analysis")) {
        parse_analysis(std::move(*an), s);
    }
    if (auto out = top.section("outputs")) {
        parse_outputs(std::move(*out), s);
    }
    if (auto notes = top.take("annotations")) {
        if (!notes.IsMap()) {
            fail(ctx, notes, "annotations", "expected a mapping of strings");
        }
        for (const auto &kv : notes) {
            if (!kv.second.IsScalar()) {
                fail(ctx, kv.second, "annotations." + kv.first.Scalar(), "expected a string");
            }
            s.annotations[kv.first.Scalar()] = kv.second.Scalar();
        }
    }
    top.finish();
    try {
        validate_scenario(s);
    } catch (const Error &e) {
        if (e.kind() == ErrorKind::ValidationError) {
            throw Error(ErrorKind::ValidationError, ctx.source + ": " + e.what());
        }
        throw;
    }
    return s;
}

Scenario parse_scenario(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open scenario " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str(), path.parent_path(), path.string());
}

void validate_scenario(const Scenario &s) {
    auto wrap = [](const char *field, auto &&f) {
        try {
            f();
        } catch (const Error &e) {
            throw Error(ErrorKind::ValidationError, std::string(field) + ": " + e.what());
        }
    };
    wrap("source", [&] { validate_source(s.source); });
    wrap("source.shape", [&] { validate_shape(s.shape); });
    wrap("chain", [&] { validate_chain(s.chain); });
    wrap("generator", [&] { validate_generator(s.generator); });
    wrap("detection.d1", [&] { validate_detector(s.detectors.d1); });
    wrap("detection.d2", [&] { validate_detector(s.detectors.d2); });
    wrap("detection.d3", [&] { validate_detector(s.detectors.d3); });
    wrap("detection.tdc", [&] { validate_tdc(s.tdc); });
    if (!(s.stokes_path_transmission >= 0.0 && s.stokes_path_transmission <= 1.0)) {
        throw Error(ErrorKind::ValidationError, "stokes_path.transmission: must lie in [0, 1]");
    }
    if (s.drive.waveform) {
        wrap("drive.waveform", [&] { validate_waveform(*s.drive.waveform); });
        if (!s.chain.modulator()) {
            throw Error(ErrorKind::ValidationError, "drive: a drive waveform needs a modulator in the chain");
        }
        if (s.drive.predistorted) {
            const auto &tab = std::get<TabulatedWave>(s.drive.waveform->kind);
            for (double v : tab.volts) {
                if (std::abs(v) > s.generator.v_max) {
                    throw Error(ErrorKind::ValidationError,
                                "drive.waveform: predistorted waveform exceeds generator v_max");
                }
            }
        }
        if (s.drive.trigger.mode == TriggerMode::ExternalClock && !(s.drive.trigger.rate_hz > 0.0)) {
            throw Error(ErrorKind::ValidationError, "drive.trigger.external_clock.rate: must be > 0");
        }
    }
    if (!(s.synthesis_sample_period_ns > 0.0)) {
        throw Error(ErrorKind::ValidationError, "generator.sample_period: must be > 0");
    }
    const double range = s.tdc.histogram_range_ns;
    if (s.analysis.tail_window_ns > range) {
        throw Error(ErrorKind::ValidationError, "analysis.tail_window: exceeds detection.tdc.histogram_range");
    }
    if (s.window_offset_ns() + s.signal_window_ns() > range + 1e-9) {
        throw Error(ErrorKind::ValidationError,
                    "analysis.signal_window: window offset plus signal window exceeds the histogram range");
    }
}

namespace {

nlohmann::json waveform_json(const DriveWaveform &w) {
    nlohmann::json j;
    j["bias"] = w.bias_voltage;
    std::visit(
        [&](const auto &k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, RectPulses>) {
                j["kind"] = "rect_pulses";
                auto &list = j["pulses"] = nlohmann::json::array();
                for (const auto &p : k.pulses) {
                    list.push_back({p.start_ns, p.stop_ns, p.volts});
                }
            } else if constexpr (std::is_same_v<T, GaussianPulse>) {
                j["kind"] = "gaussian";
                j["center"] = k.center_ns;
                j["sigma"] = k.sigma_ns;
                j["peak"] = k.peak_volts;
            } else if constexpr (std::is_same_v<T, RisingExponential>) {
                j["kind"] = "rising_exponential";
                j["time_constant"] = k.time_constant_ns;
                j["end"] = k.end_ns;
                j["peak"] = k.peak_volts;
            } else {
                j["kind"] = "tabulated";
                j["start"] = k.start_ns;
                j["sample_period"] = k.sample_period_ns;
                j["volts"] = k.volts;
            }
        },
        w.kind);
    return j;
}

nlohmann::json detector_json(const DetectorParams &d) {
    return {{"efficiency", d.efficiency}, {"jitter_sigma", d.jitter_sigma_ns}, {"dead_time", d.dead_time_ns}};
}

}  // namespace

nlohmann::json canonical_json(const Scenario &s) {
    nlohmann::json j;
    j["name"] = s.name;
    const auto &p = s.source;
    j["source"] = {
        {"stokes_rate", p.stokes_rate_hz},
        {"antistokes_singles_rate", p.antistokes_singles_rate_hz},
        {"intrinsic_retrieval", p.intrinsic_retrieval},
        {"duty_cycle", p.duty_cycle},
        {"duty_mode", p.duty_mode == DutyMode::Gated ? "gated" : "thinning"},
        {"gate_period", p.gate_period_ns},
        {"run_duration", p.run_duration_s},
        {"seed", p.seed},
    };
    auto &shape = j["source"]["shape"];
    if (s.shape.model == ShapeModel::FlatTopPrecursor) {
        shape = {
            {"model", "flat_top_precursor"},
            {"group_delay", s.shape.group_delay_ns},
            {"precursor_width", s.shape.precursor_width_ns},
            {"precursor_height_ratio", s.shape.precursor_height_ratio},
            {"tail_decay", s.shape.tail_decay_ns},
            {"scale", s.shape.scale},
        };
    } else {
        shape = {{"model", "tabulated"}, {"scale", s.shape.scale}};
        auto &samples = shape["samples"] = nlohmann::json::array();
        for (const auto &pt : s.shape.samples) {
            samples.push_back({pt.tau_ns, pt.density});
        }
    }
    j["stokes_path"] = {{"transmission", s.stokes_path_transmission}};
    auto &chain = j["chain"] = nlohmann::json::array();
    for (const auto &e : s.chain.elements) {
        std::visit(
            [&](const auto &el) {
                using T = std::decay_t<decltype(el)>;
                if constexpr (std::is_same_v<T, LossElement>) {
                    chain.push_back({{"loss", {{"transmission", el.transmission}, {"label", el.label}}}});
                } else if constexpr (std::is_same_v<T, FiberDelay>) {
                    chain.push_back({{"fiber_delay", {{"delay", el.delay_ns}}}});
                } else if constexpr (std::is_same_v<T, ModulatorElement>) {
                    const auto &m = el.params;
                    chain.push_back({{"modulator",
                                      {{"v_pi", m.v_pi},
                                       {"alpha", m.alpha},
                                       {"insertion_transmission", m.insertion_transmission},
                                       {"max_frequency", m.max_frequency_hz},
                                       {"idle_voltage", m.idle_voltage},
                                       {"leakage", m.leakage}}}});
                } else {
                    chain.push_back({{"beamsplitter",
                                      {{"reflect_probability", el.reflect_probability},
                                       {"excess_transmission", el.excess_transmission},
                                       {"measured_port_transmission", el.measured_port_transmission}}}});
                }
            },
            e);
    }
    j["generator"] = {
        {"electronic_delay", s.generator.electronic_delay_ns},
        {"bandwidth", s.generator.bandwidth_hz},
        {"v_max", s.generator.v_max},
        {"retriggerable", s.generator.retriggerable},
        {"sample_period", s.synthesis_sample_period_ns},
    };
    if (s.drive.waveform) {
        j["drive"] = {
            {"waveform", waveform_json(*s.drive.waveform)},
            {"predistorted", s.drive.predistorted},
            {"trigger", s.drive.trigger.mode == TriggerMode::Herald
                            ? nlohmann::json("herald")
                            : nlohmann::json{{"external_clock", {{"rate", s.drive.trigger.rate_hz}}}}},
        };
    } else {
        j["drive"] = "none";
    }
    j["detection"] = {
        {"d1", detector_json(s.detectors.d1)},
        {"d2", detector_json(s.detectors.d2)},
        {"d3", detector_json(s.detectors.d3)},
        {"tdc",
         {{"bin_width", s.tdc.bin_width_ns},
          {"histogram_range", s.tdc.histogram_range_ns},
          {"coincidence_window", s.tdc.coincidence_window_ns}}},
    };
    j["analysis"] = {
        {"window_offset", s.window_offset_ns()},
        {"tail_window", s.analysis.tail_window_ns},
        {"signal_window", s.signal_window_ns()},
    };
    return j;
}

std::string config_digest(const Scenario &s) {
    const auto text = canonical_json(s).dump();
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::IoError, "SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

}  // namespace eomsim
