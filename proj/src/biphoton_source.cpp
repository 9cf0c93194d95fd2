#include "eomsim/biphoton_source.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <tuple>
#include <utility>

#include "eomsim/errors.hpp"

namespace eomsim {

namespace {

bool finite_nonneg(double x) {
    return std::isfinite(x) && x >= 0.0;
}

[[noreturn]] void invalid(const std::string &what) {
    throw Error(ErrorKind::InvalidParams, what);
}

}  // namespace

BiphotonShape BiphotonShape::flat_top_precursor(
    double group_delay_ns, double precursor_width_ns, double precursor_height_ratio, double tail_decay_ns) {
    BiphotonShape shape;
    shape.model = ShapeModel::FlatTopPrecursor;
    shape.group_delay_ns = group_delay_ns;
    shape.precursor_width_ns = precursor_width_ns;
    shape.precursor_height_ratio = precursor_height_ratio;
    shape.tail_decay_ns = tail_decay_ns;
    return shape;
}

BiphotonShape BiphotonShape::tabulated(std::vector<ShapeSample> samples) {
    BiphotonShape shape;
    shape.model = ShapeModel::Tabulated;
    shape.samples = std::move(samples);
    return shape;
}

void validate_shape(const BiphotonShape &shape) {
    if (!(std::isfinite(shape.scale) && shape.scale > 0.0)) {
        invalid("shape scale must be positive");
    }
    if (shape.model == ShapeModel::FlatTopPrecursor) {
        if (!(std::isfinite(shape.group_delay_ns) && shape.group_delay_ns > 0.0)) {
            invalid("group_delay must be positive");
        }
        if (!finite_nonneg(shape.precursor_width_ns)) {
            invalid("precursor_width must be >= 0");
        }
        if (!(shape.precursor_width_ns < shape.group_delay_ns)) {
            invalid("precursor_width must be smaller than group_delay");
        }
        if (!finite_nonneg(shape.precursor_height_ratio)) {
            throw Error(ErrorKind::NegativeDensity, "precursor_height_ratio must be >= 0");
        }
        if (shape.precursor_height_ratio > 0.0 && shape.precursor_width_ns == 0.0) {
            invalid("a precursor spike needs a positive precursor_width");
        }
        if (!finite_nonneg(shape.tail_decay_ns)) {
            invalid("tail_decay must be >= 0");
        }
        return;
    }
    if (shape.samples.size() < 2) {
        invalid("tabulated shape needs at least two samples");
    }
    for (std::size_t i = 0; i < shape.samples.size(); ++i) {
        const auto &s = shape.samples[i];
        if (!std::isfinite(s.tau_ns) || s.tau_ns < 0.0) {
            invalid("tabulated shape delays must be finite and >= 0");
        }
        if (!std::isfinite(s.density)) {
            invalid("tabulated shape density must be finite");
        }
        if (s.density < 0.0) {
            std::ostringstream msg;
            msg << "tabulated density " << s.density << " at tau=" << s.tau_ns << " ns is negative";
            throw Error(ErrorKind::NegativeDensity, msg.str());
        }
        if (i > 0 && !(s.tau_ns > shape.samples[i - 1].tau_ns)) {
            invalid("tabulated shape delays must be strictly increasing");
        }
    }
}

double shape_density(const BiphotonShape &shape, double tau_ns) {
    if (tau_ns < 0.0) {
        return 0.0;
    }
    if (shape.model == ShapeModel::FlatTopPrecursor) {
        const double tg = shape.group_delay_ns;
        if (tau_ns <= tg) {
            double spike = 0.0;
            if (shape.precursor_height_ratio > 0.0) {
                spike = shape.precursor_height_ratio * std::exp(-tau_ns / shape.precursor_width_ns);
            }
            return shape.scale * (1.0 + spike);
        }
        if (shape.tail_decay_ns <= 0.0) {
            return 0.0;
        }
        return shape.scale * std::exp(-(tau_ns - tg) / shape.tail_decay_ns);
    }
    const auto &s = shape.samples;
    if (tau_ns < s.front().tau_ns || tau_ns > s.back().tau_ns) {
        return 0.0;
    }
    auto it = std::upper_bound(
        s.begin(), s.end(), tau_ns, [](double t, const ShapeSample &x) { return t < x.tau_ns; });
    if (it == s.end()) {
        return shape.scale * s.back().density;
    }
    const auto &hi = *it;
    const auto &lo = *(it - 1);
    const double frac = (tau_ns - lo.tau_ns) / (hi.tau_ns - lo.tau_ns);
    return shape.scale * (lo.density + frac * (hi.density - lo.density));
}

namespace {

double plateau_mass(const BiphotonShape &shape, double tau) {
    double m = tau;
    if (shape.precursor_height_ratio > 0.0) {
        const double w = shape.precursor_width_ns;
        m += shape.precursor_height_ratio * w * -std::expm1(-tau / w);
    }
    return shape.scale * m;
}

double segment_mass(const ShapeSample &lo, const ShapeSample &hi, double x) {
    const double slope = (hi.density - lo.density) / (hi.tau_ns - lo.tau_ns);
    return lo.density * x + 0.5 * slope * x * x;
}

}  // namespace

double shape_cumulative(const BiphotonShape &shape, double tau_ns) {
    if (tau_ns <= 0.0) {
        return 0.0;
    }
    if (shape.model == ShapeModel::FlatTopPrecursor) {
        const double tg = shape.group_delay_ns;
        if (tau_ns <= tg) {
            return plateau_mass(shape, tau_ns);
        }
        double total = plateau_mass(shape, tg);
        if (shape.tail_decay_ns > 0.0) {
            total += shape.scale * shape.tail_decay_ns * -std::expm1(-(tau_ns - tg) / shape.tail_decay_ns);
        }
        return total;
    }
    double total = 0.0;
    const auto &s = shape.samples;
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (tau_ns <= s[i - 1].tau_ns) {
            break;
        }
        const double x = std::min(tau_ns, s[i].tau_ns) - s[i - 1].tau_ns;
        total += segment_mass(s[i - 1], s[i], x);
    }
    return shape.scale * total;
}

double shape_integral(const BiphotonShape &shape) {
    if (shape.model == ShapeModel::FlatTopPrecursor) {
        return plateau_mass(shape, shape.group_delay_ns) + shape.scale * shape.tail_decay_ns;
    }
    return shape_cumulative(shape, shape.samples.back().tau_ns);
}

BiphotonShape normalize_shape(BiphotonShape shape) {
    validate_shape(shape);
    const double integral = shape_integral(shape);
    if (!(integral > 0.0) || !std::isfinite(integral)) {
        throw Error(ErrorKind::ZeroDensity, "shape density integrates to zero");
    }
    shape.scale /= integral;
    return shape;
}

double shape_support_end(const BiphotonShape &shape, double tail_mass) {
    DelaySampler sampler(normalize_shape(shape));
    return sampler.quantile(1.0 - tail_mass);
}

DelaySampler::DelaySampler(BiphotonShape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    const double integral = shape_integral(shape_);
    if (!(std::abs(integral - 1.0) <= 1e-9)) {
        std::ostringstream msg;
        msg << "sampler requires a normalized shape, integral is " << integral;
        throw Error(ErrorKind::InvalidParams, msg.str());
    }
    if (shape_.model == ShapeModel::Tabulated) {
        const auto &s = shape_.samples;
        knot_cdf_.resize(s.size());
        knot_cdf_[0] = 0.0;
        for (std::size_t i = 1; i < s.size(); ++i) {
            knot_cdf_[i] = knot_cdf_[i - 1] + shape_.scale * segment_mass(s[i - 1], s[i], s[i].tau_ns - s[i - 1].tau_ns);
        }
    }
}

double DelaySampler::plateau_quantile(double mass) const {
    const double h = shape_.precursor_height_ratio;
    const double tg = shape_.group_delay_ns;
    const double target = mass / shape_.scale;
    if (h == 0.0) {
        return std::min(target, tg);
    }
    const double w = shape_.precursor_width_ns;
    auto f = [&](double tau) {
        const double e = std::exp(-tau / w);
        return std::make_pair(tau + h * w * (1.0 - e) - target, 1.0 + h * e);
    };
    // The residual is concave and increasing, so Newton from the left edge
    // converges monotonically.
    std::uintmax_t iterations = 64;
    return boost::math::tools::newton_raphson_iterate(f, 0.0, 0.0, tg, 50, iterations);
}

double DelaySampler::quantile(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    if (shape_.model == ShapeModel::FlatTopPrecursor) {
        const double plateau = plateau_mass(shape_, shape_.group_delay_ns);
        if (u <= plateau || shape_.tail_decay_ns <= 0.0) {
            return plateau_quantile(std::min(u, plateau));
        }
        const double tail_total = shape_.scale * shape_.tail_decay_ns;
        const double frac = std::min((u - plateau) / tail_total, 1.0);
        if (frac >= 1.0) {
            return std::numeric_limits<double>::max();
        }
        return shape_.group_delay_ns - shape_.tail_decay_ns * std::log1p(-frac);
    }
    const auto &s = shape_.samples;
    auto it = std::upper_bound(knot_cdf_.begin(), knot_cdf_.end(), u);
    if (it == knot_cdf_.end()) {
        return s.back().tau_ns;
    }
    const std::size_t i = static_cast<std::size_t>(it - knot_cdf_.begin());
    if (i == 0) {
        return s.front().tau_ns;
    }
    const auto &lo = s[i - 1];
    const auto &hi = s[i];
    const double r = (u - knot_cdf_[i - 1]) / shape_.scale;
    const double slope = (hi.density - lo.density) / (hi.tau_ns - lo.tau_ns);
    const double disc = std::max(0.0, lo.density * lo.density + 2.0 * slope * r);
    const double denom = lo.density + std::sqrt(disc);
    double x = denom > 0.0 ? 2.0 * r / denom : 0.0;
    x = std::clamp(x, 0.0, hi.tau_ns - lo.tau_ns);
    return lo.tau_ns + x;
}

double sample_delay(const DelaySampler &sampler, rng::Engine &engine) {
    return sampler(engine);
}

void validate_source(const SourceParams &p) {
    if (!finite_nonneg(p.stokes_rate_hz) || !finite_nonneg(p.antistokes_singles_rate_hz)) {
        invalid("source rates must be finite and >= 0");
    }
    if (!finite_nonneg(p.run_duration_s)) {
        invalid("run_duration must be finite and >= 0");
    }
    if (!(p.intrinsic_retrieval >= 0.0 && p.intrinsic_retrieval <= 1.0)) {
        invalid("intrinsic_retrieval must lie in [0, 1]");
    }
    if (!(p.duty_cycle > 0.0 && p.duty_cycle <= 1.0)) {
        invalid("duty_cycle must lie in (0, 1]");
    }
    if (p.duty_mode == DutyMode::Gated && !(std::isfinite(p.gate_period_ns) && p.gate_period_ns > 0.0)) {
        invalid("gate_period must be positive in gated mode");
    }
}

bool event_before(const PhotonEvent &a, const PhotonEvent &b) noexcept {
    return std::tie(a.emit_time_ns, a.channel, a.id) < std::tie(b.emit_time_ns, b.channel, b.id);
}

double ShardPlan::end(std::uint64_t shard) const noexcept {
    return shard + 1 >= count ? total_ns : static_cast<double>(shard + 1) * shard_ns;
}

ShardPlan make_shard_plan(const SourceParams &params, double target_events_per_shard) {
    ShardPlan plan;
    plan.total_ns = params.run_duration_s * 1e9;
    if (plan.total_ns <= 0.0) {
        return plan;
    }
    const double on = params.duty_mode == DutyMode::Thinning ? params.duty_cycle : 1.0;
    const double rate_per_ns =
        (params.stokes_rate_hz * (1.0 + params.intrinsic_retrieval) + params.antistokes_singles_rate_hz) * on * 1e-9;
    constexpr double min_shard_ns = 1e6;
    double shard = rate_per_ns > 0.0 ? target_events_per_shard / rate_per_ns : plan.total_ns;
    shard = std::max(shard, min_shard_ns);
    shard = std::min(shard, plan.total_ns);
    // Round to a whole number of microseconds so shard edges are exact in
    // decimal and reproducible on every platform.
    shard = std::max(1e3, std::floor(shard / 1e3) * 1e3);
    plan.shard_ns = shard;
    plan.count = static_cast<std::uint64_t>(std::ceil(plan.total_ns / shard));
    return plan;
}

namespace {

bool in_gate(const SourceParams &p, double t_ns) {
    if (p.duty_mode == DutyMode::Thinning) {
        return true;
    }
    return std::fmod(t_ns, p.gate_period_ns) < p.duty_cycle * p.gate_period_ns;
}

double next_arrival(rng::Engine &engine, double t, double rate_per_ns) {
    return t - std::log1p(-engine.uniform()) / rate_per_ns;
}

}  // namespace

std::vector<PhotonEvent> generate_shard(
    const SourceParams &params, const DelaySampler &sampler, const ShardPlan &plan, std::uint64_t shard) {
    std::vector<PhotonEvent> events;
    if (shard >= plan.count) {
        return events;
    }
    rng::Engine engine(params.seed, rng::Stream::Generation, shard);
    const double begin = plan.begin(shard);
    const double end = plan.end(shard);
    const double on = params.duty_mode == DutyMode::Thinning ? params.duty_cycle : 1.0;
    const double stokes_rate = params.stokes_rate_hz * on * 1e-9;
    const double singles_rate = params.antistokes_singles_rate_hz * on * 1e-9;
    const std::uint64_t id_base = shard << 32;
    std::uint64_t next_id = 0;
    events.reserve(static_cast<std::size_t>(
        (stokes_rate * (1.0 + params.intrinsic_retrieval) + singles_rate) * (end - begin) * 1.1 + 16));

    if (stokes_rate > 0.0) {
        for (double t = next_arrival(engine, begin, stokes_rate); t < end; t = next_arrival(engine, t, stokes_rate)) {
            if (!in_gate(params, t)) {
                continue;
            }
            const std::uint64_t stokes_id = id_base | next_id++;
            events.push_back(PhotonEvent{PhotonChannel::Stokes, t, std::nullopt, stokes_id});
            if (engine.bernoulli(params.intrinsic_retrieval)) {
                const double tau = sampler(engine);
                events.back().pair_id = stokes_id;
                events.push_back(PhotonEvent{PhotonChannel::AntiStokes, t + tau, stokes_id, id_base | next_id++});
            }
        }
    }
    if (singles_rate > 0.0) {
        for (double t = next_arrival(engine, begin, singles_rate); t < end; t = next_arrival(engine, t, singles_rate)) {
            if (!in_gate(params, t)) {
                continue;
            }
            events.push_back(PhotonEvent{PhotonChannel::AntiStokes, t, std::nullopt, id_base | next_id++});
        }
    }
    std::sort(events.begin(), events.end(), event_before);
    return events;
}

std::vector<PhotonEvent> generate_stream(const SourceParams &params, const BiphotonShape &shape) {
    validate_source(params);
    const DelaySampler sampler(normalize_shape(shape));
    const ShardPlan plan = make_shard_plan(params);
    std::vector<PhotonEvent> events;
    for (std::uint64_t s = 0; s < plan.count; ++s) {
        auto part = generate_shard(params, sampler, plan, s);
        const auto mid = static_cast<std::ptrdiff_t>(events.size());
        events.insert(events.end(), part.begin(), part.end());
        std::inplace_merge(events.begin(), events.begin() + mid, events.end(), event_before);
    }
    return events;
}

double group_delay_from_velocity(double length_m, double group_velocity_m_per_s) {
    if (!(length_m > 0.0) || !(group_velocity_m_per_s > 0.0) || !std::isfinite(length_m) ||
        !std::isfinite(group_velocity_m_per_s)) {
        invalid("length and group velocity must be positive");
    }
    return length_m / group_velocity_m_per_s * 1e9;
}

void write_event_csv(std::ostream &out, const std::vector<PhotonEvent> &events) {
    out << "channel,emit_time_ns,pair_id\n";
    char buf[64];
    for (const auto &e : events) {
        out << (e.channel == PhotonChannel::Stokes ? "stokes" : "antistokes") << ',';
        std::snprintf(buf, sizeof(buf), "%.3f", e.emit_time_ns);
        out << buf << ',';
        if (e.pair_id) {
            out << *e.pair_id;
        }
        out << '\n';
    }
}

}  // namespace eomsim
