#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "eomsim/rng.hpp"

namespace eomsim {

enum class ShapeModel { FlatTopPrecursor, Tabulated };

struct ShapeSample {
    double tau_ns;
    double density;
};

/// Parametric |Psi(tau)|^2 of the biphoton as a function of the anti-Stokes
/// delay relative to its Stokes partner.
///
/// FlatTopPrecursor:
///   density(tau) = A * (1 + h * exp(-tau / w_p))    for 0 <= tau <= T_g
///   density(tau) = A * exp(-(tau - T_g) / w_t)      for tau > T_g
/// with h = precursor_height_ratio (spike excess over the plateau, in units of
/// the plateau level), w_p = precursor_width, T_g = group_delay and
/// w_t = tail_decay (0 disables the tail). A is `scale`.
///
/// Tabulated: linear interpolation between (tau, density) samples, zero
/// outside the sampled range; densities are multiplied by `scale`.
struct BiphotonShape {
    ShapeModel model = ShapeModel::FlatTopPrecursor;
    double group_delay_ns = 0.0;
    double precursor_width_ns = 0.0;
    double precursor_height_ratio = 0.0;
    double tail_decay_ns = 0.0;
    std::vector<ShapeSample> samples;
    double scale = 1.0;

    static BiphotonShape flat_top_precursor(
        double group_delay_ns, double precursor_width_ns, double precursor_height_ratio, double tail_decay_ns);
    static BiphotonShape tabulated(std::vector<ShapeSample> samples);
};

/// Throws InvalidParams / NegativeDensity when the shape breaks its invariants.
void validate_shape(const BiphotonShape &shape);

double shape_density(const BiphotonShape &shape, double tau_ns);
/// Closed-form integral of the density over [0, tau].
double shape_cumulative(const BiphotonShape &shape, double tau_ns);
double shape_integral(const BiphotonShape &shape);
/// Smallest delay beyond which at most `tail_mass` of the normalized density remains.
double shape_support_end(const BiphotonShape &shape, double tail_mass = 1e-4);

BiphotonShape normalize_shape(BiphotonShape shape);

/// Inverse-CDF sampler over a normalized shape. Construction rejects shapes
/// whose integral differs from 1 by more than 1e-9.
class DelaySampler {
   public:
    explicit DelaySampler(BiphotonShape shape);

    double quantile(double u) const;

    double operator()(rng::Engine &engine) const {
        return quantile(engine.uniform());
    }

    const BiphotonShape &shape() const noexcept {
        return shape_;
    }

   private:
    double plateau_quantile(double mass) const;

    BiphotonShape shape_;
    std::vector<double> knot_cdf_;
};

double sample_delay(const DelaySampler &sampler, rng::Engine &engine);

enum class DutyMode { Thinning, Gated };

struct SourceParams {
    double stokes_rate_hz = 0.0;
    double antistokes_singles_rate_hz = 0.0;
    double intrinsic_retrieval = 0.0;
    double duty_cycle = 1.0;
    DutyMode duty_mode = DutyMode::Thinning;
    /// Gated mode only: the source emits during the first duty_cycle fraction of each period.
    double gate_period_ns = 1e6;
    double run_duration_s = 0.0;
    std::uint64_t seed = 0;
};

void validate_source(const SourceParams &params);

enum class PhotonChannel : std::uint8_t { Stokes = 0, AntiStokes = 1 };

struct PhotonEvent {
    PhotonChannel channel;
    double emit_time_ns;
    /// Shared by the two partners of a pair; empty for uncorrelated singles.
    std::optional<std::uint64_t> pair_id;
    /// Unique per event: (shard << 32) | index within shard.
    std::uint64_t id;
};

/// Total order used everywhere events are sorted: time, then channel, then id.
bool event_before(const PhotonEvent &a, const PhotonEvent &b) noexcept;

/// Fixed partition of simulated time into shards. Depends only on the source
/// parameters so results do not depend on the number of workers.
struct ShardPlan {
    double shard_ns = 0.0;
    double total_ns = 0.0;
    std::uint64_t count = 0;

    double begin(std::uint64_t shard) const noexcept {
        return static_cast<double>(shard) * shard_ns;
    }
    double end(std::uint64_t shard) const noexcept;
};

ShardPlan make_shard_plan(const SourceParams &params, double target_events_per_shard = 65536.0);

/// Generates every event whose Stokes (or single) emission falls in the
/// shard, sorted with `event_before`. Randomness comes from the shard's own
/// generation stream, so the result is a pure function of (params, shape, shard).
std::vector<PhotonEvent> generate_shard(
    const SourceParams &params, const DelaySampler &sampler, const ShardPlan &plan, std::uint64_t shard);

/// Whole-run stream: all shards concatenated and globally sorted. The shape
/// is normalized first.
std::vector<PhotonEvent> generate_stream(const SourceParams &params, const BiphotonShape &shape);

/// length / v_g in nanoseconds.
double group_delay_from_velocity(double length_m, double group_velocity_m_per_s);

/// CSV with header `channel,emit_time_ns,pair_id`, three decimals on times.
void write_event_csv(std::ostream &out, const std::vector<PhotonEvent> &events);

}  // namespace eomsim
