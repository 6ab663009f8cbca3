#ifndef V2G_PHYSICAL_HPP
#define V2G_PHYSICAL_HPP

#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <vector>

#include "v2g/types.hpp"

namespace v2g {

// First-difference output: dp(i) = p(i) - p(i-1), dp(0) = 0. Exposes the
// load-change spikes that mark EV start/stop events.
struct FilteredSample {
    HouseholdId household;
    Timestamp t = 0;
    PowerKw dp = 0.0;
    bool operator==(const FilteredSample&) const = default;
};

// Requires >= 1 sample with uniform spacing; non-uniform input needs
// resampling and is rejected.
std::vector<FilteredSample> high_pass_filter(std::span<const LoadSample> samples);

struct EfficiencyParams {
    double eta1 = 0.92;  // charging efficiency
    double eta2 = 0.92;  // discharging efficiency
    bool operator==(const EfficiencyParams&) const = default;
};

// |P_d| = |P_c| * eta1 * eta2, element-wise. Charge values must be >= 0;
// efficiencies outside (0, 1] are parameter errors.
std::vector<PowerKw> derive_discharge_profile(std::span<const PowerKw> charge_profile,
                                              EfficiencyParams params);

struct DetectionParams {
    PowerKw band_halfwidth_kw = 0.5;       // steady-state reporting band, +/- around rated
    double event_range_fraction = 0.25;    // start/stop spike acceptance, fraction of magnitude
    PowerKw high_rated_threshold_kw = 6.0; // at/above: stop events are detectable
    Timestamp constant_charging_ms = 7'200'000;  // low-rated stop fallback duration
    PowerKw initial_level_kw = 0.0;        // raw load level at the start of the series
    // Smallest |dp| that can open an event window. Keeps slow-decay drift
    // from splitting a neighbouring ramp across two trigger indices; any
    // real ramp half is at least half the smallest derated magnitude.
    PowerKw trigger_floor_kw = 0.3;

    bool operator==(const DetectionParams&) const = default;
};

struct ChargeStatePoint {
    Timestamp t = 0;
    int state = 0;  // 1 while charging/discharging
    bool operator==(const ChargeStatePoint&) const = default;
};
using ChargeStateSeries = std::vector<ChargeStatePoint>;

// State at time t: the value at the last point with point.t <= t, 0 before
// the series begins.
int state_at(const ChargeStateSeries& series, Timestamp t);

// EV charge state identification over a filtered single-EV-attributable
// series (charging semantics).
//
// High-rated branch (rated >= high_rated_threshold_kw): a positive spike --
// the current plus next filtered point -- within the acceptance range of the
// rated power flips 0 -> 1; a negative spike -- current plus previous point
// -- within the negative acceptance range flips 1 -> 0.
//
// Low-rated branch: starts are detected the same way; the end of charging
// only decays slowly, so the state is held for constant_charging_samples and
// then released.
//
// Initial state is 1 when initial_level_kw already sits inside the
// steady-state band of the rated power.
ChargeStateSeries identify_charge_states(std::span<const FilteredSample> filtered,
                                         PowerKw ev_rated, const DetectionParams& params);

struct SteadyStateBand {
    PowerKw min_kw = 0.0;
    PowerKw max_kw = 0.0;
    static SteadyStateBand around(PowerKw center, PowerKw halfwidth) {
        return {center - halfwidth, center + halfwidth};
    }
    bool contains(PowerKw v) const { return v >= min_kw && v <= max_kw; }
    bool operator==(const SteadyStateBand&) const = default;
};

// Power consistency of one reported measurement against the identified
// charge state: no charging at t means any report is inconsistent; while
// charging, a report under the band is accepted only for the first update of
// the run (the EV may still be reaching rated power); above the band is
// always inconsistent.
bool validate_power(PowerKw reported, Timestamp t, const ChargeStateSeries& series,
                    const SteadyStateBand& band, bool first_packet);

// One EV as the physical side sees it.
struct EvPhysical {
    EvId ev;
    HouseholdId household;
    PowerKw rated_kw = 0.0;
};

// Online per-household charge-state identification with attribution of
// events to resident EVs. Households expose only the aggregated load, so a
// spike is matched against subsets of resident EVs by comparing it with the
// sum of their expected event magnitudes (charge: rated; discharge:
// rated*eta1*eta2, mirrored sign). A start needs the next sample for its
// two-point sum, so the state at the newest sample is provisional until the
// following sample arrives; queries see exactly what is derivable from the
// samples ingested so far.
class HouseholdTracker {
  public:
    HouseholdTracker(HouseholdId household, std::vector<EvPhysical> residents,
                     DetectionParams params, EfficiencyParams eff, Timestamp dt_ms);

    void ingest(const LoadSample& sample);  // strictly increasing t, uniform spacing

    // Latest subscription the cyber side granted this EV. The direction
    // picks the expected spike sign and magnitude; the window breaks
    // attribution ties between same-rated residents (a start spike belongs
    // first to an EV whose window covers it, a stop spike to one whose
    // window has ended).
    void note_reservation(const EvId& ev, Direction dir, Timestamp window_start,
                          Timestamp window_end);

    int state_at(const EvId& ev, Timestamp t) const;
    // Start of the EV's current active run, if it is active at the newest
    // knowledge point.
    std::optional<Timestamp> active_since(const EvId& ev) const;
    // Expected steady magnitude of the EV's current/next event.
    PowerKw expected_magnitude(const EvId& ev) const;
    // Finalized states (everything except the provisional frontier sample).
    ChargeStateSeries finalized_series(const EvId& ev) const;
    // Resident EVs active at t, with their expected magnitudes.
    std::vector<std::pair<EvId, PowerKw>> active_set(Timestamp t) const;

    std::size_t samples_seen() const { return dp_.size(); }
    bool knows(const EvId& ev) const { return index_of(ev) >= 0; }

  private:
    struct Resident {
        EvId ev;
        PowerKw rated = 0.0;
        bool high = false;
        Direction dir = Direction::Charge;  // from the latest reservation
        std::optional<Timestamp> res_start, res_end;
        // current event
        int state = 0;
        bool event_driven = false;  // stop detectable by negative/positive spike
        PowerKw magnitude = 0.0;    // captured at start
        Direction event_dir = Direction::Charge;
        long start_idx = -1;
        long expiry_idx = -1;  // low-rated fallback
        std::vector<std::int8_t> history;  // finalized per-sample states
    };

    struct Trigger {  // outcome of evaluating one sample index
        std::vector<int> started;
        std::vector<int> stopped;
        std::vector<int> expired;
    };

    int index_of(const EvId& ev) const;
    PowerKw event_magnitude(const Resident& r) const;
    PowerKw start_delta(const Resident& r) const;
    // Evaluate triggers at index j against residents in `view`; next_dp is
    // clamped to 0 at the knowledge frontier.
    Trigger evaluate(long j, double next_dp, bool next_known,
                     const std::vector<Resident>& view) const;
    void apply(Trigger& trig, long j, std::vector<Resident>& view) const;
    void finalize(long j);
    std::vector<Resident> frontier_view() const;  // residents advanced through the frontier
    long index_for(Timestamp t) const;

    HouseholdId household_;
    DetectionParams params_;
    EfficiencyParams eff_;
    long constant_samples_ = 1;
    Timestamp dt_ = 0;
    Timestamp t0_ = 0;
    bool any_ = false;
    PowerKw prev_p_ = 0.0;
    std::vector<double> dp_;
    long finalized_ = -1;  // highest finalized sample index
    // Indices whose spike mass a matched event already claimed; the trailing
    // half of a two-sample ramp must not trigger a second event.
    std::set<long> consumed_;
    std::vector<Resident> residents_;
};

// Registry of household trackers plus the cyber-side hints they need
// (reservation directions, last reported powers). One writer -- the
// physical ingestion path -- and many readers; a shared mutex keeps reads on
// a consistent prefix.
class PhysicalStateStore {
  public:
    PhysicalStateStore() = default;
    PhysicalStateStore(std::span<const EvPhysical> evs, DetectionParams params,
                       EfficiencyParams eff, Timestamp dt_ms);

    void ingest(const LoadSample& sample);
    void note_reservation(const EvId& ev, Direction dir, Timestamp window_start,
                          Timestamp window_end);
    void note_reported(const EvId& ev, Timestamp t, PowerKw kw);

    int state_at(const EvId& ev, Timestamp t) const;

    // Power validation with the multi-EV extension: when several co-resident
    // EVs are active, the sum of their latest reported powers is validated
    // against the band around the sum of their expected magnitudes.
    bool validate(const EvId& ev, Timestamp t, PowerKw reported, bool first_packet) const;

    SteadyStateBand band_for(const EvId& ev) const;
    ChargeStateSeries finalized_series(const EvId& ev) const;
    bool knows(const EvId& ev) const;

  private:
    struct Report {
        Timestamp t = 0;
        PowerKw kw = 0.0;
    };
    const HouseholdTracker& tracker_for(const EvId& ev) const;

    DetectionParams params_;
    EfficiencyParams eff_;
    std::map<HouseholdId, HouseholdTracker> trackers_;
    std::map<EvId, HouseholdId> home_;
    std::map<EvId, Report> reported_;
    mutable std::shared_mutex mu_;
};

}  // namespace v2g

#endif  // V2G_PHYSICAL_HPP
