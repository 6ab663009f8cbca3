#ifndef V2G_DATAGEN_HPP
#define V2G_DATAGEN_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "v2g/engine.hpp"
#include "v2g/io.hpp"
#include "v2g/physical.hpp"
#include "v2g/types.hpp"
#include "v2g/validators.hpp"

namespace v2g {

// One charge/discharge subscription window, closed at both ends and aligned
// to the load sampling grid. The physical profile ramps up just before
// window_start and decays just after window_end, so every in-window power
// status update reports the steady magnitude.
struct ChargingEvent {
    Timestamp window_start = 0;
    Timestamp window_end = 0;
    Direction direction = Direction::Charge;
    bool operator==(const ChargingEvent&) const = default;
};

struct EvSpec {
    EvId id;
    HouseholdId household;
    PowerKw rated_kw = 3.0;
    std::vector<ChargingEvent> events;
    // cyber-side timing
    Timestamp reservation_lead_ms = 600'000;  // request this long before window_start
    Timestamp response_delay_ms = 2'000;
    Timestamp cancel_delay_ms = 45'000;  // cancel at last update + period + this
    Timestamp pricing_phase_ms = 60'000;
    Timestamp load_control_phase_ms = 480'000;
    Timestamp list_fetch_offset_ms = 15'000;
    bool cancel_and_rebook = false;  // exercise cancellation + re-reservation

    bool operator==(const EvSpec&) const = default;
};

// Base (non-EV) household load: a constant baseline plus a periodic
// rectangular air-conditioning load. Only the AC has power comparable to an
// EV, and it stays under half of the smallest rated EV.
struct HouseholdSpec {
    HouseholdId id;
    PowerKw baseline_kw = 0.4;
    PowerKw ac_rated_kw = 0.0;  // 0 disables the AC load
    Timestamp ac_period_ms = 3'600'000;
    double ac_duty = 0.5;
    Timestamp ac_phase_ms = 0;

    bool operator==(const HouseholdSpec&) const = default;
};

struct Scenario {
    std::uint64_t seed = 0;
    Timestamp dt_ms = 60'000;
    Timestamp horizon_ms = 86'400'000;
    PeriodicSchedule schedule;
    EfficiencyParams efficiency;
    int ramp_samples = 2;        // EV reaches rated power within this many samples
    int high_decay_samples = 2;  // high-rated: rated to zero within this many samples
    int low_decay_samples = 30;  // low-rated: slow tail length
    PowerKw high_rated_threshold_kw = 6.0;
    std::string base_load_csv;   // optional: real base profiles instead of synthetic
    std::vector<HouseholdSpec> households;
    std::vector<EvSpec> evs;

    EvRegistry registry() const;
    const EvSpec* find_ev(const EvId& id) const;
    // Structural consistency: unique ids, household references, grid
    // alignment, per-EV event spacing wide enough for the protocol exchange.
    void validate() const;

    bool operator==(const Scenario&) const = default;
};

Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& s);
Scenario load_scenario_file(const std::string& path);
void save_scenario_file(const std::string& path, const Scenario& s);

struct SynthParams {
    int n_evs = 50;
    int n_households = 10;
    double hours = 24.0;
    std::uint64_t seed = 1;
    int min_events_per_ev = 2;
    int max_events_per_ev = 3;
    double discharge_fraction = 0.25;
    double cancel_rebook_fraction = 0.15;
    int min_window_min = 40;
    int max_window_min = 160;
    // Low-rated stops are undetectable: the detector holds the state for a
    // constant charging period instead. Windows must fit inside it, and
    // consecutive events of one low-rated EV must sit further apart than it,
    // or the phantom tail of one event swallows the next start.
    int max_low_rated_window_min = 100;
    int constant_charging_min = 120;  // keep aligned with the engine config
};

// Randomized but reproducible scenario. Event edges keep a quiet zone: no AC
// toggle or other same-household event edge lands within a few samples, so
// every start/stop spike is attributable.
Scenario synth_scenario(const SynthParams& params);

// One EV event's contribution on the horizon sampling grid.
struct EvEventProfile {
    long first_idx = 0;
    std::vector<PowerKw> values;

    long end_idx() const { return first_idx + static_cast<long>(values.size()); }
    bool operator==(const EvEventProfile&) const = default;
};

// Ramp to the steady magnitude ending at window_start, plateau across the
// window, then decay: high-rated drop to zero within high_decay_samples,
// low-rated a slow tail of low_decay_samples. Discharge events contribute
// the negated rated*eta1*eta2 magnitude.
EvEventProfile generate_ev_profile(PowerKw rated_kw, const ChargingEvent& event, Timestamp dt_ms,
                                   int ramp_samples, int high_decay_samples,
                                   int low_decay_samples, PowerKw high_rated_threshold_kw,
                                   EfficiencyParams eff);

struct HouseholdLoad {
    std::vector<LoadSample> aggregated;
    std::vector<EvEventProfile> shifted;
};

// Slide each EV profile to its new start sample (duration preserved) and add
// everything onto the base profile. A slid window that leaves the horizon is
// a bounds error.
HouseholdLoad generate_household_load(std::span<const LoadSample> base,
                                      std::span<const EvEventProfile> ev_profiles,
                                      std::span<const long> new_start_indices);

struct LabeledTrace {
    std::vector<Packet> packets;
    std::vector<Label> labels;  // aligned index-for-index with packets
    std::vector<LoadSample> load;
};

// The benign cyber trace plus the matching physical load. Every packet obeys
// the protocol, the schedule, and the power band, so the engine must pass it
// without a single anomaly.
LabeledTrace generate_packet_trace(const Scenario& scenario);

struct AttackSpec {
    AttackKind kind = AttackKind::OverReport;
    int count = 1;            // wrong_periodicity: a minimum, whole runs are retimed
    double magnitude_kw = 1.0;  // over/under-report: shift beyond the band by this much
    double delta = 0.5;         // wrong_periodicity: fractional period offset
    std::uint64_t seed = 1;
};

// Inject one attack class into a labeled trace. Modified or inserted packets
// are labeled with the attack kind; the physical load is never touched (the
// cyber side is the compromised one).
LabeledTrace inject_attack(const LabeledTrace& trace, const AttackSpec& spec);

// Real load profiles keyed by household, all on one uniform grid.
struct RealProfiles {
    std::map<HouseholdId, std::vector<LoadSample>> households;
    Timestamp dt_ms = 0;
};

// Parse per-household profiles from the load CSV schema; rejects non-uniform
// sampling with the offending context.
RealProfiles ingest_real_profiles(std::istream& csv);
RealProfiles ingest_real_profiles_file(const std::string& path);

// Replicate every household `factor` times under distinct ids, the way the
// evaluation scales one measured household to many.
RealProfiles replicate(const RealProfiles& profiles, int factor);

}  // namespace v2g

#endif  // V2G_DATAGEN_HPP
