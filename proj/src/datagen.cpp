#include "v2g/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace v2g {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kAggregator = "aggregator";
constexpr Timestamp kEventGapMs = 60'000;  // slack between cancel and the next request
constexpr Timestamp kMaxLeadMs = 1'500'000;  // keep the reserved wait under the idle timeout

Timestamp last_update_time(const ChargingEvent& e, Timestamp psu_period) {
    Timestamp span = e.window_end - e.window_start;
    return e.window_start + (span / psu_period) * psu_period;
}

Timestamp cancel_time(const EvSpec& ev, const ChargingEvent& e, Timestamp psu_period) {
    return last_update_time(e, psu_period) + psu_period + ev.cancel_delay_ms;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

EvRegistry Scenario::registry() const {
    EvRegistry out;
    for (const EvSpec& ev : evs) out[ev.id] = EvInfo{ev.household, ev.rated_kw};
    return out;
}

const EvSpec* Scenario::find_ev(const EvId& id) const {
    for (const EvSpec& ev : evs)
        if (ev.id == id) return &ev;
    return nullptr;
}

void Scenario::validate() const {
    if (dt_ms <= 0) throw ValidationError("scenario: dt_ms must be positive");
    if (horizon_ms <= 0 || horizon_ms % dt_ms != 0)
        throw ValidationError("scenario: horizon_ms must be a positive multiple of dt_ms");
    if (schedule.power_status_ms <= 0 || schedule.reservation_list_ms <= 0 ||
        schedule.pricing_ms <= 0 || schedule.load_control_ms <= 0)
        throw ValidationError("scenario: periods must be positive");
    if (schedule.tolerance_fraction < 0.0 || schedule.tolerance_fraction >= 1.0)
        throw ValidationError("scenario: tolerance_fraction must be in [0, 1)");
    if (ramp_samples < 1 || ramp_samples > 2)
        throw ValidationError("scenario: ramp_samples must be 1 or 2 for detectable starts");
    if (high_decay_samples < 1 || high_decay_samples > 2)
        throw ValidationError("scenario: high_decay_samples must be 1 or 2");
    // A tail shorter than ~30 samples leaves per-sample drift above the
    // detector's trigger floor next to other events' edges.
    if (low_decay_samples < 30)
        throw ValidationError("scenario: low_decay_samples too short to stay undetectable");

    std::set<HouseholdId> hh;
    for (const HouseholdSpec& h : households) {
        if (h.id.empty()) throw ValidationError("scenario: empty household id");
        if (!hh.insert(h.id).second)
            throw ValidationError("scenario: duplicate household id " + h.id);
        if (h.baseline_kw < 0.0) throw ValidationError("scenario: negative baseline");
        if (h.ac_rated_kw < 0.0 || h.ac_rated_kw > 1.6)
            throw ValidationError("scenario: ac_rated_kw must be in [0, 1.6]");
        if (h.ac_rated_kw > 0.0 && (h.ac_period_ms < 2 * dt_ms || h.ac_duty <= 0.0 ||
                                    h.ac_duty >= 1.0 || h.ac_phase_ms < 0))
            throw ValidationError("scenario: bad AC cycle for household " + h.id);
    }

    const long n_samples = horizon_ms / dt_ms;
    std::set<EvId> ids;
    for (const EvSpec& ev : evs) {
        if (ev.id.empty()) throw ValidationError("scenario: empty EV id");
        if (!ids.insert(ev.id).second)
            throw ValidationError("scenario: duplicate EV id " + ev.id);
        if (!hh.count(ev.household))
            throw ValidationError("scenario: EV " + ev.id + " references unknown household " +
                                  ev.household);
        if (ev.rated_kw < 3.0)
            throw ValidationError("scenario: EV " + ev.id + " rated below the 3 kW floor");
        if (ev.response_delay_ms < 1 || ev.response_delay_ms > 10'000)
            throw ValidationError("scenario: EV " + ev.id + " response delay out of range");
        if (ev.reservation_lead_ms < 2 * ev.response_delay_ms + 10'000 ||
            ev.reservation_lead_ms > kMaxLeadMs)
            throw ValidationError("scenario: EV " + ev.id + " reservation lead out of range");
        if (ev.cancel_delay_ms < 1'000 || ev.cancel_delay_ms > 600'000)
            throw ValidationError("scenario: EV " + ev.id + " cancel delay out of range");
        if (ev.pricing_phase_ms < 0 || ev.pricing_phase_ms >= schedule.pricing_ms ||
            ev.load_control_phase_ms < 0 || ev.load_control_phase_ms >= schedule.load_control_ms)
            throw ValidationError("scenario: EV " + ev.id + " fetch phase out of range");
        if (ev.list_fetch_offset_ms < 0 || ev.list_fetch_offset_ms >= schedule.reservation_list_ms)
            throw ValidationError("scenario: EV " + ev.id + " list fetch offset out of range");

        bool high = ev.rated_kw >= high_rated_threshold_kw;
        long decay = high ? high_decay_samples : low_decay_samples;
        Timestamp prev_cancel = -kEventGapMs;
        for (const ChargingEvent& e : ev.events) {
            if (e.window_start % dt_ms != 0 || e.window_end % dt_ms != 0)
                throw ValidationError("scenario: EV " + ev.id + " window not sample-aligned");
            if (e.window_end - e.window_start < 2 * schedule.power_status_ms)
                throw ValidationError("scenario: EV " + ev.id + " window too short");
            long ws = e.window_start / dt_ms;
            long we = e.window_end / dt_ms;
            if (ws < ramp_samples)
                throw ValidationError("scenario: EV " + ev.id + " window starts too early");
            if (we + decay + 2 > n_samples)
                throw ValidationError("scenario: EV " + ev.id + " event exceeds the horizon");
            Timestamp req = e.window_start - ev.reservation_lead_ms;
            if (req <= prev_cancel + kEventGapMs)
                throw ValidationError("scenario: EV " + ev.id + " events overlap");
            prev_cancel = cancel_time(ev, e, schedule.power_status_ms);
            if (prev_cancel >= horizon_ms)
                throw ValidationError("scenario: EV " + ev.id + " cancel falls past the horizon");
        }
    }
}

namespace {

ordered_json schedule_to_json(const PeriodicSchedule& s) {
    ordered_json j;
    j["power_status_ms"] = s.power_status_ms;
    j["reservation_list_ms"] = s.reservation_list_ms;
    j["pricing_ms"] = s.pricing_ms;
    j["load_control_ms"] = s.load_control_ms;
    j["tolerance_fraction"] = s.tolerance_fraction;
    return j;
}

PeriodicSchedule schedule_from_json(const ordered_json& j) {
    PeriodicSchedule s;
    s.power_status_ms = j.at("power_status_ms").get<Timestamp>();
    s.reservation_list_ms = j.at("reservation_list_ms").get<Timestamp>();
    s.pricing_ms = j.at("pricing_ms").get<Timestamp>();
    s.load_control_ms = j.at("load_control_ms").get<Timestamp>();
    s.tolerance_fraction = j.at("tolerance_fraction").get<double>();
    return s;
}

}  // namespace

std::string scenario_to_json(const Scenario& s) {
    ordered_json j;
    j["seed"] = s.seed;
    j["dt_ms"] = s.dt_ms;
    j["horizon_ms"] = s.horizon_ms;
    j["schedule"] = schedule_to_json(s.schedule);
    j["efficiency"] = ordered_json{{"eta1", s.efficiency.eta1}, {"eta2", s.efficiency.eta2}};
    j["ramp_samples"] = s.ramp_samples;
    j["high_decay_samples"] = s.high_decay_samples;
    j["low_decay_samples"] = s.low_decay_samples;
    j["high_rated_threshold_kw"] = s.high_rated_threshold_kw;
    j["base_load_csv"] = s.base_load_csv;
    j["households"] = ordered_json::array();
    for (const HouseholdSpec& h : s.households) {
        ordered_json hj;
        hj["id"] = h.id;
        hj["baseline_kw"] = h.baseline_kw;
        hj["ac_rated_kw"] = h.ac_rated_kw;
        hj["ac_period_ms"] = h.ac_period_ms;
        hj["ac_duty"] = h.ac_duty;
        hj["ac_phase_ms"] = h.ac_phase_ms;
        j["households"].push_back(hj);
    }
    j["evs"] = ordered_json::array();
    for (const EvSpec& ev : s.evs) {
        ordered_json ej;
        ej["id"] = ev.id;
        ej["household"] = ev.household;
        ej["rated_kw"] = ev.rated_kw;
        ej["events"] = ordered_json::array();
        for (const ChargingEvent& e : ev.events)
            ej["events"].push_back(ordered_json{{"window_start", e.window_start},
                                                {"window_end", e.window_end},
                                                {"direction", to_string(e.direction)}});
        ej["reservation_lead_ms"] = ev.reservation_lead_ms;
        ej["response_delay_ms"] = ev.response_delay_ms;
        ej["cancel_delay_ms"] = ev.cancel_delay_ms;
        ej["pricing_phase_ms"] = ev.pricing_phase_ms;
        ej["load_control_phase_ms"] = ev.load_control_phase_ms;
        ej["list_fetch_offset_ms"] = ev.list_fetch_offset_ms;
        ej["cancel_and_rebook"] = ev.cancel_and_rebook;
        j["evs"].push_back(ej);
    }
    return j.dump(2);
}

Scenario scenario_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario: malformed JSON: ") + e.what());
    }
    Scenario s;
    try {
        s.seed = j.at("seed").get<std::uint64_t>();
        s.dt_ms = j.at("dt_ms").get<Timestamp>();
        s.horizon_ms = j.at("horizon_ms").get<Timestamp>();
        s.schedule = schedule_from_json(j.at("schedule"));
        s.efficiency.eta1 = j.at("efficiency").at("eta1").get<double>();
        s.efficiency.eta2 = j.at("efficiency").at("eta2").get<double>();
        s.ramp_samples = j.at("ramp_samples").get<int>();
        s.high_decay_samples = j.at("high_decay_samples").get<int>();
        s.low_decay_samples = j.at("low_decay_samples").get<int>();
        s.high_rated_threshold_kw = j.at("high_rated_threshold_kw").get<double>();
        s.base_load_csv = j.value("base_load_csv", std::string{});
        for (const auto& hj : j.at("households")) {
            HouseholdSpec h;
            h.id = hj.at("id").get<std::string>();
            h.baseline_kw = hj.at("baseline_kw").get<double>();
            h.ac_rated_kw = hj.at("ac_rated_kw").get<double>();
            h.ac_period_ms = hj.at("ac_period_ms").get<Timestamp>();
            h.ac_duty = hj.at("ac_duty").get<double>();
            h.ac_phase_ms = hj.at("ac_phase_ms").get<Timestamp>();
            s.households.push_back(std::move(h));
        }
        for (const auto& ej : j.at("evs")) {
            EvSpec ev;
            ev.id = ej.at("id").get<std::string>();
            ev.household = ej.at("household").get<std::string>();
            ev.rated_kw = ej.at("rated_kw").get<double>();
            for (const auto& evj : ej.at("events")) {
                ChargingEvent e;
                e.window_start = evj.at("window_start").get<Timestamp>();
                e.window_end = evj.at("window_end").get<Timestamp>();
                auto dir = direction_from_string(evj.at("direction").get<std::string>());
                if (!dir) throw ParseError("scenario: bad direction");
                e.direction = *dir;
                ev.events.push_back(e);
            }
            ev.reservation_lead_ms = ej.at("reservation_lead_ms").get<Timestamp>();
            ev.response_delay_ms = ej.at("response_delay_ms").get<Timestamp>();
            ev.cancel_delay_ms = ej.at("cancel_delay_ms").get<Timestamp>();
            ev.pricing_phase_ms = ej.at("pricing_phase_ms").get<Timestamp>();
            ev.load_control_phase_ms = ej.at("load_control_phase_ms").get<Timestamp>();
            ev.list_fetch_offset_ms = ej.at("list_fetch_offset_ms").get<Timestamp>();
            ev.cancel_and_rebook = ej.at("cancel_and_rebook").get<bool>();
            s.evs.push_back(std::move(ev));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }
    return s;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return scenario_from_json(ss.str());
}

void save_scenario_file(const std::string& path, const Scenario& s) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write scenario file: " + path);
    f << scenario_to_json(s) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic scenarios
// ---------------------------------------------------------------------------

namespace {

struct QuietZones {
    // Sample indices that must stay clear of other spikes per household.
    std::vector<std::pair<long, long>> reserved;  // closed intervals
    std::vector<long> ac_toggles;

    bool clear(long lo, long hi) const {
        for (auto [a, b] : reserved)
            if (lo <= b && a <= hi) return false;
        for (long t : ac_toggles)
            if (t >= lo && t <= hi) return false;
        return true;
    }
};

}  // namespace

Scenario synth_scenario(const SynthParams& p) {
    if (p.n_evs < 1 || p.n_households < 1 || p.hours <= 0.0)
        throw ConfigError("synth_scenario: bad dimensions");
    std::mt19937_64 rng(p.seed);
    auto pick_int = [&](long lo, long hi) {
        return std::uniform_int_distribution<long>(lo, hi)(rng);
    };
    auto pick_real = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };

    Scenario s;
    s.seed = p.seed;
    s.horizon_ms = static_cast<Timestamp>(std::llround(p.hours * 3'600'000.0));
    s.horizon_ms -= s.horizon_ms % s.dt_ms;
    const long n_samples = s.horizon_ms / s.dt_ms;

    std::map<HouseholdId, QuietZones> zones;
    for (int h = 0; h < p.n_households; ++h) {
        HouseholdSpec hs;
        char buf[16];
        std::snprintf(buf, sizeof buf, "h%03d", h);
        hs.id = buf;
        hs.baseline_kw = pick_real(0.3, 0.8);
        hs.ac_rated_kw = pick_real(0.8, 1.5);
        const long period_min[] = {40, 50, 60, 80};
        hs.ac_period_ms = period_min[pick_int(0, 3)] * 60'000;
        hs.ac_duty = pick_real(0.3, 0.6);
        hs.ac_phase_ms = pick_int(0, hs.ac_period_ms / s.dt_ms - 1) * s.dt_ms;
        QuietZones& z = zones[hs.id];
        for (Timestamp t = hs.ac_phase_ms; t < s.horizon_ms; t += hs.ac_period_ms) {
            z.ac_toggles.push_back(t / s.dt_ms);
            Timestamp off = t + static_cast<Timestamp>(hs.ac_duty * hs.ac_period_ms);
            off -= off % s.dt_ms;
            if (off / s.dt_ms < n_samples) z.ac_toggles.push_back(off / s.dt_ms);
        }
        s.households.push_back(std::move(hs));
    }

    const double rated_choices[] = {3.0, 3.3, 6.0, 7.2};
    const long guard = 3;
    for (int i = 0; i < p.n_evs; ++i) {
        EvSpec ev;
        char buf[16];
        std::snprintf(buf, sizeof buf, "ev%03d", i);
        ev.id = buf;
        ev.household = s.households[i % p.n_households].id;
        ev.rated_kw = rated_choices[pick_int(0, 3)];
        ev.reservation_lead_ms = pick_int(6, 18) * 60'000;
        ev.response_delay_ms = pick_int(1, 3) * 1'000;
        ev.cancel_delay_ms = pick_int(30, 90) * 1'000;
        ev.pricing_phase_ms = pick_int(30, s.schedule.pricing_ms / 1'000 - 30) * 1'000;
        ev.load_control_phase_ms = pick_int(30, s.schedule.load_control_ms / 1'000 - 30) * 1'000;
        ev.list_fetch_offset_ms = pick_int(5, 25) * 1'000;
        ev.cancel_and_rebook = pick_real(0.0, 1.0) < p.cancel_rebook_fraction;

        const bool high = ev.rated_kw >= s.high_rated_threshold_kw;
        const long decay = high ? s.high_decay_samples : s.low_decay_samples;
        const long events = pick_int(p.min_events_per_ev, p.max_events_per_ev);
        QuietZones& z = zones.at(ev.household);
        Timestamp prev_cancel = 0;
        Timestamp prev_phys_start = -1;
        for (long e = 0; e < events; ++e) {
            long max_min = high ? p.max_window_min : p.max_low_rated_window_min;
            for (int attempt = 0; attempt < 400; ++attempt) {
                long dur_min = pick_int(p.min_window_min, max_min);
                Timestamp lo = prev_cancel + kEventGapMs + ev.reservation_lead_ms + s.dt_ms;
                if (!high && prev_phys_start >= 0) {
                    // stay clear of the previous event's constant-period hold
                    Timestamp hold_end = prev_phys_start +
                                         static_cast<Timestamp>(p.constant_charging_min) *
                                             60'000 +
                                         4 * s.dt_ms;
                    lo = std::max(lo, hold_end);
                }
                long ws_lo = (lo + s.dt_ms - 1) / s.dt_ms;
                long ws_hi = n_samples - (dur_min + decay + guard + 2);
                if (ws_lo >= ws_hi) break;
                long ws = pick_int(ws_lo, ws_hi);
                long we = ws + dur_min;
                // Quiet zones around the spiking edges keep them attributable.
                // A low-rated tail decays far below any spike threshold and
                // needs no zone of its own.
                long s_lo = ws - s.ramp_samples - guard, s_hi = ws + guard;
                long e_lo = we - guard, e_hi = we + s.high_decay_samples + guard;
                if (!z.clear(s_lo, s_hi)) continue;
                if (high && !z.clear(e_lo, e_hi)) continue;
                ChargingEvent event;
                event.window_start = ws * s.dt_ms;
                event.window_end = we * s.dt_ms;
                event.direction = pick_real(0.0, 1.0) < p.discharge_fraction
                                      ? Direction::Discharge
                                      : Direction::Charge;
                ev.events.push_back(event);
                z.reserved.emplace_back(s_lo, s_hi);
                if (high) z.reserved.emplace_back(e_lo, e_hi);
                prev_cancel = cancel_time(ev, event, s.schedule.power_status_ms);
                prev_phys_start = (ws - (s.ramp_samples - 1)) * s.dt_ms;
                break;
            }
        }
        s.evs.push_back(std::move(ev));
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Profiles and household load
// ---------------------------------------------------------------------------

EvEventProfile generate_ev_profile(PowerKw rated_kw, const ChargingEvent& event, Timestamp dt_ms,
                                   int ramp_samples, int high_decay_samples,
                                   int low_decay_samples, PowerKw high_rated_threshold_kw,
                                   EfficiencyParams eff) {
    if (rated_kw <= 0.0) throw ContractError("ev profile: rated power must be positive");
    if (dt_ms <= 0) throw ContractError("ev profile: dt must be positive");
    if (ramp_samples < 1) throw ContractError("ev profile: ramp must be at least one sample");
    if (event.window_start % dt_ms != 0 || event.window_end % dt_ms != 0)
        throw ContractError("ev profile: window not sample-aligned");
    if (event.window_end <= event.window_start)
        throw ContractError("ev profile: zero-duration event");

    const long ws = event.window_start / dt_ms;
    const long we = event.window_end / dt_ms;
    const double mag = event.direction == Direction::Charge
                           ? rated_kw
                           : derive_discharge_profile(std::vector<PowerKw>{rated_kw}, eff)[0];
    const double v = event.direction == Direction::Charge ? mag : -mag;
    const bool high = rated_kw >= high_rated_threshold_kw;
    const int decay = high ? high_decay_samples : low_decay_samples;

    EvEventProfile out;
    out.first_idx = ws - (ramp_samples - 1);
    if (out.first_idx < 0) throw BoundsError("ev profile: ramp precedes the horizon");
    for (int k = 1; k <= ramp_samples; ++k)
        out.values.push_back(v * k / ramp_samples);  // reaches v exactly at window_start
    for (long i = ws + 1; i <= we; ++i) out.values.push_back(v);
    for (int k = 1; k < decay; ++k) out.values.push_back(v * (decay - k) / decay);
    return out;
}

HouseholdLoad generate_household_load(std::span<const LoadSample> base,
                                      std::span<const EvEventProfile> ev_profiles,
                                      std::span<const long> new_start_indices) {
    if (ev_profiles.size() != new_start_indices.size())
        throw ContractError("household load: one start per EV profile required");
    HouseholdLoad out;
    out.aggregated.assign(base.begin(), base.end());
    const long n = static_cast<long>(base.size());
    for (std::size_t i = 0; i < ev_profiles.size(); ++i) {
        EvEventProfile shifted = ev_profiles[i];
        shifted.first_idx = new_start_indices[i];  // duration preserved
        if (shifted.first_idx < 0 || shifted.end_idx() > n)
            throw BoundsError("household load: slid window exceeds the scenario horizon");
        for (std::size_t k = 0; k < shifted.values.size(); ++k)
            out.aggregated[shifted.first_idx + k].p += shifted.values[k];
        out.shifted.push_back(std::move(shifted));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Benign trace generation
// ---------------------------------------------------------------------------

namespace {

std::vector<LoadSample> synthetic_base(const HouseholdSpec& h, Timestamp dt, long n) {
    std::vector<LoadSample> out;
    out.reserve(n);
    for (long i = 0; i < n; ++i) {
        Timestamp t = i * dt;
        PowerKw p = h.baseline_kw;
        if (h.ac_rated_kw > 0.0) {
            Timestamp into = (t - h.ac_phase_ms) % h.ac_period_ms;
            if (into < 0) into += h.ac_period_ms;
            if (into < static_cast<Timestamp>(h.ac_duty * h.ac_period_ms)) p += h.ac_rated_kw;
        }
        out.push_back({h.id, t, p});
    }
    return out;
}

struct SeqPacket {
    Packet pkt;
    std::size_t seq = 0;  // per-EV chronological rank
};

Packet make_packet(const EvId& ev, Timestamp t, MessageKind kind) {
    Packet p;
    p.kind = kind;
    p.arrival = t;
    if (is_response(kind)) {
        p.src = kAggregator;
        p.dst = ev;
    } else {
        p.src = ev;
        p.dst = kAggregator;
    }
    return p;
}

Packet reservation_response(const EvSpec& ev, const ChargingEvent& e, Timestamp t,
                            MessageKind kind) {
    Packet p = make_packet(ev.id, t, kind);
    p.payload = FlowReservation{ev.id, e.window_start, e.window_end, e.direction, ev.rated_kw};
    return p;
}

}  // namespace

LabeledTrace generate_packet_trace(const Scenario& scenario) {
    scenario.validate();
    const Timestamp dt = scenario.dt_ms;
    const long n = scenario.horizon_ms / dt;

    LabeledTrace out;

    // Physical side: base + event profiles per household.
    std::map<HouseholdId, std::vector<LoadSample>> base;
    if (!scenario.base_load_csv.empty()) {
        RealProfiles real = ingest_real_profiles_file(scenario.base_load_csv);
        if (real.dt_ms != dt)
            throw ValidationError("scenario: base CSV sampling differs from dt_ms");
        for (const HouseholdSpec& h : scenario.households) {
            auto it = real.households.find(h.id);
            if (it == real.households.end())
                throw ValidationError("scenario: base CSV lacks household " + h.id);
            if (static_cast<long>(it->second.size()) < n)
                throw ValidationError("scenario: base CSV too short for household " + h.id);
            auto series = it->second;
            series.resize(n);
            Timestamp t0 = series.front().t;
            for (auto& smp : series) smp.t -= t0;  // rebase onto the scenario clock
            base[h.id] = std::move(series);
        }
    } else {
        for (const HouseholdSpec& h : scenario.households) base[h.id] = synthetic_base(h, dt, n);
    }

    for (const HouseholdSpec& h : scenario.households) {
        std::vector<EvEventProfile> profiles;
        std::vector<long> starts;
        for (const EvSpec& ev : scenario.evs) {
            if (ev.household != h.id) continue;
            for (const ChargingEvent& e : ev.events) {
                profiles.push_back(generate_ev_profile(
                    ev.rated_kw, e, dt, scenario.ramp_samples, scenario.high_decay_samples,
                    scenario.low_decay_samples, scenario.high_rated_threshold_kw,
                    scenario.efficiency));
                starts.push_back(profiles.back().first_idx);
            }
        }
        HouseholdLoad hl = generate_household_load(base.at(h.id), profiles, starts);
        out.load.insert(out.load.end(), hl.aggregated.begin(), hl.aggregated.end());
    }
    std::sort(out.load.begin(), out.load.end(), [](const LoadSample& a, const LoadSample& b) {
        return a.t != b.t ? a.t < b.t : a.household < b.household;
    });

    // Cyber side.
    std::vector<SeqPacket> all;
    for (const EvSpec& ev : scenario.evs) {
        std::vector<Packet> pkts;
        auto emit_fetches = [&](Timestamp from, Timestamp to) {
            for (Timestamp t = from + ev.pricing_phase_ms; t < to; t += scenario.schedule.pricing_ms)
                pkts.push_back(make_packet(ev.id, t, MessageKind::PricingFetch));
            for (Timestamp t = from + ev.load_control_phase_ms; t < to;
                 t += scenario.schedule.load_control_ms)
                pkts.push_back(make_packet(ev.id, t, MessageKind::LoadControlFetch));
        };

        Timestamp seg_start = 0;
        for (const ChargingEvent& e : ev.events) {
            Timestamp req = e.window_start - ev.reservation_lead_ms;
            emit_fetches(seg_start, req);

            Timestamp t = req;
            pkts.push_back(make_packet(ev.id, t, MessageKind::FlowReservationRequest));
            t += ev.response_delay_ms;
            pkts.push_back(reservation_response(ev, e, t, MessageKind::FlowReservationResponse));
            if (ev.cancel_and_rebook) {
                pkts.push_back(make_packet(ev.id, t + 2'000, MessageKind::FlowReservationCancel));
                pkts.push_back(
                    make_packet(ev.id, t + 7'000, MessageKind::FlowReservationRequest));
                t += 7'000 + ev.response_delay_ms;
                pkts.push_back(
                    reservation_response(ev, e, t, MessageKind::FlowReservationResponse));
            }

            const PowerKw mag =
                e.direction == Direction::Charge
                    ? ev.rated_kw
                    : ev.rated_kw * scenario.efficiency.eta1 * scenario.efficiency.eta2;
            for (Timestamp u = e.window_start; u <= e.window_end;
                 u += scenario.schedule.power_status_ms) {
                Packet p = make_packet(ev.id, u, MessageKind::PowerStatusUpdate);
                p.payload = PowerReport{mag};
                pkts.push_back(std::move(p));
            }
            for (Timestamp u = e.window_start + ev.list_fetch_offset_ms; u <= e.window_end;
                 u += scenario.schedule.reservation_list_ms) {
                pkts.push_back(make_packet(ev.id, u, MessageKind::FlowReservationListFetch));
                pkts.push_back(reservation_response(ev, e, u + ev.response_delay_ms,
                                                    MessageKind::FlowReservationListResponse));
            }
            Timestamp cancel = cancel_time(ev, e, scenario.schedule.power_status_ms);
            pkts.push_back(make_packet(ev.id, cancel, MessageKind::FlowReservationCancel));
            seg_start = cancel;
        }
        emit_fetches(seg_start, scenario.horizon_ms);

        std::stable_sort(pkts.begin(), pkts.end(),
                         [](const Packet& a, const Packet& b) { return a.arrival < b.arrival; });
        for (std::size_t i = 0; i < pkts.size(); ++i) all.push_back({std::move(pkts[i]), i});
    }

    std::sort(all.begin(), all.end(), [](const SeqPacket& a, const SeqPacket& b) {
        if (a.pkt.arrival != b.pkt.arrival) return a.pkt.arrival < b.pkt.arrival;
        const std::string& ea = ev_of(a.pkt);
        const std::string& eb = ev_of(b.pkt);
        if (ea != eb) return ea < eb;
        return a.seq < b.seq;
    });
    out.packets.reserve(all.size());
    for (SeqPacket& sp : all) out.packets.push_back(std::move(sp.pkt));
    out.labels.assign(out.packets.size(), std::nullopt);
    return out;
}

// ---------------------------------------------------------------------------
// Attack injection
// ---------------------------------------------------------------------------

namespace {

struct UpdateRun {
    EvId ev;
    Timestamp window_start = 0;
    Timestamp window_end = 0;
    std::vector<std::size_t> psu_idx;  // trace indices, chronological
    Timestamp period = 0;
    Timestamp next_packet_t = 0;  // first same-EV packet after the run (or horizon end)
};

std::vector<UpdateRun> find_runs(const LabeledTrace& trace) {
    std::vector<UpdateRun> runs;
    std::map<EvId, FlowReservation> current;
    std::map<EvId, std::size_t> open;  // ev -> index into runs
    for (std::size_t i = 0; i < trace.packets.size(); ++i) {
        const Packet& p = trace.packets[i];
        const EvId& ev = ev_of(p);
        if (p.kind == MessageKind::FlowReservationResponse) {
            current[ev] = std::get<FlowReservation>(p.payload);
            open.erase(ev);
            continue;
        }
        if (p.kind != MessageKind::PowerStatusUpdate) continue;
        if (trace.labels[i]) continue;  // only originally-benign updates form runs
        auto res = current.find(ev);
        if (res == current.end()) continue;
        if (p.arrival < res->second.window_start || p.arrival > res->second.window_end) continue;
        auto it = open.find(ev);
        if (it == open.end() || runs[it->second].window_start != res->second.window_start) {
            UpdateRun r;
            r.ev = ev;
            r.window_start = res->second.window_start;
            r.window_end = res->second.window_end;
            r.psu_idx.push_back(i);
            open[ev] = runs.size();
            runs.push_back(std::move(r));
        } else {
            runs[it->second].psu_idx.push_back(i);
        }
    }
    for (UpdateRun& r : runs) {
        if (r.psu_idx.size() >= 2)
            r.period = trace.packets[r.psu_idx[1]].arrival - trace.packets[r.psu_idx[0]].arrival;
        r.next_packet_t = trace.packets.back().arrival + 1;
        for (std::size_t i = r.psu_idx.back() + 1; i < trace.packets.size(); ++i) {
            if (ev_of(trace.packets[i]) == r.ev) {
                r.next_packet_t = trace.packets[i].arrival;
                break;
            }
        }
    }
    return runs;
}

// Deterministic re-sort preserving per-EV relative order.
void resort(LabeledTrace& t) {
    std::vector<std::size_t> order(t.packets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::map<EvId, std::vector<std::size_t>> per_ev;
    for (std::size_t i = 0; i < t.packets.size(); ++i)
        per_ev[ev_of(t.packets[i])].push_back(i);
    std::map<std::size_t, std::size_t> seq;
    for (auto& [ev, idxs] : per_ev) {
        std::stable_sort(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
            return t.packets[a].arrival < t.packets[b].arrival;
        });
        for (std::size_t k = 0; k < idxs.size(); ++k) seq[idxs[k]] = k;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (t.packets[a].arrival != t.packets[b].arrival)
            return t.packets[a].arrival < t.packets[b].arrival;
        const std::string& ea = ev_of(t.packets[a]);
        const std::string& eb = ev_of(t.packets[b]);
        if (ea != eb) return ea < eb;
        return seq[a] < seq[b];
    });
    LabeledTrace sorted;
    sorted.load = std::move(t.load);
    sorted.packets.reserve(t.packets.size());
    sorted.labels.reserve(t.labels.size());
    for (std::size_t i : order) {
        sorted.packets.push_back(std::move(t.packets[i]));
        sorted.labels.push_back(t.labels[i]);
    }
    t = std::move(sorted);
}

}  // namespace

LabeledTrace inject_attack(const LabeledTrace& trace, const AttackSpec& spec) {
    if (trace.packets.size() != trace.labels.size())
        throw ContractError("inject_attack: labels misaligned");
    if (spec.count < 1) throw ContractError("inject_attack: count must be >= 1");
    LabeledTrace out = trace;
    std::mt19937_64 rng(spec.seed);

    switch (spec.kind) {
        case AttackKind::OverReport:
        case AttackKind::UnderReport: {
            // One site per update run, at the last in-window update: the first
            // update enjoys the ramp-up grace, and a dropped mid-run update
            // desynchronizes the frequency gate for the rest of the run.
            std::vector<UpdateRun> runs = find_runs(out);
            std::vector<std::size_t> sites;
            for (const UpdateRun& r : runs)
                if (r.psu_idx.size() >= 2) sites.push_back(r.psu_idx.back());
            if (static_cast<std::size_t>(spec.count) > sites.size())
                throw CapacityError("inject_attack: not enough injection sites");
            std::shuffle(sites.begin(), sites.end(), rng);
            sites.resize(spec.count);
            for (std::size_t idx : sites) {
                auto& report = std::get<PowerReport>(out.packets[idx].payload);
                if (spec.kind == AttackKind::OverReport)
                    report.kw += spec.magnitude_kw;
                else
                    report.kw = std::max(0.05, report.kw - spec.magnitude_kw);
                out.labels[idx] = spec.kind;
            }
            break;
        }
        case AttackKind::OutOfSequence: {
            // Responses the aggregator never solicits; no state admits them.
            std::set<EvId> evs;
            for (const Packet& p : out.packets) evs.insert(ev_of(p));
            std::vector<EvId> ev_list(evs.begin(), evs.end());
            if (ev_list.empty() || out.packets.empty())
                throw CapacityError("inject_attack: empty trace");
            Timestamp lo = out.packets.front().arrival;
            Timestamp hi = out.packets.back().arrival;
            for (int i = 0; i < spec.count; ++i) {
                EvId ev = ev_list[std::uniform_int_distribution<std::size_t>(
                    0, ev_list.size() - 1)(rng)];
                Timestamp t = std::uniform_int_distribution<Timestamp>(lo, hi)(rng);
                MessageKind kind = std::uniform_int_distribution<int>(0, 1)(rng) == 0
                                       ? MessageKind::PricingResponse
                                       : MessageKind::LoadControlResponse;
                out.packets.push_back(make_packet(ev, t, kind));
                out.labels.push_back(spec.kind);
            }
            resort(out);
            break;
        }
        case AttackKind::BeyondSubscription: {
            // One extra update per window, one nominal period after the last
            // legitimate one: schedule-clean, but past window_end.
            std::vector<UpdateRun> runs = find_runs(out);
            std::vector<std::size_t> eligible;
            for (std::size_t r = 0; r < runs.size(); ++r) {
                if (runs[r].psu_idx.size() < 2) continue;
                Timestamp t = out.packets[runs[r].psu_idx.back()].arrival + runs[r].period;
                if (t > runs[r].window_end && t < runs[r].next_packet_t) eligible.push_back(r);
            }
            if (static_cast<std::size_t>(spec.count) > eligible.size())
                throw CapacityError("inject_attack: not enough injection sites");
            std::shuffle(eligible.begin(), eligible.end(), rng);
            eligible.resize(spec.count);
            for (std::size_t r : eligible) {
                const UpdateRun& run = runs[r];
                const Packet& last = out.packets[run.psu_idx.back()];
                Packet p = make_packet(run.ev, last.arrival + run.period,
                                       MessageKind::PowerStatusUpdate);
                p.payload = std::get<PowerReport>(last.payload);
                out.packets.push_back(std::move(p));
                out.labels.push_back(spec.kind);
            }
            resort(out);
            break;
        }
        case AttackKind::WrongPeriodicity: {
            // Retime whole runs after their anchor. Alternating offsets keep
            // every retimed gap-from-anchor outside tolerance (for delta in
            // (tolerance, 1 - tolerance]) while the mean period is
            // preserved. count is a minimum: runs are retimed whole, since a
            // partially retimed run would leave unlabeled packets that the
            // frequency gate still flags.
            std::vector<UpdateRun> runs = find_runs(out);
            std::vector<std::size_t> eligible;
            for (std::size_t r = 0; r < runs.size(); ++r)
                if (runs[r].psu_idx.size() >= 2) eligible.push_back(r);
            std::shuffle(eligible.begin(), eligible.end(), rng);
            long available = 0;
            for (std::size_t r : eligible)
                available += static_cast<long>(runs[r].psu_idx.size()) - 1;
            if (available < spec.count)
                throw CapacityError("inject_attack: not enough injection sites");
            long retimed = 0;
            for (std::size_t r : eligible) {
                if (retimed >= spec.count) break;
                const UpdateRun& run = runs[r];
                const Timestamp period = run.period;
                const Timestamp jitter =
                    static_cast<Timestamp>(std::llround(spec.delta * period));
                const Timestamp sign =
                    std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? 1 : -1;
                Timestamp t0 = out.packets[run.psu_idx[0]].arrival;
                for (std::size_t k = 1; k < run.psu_idx.size(); ++k) {
                    Timestamp off = (k % 2 == 1 ? sign : -sign) * jitter;
                    Timestamp t = t0 + static_cast<Timestamp>(k) * period + off;
                    if (t > run.window_end)
                        t = t0 + static_cast<Timestamp>(k) * period - jitter;
                    out.packets[run.psu_idx[k]].arrival = t;
                    out.labels[run.psu_idx[k]] = spec.kind;
                    ++retimed;
                }
            }
            resort(out);
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Real profile ingestion
// ---------------------------------------------------------------------------

RealProfiles ingest_real_profiles(std::istream& csv) {
    std::vector<LoadSample> samples = read_load_csv(csv);
    RealProfiles out;
    std::map<HouseholdId, std::size_t> last_row;
    std::map<HouseholdId, Timestamp> gap;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const LoadSample& s = samples[i];
        auto& series = out.households[s.household];
        if (!series.empty()) {
            Timestamp d = s.t - series.back().t;
            if (d <= 0)
                throw IngestError("row " + std::to_string(i + 2) +
                                  ": timestamps must strictly increase per household");
            auto it = gap.find(s.household);
            if (it == gap.end()) {
                gap[s.household] = d;
                if (out.dt_ms == 0) out.dt_ms = d;
                if (d != out.dt_ms)
                    throw IngestError("row " + std::to_string(i + 2) +
                                      ": sampling differs across households");
            } else if (d != it->second) {
                throw IngestError("row " + std::to_string(i + 2) +
                                  ": non-uniform sampling for household " + s.household);
            }
        }
        series.push_back(s);
        last_row[s.household] = i + 2;
    }
    for (const auto& [hh, series] : out.households)
        if (series.size() < 2)
            throw IngestError("household " + hh + ": need at least two samples");
    return out;
}

RealProfiles ingest_real_profiles_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open profile CSV: " + path);
    return ingest_real_profiles(f);
}

RealProfiles replicate(const RealProfiles& profiles, int factor) {
    if (factor < 1) throw ContractError("replicate: factor must be >= 1");
    RealProfiles out;
    out.dt_ms = profiles.dt_ms;
    for (const auto& [hh, series] : profiles.households) {
        out.households[hh] = series;
        for (int k = 1; k < factor; ++k) {
            HouseholdId id = hh + "#r" + std::to_string(k);
            auto copy = series;
            for (LoadSample& s : copy) s.household = id;
            out.households[id] = std::move(copy);
        }
    }
    return out;
}

}  // namespace v2g
