#include "v2g/physical.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>

namespace v2g {

namespace {

constexpr double kEps = 1e-9;

struct SubsetMatch {
    unsigned mask = 0;
    double err = 0.0;
};

// Smallest-error subset of `deltas` whose sum matches `target`. Relative
// mode accepts within fraction*|sum|, absolute mode within `tol`. Ties
// prefer fewer members, then the lowest mask; callers keep candidate order
// deterministic. Empty on no acceptable subset.
std::optional<SubsetMatch> match_subset(const std::vector<double>& deltas, double target,
                                        double fraction, std::optional<double> abs_tol = {}) {
    std::optional<SubsetMatch> best;
    int best_count = 0;
    const unsigned end = 1u << deltas.size();
    for (unsigned mask = 1; mask < end; ++mask) {
        double sum = 0.0;
        for (unsigned b = 0; b < deltas.size(); ++b)
            if (mask & (1u << b)) sum += deltas[b];
        double tol = abs_tol ? *abs_tol : fraction * std::abs(sum);
        double err = std::abs(target - sum);
        if (err > tol + kEps) continue;
        int count = std::popcount(mask);
        bool better = !best || err < best->err - kEps ||
                      (err <= best->err + kEps &&
                       (count < best_count || (count == best_count && mask < best->mask)));
        if (better) {
            best = SubsetMatch{mask, err};
            best_count = count;
        }
    }
    return best;
}

}  // namespace

std::vector<FilteredSample> high_pass_filter(std::span<const LoadSample> samples) {
    if (samples.empty()) throw ContractError("high_pass_filter: need at least one sample");
    std::vector<FilteredSample> out;
    out.reserve(samples.size());
    out.push_back({samples[0].household, samples[0].t, 0.0});
    Timestamp dt = 0;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].household != samples[0].household)
            throw ContractError("high_pass_filter: mixed households in one series");
        Timestamp gap = samples[i].t - samples[i - 1].t;
        if (gap <= 0) throw IngestError("high_pass_filter: timestamps must strictly increase");
        if (i == 1)
            dt = gap;
        else if (gap != dt)
            throw IngestError("high_pass_filter: non-uniform sampling; resampling required");
        out.push_back({samples[i].household, samples[i].t, samples[i].p - samples[i - 1].p});
    }
    return out;
}

std::vector<PowerKw> derive_discharge_profile(std::span<const PowerKw> charge_profile,
                                              EfficiencyParams params) {
    if (!(params.eta1 > 0.0 && params.eta1 <= 1.0) || !(params.eta2 > 0.0 && params.eta2 <= 1.0))
        throw ConfigError("efficiencies must lie in (0, 1]");
    std::vector<PowerKw> out;
    out.reserve(charge_profile.size());
    const double factor = params.eta1 * params.eta2;
    for (PowerKw pc : charge_profile) {
        if (pc < 0.0) throw ContractError("charge profile values must be >= 0");
        out.push_back(pc * factor);
    }
    return out;
}

int state_at(const ChargeStateSeries& series, Timestamp t) {
    auto it = std::upper_bound(series.begin(), series.end(), t,
                               [](Timestamp v, const ChargeStatePoint& p) { return v < p.t; });
    if (it == series.begin()) return 0;
    return std::prev(it)->state;
}

ChargeStateSeries identify_charge_states(std::span<const FilteredSample> filtered,
                                         PowerKw ev_rated, const DetectionParams& params) {
    ChargeStateSeries out;
    out.reserve(filtered.size());
    if (filtered.empty()) return out;

    const double range = params.event_range_fraction * ev_rated;
    auto start_spike = [&](double s) { return std::abs(s - ev_rated) <= range + kEps; };
    auto stop_spike = [&](double s) { return std::abs(s + ev_rated) <= range + kEps; };
    const bool high = ev_rated >= params.high_rated_threshold_kw;
    const long n = static_cast<long>(filtered.size());
    const long hold = filtered.size() >= 2
                          ? std::max<long>(1, params.constant_charging_ms /
                                                  (filtered[1].t - filtered[0].t))
                          : 1;

    int state =
        std::abs(params.initial_level_kw - ev_rated) <= params.band_halfwidth_kw + kEps ? 1 : 0;
    long expiry = state == 1 ? hold : -1;

    for (long i = 0; i < n; ++i) {
        const double dp = filtered[i].dp;
        const double next = i + 1 < n ? filtered[i + 1].dp : 0.0;
        const double prev = i > 0 ? filtered[i - 1].dp : 0.0;
        const double floor = params.trigger_floor_kw;
        if (high) {
            if (state == 0) {
                if (dp > floor && start_spike(dp + next)) state = 1;
            } else {
                if (dp < -floor && stop_spike(dp + prev)) state = 0;
            }
        } else {
            if (state == 1 && i >= expiry) state = 0;
            if (state == 0 && dp > floor && start_spike(dp + next)) {
                state = 1;
                expiry = i + hold;
            }
        }
        out.push_back({filtered[i].t, state});
    }
    return out;
}

bool validate_power(PowerKw reported, Timestamp t, const ChargeStateSeries& series,
                    const SteadyStateBand& band, bool first_packet) {
    if (state_at(series, t) != 1) return false;  // no EV activity at this time
    if (reported < band.min_kw) return first_packet;  // may still be ramping up
    return reported <= band.max_kw;
}

// ---------------------------------------------------------------------------
// HouseholdTracker
// ---------------------------------------------------------------------------

HouseholdTracker::HouseholdTracker(HouseholdId household, std::vector<EvPhysical> residents,
                                   DetectionParams params, EfficiencyParams eff, Timestamp dt_ms)
    : household_(std::move(household)), params_(params), eff_(eff), dt_(dt_ms) {
    if (dt_ <= 0) throw ConfigError("household tracker: dt must be positive");
    constant_samples_ = std::max<long>(1, params_.constant_charging_ms / dt_);
    if (residents.size() > 16)
        throw ConfigError("household tracker: too many resident EVs for subset matching");
    std::sort(residents.begin(), residents.end(),
              [](const EvPhysical& a, const EvPhysical& b) { return a.ev < b.ev; });
    for (const EvPhysical& e : residents) {
        if (e.rated_kw <= 0.0) throw ConfigError("household tracker: rated power must be positive");
        Resident r;
        r.ev = e.ev;
        r.rated = e.rated_kw;
        r.high = e.rated_kw >= params_.high_rated_threshold_kw;
        residents_.push_back(std::move(r));
    }
}

int HouseholdTracker::index_of(const EvId& ev) const {
    for (std::size_t i = 0; i < residents_.size(); ++i)
        if (residents_[i].ev == ev) return static_cast<int>(i);
    return -1;
}

PowerKw HouseholdTracker::event_magnitude(const Resident& r) const {
    return r.dir == Direction::Charge ? r.rated : r.rated * eff_.eta1 * eff_.eta2;
}

PowerKw HouseholdTracker::start_delta(const Resident& r) const {
    PowerKw m = event_magnitude(r);
    return r.dir == Direction::Charge ? m : -m;  // discharge exports: aggregate load drops
}

HouseholdTracker::Trigger HouseholdTracker::evaluate(long j, double next_dp, bool next_known,
                                                     const std::vector<Resident>& view) const {
    Trigger trig;
    const double frac = params_.event_range_fraction;

    for (std::size_t i = 0; i < view.size(); ++i) {
        const Resident& r = view[i];
        if (r.state == 1 && !r.event_driven && r.expiry_idx >= 0 && j >= r.expiry_idx)
            trig.expired.push_back(static_cast<int>(i));
    }
    auto expired = [&](std::size_t i) {
        return std::find(trig.expired.begin(), trig.expired.end(), static_cast<int>(i)) !=
               trig.expired.end();
    };

    const double dp = j < static_cast<long>(dp_.size()) ? dp_[j] : 0.0;
    if (std::abs(dp) <= params_.trigger_floor_kw || consumed_.count(j)) return trig;

    const Timestamp t_here = t0_ + j * dt_;

    struct Options {
        std::vector<int> cand;
        std::vector<double> deltas;
        std::vector<bool> expected;
        // best subset, candidates whose subscription explains the spike first
        bool is_expected = false;
        std::vector<int> hit;
        double err = 0.0;
        bool resolve(double target, double frac) {
            std::vector<int> ecand;
            std::vector<double> edeltas;
            for (std::size_t i = 0; i < cand.size(); ++i)
                if (expected[i]) {
                    ecand.push_back(cand[i]);
                    edeltas.push_back(deltas[i]);
                }
            if (auto m = match_subset(edeltas, target, frac)) {
                for (unsigned b = 0; b < edeltas.size(); ++b)
                    if (m->mask & (1u << b)) hit.push_back(ecand[b]);
                is_expected = true;
                err = m->err;
                return true;
            }
            if (auto m = match_subset(deltas, target, frac)) {
                for (unsigned b = 0; b < deltas.size(); ++b)
                    if (m->mask & (1u << b)) hit.push_back(cand[b]);
                err = m->err;
                return true;
            }
            return false;
        }
    };

    auto stop_options = [&](double spike_sign) {
        Options o;
        for (std::size_t i = 0; i < view.size(); ++i) {
            const Resident& r = view[i];
            if (r.state != 1 || !r.event_driven || expired(i)) continue;
            double stop = r.event_dir == Direction::Charge ? -r.magnitude : r.magnitude;
            if ((spike_sign > 0.0) == (stop > 0.0)) {
                o.cand.push_back(static_cast<int>(i));
                o.deltas.push_back(stop);
                o.expected.push_back(r.res_end && t_here >= *r.res_end);
            }
        }
        return o;
    };

    // Stop events resolve on the trailing half of their spike.
    bool stop_matched = false;
    if (j >= 1) {
        Options stops = stop_options(dp);
        if (stops.resolve(dp_[j - 1] + dp, frac)) {
            trig.stopped = stops.hit;
            stop_matched = true;
        }
    }

    if (!stop_matched) {
        const double pair = dp + (next_known ? next_dp : 0.0);
        Options starts;
        for (std::size_t i = 0; i < view.size(); ++i) {
            const Resident& r = view[i];
            if (r.state == 1 && !expired(i)) continue;
            double start = start_delta(r);
            if ((dp > 0.0) == (start > 0.0)) {
                starts.cand.push_back(static_cast<int>(i));
                starts.deltas.push_back(start);
                // the ramp may precede the window start by a couple of samples
                starts.expected.push_back(r.res_start && t_here >= *r.res_start - 3 * dt_ &&
                                          r.res_end && t_here <= *r.res_end);
            }
        }
        if (starts.resolve(pair, frac)) {
            // The same forward pair may be the leading half of an active
            // resident's stop spike, which only resolves one sample later.
            // Prefer whichever explains the spike better and defer to the
            // stop when it wins, so the trailing-half match can claim it.
            Options stops = stop_options(dp);
            bool defer = false;
            if (stops.resolve(pair, frac)) {
                if (stops.is_expected != starts.is_expected)
                    defer = stops.is_expected;
                else
                    defer = stops.err <= starts.err + kEps;
            }
            if (!defer) trig.started = starts.hit;
        }
    }
    return trig;
}

void HouseholdTracker::apply(Trigger& trig, long j, std::vector<Resident>& view) const {
    for (int i : trig.expired) {
        Resident& r = view[i];
        r.state = 0;
        r.start_idx = r.expiry_idx = -1;
    }
    for (int i : trig.stopped) {
        Resident& r = view[i];
        r.state = 0;
        r.start_idx = r.expiry_idx = -1;
    }
    for (int i : trig.started) {
        Resident& r = view[i];
        r.state = 1;
        r.event_dir = r.dir;
        r.magnitude = event_magnitude(r);
        r.event_driven = r.high;
        r.start_idx = j;
        r.expiry_idx = r.high ? -1 : j + constant_samples_;
    }
}

void HouseholdTracker::finalize(long j) {
    double next = j + 1 < static_cast<long>(dp_.size()) ? dp_[j + 1] : 0.0;
    Trigger trig = evaluate(j, next, true, residents_);
    apply(trig, j, residents_);
    if (!trig.stopped.empty()) consumed_.insert(j);
    if (!trig.started.empty()) {
        consumed_.insert(j);
        consumed_.insert(j + 1);
    }
    for (Resident& r : residents_) r.history.push_back(static_cast<std::int8_t>(r.state));
    finalized_ = j;
}

std::vector<HouseholdTracker::Resident> HouseholdTracker::frontier_view() const {
    std::vector<Resident> view = residents_;
    long frontier = static_cast<long>(dp_.size()) - 1;
    if (frontier > finalized_) {
        Trigger trig = evaluate(frontier, 0.0, false, view);
        apply(trig, frontier, view);
    }
    return view;
}

void HouseholdTracker::ingest(const LoadSample& sample) {
    if (sample.household != household_)
        throw ContractError("household tracker: sample for wrong household");
    if (!any_) {
        any_ = true;
        t0_ = sample.t;
        prev_p_ = sample.p;
        dp_.push_back(0.0);
        // Initial states: residents whose combined steady magnitudes already
        // explain the opening level are taken as mid-event.
        std::vector<int> cand;
        std::vector<double> deltas;
        for (std::size_t i = 0; i < residents_.size(); ++i) {
            cand.push_back(static_cast<int>(i));
            deltas.push_back(start_delta(residents_[i]));
        }
        if (auto m = match_subset(deltas, sample.p, 0.0, params_.band_halfwidth_kw)) {
            Trigger trig;
            for (unsigned b = 0; b < deltas.size(); ++b)
                if (m->mask & (1u << b)) trig.started.push_back(cand[b]);
            apply(trig, 0, residents_);
        }
        return;
    }
    Timestamp expected = t0_ + static_cast<Timestamp>(dp_.size()) * dt_;
    if (sample.t != expected)
        throw IngestError("household tracker: non-uniform sampling; resampling required");
    dp_.push_back(sample.p - prev_p_);
    prev_p_ = sample.p;
    finalize(static_cast<long>(dp_.size()) - 2);
}

long HouseholdTracker::index_for(Timestamp t) const {
    if (!any_ || t < t0_) return -1;
    return (t - t0_) / dt_;
}

int HouseholdTracker::state_at(const EvId& ev, Timestamp t) const {
    int i = index_of(ev);
    if (i < 0) throw ConfigError("household tracker: unknown EV " + ev);
    long idx = index_for(t);
    if (idx < 0) return 0;
    if (idx <= finalized_) return residents_[i].history[idx];
    return frontier_view()[i].state;
}

std::optional<Timestamp> HouseholdTracker::active_since(const EvId& ev) const {
    int i = index_of(ev);
    if (i < 0) throw ConfigError("household tracker: unknown EV " + ev);
    auto view = frontier_view();
    if (view[i].state != 1 || view[i].start_idx < 0) return std::nullopt;
    return t0_ + view[i].start_idx * dt_;
}

PowerKw HouseholdTracker::expected_magnitude(const EvId& ev) const {
    int i = index_of(ev);
    if (i < 0) throw ConfigError("household tracker: unknown EV " + ev);
    auto view = frontier_view();
    return view[i].state == 1 ? view[i].magnitude : event_magnitude(view[i]);
}

ChargeStateSeries HouseholdTracker::finalized_series(const EvId& ev) const {
    int i = index_of(ev);
    if (i < 0) throw ConfigError("household tracker: unknown EV " + ev);
    ChargeStateSeries out;
    out.reserve(residents_[i].history.size());
    for (std::size_t k = 0; k < residents_[i].history.size(); ++k)
        out.push_back({t0_ + static_cast<Timestamp>(k) * dt_, residents_[i].history[k]});
    return out;
}

std::vector<std::pair<EvId, PowerKw>> HouseholdTracker::active_set(Timestamp t) const {
    std::vector<std::pair<EvId, PowerKw>> out;
    auto view = frontier_view();
    long idx = index_for(t);
    for (std::size_t i = 0; i < residents_.size(); ++i) {
        int st = 0;
        if (idx >= 0)
            st = idx <= finalized_ ? residents_[i].history[idx] : view[i].state;
        if (st == 1)
            out.emplace_back(residents_[i].ev, view[i].state == 1
                                                   ? view[i].magnitude
                                                   : event_magnitude(residents_[i]));
    }
    return out;
}

void HouseholdTracker::note_reservation(const EvId& ev, Direction dir, Timestamp window_start,
                                        Timestamp window_end) {
    int i = index_of(ev);
    if (i < 0) throw ConfigError("household tracker: unknown EV " + ev);
    residents_[i].dir = dir;
    residents_[i].res_start = window_start;
    residents_[i].res_end = window_end;
}

// ---------------------------------------------------------------------------
// PhysicalStateStore
// ---------------------------------------------------------------------------

PhysicalStateStore::PhysicalStateStore(std::span<const EvPhysical> evs, DetectionParams params,
                                       EfficiencyParams eff, Timestamp dt_ms)
    : params_(params), eff_(eff) {
    std::map<HouseholdId, std::vector<EvPhysical>> grouped;
    for (const EvPhysical& e : evs) {
        grouped[e.household].push_back(e);
        home_[e.ev] = e.household;
    }
    for (auto& [hh, list] : grouped)
        trackers_.emplace(hh, HouseholdTracker(hh, std::move(list), params_, eff_, dt_ms));
}

const HouseholdTracker& PhysicalStateStore::tracker_for(const EvId& ev) const {
    auto it = home_.find(ev);
    if (it == home_.end()) throw ConfigError("physical store: unknown EV " + ev);
    return trackers_.at(it->second);
}

void PhysicalStateStore::ingest(const LoadSample& sample) {
    std::unique_lock lock(mu_);
    auto it = trackers_.find(sample.household);
    // Households without resident EVs cannot affect any verdict.
    if (it == trackers_.end()) return;
    it->second.ingest(sample);
}

void PhysicalStateStore::note_reservation(const EvId& ev, Direction dir, Timestamp window_start,
                                          Timestamp window_end) {
    std::unique_lock lock(mu_);
    auto it = home_.find(ev);
    if (it == home_.end()) throw ConfigError("physical store: unknown EV " + ev);
    trackers_.at(it->second).note_reservation(ev, dir, window_start, window_end);
}

void PhysicalStateStore::note_reported(const EvId& ev, Timestamp t, PowerKw kw) {
    std::unique_lock lock(mu_);
    reported_[ev] = Report{t, kw};
}

int PhysicalStateStore::state_at(const EvId& ev, Timestamp t) const {
    std::shared_lock lock(mu_);
    return tracker_for(ev).state_at(ev, t);
}

SteadyStateBand PhysicalStateStore::band_for(const EvId& ev) const {
    std::shared_lock lock(mu_);
    return SteadyStateBand::around(tracker_for(ev).expected_magnitude(ev),
                                   params_.band_halfwidth_kw);
}

ChargeStateSeries PhysicalStateStore::finalized_series(const EvId& ev) const {
    std::shared_lock lock(mu_);
    return tracker_for(ev).finalized_series(ev);
}

bool PhysicalStateStore::knows(const EvId& ev) const {
    std::shared_lock lock(mu_);
    return home_.count(ev) > 0;
}

bool PhysicalStateStore::validate(const EvId& ev, Timestamp t, PowerKw reported,
                                  bool first_packet) const {
    std::shared_lock lock(mu_);
    const HouseholdTracker& tracker = tracker_for(ev);
    if (tracker.state_at(ev, t) != 1) return false;

    const PowerKw hw = params_.band_halfwidth_kw;
    SteadyStateBand own = SteadyStateBand::around(tracker.expected_magnitude(ev), hw);
    if (reported < own.min_kw) return first_packet;

    auto active = tracker.active_set(t);
    if (active.size() <= 1) return reported <= own.max_kw;

    // Several co-resident EVs are active: the aggregate can only confirm
    // their total, so the sum of the latest reports is held against the band
    // around the summed magnitudes.
    double sum = 0.0, expected = 0.0;
    for (const auto& [oev, mag] : active) {
        expected += mag;
        if (oev == ev) {
            sum += reported;
            continue;
        }
        auto rep = reported_.find(oev);
        auto since = tracker.active_since(oev);
        if (rep != reported_.end() && since && rep->second.t >= *since)
            sum += rep->second.kw;
        else
            sum += mag;  // no report yet this run: presume nominal draw
    }
    return SteadyStateBand::around(expected, hw).contains(sum);
}

}  // namespace v2g
