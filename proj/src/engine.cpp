#include "v2g/engine.hpp"

#include <chrono>
#include <sstream>

namespace v2g {

namespace {

std::vector<EvPhysical> to_physical(const EvRegistry& registry) {
    std::vector<EvPhysical> out;
    out.reserve(registry.size());
    for (const auto& [ev, info] : registry)
        out.push_back({ev, info.household, info.rated_kw});
    return out;
}

}  // namespace

Engine::Engine(const EngineConfig& cfg, const EvRegistry& registry, Timestamp load_dt_ms,
               TransitionTable table)
    : cfg_(cfg),
      table_(std::move(table)),
      registry_(registry),
      physical_(to_physical(registry), cfg.detection, cfg.efficiency, load_dt_ms) {
    if (cfg_.pool_size < 1) throw ConfigError("engine: pool size must be >= 1");
    pool_.resize(static_cast<std::size_t>(cfg_.pool_size));
    for (Instance& ins : pool_) {
        ins.tracker = FrequencyTracker(cfg_.schedule);
        ins.store = ReservationStore(cfg_.protocol.min_rated_kw);
    }
}

void Engine::observe_load(const LoadSample& sample) { physical_.ingest(sample); }

void Engine::unbind(int idx) {
    Instance& ins = pool_[idx];
    if (ins.monitored) bound_.erase(*ins.monitored);
    ins.monitored.reset();
    ins.state = AggregatorState{};
    ins.tracker = FrequencyTracker(cfg_.schedule);
    ins.store = ReservationStore(cfg_.protocol.min_rated_kw);
    ins.first_power_packet_seen = false;
    ins.bound_at = 0;
}

int Engine::identify_instance(const Packet& packet) {
    const EvId& ev = ev_of(packet);
    auto it = bound_.find(ev);
    if (it != bound_.end()) return it->second;

    auto bind = [&](int i) {
        pool_[i].monitored = ev;
        pool_[i].bound_at = packet.arrival;
        bound_[ev] = i;
        return i;
    };
    for (int i = 0; i < static_cast<int>(pool_.size()); ++i)
        if (!pool_[i].monitored) return bind(i);

    // Pool exhausted: drop instances that have sat idle past the timeout.
    bool freed = false;
    for (int i = 0; i < static_cast<int>(pool_.size()); ++i) {
        const Instance& ins = pool_[i];
        Timestamp last = ins.state.last_arrival ? *ins.state.last_arrival : ins.bound_at;
        if (packet.arrival - last > cfg_.protocol.idle_timeout_ms) {
            unbind(i);
            freed = true;
        }
    }
    if (freed)
        for (int i = 0; i < static_cast<int>(pool_.size()); ++i)
            if (!pool_[i].monitored) return bind(i);
    return -1;
}

Verdict Engine::inspect(Instance& ins, const Packet& packet) {
    const EvId& ev = *ins.monitored;

    // Stage everything; nothing below commits unless the verdict is Benign.
    AggregatorState entry = idle_timeout(ins.state, packet.arrival, cfg_.protocol);
    const bool reset = !(entry == ins.state);

    StepResult step = advance(entry, packet, table_, cfg_.protocol);
    if (step.verdict != VerdictClass::Benign)
        return Verdict::of(step.verdict, packet);

    // A reset clears the trackers, so the packet re-anchors its kind.
    if (is_periodic(packet.kind) && !reset) {
        if (ins.tracker.peek(ev, packet.kind, packet.arrival) != VerdictClass::Benign)
            return Verdict::of(VerdictClass::InconsistentFrequency, packet);
    }

    if (packet.kind == MessageKind::PowerStatusUpdate) {
        Verdict sub = ins.store.check_subscription(packet);
        if (!sub.benign()) return sub;
        const auto& report = std::get<PowerReport>(packet.payload);
        if (!physical_.validate(ev, packet.arrival, report.kw, !ins.first_power_packet_seen))
            return Verdict::of(VerdictClass::InconsistentPower, packet);
    }

    // Benign: commit the idle reset, the transition, and the bookkeeping.
    if (reset) {
        ins.tracker.clear(ev);
        ins.store.erase(ev);
        ins.first_power_packet_seen = false;
    }
    if (step.state.phase != entry.phase) {
        ins.tracker.clear(ev);  // each phase run anchors its periodic kinds afresh
        if (step.state.phase == Phase::NotSubscribed) ins.store.erase(ev);
        if (step.state.phase == Phase::NotSubscribed || step.state.phase == Phase::Reserved)
            ins.first_power_packet_seen = false;
    }
    ins.state = step.state;
    if (is_periodic(packet.kind)) ins.tracker.commit(ev, packet.kind, packet.arrival);

    switch (packet.kind) {
        case MessageKind::FlowReservationResponse:
        case MessageKind::FlowReservationListResponse: {
            ins.store.update(packet);
            const auto& r = std::get<FlowReservation>(packet.payload);
            physical_.note_reservation(ev, r.direction, r.window_start, r.window_end);
            break;
        }
        case MessageKind::PowerStatusUpdate: {
            ins.first_power_packet_seen = true;
            physical_.note_reported(ev, packet.arrival, std::get<PowerReport>(packet.payload).kw);
            break;
        }
        default:
            break;
    }
    return Verdict::of(VerdictClass::Benign, packet);
}

Engine::Disposition Engine::process(const Packet& packet) {
    const auto t_start = std::chrono::steady_clock::now();
    Verdict verdict;
    int idx = identify_instance(packet);
    if (idx < 0)
        verdict = Verdict::of(VerdictClass::UnknownSource, packet);
    else
        verdict = inspect(pool_[idx], packet);
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(
                        std::chrono::steady_clock::now() - t_start)
                        .count();
    records_.push_back({packet.arrival, packet.src, packet.kind, verdict.cls, us});
    return {verdict.benign(), verdict};
}

std::string Engine::state_fingerprint() const {
    // Keyed by monitored EV so instance indices (dispatcher detail) do not
    // affect the comparison.
    std::ostringstream out;
    std::map<EvId, const Instance*> by_ev;
    for (const Instance& ins : pool_)
        if (ins.monitored) by_ev[*ins.monitored] = &ins;
    out << "bound=" << by_ev.size() << '\n';
    for (const auto& [ev, ins] : by_ev) {
        out << ev << " phase=" << to_string(ins->state.phase);
        if (ins->state.reservation) {
            const auto& r = *ins->state.reservation;
            out << " rsv=[" << r.window_start << ',' << r.window_end << ','
                << to_string(r.direction) << ',' << r.rated_kw << ']';
        }
        if (ins->state.last_arrival) out << " last=" << *ins->state.last_arrival;
        out << " first_seen=" << ins->first_power_packet_seen;
        for (MessageKind k : kAllKinds) {
            if (!is_periodic(k)) continue;
            if (auto t = ins->tracker.last_arrival(ev, k))
                out << ' ' << to_string(k) << '@' << *t;
        }
        if (auto r = ins->store.get(ev))
            out << " store=[" << r->window_start << ',' << r->window_end << ','
                << to_string(r->direction) << ',' << r->rated_kw << ']';
        out << '\n';
    }
    return out.str();
}

}  // namespace v2g
