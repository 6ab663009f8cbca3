#include "v2g/protocol.hpp"

#include <fstream>
#include <sstream>

namespace v2g {

const char* to_string(Phase p) {
    switch (p) {
        case Phase::NotSubscribed: return "NotSubscribed";
        case Phase::Reserving: return "Reserving";
        case Phase::Reserved: return "Reserved";
        case Phase::ActiveCharging: return "ActiveCharging";
        case Phase::ActiveDischarging: return "ActiveDischarging";
    }
    return "?";
}

std::optional<Phase> phase_from_string(const std::string& s) {
    for (Phase p : {Phase::NotSubscribed, Phase::Reserving, Phase::Reserved,
                    Phase::ActiveCharging, Phase::ActiveDischarging})
        if (s == to_string(p)) return p;
    return std::nullopt;
}

TransitionTable TransitionTable::standard() {
    TransitionTable t;
    t.set(Phase::NotSubscribed, MessageKind::FlowReservationRequest, Phase::Reserving);
    t.set(Phase::NotSubscribed, MessageKind::PricingFetch, Phase::NotSubscribed);
    t.set(Phase::NotSubscribed, MessageKind::LoadControlFetch, Phase::NotSubscribed);

    t.set(Phase::Reserving, MessageKind::FlowReservationResponse, Phase::Reserved);

    t.set(Phase::Reserved, MessageKind::FlowReservationCancel, Phase::NotSubscribed);
    t.set(Phase::Reserved, MessageKind::FlowReservationListFetch, Phase::Reserved);
    t.set(Phase::Reserved, MessageKind::PowerStatusUpdate, Phase::ActiveCharging);

    for (Phase a : {Phase::ActiveCharging, Phase::ActiveDischarging}) {
        t.set(a, MessageKind::PowerStatusUpdate, a);
        t.set(a, MessageKind::FlowReservationListFetch, a);
        t.set(a, MessageKind::FlowReservationListResponse, a);
        t.set(a, MessageKind::FlowReservationCancel, Phase::NotSubscribed);
    }
    return t;
}

TransitionTable TransitionTable::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open transition table: " + path);
    TransitionTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string ph, kd, nx;
        if (!(ss >> ph)) continue;  // blank line
        if (!(ss >> kd >> nx))
            throw ConfigError("transition table line " + std::to_string(lineno) +
                              ": expected \"phase kind next-phase\"");
        auto phase = phase_from_string(ph);
        auto kind = kind_from_string(kd);
        auto next = phase_from_string(nx);
        if (!phase || !kind || !next)
            throw ConfigError("transition table line " + std::to_string(lineno) +
                              ": unknown token");
        t.set(*phase, *kind, *next);
    }
    if (t.size() == 0) throw ConfigError("transition table is empty: " + path);
    return t;
}

std::optional<Phase> TransitionTable::next(Phase phase, MessageKind kind) const {
    auto it = map_.find({phase, kind});
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

void TransitionTable::set(Phase phase, MessageKind kind, Phase next) {
    map_[{phase, kind}] = next;
}

StepResult advance(const AggregatorState& state, const Packet& packet,
                   const TransitionTable& table, const ProtocolConfig& cfg) {
    const StepResult rejected{state, VerdictClass::UnexpectedSequence};

    auto next = table.next(state.phase, packet.kind);
    if (!next) return rejected;
    // Mismatched payload does not match the expected payload in this state.
    if (!payload_matches_kind(packet)) return rejected;

    AggregatorState out = state;
    out.phase = *next;
    out.last_arrival = packet.arrival;

    switch (packet.kind) {
        case MessageKind::FlowReservationResponse: {
            const auto& r = std::get<FlowReservation>(packet.payload);
            if (!r.valid(cfg.min_rated_kw)) return rejected;
            out.reservation = r;
            break;
        }
        case MessageKind::FlowReservationListResponse: {
            const auto& r = std::get<FlowReservation>(packet.payload);
            if (!r.valid(cfg.min_rated_kw)) return rejected;
            out.reservation = r;  // the grid may have updated the window
            break;
        }
        case MessageKind::PowerStatusUpdate: {
            if (state.phase == Phase::Reserved) {
                // Updates begin with the subscription window; earlier ones are
                // not part of any valid sequence.
                if (!state.reservation) return rejected;
                if (packet.arrival < state.reservation->window_start) return rejected;
                if (is_active(*next) && state.reservation->direction == Direction::Discharge)
                    out.phase = Phase::ActiveDischarging;
            }
            break;
        }
        case MessageKind::FlowReservationCancel:
            out.reservation.reset();
            break;
        default:
            break;
    }
    if (!is_active(out.phase) && out.phase != Phase::Reserved) out.reservation.reset();
    return {out, VerdictClass::Benign};
}

AggregatorState idle_timeout(const AggregatorState& state, Timestamp now,
                             const ProtocolConfig& cfg) {
    if (!state.last_arrival) return state;
    if (now - *state.last_arrival <= cfg.idle_timeout_ms) return state;
    return AggregatorState{};
}

std::set<std::vector<MessageKind>> enumerate_valid_sequences(int depth,
                                                             const TransitionTable& table) {
    if (depth < 1 || depth > 12)
        throw BoundsError("enumerate_valid_sequences: depth must be in [1, 12]");

    std::set<std::vector<MessageKind>> out;
    std::vector<MessageKind> prefix;

    // DFS over the kind-level graph. At this abstraction the two active
    // phases admit the same kinds, so following the stored successor is
    // exact for the standard table.
    auto walk = [&](auto&& self, Phase phase, int remaining) -> void {
        if (remaining == 0) return;
        for (MessageKind k : kAllKinds) {
            auto next = table.next(phase, k);
            if (!next) continue;
            prefix.push_back(k);
            out.insert(prefix);
            self(self, *next, remaining - 1);
            prefix.pop_back();
        }
    };
    walk(walk, Phase::NotSubscribed, depth);
    return out;
}

std::set<std::vector<MessageKind>> enumerate_valid_sequences(int depth) {
    return enumerate_valid_sequences(depth, TransitionTable::standard());
}

std::vector<MessageKind> tracked_kinds(Phase p) {
    switch (p) {
        case Phase::NotSubscribed:
            return {MessageKind::PricingFetch, MessageKind::LoadControlFetch};
        case Phase::Reserving:
            return {};
        case Phase::Reserved:
            return {MessageKind::FlowReservationListFetch, MessageKind::PowerStatusUpdate};
        case Phase::ActiveCharging:
        case Phase::ActiveDischarging:
            return {MessageKind::PowerStatusUpdate, MessageKind::FlowReservationListFetch};
    }
    return {};
}

}  // namespace v2g
