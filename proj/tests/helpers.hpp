#ifndef V2G_TEST_HELPERS_HPP
#define V2G_TEST_HELPERS_HPP

#include <string>
#include <vector>

#include "v2g/protocol.hpp"
#include "v2g/types.hpp"

namespace v2g::test {

inline Packet make(const EvId& ev, Timestamp t, MessageKind kind) {
    Packet p;
    p.kind = kind;
    p.arrival = t;
    if (is_response(kind)) {
        p.src = "aggregator";
        p.dst = ev;
    } else {
        p.src = ev;
        p.dst = "aggregator";
    }
    return p;
}

inline Packet psu(const EvId& ev, Timestamp t, PowerKw kw) {
    Packet p = make(ev, t, MessageKind::PowerStatusUpdate);
    p.payload = PowerReport{kw};
    return p;
}

inline Packet reservation(const EvId& ev, Timestamp t, MessageKind kind, Timestamp ws,
                          Timestamp we, Direction dir = Direction::Charge,
                          PowerKw rated = 6.0) {
    Packet p = make(ev, t, kind);
    p.payload = FlowReservation{ev, ws, we, dir, rated};
    return p;
}

// Realize a kind sequence as packets a benign EV could emit: responses carry
// an open-ended reservation from their own arrival, so the window-start
// guard never rejects a kind-level-valid sequence.
inline std::vector<Packet> concretize(const std::vector<MessageKind>& kinds,
                                      const EvId& ev = "ev1") {
    std::vector<Packet> out;
    Timestamp t = 1'000;
    for (MessageKind k : kinds) {
        switch (k) {
            case MessageKind::PowerStatusUpdate:
                out.push_back(psu(ev, t, 6.0));
                break;
            case MessageKind::FlowReservationResponse:
            case MessageKind::FlowReservationListResponse:
                out.push_back(reservation(ev, t, k, t, t + 86'400'000));
                break;
            default:
                out.push_back(make(ev, t, k));
                break;
        }
        t += 5'000;
    }
    return out;
}

inline bool accepts(const std::vector<MessageKind>& kinds, const TransitionTable& table,
                    const ProtocolConfig& cfg = {}) {
    AggregatorState state;
    for (const Packet& p : concretize(kinds)) {
        StepResult r = advance(state, p, table, cfg);
        if (r.verdict != VerdictClass::Benign) return false;
        state = r.state;
    }
    return true;
}

}  // namespace v2g::test

#endif
