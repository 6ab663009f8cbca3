#include "v2g/validators.hpp"

#include <cmath>

namespace v2g {

Timestamp PeriodicSchedule::nominal_period(MessageKind k) const {
    switch (k) {
        case MessageKind::PowerStatusUpdate: return power_status_ms;
        case MessageKind::FlowReservationListFetch: return reservation_list_ms;
        case MessageKind::PricingFetch: return pricing_ms;
        case MessageKind::LoadControlFetch: return load_control_ms;
        default:
            throw ContractError(std::string("not a periodic kind: ") + to_string(k));
    }
}

// Bounds rounded to whole ms so e.g. 60 s +/- 10% is exactly [54000, 66000].
Timestamp PeriodicSchedule::gap_min(MessageKind k) const {
    return std::llround(static_cast<double>(nominal_period(k)) * (1.0 - tolerance_fraction));
}

Timestamp PeriodicSchedule::gap_max(MessageKind k) const {
    return std::llround(static_cast<double>(nominal_period(k)) * (1.0 + tolerance_fraction));
}

VerdictClass FrequencyTracker::peek(const EvId& ev, MessageKind kind, Timestamp arrival) const {
    Timestamp lo = schedule_.gap_min(kind);  // also rejects non-periodic kinds
    Timestamp hi = schedule_.gap_max(kind);
    auto it = last_.find({ev, kind});
    if (it == last_.end()) return VerdictClass::Benign;  // first occurrence anchors
    Timestamp gap = arrival - it->second;
    return (gap >= lo && gap <= hi) ? VerdictClass::Benign : VerdictClass::InconsistentFrequency;
}

void FrequencyTracker::commit(const EvId& ev, MessageKind kind, Timestamp arrival) {
    last_[{ev, kind}] = arrival;
}

Verdict FrequencyTracker::check(const EvId& ev, MessageKind kind, Timestamp arrival) {
    VerdictClass cls = peek(ev, kind, arrival);
    if (cls == VerdictClass::Benign) commit(ev, kind, arrival);
    return Verdict{cls, ev, arrival, kind};
}

void FrequencyTracker::clear(const EvId& ev) {
    for (auto it = last_.begin(); it != last_.end();) {
        if (it->first.first == ev)
            it = last_.erase(it);
        else
            ++it;
    }
}

std::optional<Timestamp> FrequencyTracker::last_arrival(const EvId& ev, MessageKind kind) const {
    auto it = last_.find({ev, kind});
    if (it == last_.end()) return std::nullopt;
    return it->second;
}

bool ReservationStore::update(const Packet& packet) {
    if (packet.kind != MessageKind::FlowReservationResponse &&
        packet.kind != MessageKind::FlowReservationListResponse)
        throw ContractError(std::string("not a reservation-bearing kind: ") +
                            to_string(packet.kind));
    const auto* r = std::get_if<FlowReservation>(&packet.payload);
    if (!r || !r->valid(min_rated_kw_)) return false;
    current_[ev_of(packet)] = *r;
    return true;
}

Verdict ReservationStore::check_subscription(const Packet& packet) const {
    if (packet.kind != MessageKind::PowerStatusUpdate)
        throw ContractError(std::string("subscription check expects PowerStatusUpdate, got ") +
                            to_string(packet.kind));
    const EvId& ev = ev_of(packet);
    auto it = current_.find(ev);
    bool ok = it != current_.end() && packet.arrival >= it->second.window_start &&
              packet.arrival <= it->second.window_end;
    return Verdict{ok ? VerdictClass::Benign : VerdictClass::InvalidSubscription, ev,
                   packet.arrival, packet.kind};
}

std::optional<FlowReservation> ReservationStore::get(const EvId& ev) const {
    auto it = current_.find(ev);
    if (it == current_.end()) return std::nullopt;
    return it->second;
}

void ReservationStore::erase(const EvId& ev) { current_.erase(ev); }

}  // namespace v2g
