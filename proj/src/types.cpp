#include "v2g/types.hpp"

#include <cmath>

namespace v2g {

const char* to_string(MessageKind k) {
    switch (k) {
        case MessageKind::FlowReservationRequest: return "FlowReservationRequest";
        case MessageKind::FlowReservationResponse: return "FlowReservationResponse";
        case MessageKind::FlowReservationCancel: return "FlowReservationCancel";
        case MessageKind::PowerStatusUpdate: return "PowerStatusUpdate";
        case MessageKind::FlowReservationListFetch: return "FlowReservationListFetch";
        case MessageKind::FlowReservationListResponse: return "FlowReservationListResponse";
        case MessageKind::PricingFetch: return "PricingFetch";
        case MessageKind::PricingResponse: return "PricingResponse";
        case MessageKind::LoadControlFetch: return "LoadControlFetch";
        case MessageKind::LoadControlResponse: return "LoadControlResponse";
    }
    return "?";
}

std::optional<MessageKind> kind_from_string(const std::string& s) {
    for (MessageKind k : kAllKinds)
        if (s == to_string(k)) return k;
    return std::nullopt;
}

const char* to_string(Direction d) {
    return d == Direction::Charge ? "charge" : "discharge";
}

std::optional<Direction> direction_from_string(const std::string& s) {
    if (s == "charge") return Direction::Charge;
    if (s == "discharge") return Direction::Discharge;
    return std::nullopt;
}

bool FlowReservation::valid(PowerKw min_rated_kw) const {
    return !ev.empty() && window_start >= 0 && window_start < window_end &&
           std::isfinite(rated_kw) && rated_kw >= min_rated_kw;
}

const std::string& ev_of(const Packet& p) {
    return is_response(p.kind) ? p.dst : p.src;
}

bool payload_matches_kind(const Packet& p) {
    switch (p.kind) {
        case MessageKind::PowerStatusUpdate:
            return std::holds_alternative<PowerReport>(p.payload);
        case MessageKind::FlowReservationResponse:
        case MessageKind::FlowReservationListResponse:
            return std::holds_alternative<FlowReservation>(p.payload);
        default:
            return std::holds_alternative<std::monostate>(p.payload);
    }
}

const char* to_string(VerdictClass c) {
    switch (c) {
        case VerdictClass::Benign: return "benign";
        case VerdictClass::UnexpectedSequence: return "unexpected_sequence";
        case VerdictClass::InconsistentFrequency: return "inconsistent_frequency";
        case VerdictClass::InvalidSubscription: return "invalid_subscription";
        case VerdictClass::InconsistentPower: return "inconsistent_power";
        case VerdictClass::UnknownSource: return "unknown_source";
    }
    return "?";
}

std::optional<VerdictClass> verdict_from_string(const std::string& s) {
    for (VerdictClass c : {VerdictClass::Benign, VerdictClass::UnexpectedSequence,
                           VerdictClass::InconsistentFrequency, VerdictClass::InvalidSubscription,
                           VerdictClass::InconsistentPower, VerdictClass::UnknownSource})
        if (s == to_string(c)) return c;
    return std::nullopt;
}

const char* to_string(AttackKind k) {
    switch (k) {
        case AttackKind::OverReport: return "over_report";
        case AttackKind::UnderReport: return "under_report";
        case AttackKind::OutOfSequence: return "out_of_sequence";
        case AttackKind::BeyondSubscription: return "beyond_subscription";
        case AttackKind::WrongPeriodicity: return "wrong_periodicity";
    }
    return "?";
}

std::optional<AttackKind> attack_from_string(const std::string& s) {
    for (AttackKind k : kAllAttacks)
        if (s == to_string(k)) return k;
    return std::nullopt;
}

}  // namespace v2g
