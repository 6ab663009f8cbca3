#ifndef V2G_TYPES_HPP
#define V2G_TYPES_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

namespace v2g {

// Milliseconds since epoch. Traces are ordered non-decreasing by timestamp.
using Timestamp = std::int64_t;
// Signed kilowatts; negative means export (PV generation, discharge).
using PowerKw = double;
// Opaque network identity of an EV (stands in for an IP address).
using EvId = std::string;
using HouseholdId = std::string;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : Error { using Error::Error; };
struct ContractError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct BoundsError : Error { using Error::Error; };
struct CapacityError : Error { using Error::Error; };
struct IngestError : Error { using Error::Error; };
struct InsufficientDataError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };

enum class MessageKind {
    FlowReservationRequest,
    FlowReservationResponse,
    FlowReservationCancel,
    PowerStatusUpdate,
    FlowReservationListFetch,
    FlowReservationListResponse,
    PricingFetch,
    PricingResponse,
    LoadControlFetch,
    LoadControlResponse,
};

constexpr MessageKind kAllKinds[] = {
    MessageKind::FlowReservationRequest,  MessageKind::FlowReservationResponse,
    MessageKind::FlowReservationCancel,   MessageKind::PowerStatusUpdate,
    MessageKind::FlowReservationListFetch, MessageKind::FlowReservationListResponse,
    MessageKind::PricingFetch,            MessageKind::PricingResponse,
    MessageKind::LoadControlFetch,        MessageKind::LoadControlResponse,
};

// The four kinds sent on a fixed schedule. Each has a nominal period.
constexpr bool is_periodic(MessageKind k) {
    return k == MessageKind::PowerStatusUpdate || k == MessageKind::FlowReservationListFetch ||
           k == MessageKind::PricingFetch || k == MessageKind::LoadControlFetch;
}

// Responses travel aggregator -> EV; the EV is the packet's dst.
constexpr bool is_response(MessageKind k) {
    return k == MessageKind::FlowReservationResponse ||
           k == MessageKind::FlowReservationListResponse ||
           k == MessageKind::PricingResponse || k == MessageKind::LoadControlResponse;
}

const char* to_string(MessageKind k);
std::optional<MessageKind> kind_from_string(const std::string& s);

enum class Direction { Charge, Discharge };

const char* to_string(Direction d);
std::optional<Direction> direction_from_string(const std::string& s);

// A subscription window granted to one EV.
struct FlowReservation {
    EvId ev;
    Timestamp window_start = 0;
    Timestamp window_end = 0;
    Direction direction = Direction::Charge;
    PowerKw rated_kw = 0.0;  // positive

    // Semantic validity: well-ordered window, rated power at/above the floor.
    bool valid(PowerKw min_rated_kw) const;

    bool operator==(const FlowReservation&) const = default;
};

struct PowerReport {
    PowerKw kw = 0.0;
    bool operator==(const PowerReport&) const = default;
};

// One cyber message between an EV and the aggregator. Payload shape is
// determined by kind: PowerStatusUpdate carries a PowerReport,
// FlowReservationResponse / FlowReservationListResponse carry a
// FlowReservation, everything else is opaque.
struct Packet {
    std::string src;
    std::string dst;
    Timestamp arrival = 0;
    MessageKind kind = MessageKind::PricingFetch;
    std::variant<std::monostate, PowerReport, FlowReservation> payload;

    bool operator==(const Packet&) const = default;
};

// The EV an inspection instance should attribute this packet to: dst for
// aggregator->EV responses, src otherwise.
const std::string& ev_of(const Packet& p);

bool payload_matches_kind(const Packet& p);

enum class VerdictClass {
    Benign,
    UnexpectedSequence,     // message not valid in the current protocol state
    InconsistentFrequency,  // periodic message off its schedule
    InvalidSubscription,    // power activity outside the reserved window
    InconsistentPower,      // report contradicts the physical measurements
    UnknownSource,          // no inspection instance available
};

const char* to_string(VerdictClass c);
std::optional<VerdictClass> verdict_from_string(const std::string& s);

// Exactly one verdict is issued per inspected packet; the src/at/kind triple
// identifies the offending packet.
struct Verdict {
    VerdictClass cls = VerdictClass::Benign;
    EvId src;
    Timestamp at = 0;
    MessageKind kind = MessageKind::PricingFetch;

    bool benign() const { return cls == VerdictClass::Benign; }

    static Verdict of(VerdictClass cls, const Packet& p) {
        return Verdict{cls, ev_of(p), p.arrival, p.kind};
    }
};

// The five threat classes the engine is built to detect.
enum class AttackKind {
    OverReport,          // report more power than actually consumed
    UnderReport,         // report less power than actually consumed
    OutOfSequence,       // packets generated out of the expected sequence
    BeyondSubscription,  // charge/discharge beyond the subscription period
    WrongPeriodicity,    // periodic messages more or less frequent than expected
};

constexpr AttackKind kAllAttacks[] = {
    AttackKind::OverReport, AttackKind::UnderReport, AttackKind::OutOfSequence,
    AttackKind::BeyondSubscription, AttackKind::WrongPeriodicity,
};

const char* to_string(AttackKind k);
std::optional<AttackKind> attack_from_string(const std::string& s);

// Verdict class that detects a given attack.
constexpr VerdictClass detecting_class(AttackKind k) {
    switch (k) {
        case AttackKind::OverReport:
        case AttackKind::UnderReport: return VerdictClass::InconsistentPower;
        case AttackKind::OutOfSequence: return VerdictClass::UnexpectedSequence;
        case AttackKind::BeyondSubscription: return VerdictClass::InvalidSubscription;
        case AttackKind::WrongPeriodicity: return VerdictClass::InconsistentFrequency;
    }
    return VerdictClass::Benign;
}

// Per-packet ground truth; nullopt = benign.
using Label = std::optional<AttackKind>;

// Aggregated household load measurement (EVs included; may be negative under
// PV generation or discharge). Per household, samples are strictly
// increasing in t with uniform spacing.
struct LoadSample {
    HouseholdId household;
    Timestamp t = 0;
    PowerKw p = 0.0;
    bool operator==(const LoadSample&) const = default;
};

}  // namespace v2g

#endif  // V2G_TYPES_HPP
