#ifndef V2G_PROTOCOL_HPP
#define V2G_PROTOCOL_HPP

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "v2g/types.hpp"

namespace v2g {

// Principal sub-states of the per-EV aggregator state machine.
enum class Phase { NotSubscribed, Reserving, Reserved, ActiveCharging, ActiveDischarging };

const char* to_string(Phase p);
std::optional<Phase> phase_from_string(const std::string& s);

constexpr bool is_active(Phase p) {
    return p == Phase::ActiveCharging || p == Phase::ActiveDischarging;
}

struct ProtocolConfig {
    Timestamp idle_timeout_ms = 1'800'000;  // 30 min
    PowerKw min_rated_kw = 3.0;             // EV demand floor
};

// Position of one EV's machine. A reservation is held exactly in
// Reserved/ActiveCharging/ActiveDischarging.
struct AggregatorState {
    Phase phase = Phase::NotSubscribed;
    std::optional<FlowReservation> reservation;
    std::optional<Timestamp> last_arrival;  // last accepted packet, drives idle reset

    bool operator==(const AggregatorState&) const = default;
};

// Deterministic (phase, kind) -> next phase map. Missing entries reject.
// The stored successor for (Reserved, PowerStatusUpdate) is ActiveCharging;
// advance() redirects it to ActiveDischarging when the reservation says so.
class TransitionTable {
  public:
    // Built-in default machine:
    //   NotSubscribed: FlowReservationRequest -> Reserving,
    //                  PricingFetch / LoadControlFetch -> NotSubscribed
    //   Reserving:     FlowReservationResponse -> Reserved
    //   Reserved:      FlowReservationCancel -> NotSubscribed,
    //                  FlowReservationListFetch -> Reserved,
    //                  PowerStatusUpdate (at/after window start) -> Active*
    //   Active*:       PowerStatusUpdate / FlowReservationListFetch /
    //                  FlowReservationListResponse -> same phase,
    //                  FlowReservationCancel -> NotSubscribed
    static TransitionTable standard();

    // Whole-table replacement from a file of "phase kind next-phase" lines
    // ('#' comments allowed). Absent pairs reject.
    static TransitionTable from_file(const std::string& path);

    std::optional<Phase> next(Phase phase, MessageKind kind) const;
    void set(Phase phase, MessageKind kind, Phase next);
    std::size_t size() const { return map_.size(); }

  private:
    std::map<std::pair<Phase, MessageKind>, Phase> map_;
};

struct StepResult {
    AggregatorState state;  // successor on Benign, the unchanged input otherwise
    VerdictClass verdict = VerdictClass::Benign;
};

// Message sequence validation. Rejection never mutates state: a dropped
// packet must behave as if it never arrived. The two periodic sequences
// running in an active phase interleave freely; order between them is not
// constrained here.
StepResult advance(const AggregatorState& state, const Packet& packet,
                   const TransitionTable& table, const ProtocolConfig& cfg);

// Resets to NotSubscribed once the gap since the last accepted packet
// exceeds the idle timeout (strictly greater). No-op otherwise.
AggregatorState idle_timeout(const AggregatorState& state, Timestamp now,
                             const ProtocolConfig& cfg);

// Every kind-sequence of length 1..depth accepted from NotSubscribed,
// including all interleavings of the parallel periodic kinds. Serves as the
// independent oracle for advance. depth must be in [1, 12].
std::set<std::vector<MessageKind>> enumerate_valid_sequences(int depth,
                                                             const TransitionTable& table);
std::set<std::vector<MessageKind>> enumerate_valid_sequences(int depth);

// Periodic kinds whose inter-arrival gaps are tracked in a given phase.
std::vector<MessageKind> tracked_kinds(Phase p);

}  // namespace v2g

#endif  // V2G_PROTOCOL_HPP
