#ifndef V2G_VALIDATORS_HPP
#define V2G_VALIDATORS_HPP

#include <map>
#include <optional>

#include "v2g/types.hpp"

namespace v2g {

// Nominal periods of the periodic kinds plus the shared jitter tolerance.
// The real standards fix these values; here they are configuration.
struct PeriodicSchedule {
    Timestamp power_status_ms = 60'000;
    Timestamp reservation_list_ms = 300'000;
    Timestamp pricing_ms = 900'000;
    Timestamp load_control_ms = 900'000;
    double tolerance_fraction = 0.10;  // in [0, 1)

    Timestamp nominal_period(MessageKind k) const;  // ContractError on non-periodic kinds

    // Closed acceptance interval for an inter-arrival gap, in integer ms.
    Timestamp gap_min(MessageKind k) const;
    Timestamp gap_max(MessageKind k) const;

    bool operator==(const PeriodicSchedule&) const = default;
};

// Message frequency validation. Only the time elapsed between two
// occurrences matters, never absolute time, so aggregator and EV clocks need
// no synchronization. The first occurrence anchors the phase. An anomalous
// packet is dropped upstream, so it never advances last_arrival.
class FrequencyTracker {
  public:
    FrequencyTracker() = default;
    explicit FrequencyTracker(PeriodicSchedule schedule) : schedule_(schedule) {}

    // Check and, on Benign, record the arrival.
    Verdict check(const EvId& ev, MessageKind kind, Timestamp arrival);

    // Check without recording; commit() applies the update separately so a
    // caller can withhold it until every other validation passed.
    VerdictClass peek(const EvId& ev, MessageKind kind, Timestamp arrival) const;
    void commit(const EvId& ev, MessageKind kind, Timestamp arrival);

    void clear(const EvId& ev);
    std::optional<Timestamp> last_arrival(const EvId& ev, MessageKind kind) const;
    const PeriodicSchedule& schedule() const { return schedule_; }

    bool operator==(const FrequencyTracker&) const = default;

  private:
    PeriodicSchedule schedule_;
    std::map<std::pair<EvId, MessageKind>, Timestamp> last_;
};

// Subscription period validation. Holds the current reservation per EV as
// told by the most recent FlowReservationResponse / ListResponse; power
// status updates must fall inside the window (closed at both ends).
class ReservationStore {
  public:
    ReservationStore() = default;
    explicit ReservationStore(PowerKw min_rated_kw) : min_rated_kw_(min_rated_kw) {}

    // Record the reservation carried by a response packet, replacing any
    // prior one for that EV. Returns false (store unchanged) when the
    // reservation violates its invariants. Wrong packet kind is a contract
    // violation.
    bool update(const Packet& packet);

    // PowerStatusUpdate only: Benign iff a reservation exists and the
    // arrival lies within [window_start, window_end].
    Verdict check_subscription(const Packet& packet) const;

    std::optional<FlowReservation> get(const EvId& ev) const;
    void erase(const EvId& ev);

    bool operator==(const ReservationStore&) const = default;

  private:
    PowerKw min_rated_kw_ = 3.0;
    std::map<EvId, FlowReservation> current_;
};

}  // namespace v2g

#endif  // V2G_VALIDATORS_HPP
