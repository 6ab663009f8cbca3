#ifndef V2G_ENGINE_HPP
#define V2G_ENGINE_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "v2g/io.hpp"
#include "v2g/physical.hpp"
#include "v2g/protocol.hpp"
#include "v2g/types.hpp"
#include "v2g/validators.hpp"

namespace v2g {

struct EngineConfig {
    int pool_size = 400;
    ProtocolConfig protocol;
    PeriodicSchedule schedule;
    DetectionParams detection;
    EfficiencyParams efficiency;
};

struct EvInfo {
    HouseholdId household;
    PowerKw rated_kw = 0.0;
    bool operator==(const EvInfo&) const = default;
};
// Every EV the engine may see, with its household and rated power.
using EvRegistry = std::map<EvId, EvInfo>;

// The anomaly detection engine: a fixed pool of per-EV inspection instances,
// dispatch by source identity, and the four-stage inspection pipeline
// (sequence, frequency, subscription, power). Anomalous packets are dropped
// and leave no footprint in any engine state; benign packets commit all
// their updates atomically.
class Engine {
  public:
    Engine(const EngineConfig& cfg, const EvRegistry& registry, Timestamp load_dt_ms,
           TransitionTable table = TransitionTable::standard());

    // Physical-side samples, in timestamp order. Packets inspect against the
    // charge states derivable from the samples observed so far.
    void observe_load(const LoadSample& sample);

    struct Disposition {
        bool forwarded = false;
        Verdict verdict;
    };

    // Dispatch + inspect + record. Forward on Benign, Drop otherwise.
    Disposition process(const Packet& packet);

    // Index of the instance monitoring this packet's EV, binding a free
    // instance on first contact; -1 when the pool is exhausted. Instances
    // idle past the timeout are unbound and become rebindable.
    int identify_instance(const Packet& packet);

    const std::vector<VerdictRecord>& records() const { return records_; }
    std::size_t bound_count() const { return bound_.size(); }

    // Deterministic dump of all inspection state keyed by monitored EV;
    // dropped packets must leave it untouched.
    std::string state_fingerprint() const;

    const PhysicalStateStore& physical() const { return physical_; }

  private:
    struct Instance {
        std::optional<EvId> monitored;
        AggregatorState state;
        FrequencyTracker tracker;
        ReservationStore store;
        bool first_power_packet_seen = false;
        Timestamp bound_at = 0;  // dispatcher metadata, not inspection state
    };

    Verdict inspect(Instance& ins, const Packet& packet);
    void unbind(int idx);

    EngineConfig cfg_;
    TransitionTable table_;
    EvRegistry registry_;
    PhysicalStateStore physical_;
    std::vector<Instance> pool_;
    std::map<EvId, int> bound_;
    std::vector<VerdictRecord> records_;
};

}  // namespace v2g

#endif  // V2G_ENGINE_HPP
