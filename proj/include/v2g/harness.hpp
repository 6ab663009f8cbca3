#ifndef V2G_HARNESS_HPP
#define V2G_HARNESS_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

#include "v2g/datagen.hpp"
#include "v2g/engine.hpp"
#include "v2g/io.hpp"
#include "v2g/types.hpp"

namespace v2g {

struct ClassStats {
    long injected = 0;
    long detected = 0;          // right packet, right anomaly class
    long false_negatives = 0;   // injected - detected
    long misclassified = 0;     // flagged, but as the wrong class (subset of FN)
    bool operator==(const ClassStats&) const = default;
};

struct AccuracyStats {
    long false_positives = 0;  // benign-labeled packets with a non-benign verdict
    std::map<AttackKind, ClassStats> per_class;
    bool operator==(const AccuracyStats&) const = default;
};

// Cross-tab of verdicts against ground truth. Lengths must match.
AccuracyStats compute_accuracy(std::span<const VerdictClass> verdicts,
                               std::span<const Label> labels);
AccuracyStats compute_accuracy(std::span<const VerdictRecord> records,
                               std::span<const Label> labels);

struct LatencyStats {
    std::size_t count = 0;
    double mean_us = 0.0;
    std::int64_t max_us = 0;
    std::int64_t p999_us = 0;  // nearest-rank 99.9th percentile
    bool operator==(const LatencyStats&) const = default;
};

// Nearest-rank percentile over per-packet inspection durations; requires at
// least 1000 samples for the 99.9th percentile to mean anything.
LatencyStats measure_latency(std::span<const std::int64_t> durations_us);

struct RunReport {
    std::size_t packets = 0;
    std::size_t ev_count = 0;
    std::int64_t wall_ms = 0;
    AccuracyStats accuracy;
    bool has_latency = false;  // wall-clock stats are omitted in deterministic runs
    LatencyStats latency;
    bool within_2s_budget = false;   // p99.9 and max under the 2 s network latency floor
    bool max_under_165ms = false;    // tighter stretch marks, informational
    bool mean_under_14ms = false;
};

std::string report_to_json(const RunReport& r);
RunReport report_from_json(const std::string& text);
std::string report_to_text(const RunReport& r);
void save_report_file(const std::string& path, const RunReport& r);
RunReport load_report_file(const std::string& path);

struct RunOptions {
    bool with_latency = true;
    TransitionTable table = TransitionTable::standard();
};

// Stream a labeled trace through the engine: load samples become visible at
// their timestamps, packets are inspected in arrival order, and the verdicts
// are tallied against the labels. Inconsistent inputs (EVs or households
// missing from the scenario, misaligned labels) fail before any processing.
RunReport run_simulation(const Scenario& scenario, const LabeledTrace& trace,
                         const EngineConfig& config, const RunOptions& options = {},
                         std::vector<VerdictRecord>* records_out = nullptr,
                         std::string* final_state_out = nullptr);

}  // namespace v2g

#endif  // V2G_HARNESS_HPP
