#include "v2g/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace v2g {

using ordered_json = nlohmann::ordered_json;

AccuracyStats compute_accuracy(std::span<const VerdictClass> verdicts,
                               std::span<const Label> labels) {
    if (verdicts.size() != labels.size())
        throw ValidationError("compute_accuracy: verdicts and labels misaligned");
    AccuracyStats out;
    for (AttackKind k : kAllAttacks) out.per_class[k];  // report all five classes
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        if (!labels[i]) {
            if (verdicts[i] != VerdictClass::Benign) ++out.false_positives;
            continue;
        }
        ClassStats& cs = out.per_class[*labels[i]];
        ++cs.injected;
        if (verdicts[i] == detecting_class(*labels[i])) {
            ++cs.detected;
        } else {
            ++cs.false_negatives;
            if (verdicts[i] != VerdictClass::Benign) ++cs.misclassified;
        }
    }
    return out;
}

AccuracyStats compute_accuracy(std::span<const VerdictRecord> records,
                               std::span<const Label> labels) {
    std::vector<VerdictClass> classes;
    classes.reserve(records.size());
    for (const VerdictRecord& r : records) classes.push_back(r.verdict);
    return compute_accuracy(classes, labels);
}

LatencyStats measure_latency(std::span<const std::int64_t> durations_us) {
    if (durations_us.size() < 1000)
        throw InsufficientDataError("measure_latency: need at least 1000 samples");
    LatencyStats out;
    out.count = durations_us.size();
    double sum = 0.0;
    for (std::int64_t d : durations_us) sum += static_cast<double>(d);
    out.mean_us = sum / static_cast<double>(out.count);
    std::vector<std::int64_t> sorted(durations_us.begin(), durations_us.end());
    std::sort(sorted.begin(), sorted.end());
    out.max_us = sorted.back();
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(0.999 * static_cast<double>(out.count)));  // nearest rank, 1-based
    out.p999_us = sorted[rank - 1];
    return out;
}

std::string report_to_json(const RunReport& r) {
    ordered_json j;
    j["packets"] = r.packets;
    j["ev_count"] = r.ev_count;
    j["wall_ms"] = r.wall_ms;
    j["false_positives"] = r.accuracy.false_positives;
    ordered_json pc;
    for (const auto& [kind, cs] : r.accuracy.per_class) {
        ordered_json cj;
        cj["injected"] = cs.injected;
        cj["detected"] = cs.detected;
        cj["false_negatives"] = cs.false_negatives;
        cj["misclassified"] = cs.misclassified;
        pc[to_string(kind)] = cj;
    }
    j["per_class"] = pc;
    if (r.has_latency) {
        ordered_json lj;
        lj["count"] = r.latency.count;
        lj["mean_us"] = r.latency.mean_us;
        lj["max_us"] = r.latency.max_us;
        lj["p999_us"] = r.latency.p999_us;
        lj["within_2s_budget"] = r.within_2s_budget;
        lj["max_under_165ms"] = r.max_under_165ms;
        lj["mean_under_14ms"] = r.mean_under_14ms;
        j["latency"] = lj;
    }
    return j.dump(2);
}

RunReport report_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report: malformed JSON: ") + e.what());
    }
    RunReport r;
    r.packets = j.at("packets").get<std::size_t>();
    r.ev_count = j.at("ev_count").get<std::size_t>();
    r.wall_ms = j.at("wall_ms").get<std::int64_t>();
    r.accuracy.false_positives = j.at("false_positives").get<long>();
    for (const auto& [key, cj] : j.at("per_class").items()) {
        auto kind = attack_from_string(key);
        if (!kind) throw ParseError("report: unknown attack class " + key);
        ClassStats cs;
        cs.injected = cj.at("injected").get<long>();
        cs.detected = cj.at("detected").get<long>();
        cs.false_negatives = cj.at("false_negatives").get<long>();
        cs.misclassified = cj.at("misclassified").get<long>();
        r.accuracy.per_class[*kind] = cs;
    }
    if (j.contains("latency")) {
        const auto& lj = j.at("latency");
        r.has_latency = true;
        r.latency.count = lj.at("count").get<std::size_t>();
        r.latency.mean_us = lj.at("mean_us").get<double>();
        r.latency.max_us = lj.at("max_us").get<std::int64_t>();
        r.latency.p999_us = lj.at("p999_us").get<std::int64_t>();
        r.within_2s_budget = lj.at("within_2s_budget").get<bool>();
        r.max_under_165ms = lj.at("max_under_165ms").get<bool>();
        r.mean_under_14ms = lj.at("mean_under_14ms").get<bool>();
    }
    return r;
}

std::string report_to_text(const RunReport& r) {
    std::ostringstream out;
    out << "packets processed : " << r.packets << '\n';
    out << "EVs observed      : " << r.ev_count << '\n';
    out << "wall time         : " << r.wall_ms << " ms\n";
    out << "false positives   : " << r.accuracy.false_positives << '\n';
    for (const auto& [kind, cs] : r.accuracy.per_class) {
        out << "  " << to_string(kind) << ": injected=" << cs.injected
            << " detected=" << cs.detected << " false_negatives=" << cs.false_negatives
            << " misclassified=" << cs.misclassified << '\n';
    }
    if (r.has_latency) {
        out << "inspection latency: mean=" << r.latency.mean_us / 1000.0
            << " ms, p99.9=" << r.latency.p999_us / 1000.0
            << " ms, max=" << r.latency.max_us / 1000.0 << " ms over " << r.latency.count
            << " packets\n";
        out << "  within 2 s network budget: " << (r.within_2s_budget ? "yes" : "NO") << '\n';
        out << "  max under 0.165 s: " << (r.max_under_165ms ? "yes" : "no")
            << ", mean under 0.014 s: " << (r.mean_under_14ms ? "yes" : "no") << '\n';
    }
    return out.str();
}

void save_report_file(const std::string& path, const RunReport& r) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write report file: " + path);
    f << report_to_json(r) << '\n';
}

RunReport load_report_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open report file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return report_from_json(ss.str());
}

RunReport run_simulation(const Scenario& scenario, const LabeledTrace& trace,
                         const EngineConfig& config, const RunOptions& options,
                         std::vector<VerdictRecord>* records_out,
                         std::string* final_state_out) {
    scenario.validate();
    if (trace.packets.size() != trace.labels.size())
        throw ValidationError("run: labels misaligned with trace");

    EvRegistry registry = scenario.registry();
    std::set<HouseholdId> households;
    for (const HouseholdSpec& h : scenario.households) households.insert(h.id);
    for (const Packet& p : trace.packets)
        if (!registry.count(ev_of(p)))
            throw ValidationError("run: EV in trace absent from scenario: " + ev_of(p));
    for (const LoadSample& s : trace.load)
        if (!households.count(s.household))
            throw ValidationError("run: household in load absent from scenario: " + s.household);
    for (std::size_t i = 1; i < trace.packets.size(); ++i)
        if (trace.packets[i].arrival < trace.packets[i - 1].arrival)
            throw ValidationError("run: trace not ordered by arrival time");

    Engine engine(config, registry, scenario.dt_ms, options.table);

    const auto wall_start = std::chrono::steady_clock::now();
    std::size_t next_sample = 0;
    auto feed_load = [&](Timestamp upto) {
        while (next_sample < trace.load.size() && trace.load[next_sample].t <= upto)
            engine.observe_load(trace.load[next_sample++]);
    };
    for (const Packet& p : trace.packets) {
        feed_load(p.arrival);  // simultaneity: samples at t are visible to packets at t
        engine.process(p);
    }

    RunReport report;
    report.packets = trace.packets.size();
    report.ev_count = engine.bound_count();
    // Deterministic runs omit every wall-clock-derived field.
    report.wall_ms = options.with_latency
                         ? std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - wall_start)
                               .count()
                         : 0;
    report.accuracy = compute_accuracy(engine.records(), trace.labels);

    if (engine.records().size() != trace.packets.size())
        throw ValidationError("run: a packet was processed without a duration record");

    if (options.with_latency && trace.packets.size() >= 1000) {
        std::vector<std::int64_t> durations;
        durations.reserve(engine.records().size());
        for (const VerdictRecord& r : engine.records()) durations.push_back(r.inspect_us);
        report.latency = measure_latency(durations);
        report.has_latency = true;
        report.within_2s_budget =
            report.latency.max_us < 2'000'000 && report.latency.p999_us < 2'000'000;
        report.max_under_165ms = report.latency.max_us < 165'000;
        report.mean_under_14ms = report.latency.mean_us < 14'000.0;
    }

    if (records_out) *records_out = engine.records();
    if (final_state_out) *final_state_out = engine.state_fingerprint();
    return report;
}

}  // namespace v2g
