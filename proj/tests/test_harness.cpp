#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "v2g/config.hpp"
#include "v2g/datagen.hpp"
#include "v2g/harness.hpp"

using namespace v2g;

namespace {

Scenario small_scenario(std::uint64_t seed) {
    SynthParams p;
    p.n_evs = 6;
    p.n_households = 2;
    p.hours = 10.0;
    p.seed = seed;
    return synth_scenario(p);
}

}  // namespace

TEST_CASE("accuracy cross-tab basics") {
    std::vector<Label> labels = {std::nullopt, std::nullopt, AttackKind::OverReport,
                                 AttackKind::WrongPeriodicity};
    std::vector<VerdictClass> verdicts = {VerdictClass::Benign, VerdictClass::Benign,
                                          VerdictClass::Benign,
                                          VerdictClass::InconsistentFrequency};
    AccuracyStats a = compute_accuracy(verdicts, labels);
    CHECK(a.false_positives == 0);
    CHECK(a.per_class.at(AttackKind::OverReport).injected == 1);
    CHECK(a.per_class.at(AttackKind::OverReport).false_negatives == 1);  // judged benign
    CHECK(a.per_class.at(AttackKind::OverReport).misclassified == 0);
    CHECK(a.per_class.at(AttackKind::WrongPeriodicity).detected == 1);
    CHECK(a.per_class.at(AttackKind::WrongPeriodicity).false_negatives == 0);
}

TEST_CASE("a wrong anomaly class counts as a miss and is reported separately") {
    std::vector<Label> labels = {AttackKind::WrongPeriodicity};
    std::vector<VerdictClass> verdicts = {VerdictClass::UnexpectedSequence};
    AccuracyStats a = compute_accuracy(verdicts, labels);
    const ClassStats& cs = a.per_class.at(AttackKind::WrongPeriodicity);
    CHECK(cs.false_negatives == 1);
    CHECK(cs.misclassified == 1);
    CHECK(cs.detected == 0);
}

TEST_CASE("benign packets flagged by anything are false positives") {
    std::vector<Label> labels = {std::nullopt};
    std::vector<VerdictClass> verdicts = {VerdictClass::UnknownSource};
    CHECK(compute_accuracy(verdicts, labels).false_positives == 1);
}

TEST_CASE("misaligned lengths are rejected") {
    std::vector<Label> labels = {std::nullopt};
    std::vector<VerdictClass> verdicts;
    CHECK_THROWS_AS(compute_accuracy(verdicts, labels), ValidationError);
}

TEST_CASE("degenerate latency distribution") {
    std::vector<std::int64_t> d(1000, 14'000);
    LatencyStats s = measure_latency(d);
    CHECK(s.mean_us == doctest::Approx(14'000));
    CHECK(s.max_us == 14'000);
    CHECK(s.p999_us == 14'000);
    CHECK(s.count == 1000);
}

TEST_CASE("nearest-rank percentile matches the sort-and-index oracle") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::int64_t> d(1, 1'000'000);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::int64_t> v;
        std::size_t n = 1000 + rng() % 5000;
        for (std::size_t i = 0; i < n; ++i) v.push_back(d(rng));
        LatencyStats s = measure_latency(v);
        std::vector<std::int64_t> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        std::size_t rank = static_cast<std::size_t>(std::ceil(0.999 * double(n)));
        CHECK(s.p999_us == sorted[rank - 1]);
        CHECK(s.max_us == sorted.back());
    }
}

TEST_CASE("too few samples for a 99.9th percentile is an error") {
    std::vector<std::int64_t> d(999, 5);
    CHECK_THROWS_AS(measure_latency(d), InsufficientDataError);
}

TEST_CASE("a clean scenario runs with zero false positives") {
    Scenario s = small_scenario(21);
    LabeledTrace t = generate_packet_trace(s);
    std::vector<VerdictRecord> records;
    RunReport r = run_simulation(s, t, EngineConfig{}, RunOptions{}, &records);
    CHECK(r.accuracy.false_positives == 0);
    CHECK(r.packets == t.packets.size());
    CHECK(records.size() == t.packets.size());
    CHECK(r.ev_count == 6);
    if (r.has_latency) CHECK(r.latency.count == t.packets.size());
}

TEST_CASE("injected out-of-sequence packets are all dropped with the right class") {
    Scenario s = small_scenario(22);
    LabeledTrace t = generate_packet_trace(s);
    AttackSpec spec{AttackKind::OutOfSequence, 25, 1.0, 0.5, 4};
    LabeledTrace attacked = inject_attack(t, spec);
    RunReport r = run_simulation(s, attacked, EngineConfig{}, RunOptions{false});
    const ClassStats& cs = r.accuracy.per_class.at(AttackKind::OutOfSequence);
    CHECK(cs.injected == 25);
    CHECK(cs.detected == 25);
    CHECK(cs.false_negatives == 0);
}

TEST_CASE("replaying the verdict records reproduces the report counts") {
    Scenario s = small_scenario(23);
    LabeledTrace t = generate_packet_trace(s);
    LabeledTrace attacked = inject_attack(t, {AttackKind::BeyondSubscription, 3, 1.0, 0.5, 6});
    std::vector<VerdictRecord> records;
    RunReport r = run_simulation(s, attacked, EngineConfig{}, RunOptions{false}, &records);

    std::stringstream ss;
    write_verdicts(ss, records, false);
    auto replayed = read_verdicts(ss);
    AccuracyStats again = compute_accuracy(replayed, attacked.labels);
    CHECK(again == r.accuracy);
}

TEST_CASE("config inconsistency fails before any processing") {
    Scenario s = small_scenario(24);
    LabeledTrace t = generate_packet_trace(s);
    s.evs.pop_back();  // an EV present in the trace vanishes from the scenario
    CHECK_THROWS_AS(run_simulation(s, t, EngineConfig{}, RunOptions{false}), ValidationError);

    Scenario s2 = small_scenario(24);
    LabeledTrace t2 = generate_packet_trace(s2);
    t2.labels.pop_back();
    CHECK_THROWS_AS(run_simulation(s2, t2, EngineConfig{}, RunOptions{false}), ValidationError);
}

TEST_CASE("report json round-trips and renders") {
    Scenario s = small_scenario(25);
    LabeledTrace t = generate_packet_trace(s);
    RunReport r = run_simulation(s, t, EngineConfig{}, RunOptions{});
    RunReport rt = report_from_json(report_to_json(r));
    CHECK(rt.packets == r.packets);
    CHECK(rt.accuracy == r.accuracy);
    CHECK(rt.has_latency == r.has_latency);
    if (r.has_latency) {
        CHECK(rt.latency.p999_us == r.latency.p999_us);
        CHECK(rt.within_2s_budget == r.within_2s_budget);
    }
    CHECK(report_to_text(r).find("false positives") != std::string::npos);
}

TEST_CASE("engine config parses from key-value text") {
    LoadedConfig cfg = parse_config(
        "pool_size = 32\n"
        "tolerance_fraction = 0.2\n"
        "# comment\n"
        "band_halfwidth_kw = 0.4\n"
        "constant_charging_minutes = 90\n");
    CHECK(cfg.engine.pool_size == 32);
    CHECK(cfg.engine.schedule.tolerance_fraction == 0.2);
    CHECK(cfg.engine.detection.band_halfwidth_kw == 0.4);
    CHECK(cfg.engine.detection.constant_charging_ms == 90 * 60'000);
    CHECK_FALSE(cfg.transition_table_path.has_value());

    CHECK_THROWS_AS(parse_config("no_such_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("pool_size = zero\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("tolerance_fraction = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("pricing_period_ms = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("idle_timeout_ms = -5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("charging_efficiency = 1.3\n"), ConfigError);

    LoadedConfig defaults = parse_config(default_config_text());
    CHECK(defaults.engine.pool_size == EngineConfig{}.pool_size);
}
