#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "v2g/io.hpp"
#include "v2g/types.hpp"

using namespace v2g;

namespace {

bool throws_mentioning(const std::string& line, const std::string& needle) {
    try {
        parse_packet(line);
    } catch (const ParseError& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

Packet random_packet(std::mt19937_64& rng) {
    auto pick = [&](long lo, long hi) {
        return std::uniform_int_distribution<long>(lo, hi)(rng);
    };
    Packet p;
    p.kind = kAllKinds[pick(0, 9)];
    p.arrival = pick(0, 1'000'000'000);
    EvId ev = "ev" + std::to_string(pick(0, 99));
    if (is_response(p.kind)) {
        p.src = "aggregator";
        p.dst = ev;
    } else {
        p.src = ev;
        p.dst = "aggregator";
    }
    switch (p.kind) {
        case MessageKind::PowerStatusUpdate:
            p.payload = PowerReport{pick(1, 12'000) / 1000.0};
            break;
        case MessageKind::FlowReservationResponse:
        case MessageKind::FlowReservationListResponse: {
            Timestamp ws = pick(0, 500'000'000);
            p.payload = FlowReservation{ev, ws, ws + pick(1, 100'000'000),
                                        pick(0, 1) ? Direction::Charge : Direction::Discharge,
                                        pick(3000, 9000) / 1000.0};
            break;
        }
        default:
            break;
    }
    return p;
}

}  // namespace

TEST_CASE("parse_packet accepts a minimal well-formed record") {
    Packet p = parse_packet(R"({"src":"ev1","t":0,"kind":"PricingFetch"})");
    CHECK(p.src == "ev1");
    CHECK(p.arrival == 0);
    CHECK(p.kind == MessageKind::PricingFetch);
    CHECK(p.dst == "aggregator");
    CHECK(std::holds_alternative<std::monostate>(p.payload));
}

TEST_CASE("parse_packet reads a power status update at the demand floor") {
    Packet p = parse_packet(R"({"src":"ev1","t":60000,"kind":"PowerStatusUpdate","power_kw":3.0})");
    CHECK(p.kind == MessageKind::PowerStatusUpdate);
    CHECK(std::get<PowerReport>(p.payload).kw == 3.0);
}

TEST_CASE("parse_packet rejects payload/kind mismatches naming the field") {
    CHECK(throws_mentioning(R"({"src":"ev1","t":5,"kind":"PowerStatusUpdate"})", "power_kw"));
    // payload fields on a kind that carries none
    CHECK(throws_mentioning(R"({"src":"ev1","t":5,"kind":"PricingFetch","power_kw":3.0})",
                            "power_kw"));
}

TEST_CASE("parse_packet error taxonomy") {
    CHECK_THROWS_AS(parse_packet("{not json"), ParseError);
    CHECK_THROWS_AS(parse_packet(R"({"src":"ev1","t":0,"kind":"NoSuchKind"})"), ParseError);
    CHECK_THROWS_AS(parse_packet(R"({"src":"","t":0,"kind":"PricingFetch"})"), ParseError);
    CHECK_THROWS_AS(parse_packet(R"({"src":"ev1","t":-1,"kind":"PricingFetch"})"), ParseError);
    CHECK_THROWS_AS(parse_packet(R"({"src":"ev1","t":0.5,"kind":"PricingFetch"})"), ParseError);
    // responses must name the EV they address
    CHECK(throws_mentioning(
        R"({"src":"aggregator","t":0,"kind":"PricingResponse"})", "dst"));
    // reservation payloads need every field
    CHECK(throws_mentioning(
        R"({"src":"aggregator","dst":"ev1","t":0,"kind":"FlowReservationResponse","window_start":0,"window_end":100,"rated_kw":3.0})",
        "direction"));
}

TEST_CASE("serialize/parse round-trips the reservation payload exactly") {
    Packet p = parse_packet(
        R"({"src":"aggregator","dst":"ev7","t":123,"kind":"FlowReservationListResponse","window_start":1000,"window_end":7200000,"direction":"discharge","rated_kw":6.5})");
    const auto& r = std::get<FlowReservation>(p.payload);
    CHECK(r.ev == "ev7");
    CHECK(r.direction == Direction::Discharge);
    CHECK(parse_packet(serialize_packet(p)) == p);
}

TEST_CASE("round-trip is the identity on randomly generated packets") {
    std::mt19937_64 rng(20250810);
    for (int i = 0; i < 1000; ++i) {
        Packet p = random_packet(rng);
        CAPTURE(serialize_packet(p));
        CHECK(parse_packet(serialize_packet(p)) == p);
    }
}

TEST_CASE("timestamps survive at millisecond precision") {
    Packet p = parse_packet(R"({"src":"ev1","t":86399999,"kind":"LoadControlFetch"})");
    CHECK(p.arrival == 86'399'999);
    CHECK(serialize_packet(p).find("86399999") != std::string::npos);
}

TEST_CASE("trace io preserves order and content") {
    std::mt19937_64 rng(7);
    std::vector<Packet> trace;
    for (int i = 0; i < 200; ++i) trace.push_back(random_packet(rng));
    std::stringstream ss;
    write_trace(ss, trace);
    CHECK(read_trace(ss) == trace);
}

TEST_CASE("load CSV round-trips and rejects bad input") {
    std::vector<LoadSample> samples = {
        {"h1", 0, 0.4}, {"h1", 60'000, 3.4}, {"h2", 0, -1.25}};
    std::stringstream ss;
    write_load_csv(ss, samples);
    CHECK(read_load_csv(ss) == samples);

    std::stringstream bad_header("power,household\n");
    CHECK_THROWS_AS(read_load_csv(bad_header), IngestError);
    std::stringstream bad_row("timestamp_ms,household_id,power_kw\nxyz,h1,1.0\n");
    try {
        read_load_csv(bad_row);
        CHECK(false);
    } catch (const IngestError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
}

TEST_CASE("labels io round-trips") {
    std::vector<Label> labels = {std::nullopt, AttackKind::OverReport, std::nullopt,
                                 AttackKind::WrongPeriodicity};
    std::stringstream ss;
    write_labels(ss, labels);
    CHECK(read_labels(ss) == labels);
}

TEST_CASE("verdict records io round-trips with and without timing") {
    std::vector<VerdictRecord> records = {
        {0, "ev1", MessageKind::PricingFetch, VerdictClass::Benign, 12},
        {60'000, "ev2", MessageKind::PowerStatusUpdate, VerdictClass::InconsistentPower, 34},
    };
    std::stringstream with;
    write_verdicts(with, records, true);
    CHECK(read_verdicts(with) == records);

    std::stringstream without;
    write_verdicts(without, records, false);
    auto rt = read_verdicts(without);
    REQUIRE(rt.size() == 2);
    CHECK(rt[0].inspect_us == 0);
    CHECK(rt[1].verdict == VerdictClass::InconsistentPower);
}

TEST_CASE("verdict classes map one-to-one onto the attack kinds") {
    CHECK(detecting_class(AttackKind::OverReport) == VerdictClass::InconsistentPower);
    CHECK(detecting_class(AttackKind::UnderReport) == VerdictClass::InconsistentPower);
    CHECK(detecting_class(AttackKind::OutOfSequence) == VerdictClass::UnexpectedSequence);
    CHECK(detecting_class(AttackKind::BeyondSubscription) == VerdictClass::InvalidSubscription);
    CHECK(detecting_class(AttackKind::WrongPeriodicity) == VerdictClass::InconsistentFrequency);
    for (AttackKind k : kAllAttacks) CHECK(attack_from_string(to_string(k)) == k);
}

TEST_CASE("reservation validity") {
    FlowReservation r{"ev1", 0, 1000, Direction::Charge, 3.0};
    CHECK(r.valid(3.0));
    CHECK_FALSE(FlowReservation{"ev1", 1000, 1000, Direction::Charge, 3.0}.valid(3.0));
    CHECK_FALSE(FlowReservation{"ev1", 2000, 1000, Direction::Charge, 3.0}.valid(3.0));
    CHECK_FALSE(FlowReservation{"ev1", 0, 1000, Direction::Charge, 2.5}.valid(3.0));
    CHECK(FlowReservation{"ev1", 0, 1000, Direction::Charge, 2.5}.valid(2.0));
}
