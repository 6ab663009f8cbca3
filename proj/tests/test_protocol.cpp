#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "helpers.hpp"
#include "v2g/protocol.hpp"

using namespace v2g;
using namespace v2g::test;

namespace {

const TransitionTable kTable = TransitionTable::standard();
const ProtocolConfig kCfg;

// Every kind-sequence over the full alphabet up to the given length.
void all_sequences(int depth, std::vector<MessageKind>& prefix,
                   const std::function<void(const std::vector<MessageKind>&)>& visit) {
    if (depth == 0) return;
    for (MessageKind k : kAllKinds) {
        prefix.push_back(k);
        visit(prefix);
        all_sequences(depth - 1, prefix, visit);
        prefix.pop_back();
    }
}

}  // namespace

TEST_CASE("a flow reservation is the first step of any subscription") {
    AggregatorState s;
    StepResult r = advance(s, make("ev1", 0, MessageKind::FlowReservationRequest), kTable, kCfg);
    CHECK(r.verdict == VerdictClass::Benign);
    CHECK(r.state.phase == Phase::Reserving);
}

TEST_CASE("parallel periodic sequences interleave in any order while active") {
    auto run = [&](std::vector<MessageKind> tail) {
        std::vector<MessageKind> seq = {MessageKind::FlowReservationRequest,
                                        MessageKind::FlowReservationResponse,
                                        MessageKind::PowerStatusUpdate};
        seq.insert(seq.end(), tail.begin(), tail.end());
        return accepts(seq, kTable, kCfg);
    };
    CHECK(run({MessageKind::FlowReservationListFetch, MessageKind::PowerStatusUpdate}));
    CHECK(run({MessageKind::PowerStatusUpdate, MessageKind::FlowReservationListFetch}));
    CHECK(run({MessageKind::FlowReservationListFetch, MessageKind::FlowReservationListResponse,
               MessageKind::PowerStatusUpdate}));
}

TEST_CASE("a power status update before any reservation is out of sequence") {
    AggregatorState s;
    StepResult r = advance(s, psu("ev1", 0, 3.0), kTable, kCfg);
    CHECK(r.verdict == VerdictClass::UnexpectedSequence);
    CHECK(r.state == s);  // rejection is non-destructive
}

TEST_CASE("updates ahead of the subscription window do not start the active phase") {
    AggregatorState s;
    s = advance(s, make("ev1", 0, MessageKind::FlowReservationRequest), kTable, kCfg).state;
    s = advance(s, reservation("ev1", 1'000, MessageKind::FlowReservationResponse, 600'000,
                               7'800'000),
                kTable, kCfg)
            .state;
    CHECK(s.phase == Phase::Reserved);

    StepResult early = advance(s, psu("ev1", 300'000, 6.0), kTable, kCfg);
    CHECK(early.verdict == VerdictClass::UnexpectedSequence);
    CHECK(early.state == s);

    StepResult at = advance(s, psu("ev1", 600'000, 6.0), kTable, kCfg);
    CHECK(at.verdict == VerdictClass::Benign);
    CHECK(at.state.phase == Phase::ActiveCharging);
}

TEST_CASE("the reservation direction selects the active phase") {
    AggregatorState s;
    s = advance(s, make("ev1", 0, MessageKind::FlowReservationRequest), kTable, kCfg).state;
    s = advance(s, reservation("ev1", 1'000, MessageKind::FlowReservationResponse, 2'000,
                               7'200'000, Direction::Discharge),
                kTable, kCfg)
            .state;
    StepResult r = advance(s, psu("ev1", 2'000, 5.0), kTable, kCfg);
    CHECK(r.state.phase == Phase::ActiveDischarging);
}

TEST_CASE("cancellation returns to NotSubscribed and permits re-reservation") {
    std::vector<MessageKind> seq = {
        MessageKind::FlowReservationRequest, MessageKind::FlowReservationResponse,
        MessageKind::FlowReservationCancel,  MessageKind::FlowReservationRequest,
        MessageKind::FlowReservationResponse, MessageKind::PowerStatusUpdate,
        MessageKind::FlowReservationCancel,  MessageKind::PricingFetch};
    CHECK(accepts(seq, kTable, kCfg));
}

TEST_CASE("an invalid reservation payload does not match the expected payload") {
    AggregatorState s;
    s = advance(s, make("ev1", 0, MessageKind::FlowReservationRequest), kTable, kCfg).state;
    // window ends before it starts
    StepResult bad = advance(
        s, reservation("ev1", 1'000, MessageKind::FlowReservationResponse, 5'000, 4'000), kTable,
        kCfg);
    CHECK(bad.verdict == VerdictClass::UnexpectedSequence);
    // rated power under the floor
    StepResult low = advance(s,
                             reservation("ev1", 1'000, MessageKind::FlowReservationResponse,
                                         1'000, 9'000, Direction::Charge, 2.0),
                             kTable, kCfg);
    CHECK(low.verdict == VerdictClass::UnexpectedSequence);
    CHECK(low.state == s);
}

TEST_CASE("idle timeout resets to NotSubscribed strictly past the bound") {
    AggregatorState s;
    s = advance(s, make("ev1", 1'000, MessageKind::FlowReservationRequest), kTable, kCfg).state;
    CHECK(s.phase == Phase::Reserving);
    CHECK(s.last_arrival == 1'000);

    AggregatorState at_bound = idle_timeout(s, 1'000 + kCfg.idle_timeout_ms, kCfg);
    CHECK(at_bound == s);  // boundary is exclusive

    AggregatorState reset = idle_timeout(s, 1'000 + kCfg.idle_timeout_ms + 1, kCfg);
    CHECK(reset.phase == Phase::NotSubscribed);
    CHECK_FALSE(reset.reservation.has_value());

    AggregatorState fresh;
    CHECK(idle_timeout(fresh, 10'000'000, kCfg) == fresh);  // idle stays idle
}

TEST_CASE("enumerate_valid_sequences expands the initial state exactly") {
    auto seqs = enumerate_valid_sequences(1);
    std::set<std::vector<MessageKind>> expected = {
        {MessageKind::FlowReservationRequest},
        {MessageKind::PricingFetch},
        {MessageKind::LoadControlFetch}};
    CHECK(seqs == expected);
}

TEST_CASE("enumerate_valid_sequences bounds") {
    CHECK_THROWS_AS(enumerate_valid_sequences(0), BoundsError);
    CHECK_THROWS_AS(enumerate_valid_sequences(13), BoundsError);
}

TEST_CASE("every enumerated sequence is accepted step-by-step") {
    for (const auto& seq : enumerate_valid_sequences(6)) {
        CAPTURE(seq.size());
        CHECK(accepts(seq, kTable, kCfg));
    }
}

TEST_CASE("oracle equivalence, exhaustive to depth 4") {
    auto oracle = enumerate_valid_sequences(4);
    std::vector<MessageKind> prefix;
    long checked = 0;
    all_sequences(4, prefix, [&](const std::vector<MessageKind>& seq) {
        bool expect = oracle.count(seq) > 0;
        bool got = accepts(seq, kTable, kCfg);
        if (expect != got) {
            CAPTURE(seq.size());
            REQUIRE(expect == got);
        }
        ++checked;
    });
    CHECK(checked == 10 + 100 + 1'000 + 10'000);
}

TEST_CASE("oracle equivalence on random deep sequences") {
    auto oracle = enumerate_valid_sequences(8);
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> kind_pick(0, 9);
    std::uniform_int_distribution<int> len_pick(6, 8);
    for (int i = 0; i < 20'000; ++i) {
        std::vector<MessageKind> seq;
        int len = len_pick(rng);
        // half the samples mutate a valid sequence to probe the boundary
        if (i % 2 == 0) {
            auto it = oracle.lower_bound({kAllKinds[kind_pick(rng)]});
            if (it == oracle.end()) it = oracle.begin();
            seq = *it;
            while (static_cast<int>(seq.size()) < len)
                seq.push_back(kAllKinds[kind_pick(rng)]);
            seq.resize(len);
            seq[std::uniform_int_distribution<std::size_t>(0, seq.size() - 1)(rng)] =
                kAllKinds[kind_pick(rng)];
        } else {
            for (int k = 0; k < len; ++k) seq.push_back(kAllKinds[kind_pick(rng)]);
        }
        CHECK(accepts(seq, kTable, kCfg) == (oracle.count(seq) > 0));
    }
}

TEST_CASE("one bad packet does not cascade into later rejections") {
    std::mt19937_64 rng(4242);
    auto oracle = enumerate_valid_sequences(8);
    std::vector<std::vector<MessageKind>> valid(oracle.begin(), oracle.end());
    for (int trial = 0; trial < 200; ++trial) {
        const auto& seq =
            valid[std::uniform_int_distribution<std::size_t>(0, valid.size() - 1)(rng)];
        auto packets = concretize(seq);
        AggregatorState st;
        std::size_t inject_at =
            std::uniform_int_distribution<std::size_t>(0, packets.size() - 1)(rng);
        for (std::size_t i = 0; i < packets.size(); ++i) {
            if (i == inject_at) {
                // a pricing response is never solicited by the aggregator
                Packet bad = make("ev1", packets[i].arrival - 1, MessageKind::PricingResponse);
                StepResult r = advance(st, bad, kTable, kCfg);
                CHECK(r.verdict == VerdictClass::UnexpectedSequence);
                CHECK(r.state == st);
            }
            StepResult r = advance(st, packets[i], kTable, kCfg);
            REQUIRE(r.verdict == VerdictClass::Benign);
            st = r.state;
        }
    }
}

TEST_CASE("advance is deterministic") {
    AggregatorState s;
    Packet p = make("ev1", 5, MessageKind::PricingFetch);
    StepResult a = advance(s, p, kTable, kCfg);
    StepResult b = advance(s, p, kTable, kCfg);
    CHECK(a.state == b.state);
    CHECK(a.verdict == b.verdict);
}

TEST_CASE("transition table override replaces the whole map") {
    std::string path = "override_table.txt";
    {
        std::ofstream f(path);
        f << "# tiny machine: only pricing fetches allowed\n";
        f << "NotSubscribed PricingFetch NotSubscribed\n";
    }
    TransitionTable t = TransitionTable::from_file(path);
    CHECK(t.next(Phase::NotSubscribed, MessageKind::PricingFetch) == Phase::NotSubscribed);
    CHECK_FALSE(t.next(Phase::NotSubscribed, MessageKind::FlowReservationRequest).has_value());
    CHECK(accepts({MessageKind::PricingFetch, MessageKind::PricingFetch}, t, kCfg));
    CHECK_FALSE(accepts({MessageKind::FlowReservationRequest}, t, kCfg));

    CHECK_THROWS_AS(TransitionTable::from_file("no_such_file.txt"), ConfigError);
    std::string bad = "bad_table.txt";
    {
        std::ofstream f(bad);
        f << "NotSubscribed NoSuchKind Reserved\n";
    }
    CHECK_THROWS_AS(TransitionTable::from_file(bad), ConfigError);
}

TEST_CASE("tracked periodic kinds follow the phase") {
    auto ns = tracked_kinds(Phase::NotSubscribed);
    CHECK(ns == std::vector<MessageKind>{MessageKind::PricingFetch,
                                         MessageKind::LoadControlFetch});
    auto act = tracked_kinds(Phase::ActiveCharging);
    CHECK(act == std::vector<MessageKind>{MessageKind::PowerStatusUpdate,
                                          MessageKind::FlowReservationListFetch});
    CHECK(tracked_kinds(Phase::ActiveDischarging) == act);
    CHECK(tracked_kinds(Phase::Reserving).empty());
}
