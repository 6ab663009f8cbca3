#include "v2g/io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace v2g {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kDefaultDst = "aggregator";

[[noreturn]] void fail(const std::string& what) { throw ParseError(what); }

Timestamp require_ms(const ordered_json& j, const char* field) {
    if (!j.contains(field)) fail(std::string("missing field: ") + field);
    const auto& v = j.at(field);
    if (!v.is_number_integer()) fail(std::string("field must be integer ms: ") + field);
    Timestamp t = v.get<Timestamp>();
    if (t < 0) fail(std::string("field must be non-negative: ") + field);
    return t;
}

double require_finite(const ordered_json& j, const char* field) {
    if (!j.contains(field)) fail(std::string("missing field: ") + field);
    const auto& v = j.at(field);
    if (!v.is_number()) fail(std::string("field must be a number: ") + field);
    double d = v.get<double>();
    if (!std::isfinite(d)) fail(std::string("field must be finite: ") + field);
    return d;
}

std::string require_string(const ordered_json& j, const char* field) {
    if (!j.contains(field)) fail(std::string("missing field: ") + field);
    const auto& v = j.at(field);
    if (!v.is_string()) fail(std::string("field must be a string: ") + field);
    return v.get<std::string>();
}

void reject_unknown_fields(const ordered_json& j, const std::set<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) fail("unexpected field for kind: " + it.key());
}

}  // namespace

std::string format_double(double v) {
    return ordered_json(v).dump();
}

Packet parse_packet(const std::string& line) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) fail("packet record must be a JSON object");

    Packet p;
    p.src = require_string(j, "src");
    if (p.src.empty()) fail("src must be non-empty");
    p.arrival = require_ms(j, "t");

    std::string kind_s = require_string(j, "kind");
    auto kind = kind_from_string(kind_s);
    if (!kind) throw ParseError("unsupported kind: " + kind_s);
    p.kind = *kind;

    if (j.contains("dst")) {
        p.dst = require_string(j, "dst");
        if (p.dst.empty()) fail("dst must be non-empty when present");
    } else {
        if (is_response(p.kind)) fail("missing field: dst (responses must name the EV)");
        p.dst = kDefaultDst;
    }

    std::set<std::string> allowed = {"src", "dst", "t", "kind"};
    switch (p.kind) {
        case MessageKind::PowerStatusUpdate: {
            allowed.insert("power_kw");
            reject_unknown_fields(j, allowed);
            p.payload = PowerReport{require_finite(j, "power_kw")};
            break;
        }
        case MessageKind::FlowReservationResponse:
        case MessageKind::FlowReservationListResponse: {
            allowed.insert({"window_start", "window_end", "direction", "rated_kw"});
            reject_unknown_fields(j, allowed);
            FlowReservation r;
            r.ev = p.dst;  // the reservation belongs to the EV the response addresses
            r.window_start = require_ms(j, "window_start");
            r.window_end = require_ms(j, "window_end");
            auto dir = direction_from_string(require_string(j, "direction"));
            if (!dir) fail("direction must be \"charge\" or \"discharge\"");
            r.direction = *dir;
            r.rated_kw = require_finite(j, "rated_kw");
            if (r.rated_kw <= 0.0) fail("rated_kw must be positive");
            p.payload = r;
            break;
        }
        default:
            reject_unknown_fields(j, allowed);
            p.payload = std::monostate{};
            break;
    }
    return p;
}

std::string serialize_packet(const Packet& p) {
    ordered_json j;
    j["src"] = p.src;
    j["dst"] = p.dst;
    j["t"] = p.arrival;
    j["kind"] = to_string(p.kind);
    if (const auto* pr = std::get_if<PowerReport>(&p.payload)) {
        j["power_kw"] = pr->kw;
    } else if (const auto* r = std::get_if<FlowReservation>(&p.payload)) {
        j["window_start"] = r->window_start;
        j["window_end"] = r->window_end;
        j["direction"] = to_string(r->direction);
        j["rated_kw"] = r->rated_kw;
    }
    return j.dump();
}

std::vector<Packet> read_trace(std::istream& in) {
    std::vector<Packet> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(parse_packet(line));
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<Packet> read_trace_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open trace file: " + path);
    return read_trace(f);
}

void write_trace(std::ostream& out, std::span<const Packet> packets) {
    for (const Packet& p : packets) out << serialize_packet(p) << '\n';
}

void write_trace_file(const std::string& path, std::span<const Packet> packets) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write trace file: " + path);
    write_trace(f, packets);
}

std::vector<LoadSample> read_load_csv(std::istream& in) {
    std::vector<LoadSample> out;
    std::string line;
    if (!std::getline(in, line)) throw IngestError("empty load CSV");
    if (line != "timestamp_ms,household_id,power_kw")
        throw IngestError("bad CSV header: " + line);
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string ts, hh, pw;
        if (!std::getline(ss, ts, ',') || !std::getline(ss, hh, ',') || !std::getline(ss, pw))
            throw IngestError("row " + std::to_string(row) + ": expected 3 columns");
        LoadSample s;
        try {
            std::size_t pos = 0;
            s.t = std::stoll(ts, &pos);
            if (pos != ts.size() || s.t < 0) throw std::invalid_argument(ts);
        } catch (const std::exception&) {
            throw IngestError("row " + std::to_string(row) + ": bad timestamp_ms: " + ts);
        }
        if (hh.empty()) throw IngestError("row " + std::to_string(row) + ": empty household_id");
        s.household = hh;
        try {
            std::size_t pos = 0;
            s.p = std::stod(pw, &pos);
            if (pos != pw.size() || !std::isfinite(s.p)) throw std::invalid_argument(pw);
        } catch (const std::exception&) {
            throw IngestError("row " + std::to_string(row) + ": bad power_kw: " + pw);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<LoadSample> read_load_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open load CSV: " + path);
    return read_load_csv(f);
}

void write_load_csv(std::ostream& out, std::span<const LoadSample> samples) {
    out << "timestamp_ms,household_id,power_kw\n";
    for (const LoadSample& s : samples)
        out << s.t << ',' << s.household << ',' << format_double(s.p) << '\n';
}

void write_load_csv_file(const std::string& path, std::span<const LoadSample> samples) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write load CSV: " + path);
    write_load_csv(f, samples);
}

std::vector<Label> read_labels(std::istream& in) {
    std::vector<Label> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("labels line " + std::to_string(lineno) + ": " + e.what());
        }
        std::size_t idx = j.at("index").get<std::size_t>();
        if (idx != out.size())
            throw ParseError("labels line " + std::to_string(lineno) + ": index out of order");
        std::string lab = j.at("label").get<std::string>();
        if (lab == "benign") {
            out.push_back(std::nullopt);
        } else {
            auto k = attack_from_string(lab);
            if (!k) throw ParseError("unknown label: " + lab);
            out.push_back(*k);
        }
    }
    return out;
}

std::vector<Label> read_labels_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open labels file: " + path);
    return read_labels(f);
}

void write_labels(std::ostream& out, std::span<const Label> labels) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ordered_json j;
        j["index"] = i;
        j["label"] = labels[i] ? to_string(*labels[i]) : "benign";
        out << j.dump() << '\n';
    }
}

void write_labels_file(const std::string& path, std::span<const Label> labels) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write labels file: " + path);
    write_labels(f, labels);
}

std::vector<VerdictRecord> read_verdicts(std::istream& in) {
    std::vector<VerdictRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("verdicts line " + std::to_string(lineno) + ": " + e.what());
        }
        VerdictRecord r;
        r.t = j.at("t").get<Timestamp>();
        r.src = j.at("src").get<std::string>();
        auto k = kind_from_string(j.at("kind").get<std::string>());
        auto v = verdict_from_string(j.at("verdict").get<std::string>());
        if (!k || !v) throw ParseError("verdicts line " + std::to_string(lineno) + ": bad enum");
        r.kind = *k;
        r.verdict = *v;
        if (j.contains("inspect_us")) r.inspect_us = j.at("inspect_us").get<std::int64_t>();
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<VerdictRecord> read_verdicts_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open verdicts file: " + path);
    return read_verdicts(f);
}

void write_verdicts(std::ostream& out, std::span<const VerdictRecord> records, bool with_timing) {
    for (const VerdictRecord& r : records) {
        ordered_json j;
        j["t"] = r.t;
        j["src"] = r.src;
        j["kind"] = to_string(r.kind);
        j["verdict"] = to_string(r.verdict);
        if (with_timing) j["inspect_us"] = r.inspect_us;
        out << j.dump() << '\n';
    }
}

void write_verdicts_file(const std::string& path, std::span<const VerdictRecord> records,
                         bool with_timing) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write verdicts file: " + path);
    write_verdicts(f, records, with_timing);
}

}  // namespace v2g
