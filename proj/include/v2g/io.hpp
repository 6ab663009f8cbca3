#ifndef V2G_IO_HPP
#define V2G_IO_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "v2g/types.hpp"

namespace v2g {

// Packet trace wire format: JSONL, one object per line.
// Fields: src, dst, t (integer ms), kind, plus kind-specific payload fields
// power_kw | window_start, window_end, direction, rated_kw.
// dst may be omitted for EV->aggregator kinds and defaults to "aggregator";
// responses require an explicit dst naming the EV.
Packet parse_packet(const std::string& line);
std::string serialize_packet(const Packet& p);  // single line, no trailing newline

std::vector<Packet> read_trace(std::istream& in);
std::vector<Packet> read_trace_file(const std::string& path);
void write_trace(std::ostream& out, std::span<const Packet> packets);
void write_trace_file(const std::string& path, std::span<const Packet> packets);

// CSV with header: timestamp_ms,household_id,power_kw
std::vector<LoadSample> read_load_csv(std::istream& in);
std::vector<LoadSample> read_load_csv_file(const std::string& path);
void write_load_csv(std::ostream& out, std::span<const LoadSample> samples);
void write_load_csv_file(const std::string& path, std::span<const LoadSample> samples);

// Per-packet ground-truth labels: JSONL {"index":N,"label":"benign"|attack}.
std::vector<Label> read_labels(std::istream& in);
std::vector<Label> read_labels_file(const std::string& path);
void write_labels(std::ostream& out, std::span<const Label> labels);
void write_labels_file(const std::string& path, std::span<const Label> labels);

// Engine output record: {"t":..,"src":..,"kind":..,"verdict":..[,"inspect_us":N]}.
struct VerdictRecord {
    Timestamp t = 0;
    std::string src;
    MessageKind kind = MessageKind::PricingFetch;
    VerdictClass verdict = VerdictClass::Benign;
    std::int64_t inspect_us = 0;
    bool operator==(const VerdictRecord&) const = default;
};

std::vector<VerdictRecord> read_verdicts(std::istream& in);
std::vector<VerdictRecord> read_verdicts_file(const std::string& path);
void write_verdicts(std::ostream& out, std::span<const VerdictRecord> records, bool with_timing);
void write_verdicts_file(const std::string& path, std::span<const VerdictRecord> records,
                         bool with_timing);

// Shortest decimal form that parses back to the same double; used everywhere
// a real number is written so identical runs emit identical bytes.
std::string format_double(double v);

}  // namespace v2g

#endif  // V2G_IO_HPP
