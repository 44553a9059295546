// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "prov/model.hpp"

namespace prov {

// ---- PROV-JSON -----------------------------------------------------------

// Qualified node id: "cf:machine:boot:object:version".
std::string qualified_id(const NodeIdentity& identity);
NodeIdentity parse_qualified_id(const std::string& id);

// Canonical PROV-JSON document for a record stream: nodes grouped under
// entity/activity/agent, edges under their five relation families, all
// keys sorted. Deterministic byte-for-byte.
std::string to_provjson(const std::vector<Record>& records);

// Inverse of to_provjson. Errors name the offending JSON path.
std::vector<Record> provjson_records(const std::string& text);

// ---- compact binary stream (.cfb) ----------------------------------------
// Layout per record documented in FORMAT.md at the repository root.

void append_binary(std::vector<std::uint8_t>& out, const Record& record);
std::vector<std::uint8_t> to_binary(const std::vector<Record>& records);

// Decodes one record starting at offset, advancing it. Truncated input,
// a bad magic, or an unknown tag throw with the byte offset.
Record read_binary(const std::vector<std::uint8_t>& data, std::size_t& offset);
std::vector<Record> from_binary(const std::vector<std::uint8_t>& data);

// ---- graph reconstruction -------------------------------------------------

// Replays records in stream order; fails if the stream breaks graph rules.
ProvGraph graph_from_records(const std::vector<Record>& records);

// Flattens a graph back into a replayable stream: nodes in insertion
// order, then edges by id.
std::vector<Record> records_from_graph(const ProvGraph& graph);

// Orders records so nodes precede the edges that mention them, using the
// event seq attributes; needed for map-shaped PROV-JSON input.
std::vector<Record> causal_order(std::vector<Record> records);

// Loads either wire format, sniffing the binary magic.
std::vector<Record> load_records_file(const std::string& path);
ProvGraph load_graph_file(const std::string& path);

// ---- relay ----------------------------------------------------------------

// Bounded FIFO handoff between the capture side and one consumer.
// Overflow drops the newest record and counts it. Records offered
// before the first poll sit in the boot buffer (the same storage) when
// enabled, and are dropped when not.
class RelayStream {
public:
    explicit RelayStream(std::size_t capacity, bool boot_buffer = true);

    bool offer(const Record& record);
    std::vector<Record> poll();

    std::uint64_t dropped() const { return dropped_.load(std::memory_order_relaxed); }
    std::size_t capacity() const { return capacity_; }

private:
    const std::size_t capacity_;
    const bool boot_buffer_;
    std::vector<Record> ring_;
    std::atomic<std::size_t> head_{0};  // consumer cursor
    std::atomic<std::size_t> tail_{0};  // producer cursor
    std::atomic<std::uint64_t> dropped_{0};
    std::atomic<bool> polled_{false};
};

}  // namespace prov
