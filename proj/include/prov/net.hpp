// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prov/model.hpp"

namespace prov {

enum class Protocol { tcp, udp };

std::string to_string(Protocol protocol);
Protocol protocol_from_string(const std::string& name);

// The on-the-wire coordinates that make one packet recognizable on
// every host that saw it. The sequence number only exists for TCP.
struct PacketIdentity {
    std::uint16_t ip_id = 0;
    std::uint32_t src_ip = 0;
    std::uint32_t dst_ip = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    Protocol protocol = Protocol::tcp;
    std::optional<std::uint32_t> tcp_seq;

    auto operator<=>(const PacketIdentity&) const = default;
};

// Validating constructor; rejects a TCP tuple without a sequence number
// and a UDP tuple with one.
PacketIdentity packet_identifier(std::uint16_t ip_id, std::uint32_t src_ip,
                                 std::uint32_t dst_ip, std::uint16_t src_port,
                                 std::uint16_t dst_port, Protocol protocol,
                                 std::optional<std::uint32_t> tcp_seq);

// Stable 64-bit digest of the tuple; serves as the packet's object id.
std::uint64_t packet_object_id(const PacketIdentity& identity);

std::uint32_t parse_ipv4(const std::string& dotted);
std::string format_ipv4(std::uint32_t addr);

AttrMap packet_attributes(const PacketIdentity& identity, std::uint64_t payload_len);
PacketIdentity packet_identity_from_attrs(const AttrMap& attrs);

struct StitchReport {
    std::uint64_t matched = 0;
    std::uint64_t unmatched_sent = 0;
    std::uint64_t unmatched_received = 0;

    bool operator==(const StitchReport&) const = default;
};

struct StitchResult {
    ProvGraph graph;
    StitchReport report;
};

// Merges per-machine graphs into one, unifying packet nodes whose
// identity tuples agree. The unified node moves to machine id 0 and
// keeps the per-host origins as attributes. Idempotent.
StitchResult stitch(const std::vector<const ProvGraph*>& graphs);

}  // namespace prov
