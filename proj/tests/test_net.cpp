// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include <doctest.h>

#include <set>
#include <vector>

#include "oracles.hpp"
#include "prov/builder.hpp"
#include "prov/net.hpp"
#include "prov/trace.hpp"

using namespace prov;

namespace {

PacketIdentity sample_packet(std::uint32_t tcp_seq = 1000) {
    return packet_identifier(42, parse_ipv4("10.0.0.1"), parse_ipv4("10.0.0.2"), 40000, 80,
                             Protocol::tcp, tcp_seq);
}

StitchResult stitch_two_host(const SimResult& sim, const CapturePolicy& policy) {
    BuildResult one = build(sim.trace, policy, 1);
    BuildResult two = build(sim.trace, policy, 2);
    return stitch({&one.graph, &two.graph});
}

}  // namespace

TEST_CASE("packet identities validate their protocol fields") {
    CHECK_THROWS_AS(packet_identifier(1, 2, 3, 4, 5, Protocol::tcp, std::nullopt), Error);
    CHECK_THROWS_AS(packet_identifier(1, 2, 3, 4, 5, Protocol::udp, 99), Error);
    PacketIdentity udp = packet_identifier(1, 2, 3, 4, 5, Protocol::udp, std::nullopt);
    CHECK(!udp.tcp_seq.has_value());
}

TEST_CASE("packet ids are stable and sensitive to every field") {
    PacketIdentity base = sample_packet();
    CHECK(packet_object_id(base) == packet_object_id(sample_packet()));
    CHECK(packet_object_id(base) != packet_object_id(sample_packet(1001)));

    PacketIdentity other_port = base;
    other_port.dst_port = 81;
    CHECK(packet_object_id(base) != packet_object_id(other_port));

    PacketIdentity other_ip = base;
    other_ip.dst_ip = parse_ipv4("10.0.0.3");
    CHECK(packet_object_id(base) != packet_object_id(other_ip));

    // Hash-allocated ids never collide with counter-allocated ones.
    CHECK((packet_object_id(base) & (1ULL << 63)) != 0);
}

TEST_CASE("ipv4 strings round-trip and reject malformed input") {
    CHECK(format_ipv4(parse_ipv4("192.168.1.254")) == "192.168.1.254");
    CHECK(parse_ipv4("0.0.0.0") == 0);
    CHECK(parse_ipv4("255.255.255.255") == 0xffffffffu);
    CHECK_THROWS_AS(parse_ipv4("1.2.3"), Error);
    CHECK_THROWS_AS(parse_ipv4("1.2.3.256"), Error);
    CHECK_THROWS_AS(parse_ipv4("1.2.3.4.5"), Error);
    CHECK_THROWS_AS(parse_ipv4("a.b.c.d"), Error);
    CHECK_THROWS_AS(parse_ipv4(""), Error);
}

TEST_CASE("packet attributes reconstruct the identity exactly") {
    PacketIdentity tcp = sample_packet();
    CHECK(packet_identity_from_attrs(packet_attributes(tcp, 512)) == tcp);
    PacketIdentity udp = packet_identifier(7, parse_ipv4("1.1.1.1"), parse_ipv4("2.2.2.2"),
                                           53, 53, Protocol::udp, std::nullopt);
    CHECK(packet_identity_from_attrs(packet_attributes(udp, 0)) == udp);

    AttrMap broken = packet_attributes(tcp, 512);
    broken.erase("src_ip");
    CHECK_THROWS_AS(packet_identity_from_attrs(broken), Error);
}

TEST_CASE("lossless transfer stitches every packet") {
    SimResult sim = simulate("two_host", 1);
    StitchResult stitched = stitch_two_host(sim, parse_policy("provenance=whole\n"));
    CHECK(stitched.report.matched > 0);
    CHECK(stitched.report.unmatched_sent == 0);
    CHECK(stitched.report.unmatched_received == 0);
    CHECK(!provtest::find_cycle(stitched.graph).has_value());

    // Unified packets live on pseudo-machine 0 and remember both origins.
    bool saw_unified = false;
    for (const ProvNode& node : stitched.graph.nodes()) {
        if (node.type != NodeType::packet) continue;
        saw_unified = true;
        CHECK(node.identity.machine == 0);
        auto observed = node.attributes.find("observed");
        REQUIRE(observed != node.attributes.end());
        CHECK(attr_to_display(observed->second).find(',') != std::string::npos);
    }
    CHECK(saw_unified);
}

TEST_CASE("dropped packets surface as unmatched sends") {
    ScenarioParams params;
    params.drop = 0.4;
    params.iterations = 25;
    SimResult sim = simulate("two_host", 9, params);
    REQUIRE(!sim.truth.dropped.empty());
    StitchResult stitched = stitch_two_host(sim, parse_policy("provenance=whole\n"));
    CHECK(stitched.report.unmatched_sent == sim.truth.dropped.size());
    CHECK(stitched.report.matched > 0);
    CHECK(stitched.report.unmatched_received == 0);
}

TEST_CASE("address rewriting defeats matching instead of mismatching") {
    ScenarioParams params;
    params.nat = true;
    SimResult sim = simulate("two_host", 3, params);
    StitchResult stitched = stitch_two_host(sim, parse_policy("provenance=whole\n"));
    CHECK(stitched.report.matched == 0);
    CHECK(stitched.report.unmatched_sent > 0);
    CHECK(stitched.report.unmatched_received > 0);
    CHECK(stitched.report.unmatched_sent == stitched.report.unmatched_received);
}

TEST_CASE("stitching is idempotent") {
    SimResult sim = simulate("two_host", 4);
    StitchResult once = stitch_two_host(sim, parse_policy("provenance=whole\n"));
    StitchResult twice = stitch({&once.graph});
    CHECK(graphs_isomorphic(once.graph, twice.graph));
    CHECK(once.report == twice.report);
}

TEST_CASE("stitching one ordinary graph changes nothing but packet homes") {
    SimResult sim = simulate("fig3", 1);
    BuildResult built = build(sim.trace, parse_policy("provenance=whole\n"));
    StitchResult stitched = stitch({&built.graph});
    // No packets at all: identity transform.
    CHECK(graphs_isomorphic(built.graph, stitched.graph));
    CHECK(stitched.report == StitchReport{});
}

TEST_CASE("distinct tuples never merge") {
    SimResult sim = simulate("two_host", 6);
    StitchResult stitched = stitch_two_host(sim, parse_policy("provenance=whole\n"));

    // Every unified packet's attribute tuple is unique, so no two sent
    // packets collapsed into one node.
    std::set<PacketIdentity> tuples;
    std::uint64_t packet_nodes = 0;
    for (const ProvNode& node : stitched.graph.nodes()) {
        if (node.type != NodeType::packet) continue;
        packet_nodes += 1;
        tuples.insert(packet_identity_from_attrs(node.attributes));
    }
    CHECK(tuples.size() == packet_nodes);

    BuildResult one = build(sim.trace, parse_policy("provenance=whole\n"), 1);
    BuildResult two = build(sim.trace, parse_policy("provenance=whole\n"), 2);
    std::uint64_t separate = 0;
    for (const ProvNode& node : one.graph.nodes()) {
        if (node.type == NodeType::packet) separate += 1;
    }
    for (const ProvNode& node : two.graph.nodes()) {
        if (node.type == NodeType::packet) separate += 1;
    }
    CHECK(packet_nodes == separate - stitched.report.matched);
}
