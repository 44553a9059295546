// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "prov/builder.hpp"
#include "prov/trace.hpp"
#include "prov/wire.hpp"

using namespace prov;

namespace {

std::vector<Record> fig3_records() {
    SimResult sim = simulate("fig3", 1);
    return build(sim.trace, parse_policy("provenance=whole\n")).records;
}

std::vector<std::uint8_t> record_bytes(const Record& record) {
    std::vector<std::uint8_t> out;
    append_binary(out, record);
    return out;
}

Record simple_node_record() {
    ProvNode node;
    node.identity = NodeIdentity{1, 1, 5, 0};
    node.type = NodeType::file;
    node.attributes["a"] = std::uint64_t{9};
    return Record::make_node(node);
}

}  // namespace

TEST_CASE("qualified ids round-trip and reject malformed text") {
    NodeIdentity id{3, 1, 42, 7};
    CHECK(qualified_id(id) == "cf:3:1:42:7");
    CHECK(parse_qualified_id(qualified_id(id)) == id);

    CHECK_THROWS_WITH_AS(parse_qualified_id("prov:3:1:42:7"), doctest::Contains("cf: prefix"),
                         Error);
    CHECK_THROWS_AS(parse_qualified_id("cf:3:1:42"), Error);
    CHECK_THROWS_AS(parse_qualified_id("cf:3:1:42:"), Error);
    CHECK_THROWS_AS(parse_qualified_id("cf:3:1:x:7"), Error);
    CHECK_THROWS_AS(parse_qualified_id("cf:3:1:42:7:9"), Error);
    CHECK_THROWS_AS(parse_qualified_id("cf:99999999999999999999:1:1:1"), Error);
}

TEST_CASE("prov-json serialization is a byte-stable involution") {
    std::vector<Record> records = fig3_records();
    std::string text = to_provjson(records);
    std::vector<Record> parsed = provjson_records(text);
    CHECK(parsed.size() == records.size());
    CHECK(to_provjson(parsed) == text);
}

TEST_CASE("prov-json documents carry the identity fields on every node") {
    std::string text = to_provjson(fig3_records());
    CHECK(text.find("\"cf:machine_id\"") != std::string::npos);
    CHECK(text.find("\"cf:boot_id\"") != std::string::npos);
    CHECK(text.find("\"cf:id\"") != std::string::npos);
    CHECK(text.find("\"cf:version\"") != std::string::npos);
    CHECK(text.find("\"cf:seq\"") != std::string::npos);
    CHECK(text.find("urn:provkit:ns#") != std::string::npos);
    CHECK(text.find("http://www.w3.org/ns/prov#") != std::string::npos);
}

TEST_CASE("prov-json parse errors name the offending path") {
    CHECK_THROWS_WITH_AS(provjson_records("nonsense"), doctest::Contains("invalid JSON"),
                         Error);
    CHECK_THROWS_WITH_AS(provjson_records("[]"), doctest::Contains("not an object"), Error);
    CHECK_THROWS_WITH_AS(provjson_records(R"({"entity": 4})"),
                         doctest::Contains("$.entity"), Error);
    CHECK_THROWS_WITH_AS(
        provjson_records(R"({"entity": {"cf:1:1:5:0": {}}})"),
        doctest::Contains("missing cf:type"), Error);
    CHECK_THROWS_WITH_AS(
        provjson_records(R"({"activity": {"cf:1:1:5:0": {"cf:type": "file"}}})"),
        doctest::Contains("does not belong under activity"), Error);
    CHECK_THROWS_WITH_AS(
        provjson_records(R"({"entity": {"cf:1:1:5:0": {"cf:type": "file", "cf:id": 6}}})"),
        doctest::Contains("disagrees with the qualified id"), Error);
    CHECK_THROWS_WITH_AS(
        provjson_records(R"({"entity": {"cf:1:1:5:0": {"cf:type": "file", "foo": 1}}})"),
        doctest::Contains("unknown field 'foo'"), Error);
    CHECK_THROWS_WITH_AS(
        provjson_records(
            R"({"entity": {"cf:1:1:5:0": {"cf:type": "file", "cf:x": 1.5}}})"),
        doctest::Contains("unsupported attribute value"), Error);
    CHECK_THROWS_WITH_AS(
        provjson_records(R"({"used": {"cf:e:7": {"prov:entity": "cf:1:1:1:0"}}})"),
        doctest::Contains("missing prov:activity"), Error);
    CHECK_THROWS_WITH_AS(
        provjson_records(
            R"({"wasDerivedFrom": {"cf:e:7": {"prov:generatedEntity": "cf:1:1:1:1",
               "prov:usedEntity": "cf:1:1:1:0", "cf:type": "read", "cf:edge_id": 7}}})"),
        doctest::Contains("does not belong under wasDerivedFrom"), Error);
    CHECK_THROWS_WITH_AS(
        provjson_records(
            R"({"used": {"cf:e:7": {"prov:activity": "cf:1:1:2:1",
               "prov:entity": "cf:1:1:1:0", "cf:type": "read"}}})"),
        doctest::Contains("missing cf:edge_id"), Error);
}

TEST_CASE("identity attributes are accepted when they agree") {
    std::string text = R"({"entity": {"cf:2:1:5:3": {"cf:type": "file",
        "cf:machine_id": 2, "cf:boot_id": 1, "cf:id": 5, "cf:version": 3}}})";
    std::vector<Record> records = provjson_records(text);
    REQUIRE(records.size() == 1);
    CHECK(records[0].node.identity == NodeIdentity{2, 1, 5, 3});
    // Cross-checked fields do not linger as ordinary attributes.
    CHECK(records[0].node.attributes.empty());
}

TEST_CASE("binary encoding is byte-exact through a round trip") {
    std::vector<Record> records = fig3_records();
    std::vector<std::uint8_t> data = to_binary(records);
    std::vector<Record> decoded = from_binary(data);
    REQUIRE(decoded.size() == records.size());
    CHECK(to_binary(decoded) == data);
    CHECK(to_provjson(decoded) == to_provjson(records));
}

TEST_CASE("binary decode errors carry byte offsets") {
    std::vector<std::uint8_t> data = record_bytes(simple_node_record());

    std::vector<std::uint8_t> bad_magic = data;
    bad_magic[0] ^= 0xff;
    CHECK_THROWS_WITH_AS(from_binary(bad_magic), doctest::Contains("byte 0"), Error);
    CHECK_THROWS_WITH_AS(from_binary(bad_magic), doctest::Contains("bad record magic"),
                         Error);

    std::vector<std::uint8_t> truncated = data;
    truncated.pop_back();
    CHECK_THROWS_WITH_AS(from_binary(truncated), doctest::Contains("record truncated"),
                         Error);

    std::vector<std::uint8_t> tiny(data.begin(), data.begin() + 3);
    CHECK_THROWS_WITH_AS(from_binary(tiny), doctest::Contains("record truncated"), Error);

    std::vector<std::uint8_t> bad_kind = data;
    bad_kind[2] = 9;
    CHECK_THROWS_WITH_AS(from_binary(bad_kind), doctest::Contains("unknown record kind 9"),
                         Error);

    // Header is 7 bytes, the identity 32, so the type byte sits at 39.
    std::vector<std::uint8_t> bad_type = data;
    bad_type[39] = 200;
    CHECK_THROWS_WITH_AS(from_binary(bad_type), doctest::Contains("unknown node type 200"),
                         Error);

    // One attribute named "a": count(2) + keylen(2) + key(1) put its tag at 45.
    std::vector<std::uint8_t> bad_tag = data;
    REQUIRE(bad_tag[45] == 1);  // u64 tag
    bad_tag[45] = 7;
    CHECK_THROWS_WITH_AS(from_binary(bad_tag), doctest::Contains("unknown attribute tag 7"),
                         Error);

    std::vector<std::uint8_t> stretched = data;
    stretched[3] += 3;  // length now overruns the payload
    CHECK_THROWS_WITH_AS(from_binary(stretched), doctest::Contains("record truncated"),
                         Error);
}

TEST_CASE("a length field shorter than the payload is rejected") {
    std::vector<std::uint8_t> data = record_bytes(simple_node_record());
    std::vector<std::uint8_t> two = data;
    two.insert(two.end(), data.begin(), data.end());
    two[3] += 3;  // first record claims 3 bytes of its neighbor
    CHECK_THROWS_WITH_AS(from_binary(two), doctest::Contains("length mismatch"), Error);
}

TEST_CASE("both wire formats decode to the same records") {
    std::vector<Record> records = fig3_records();
    std::vector<Record> via_json = provjson_records(to_provjson(records));
    std::vector<Record> via_binary = from_binary(to_binary(records));
    // Orders differ (JSON buckets sort), so compare canonical forms.
    CHECK(to_provjson(via_json) == to_provjson(via_binary));
    CHECK(to_binary(causal_order(via_json)) == to_binary(causal_order(via_binary)));
}

TEST_CASE("bucket-ordered records need causal reordering before replay") {
    std::vector<Record> records = fig3_records();
    std::vector<Record> parsed = provjson_records(to_provjson(records));
    CHECK_THROWS_AS(graph_from_records(parsed), Error);

    ProvGraph replayed = graph_from_records(causal_order(parsed));
    ProvGraph original = graph_from_records(records);
    CHECK(graphs_isomorphic(replayed, original));
}

TEST_CASE("flattening a graph yields a replayable stream") {
    SimResult sim = simulate("wget", 2);
    BuildResult result = build(sim.trace, parse_policy("provenance=whole\n"));
    std::vector<Record> flat = records_from_graph(result.graph);
    ProvGraph rebuilt = graph_from_records(flat);
    CHECK(graphs_isomorphic(rebuilt, result.graph));
}

TEST_CASE("file loading sniffs the format from the leading bytes") {
    std::vector<Record> records = fig3_records();
    std::string dir = std::string(PROVKIT_BINARY_DIR);

    std::string bin_path = dir + "/wire_roundtrip.cfb";
    {
        std::vector<std::uint8_t> data = to_binary(records);
        std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
        REQUIRE(out.good());
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size()));
    }
    std::string json_path = dir + "/wire_roundtrip.provjson";
    {
        std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
        REQUIRE(out.good());
        out << to_provjson(records);
    }

    CHECK(to_provjson(load_records_file(bin_path)) == to_provjson(records));
    CHECK(to_provjson(load_records_file(json_path)) == to_provjson(records));
    CHECK(graphs_isomorphic(load_graph_file(bin_path), load_graph_file(json_path)));
    CHECK_THROWS_WITH_AS(load_records_file(dir + "/no_such_file.cfb"),
                         doctest::Contains("cannot open"), Error);
}

TEST_CASE("relay refuses a zero-capacity ring") {
    CHECK_THROWS_AS(RelayStream(0), Error);
}

TEST_CASE("relay matches the arithmetic model on randomized schedules") {
    std::vector<Record> pool = fig3_records();
    REQUIRE(pool.size() >= 4);
    std::mt19937_64 rng(20260815);

    for (int trial = 0; trial < 200; ++trial) {
        std::size_t capacity = 1 + rng() % 8;
        bool boot_buffer = (rng() % 2) == 0;
        RelayStream stream(capacity, boot_buffer);
        provtest::RelayModel model(capacity, boot_buffer);

        int steps = 5 + static_cast<int>(rng() % 60);
        for (int i = 0; i < steps; ++i) {
            if (rng() % 4 == 0) {
                std::vector<Record> got = stream.poll();
                std::vector<Record> want = model.poll();
                REQUIRE(got.size() == want.size());
                for (std::size_t k = 0; k < got.size(); ++k) {
                    CHECK(record_bytes(got[k]) == record_bytes(want[k]));
                }
            } else {
                const Record& record = pool[rng() % pool.size()];
                std::uint64_t before = model.dropped;
                model.offer(record);
                bool accepted = model.dropped == before;
                CHECK(stream.offer(record) == accepted);
            }
            CHECK(stream.dropped() == model.dropped);
        }

        std::vector<Record> got = stream.poll();
        std::vector<Record> want = model.poll();
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
            CHECK(record_bytes(got[k]) == record_bytes(want[k]));
        }
        CHECK(stream.dropped() == model.dropped);
    }
}

TEST_CASE("without a boot buffer every pre-poll record is shed") {
    std::vector<Record> pool = fig3_records();
    RelayStream stream(4, false);
    CHECK(!stream.offer(pool[0]));
    CHECK(!stream.offer(pool[1]));
    CHECK(stream.dropped() == 2);
    CHECK(stream.poll().empty());
    CHECK(stream.offer(pool[2]));
    std::vector<Record> drained = stream.poll();
    REQUIRE(drained.size() == 1);
    CHECK(record_bytes(drained[0]) == record_bytes(pool[2]));
}

TEST_CASE("overflow sheds the newest record and keeps the ring intact") {
    std::vector<Record> pool = fig3_records();
    REQUIRE(pool.size() >= 4);
    RelayStream stream(3, true);
    CHECK(stream.offer(pool[0]));
    CHECK(stream.offer(pool[1]));
    CHECK(stream.offer(pool[2]));
    CHECK(!stream.offer(pool[3]));
    CHECK(stream.dropped() == 1);
    std::vector<Record> drained = stream.poll();
    REQUIRE(drained.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(record_bytes(drained[i]) == record_bytes(pool[i]));
    }
}
