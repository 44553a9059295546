// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include <doctest.h>

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "prov/builder.hpp"
#include "prov/query.hpp"
#include "prov/trace.hpp"
#include "prov/wire.hpp"

using namespace prov;

namespace {

BuildResult build_whole(const std::string& scenario, std::uint64_t seed) {
    SimResult sim = simulate(scenario, seed);
    return build(sim.trace, parse_policy("provenance=whole\n"));
}

std::set<std::pair<std::string, NodeIdentity>> violation_keys(
    const std::vector<Violation>& violations) {
    std::set<std::pair<std::string, NodeIdentity>> keys;
    for (const Violation& v : violations) keys.emplace(v.constraint_id, v.sink);
    return keys;
}

}  // namespace

TEST_CASE("ancestry and descendants agree with fixed-point reachability") {
    for (const char* scenario : {"fig3", "wget", "shm"}) {
        BuildResult result = build_whole(scenario, 4);
        const ProvGraph& graph = result.graph;
        std::vector<std::set<EdgeType>> type_sets{
            edge_types_except({}),
            {EdgeType::read, EdgeType::write},
            {EdgeType::version_entity, EdgeType::version_activity},
        };
        std::size_t step = graph.node_count() / 5 + 1;
        for (std::size_t i = 0; i < graph.node_count(); i += step) {
            const NodeIdentity& start = graph.nodes()[i].identity;
            for (const auto& types : type_sets) {
                CAPTURE(scenario);
                CHECK(ancestry(graph, start, types) ==
                      provtest::reach_oracle(graph.edges(), start, types, true));
                CHECK(descendants(graph, start, types) ==
                      provtest::reach_oracle(graph.edges(), start, types, false));
            }
        }
    }
}

TEST_CASE("the copy pipeline's final file depends on everything but the machine") {
    BuildResult result = build_whole("fig3", 1);
    std::set<NodeIdentity> deps =
        ancestry(result.graph, NodeIdentity{1, 1, 1, 1}, edge_types_except({}));
    CHECK(deps.size() == 7);
    for (const NodeIdentity& id : deps) CHECK(id.object != 0);

    // The root file version reaches the relay states that come after it:
    // both task versions that handled the bytes, the socket state written
    // with them, and the rewritten file. The machine node, the initial
    // task, and the fresh socket all predate any influence from the file.
    std::set<NodeIdentity> downstream =
        descendants(result.graph, NodeIdentity{1, 1, 1, 0}, edge_types_except({}));
    CHECK(downstream.size() == 5);
}

TEST_CASE("walks from an unknown node fail loudly") {
    BuildResult result = build_whole("fig3", 1);
    NodeIdentity ghost{9, 9, 9, 9};
    CHECK_THROWS_WITH_AS(ancestry(result.graph, ghost, edge_types_except({})),
                         doctest::Contains("unknown node"), Error);
    CHECK_THROWS_WITH_AS(descendants(result.graph, ghost, edge_types_except({})),
                         doctest::Contains("unknown node"), Error);
}

TEST_CASE("taint-mode dlp reads the latest state's taint set") {
    CapturePolicy policy = parse_policy("provenance=whole\ntaint=7;/data/secret\n");
    SimResult sim = simulate("shm", 1);
    BuildResult result = build(sim.trace, policy);

    REQUIRE(!sim.truth.injections.empty());
    ObjectKey secret = sim.truth.injections[0].object;
    DlpVerdict hit = dlp_check_taint(result.graph, secret, {7});
    CHECK(hit.block);
    CHECK(hit.taint == 7);

    DlpVerdict other_tag = dlp_check_taint(result.graph, secret, {8});
    CHECK(!other_tag.block);

    // The machine description never carries data taints.
    DlpVerdict clean = dlp_check_taint(result.graph, ObjectKey{1, 1, 0}, {7});
    CHECK(!clean.block);

    CHECK_THROWS_WITH_AS(dlp_check_taint(result.graph, ObjectKey{5, 5, 5}, {7}),
                         doctest::Contains("unknown object"), Error);
    CHECK_THROWS_WITH_AS(dlp_check_query(result.graph, ObjectKey{5, 5, 5}, {7}, policy),
                         doctest::Contains("unknown object"), Error);
}

TEST_CASE("query-mode dlp returns a witness path ending at tainted state") {
    CapturePolicy policy = parse_policy("provenance=whole\ntaint=7;/data/secret\n");
    SimResult sim = simulate("shm", 1);
    BuildResult result = build(sim.trace, policy);

    // Pick a truth-reached object other than the secret itself.
    ObjectKey secret = sim.truth.injections[0].object;
    ObjectKey target{0, 0, 0};
    bool found = false;
    for (const ObjectKey& key : sim.truth.reached.at(7)) {
        if (!(key == secret)) {
            target = key;
            found = true;
            break;
        }
    }
    REQUIRE(found);

    DlpVerdict verdict = dlp_check_query(result.graph, target, {7}, policy);
    CHECK(verdict.block);
    REQUIRE(!verdict.path.empty());
    // Sink first: the queried object's latest state.
    CHECK(verdict.path.front().object == target.object);
    CHECK(verdict.path.front().version == *result.graph.latest_version(target));
    // The far end is a node that really holds the forbidden tag.
    auto taints = result.graph.node(verdict.path.back()).attributes.find("taints");
    REQUIRE(taints != result.graph.node(verdict.path.back()).attributes.end());
    CHECK(attr_to_display(taints->second).find('7') != std::string::npos);
}

TEST_CASE("both dlp modes agree on every object of every graph") {
    std::vector<CapturePolicy> policies{
        parse_policy("provenance=whole\ntaint=7;/data/secret\n"
                     "taint=31;/var/db/main.db\n"),
        parse_policy("provenance=whole\ntaint=7;/data/secret\n"
                     "taint=31;/var/db/main.db\npropagate_node_filter=task\n"),
        parse_policy("provenance=whole\ntaint=7;/data/secret\n"
                     "taint=31;/var/db/main.db\npropagate_edge_filter=read,sh_read\n"),
    };
    std::set<std::uint64_t> forbidden{7, 31};
    for (const char* scenario : {"shm", "webstack", "pipeline"}) {
        for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
            SimResult sim = simulate(scenario, seed);
            for (const CapturePolicy& policy : policies) {
                BuildResult result = build(sim.trace, policy);
                std::set<ObjectKey> keys;
                for (const ProvNode& node : result.graph.nodes()) {
                    keys.insert(
                        ObjectKey{node.identity.machine, node.identity.boot,
                                  node.identity.object});
                }
                for (const ObjectKey& key : keys) {
                    DlpVerdict fast = dlp_check_taint(result.graph, key, forbidden);
                    DlpVerdict slow = dlp_check_query(result.graph, key, forbidden, policy);
                    CAPTURE(scenario);
                    CAPTURE(seed);
                    CAPTURE(key.object);
                    CHECK(fast.block == slow.block);
                }
            }
        }
    }
}

TEST_CASE("constraint files parse into typed path rules") {
    std::vector<PathConstraint> constraints = parse_constraints_file(
        std::string(PROVKIT_SOURCE_DIR) + "/data/constraints/webstack.json");
    REQUIRE(constraints.size() == 5);
    std::set<std::string> ids;
    for (const PathConstraint& c : constraints) ids.insert(c.id);
    CHECK(ids.count("db-external-unsanitized") == 1);
    CHECK(ids.count("db-external-no-wire-crossing") == 1);

    bool saw_block = false;
    for (const PathConstraint& c : constraints) {
        if (c.verdict == PathConstraint::Verdict::block) {
            saw_block = true;
            // exclude_edge_types really removed the wire hop.
            CHECK(c.edge_types.count(EdgeType::receive) == 0);
        } else {
            CHECK(c.edge_types.count(EdgeType::receive) == 1);
        }
    }
    CHECK(saw_block);
}

TEST_CASE("constraint parse errors name their location") {
    CHECK_THROWS_WITH_AS(parse_constraints("[]"), doctest::Contains("constraints"), Error);
    CHECK_THROWS_WITH_AS(
        parse_constraints(R"({"constraints": [{"source": {}, "sink": {}}]})"),
        doctest::Contains("constraints[0]: missing id"), Error);
    CHECK_THROWS_WITH_AS(
        parse_constraints(R"({"constraints": [{"id": "a", "sink": {}}]})"),
        doctest::Contains("missing source"), Error);
    CHECK_THROWS_WITH_AS(
        parse_constraints(
            R"({"constraints": [{"id": "a", "source": {}, "sink": {}, "wibble": 1}]})"),
        doctest::Contains("constraints[0].wibble"), Error);
    CHECK_THROWS_WITH_AS(
        parse_constraints(
            R"({"constraints": [{"id": "a", "source": {"type": "blob"}, "sink": {}}]})"),
        doctest::Contains("blob"), Error);
    CHECK_THROWS_WITH_AS(
        parse_constraints(
            R"({"constraints": [{"id": "a", "source": {}, "sink": {},
                "edge_types": ["warp"]}]})"),
        doctest::Contains("constraints[0].edge_types"), Error);
    CHECK_THROWS_WITH_AS(
        parse_constraints(
            R"({"constraints": [{"id": "a", "source": {"equals": "x"}, "sink": {}}]})"),
        doctest::Contains("equals/prefix need an attr"), Error);
    CHECK_THROWS_WITH_AS(
        parse_constraints(
            R"({"constraints": [
                {"id": "a", "source": {}, "sink": {}},
                {"id": "a", "source": {}, "sink": {}}]})"),
        doctest::Contains("duplicate id"), Error);
    CHECK_THROWS_WITH_AS(
        parse_constraints(
            R"({"constraints": [{"id": "a", "source": {}, "sink": {},
                "verdict": "warn"}]})"),
        doctest::Contains("verdict"), Error);
    CHECK_THROWS_WITH_AS(parse_constraints_file("/nonexistent/rules.json"),
                         doctest::Contains("/nonexistent/rules.json"), Error);
}

TEST_CASE("node predicates test type, equality, and prefixes on display form") {
    ProvNode node;
    node.identity = NodeIdentity{1, 1, 8, 0};
    node.type = NodeType::file;
    node.attributes["path"] = std::string("/var/db/main.db");
    node.attributes["uid"] = std::uint64_t{1000};

    NodePredicate by_type;
    by_type.type = NodeType::file;
    CHECK(by_type.matches(node));
    by_type.type = NodeType::task;
    CHECK(!by_type.matches(node));

    NodePredicate by_path;
    by_path.attr = "path";
    by_path.equals = "/var/db/main.db";
    CHECK(by_path.matches(node));
    by_path.equals = "/var/db/other.db";
    CHECK(!by_path.matches(node));

    NodePredicate by_prefix;
    by_prefix.attr = "path";
    by_prefix.prefix = "/var/db/";
    CHECK(by_prefix.matches(node));
    by_prefix.prefix = "/etc/";
    CHECK(!by_prefix.matches(node));

    NodePredicate numeric;
    numeric.attr = "uid";
    numeric.equals = "1000";
    CHECK(numeric.matches(node));

    NodePredicate missing;
    missing.attr = "cgroup";
    CHECK(!missing.matches(node));
}

TEST_CASE("streaming audit equals whole-graph search on the web stack") {
    std::vector<PathConstraint> constraints = parse_constraints_file(
        std::string(PROVKIT_SOURCE_DIR) + "/data/constraints/webstack.json");

    for (bool sanitized : {false, true}) {
        ScenarioParams params;
        params.sanitizer = sanitized;
        SimResult sim = simulate("webstack", 1, params);
        BuildResult result = build(sim.trace, parse_policy("provenance=whole\n"));

        std::vector<Violation> streamed = audit(result.records, constraints);
        auto want = provtest::audit_oracle(result.graph.nodes(), result.graph.edges(),
                                           constraints);
        CAPTURE(sanitized);
        CHECK(violation_keys(streamed) == want);

        // The interposed scrubber kills every flow it can interpose on.
        if (sanitized) {
            for (const Violation& v : streamed) {
                CHECK(v.constraint_id == "client-input-reaches-db");
            }
        }

        // Witness paths are genuine cause-to-effect chains of allowed types.
        std::map<std::string, const PathConstraint*> by_id;
        for (const PathConstraint& c : constraints) by_id[c.id] = &c;
        std::map<NodeIdentity, const ProvNode*> node_of;
        for (const ProvNode& node : result.graph.nodes()) node_of[node.identity] = &node;

        for (const Violation& v : streamed) {
            const PathConstraint& rule = *by_id.at(v.constraint_id);
            REQUIRE(!v.path.empty());
            CHECK(v.path.back() == v.sink);
            CHECK(rule.source.matches(*node_of.at(v.path.front())));
            CHECK(rule.sink.matches(*node_of.at(v.path.back())));
            if (rule.sanitizer) {
                for (const NodeIdentity& id : v.path) {
                    CHECK(!rule.sanitizer->matches(*node_of.at(id)));
                }
            }
            for (std::size_t i = 0; i + 1 < v.path.size(); ++i) {
                bool hop = false;
                for (const ProvEdge& edge : result.graph.edges()) {
                    if (edge.to == v.path[i] && edge.from == v.path[i + 1] &&
                        rule.edge_types.count(edge.type)) {
                        hop = true;
                        break;
                    }
                }
                CHECK(hop);
            }
        }
    }
}

TEST_CASE("violation counts match the pinned web-stack behavior") {
    std::vector<PathConstraint> constraints = parse_constraints_file(
        std::string(PROVKIT_SOURCE_DIR) + "/data/constraints/webstack.json");
    BuildResult plain = build_whole("webstack", 1);
    CHECK(audit(plain.records, constraints).size() == 9);

    ScenarioParams params;
    params.sanitizer = true;
    SimResult sim = simulate("webstack", 1, params);
    BuildResult scrubbed = build(sim.trace, parse_policy("provenance=whole\n"));
    CHECK(audit(scrubbed.records, constraints).size() == 3);
}

TEST_CASE("feeding records window by window equals one batch pass") {
    std::vector<PathConstraint> constraints = parse_constraints_file(
        std::string(PROVKIT_SOURCE_DIR) + "/data/constraints/webstack.json");
    BuildResult result = build_whole("webstack", 2);

    std::vector<Violation> batch = audit(result.records, constraints);

    StreamingAuditor auditor(constraints);
    for (const auto& window : windows(result.records, 64, 64)) {
        for (const Record& record : window) auditor.feed(record);
    }
    CHECK(violation_keys(auditor.violations()) == violation_keys(batch));
    CHECK(auditor.violations().size() == batch.size());
}

TEST_CASE("window spans tile the stream") {
    CHECK(window_spans(10, 4, 2) ==
          std::vector<std::pair<std::size_t, std::size_t>>{
              {0, 4}, {2, 4}, {4, 4}, {6, 4}, {8, 2}});
    CHECK(window_spans(10, 3, 3) ==
          std::vector<std::pair<std::size_t, std::size_t>>{{0, 3}, {3, 3}, {6, 3}, {9, 1}});
    CHECK(window_spans(5, 20, 20) ==
          std::vector<std::pair<std::size_t, std::size_t>>{{0, 5}});
    CHECK(window_spans(0, 4, 2).empty());
    CHECK_THROWS_AS(window_spans(10, 2, 4), Error);
    CHECK_THROWS_AS(window_spans(10, 4, 0), Error);

    BuildResult result = build_whole("fig3", 1);
    auto parts = windows(result.records, 5, 5);
    std::vector<Record> glued;
    for (const auto& part : parts) glued.insert(glued.end(), part.begin(), part.end());
    CHECK(to_binary(glued) == to_binary(result.records));
}
