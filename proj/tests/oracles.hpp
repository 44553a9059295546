// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

// Reference implementations the real code is judged against. Each one
// favors the dumbest correct algorithm over speed and shares no code
// with the library counterpart it checks.

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "prov/model.hpp"
#include "prov/query.hpp"

namespace provtest {

// Explicit DFS cycle search over the directed edges, ignoring the
// creation-index bookkeeping the graph uses internally. Returns one
// cycle's node sequence if any exists. The raw overload exists so the
// detector itself can be fed a cycle, which the graph API refuses.
std::optional<std::vector<prov::NodeIdentity>> find_cycle(
    const std::vector<prov::ProvNode>& nodes, const std::vector<prov::ProvEdge>& edges);
std::optional<std::vector<prov::NodeIdentity>> find_cycle(const prov::ProvGraph& graph);

// Reachability by fixed-point iteration over the raw edge list.
// forward walks from -> to (effect to cause), mirrored otherwise.
std::set<prov::NodeIdentity> reach_oracle(const std::vector<prov::ProvEdge>& edges,
                                          const prov::NodeIdentity& start,
                                          const std::set<prov::EdgeType>& types,
                                          bool forward);

// Whole-graph path search for constraint violations: every node that
// matches the sink predicate and is reachable, cause to effect, from a
// source-matching node without touching a sanitizer-matching node.
std::set<std::pair<std::string, prov::NodeIdentity>> audit_oracle(
    const std::vector<prov::ProvNode>& nodes, const std::vector<prov::ProvEdge>& edges,
    const std::vector<prov::PathConstraint>& constraints);

// Arithmetic model of the relay ring: plain deque plus drop counting.
struct RelayModel {
    std::size_t capacity;
    bool boot_buffer;
    bool polled = false;
    std::deque<prov::Record> held;
    std::uint64_t dropped = 0;

    RelayModel(std::size_t cap, bool boot) : capacity(cap), boot_buffer(boot) {}

    void offer(const prov::Record& record) {
        if (!boot_buffer && !polled) {
            ++dropped;
            return;
        }
        if (held.size() == capacity) {
            ++dropped;
            return;
        }
        held.push_back(record);
    }

    std::vector<prov::Record> poll() {
        polled = true;
        std::vector<prov::Record> out(held.begin(), held.end());
        held.clear();
        return out;
    }
};

}  // namespace provtest
