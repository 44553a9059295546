// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include "oracles.hpp"

#include <algorithm>
#include <map>

namespace provtest {

using prov::EdgeType;
using prov::NodeIdentity;
using prov::PathConstraint;
using prov::ProvEdge;
using prov::ProvGraph;
using prov::ProvNode;

std::optional<std::vector<NodeIdentity>> find_cycle(const std::vector<ProvNode>& nodes,
                                                    const std::vector<ProvEdge>& edges) {
    std::map<NodeIdentity, std::vector<NodeIdentity>> next;
    for (const ProvEdge& edge : edges) next[edge.from].push_back(edge.to);

    enum class Color { white, gray, black };
    std::map<NodeIdentity, Color> color;
    for (const ProvNode& node : nodes) color[node.identity] = Color::white;

    // Iterative DFS; gray nodes are on the current stack, so meeting one
    // again closes a cycle.
    std::vector<NodeIdentity> stack;
    for (const ProvNode& root : nodes) {
        if (color[root.identity] != Color::white) continue;
        std::vector<std::pair<NodeIdentity, std::size_t>> work{{root.identity, 0}};
        stack.clear();
        color[root.identity] = Color::gray;
        stack.push_back(root.identity);
        while (!work.empty()) {
            auto& [current, index] = work.back();
            const std::vector<NodeIdentity>& out = next[current];
            if (index < out.size()) {
                NodeIdentity target = out[index++];
                if (color[target] == Color::gray) {
                    auto begin = std::find(stack.begin(), stack.end(), target);
                    std::vector<NodeIdentity> cycle(begin, stack.end());
                    cycle.push_back(target);
                    return cycle;
                }
                if (color[target] == Color::white) {
                    color[target] = Color::gray;
                    stack.push_back(target);
                    work.emplace_back(target, 0);
                }
            } else {
                color[current] = Color::black;
                stack.pop_back();
                work.pop_back();
            }
        }
    }
    return std::nullopt;
}

std::optional<std::vector<NodeIdentity>> find_cycle(const ProvGraph& graph) {
    return find_cycle(graph.nodes(), graph.edges());
}

std::set<NodeIdentity> reach_oracle(const std::vector<ProvEdge>& edges,
                                    const NodeIdentity& start,
                                    const std::set<EdgeType>& types, bool forward) {
    std::set<NodeIdentity> reached{start};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const ProvEdge& edge : edges) {
            if (types.find(edge.type) == types.end()) continue;
            const NodeIdentity& tail = forward ? edge.from : edge.to;
            const NodeIdentity& head = forward ? edge.to : edge.from;
            if (reached.count(tail) && !reached.count(head)) {
                reached.insert(head);
                grew = true;
            }
        }
    }
    return reached;
}

std::set<std::pair<std::string, NodeIdentity>> audit_oracle(
    const std::vector<ProvNode>& nodes, const std::vector<ProvEdge>& edges,
    const std::vector<PathConstraint>& constraints) {
    std::set<std::pair<std::string, NodeIdentity>> violations;
    for (const PathConstraint& constraint : constraints) {
        std::set<NodeIdentity> sanitizers;
        std::set<NodeIdentity> reached;
        for (const ProvNode& node : nodes) {
            if (constraint.sanitizer && constraint.sanitizer->matches(node)) {
                sanitizers.insert(node.identity);
            }
        }
        for (const ProvNode& node : nodes) {
            if (constraint.source.matches(node) && !sanitizers.count(node.identity)) {
                reached.insert(node.identity);
            }
        }
        // Labels travel cause to effect: against the stored edge
        // direction, never entering a sanitizer node.
        bool grew = true;
        while (grew) {
            grew = false;
            for (const ProvEdge& edge : edges) {
                if (constraint.edge_types.find(edge.type) == constraint.edge_types.end()) {
                    continue;
                }
                if (reached.count(edge.to) && !reached.count(edge.from) &&
                    !sanitizers.count(edge.from)) {
                    reached.insert(edge.from);
                    grew = true;
                }
            }
        }
        for (const ProvNode& node : nodes) {
            if (reached.count(node.identity) && constraint.sink.matches(node)) {
                violations.emplace(constraint.id, node.identity);
            }
        }
    }
    return violations;
}

}  // namespace provtest
