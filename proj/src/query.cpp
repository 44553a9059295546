// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include "prov/query.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "prov/wire.hpp"

namespace prov {
namespace {

using nlohmann::json;

// Outgoing edges per node, sorted by edge id so walks are deterministic.
// forward == true keys by `from` (effect to cause), false by `to`.
std::map<NodeIdentity, std::vector<const ProvEdge*>> adjacency(const ProvGraph& graph,
                                                               bool forward) {
    std::map<NodeIdentity, std::vector<const ProvEdge*>> adj;
    for (const ProvEdge& edge : graph.edges()) {
        adj[forward ? edge.from : edge.to].push_back(&edge);
    }
    for (auto& [node, edges] : adj) {
        std::sort(edges.begin(), edges.end(),
                  [](const ProvEdge* a, const ProvEdge* b) { return a->edge_id < b->edge_id; });
    }
    return adj;
}

std::set<NodeIdentity> walk(const ProvGraph& graph, const NodeIdentity& start,
                            const std::set<EdgeType>& edge_types, bool forward) {
    if (!graph.has_node(start)) {
        throw Error("unknown node " + qualified_id(start));
    }
    auto adj = adjacency(graph, forward);
    std::set<NodeIdentity> seen{start};
    std::vector<NodeIdentity> frontier{start};
    while (!frontier.empty()) {
        NodeIdentity current = frontier.back();
        frontier.pop_back();
        auto it = adj.find(current);
        if (it == adj.end()) continue;
        for (const ProvEdge* edge : it->second) {
            if (edge_types.find(edge->type) == edge_types.end()) continue;
            const NodeIdentity& next = forward ? edge->to : edge->from;
            if (seen.insert(next).second) frontier.push_back(next);
        }
    }
    return seen;
}

std::set<std::uint64_t> node_taints(const ProvNode& node) {
    std::set<std::uint64_t> taints;
    auto it = node.attributes.find("taints");
    if (it == node.attributes.end()) return taints;
    const std::string* joined = std::get_if<std::string>(&it->second);
    if (joined == nullptr) return taints;
    std::stringstream stream(*joined);
    std::string item;
    while (std::getline(stream, item, ',')) {
        if (!item.empty()) taints.insert(std::stoull(item));
    }
    return taints;
}

std::optional<std::uint64_t> smallest_common(const std::set<std::uint64_t>& taints,
                                             const std::set<std::uint64_t>& forbidden) {
    for (std::uint64_t tag : taints) {
        if (forbidden.find(tag) != forbidden.end()) return tag;
    }
    return std::nullopt;
}

NodeIdentity require_latest(const ProvGraph& graph, const ObjectKey& object) {
    std::optional<Version> latest = graph.latest_version(object);
    if (!latest) {
        throw Error("unknown object " + std::to_string(object.machine) + ":" +
                    std::to_string(object.boot) + ":" + std::to_string(object.object));
    }
    return NodeIdentity{object.machine, object.boot, object.object, *latest};
}

bool is_version_edge(EdgeType type) {
    return type == EdgeType::version_entity || type == EdgeType::version_activity;
}

}  // namespace

std::set<NodeIdentity> ancestry(const ProvGraph& graph, const NodeIdentity& start,
                                const std::set<EdgeType>& edge_types) {
    return walk(graph, start, edge_types, true);
}

std::set<NodeIdentity> descendants(const ProvGraph& graph, const NodeIdentity& start,
                                   const std::set<EdgeType>& edge_types) {
    return walk(graph, start, edge_types, false);
}

std::set<EdgeType> edge_type_set(const std::vector<std::string>& names) {
    std::set<EdgeType> types;
    for (const std::string& name : names) types.insert(edge_type_from_string(name));
    return types;
}

std::set<EdgeType> edge_types_except(const std::set<EdgeType>& excluded) {
    std::set<EdgeType> types;
    for (EdgeType type : all_edge_types()) {
        if (excluded.find(type) == excluded.end()) types.insert(type);
    }
    return types;
}

DlpVerdict dlp_check_taint(const ProvGraph& graph, const ObjectKey& object,
                           const std::set<std::uint64_t>& forbidden) {
    NodeIdentity latest = require_latest(graph, object);
    DlpVerdict verdict;
    std::optional<std::uint64_t> witness =
        smallest_common(node_taints(graph.node(latest)), forbidden);
    if (witness) {
        verdict.block = true;
        verdict.taint = witness;
    }
    return verdict;
}

DlpVerdict dlp_check_query(const ProvGraph& graph, const ObjectKey& object,
                           const std::set<std::uint64_t>& forbidden,
                           const CapturePolicy& policy) {
    NodeIdentity start = require_latest(graph, object);
    auto adj = adjacency(graph, true);

    std::deque<NodeIdentity> frontier{start};
    std::map<NodeIdentity, NodeIdentity> parent;
    std::set<NodeIdentity> seen{start};

    DlpVerdict verdict;
    while (!frontier.empty()) {
        NodeIdentity current = frontier.front();
        frontier.pop_front();
        const ProvNode& node = graph.node(current);

        std::optional<std::uint64_t> witness = smallest_common(node_taints(node), forbidden);
        if (witness) {
            verdict.block = true;
            verdict.taint = witness;
            // Unwind the parent chain: sink first, witness node last.
            std::vector<NodeIdentity> path{current};
            auto it = parent.find(current);
            while (it != parent.end()) {
                path.push_back(it->second);
                it = parent.find(it->second);
            }
            std::reverse(path.begin(), path.end());
            verdict.path = std::move(path);
            return verdict;
        }

        auto out = adj.find(current);
        if (out == adj.end()) continue;
        for (const ProvEdge* edge : out->second) {
            // A flow edge is followed only if the policy would have let a
            // taint ride it: the effect endpoint of every recorded flow is
            // this node, so its type is the propagation destination.
            if (!is_version_edge(edge->type) &&
                !propagate_allows(policy, edge->type, node.type)) {
                continue;
            }
            if (seen.insert(edge->to).second) {
                parent.emplace(edge->to, current);
                frontier.push_back(edge->to);
            }
        }
    }
    return verdict;
}

// ---- streaming compliance audit -------------------------------------------

bool NodePredicate::matches(const ProvNode& node) const {
    if (type && node.type != *type) return false;
    if (attr.empty()) return true;
    auto it = node.attributes.find(attr);
    if (it == node.attributes.end()) return false;
    std::string shown = attr_to_display(it->second);
    if (equals && shown != *equals) return false;
    if (prefix && shown.compare(0, prefix->size(), *prefix) != 0) return false;
    return true;
}

namespace {

NodePredicate parse_predicate(const json& value, const std::string& where) {
    if (!value.is_object()) throw Error(where + ": predicate must be an object");
    NodePredicate predicate;
    for (const auto& [key, field] : value.items()) {
        if (key == "type") {
            if (!field.is_string()) throw Error(where + ".type: expected a string");
            predicate.type = node_type_from_string(field.get<std::string>());
        } else if (key == "attr") {
            if (!field.is_string()) throw Error(where + ".attr: expected a string");
            predicate.attr = field.get<std::string>();
        } else if (key == "equals") {
            if (!field.is_string()) throw Error(where + ".equals: expected a string");
            predicate.equals = field.get<std::string>();
        } else if (key == "prefix") {
            if (!field.is_string()) throw Error(where + ".prefix: expected a string");
            predicate.prefix = field.get<std::string>();
        } else {
            throw Error(where + "." + key + ": unknown predicate field");
        }
    }
    if ((predicate.equals || predicate.prefix) && predicate.attr.empty()) {
        throw Error(where + ": equals/prefix need an attr to test");
    }
    return predicate;
}

std::set<EdgeType> parse_edge_list(const json& value, const std::string& where) {
    if (!value.is_array()) throw Error(where + ": expected an array of edge type names");
    std::set<EdgeType> types;
    for (const json& name : value) {
        if (!name.is_string()) throw Error(where + ": expected an array of edge type names");
        try {
            types.insert(edge_type_from_string(name.get<std::string>()));
        } catch (const Error& e) {
            throw Error(where + ": " + e.what());
        }
    }
    return types;
}

}  // namespace

std::vector<PathConstraint> parse_constraints(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(std::string("constraints: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("constraints") || !doc["constraints"].is_array()) {
        throw Error("constraints: expected an object with a \"constraints\" array");
    }

    std::vector<PathConstraint> constraints;
    std::set<std::string> ids;
    std::size_t index = 0;
    for (const json& entry : doc["constraints"]) {
        std::string where = "constraints[" + std::to_string(index++) + "]";
        if (!entry.is_object()) throw Error(where + ": expected an object");

        PathConstraint constraint;
        constraint.edge_types = edge_types_except({});
        bool have_source = false;
        bool have_sink = false;
        for (const auto& [key, field] : entry.items()) {
            if (key == "id") {
                if (!field.is_string()) throw Error(where + ".id: expected a string");
                constraint.id = field.get<std::string>();
            } else if (key == "source") {
                constraint.source = parse_predicate(field, where + ".source");
                have_source = true;
            } else if (key == "sink") {
                constraint.sink = parse_predicate(field, where + ".sink");
                have_sink = true;
            } else if (key == "sanitizer") {
                constraint.sanitizer = parse_predicate(field, where + ".sanitizer");
            } else if (key == "edge_types") {
                constraint.edge_types = parse_edge_list(field, where + ".edge_types");
            } else if (key == "exclude_edge_types") {
                for (EdgeType type : parse_edge_list(field, where + ".exclude_edge_types")) {
                    constraint.edge_types.erase(type);
                }
            } else if (key == "verdict") {
                if (field == "flag") {
                    constraint.verdict = PathConstraint::Verdict::flag;
                } else if (field == "block") {
                    constraint.verdict = PathConstraint::Verdict::block;
                } else {
                    throw Error(where + ".verdict: expected \"flag\" or \"block\"");
                }
            } else {
                throw Error(where + "." + key + ": unknown constraint field");
            }
        }
        if (constraint.id.empty()) throw Error(where + ": missing id");
        if (!have_source) throw Error(where + ": missing source predicate");
        if (!have_sink) throw Error(where + ": missing sink predicate");
        if (!ids.insert(constraint.id).second) {
            throw Error(where + ": duplicate id \"" + constraint.id + "\"");
        }
        constraints.push_back(std::move(constraint));
    }
    return constraints;
}

std::vector<PathConstraint> parse_constraints_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_constraints(buffer.str());
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

StreamingAuditor::StreamingAuditor(std::vector<PathConstraint> constraints)
    : constraints_(std::move(constraints)), labels_(constraints_.size()) {}

void StreamingAuditor::feed(const Record& record) {
    for (std::size_t ci = 0; ci < constraints_.size(); ++ci) {
        if (record.kind == Record::Kind::node) {
            arm(ci, record.node);
        } else {
            relay(ci, record.edge);
        }
    }
}

void StreamingAuditor::arm(std::size_t ci, const ProvNode& node) {
    const PathConstraint& constraint = constraints_[ci];
    auto [it, inserted] = labels_[ci].try_emplace(node.identity);
    if (!inserted) return;
    LabelState& state = it->second;
    state.is_sink = constraint.sink.matches(node);
    state.is_sanitizer = constraint.sanitizer && constraint.sanitizer->matches(node);
    state.is_source = !state.is_sanitizer && constraint.source.matches(node);
    if (state.is_source) {
        state.labeled = true;
        if (state.is_sink) report(ci, node.identity);
    }
}

void StreamingAuditor::relay(std::size_t ci, const ProvEdge& edge) {
    const PathConstraint& constraint = constraints_[ci];
    if (constraint.edge_types.find(edge.type) == constraint.edge_types.end()) return;
    // The label travels against the edge: cause (to) into effect (from).
    auto& states = labels_[ci];
    auto cause = states.find(edge.to);
    auto effect = states.find(edge.from);
    if (cause == states.end() || effect == states.end()) return;
    if (!cause->second.labeled) return;
    LabelState& target = effect->second;
    if (target.is_sanitizer || target.labeled) return;
    target.labeled = true;
    target.has_parent = true;
    target.parent = edge.to;
    if (target.is_sink && !target.reported) report(ci, edge.from);
}

void StreamingAuditor::report(std::size_t ci, const NodeIdentity& sink) {
    auto& states = labels_[ci];
    states[sink].reported = true;

    std::vector<NodeIdentity> path{sink};
    NodeIdentity cursor = sink;
    while (states[cursor].has_parent) {
        cursor = states[cursor].parent;
        path.push_back(cursor);
    }
    std::reverse(path.begin(), path.end());

    Violation violation;
    violation.constraint_id = constraints_[ci].id;
    violation.sink = sink;
    violation.path = std::move(path);
    violation.verdict = constraints_[ci].verdict;
    violations_.push_back(std::move(violation));
}

std::vector<Violation> audit(const std::vector<Record>& records,
                             const std::vector<PathConstraint>& constraints) {
    StreamingAuditor auditor(constraints);
    for (const Record& record : records) auditor.feed(record);
    return auditor.violations();
}

std::vector<std::pair<std::size_t, std::size_t>> window_spans(std::size_t count,
                                                              std::size_t size,
                                                              std::size_t stride) {
    if (stride < 1 || size < stride) {
        throw Error("window size must be at least the stride, both positive");
    }
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (std::size_t start = 0; start < count; start += stride) {
        spans.emplace_back(start, std::min(size, count - start));
    }
    return spans;
}

std::vector<std::vector<Record>> windows(const std::vector<Record>& records,
                                         std::size_t size, std::size_t stride) {
    std::vector<std::vector<Record>> batches;
    for (auto [start, length] : window_spans(records.size(), size, stride)) {
        batches.emplace_back(records.begin() + static_cast<std::ptrdiff_t>(start),
                             records.begin() + static_cast<std::ptrdiff_t>(start + length));
    }
    return batches;
}

}  // namespace prov
