// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include "prov/model.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <sstream>
#include <tuple>

namespace prov {

namespace {

struct NodeTypeName {
    NodeType type;
    const char* name;
};

constexpr std::array<NodeTypeName, 17> kNodeTypeNames{{
    {NodeType::task, "task"},
    {NodeType::file, "file"},
    {NodeType::directory, "directory"},
    {NodeType::socket, "socket"},
    {NodeType::pipe, "pipe"},
    {NodeType::shm, "shm"},
    {NodeType::packet, "packet"},
    {NodeType::address, "address"},
    {NodeType::path, "path"},
    {NodeType::iattr, "iattr"},
    {NodeType::xattr, "xattr"},
    {NodeType::argv, "argv"},
    {NodeType::log_entry, "log_entry"},
    {NodeType::machine, "machine"},
    {NodeType::disclosed_entity, "disclosed_entity"},
    {NodeType::user, "user"},
    {NodeType::group, "group"},
}};

struct EdgeTypeName {
    EdgeType type;
    const char* name;
};

constexpr std::array<EdgeTypeName, 26> kEdgeTypeNames{{
    {EdgeType::used, "used"},
    {EdgeType::was_generated_by, "was_generated_by"},
    {EdgeType::was_informed_by, "was_informed_by"},
    {EdgeType::was_derived_from, "was_derived_from"},
    {EdgeType::was_associated_with, "was_associated_with"},
    {EdgeType::version_entity, "version_entity"},
    {EdgeType::version_activity, "version_activity"},
    {EdgeType::read, "read"},
    {EdgeType::write, "write"},
    {EdgeType::create, "create"},
    {EdgeType::exec, "exec"},
    {EdgeType::fork, "fork"},
    {EdgeType::clone_mem, "clone_mem"},
    {EdgeType::setattr, "setattr"},
    {EdgeType::getattr, "getattr"},
    {EdgeType::perm_read, "perm_read"},
    {EdgeType::perm_write, "perm_write"},
    {EdgeType::perm_exec, "perm_exec"},
    {EdgeType::send, "send"},
    {EdgeType::receive, "receive"},
    {EdgeType::connect, "connect"},
    {EdgeType::bind, "bind"},
    {EdgeType::sh_read, "sh_read"},
    {EdgeType::sh_write, "sh_write"},
    {EdgeType::log, "log"},
    {EdgeType::disclosed, "disclosed"},
}};

std::string identity_label(const NodeIdentity& id) {
    std::ostringstream out;
    out << id.machine << ":" << id.boot << ":" << id.object << ":" << id.version;
    return out.str();
}

const AttrValue* find_attr(const AttrMap& attrs, const std::string& key) {
    auto it = attrs.find(key);
    return it == attrs.end() ? nullptr : &it->second;
}

void require_attrs(const NodeIdentity& id, NodeType type, const AttrMap& attrs,
                   std::initializer_list<const char*> keys) {
    for (const char* key : keys) {
        if (!find_attr(attrs, key)) {
            throw Error("node " + identity_label(id) + " of type " + to_string(type) +
                        " is missing required attribute '" + key + "'");
        }
    }
}

}  // namespace

ProvClass prov_class(NodeType type) {
    switch (type) {
        case NodeType::task:
            return ProvClass::activity;
        case NodeType::user:
        case NodeType::group:
            return ProvClass::agent;
        default:
            return ProvClass::entity;
    }
}

RelationClass relation_class(EdgeType type) {
    switch (type) {
        case EdgeType::used:
        case EdgeType::read:
        case EdgeType::exec:
        case EdgeType::getattr:
        case EdgeType::perm_read:
        case EdgeType::perm_write:
        case EdgeType::perm_exec:
        case EdgeType::receive:
        case EdgeType::sh_read:
            return RelationClass::used;
        case EdgeType::was_generated_by:
        case EdgeType::write:
        case EdgeType::create:
        case EdgeType::setattr:
        case EdgeType::send:
        case EdgeType::sh_write:
        case EdgeType::log:
        case EdgeType::disclosed:
            return RelationClass::was_generated_by;
        case EdgeType::was_informed_by:
        case EdgeType::version_activity:
        case EdgeType::fork:
        case EdgeType::clone_mem:
            return RelationClass::was_informed_by;
        case EdgeType::was_derived_from:
        case EdgeType::version_entity:
        case EdgeType::connect:
        case EdgeType::bind:
            return RelationClass::was_derived_from;
        case EdgeType::was_associated_with:
            return RelationClass::was_associated_with;
    }
    throw Error("unknown edge type");
}

const std::vector<NodeType>& all_node_types() {
    static const std::vector<NodeType> types = [] {
        std::vector<NodeType> out;
        for (const auto& entry : kNodeTypeNames) out.push_back(entry.type);
        return out;
    }();
    return types;
}

const std::vector<EdgeType>& all_edge_types() {
    static const std::vector<EdgeType> types = [] {
        std::vector<EdgeType> out;
        for (const auto& entry : kEdgeTypeNames) out.push_back(entry.type);
        return out;
    }();
    return types;
}

std::string to_string(NodeType type) {
    for (const auto& entry : kNodeTypeNames) {
        if (entry.type == type) return entry.name;
    }
    throw Error("unknown node type");
}

std::string to_string(EdgeType type) {
    for (const auto& entry : kEdgeTypeNames) {
        if (entry.type == type) return entry.name;
    }
    throw Error("unknown edge type");
}

std::string to_string(ProvClass cls) {
    switch (cls) {
        case ProvClass::entity:
            return "entity";
        case ProvClass::activity:
            return "activity";
        case ProvClass::agent:
            return "agent";
    }
    throw Error("unknown prov class");
}

std::string to_string(RelationClass cls) {
    switch (cls) {
        case RelationClass::used:
            return "used";
        case RelationClass::was_generated_by:
            return "wasGeneratedBy";
        case RelationClass::was_informed_by:
            return "wasInformedBy";
        case RelationClass::was_derived_from:
            return "wasDerivedFrom";
        case RelationClass::was_associated_with:
            return "wasAssociatedWith";
    }
    throw Error("unknown relation class");
}

NodeType node_type_from_string(const std::string& name) {
    for (const auto& entry : kNodeTypeNames) {
        if (name == entry.name) return entry.type;
    }
    throw Error("unknown node type '" + name + "'");
}

EdgeType edge_type_from_string(const std::string& name) {
    for (const auto& entry : kEdgeTypeNames) {
        if (name == entry.name) return entry.type;
    }
    throw Error("unknown edge type '" + name + "'");
}

std::string attr_to_display(const AttrValue& value) {
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    if (const auto* u = std::get_if<std::uint64_t>(&value)) return std::to_string(*u);
    if (const auto* i = std::get_if<std::int64_t>(&value)) return std::to_string(*i);
    return std::get<bool>(value) ? "true" : "false";
}

const ProvNode& ProvGraph::add_node(const NodeIdentity& identity, NodeType type,
                                    const AttrMap& attributes) {
    if (index_.count(identity)) {
        throw Error("duplicate node identity " + identity_label(identity));
    }
    switch (type) {
        case NodeType::file:
            require_attrs(identity, type, attributes, {"path", "uid", "gid", "mode"});
            break;
        case NodeType::task:
            require_attrs(identity, type, attributes,
                          {"pid", "uid", "gid", "secctx", "cgroup", "namespaces"});
            break;
        case NodeType::packet:
            require_attrs(identity, type, attributes,
                          {"ip_id", "src_ip", "dst_ip", "src_port", "dst_port", "protocol"});
            break;
        default:
            break;
    }
    // Versions of one object must arrive as an unbroken 0,1,2,... chain.
    auto latest = latest_version(identity.key());
    if (identity.version == 0) {
        if (latest) {
            throw Error("version 0 of object already versioned: " + identity_label(identity));
        }
    } else {
        if (!latest || *latest + 1 != identity.version) {
            throw Error("version gap inserting " + identity_label(identity));
        }
    }

    ProvNode node;
    node.identity = identity;
    node.type = type;
    node.attributes = attributes;
    node.creation_index = nodes_.size();
    index_[identity] = nodes_.size();
    latest_[identity.key()] = identity.version;
    nodes_.push_back(std::move(node));
    return nodes_.back();
}

const ProvEdge& ProvGraph::add_edge(std::uint64_t edge_id, EdgeType type,
                                    const NodeIdentity& from, const NodeIdentity& to,
                                    const AttrMap& attributes) {
    auto from_it = index_.find(from);
    auto to_it = index_.find(to);
    if (from_it == index_.end()) {
        throw Error("edge endpoint missing: " + identity_label(from));
    }
    if (to_it == index_.end()) {
        throw Error("edge endpoint missing: " + identity_label(to));
    }
    if (edge_ids_.count(edge_id)) {
        throw Error("duplicate edge id " + std::to_string(edge_id));
    }
    // from is the effect and must postdate its cause; equality is a self
    // reference and just as illegal.
    if (nodes_[from_it->second].creation_index <= nodes_[to_it->second].creation_index) {
        throw Error("edge " + std::to_string(edge_id) + " (" + to_string(type) +
                    ") would point forward in creation order: " + identity_label(from) +
                    " -> " + identity_label(to));
    }

    ProvEdge edge;
    edge.edge_id = edge_id;
    edge.type = type;
    edge.from = from;
    edge.to = to;
    edge.attributes = attributes;
    edge_ids_.insert(edge_id);
    edges_.push_back(std::move(edge));
    return edges_.back();
}

bool ProvGraph::has_node(const NodeIdentity& identity) const {
    return index_.count(identity) > 0;
}

const ProvNode& ProvGraph::node(const NodeIdentity& identity) const {
    auto it = index_.find(identity);
    if (it == index_.end()) {
        throw Error("no such node " + identity_label(identity));
    }
    return nodes_[it->second];
}

const ProvNode* ProvGraph::find_node(const NodeIdentity& identity) const {
    auto it = index_.find(identity);
    return it == index_.end() ? nullptr : &nodes_[it->second];
}

std::optional<Version> ProvGraph::latest_version(const ObjectKey& key) const {
    auto it = latest_.find(key);
    if (it == latest_.end()) return std::nullopt;
    return it->second;
}

std::map<std::string, std::vector<NodeIdentity>> ProvGraph::group_nodes(GroupKey key) const {
    std::map<std::string, std::vector<NodeIdentity>> groups;
    for (const auto& node : nodes_) {
        std::string label;
        switch (key) {
            case GroupKey::object: {
                std::ostringstream out;
                out << node.identity.machine << ":" << node.identity.boot << ":"
                    << node.identity.object;
                label = out.str();
                break;
            }
            case GroupKey::machine:
                label = std::to_string(node.identity.machine);
                break;
            case GroupKey::container: {
                if (node.type != NodeType::task) {
                    label = "none";
                    break;
                }
                auto part = [&](const char* attr) {
                    auto it = node.attributes.find(attr);
                    return it == node.attributes.end() ? std::string()
                                                       : attr_to_display(it->second);
                };
                label = part("namespaces") + "|" + part("cgroup") + "|" + part("secctx");
                break;
            }
        }
        groups[label].push_back(node.identity);
    }
    return groups;
}

ProvGraph assemble_graph(const std::vector<ProvNode>& nodes,
                         const std::vector<ProvEdge>& edges) {
    // Deterministic Kahn's algorithm: ready nodes leave in key order,
    // where the key is (seq attribute, identity).
    auto sort_key = [](const ProvNode& n) {
        std::uint64_t seq = 0;
        if (auto it = n.attributes.find("seq"); it != n.attributes.end()) {
            if (const auto* u = std::get_if<std::uint64_t>(&it->second)) seq = *u;
        }
        return std::make_tuple(seq, n.identity);
    };

    std::map<NodeIdentity, std::size_t> pos;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!pos.emplace(nodes[i].identity, i).second) {
            throw Error("duplicate node identity in graph data: " +
                        identity_label(nodes[i].identity));
        }
    }

    std::vector<std::vector<std::size_t>> dependents(nodes.size());
    std::vector<std::size_t> pending(nodes.size(), 0);
    auto depend = [&](const NodeIdentity& later, const NodeIdentity& earlier) {
        auto l = pos.find(later);
        auto e = pos.find(earlier);
        if (l == pos.end() || e == pos.end()) {
            throw Error("edge endpoint missing from graph data");
        }
        dependents[e->second].push_back(l->second);
        pending[l->second] += 1;
    };

    for (const auto& edge : edges) depend(edge.from, edge.to);
    for (const auto& node : nodes) {
        if (node.identity.version > 0) {
            NodeIdentity prev = node.identity;
            prev.version -= 1;
            if (!pos.count(prev)) {
                throw Error("version gap in graph data at " + identity_label(node.identity));
            }
            depend(node.identity, prev);
        }
    }

    using HeapEntry = std::pair<std::tuple<std::uint64_t, NodeIdentity>, std::size_t>;
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> ready;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (pending[i] == 0) ready.push({sort_key(nodes[i]), i});
    }

    ProvGraph graph;
    std::size_t placed = 0;
    while (!ready.empty()) {
        auto [key, i] = ready.top();
        ready.pop();
        graph.add_node(nodes[i].identity, nodes[i].type, nodes[i].attributes);
        placed += 1;
        for (std::size_t dep : dependents[i]) {
            if (--pending[dep] == 0) ready.push({sort_key(nodes[dep]), dep});
        }
    }
    if (placed != nodes.size()) {
        throw Error("graph data contains a cycle");
    }

    std::vector<const ProvEdge*> ordered;
    ordered.reserve(edges.size());
    for (const auto& edge : edges) ordered.push_back(&edge);
    std::sort(ordered.begin(), ordered.end(),
              [](const ProvEdge* a, const ProvEdge* b) { return a->edge_id < b->edge_id; });
    for (const ProvEdge* edge : ordered) {
        graph.add_edge(edge->edge_id, edge->type, edge->from, edge->to, edge->attributes);
    }
    return graph;
}

bool graphs_isomorphic(const ProvGraph& a, const ProvGraph& b) {
    if (a.node_count() != b.node_count() || a.edge_count() != b.edge_count()) {
        return false;
    }
    for (const auto& node : a.nodes()) {
        const ProvNode* other = b.find_node(node.identity);
        if (!other || other->type != node.type || other->attributes != node.attributes) {
            return false;
        }
    }
    auto edge_key = [](const ProvEdge& e) {
        return std::make_tuple(e.edge_id, e.type, e.from, e.to, e.attributes);
    };
    std::vector<decltype(edge_key(ProvEdge{}))> ea, eb;
    ea.reserve(a.edge_count());
    eb.reserve(b.edge_count());
    for (const auto& e : a.edges()) ea.push_back(edge_key(e));
    for (const auto& e : b.edges()) eb.push_back(edge_key(e));
    std::sort(ea.begin(), ea.end());
    std::sort(eb.begin(), eb.end());
    return ea == eb;
}

}  // namespace prov
