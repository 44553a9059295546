// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace prov {

using MachineId = std::uint64_t;
using BootId = std::uint64_t;
using ObjectId = std::uint64_t;
using Version = std::uint64_t;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A kernel object, stable across state changes: (machine, boot, object).
struct ObjectKey {
    MachineId machine = 0;
    BootId boot = 0;
    ObjectId object = 0;

    auto operator<=>(const ObjectKey&) const = default;
};

// One state of an object. Versions start at 0 and grow by one per
// admitted incoming flow, so identities double as a causal order.
struct NodeIdentity {
    MachineId machine = 0;
    BootId boot = 0;
    ObjectId object = 0;
    Version version = 0;

    auto operator<=>(const NodeIdentity&) const = default;

    ObjectKey key() const { return ObjectKey{machine, boot, object}; }
};

enum class NodeType {
    task,
    file,
    directory,
    socket,
    pipe,
    shm,
    packet,
    address,
    path,
    iattr,
    xattr,
    argv,
    log_entry,
    machine,
    disclosed_entity,
    user,
    group,
};

enum class ProvClass { entity, activity, agent };

enum class EdgeType {
    used,
    was_generated_by,
    was_informed_by,
    was_derived_from,
    was_associated_with,
    version_entity,
    version_activity,
    read,
    write,
    create,
    exec,
    fork,
    clone_mem,
    setattr,
    getattr,
    perm_read,
    perm_write,
    perm_exec,
    send,
    receive,
    connect,
    bind,
    sh_read,
    sh_write,
    log,
    disclosed,
};

// The five PROV-DM relation families the edge vocabulary collapses onto.
enum class RelationClass {
    used,
    was_generated_by,
    was_informed_by,
    was_derived_from,
    was_associated_with,
};

ProvClass prov_class(NodeType type);
RelationClass relation_class(EdgeType type);

const std::vector<NodeType>& all_node_types();
const std::vector<EdgeType>& all_edge_types();

std::string to_string(NodeType type);
std::string to_string(EdgeType type);
std::string to_string(ProvClass cls);
std::string to_string(RelationClass cls);
NodeType node_type_from_string(const std::string& name);
EdgeType edge_type_from_string(const std::string& name);

using AttrValue = std::variant<std::string, std::uint64_t, std::int64_t, bool>;
using AttrMap = std::map<std::string, AttrValue>;

std::string attr_to_display(const AttrValue& value);

struct ProvNode {
    NodeIdentity identity;
    NodeType type = NodeType::file;
    AttrMap attributes;
    // Monotone per graph, never serialized; witnesses acyclicity.
    std::uint64_t creation_index = 0;

    bool operator==(const ProvNode& other) const {
        return identity == other.identity && type == other.type &&
               attributes == other.attributes;
    }
};

struct ProvEdge {
    std::uint64_t edge_id = 0;
    EdgeType type = EdgeType::used;
    NodeIdentity from;  // effect, the newer endpoint
    NodeIdentity to;    // cause, the older endpoint
    AttrMap attributes;

    bool operator==(const ProvEdge&) const = default;
};

// A self-contained unit of output: either a node or an edge. Streams of
// records are what the serializers and the relay move around.
struct Record {
    enum class Kind { node, edge };
    Kind kind = Kind::node;
    ProvNode node;
    ProvEdge edge;

    static Record make_node(ProvNode n) {
        Record r;
        r.kind = Kind::node;
        r.node = std::move(n);
        return r;
    }
    static Record make_edge(ProvEdge e) {
        Record r;
        r.kind = Kind::edge;
        r.edge = std::move(e);
        return r;
    }

    bool operator==(const Record& other) const {
        if (kind != other.kind) return false;
        return kind == Kind::node ? node == other.node : edge == other.edge;
    }
};

enum class GroupKey { object, machine, container };

// Append-only provenance graph. Insertion order is the causal order:
// an edge may only point from a newer node to a strictly older one,
// which rules out cycles by construction.
class ProvGraph {
public:
    const ProvNode& add_node(const NodeIdentity& identity, NodeType type,
                             const AttrMap& attributes);
    const ProvEdge& add_edge(std::uint64_t edge_id, EdgeType type,
                             const NodeIdentity& from, const NodeIdentity& to,
                             const AttrMap& attributes);

    bool has_node(const NodeIdentity& identity) const;
    const ProvNode& node(const NodeIdentity& identity) const;
    const ProvNode* find_node(const NodeIdentity& identity) const;

    // Highest version recorded for the object, if any state was captured.
    std::optional<Version> latest_version(const ObjectKey& key) const;

    // Partition of all nodes; group labels are human-readable and stable.
    std::map<std::string, std::vector<NodeIdentity>> group_nodes(GroupKey key) const;

    const std::vector<ProvNode>& nodes() const { return nodes_; }
    const std::vector<ProvEdge>& edges() const { return edges_; }
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }

private:
    std::vector<ProvNode> nodes_;
    std::vector<ProvEdge> edges_;
    std::map<NodeIdentity, std::size_t> index_;
    std::map<ObjectKey, Version> latest_;
    std::set<std::uint64_t> edge_ids_;
};

// Structural equality that ignores creation indexes and insertion order.
bool graphs_isomorphic(const ProvGraph& a, const ProvGraph& b);

// Rebuilds a graph from an unordered pile of nodes and edges by finding
// an insertion order that satisfies every edge and the version chains.
// The order is derived from the edges plus the "seq" node attribute and
// is deterministic. Throws if no order exists (the data has a cycle).
ProvGraph assemble_graph(const std::vector<ProvNode>& nodes,
                         const std::vector<ProvEdge>& edges);

}  // namespace prov
