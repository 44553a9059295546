// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "prov/model.hpp"
#include "prov/net.hpp"

namespace prov {

enum class EventKind : int;  // defined in trace.hpp

struct Cidr {
    std::uint32_t addr = 0;
    int prefix = 0;  // 0..32; 0 matches everything

    bool contains(std::uint32_t ip) const;
    bool operator==(const Cidr&) const = default;
};

// "a.b.c.d/p:port"; port 0 matches any port.
struct NetSelector {
    Cidr cidr;
    std::uint16_t port = 0;

    bool matches(std::uint32_t ip, std::uint16_t p) const;
    bool operator==(const NetSelector&) const = default;
};

struct Selector {
    enum class Kind { path, net, uid, gid, secctx, cgroup };
    Kind kind = Kind::path;
    std::string text;     // path, secctx, cgroup
    std::uint64_t id = 0; // uid, gid
    NetSelector net;

    bool operator==(const Selector&) const = default;
};

struct TaintRule {
    std::uint64_t taint = 0;
    Selector selector;

    bool operator==(const TaintRule&) const = default;
};

enum class CaptureMode { whole, selective };

struct CapturePolicy {
    CaptureMode mode = CaptureMode::whole;
    std::vector<Selector> opaque;
    std::vector<Selector> track;
    std::vector<Selector> propagate;
    std::set<NodeType> node_filter;
    std::set<EdgeType> relation_filter;
    std::set<NodeType> propagate_node_filter;
    std::set<EdgeType> propagate_edge_filter;
    std::vector<TaintRule> taints;
    std::vector<NetSelector> record;

    bool matches_record(const PacketIdentity& packet) const;
};

// INI-style text, keys either at top level or inside a [provenance]
// section. Unknown keys, malformed selectors, and unknown type names
// are reported with their line number.
CapturePolicy parse_policy(const std::string& text);
CapturePolicy parse_policy_file(const std::string& path);

// Selector-derived classification of one object. Opacity wins over
// tracking; propagate implies tracked.
enum class MarkLevel { unmarked, tracked, propagate_tracked, opaque };

struct PolicyMark {
    MarkLevel level = MarkLevel::unmarked;
    std::vector<std::uint64_t> taints;  // injected when their rule first matches
};

PolicyMark mark_object(const CapturePolicy& policy, NodeType type, const AttrMap& attrs);

// Marks an object carries at flow time: the recomputed selector mark
// plus tracking acquired from flows, which is monotone.
struct FlowEndpoint {
    NodeType type = NodeType::file;
    MarkLevel selector_level = MarkLevel::unmarked;
    bool acquired_propagate = false;

    bool opaque() const { return selector_level == MarkLevel::opaque; }
    bool tracked() const {
        return selector_level == MarkLevel::tracked ||
               selector_level == MarkLevel::propagate_tracked || acquired_propagate;
    }
    bool propagates() const {
        return selector_level == MarkLevel::propagate_tracked || acquired_propagate;
    }
};

enum class FlowDecision {
    record,    // emit the edge and version the destination
    filtered,  // admissible, but a type filter suppresses the record
    skip,      // not admissible at all
};

// record_match: a packet endpoint matched a record= rule, which forces
// capture under selective mode. Filters are applied last.
FlowDecision admit_flow(const CapturePolicy& policy, const FlowEndpoint& source,
                        const FlowEndpoint& dest, EdgeType edge, bool record_match);

// Tracking and taints spread along admissible flows that pass the
// propagate filters, independently of whether the record survived the
// type filters.
bool propagate_allows(const CapturePolicy& policy, EdgeType edge, NodeType dest_type);

bool propagate_tracking(const CapturePolicy& policy, const FlowEndpoint& source,
                        FlowEndpoint& dest, EdgeType edge);

bool propagate_taint(const CapturePolicy& policy, const std::set<std::uint64_t>& source_taints,
                     std::set<std::uint64_t>& dest_taints, const FlowEndpoint& source,
                     const FlowEndpoint& dest, EdgeType edge);

// Event kinds whose subject or object must be remarked when they occur.
bool reevaluate_on_event(EventKind kind);

}  // namespace prov
