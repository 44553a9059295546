// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "prov/model.hpp"
#include "prov/policy.hpp"

namespace prov {

// Everything reachable from start, start included, walking edges in
// effect-to-cause direction and keeping only the given edge types.
std::set<NodeIdentity> ancestry(const ProvGraph& graph, const NodeIdentity& start,
                                const std::set<EdgeType>& edge_types);

// Same walk over reversed edges: cause to effect.
std::set<NodeIdentity> descendants(const ProvGraph& graph, const NodeIdentity& start,
                                   const std::set<EdgeType>& edge_types);

std::set<EdgeType> edge_type_set(const std::vector<std::string>& names);
// All edge types minus the given ones.
std::set<EdgeType> edge_types_except(const std::set<EdgeType>& excluded);

struct DlpVerdict {
    bool block = false;
    std::optional<std::uint64_t> taint;     // taint-mode witness
    std::vector<NodeIdentity> path;         // query-mode witness, sink first
};

// Constant-time check against the taint set carried by the object's
// latest captured state.
DlpVerdict dlp_check_taint(const ProvGraph& graph, const ObjectKey& object,
                           const std::set<std::uint64_t>& forbidden);

// Path-existence check: does any node carrying a forbidden taint sit in
// the ancestry of the object's latest state? Traversal respects the
// policy's propagate filters; version edges always pass, since taints
// survive version bumps unconditionally.
DlpVerdict dlp_check_query(const ProvGraph& graph, const ObjectKey& object,
                           const std::set<std::uint64_t>& forbidden,
                           const CapturePolicy& policy);

// ---- streaming compliance audit -------------------------------------------

// Attribute test: every present part must hold.
struct NodePredicate {
    std::optional<NodeType> type;
    std::string attr;          // empty: type test only
    std::optional<std::string> equals;
    std::optional<std::string> prefix;

    bool matches(const ProvNode& node) const;
};

struct PathConstraint {
    std::string id;
    NodePredicate source;
    NodePredicate sink;
    std::set<EdgeType> edge_types;
    std::optional<NodePredicate> sanitizer;
    enum class Verdict { flag, block };
    Verdict verdict = Verdict::flag;
};

std::vector<PathConstraint> parse_constraints(const std::string& json_text);
std::vector<PathConstraint> parse_constraints_file(const std::string& path);

struct Violation {
    std::string constraint_id;
    NodeIdentity sink;
    std::vector<NodeIdentity> path;  // one witness, source first
    PathConstraint::Verdict verdict = PathConstraint::Verdict::flag;
};

// Single-pass label propagation over a record stream. Labels seed at
// source matches, travel cause-to-effect along allowed edges, die at
// sanitizer nodes, and report the first arrival at each sink node.
class StreamingAuditor {
public:
    explicit StreamingAuditor(std::vector<PathConstraint> constraints);

    void feed(const Record& record);
    const std::vector<Violation>& violations() const { return violations_; }

private:
    // Predicates are decided once, when the node record arrives; only
    // the verdict bits and the witness back-pointer stay resident.
    struct LabelState {
        bool is_source = false;
        bool is_sink = false;
        bool is_sanitizer = false;
        bool labeled = false;
        bool reported = false;
        bool has_parent = false;
        NodeIdentity parent;   // witness back-pointer
    };

    std::vector<PathConstraint> constraints_;
    std::vector<std::map<NodeIdentity, LabelState>> labels_;
    std::vector<Violation> violations_;

    void arm(std::size_t ci, const ProvNode& node);
    void relay(std::size_t ci, const ProvEdge& edge);
    void report(std::size_t ci, const NodeIdentity& sink);
};

std::vector<Violation> audit(const std::vector<Record>& records,
                             const std::vector<PathConstraint>& constraints);

// Fixed-size, fixed-stride windows over a record stream. Windows start
// at every stride offset below the stream length and truncate at the
// end, so their union is the stream and stride == size partitions it.
std::vector<std::pair<std::size_t, std::size_t>> window_spans(std::size_t count,
                                                              std::size_t size,
                                                              std::size_t stride);

std::vector<std::vector<Record>> windows(const std::vector<Record>& records,
                                         std::size_t size, std::size_t stride);

}  // namespace prov
