// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "prov/model.hpp"
#include "prov/policy.hpp"
#include "prov/trace.hpp"

namespace prov {

// Live capture-side state of one kernel object. The graph keeps the
// history; this struct keeps only what the next event needs.
struct ObjectState {
    ObjectKey key;
    NodeType type = NodeType::file;
    Version current = 0;
    AttrMap attrs;
    bool alive = true;
    bool cap_audit_write = false;
    MarkLevel selector_level = MarkLevel::unmarked;
    bool acquired_propagate = false;
    std::set<std::uint64_t> taints;
    std::set<std::uint64_t> injected;   // taint rules already applied
    std::set<ObjectKey> attachments;    // task only: mapped shared segments
    std::set<Version> emitted;          // versions present in the output
    std::uint64_t version_stamp = 0;    // global creation order of `current`
};

struct BuildStats {
    std::uint64_t events = 0;
    std::uint64_t records = 0;
    std::uint64_t flows_recorded = 0;
    std::uint64_t flows_filtered = 0;
    std::uint64_t flows_skipped = 0;
    std::uint64_t disclosures_rejected = 0;
    std::map<NodeType, std::uint64_t> nodes_by_type;
    std::map<EdgeType, std::uint64_t> edges_by_type;
};

// Folds a kernel event stream into a versioned provenance graph under a
// capture policy, emitting self-contained records along the way.
class GraphBuilder {
public:
    using RecordSink = std::function<void(const Record&)>;

    explicit GraphBuilder(CapturePolicy policy, MachineId machine_filter = 0);

    void set_sink(RecordSink sink) { sink_ = std::move(sink); }

    void load_preamble(const std::vector<PreambleEntry>& preamble);
    void apply_event(const Event& event);

    const ProvGraph& graph() const { return graph_; }
    const std::vector<Record>& records() const { return records_; }
    const BuildStats& stats() const { return stats_; }
    const CapturePolicy& policy() const { return policy_; }

    const ObjectState* find_state(const ObjectKey& key) const;
    // Where each taint rule first fired: tag -> injection nodes.
    const std::map<std::uint64_t, std::vector<NodeIdentity>>& taint_injections() const {
        return injections_;
    }

    // Disclosure API; also reachable through the disclose_* event kinds.
    bool disclose_node(ObjectId task, const ObjectRef& node, std::uint64_t seq);
    bool disclose_edge(ObjectId task, ObjectId from, ObjectId to, std::uint64_t seq);
    bool ingest_log(ObjectId task, const ObjectRef& entry, const std::string& text,
                    std::uint64_t seq);

private:
    friend class DiscloseAccess;

    struct Flow {
        ObjectKey source;
        ObjectKey dest;
        EdgeType edge = EdgeType::used;
        bool creates_dest = false;
    };

    ObjectState& materialize(const ObjectKey& key, NodeType type, const AttrMap& attrs);
    ObjectState& state_of(const ObjectKey& key);
    ObjectState* find_state_mut(const ObjectKey& key);
    ObjectState& require_task(const Event& event);
    ObjectState& require_live(const ObjectKey& key, const char* what);

    void remark(ObjectState& state, std::uint64_t seq);
    FlowEndpoint endpoint(const ObjectState& state) const;

    void emit_node(ObjectState& state, Version version, std::uint64_t seq);
    void ensure_emitted(ObjectState& state, std::uint64_t seq);
    bool run_flow(const Flow& flow, std::uint64_t seq, bool record_match = false);
    void run_task_flows(ObjectState& task, const std::vector<Flow>& flows,
                        std::uint64_t seq, bool record_match = false);
    std::vector<Flow> shared_extras_in(const ObjectState& task, const ObjectKey& other);
    std::vector<Flow> shared_extras_out(const ObjectState& task, const ObjectKey& other);

    void push_record(Record record);
    std::uint64_t next_edge_id(std::uint64_t seq);

    ObjectKey subject_key(const Event& event) const;
    ObjectKey object_key(const Event& event, const ObjectRef& ref) const;
    const Address& require_address(const Event& event) const;
    const PacketIdentity& require_packet(const Event& event) const;
    std::vector<std::string> ancestor_dirs(const std::string& path) const;
    ObjectState& dir_state(MachineId machine, BootId boot, const std::string& path,
                           std::uint64_t seq);

    void on_machine_boot(const Event& event);
    void on_task_fork(const Event& event);
    void on_task_exec(const Event& event);
    void on_setuid(const Event& event);
    void on_file_create(const Event& event);
    void on_open(const Event& event);
    void on_read(const Event& event);
    void on_write(const Event& event);
    void on_setattr(const Event& event);
    void on_getattr(const Event& event);
    void on_unlink(const Event& event);
    void on_attach(const Event& event);
    void on_detach(const Event& event);
    void on_socket_create(const Event& event);
    void on_connect(const Event& event);
    void on_bind(const Event& event);
    void on_accept(const Event& event);
    void on_send_packet(const Event& event);
    void on_recv_packet(const Event& event);

    CapturePolicy policy_;
    MachineId machine_filter_ = 0;  // 0: keep every machine
    ProvGraph graph_;
    std::vector<Record> records_;
    BuildStats stats_;
    RecordSink sink_;
    std::map<ObjectKey, ObjectState> states_;
    std::map<std::pair<MachineId, std::string>, ObjectId> dir_ids_;
    std::map<std::uint64_t, std::vector<NodeIdentity>> injections_;
    std::map<std::pair<MachineId, Address>, ObjectId> address_ids_;
    std::uint64_t current_seq_ = 0;
    std::uint64_t edge_ordinal_ = 0;  // per-event lane for stable edge ids
    std::uint64_t stamp_counter_ = 0;
};

struct BuildResult {
    ProvGraph graph;
    std::vector<Record> records;
    BuildStats stats;
    std::map<std::uint64_t, std::vector<NodeIdentity>> taint_injections;
};

BuildResult build(const Trace& trace, const CapturePolicy& policy,
                  MachineId machine_filter = 0);

}  // namespace prov
