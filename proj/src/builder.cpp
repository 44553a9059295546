// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include "prov/builder.hpp"

#include <algorithm>
#include <sstream>

#include "prov/net.hpp"

namespace prov {

namespace {

// Ids the builder mints itself (directories, agents, argv blobs, attribute
// nodes, addresses) live in their own id space: bit 62 set, bit 63 clear.
// Packet ids set bit 63, simulator-allocated ids stay small.
std::uint64_t synth_id(const std::string& tag, const std::string& text, std::uint64_t num) {
    std::uint64_t hash = 1469598103934665603ull;
    auto mix = [&hash](const void* data, std::size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            hash ^= bytes[i];
            hash *= 1099511628211ull;
        }
    };
    mix(tag.data(), tag.size());
    mix("\0", 1);
    mix(text.data(), text.size());
    mix(&num, sizeof(num));
    return (hash & ~(1ull << 63)) | (1ull << 62);
}

std::string join_taints(const std::set<std::uint64_t>& taints) {
    std::ostringstream out;
    bool first = true;
    for (std::uint64_t taint : taints) {
        if (!first) out << ',';
        out << taint;
        first = false;
    }
    return out.str();
}

std::uint64_t attr_u64_or(const AttrMap& attrs, const std::string& key, std::uint64_t fallback) {
    auto it = attrs.find(key);
    if (it == attrs.end()) return fallback;
    if (const auto* u = std::get_if<std::uint64_t>(&it->second)) return *u;
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) {
        return *i >= 0 ? static_cast<std::uint64_t>(*i) : fallback;
    }
    if (const auto* b = std::get_if<bool>(&it->second)) return *b ? 1 : 0;
    return fallback;
}

std::string attr_str_or(const AttrMap& attrs, const std::string& key, const std::string& fallback) {
    auto it = attrs.find(key);
    if (it == attrs.end()) return fallback;
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
    return fallback;
}

EdgeType version_edge_for(NodeType type) {
    return prov_class(type) == ProvClass::activity ? EdgeType::version_activity
                                                   : EdgeType::version_entity;
}

}  // namespace

GraphBuilder::GraphBuilder(CapturePolicy policy, MachineId machine_filter)
    : policy_(std::move(policy)), machine_filter_(machine_filter) {}

const ObjectState* GraphBuilder::find_state(const ObjectKey& key) const {
    auto it = states_.find(key);
    return it == states_.end() ? nullptr : &it->second;
}

ObjectState* GraphBuilder::find_state_mut(const ObjectKey& key) {
    auto it = states_.find(key);
    return it == states_.end() ? nullptr : &it->second;
}

ObjectState& GraphBuilder::state_of(const ObjectKey& key) {
    auto it = states_.find(key);
    if (it == states_.end()) {
        throw Error("event " + std::to_string(current_seq_) + ": unknown object " +
                    std::to_string(key.object) + " on machine " + std::to_string(key.machine));
    }
    return it->second;
}

ObjectState& GraphBuilder::materialize(const ObjectKey& key, NodeType type,
                                       const AttrMap& attrs) {
    auto it = states_.find(key);
    if (it != states_.end()) return it->second;
    ObjectState state;
    state.key = key;
    state.type = type;
    state.attrs = attrs;
    state.version_stamp = ++stamp_counter_;
    auto [inserted, ok] = states_.emplace(key, std::move(state));
    (void)ok;
    remark(inserted->second, current_seq_);
    return inserted->second;
}

void GraphBuilder::remark(ObjectState& state, std::uint64_t seq) {
    (void)seq;
    PolicyMark mark = mark_object(policy_, state.type, state.attrs);
    state.selector_level = mark.level;
    for (std::uint64_t taint : mark.taints) {
        if (state.injected.count(taint)) continue;
        state.injected.insert(taint);
        state.taints.insert(taint);
        injections_[taint].push_back(
            NodeIdentity{state.key.machine, state.key.boot, state.key.object, state.current});
    }
}

FlowEndpoint GraphBuilder::endpoint(const ObjectState& state) const {
    FlowEndpoint ep;
    ep.type = state.type;
    ep.selector_level = state.selector_level;
    ep.acquired_propagate = state.acquired_propagate;
    return ep;
}

void GraphBuilder::push_record(Record record) {
    if (sink_) sink_(record);
    records_.push_back(std::move(record));
    stats_.records += 1;
}

std::uint64_t GraphBuilder::next_edge_id(std::uint64_t seq) {
    // Events never expand to 2^16 edges, so (seq, lane) packs into 64 bits
    // and the same potential edge gets the same id under every policy.
    std::uint64_t id = (seq << 16) | edge_ordinal_;
    edge_ordinal_ += 1;
    return id;
}

void GraphBuilder::emit_node(ObjectState& state, Version version, std::uint64_t seq) {
    AttrMap attrs = state.attrs;
    attrs["seq"] = seq;
    if (!state.taints.empty()) attrs["taints"] = join_taints(state.taints);
    NodeIdentity identity{state.key.machine, state.key.boot, state.key.object, version};
    const ProvNode& node = graph_.add_node(identity, state.type, attrs);
    state.emitted.insert(version);
    stats_.nodes_by_type[state.type] += 1;
    push_record(Record::make_node(node));
}

void GraphBuilder::ensure_emitted(ObjectState& state, std::uint64_t seq) {
    if (!state.emitted.count(state.current)) emit_node(state, state.current, seq);
}

bool GraphBuilder::run_flow(const Flow& flow, std::uint64_t seq, bool record_match) {
    // Both edge id lanes are claimed before any policy decision so ids
    // stay identical across capture configurations.
    std::uint64_t version_slot = next_edge_id(seq);
    std::uint64_t flow_slot = next_edge_id(seq);

    ObjectState& src = state_of(flow.source);
    ObjectState& dst = state_of(flow.dest);
    FlowEndpoint source = endpoint(src);
    FlowEndpoint dest = endpoint(dst);

    FlowDecision decision = admit_flow(policy_, source, dest, flow.edge, record_match);
    if (decision == FlowDecision::skip) {
        stats_.flows_skipped += 1;
        return false;
    }

    // Tracking and taints move on every admissible flow, even when a type
    // filter drops the record itself.
    if (propagate_tracking(policy_, source, dest, flow.edge)) {
        dst.acquired_propagate = true;
    }
    propagate_taint(policy_, src.taints, dst.taints, source, dest, flow.edge);

    if (decision == FlowDecision::filtered) {
        stats_.flows_filtered += 1;
        return false;
    }

    stats_.flows_recorded += 1;
    AttrMap edge_attrs;
    edge_attrs["seq"] = seq;

    ensure_emitted(src, seq);
    NodeIdentity cause{src.key.machine, src.key.boot, src.key.object, src.current};

    if (flow.creates_dest) {
        ensure_emitted(dst, seq);
        NodeIdentity effect{dst.key.machine, dst.key.boot, dst.key.object, dst.current};
        const ProvEdge& edge = graph_.add_edge(flow_slot, flow.edge, effect, cause, edge_attrs);
        stats_.edges_by_type[flow.edge] += 1;
        push_record(Record::make_edge(edge));
        return true;
    }

    ensure_emitted(dst, seq);
    NodeIdentity prev{dst.key.machine, dst.key.boot, dst.key.object, dst.current};
    dst.current += 1;
    dst.version_stamp = ++stamp_counter_;
    emit_node(dst, dst.current, seq);
    NodeIdentity effect{dst.key.machine, dst.key.boot, dst.key.object, dst.current};

    EdgeType vtype = version_edge_for(dst.type);
    const ProvEdge& vedge = graph_.add_edge(version_slot, vtype, effect, prev, edge_attrs);
    stats_.edges_by_type[vtype] += 1;
    push_record(Record::make_edge(vedge));

    const ProvEdge& fedge = graph_.add_edge(flow_slot, flow.edge, effect, cause, edge_attrs);
    stats_.edges_by_type[flow.edge] += 1;
    push_record(Record::make_edge(fedge));
    return true;
}

std::vector<GraphBuilder::Flow> GraphBuilder::shared_extras_in(const ObjectState& task,
                                                               const ObjectKey& other) {
    std::vector<Flow> extras;
    for (const ObjectKey& segment : task.attachments) {
        if (segment == other) continue;
        extras.push_back(Flow{task.key, segment, EdgeType::sh_write, false});
    }
    return extras;
}

std::vector<GraphBuilder::Flow> GraphBuilder::shared_extras_out(const ObjectState& task,
                                                                const ObjectKey& other) {
    std::vector<Flow> extras;
    for (const ObjectKey& segment : task.attachments) {
        if (segment == other) continue;
        extras.push_back(Flow{segment, task.key, EdgeType::sh_read, false});
    }
    return extras;
}

void GraphBuilder::run_task_flows(ObjectState& task, const std::vector<Flow>& flows,
                                  std::uint64_t seq, bool record_match) {
    for (const Flow& flow : flows) {
        bool incoming = flow.dest == task.key;
        bool outgoing = flow.source == task.key;
        // A task with mapped shared state may have read any segment before
        // writing out, and anything it reads may land in any segment.
        if (outgoing) {
            for (const Flow& extra : shared_extras_out(task, flow.dest)) {
                run_flow(extra, seq, false);
            }
        }
        run_flow(flow, seq, record_match);
        if (incoming) {
            for (const Flow& extra : shared_extras_in(task, flow.source)) {
                run_flow(extra, seq, false);
            }
        }
    }
}

ObjectKey GraphBuilder::subject_key(const Event& event) const {
    return ObjectKey{event.machine, event.boot, event.subject};
}

ObjectKey GraphBuilder::object_key(const Event& event, const ObjectRef& ref) const {
    return ObjectKey{event.machine, event.boot, ref.id};
}

ObjectState& GraphBuilder::require_task(const Event& event) {
    auto it = states_.find(subject_key(event));
    if (it == states_.end()) {
        throw Error("event " + std::to_string(event.seq) + ": unknown subject task " +
                    std::to_string(event.subject));
    }
    if (it->second.type != NodeType::task) {
        throw Error("event " + std::to_string(event.seq) + ": subject " +
                    std::to_string(event.subject) + " is not a task");
    }
    if (!it->second.alive) {
        throw Error("event " + std::to_string(event.seq) + ": subject task " +
                    std::to_string(event.subject) + " has already exited");
    }
    return it->second;
}

ObjectState& GraphBuilder::require_live(const ObjectKey& key, const char* what) {
    ObjectState& state = state_of(key);
    if (!state.alive) {
        throw Error("event " + std::to_string(current_seq_) + ": " + what + " " +
                    std::to_string(key.object) + " is gone");
    }
    return state;
}

std::vector<std::string> GraphBuilder::ancestor_dirs(const std::string& path) const {
    std::vector<std::string> dirs;
    if (path.empty() || path[0] != '/') return dirs;
    dirs.push_back("/");
    std::size_t pos = 1;
    for (;;) {
        std::size_t next = path.find('/', pos);
        if (next == std::string::npos) break;
        dirs.push_back(path.substr(0, next));
        pos = next + 1;
    }
    return dirs;
}

ObjectState& GraphBuilder::dir_state(MachineId machine, BootId boot, const std::string& path,
                                     std::uint64_t seq) {
    (void)seq;
    auto lookup = std::make_pair(machine, path);
    auto it = dir_ids_.find(lookup);
    ObjectId id;
    if (it != dir_ids_.end()) {
        id = it->second;
    } else {
        id = synth_id("dir", path, 0);
        dir_ids_.emplace(lookup, id);
    }
    ObjectKey key{machine, boot, id};
    AttrMap attrs;
    attrs["path"] = path;
    attrs["uid"] = std::uint64_t{0};
    attrs["gid"] = std::uint64_t{0};
    attrs["mode"] = std::uint64_t{0755};
    return materialize(key, NodeType::directory, attrs);
}

void GraphBuilder::load_preamble(const std::vector<PreambleEntry>& preamble) {
    current_seq_ = 0;
    for (const PreambleEntry& entry : preamble) {
        ObjectKey key{entry.machine, entry.boot, entry.object};
        if (states_.count(key)) {
            throw Error("preamble declares object " + std::to_string(entry.object) +
                        " on machine " + std::to_string(entry.machine) + " twice");
        }
        AttrMap attrs;
        attrs["path"] = entry.path;
        attrs["uid"] = entry.uid;
        attrs["gid"] = entry.gid;
        attrs["mode"] = entry.mode;
        materialize(key, entry.type, attrs);
        if (entry.type == NodeType::directory) {
            dir_ids_[{entry.machine, entry.path}] = entry.object;
        }
    }
}

void GraphBuilder::apply_event(const Event& event) {
    if (machine_filter_ != 0 && event.machine != machine_filter_) return;
    current_seq_ = event.seq;
    edge_ordinal_ = 0;
    stats_.events += 1;

    switch (event.kind) {
        case EventKind::machine_boot:
            on_machine_boot(event);
            break;
        case EventKind::task_fork:
            on_task_fork(event);
            break;
        case EventKind::task_exec:
            on_task_exec(event);
            break;
        case EventKind::task_exit: {
            ObjectState& task = require_task(event);
            task.alive = false;
            task.attachments.clear();
            break;
        }
        case EventKind::setuid:
            on_setuid(event);
            break;
        case EventKind::file_create:
            on_file_create(event);
            break;
        case EventKind::open:
            on_open(event);
            break;
        case EventKind::read:
            on_read(event);
            break;
        case EventKind::write:
            on_write(event);
            break;
        case EventKind::setattr:
            on_setattr(event);
            break;
        case EventKind::getattr:
            on_getattr(event);
            break;
        case EventKind::unlink:
            on_unlink(event);
            break;
        case EventKind::mmap_attach:
        case EventKind::shm_attach:
            on_attach(event);
            break;
        case EventKind::detach:
            on_detach(event);
            break;
        case EventKind::socket_create:
            on_socket_create(event);
            break;
        case EventKind::connect:
            on_connect(event);
            break;
        case EventKind::bind:
            on_bind(event);
            break;
        case EventKind::accept:
            on_accept(event);
            break;
        case EventKind::send_packet:
            on_send_packet(event);
            break;
        case EventKind::recv_packet:
            on_recv_packet(event);
            break;
        case EventKind::log_write:
        case EventKind::disclose_log:
            require_task(event);
            ingest_log(event.subject, event.object, event.text, event.seq);
            break;
        case EventKind::disclose_node:
            require_task(event);
            disclose_node(event.subject, event.object, event.seq);
            break;
        case EventKind::disclose_edge:
            require_task(event);
            if (!event.object2) {
                throw Error("event " + std::to_string(event.seq) +
                            ": disclose_edge carries no cause object");
            }
            disclose_edge(event.subject, event.object.id, event.object2->id, event.seq);
            break;
    }
}

const Address& GraphBuilder::require_address(const Event& event) const {
    if (!event.address) {
        throw Error("event " + std::to_string(event.seq) + ": missing address");
    }
    return *event.address;
}

const PacketIdentity& GraphBuilder::require_packet(const Event& event) const {
    if (!event.packet) {
        throw Error("event " + std::to_string(event.seq) + ": missing packet identity");
    }
    return *event.packet;
}

void GraphBuilder::on_machine_boot(const Event& event) {
    // Object id 0 is reserved for the machine description itself; its
    // identity already names the machine and boot, so no attrs repeat them.
    ObjectKey key{event.machine, event.boot, 0};
    ObjectState& state = materialize(key, NodeType::machine, AttrMap{});
    // The boot description is recorded regardless of the capture policy.
    ensure_emitted(state, event.seq);
}

void GraphBuilder::on_task_fork(const Event& event) {
    ObjectKey child_key = object_key(event, event.object);
    if (states_.count(child_key)) {
        throw Error("event " + std::to_string(event.seq) + ": task id " +
                    std::to_string(event.object.id) + " already exists");
    }
    ObjectState& child = materialize(child_key, NodeType::task, event.object.attrs);
    child.cap_audit_write = attr_u64_or(event.object.attrs, "cap_audit_write", 0) != 0;
    if (event.subject == 0) return;  // first task of its lineage
    ObjectState& parent = require_task(event);
    std::vector<Flow> flows{Flow{parent.key, child_key, EdgeType::fork, true}};
    run_task_flows(parent, flows, event.seq);
}

void GraphBuilder::on_task_exec(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectKey bin_key = object_key(event, event.object);
    if (!states_.count(bin_key)) {
        materialize(bin_key, NodeType::file, event.object.attrs);
    }
    ObjectState& binary = require_live(bin_key, "exec binary");
    std::string bin_path = attr_str_or(binary.attrs, "path",
                                       attr_str_or(event.object.attrs, "path", ""));
    if (bin_path.empty()) {
        throw Error("event " + std::to_string(event.seq) + ": exec binary has no path");
    }

    // The task takes on the binary's identity before any of the exec flows
    // run, so marks for the new image apply to the whole event.
    task.attrs["path"] = bin_path;
    remark(task, event.seq);

    std::vector<Flow> flows;
    for (const std::string& dir : ancestor_dirs(bin_path)) {
        flows.push_back(Flow{dir_state(event.machine, event.boot, dir, event.seq).key,
                             task.key, EdgeType::perm_read, false});
    }
    flows.push_back(Flow{bin_key, task.key, EdgeType::perm_exec, false});
    flows.push_back(Flow{bin_key, task.key, EdgeType::exec, false});

    if (!event.argv.empty()) {
        ObjectKey argv_key{event.machine, event.boot, synth_id("argv", event.argv, event.seq)};
        AttrMap argv_attrs;
        argv_attrs["argv"] = event.argv;
        materialize(argv_key, NodeType::argv, argv_attrs);
        flows.push_back(Flow{argv_key, task.key, EdgeType::used, false});
    }

    std::uint64_t uid = attr_u64_or(task.attrs, "uid", 0);
    std::uint64_t gid = attr_u64_or(task.attrs, "gid", 0);
    ObjectKey user_key{event.machine, event.boot, synth_id("user", "", uid)};
    AttrMap user_attrs;
    user_attrs["uid"] = uid;
    materialize(user_key, NodeType::user, user_attrs);
    flows.push_back(Flow{user_key, task.key, EdgeType::was_associated_with, false});

    ObjectKey group_key{event.machine, event.boot, synth_id("group", "", gid)};
    AttrMap group_attrs;
    group_attrs["gid"] = gid;
    materialize(group_key, NodeType::group, group_attrs);
    flows.push_back(Flow{group_key, task.key, EdgeType::was_associated_with, false});

    run_task_flows(task, flows, event.seq);
}

void GraphBuilder::on_setuid(const Event& event) {
    ObjectState& task = require_task(event);
    auto it = event.object.attrs.find("uid");
    if (it == event.object.attrs.end()) {
        throw Error("event " + std::to_string(event.seq) + ": setuid carries no uid");
    }
    task.attrs["uid"] = it->second;
    remark(task, event.seq);

    std::uint64_t uid = attr_u64_or(task.attrs, "uid", 0);
    ObjectKey user_key{event.machine, event.boot, synth_id("user", "", uid)};
    AttrMap user_attrs;
    user_attrs["uid"] = uid;
    materialize(user_key, NodeType::user, user_attrs);
    std::vector<Flow> flows{Flow{user_key, task.key, EdgeType::was_associated_with, false}};
    run_task_flows(task, flows, event.seq);
}

void GraphBuilder::on_file_create(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectKey key = object_key(event, event.object);
    if (states_.count(key)) {
        throw Error("event " + std::to_string(event.seq) + ": object id " +
                    std::to_string(event.object.id) + " already exists");
    }

    std::string obj_type = attr_str_or(event.object.attrs, "obj_type", "file");
    NodeType type = NodeType::file;
    if (obj_type == "pipe") {
        type = NodeType::pipe;
    } else if (obj_type == "directory") {
        type = NodeType::directory;
    } else if (obj_type != "file") {
        throw Error("event " + std::to_string(event.seq) + ": unknown obj_type '" +
                    obj_type + "'");
    }

    AttrMap attrs;
    std::string path = attr_str_or(event.object.attrs, "path", "");
    if (type != NodeType::pipe) {
        if (path.empty()) {
            throw Error("event " + std::to_string(event.seq) + ": file_create has no path");
        }
        attrs["path"] = path;
        attrs["uid"] = attr_u64_or(event.object.attrs, "uid",
                                   attr_u64_or(task.attrs, "uid", 0));
        attrs["gid"] = attr_u64_or(event.object.attrs, "gid",
                                   attr_u64_or(task.attrs, "gid", 0));
        attrs["mode"] = attr_u64_or(event.object.attrs, "mode", 0644);
    }

    std::vector<Flow> flows;
    if (type != NodeType::pipe) {
        auto dirs = ancestor_dirs(path);
        for (const std::string& dir : dirs) {
            flows.push_back(Flow{dir_state(event.machine, event.boot, dir, event.seq).key,
                                 task.key, EdgeType::perm_read, false});
        }
        if (!dirs.empty()) {
            flows.push_back(Flow{dir_state(event.machine, event.boot, dirs.back(), event.seq).key,
                                 task.key, EdgeType::perm_write, false});
        }
        if (type == NodeType::directory) {
            dir_ids_[{event.machine, path}] = event.object.id;
        }
    }
    materialize(key, type, attrs);
    flows.push_back(Flow{task.key, key, EdgeType::create, true});
    run_task_flows(task, flows, event.seq);
}

void GraphBuilder::on_open(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectState& file = require_live(object_key(event, event.object), "open target");
    std::string path = attr_str_or(file.attrs, "path", "");

    std::vector<Flow> flows;
    for (const std::string& dir : ancestor_dirs(path)) {
        flows.push_back(Flow{dir_state(event.machine, event.boot, dir, event.seq).key,
                             task.key, EdgeType::perm_read, false});
    }
    if (event.flags.find('r') != std::string::npos) {
        flows.push_back(Flow{file.key, task.key, EdgeType::perm_read, false});
    }
    if (event.flags.find('w') != std::string::npos) {
        flows.push_back(Flow{file.key, task.key, EdgeType::perm_write, false});
    }
    flows.push_back(Flow{file.key, task.key, EdgeType::used, false});
    run_task_flows(task, flows, event.seq);
}

void GraphBuilder::on_read(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectState& source = require_live(object_key(event, event.object), "read source");
    std::vector<Flow> flows{Flow{source.key, task.key, EdgeType::read, false}};
    run_task_flows(task, flows, event.seq);
}

void GraphBuilder::on_write(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectState& dest = require_live(object_key(event, event.object), "write target");
    std::vector<Flow> flows{Flow{task.key, dest.key, EdgeType::write, false}};
    run_task_flows(task, flows, event.seq);
}

void GraphBuilder::on_setattr(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectState& file = require_live(object_key(event, event.object), "setattr target");

    std::string attr_kind = attr_str_or(event.object.attrs, "attr_kind", "iattr");
    NodeType type;
    if (attr_kind == "iattr") {
        type = NodeType::iattr;
    } else if (attr_kind == "xattr") {
        type = NodeType::xattr;
    } else {
        throw Error("event " + std::to_string(event.seq) + ": unknown attr_kind '" +
                    attr_kind + "'");
    }

    AttrMap payload;
    for (const auto& [key, value] : event.object.attrs) {
        if (key != "attr_kind") payload[key] = value;
    }
    ObjectKey attr_key{event.machine, event.boot, synth_id(attr_kind, "", event.seq)};
    materialize(attr_key, type, payload);

    std::vector<Flow> flows{
        Flow{task.key, attr_key, EdgeType::was_generated_by, true},
        Flow{attr_key, file.key, EdgeType::setattr, false},
    };
    run_task_flows(task, flows, event.seq);

    // Fold inode changes into the live state; extended attributes are
    // namespaced to keep them apart from the core identity fields.
    if (type == NodeType::iattr) {
        for (const auto& [key, value] : payload) {
            if (key == "mode" || key == "uid" || key == "gid") file.attrs[key] = value;
        }
    } else {
        std::string name = attr_str_or(payload, "name", "");
        auto value = payload.find("value");
        if (!name.empty() && value != payload.end()) {
            file.attrs["xattr:" + name] = value->second;
        }
    }
}

void GraphBuilder::on_getattr(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectState& file = require_live(object_key(event, event.object), "getattr target");
    std::vector<Flow> flows{
        Flow{file.key, task.key, EdgeType::perm_read, false},
        Flow{file.key, task.key, EdgeType::getattr, false},
    };
    run_task_flows(task, flows, event.seq);
}

void GraphBuilder::on_unlink(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectState& file = require_live(object_key(event, event.object), "unlink target");
    std::string path = attr_str_or(file.attrs, "path", "");
    auto dirs = ancestor_dirs(path);

    std::vector<Flow> flows;
    if (!dirs.empty()) {
        ObjectKey parent = dir_state(event.machine, event.boot, dirs.back(), event.seq).key;
        flows.push_back(Flow{parent, task.key, EdgeType::perm_write, false});
        flows.push_back(Flow{task.key, parent, EdgeType::write, false});
    }
    run_task_flows(task, flows, event.seq);
    file.alive = false;
}

void GraphBuilder::on_attach(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectKey seg_key = object_key(event, event.object);

    std::vector<Flow> flows;
    if (event.kind == EventKind::shm_attach) {
        if (!states_.count(seg_key)) {
            materialize(seg_key, NodeType::shm, event.object.attrs);
            flows.push_back(Flow{task.key, seg_key, EdgeType::create, true});
        }
    } else {
        require_live(seg_key, "mmap target");
    }
    flows.push_back(Flow{seg_key, task.key, EdgeType::clone_mem, false});
    run_task_flows(task, flows, event.seq);
    // Inserted after the attach flows so the segment is not mirrored into
    // itself; every later task flow couples it in.
    task.attachments.insert(seg_key);
}

void GraphBuilder::on_detach(const Event& event) {
    ObjectState& task = require_task(event);
    task.attachments.erase(object_key(event, event.object));
}

void GraphBuilder::on_socket_create(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectKey key = object_key(event, event.object);
    if (states_.count(key)) {
        throw Error("event " + std::to_string(event.seq) + ": object id " +
                    std::to_string(event.object.id) + " already exists");
    }
    materialize(key, NodeType::socket, event.object.attrs);
    std::vector<Flow> flows{Flow{task.key, key, EdgeType::create, true}};
    run_task_flows(task, flows, event.seq);
}

void GraphBuilder::on_connect(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectState& socket = require_live(object_key(event, event.object), "connect socket");
    const Address& addr = require_address(event);
    std::string ip = format_ipv4(addr.ip);

    socket.attrs["remote_ip"] = ip;
    socket.attrs["remote_port"] = std::uint64_t{addr.port};
    remark(socket, event.seq);

    auto cache_key = std::make_pair(event.machine, addr);
    auto it = address_ids_.find(cache_key);
    ObjectId addr_id;
    if (it != address_ids_.end()) {
        addr_id = it->second;
    } else {
        addr_id = synth_id("addr", ip, addr.port);
        address_ids_.emplace(cache_key, addr_id);
    }
    ObjectKey addr_key{event.machine, event.boot, addr_id};
    AttrMap addr_attrs;
    addr_attrs["ip"] = ip;
    addr_attrs["port"] = std::uint64_t{addr.port};
    materialize(addr_key, NodeType::address, addr_attrs);

    std::vector<Flow> flows{Flow{addr_key, socket.key, EdgeType::connect, false}};
    run_task_flows(task, flows, event.seq);
}

void GraphBuilder::on_bind(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectState& socket = require_live(object_key(event, event.object), "bind socket");
    const Address& addr = require_address(event);
    std::string ip = format_ipv4(addr.ip);

    socket.attrs["local_ip"] = ip;
    socket.attrs["local_port"] = std::uint64_t{addr.port};
    remark(socket, event.seq);

    auto cache_key = std::make_pair(event.machine, addr);
    auto it = address_ids_.find(cache_key);
    ObjectId addr_id;
    if (it != address_ids_.end()) {
        addr_id = it->second;
    } else {
        addr_id = synth_id("addr", ip, addr.port);
        address_ids_.emplace(cache_key, addr_id);
    }
    ObjectKey addr_key{event.machine, event.boot, addr_id};
    AttrMap addr_attrs;
    addr_attrs["ip"] = ip;
    addr_attrs["port"] = std::uint64_t{addr.port};
    materialize(addr_key, NodeType::address, addr_attrs);

    std::vector<Flow> flows{Flow{addr_key, socket.key, EdgeType::bind, false}};
    run_task_flows(task, flows, event.seq);
}

void GraphBuilder::on_accept(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectState& listener = require_live(object_key(event, event.object), "listening socket");
    if (!event.object2) {
        throw Error("event " + std::to_string(event.seq) + ": accept carries no new socket");
    }
    const ObjectRef& conn_ref = *event.object2;
    ObjectKey conn_key = object_key(event, conn_ref);
    if (states_.count(conn_key)) {
        throw Error("event " + std::to_string(event.seq) + ": object id " +
                    std::to_string(conn_ref.id) + " already exists");
    }
    const Address& peer = require_address(event);
    std::string peer_ip = format_ipv4(peer.ip);

    AttrMap conn_attrs = conn_ref.attrs;
    if (auto it = listener.attrs.find("local_ip"); it != listener.attrs.end()) {
        conn_attrs["local_ip"] = it->second;
    }
    if (auto it = listener.attrs.find("local_port"); it != listener.attrs.end()) {
        conn_attrs["local_port"] = it->second;
    }
    conn_attrs["remote_ip"] = peer_ip;
    conn_attrs["remote_port"] = std::uint64_t{peer.port};
    materialize(conn_key, NodeType::socket, conn_attrs);

    auto cache_key = std::make_pair(event.machine, peer);
    auto it = address_ids_.find(cache_key);
    ObjectId addr_id;
    if (it != address_ids_.end()) {
        addr_id = it->second;
    } else {
        addr_id = synth_id("addr", peer_ip, peer.port);
        address_ids_.emplace(cache_key, addr_id);
    }
    ObjectKey addr_key{event.machine, event.boot, addr_id};
    AttrMap addr_attrs;
    addr_attrs["ip"] = peer_ip;
    addr_attrs["port"] = std::uint64_t{peer.port};
    materialize(addr_key, NodeType::address, addr_attrs);

    std::vector<Flow> flows{
        Flow{listener.key, conn_key, EdgeType::was_derived_from, true},
        Flow{addr_key, conn_key, EdgeType::connect, false},
    };
    run_task_flows(task, flows, event.seq);
}

void GraphBuilder::on_send_packet(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectState& socket = require_live(object_key(event, event.object), "send socket");
    const PacketIdentity& identity = require_packet(event);
    bool record_match = policy_.matches_record(identity);

    std::vector<Flow> flows{Flow{task.key, socket.key, EdgeType::send, false}};
    run_task_flows(task, flows, event.seq);

    ObjectKey pkt_key{event.machine, event.boot, packet_object_id(identity)};
    if (states_.count(pkt_key)) {
        throw Error("event " + std::to_string(event.seq) + ": packet identity already sent");
    }
    materialize(pkt_key, NodeType::packet, packet_attributes(identity, event.payload_len));
    run_flow(Flow{socket.key, pkt_key, EdgeType::send, true}, event.seq, record_match);
}

void GraphBuilder::on_recv_packet(const Event& event) {
    ObjectState& task = require_task(event);
    ObjectState& socket = require_live(object_key(event, event.object), "receive socket");
    const PacketIdentity& identity = require_packet(event);
    bool record_match = policy_.matches_record(identity);

    ObjectKey pkt_key{event.machine, event.boot, packet_object_id(identity)};
    if (!states_.count(pkt_key)) {
        // Seen only on the wire: the packet starts a lineage of its own.
        materialize(pkt_key, NodeType::packet, packet_attributes(identity, event.payload_len));
    }
    run_flow(Flow{pkt_key, socket.key, EdgeType::receive, false}, event.seq, record_match);

    std::vector<Flow> flows{Flow{socket.key, task.key, EdgeType::receive, false}};
    run_task_flows(task, flows, event.seq);
}

namespace {

// Disclosure entry points accept a bare task id; ids are unique across
// machines in every supported trace, so the scan is unambiguous.
ObjectState* find_by_object_id(std::map<ObjectKey, ObjectState>& states, ObjectId id,
                               std::optional<NodeType> type) {
    for (auto& [key, state] : states) {
        if (key.object != id) continue;
        if (type && state.type != *type) continue;
        return &state;
    }
    return nullptr;
}

}  // namespace

bool GraphBuilder::ingest_log(ObjectId task, const ObjectRef& entry, const std::string& text,
                              std::uint64_t seq) {
    ObjectState* writer = find_by_object_id(states_, task, NodeType::task);
    if (!writer || !writer->alive) {
        throw Error("event " + std::to_string(seq) + ": unknown log writer task " +
                    std::to_string(task));
    }
    if (current_seq_ != seq) {
        current_seq_ = seq;
        edge_ordinal_ = 0;
    }
    ObjectKey entry_key{writer->key.machine, writer->key.boot, entry.id};
    if (states_.count(entry_key)) {
        throw Error("event " + std::to_string(seq) + ": log entry id " +
                    std::to_string(entry.id) + " already exists");
    }
    AttrMap attrs = entry.attrs;
    attrs["text"] = text;
    materialize(entry_key, NodeType::log_entry, attrs);
    std::vector<Flow> flows{Flow{writer->key, entry_key, EdgeType::log, true}};
    run_task_flows(*writer, flows, seq);
    return true;
}

bool GraphBuilder::disclose_node(ObjectId task, const ObjectRef& node, std::uint64_t seq) {
    ObjectState* discloser = find_by_object_id(states_, task, NodeType::task);
    if (!discloser || !discloser->alive) {
        throw Error("event " + std::to_string(seq) + ": unknown disclosing task " +
                    std::to_string(task));
    }
    if (!discloser->cap_audit_write) {
        stats_.disclosures_rejected += 1;
        return false;
    }
    if (current_seq_ != seq) {
        current_seq_ = seq;
        edge_ordinal_ = 0;
    }
    ObjectKey node_key{discloser->key.machine, discloser->key.boot, node.id};
    if (states_.count(node_key)) {
        stats_.disclosures_rejected += 1;
        return false;
    }
    materialize(node_key, NodeType::disclosed_entity, node.attrs);
    std::vector<Flow> flows{Flow{discloser->key, node_key, EdgeType::disclosed, true}};
    run_task_flows(*discloser, flows, seq);
    return true;
}

bool GraphBuilder::disclose_edge(ObjectId task, ObjectId from, ObjectId to, std::uint64_t seq) {
    ObjectState* discloser = find_by_object_id(states_, task, NodeType::task);
    if (!discloser || !discloser->alive) {
        throw Error("event " + std::to_string(seq) + ": unknown disclosing task " +
                    std::to_string(task));
    }
    if (!discloser->cap_audit_write) {
        stats_.disclosures_rejected += 1;
        return false;
    }
    if (current_seq_ != seq) {
        current_seq_ = seq;
        edge_ordinal_ = 0;
    }
    ObjectState* effect = find_by_object_id(states_, from, std::nullopt);
    ObjectState* cause = find_by_object_id(states_, to, std::nullopt);
    if (!effect || !cause || effect == cause) {
        stats_.disclosures_rejected += 1;
        return false;
    }
    // The claimed cause state must predate the claimed effect state, or the
    // edge could close a cycle.
    if (effect->version_stamp <= cause->version_stamp) {
        stats_.disclosures_rejected += 1;
        return false;
    }
    // Emission order must agree with the claimed direction too; a cause
    // first written out after its effect cannot be linked retroactively.
    bool effect_out = effect->emitted.count(effect->current) != 0;
    bool cause_out = cause->emitted.count(cause->current) != 0;
    if (effect_out && !cause_out) {
        stats_.disclosures_rejected += 1;
        return false;
    }
    if (effect_out && cause_out) {
        NodeIdentity f{effect->key.machine, effect->key.boot, effect->key.object, effect->current};
        NodeIdentity t{cause->key.machine, cause->key.boot, cause->key.object, cause->current};
        if (graph_.node(f).creation_index <= graph_.node(t).creation_index) {
            stats_.disclosures_rejected += 1;
            return false;
        }
    }

    next_edge_id(seq);  // keep the two-lane layout of every other flow
    std::uint64_t flow_slot = next_edge_id(seq);

    FlowEndpoint source = endpoint(*cause);
    FlowEndpoint dest = endpoint(*effect);
    FlowDecision decision = admit_flow(policy_, source, dest, EdgeType::was_derived_from, false);
    if (decision == FlowDecision::skip) {
        stats_.flows_skipped += 1;
        return true;
    }
    if (propagate_tracking(policy_, source, dest, EdgeType::was_derived_from)) {
        effect->acquired_propagate = true;
    }
    propagate_taint(policy_, cause->taints, effect->taints, source, dest,
                    EdgeType::was_derived_from);
    if (decision == FlowDecision::filtered) {
        stats_.flows_filtered += 1;
        return true;
    }

    stats_.flows_recorded += 1;
    ensure_emitted(*cause, seq);
    ensure_emitted(*effect, seq);
    AttrMap attrs;
    attrs["seq"] = seq;
    attrs["disclosed"] = true;
    NodeIdentity f{effect->key.machine, effect->key.boot, effect->key.object, effect->current};
    NodeIdentity t{cause->key.machine, cause->key.boot, cause->key.object, cause->current};
    const ProvEdge& edge = graph_.add_edge(flow_slot, EdgeType::was_derived_from, f, t, attrs);
    stats_.edges_by_type[EdgeType::was_derived_from] += 1;
    push_record(Record::make_edge(edge));
    return true;
}

BuildResult build(const Trace& trace, const CapturePolicy& policy, MachineId machine_filter) {
    GraphBuilder builder(policy, machine_filter);
    builder.load_preamble(trace.preamble);
    for (const Event& event : trace.events) {
        builder.apply_event(event);
    }
    BuildResult result;
    result.graph = builder.graph();
    result.records = builder.records();
    result.stats = builder.stats();
    result.taint_injections = builder.taint_injections();
    return result;
}

}  // namespace prov
