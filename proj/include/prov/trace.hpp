// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "prov/model.hpp"
#include "prov/net.hpp"

namespace prov {

enum class EventKind {
    machine_boot,
    task_fork,
    task_exec,
    task_exit,
    setuid,
    file_create,
    open,
    read,
    write,
    setattr,
    getattr,
    unlink,
    mmap_attach,
    shm_attach,
    detach,
    socket_create,
    connect,
    bind,
    accept,
    send_packet,
    recv_packet,
    log_write,
    disclose_node,
    disclose_edge,
    disclose_log,
};

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& name);

// Reference to a kernel object within one (machine, boot). Attributes
// ride along so the first event touching an object can materialize it.
struct ObjectRef {
    ObjectId id = 0;
    AttrMap attrs;

    bool operator==(const ObjectRef&) const = default;
};

struct Address {
    std::uint32_t ip = 0;
    std::uint16_t port = 0;

    auto operator<=>(const Address&) const = default;
};

// One captured kernel event. seq is globally monotone across the whole
// trace, machines included, so cross-host causality is visible.
struct Event {
    std::uint64_t seq = 0;
    MachineId machine = 0;
    BootId boot = 0;
    EventKind kind = EventKind::machine_boot;
    ObjectId subject = 0;          // acting task; 0 for machine_boot
    ObjectRef object;              // primary object (file, socket, child task, ...)
    std::optional<ObjectRef> object2;  // accept: connected socket; disclose_edge: cause
    std::optional<Address> address;    // connect/bind/accept peer
    std::optional<PacketIdentity> packet;
    std::uint64_t payload_len = 0;
    std::string text;              // log payloads
    std::string argv;              // exec arguments
    std::string flags;             // open mode: "r", "w", "rw"
    std::vector<std::uint64_t> inject;  // byte-tags carried into the flow source

    bool operator==(const Event&) const = default;
};

// Filesystem objects that exist before the first event.
struct PreambleEntry {
    MachineId machine = 0;
    BootId boot = 0;
    ObjectId object = 0;
    NodeType type = NodeType::file;  // file or directory
    std::string path;
    std::uint64_t uid = 0;
    std::uint64_t gid = 0;
    std::uint64_t mode = 0;

    bool operator==(const PreambleEntry&) const = default;
};

struct Trace {
    std::vector<PreambleEntry> preamble;
    std::vector<Event> events;

    bool operator==(const Trace&) const = default;
};

// Line-delimited JSON codec. Errors carry 1-based line numbers.
Trace read_trace(std::istream& in);
Trace read_trace_file(const std::string& path);
void write_trace(const Trace& trace, std::ostream& out);
void write_trace_file(const Trace& trace, const std::string& path);
std::string trace_to_string(const Trace& trace);

// What actually happened to the simulated bytes, independent of any
// capture policy. Tags are injected at known events and move along
// real data flows only.
struct GroundTruth {
    struct Injection {
        std::uint64_t tag = 0;
        ObjectKey object;
        std::uint64_t seq = 0;
    };
    std::vector<Injection> injections;
    std::map<std::uint64_t, std::set<ObjectKey>> reached;
    std::vector<PacketIdentity> dropped;  // packets sent but never delivered
};

bool oracle_reached(const GroundTruth& truth, std::uint64_t tag, const ObjectKey& object);

struct ScenarioParams {
    std::uint64_t iterations = 3;   // request/stage repetitions
    double drop = 0.0;              // two_host: per-packet loss probability
    bool nat = false;               // two_host: receiver sees rewritten dst ip
    bool sanitizer = false;         // webstack: scrub task interposed
    std::uint64_t scale = 1;        // multiplies iterations for large traces

    static ScenarioParams parse(const std::vector<std::string>& key_values);
};

struct SimResult {
    Trace trace;
    GroundTruth truth;
};

const std::vector<std::string>& scenario_names();

// Deterministic: equal (scenario, seed, params) give byte-identical traces.
SimResult simulate(const std::string& scenario, std::uint64_t seed,
                   const ScenarioParams& params = {});

}  // namespace prov
