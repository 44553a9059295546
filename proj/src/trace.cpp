// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include "prov/trace.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace prov {

namespace {

using nlohmann::json;

struct EventKindName {
    EventKind kind;
    const char* name;
};

constexpr std::array<EventKindName, 25> kEventKindNames{{
    {EventKind::machine_boot, "machine_boot"},
    {EventKind::task_fork, "task_fork"},
    {EventKind::task_exec, "task_exec"},
    {EventKind::task_exit, "task_exit"},
    {EventKind::setuid, "setuid"},
    {EventKind::file_create, "file_create"},
    {EventKind::open, "open"},
    {EventKind::read, "read"},
    {EventKind::write, "write"},
    {EventKind::setattr, "setattr"},
    {EventKind::getattr, "getattr"},
    {EventKind::unlink, "unlink"},
    {EventKind::mmap_attach, "mmap_attach"},
    {EventKind::shm_attach, "shm_attach"},
    {EventKind::detach, "detach"},
    {EventKind::socket_create, "socket_create"},
    {EventKind::connect, "connect"},
    {EventKind::bind, "bind"},
    {EventKind::accept, "accept"},
    {EventKind::send_packet, "send_packet"},
    {EventKind::recv_packet, "recv_packet"},
    {EventKind::log_write, "log_write"},
    {EventKind::disclose_node, "disclose_node"},
    {EventKind::disclose_edge, "disclose_edge"},
    {EventKind::disclose_log, "disclose_log"},
}};

json attr_value_to_json(const AttrValue& value) {
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    if (const auto* u = std::get_if<std::uint64_t>(&value)) return *u;
    if (const auto* i = std::get_if<std::int64_t>(&value)) return *i;
    return std::get<bool>(value);
}

AttrValue attr_value_from_json(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_boolean()) return value.get<bool>();
    if (value.is_number_unsigned()) return value.get<std::uint64_t>();
    if (value.is_number_integer()) return value.get<std::int64_t>();
    throw Error("attribute values must be strings, integers, or booleans");
}

json attrs_to_json(const AttrMap& attrs) {
    json out = json::object();
    for (const auto& [key, value] : attrs) out[key] = attr_value_to_json(value);
    return out;
}

AttrMap attrs_from_json(const json& value) {
    if (!value.is_object()) throw Error("attrs must be an object");
    AttrMap out;
    for (const auto& [key, item] : value.items()) out[key] = attr_value_from_json(item);
    return out;
}

json object_ref_to_json(const ObjectRef& ref) {
    json out;
    out["id"] = ref.id;
    if (!ref.attrs.empty()) out["attrs"] = attrs_to_json(ref.attrs);
    return out;
}

ObjectRef object_ref_from_json(const json& value) {
    if (!value.is_object() || !value.contains("id") || !value["id"].is_number_unsigned()) {
        throw Error("object reference needs an unsigned 'id'");
    }
    ObjectRef ref;
    ref.id = value["id"].get<std::uint64_t>();
    if (value.contains("attrs")) ref.attrs = attrs_from_json(value["attrs"]);
    for (const auto& [key, item] : value.items()) {
        (void)item;
        if (key != "id" && key != "attrs") {
            throw Error("unknown object reference field '" + key + "'");
        }
    }
    return ref;
}

json packet_to_json(const PacketIdentity& packet) {
    json out;
    out["ip_id"] = packet.ip_id;
    out["src_ip"] = format_ipv4(packet.src_ip);
    out["dst_ip"] = format_ipv4(packet.dst_ip);
    out["src_port"] = packet.src_port;
    out["dst_port"] = packet.dst_port;
    out["protocol"] = to_string(packet.protocol);
    if (packet.tcp_seq) out["tcp_seq"] = *packet.tcp_seq;
    return out;
}

PacketIdentity packet_from_json(const json& value) {
    for (const char* key : {"ip_id", "src_ip", "dst_ip", "src_port", "dst_port", "protocol"}) {
        if (!value.contains(key)) {
            throw Error(std::string("packet identity missing '") + key + "'");
        }
    }
    std::optional<std::uint32_t> seq;
    if (value.contains("tcp_seq")) seq = value["tcp_seq"].get<std::uint32_t>();
    return packet_identifier(value["ip_id"].get<std::uint16_t>(),
                             parse_ipv4(value["src_ip"].get<std::string>()),
                             parse_ipv4(value["dst_ip"].get<std::string>()),
                             value["src_port"].get<std::uint16_t>(),
                             value["dst_port"].get<std::uint16_t>(),
                             protocol_from_string(value["protocol"].get<std::string>()),
                             seq);
}

json event_to_json(const Event& event) {
    json out;
    out["seq"] = event.seq;
    out["machine"] = event.machine;
    out["boot"] = event.boot;
    out["kind"] = to_string(event.kind);
    if (event.subject != 0) out["subject"] = event.subject;
    if (event.object.id != 0 || !event.object.attrs.empty()) {
        out["object"] = object_ref_to_json(event.object);
    }
    if (event.object2) out["object2"] = object_ref_to_json(*event.object2);
    if (event.address) {
        out["address"] = {{"ip", format_ipv4(event.address->ip)}, {"port", event.address->port}};
    }
    if (event.packet) out["packet"] = packet_to_json(*event.packet);
    if (event.payload_len != 0) out["len"] = event.payload_len;
    if (!event.text.empty()) out["text"] = event.text;
    if (!event.argv.empty()) out["argv"] = event.argv;
    if (!event.flags.empty()) out["flags"] = event.flags;
    if (!event.inject.empty()) out["inject"] = event.inject;
    return out;
}

Event event_from_json(const json& value) {
    static const std::set<std::string> known{
        "seq",    "machine", "boot", "kind", "subject", "object", "object2",
        "address", "packet",  "len",  "text", "argv",    "flags",  "inject"};
    for (const auto& [key, item] : value.items()) {
        (void)item;
        if (!known.count(key)) throw Error("unknown event field '" + key + "'");
    }
    for (const char* key : {"seq", "machine", "boot", "kind"}) {
        if (!value.contains(key)) throw Error(std::string("event missing '") + key + "'");
    }
    Event event;
    event.seq = value["seq"].get<std::uint64_t>();
    event.machine = value["machine"].get<std::uint64_t>();
    event.boot = value["boot"].get<std::uint64_t>();
    event.kind = event_kind_from_string(value["kind"].get<std::string>());
    if (value.contains("subject")) event.subject = value["subject"].get<std::uint64_t>();
    if (value.contains("object")) event.object = object_ref_from_json(value["object"]);
    if (value.contains("object2")) event.object2 = object_ref_from_json(value["object2"]);
    if (value.contains("address")) {
        const json& addr = value["address"];
        if (!addr.contains("ip") || !addr.contains("port")) {
            throw Error("address needs 'ip' and 'port'");
        }
        event.address = Address{parse_ipv4(addr["ip"].get<std::string>()),
                                addr["port"].get<std::uint16_t>()};
    }
    if (value.contains("packet")) event.packet = packet_from_json(value["packet"]);
    if (value.contains("len")) event.payload_len = value["len"].get<std::uint64_t>();
    if (value.contains("text")) event.text = value["text"].get<std::string>();
    if (value.contains("argv")) event.argv = value["argv"].get<std::string>();
    if (value.contains("flags")) event.flags = value["flags"].get<std::string>();
    if (value.contains("inject")) {
        for (const auto& tag : value["inject"]) {
            event.inject.push_back(tag.get<std::uint64_t>());
        }
    }
    return event;
}

void check_event_shape(const Event& event) {
    auto need_subject = [&] {
        if (event.subject == 0) {
            throw Error("event kind " + to_string(event.kind) + " needs a subject task");
        }
    };
    auto need_object = [&] {
        if (event.object.id == 0) {
            throw Error("event kind " + to_string(event.kind) + " needs an object");
        }
    };
    switch (event.kind) {
        case EventKind::machine_boot:
            break;
        case EventKind::task_fork:
            need_object();
            break;
        case EventKind::task_exit:
        case EventKind::setuid:
            need_subject();
            break;
        case EventKind::connect:
        case EventKind::bind:
            need_subject();
            need_object();
            if (!event.address) {
                throw Error(to_string(event.kind) + " needs an address");
            }
            break;
        case EventKind::accept:
            need_subject();
            need_object();
            if (!event.object2) throw Error("accept needs the connected socket");
            if (!event.address) throw Error("accept needs the peer address");
            break;
        case EventKind::send_packet:
        case EventKind::recv_packet:
            need_subject();
            need_object();
            if (!event.packet) {
                throw Error(to_string(event.kind) + " needs a packet identity");
            }
            break;
        case EventKind::log_write:
        case EventKind::disclose_log:
            need_subject();
            need_object();
            break;
        case EventKind::disclose_edge:
            need_subject();
            need_object();
            if (!event.object2) throw Error("disclose_edge needs both endpoints");
            break;
        default:
            need_subject();
            need_object();
            break;
    }
}

json preamble_entry_to_json(const PreambleEntry& entry) {
    json out;
    out["machine"] = entry.machine;
    out["boot"] = entry.boot;
    out["object"] = entry.object;
    out["type"] = to_string(entry.type);
    out["path"] = entry.path;
    out["uid"] = entry.uid;
    out["gid"] = entry.gid;
    out["mode"] = entry.mode;
    return out;
}

PreambleEntry preamble_entry_from_json(const json& value) {
    for (const char* key : {"machine", "boot", "object", "type", "path", "uid", "gid", "mode"}) {
        if (!value.contains(key)) {
            throw Error(std::string("preamble entry missing '") + key + "'");
        }
    }
    PreambleEntry entry;
    entry.machine = value["machine"].get<std::uint64_t>();
    entry.boot = value["boot"].get<std::uint64_t>();
    entry.object = value["object"].get<std::uint64_t>();
    entry.type = node_type_from_string(value["type"].get<std::string>());
    if (entry.type != NodeType::file && entry.type != NodeType::directory) {
        throw Error("preamble entries may only declare files or directories");
    }
    entry.path = value["path"].get<std::string>();
    entry.uid = value["uid"].get<std::uint64_t>();
    entry.gid = value["gid"].get<std::uint64_t>();
    entry.mode = value["mode"].get<std::uint64_t>();
    return entry;
}

}  // namespace

std::string to_string(EventKind kind) {
    for (const auto& entry : kEventKindNames) {
        if (entry.kind == kind) return entry.name;
    }
    throw Error("unknown event kind");
}

EventKind event_kind_from_string(const std::string& name) {
    for (const auto& entry : kEventKindNames) {
        if (name == entry.name) return entry.kind;
    }
    throw Error("unknown event kind '" + name + "'");
}

Trace read_trace(std::istream& in) {
    Trace trace;
    std::string line;
    std::uint64_t line_no = 0;
    std::uint64_t last_seq = 0;
    bool saw_event = false;
    // Objects a later open event may legally reference.
    std::set<std::pair<MachineId, ObjectId>> openable;

    while (std::getline(in, line)) {
        line_no += 1;
        if (line.empty()) continue;
        json parsed;
        try {
            parsed = json::parse(line);
        } catch (const json::exception& e) {
            throw Error("trace line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            if (!parsed.is_object()) throw Error("line is not a JSON object");
            if (parsed.contains("preamble")) {
                if (saw_event || !trace.preamble.empty()) {
                    throw Error("preamble must be the first line");
                }
                for (const auto& item : parsed["preamble"]) {
                    trace.preamble.push_back(preamble_entry_from_json(item));
                }
                for (const auto& entry : trace.preamble) {
                    openable.insert({entry.machine, entry.object});
                }
                continue;
            }
            Event event = event_from_json(parsed);
            check_event_shape(event);
            if (saw_event && event.seq <= last_seq) {
                throw Error("seq " + std::to_string(event.seq) +
                            " does not increase over " + std::to_string(last_seq));
            }
            if (event.kind == EventKind::file_create) {
                openable.insert({event.machine, event.object.id});
            }
            if (event.kind == EventKind::open &&
                !openable.count({event.machine, event.object.id})) {
                throw Error("open references object " + std::to_string(event.object.id) +
                            " that was neither created nor declared preexisting");
            }
            last_seq = event.seq;
            saw_event = true;
            trace.events.push_back(std::move(event));
        } catch (const json::exception& e) {
            throw Error("trace line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("trace line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return trace;
}

Trace read_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trace file '" + path + "'");
    return read_trace(in);
}

void write_trace(const Trace& trace, std::ostream& out) {
    if (!trace.preamble.empty()) {
        json entries = json::array();
        for (const auto& entry : trace.preamble) {
            entries.push_back(preamble_entry_to_json(entry));
        }
        json line;
        line["preamble"] = std::move(entries);
        out << line.dump() << "\n";
    }
    for (const auto& event : trace.events) {
        out << event_to_json(event).dump() << "\n";
    }
}

void write_trace_file(const Trace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write trace file '" + path + "'");
    write_trace(trace, out);
}

std::string trace_to_string(const Trace& trace) {
    std::ostringstream out;
    write_trace(trace, out);
    return out.str();
}

bool oracle_reached(const GroundTruth& truth, std::uint64_t tag, const ObjectKey& object) {
    auto it = truth.reached.find(tag);
    if (it == truth.reached.end()) {
        throw Error("unknown byte-tag " + std::to_string(tag));
    }
    return it->second.count(object) > 0;
}

ScenarioParams ScenarioParams::parse(const std::vector<std::string>& key_values) {
    ScenarioParams params;
    for (const auto& item : key_values) {
        auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw Error("scenario parameter '" + item + "' is not key=value");
        }
        std::string key = item.substr(0, eq);
        std::string value = item.substr(eq + 1);
        try {
            if (key == "iterations") {
                params.iterations = std::stoull(value);
            } else if (key == "drop") {
                params.drop = std::stod(value);
            } else if (key == "nat") {
                params.nat = value == "1" || value == "true";
            } else if (key == "sanitizer") {
                params.sanitizer = value == "1" || value == "true";
            } else if (key == "scale") {
                params.scale = std::stoull(value);
            } else {
                throw Error("unknown scenario parameter '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw Error("bad value for scenario parameter '" + key + "'");
        } catch (const std::out_of_range&) {
            throw Error("bad value for scenario parameter '" + key + "'");
        }
        if (params.drop < 0.0 || params.drop > 1.0) {
            throw Error("drop probability must lie in [0,1]");
        }
        if (params.scale == 0) {
            throw Error("scale must be positive");
        }
    }
    return params;
}

}  // namespace prov
