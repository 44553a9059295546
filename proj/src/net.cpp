// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include "prov/net.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace prov {

namespace {

std::uint64_t fnv1a(std::uint64_t hash, std::uint64_t value, int bytes) {
    for (int i = 0; i < bytes; ++i) {
        hash ^= (value >> (8 * i)) & 0xff;
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::uint64_t attr_u64(const AttrMap& attrs, const std::string& key) {
    auto it = attrs.find(key);
    if (it == attrs.end()) throw Error("packet attributes missing '" + key + "'");
    if (const auto* u = std::get_if<std::uint64_t>(&it->second)) return *u;
    throw Error("packet attribute '" + key + "' is not unsigned");
}

std::string attr_str(const AttrMap& attrs, const std::string& key) {
    auto it = attrs.find(key);
    if (it == attrs.end()) throw Error("packet attributes missing '" + key + "'");
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
    throw Error("packet attribute '" + key + "' is not a string");
}

}  // namespace

std::string to_string(Protocol protocol) {
    return protocol == Protocol::tcp ? "tcp" : "udp";
}

Protocol protocol_from_string(const std::string& name) {
    if (name == "tcp") return Protocol::tcp;
    if (name == "udp") return Protocol::udp;
    throw Error("unknown protocol '" + name + "'");
}

PacketIdentity packet_identifier(std::uint16_t ip_id, std::uint32_t src_ip,
                                 std::uint32_t dst_ip, std::uint16_t src_port,
                                 std::uint16_t dst_port, Protocol protocol,
                                 std::optional<std::uint32_t> tcp_seq) {
    if (protocol == Protocol::tcp && !tcp_seq) {
        throw Error("tcp packet identity requires a sequence number");
    }
    if (protocol == Protocol::udp && tcp_seq) {
        throw Error("udp packet identity cannot carry a sequence number");
    }
    PacketIdentity identity;
    identity.ip_id = ip_id;
    identity.src_ip = src_ip;
    identity.dst_ip = dst_ip;
    identity.src_port = src_port;
    identity.dst_port = dst_port;
    identity.protocol = protocol;
    identity.tcp_seq = tcp_seq;
    return identity;
}

std::uint64_t packet_object_id(const PacketIdentity& identity) {
    std::uint64_t hash = 14695981039346656037ULL;
    hash = fnv1a(hash, identity.ip_id, 2);
    hash = fnv1a(hash, identity.src_ip, 4);
    hash = fnv1a(hash, identity.dst_ip, 4);
    hash = fnv1a(hash, identity.src_port, 2);
    hash = fnv1a(hash, identity.dst_port, 2);
    hash = fnv1a(hash, identity.protocol == Protocol::tcp ? 6 : 17, 1);
    hash = fnv1a(hash, identity.tcp_seq.value_or(0), 4);
    // Keep hash-allocated ids out of the counter-allocated id space.
    return hash | (1ULL << 63);
}

std::uint32_t parse_ipv4(const std::string& dotted) {
    std::uint32_t parts[4];
    std::size_t start = 0;
    for (int index = 0; index < 4; ++index) {
        std::size_t dot = dotted.find('.', start);
        // exactly three dots: pieces 0..2 end at a dot, piece 3 at the end
        bool last = index == 3;
        if (last != (dot == std::string::npos)) {
            throw Error("bad IPv4 address '" + dotted + "'");
        }
        std::string piece = last ? dotted.substr(start) : dotted.substr(start, dot - start);
        if (piece.empty() || piece.size() > 3 ||
            piece.find_first_not_of("0123456789") != std::string::npos) {
            throw Error("bad IPv4 address '" + dotted + "'");
        }
        unsigned long value = std::stoul(piece);
        if (value > 255) throw Error("bad IPv4 address '" + dotted + "'");
        parts[index] = static_cast<std::uint32_t>(value);
        start = dot + 1;
    }
    return (parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3];
}

std::string format_ipv4(std::uint32_t addr) {
    std::ostringstream out;
    out << ((addr >> 24) & 0xff) << '.' << ((addr >> 16) & 0xff) << '.'
        << ((addr >> 8) & 0xff) << '.' << (addr & 0xff);
    return out.str();
}

AttrMap packet_attributes(const PacketIdentity& identity, std::uint64_t payload_len) {
    AttrMap attrs;
    attrs["ip_id"] = static_cast<std::uint64_t>(identity.ip_id);
    attrs["src_ip"] = format_ipv4(identity.src_ip);
    attrs["dst_ip"] = format_ipv4(identity.dst_ip);
    attrs["src_port"] = static_cast<std::uint64_t>(identity.src_port);
    attrs["dst_port"] = static_cast<std::uint64_t>(identity.dst_port);
    attrs["protocol"] = to_string(identity.protocol);
    if (identity.tcp_seq) {
        attrs["tcp_seq"] = static_cast<std::uint64_t>(*identity.tcp_seq);
    }
    attrs["payload_len"] = payload_len;
    return attrs;
}

PacketIdentity packet_identity_from_attrs(const AttrMap& attrs) {
    Protocol protocol = protocol_from_string(attr_str(attrs, "protocol"));
    std::optional<std::uint32_t> seq;
    if (attrs.count("tcp_seq")) {
        seq = static_cast<std::uint32_t>(attr_u64(attrs, "tcp_seq"));
    }
    return packet_identifier(static_cast<std::uint16_t>(attr_u64(attrs, "ip_id")),
                             parse_ipv4(attr_str(attrs, "src_ip")),
                             parse_ipv4(attr_str(attrs, "dst_ip")),
                             static_cast<std::uint16_t>(attr_u64(attrs, "src_port")),
                             static_cast<std::uint16_t>(attr_u64(attrs, "dst_port")),
                             protocol, seq);
}

StitchResult stitch(const std::vector<const ProvGraph*>& graphs) {
    struct PacketInfo {
        NodeIdentity unified;
        AttrMap attrs;
        NodeType type = NodeType::packet;
        std::set<std::string> observed;
        std::uint64_t seq = ~0ULL;
        std::uint64_t payload_len = 0;
    };

    std::map<NodeIdentity, NodeIdentity> remap;
    std::map<NodeIdentity, PacketInfo> packets;  // keyed by unified identity
    std::vector<ProvNode> nodes;
    std::map<NodeIdentity, std::size_t> node_pos;

    auto node_seq = [](const ProvNode& n) -> std::uint64_t {
        auto it = n.attributes.find("seq");
        if (it == n.attributes.end()) return 0;
        if (const auto* u = std::get_if<std::uint64_t>(&it->second)) return *u;
        return 0;
    };

    for (const ProvGraph* graph : graphs) {
        for (const ProvNode& node : graph->nodes()) {
            if (node.type == NodeType::packet) {
                PacketIdentity identity = packet_identity_from_attrs(node.attributes);
                NodeIdentity unified{0, 0, packet_object_id(identity), 0};
                remap[node.identity] = unified;

                auto& info = packets[unified];
                info.unified = unified;
                if (info.attrs.empty()) info.attrs = node.attributes;
                info.seq = std::min(info.seq, node_seq(node));
                // An already-unified node lists every origin it absorbed.
                auto obs = node.attributes.find("observed");
                if (obs != node.attributes.end()) {
                    std::string list = attr_to_display(obs->second);
                    std::size_t start = 0;
                    while (start < list.size()) {
                        std::size_t comma = list.find(',', start);
                        std::string item = comma == std::string::npos
                                               ? list.substr(start)
                                               : list.substr(start, comma - start);
                        if (!item.empty()) info.observed.insert(item);
                        if (comma == std::string::npos) break;
                        start = comma + 1;
                    }
                } else {
                    std::ostringstream origin;
                    origin << node.identity.machine << ":" << node.identity.boot << ":"
                           << node.identity.object;
                    info.observed.insert(origin.str());
                }
                continue;
            }
            auto it = node_pos.find(node.identity);
            if (it != node_pos.end()) {
                if (!(nodes[it->second] == node)) {
                    throw Error("conflicting duplicate node across stitched graphs");
                }
                continue;
            }
            node_pos[node.identity] = nodes.size();
            nodes.push_back(node);
        }
    }

    for (auto& [unified, info] : packets) {
        ProvNode node;
        node.identity = unified;
        node.type = NodeType::packet;
        node.attributes = info.attrs;
        node.attributes["seq"] = (info.seq == ~0ULL) ? std::uint64_t{0} : info.seq;
        std::string observed;
        for (const auto& item : info.observed) {
            if (!observed.empty()) observed += ",";
            observed += item;
        }
        node.attributes["observed"] = observed;
        nodes.push_back(std::move(node));
    }

    std::vector<ProvEdge> edges;
    std::set<std::uint64_t> seen_edges;
    for (const ProvGraph* graph : graphs) {
        for (const ProvEdge& edge : graph->edges()) {
            ProvEdge copy = edge;
            if (auto it = remap.find(copy.from); it != remap.end()) copy.from = it->second;
            if (auto it = remap.find(copy.to); it != remap.end()) copy.to = it->second;
            if (!seen_edges.insert(copy.edge_id).second) {
                // Tolerate exact duplicates so stitching is idempotent.
                bool duplicate = std::any_of(edges.begin(), edges.end(),
                                             [&](const ProvEdge& e) { return e == copy; });
                if (duplicate) continue;
                throw Error("conflicting duplicate edge id " + std::to_string(copy.edge_id));
            }
            edges.push_back(std::move(copy));
        }
    }

    StitchResult result;
    result.graph = assemble_graph(nodes, edges);

    // Classify every packet by where its flows were observed.
    std::map<NodeIdentity, std::pair<bool, bool>> activity;  // sent, received
    for (const ProvNode& node : result.graph.nodes()) {
        if (node.type == NodeType::packet) activity[node.identity];
    }
    for (const ProvEdge& edge : result.graph.edges()) {
        if (edge.type == EdgeType::send) {
            if (auto it = activity.find(edge.from); it != activity.end()) {
                it->second.first = true;
            }
        } else if (edge.type == EdgeType::receive) {
            if (auto it = activity.find(edge.to); it != activity.end()) {
                it->second.second = true;
            }
        }
    }
    for (const auto& [identity, flows] : activity) {
        if (flows.first && flows.second) {
            result.report.matched += 1;
        } else if (flows.first) {
            result.report.unmatched_sent += 1;
        } else if (flows.second) {
            result.report.unmatched_received += 1;
        }
    }
    return result;
}

}  // namespace prov
