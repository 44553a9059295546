// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include "prov/policy.hpp"

#include <fstream>
#include <sstream>

#include "prov/trace.hpp"

namespace prov {

namespace {

std::string trim(const std::string& text) {
    std::size_t begin = text.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    std::size_t end = text.find_last_not_of(" \t\r");
    return text.substr(begin, end - begin + 1);
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
        throw Error("bad " + what + " '" + text + "'");
    }
    try {
        return std::stoull(text);
    } catch (const std::exception&) {
        throw Error("bad " + what + " '" + text + "'");
    }
}

Cidr parse_cidr(const std::string& text) {
    auto slash = text.find('/');
    if (slash == std::string::npos) {
        throw Error("CIDR '" + text + "' is missing the /prefix part");
    }
    Cidr cidr;
    cidr.addr = parse_ipv4(text.substr(0, slash));
    std::uint64_t prefix = parse_u64(text.substr(slash + 1), "CIDR prefix");
    if (prefix > 32) throw Error("CIDR prefix " + std::to_string(prefix) + " exceeds 32");
    cidr.prefix = static_cast<int>(prefix);
    return cidr;
}

NetSelector parse_net(const std::string& text) {
    auto colon = text.rfind(':');
    if (colon == std::string::npos) {
        throw Error("network selector '" + text + "' is missing the :port part");
    }
    NetSelector net;
    net.cidr = parse_cidr(text.substr(0, colon));
    std::uint64_t port = parse_u64(text.substr(colon + 1), "port");
    if (port > 65535) throw Error("port " + std::to_string(port) + " exceeds 65535");
    net.port = static_cast<std::uint16_t>(port);
    return net;
}

Selector parse_selector(const std::string& text) {
    Selector selector;
    if (!text.empty() && text[0] == '/') {
        // Bare paths are the common case in capture configurations.
        selector.kind = Selector::Kind::path;
        selector.text = text;
        return selector;
    }
    auto eq = text.find('=');
    if (eq == std::string::npos) {
        throw Error("selector '" + text + "' is neither key=value nor a bare path");
    }
    std::string key = text.substr(0, eq);
    std::string value = text.substr(eq + 1);
    if (value.empty()) throw Error("selector '" + text + "' has an empty value");
    if (key == "path") {
        selector.kind = Selector::Kind::path;
        selector.text = value;
    } else if (key == "net") {
        selector.kind = Selector::Kind::net;
        selector.net = parse_net(value);
    } else if (key == "uid") {
        selector.kind = Selector::Kind::uid;
        selector.id = parse_u64(value, "uid");
    } else if (key == "gid") {
        selector.kind = Selector::Kind::gid;
        selector.id = parse_u64(value, "gid");
    } else if (key == "secctx") {
        selector.kind = Selector::Kind::secctx;
        selector.text = value;
    } else if (key == "cgroup") {
        selector.kind = Selector::Kind::cgroup;
        selector.text = value;
    } else {
        throw Error("unknown selector kind '" + key + "'");
    }
    return selector;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        std::string item = comma == std::string::npos ? text.substr(start)
                                                      : text.substr(start, comma - start);
        item = trim(item);
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

const AttrValue* find_attr(const AttrMap& attrs, const std::string& key) {
    auto it = attrs.find(key);
    return it == attrs.end() ? nullptr : &it->second;
}

bool attr_equals_u64(const AttrMap& attrs, const std::string& key, std::uint64_t value) {
    const AttrValue* attr = find_attr(attrs, key);
    if (!attr) return false;
    if (const auto* u = std::get_if<std::uint64_t>(attr)) return *u == value;
    if (const auto* i = std::get_if<std::int64_t>(attr)) {
        return *i >= 0 && static_cast<std::uint64_t>(*i) == value;
    }
    return false;
}

bool attr_equals_str(const AttrMap& attrs, const std::string& key, const std::string& value) {
    const AttrValue* attr = find_attr(attrs, key);
    if (!attr) return false;
    const auto* s = std::get_if<std::string>(attr);
    return s && *s == value;
}

bool net_matches_endpoint(const NetSelector& net, const AttrMap& attrs,
                          const std::string& ip_key, const std::string& port_key) {
    const AttrValue* ip = find_attr(attrs, ip_key);
    const AttrValue* port = find_attr(attrs, port_key);
    if (!ip || !port) return false;
    const auto* ip_str = std::get_if<std::string>(ip);
    const auto* port_num = std::get_if<std::uint64_t>(port);
    if (!ip_str || !port_num) return false;
    std::uint32_t addr;
    try {
        addr = parse_ipv4(*ip_str);
    } catch (const Error&) {
        return false;
    }
    return net.matches(addr, static_cast<std::uint16_t>(*port_num));
}

bool selector_matches(const Selector& selector, NodeType type, const AttrMap& attrs) {
    switch (selector.kind) {
        case Selector::Kind::path:
            return attr_equals_str(attrs, "path", selector.text);
        case Selector::Kind::uid:
            return attr_equals_u64(attrs, "uid", selector.id);
        case Selector::Kind::gid:
            return attr_equals_u64(attrs, "gid", selector.id);
        case Selector::Kind::secctx:
            return attr_equals_str(attrs, "secctx", selector.text);
        case Selector::Kind::cgroup:
            return attr_equals_str(attrs, "cgroup", selector.text);
        case Selector::Kind::net:
            switch (type) {
                case NodeType::socket:
                    return net_matches_endpoint(selector.net, attrs, "local_ip", "local_port") ||
                           net_matches_endpoint(selector.net, attrs, "remote_ip", "remote_port");
                case NodeType::packet:
                    return net_matches_endpoint(selector.net, attrs, "src_ip", "src_port") ||
                           net_matches_endpoint(selector.net, attrs, "dst_ip", "dst_port");
                case NodeType::address:
                    return net_matches_endpoint(selector.net, attrs, "ip", "port");
                default:
                    return false;
            }
    }
    return false;
}

}  // namespace

bool Cidr::contains(std::uint32_t ip) const {
    if (prefix == 0) return true;
    std::uint32_t mask = prefix >= 32 ? 0xffffffffu : ~((1u << (32 - prefix)) - 1);
    return (ip & mask) == (addr & mask);
}

bool NetSelector::matches(std::uint32_t ip, std::uint16_t p) const {
    return cidr.contains(ip) && (port == 0 || port == p);
}

bool CapturePolicy::matches_record(const PacketIdentity& packet) const {
    for (const auto& net : record) {
        if (net.matches(packet.src_ip, packet.src_port) ||
            net.matches(packet.dst_ip, packet.dst_port)) {
            return true;
        }
    }
    return false;
}

CapturePolicy parse_policy(const std::string& text) {
    CapturePolicy policy;
    std::istringstream in(text);
    std::string raw;
    std::uint64_t line_no = 0;
    bool saw_mode = false;

    auto fail = [&](const std::string& message) -> void {
        throw Error("policy line " + std::to_string(line_no) + ": " + message);
    };

    while (std::getline(in, raw)) {
        line_no += 1;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        try {
            if (line.front() == '[') {
                if (line != "[provenance]") {
                    fail("unknown section '" + line + "'");
                }
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos) {
                fail("expected key=value");
            }
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key == "provenance") {
                if (value == "whole") {
                    policy.mode = CaptureMode::whole;
                } else if (value == "selective") {
                    policy.mode = CaptureMode::selective;
                } else {
                    fail("provenance must be 'whole' or 'selective'");
                }
                saw_mode = true;
            } else if (key == "opaque") {
                policy.opaque.push_back(parse_selector(value));
            } else if (key == "track") {
                policy.track.push_back(parse_selector(value));
            } else if (key == "propagate") {
                policy.propagate.push_back(parse_selector(value));
            } else if (key == "node_filter") {
                for (const auto& item : split_list(value)) {
                    policy.node_filter.insert(node_type_from_string(item));
                }
            } else if (key == "relation_filter") {
                for (const auto& item : split_list(value)) {
                    policy.relation_filter.insert(edge_type_from_string(item));
                }
            } else if (key == "propagate_node_filter") {
                for (const auto& item : split_list(value)) {
                    policy.propagate_node_filter.insert(node_type_from_string(item));
                }
            } else if (key == "propagate_edge_filter") {
                for (const auto& item : split_list(value)) {
                    policy.propagate_edge_filter.insert(edge_type_from_string(item));
                }
            } else if (key == "taint") {
                auto semi = value.find(';');
                if (semi == std::string::npos) {
                    fail("taint needs the form <value>;<selector>");
                }
                TaintRule rule;
                rule.taint = parse_u64(trim(value.substr(0, semi)), "taint value");
                rule.selector = parse_selector(trim(value.substr(semi + 1)));
                policy.taints.push_back(rule);
            } else if (key == "record") {
                policy.record.push_back(parse_net(value));
            } else {
                fail("unknown key '" + key + "'");
            }
        } catch (const Error& e) {
            std::string what = e.what();
            if (what.rfind("policy line", 0) == 0) throw;
            fail(what);
        }
    }
    (void)saw_mode;  // mode defaults to whole when the file never sets it
    return policy;
}

CapturePolicy parse_policy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open policy file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_policy(text.str());
}

PolicyMark mark_object(const CapturePolicy& policy, NodeType type, const AttrMap& attrs) {
    PolicyMark mark;
    for (const auto& selector : policy.opaque) {
        if (selector_matches(selector, type, attrs)) {
            mark.level = MarkLevel::opaque;
            break;
        }
    }
    if (mark.level != MarkLevel::opaque) {
        for (const auto& selector : policy.propagate) {
            if (selector_matches(selector, type, attrs)) {
                mark.level = MarkLevel::propagate_tracked;
                break;
            }
        }
    }
    if (mark.level == MarkLevel::unmarked) {
        for (const auto& selector : policy.track) {
            if (selector_matches(selector, type, attrs)) {
                mark.level = MarkLevel::tracked;
                break;
            }
        }
    }
    for (const auto& rule : policy.taints) {
        if (selector_matches(rule.selector, type, attrs)) {
            mark.taints.push_back(rule.taint);
        }
    }
    return mark;
}

FlowDecision admit_flow(const CapturePolicy& policy, const FlowEndpoint& source,
                        const FlowEndpoint& dest, EdgeType edge, bool record_match) {
    // Opacity is absolute and beats every other rule, including record=.
    if (source.opaque() || dest.opaque()) return FlowDecision::skip;
    bool admissible = policy.mode == CaptureMode::whole || source.tracked() ||
                      dest.tracked() || record_match;
    if (!admissible) return FlowDecision::skip;
    // Type filters always run last.
    if (policy.relation_filter.count(edge)) return FlowDecision::filtered;
    if (policy.node_filter.count(source.type) || policy.node_filter.count(dest.type)) {
        return FlowDecision::filtered;
    }
    return FlowDecision::record;
}

bool propagate_allows(const CapturePolicy& policy, EdgeType edge, NodeType dest_type) {
    return !policy.propagate_edge_filter.count(edge) &&
           !policy.propagate_node_filter.count(dest_type);
}

bool propagate_tracking(const CapturePolicy& policy, const FlowEndpoint& source,
                        FlowEndpoint& dest, EdgeType edge) {
    if (!source.propagates() || dest.opaque()) return false;
    if (!propagate_allows(policy, edge, dest.type)) return false;
    if (dest.acquired_propagate) return false;
    dest.acquired_propagate = true;
    return true;
}

bool propagate_taint(const CapturePolicy& policy, const std::set<std::uint64_t>& source_taints,
                     std::set<std::uint64_t>& dest_taints, const FlowEndpoint& source,
                     const FlowEndpoint& dest, EdgeType edge) {
    if (source.opaque() || dest.opaque()) return false;
    if (source_taints.empty()) return false;
    if (!propagate_allows(policy, edge, dest.type)) return false;
    std::size_t before = dest_taints.size();
    dest_taints.insert(source_taints.begin(), source_taints.end());
    return dest_taints.size() != before;
}

bool reevaluate_on_event(EventKind kind) {
    switch (kind) {
        case EventKind::setuid:
        case EventKind::connect:
        case EventKind::bind:
        case EventKind::task_exec:
            return true;
        default:
            return false;
    }
}

}  // namespace prov
