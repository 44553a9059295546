// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include "prov/wire.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace prov {

using json = nlohmann::json;

namespace {

constexpr std::uint16_t kMagic = 0xCF01;
constexpr std::uint8_t kNodeRecord = 0x01;
constexpr std::uint8_t kEdgeRecord = 0x02;

constexpr std::uint8_t kTagString = 0;
constexpr std::uint8_t kTagU64 = 1;
constexpr std::uint8_t kTagI64 = 2;
constexpr std::uint8_t kTagBool = 3;

// ---- PROV-JSON -------------------------------------------------------------

json attr_value_to_json(const AttrValue& value) {
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    if (const auto* u = std::get_if<std::uint64_t>(&value)) return *u;
    if (const auto* i = std::get_if<std::int64_t>(&value)) return *i;
    return std::get<bool>(value);
}

AttrValue attr_value_from_json(const json& value, const std::string& where) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_unsigned()) return value.get<std::uint64_t>();
    if (value.is_number_integer()) return value.get<std::int64_t>();
    if (value.is_boolean()) return value.get<bool>();
    throw Error(where + ": unsupported attribute value type");
}

struct RelationFields {
    const char* from;
    const char* to;
};

RelationFields relation_fields(RelationClass cls) {
    switch (cls) {
        case RelationClass::used:
            return {"prov:activity", "prov:entity"};
        case RelationClass::was_generated_by:
            return {"prov:entity", "prov:activity"};
        case RelationClass::was_informed_by:
            return {"prov:informed", "prov:informant"};
        case RelationClass::was_derived_from:
            return {"prov:generatedEntity", "prov:usedEntity"};
        case RelationClass::was_associated_with:
            return {"prov:activity", "prov:agent"};
    }
    throw Error("unknown relation class");
}

}  // namespace

std::string qualified_id(const NodeIdentity& identity) {
    std::ostringstream out;
    out << "cf:" << identity.machine << ":" << identity.boot << ":" << identity.object << ":"
        << identity.version;
    return out.str();
}

NodeIdentity parse_qualified_id(const std::string& id) {
    std::uint64_t parts[4];
    std::size_t pos = 0;
    if (id.rfind("cf:", 0) != 0) throw Error("qualified id '" + id + "' lacks the cf: prefix");
    pos = 3;
    for (int i = 0; i < 4; ++i) {
        std::size_t end = i == 3 ? id.size() : id.find(':', pos);
        if (end == std::string::npos || end == pos) {
            throw Error("qualified id '" + id + "' needs machine:boot:object:version");
        }
        const std::string part = id.substr(pos, end - pos);
        if (part.find_first_not_of("0123456789") != std::string::npos) {
            throw Error("qualified id '" + id + "' has a non-numeric field");
        }
        try {
            parts[i] = std::stoull(part);
        } catch (const std::exception&) {
            throw Error("qualified id '" + id + "' has an out-of-range field");
        }
        pos = end + 1;
    }
    return NodeIdentity{parts[0], parts[1], parts[2], parts[3]};
}

std::string to_provjson(const std::vector<Record>& records) {
    json doc;
    doc["prefix"] = {{"cf", "urn:provkit:ns#"}, {"prov", "http://www.w3.org/ns/prov#"}};
    for (const Record& record : records) {
        if (record.kind == Record::Kind::node) {
            const ProvNode& node = record.node;
            json body;
            body["prov:type"] = to_string(prov_class(node.type));
            body["cf:type"] = to_string(node.type);
            body["cf:machine_id"] = node.identity.machine;
            body["cf:boot_id"] = node.identity.boot;
            body["cf:id"] = node.identity.object;
            body["cf:version"] = node.identity.version;
            for (const auto& [key, value] : node.attributes) {
                body["cf:" + key] = attr_value_to_json(value);
            }
            doc[to_string(prov_class(node.type))][qualified_id(node.identity)] =
                std::move(body);
        } else {
            const ProvEdge& edge = record.edge;
            RelationClass cls = relation_class(edge.type);
            RelationFields fields = relation_fields(cls);
            json body;
            body[fields.from] = qualified_id(edge.from);
            body[fields.to] = qualified_id(edge.to);
            body["cf:type"] = to_string(edge.type);
            body["cf:edge_id"] = edge.edge_id;
            for (const auto& [key, value] : edge.attributes) {
                body["cf:" + key] = attr_value_to_json(value);
            }
            doc[to_string(cls)]["cf:e:" + std::to_string(edge.edge_id)] = std::move(body);
        }
    }
    return doc.dump(2) + "\n";
}

std::vector<Record> provjson_records(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw Error("$: document is not an object");

    std::vector<Record> records;
    static const std::vector<ProvClass> node_classes{ProvClass::entity, ProvClass::activity,
                                                     ProvClass::agent};
    for (ProvClass cls : node_classes) {
        const std::string bucket = to_string(cls);
        if (!doc.contains(bucket)) continue;
        if (!doc[bucket].is_object()) throw Error("$." + bucket + ": not an object");
        for (const auto& [id, body] : doc[bucket].items()) {
            const std::string where = "$." + bucket + "." + id;
            ProvNode node;
            node.identity = parse_qualified_id(id);
            if (!body.is_object()) throw Error(where + ": not an object");
            if (!body.contains("cf:type") || !body["cf:type"].is_string()) {
                throw Error(where + ": missing cf:type");
            }
            node.type = node_type_from_string(body["cf:type"].get<std::string>());
            if (prov_class(node.type) != cls) {
                throw Error(where + ": " + to_string(node.type) + " does not belong under " +
                            bucket);
            }
            for (const auto& [key, value] : body.items()) {
                if (key == "cf:type" || key == "prov:type") continue;
                if (key == "cf:machine_id" || key == "cf:boot_id" || key == "cf:id" ||
                    key == "cf:version") {
                    std::uint64_t expected = key == "cf:machine_id" ? node.identity.machine
                                             : key == "cf:boot_id"  ? node.identity.boot
                                             : key == "cf:id"       ? node.identity.object
                                                                    : node.identity.version;
                    if (!value.is_number_unsigned() ||
                        value.get<std::uint64_t>() != expected) {
                        throw Error(where + ": " + key + " disagrees with the qualified id");
                    }
                    continue;
                }
                if (key.rfind("cf:", 0) != 0) {
                    throw Error(where + ": unknown field '" + key + "'");
                }
                node.attributes[key.substr(3)] = attr_value_from_json(value, where);
            }
            records.push_back(Record::make_node(std::move(node)));
        }
    }

    static const std::vector<RelationClass> edge_classes{
        RelationClass::used, RelationClass::was_generated_by, RelationClass::was_informed_by,
        RelationClass::was_derived_from, RelationClass::was_associated_with};
    for (RelationClass cls : edge_classes) {
        const std::string bucket = to_string(cls);
        if (!doc.contains(bucket)) continue;
        if (!doc[bucket].is_object()) throw Error("$." + bucket + ": not an object");
        RelationFields fields = relation_fields(cls);
        for (const auto& [id, body] : doc[bucket].items()) {
            const std::string where = "$." + bucket + "." + id;
            if (!body.is_object()) throw Error(where + ": not an object");
            ProvEdge edge;
            for (const char* field : {fields.from, fields.to}) {
                if (!body.contains(field) || !body[field].is_string()) {
                    throw Error(where + ": missing " + std::string(field));
                }
            }
            edge.from = parse_qualified_id(body[fields.from].get<std::string>());
            edge.to = parse_qualified_id(body[fields.to].get<std::string>());
            if (!body.contains("cf:type") || !body["cf:type"].is_string()) {
                throw Error(where + ": missing cf:type");
            }
            edge.type = edge_type_from_string(body["cf:type"].get<std::string>());
            if (relation_class(edge.type) != cls) {
                throw Error(where + ": " + to_string(edge.type) + " does not belong under " +
                            bucket);
            }
            if (!body.contains("cf:edge_id") || !body["cf:edge_id"].is_number_unsigned()) {
                throw Error(where + ": missing cf:edge_id");
            }
            edge.edge_id = body["cf:edge_id"].get<std::uint64_t>();
            for (const auto& [key, value] : body.items()) {
                if (key == "cf:type" || key == "cf:edge_id" || key == fields.from ||
                    key == fields.to) {
                    continue;
                }
                if (key.rfind("cf:", 0) != 0) {
                    throw Error(where + ": unknown field '" + key + "'");
                }
                edge.attributes[key.substr(3)] = attr_value_from_json(value, where);
            }
            records.push_back(Record::make_edge(std::move(edge)));
        }
    }
    return records;
}

// ---- binary ----------------------------------------------------------------

namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_identity(std::vector<std::uint8_t>& out, const NodeIdentity& id) {
    put_u64(out, id.machine);
    put_u64(out, id.boot);
    put_u64(out, id.object);
    put_u64(out, id.version);
}

void put_attrs(std::vector<std::uint8_t>& out, const AttrMap& attrs) {
    if (attrs.size() > 0xffff) throw Error("attribute map too large to encode");
    put_u16(out, static_cast<std::uint16_t>(attrs.size()));
    for (const auto& [key, value] : attrs) {
        if (key.size() > 0xffff) throw Error("attribute key too long to encode");
        put_u16(out, static_cast<std::uint16_t>(key.size()));
        out.insert(out.end(), key.begin(), key.end());
        if (const auto* s = std::get_if<std::string>(&value)) {
            put_u8(out, kTagString);
            put_u32(out, static_cast<std::uint32_t>(s->size()));
            out.insert(out.end(), s->begin(), s->end());
        } else if (const auto* u = std::get_if<std::uint64_t>(&value)) {
            put_u8(out, kTagU64);
            put_u64(out, *u);
        } else if (const auto* i = std::get_if<std::int64_t>(&value)) {
            put_u8(out, kTagI64);
            put_u64(out, static_cast<std::uint64_t>(*i));
        } else {
            put_u8(out, kTagBool);
            put_u8(out, std::get<bool>(value) ? 1 : 0);
        }
    }
}

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& data, std::size_t offset)
        : data_(data), offset_(offset) {}

    std::size_t offset() const { return offset_; }

    std::uint8_t u8() {
        need(1);
        return data_[offset_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[offset_]) |
                          static_cast<std::uint16_t>(data_[offset_ + 1]) << 8;
        offset_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[offset_ + i]) << (8 * i);
        offset_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[offset_ + i]) << (8 * i);
        offset_ += 8;
        return v;
    }
    std::string str(std::size_t len) {
        need(len);
        std::string s(reinterpret_cast<const char*>(data_.data() + offset_), len);
        offset_ += len;
        return s;
    }
    NodeIdentity identity() {
        NodeIdentity id;
        id.machine = u64();
        id.boot = u64();
        id.object = u64();
        id.version = u64();
        return id;
    }
    AttrMap attrs() {
        AttrMap map;
        std::uint16_t count = u16();
        for (std::uint16_t i = 0; i < count; ++i) {
            std::string key = str(u16());
            std::uint8_t tag = u8();
            switch (tag) {
                case kTagString: {
                    std::uint32_t len = u32();
                    map[key] = str(len);
                    break;
                }
                case kTagU64:
                    map[key] = u64();
                    break;
                case kTagI64:
                    map[key] = static_cast<std::int64_t>(u64());
                    break;
                case kTagBool:
                    map[key] = u8() != 0;
                    break;
                default:
                    throw Error("byte " + std::to_string(offset_ - 1) +
                                ": unknown attribute tag " + std::to_string(tag));
            }
        }
        return map;
    }

private:
    void need(std::size_t n) const {
        if (offset_ + n > data_.size()) {
            throw Error("byte " + std::to_string(offset_) + ": record truncated");
        }
    }

    const std::vector<std::uint8_t>& data_;
    std::size_t offset_;
};

}  // namespace

void append_binary(std::vector<std::uint8_t>& out, const Record& record) {
    put_u16(out, kMagic);
    put_u8(out, record.kind == Record::Kind::node ? kNodeRecord : kEdgeRecord);
    std::size_t length_at = out.size();
    put_u32(out, 0);  // patched below
    std::size_t payload_start = out.size();
    if (record.kind == Record::Kind::node) {
        put_identity(out, record.node.identity);
        put_u8(out, static_cast<std::uint8_t>(record.node.type));
        put_attrs(out, record.node.attributes);
    } else {
        put_u64(out, record.edge.edge_id);
        put_u8(out, static_cast<std::uint8_t>(record.edge.type));
        put_identity(out, record.edge.from);
        put_identity(out, record.edge.to);
        put_attrs(out, record.edge.attributes);
    }
    std::uint32_t length = static_cast<std::uint32_t>(out.size() - payload_start);
    for (int i = 0; i < 4; ++i) {
        out[length_at + i] = static_cast<std::uint8_t>(length >> (8 * i));
    }
}

std::vector<std::uint8_t> to_binary(const std::vector<Record>& records) {
    std::vector<std::uint8_t> out;
    for (const Record& record : records) append_binary(out, record);
    return out;
}

Record read_binary(const std::vector<std::uint8_t>& data, std::size_t& offset) {
    Reader reader(data, offset);
    std::size_t start = reader.offset();
    std::uint16_t magic = reader.u16();
    if (magic != kMagic) {
        throw Error("byte " + std::to_string(start) + ": bad record magic");
    }
    std::uint8_t kind = reader.u8();
    std::uint32_t length = reader.u32();
    std::size_t payload_start = reader.offset();
    if (payload_start + length > data.size()) {
        throw Error("byte " + std::to_string(payload_start) + ": record truncated");
    }

    Record record;
    if (kind == kNodeRecord) {
        record.kind = Record::Kind::node;
        record.node.identity = reader.identity();
        std::uint8_t type = reader.u8();
        if (type >= all_node_types().size()) {
            throw Error("byte " + std::to_string(reader.offset() - 1) +
                        ": unknown node type " + std::to_string(type));
        }
        record.node.type = static_cast<NodeType>(type);
        record.node.attributes = reader.attrs();
    } else if (kind == kEdgeRecord) {
        record.kind = Record::Kind::edge;
        record.edge.edge_id = reader.u64();
        std::uint8_t type = reader.u8();
        if (type >= all_edge_types().size()) {
            throw Error("byte " + std::to_string(reader.offset() - 1) +
                        ": unknown edge type " + std::to_string(type));
        }
        record.edge.type = static_cast<EdgeType>(type);
        record.edge.from = reader.identity();
        record.edge.to = reader.identity();
        record.edge.attributes = reader.attrs();
    } else {
        throw Error("byte " + std::to_string(start + 2) + ": unknown record kind " +
                    std::to_string(kind));
    }
    if (reader.offset() != payload_start + length) {
        throw Error("byte " + std::to_string(start) + ": record length mismatch");
    }
    offset = reader.offset();
    return record;
}

std::vector<Record> from_binary(const std::vector<std::uint8_t>& data) {
    std::vector<Record> records;
    std::size_t offset = 0;
    while (offset < data.size()) {
        records.push_back(read_binary(data, offset));
    }
    return records;
}

// ---- graph reconstruction ---------------------------------------------------

ProvGraph graph_from_records(const std::vector<Record>& records) {
    ProvGraph graph;
    for (const Record& record : records) {
        if (record.kind == Record::Kind::node) {
            graph.add_node(record.node.identity, record.node.type, record.node.attributes);
        } else {
            graph.add_edge(record.edge.edge_id, record.edge.type, record.edge.from,
                           record.edge.to, record.edge.attributes);
        }
    }
    return graph;
}

std::vector<Record> records_from_graph(const ProvGraph& graph) {
    std::vector<Record> records;
    records.reserve(graph.node_count() + graph.edge_count());
    for (const ProvNode& node : graph.nodes()) records.push_back(Record::make_node(node));
    std::vector<ProvEdge> edges = graph.edges();
    std::sort(edges.begin(), edges.end(),
              [](const ProvEdge& a, const ProvEdge& b) { return a.edge_id < b.edge_id; });
    for (const ProvEdge& edge : edges) records.push_back(Record::make_edge(edge));
    return records;
}

std::vector<Record> causal_order(std::vector<Record> records) {
    // Sorting by seq alone is not enough: one event can emit a cause node
    // and a new version of its effect under the same seq, and any order
    // that ignores the edges between them can invert causality. Finding a
    // valid insertion order is exactly what assemble_graph does.
    std::vector<ProvNode> nodes;
    std::vector<ProvEdge> edges;
    for (Record& record : records) {
        if (record.kind == Record::Kind::node) {
            nodes.push_back(std::move(record.node));
        } else {
            edges.push_back(std::move(record.edge));
        }
    }
    return records_from_graph(assemble_graph(nodes, edges));
}

std::vector<Record> load_records_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (data.size() >= 2) {
        std::uint16_t magic = static_cast<std::uint16_t>(data[0]) |
                              static_cast<std::uint16_t>(data[1]) << 8;
        if (magic == kMagic) return from_binary(data);
    }
    return provjson_records(std::string(data.begin(), data.end()));
}

ProvGraph load_graph_file(const std::string& path) {
    std::vector<Record> records = load_records_file(path);
    std::vector<ProvNode> nodes;
    std::vector<ProvEdge> edges;
    for (const Record& record : records) {
        if (record.kind == Record::Kind::node) {
            nodes.push_back(record.node);
        } else {
            edges.push_back(record.edge);
        }
    }
    return assemble_graph(nodes, edges);
}

// ---- relay -------------------------------------------------------------------

RelayStream::RelayStream(std::size_t capacity, bool boot_buffer)
    : capacity_(capacity), boot_buffer_(boot_buffer), ring_(capacity + 1) {
    if (capacity == 0) throw Error("relay capacity must be positive");
}

bool RelayStream::offer(const Record& record) {
    if (!boot_buffer_ && !polled_.load(std::memory_order_acquire)) {
        dropped_.fetch_add(1, std::memory_order_relaxed);
        return false;
    }
    std::size_t tail = tail_.load(std::memory_order_relaxed);
    std::size_t next = (tail + 1) % ring_.size();
    if (next == head_.load(std::memory_order_acquire)) {
        // Full: the newest record is the one sacrificed.
        dropped_.fetch_add(1, std::memory_order_relaxed);
        return false;
    }
    ring_[tail] = record;
    tail_.store(next, std::memory_order_release);
    return true;
}

std::vector<Record> RelayStream::poll() {
    polled_.store(true, std::memory_order_release);
    std::vector<Record> out;
    std::size_t head = head_.load(std::memory_order_relaxed);
    std::size_t tail = tail_.load(std::memory_order_acquire);
    while (head != tail) {
        out.push_back(std::move(ring_[head]));
        head = (head + 1) % ring_.size();
    }
    head_.store(head, std::memory_order_release);
    return out;
}

}  // namespace prov
