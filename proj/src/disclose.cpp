// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include "prov/disclose.hpp"

namespace prov {

bool disclose_node(GraphBuilder& builder, ObjectId task, const ObjectRef& node,
                   std::uint64_t seq) {
    return builder.disclose_node(task, node, seq);
}

bool disclose_edge(GraphBuilder& builder, ObjectId task, ObjectId from, ObjectId to,
                   std::uint64_t seq) {
    return builder.disclose_edge(task, from, to, seq);
}

bool ingest_log(GraphBuilder& builder, ObjectId task, const ObjectRef& entry,
                const std::string& text, std::uint64_t seq) {
    return builder.ingest_log(task, entry, text, seq);
}

}  // namespace prov
