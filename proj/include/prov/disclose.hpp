// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#pragma once

#include "prov/builder.hpp"

namespace prov {

// Application-disclosed provenance. Every call verifies the issuing
// task; node disclosure additionally needs the audit-write capability.
// Rejections return false and leave no trace in the output.

bool disclose_node(GraphBuilder& builder, ObjectId task, const ObjectRef& node,
                   std::uint64_t seq);

// Adds an application edge between already-disclosed nodes or system
// objects. System endpoints bind to their version current at seq.
bool disclose_edge(GraphBuilder& builder, ObjectId task, ObjectId from, ObjectId to,
                   std::uint64_t seq);

// Turns one log line into a log_entry entity hanging off the task
// version current at write time; the task itself is not versioned.
bool ingest_log(GraphBuilder& builder, ObjectId task, const ObjectRef& entry,
                const std::string& text, std::uint64_t seq);

}  // namespace prov
