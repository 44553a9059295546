// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "prov/builder.hpp"
#include "prov/model.hpp"
#include "prov/net.hpp"
#include "prov/policy.hpp"
#include "prov/query.hpp"
#include "prov/trace.hpp"
#include "prov/wire.hpp"

namespace {

using nlohmann::json;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kInputError = 2;
constexpr int kViolation = 3;

const char* kFooter = R"(File formats:
  trace       JSON lines; an optional first line {"preamble": [{machine, boot,
              object, type, path, uid, gid, mode}, ...]} followed by one event
              per line: {"seq", "machine", "boot", "kind", "subject"?,
              "object"?: {"id", "attrs"?}, "object2"?, "address"?: {"ip",
              "port"}, "packet"?: {"ip_id", "src_ip", "dst_ip", "src_port",
              "dst_port", "protocol", "tcp_seq"?}, "len"?, "text"?, "argv"?,
              "flags"?, "inject"?}. seq must be strictly increasing.
  policy      INI text, keys at top level or under [provenance]:
              provenance=whole|selective, opaque=, track=, propagate=
              (selectors: /path, path=, net=a.b.c.d/p:port, uid=, gid=,
              secctx=, cgroup=), node_filter=, relation_filter=,
              propagate_node_filter=, propagate_edge_filter= (comma lists),
              taint=<tag>;<selector>, record=<cidr:port>.
  constraints JSON: {"constraints": [{"id", "source": {"type"?, "attr"?,
              "equals"?, "prefix"?}, "sink", "sanitizer"?, "edge_types"?,
              "exclude_edge_types"?, "verdict"?: "flag"|"block"}]}.
  output      provjson: W3C PROV-JSON document, one bucket per PROV class,
              ids "cf:machine:boot:object:version", edges "cf:e:<id>".
              binary: length-prefixed little-endian records, magic 0xCF01
              per record (see FORMAT.md).

Exit codes: 0 success, 1 usage, 2 invalid input, 3 block verdict reached.)";

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw prov::Error("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Empty path targets stdout; binary payloads pass through unmangled.
void write_output(const std::string& path, const std::string& data) {
    if (path.empty()) {
        std::fwrite(data.data(), 1, data.size(), stdout);
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw prov::Error("cannot write " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw prov::Error("cannot write " + path);
}

std::string serialize_records(const std::vector<prov::Record>& records,
                              const std::string& format) {
    if (format == "binary") {
        std::vector<std::uint8_t> bytes = prov::to_binary(records);
        return std::string(bytes.begin(), bytes.end());
    }
    return prov::to_provjson(records);
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        std::size_t begin = item.find_first_not_of(" \t");
        std::size_t end = item.find_last_not_of(" \t");
        if (begin == std::string::npos) continue;
        parts.push_back(item.substr(begin, end - begin + 1));
    }
    return parts;
}

prov::NodeIdentity parse_node_arg(const std::string& text) {
    if (text.rfind("cf:", 0) == 0) return prov::parse_qualified_id(text);
    return prov::parse_qualified_id("cf:" + text);
}

prov::ObjectKey parse_object_arg(const std::string& text) {
    std::stringstream stream(text);
    std::string part;
    std::vector<std::uint64_t> fields;
    while (std::getline(stream, part, ':')) {
        if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos) {
            throw prov::Error("object must be machine:boot:object, got '" + text + "'");
        }
        fields.push_back(std::stoull(part));
    }
    if (fields.size() != 3) {
        throw prov::Error("object must be machine:boot:object, got '" + text + "'");
    }
    return prov::ObjectKey{fields[0], fields[1], fields[2]};
}

// Policy flags mirror policy file keys; they append to the file text so
// one grammar and one set of error messages covers both.
struct PolicyFlags {
    std::string path;
    std::string mode;
    std::vector<std::string> opaque;
    std::vector<std::string> track;
    std::vector<std::string> propagate;
    std::vector<std::string> taint;
    std::vector<std::string> record;
    std::string node_filter;
    std::string relation_filter;
    std::string propagate_node_filter;
    std::string propagate_edge_filter;
};

void add_policy_flags(CLI::App* cmd, PolicyFlags& flags) {
    cmd->add_option("--policy", flags.path, "Capture policy file");
    cmd->add_option("--mode", flags.mode, "Capture mode")
        ->check(CLI::IsMember({"whole", "selective"}));
    cmd->add_option("--opaque", flags.opaque, "Selector excluded from capture");
    cmd->add_option("--track", flags.track, "Selector captured in selective mode");
    cmd->add_option("--propagate", flags.propagate, "Selector whose tracking spreads");
    cmd->add_option("--taint", flags.taint, "Taint rule <tag>;<selector>");
    cmd->add_option("--record", flags.record, "Force-captured packets <cidr:port>");
    cmd->add_option("--node-filter", flags.node_filter, "Node types dropped from output");
    cmd->add_option("--relation-filter", flags.relation_filter,
                    "Edge types dropped from output");
    cmd->add_option("--propagate-node-filter", flags.propagate_node_filter,
                    "Node types taints never enter");
    cmd->add_option("--propagate-edge-filter", flags.propagate_edge_filter,
                    "Edge types taints never ride");
}

prov::CapturePolicy assemble_policy(const PolicyFlags& flags) {
    std::string text;
    if (!flags.path.empty()) text = read_text_file(flags.path);
    std::ostringstream extra;
    if (!flags.mode.empty()) extra << "provenance=" << flags.mode << "\n";
    for (const std::string& s : flags.opaque) extra << "opaque=" << s << "\n";
    for (const std::string& s : flags.track) extra << "track=" << s << "\n";
    for (const std::string& s : flags.propagate) extra << "propagate=" << s << "\n";
    for (const std::string& s : flags.taint) extra << "taint=" << s << "\n";
    for (const std::string& s : flags.record) extra << "record=" << s << "\n";
    if (!flags.node_filter.empty()) extra << "node_filter=" << flags.node_filter << "\n";
    if (!flags.relation_filter.empty()) {
        extra << "relation_filter=" << flags.relation_filter << "\n";
    }
    if (!flags.propagate_node_filter.empty()) {
        extra << "propagate_node_filter=" << flags.propagate_node_filter << "\n";
    }
    if (!flags.propagate_edge_filter.empty()) {
        extra << "propagate_edge_filter=" << flags.propagate_edge_filter << "\n";
    }
    if (!extra.str().empty()) text += "\n" + extra.str();
    return prov::parse_policy(text);
}

json stats_json(const prov::BuildStats& stats) {
    json nodes = json::object();
    for (const auto& [type, count] : stats.nodes_by_type) nodes[to_string(type)] = count;
    json edges = json::object();
    for (const auto& [type, count] : stats.edges_by_type) edges[to_string(type)] = count;
    return json{{"events", stats.events},
                {"records", stats.records},
                {"flows_recorded", stats.flows_recorded},
                {"flows_filtered", stats.flows_filtered},
                {"flows_skipped", stats.flows_skipped},
                {"disclosures_rejected", stats.disclosures_rejected},
                {"nodes", nodes},
                {"edges", edges}};
}

json identity_list(const std::vector<prov::NodeIdentity>& ids) {
    json out = json::array();
    for (const prov::NodeIdentity& id : ids) out.push_back(prov::qualified_id(id));
    return out;
}

int run_generate(const std::string& scenario, std::uint64_t seed,
                 const std::vector<std::string>& params, const std::string& out) {
    prov::SimResult sim = prov::simulate(scenario, seed, prov::ScenarioParams::parse(params));
    write_output(out, prov::trace_to_string(sim.trace));
    return kOk;
}

int run_build(const std::string& trace_path, const PolicyFlags& flags,
              std::uint64_t machine, const std::string& format, const std::string& out,
              bool want_stats) {
    prov::Trace trace = prov::read_trace_file(trace_path);
    prov::CapturePolicy policy = assemble_policy(flags);
    prov::BuildResult result = prov::build(trace, policy, machine);
    write_output(out, serialize_records(result.records, format));
    if (want_stats) std::cerr << stats_json(result.stats).dump(2) << "\n";
    return kOk;
}

int run_stitch(const std::vector<std::string>& inputs, const std::string& format,
               const std::string& out) {
    std::vector<prov::ProvGraph> graphs;
    graphs.reserve(inputs.size());
    for (const std::string& path : inputs) graphs.push_back(prov::load_graph_file(path));
    std::vector<const prov::ProvGraph*> views;
    views.reserve(graphs.size());
    for (const prov::ProvGraph& graph : graphs) views.push_back(&graph);

    prov::StitchResult result = prov::stitch(views);
    if (!out.empty()) {
        write_output(out, serialize_records(prov::records_from_graph(result.graph), format));
    }
    json report{{"matched", result.report.matched},
                {"unmatched_sent", result.report.unmatched_sent},
                {"unmatched_received", result.report.unmatched_received}};
    std::cout << report.dump(2) << "\n";
    return kOk;
}

int run_reach_query(const prov::ProvGraph& graph, const std::string& kind,
                    const std::string& node_arg, const std::string& edge_types_arg) {
    prov::NodeIdentity start = parse_node_arg(node_arg);
    std::set<prov::EdgeType> edge_types =
        edge_types_arg.empty() ? prov::edge_types_except({})
                               : prov::edge_type_set(split_csv(edge_types_arg));
    std::set<prov::NodeIdentity> reached =
        kind == "ancestry" ? prov::ancestry(graph, start, edge_types)
                           : prov::descendants(graph, start, edge_types);
    json nodes = json::array();
    for (const prov::NodeIdentity& id : reached) nodes.push_back(prov::qualified_id(id));
    json out{{"kind", kind},
             {"start", prov::qualified_id(start)},
             {"count", reached.size()},
             {"nodes", nodes}};
    std::cout << out.dump(2) << "\n";
    return kOk;
}

int run_dlp_query(const prov::ProvGraph& graph, const std::string& object_arg,
                  const std::vector<std::uint64_t>& taints, const std::string& mode,
                  const std::string& policy_path) {
    prov::ObjectKey object = parse_object_arg(object_arg);
    std::set<std::uint64_t> forbidden(taints.begin(), taints.end());

    prov::DlpVerdict verdict;
    if (mode == "taint") {
        verdict = prov::dlp_check_taint(graph, object, forbidden);
    } else {
        prov::CapturePolicy policy;
        if (!policy_path.empty()) policy = prov::parse_policy_file(policy_path);
        verdict = prov::dlp_check_query(graph, object, forbidden, policy);
    }

    json out{{"kind", "dlp"},
             {"mode", mode},
             {"object", object_arg},
             {"verdict", verdict.block ? "block" : "allow"}};
    if (verdict.taint) out["taint"] = *verdict.taint;
    if (!verdict.path.empty()) out["path"] = identity_list(verdict.path);
    std::cout << out.dump(2) << "\n";
    return verdict.block ? kViolation : kOk;
}

int run_audit(const std::string& stream_path, const std::string& constraints_path) {
    std::vector<prov::Record> records =
        prov::causal_order(prov::load_records_file(stream_path));
    std::vector<prov::PathConstraint> constraints =
        prov::parse_constraints_file(constraints_path);
    std::vector<prov::Violation> violations = prov::audit(records, constraints);

    bool blocked = false;
    json list = json::array();
    for (const prov::Violation& violation : violations) {
        bool block = violation.verdict == prov::PathConstraint::Verdict::block;
        blocked = blocked || block;
        list.push_back(json{{"constraint", violation.constraint_id},
                            {"sink", prov::qualified_id(violation.sink)},
                            {"verdict", block ? "block" : "flag"},
                            {"path", identity_list(violation.path)}});
    }
    json out{{"violations", list}, {"count", violations.size()}};
    std::cout << out.dump(2) << "\n";
    return blocked ? kViolation : kOk;
}

int run_stats(const std::string& trace_path, const std::string& policy_a,
              const std::string& policy_b) {
    prov::Trace trace = prov::read_trace_file(trace_path);

    auto measure = [&trace](const std::string& path) {
        prov::CapturePolicy policy;
        if (!path.empty()) policy = prov::parse_policy_file(path);
        prov::BuildResult result = prov::build(trace, policy);
        json entry = stats_json(result.stats);
        entry["provjson_bytes"] = prov::to_provjson(result.records).size();
        entry["binary_bytes"] = prov::to_binary(result.records).size();
        return entry;
    };

    json a = measure(policy_a);
    json b = measure(policy_b);
    auto reduction = [](const json& from, const json& to, const char* key) {
        double before = from[key].get<double>();
        double after = to[key].get<double>();
        return before > 0 ? (before - after) / before * 100.0 : 0.0;
    };
    json out{{"policy_a", a},
             {"policy_b", b},
             {"reduction_percent",
              json{{"provjson_bytes", reduction(a, b, "provjson_bytes")},
                   {"binary_bytes", reduction(a, b, "binary_bytes")},
                   {"records", reduction(a, b, "records")}}}};
    std::cout << out.dump(2) << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"provkit: versioned whole-system provenance from kernel event traces"};
    app.footer(kFooter);
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "Run a bundled scenario simulator");
    std::string gen_scenario;
    std::uint64_t gen_seed = 1;
    std::vector<std::string> gen_params;
    std::string gen_out;
    {
        std::ostringstream names;
        for (const std::string& name : prov::scenario_names()) names << " " << name;
        gen->add_option("--scenario", gen_scenario, "One of:" + names.str())->required();
        gen->add_option("--seed", gen_seed, "Simulator seed");
        gen->add_option("--param", gen_params,
                        "key=value (iterations, drop, nat, sanitizer, scale)");
        gen->add_option("--out", gen_out, "Trace file (default stdout)");
    }

    auto* build = app.add_subcommand("build", "Fold a trace into a provenance graph");
    std::string build_trace;
    PolicyFlags build_policy;
    std::uint64_t build_machine = 0;
    std::string build_format = "provjson";
    std::string build_out;
    bool build_stats = false;
    {
        build->add_option("--trace", build_trace, "Input trace file")->required();
        add_policy_flags(build, build_policy);
        build->add_option("--machine", build_machine,
                          "Capture only this machine id (0: all)");
        build->add_option("--format", build_format, "Output encoding")
            ->check(CLI::IsMember({"provjson", "binary"}));
        build->add_option("--out", build_out, "Output file (default stdout)");
        build->add_flag("--stats", build_stats, "Print build statistics to stderr");
    }

    auto* stitch = app.add_subcommand("stitch", "Merge per-machine graphs on packet identity");
    std::vector<std::string> stitch_inputs;
    std::string stitch_format = "provjson";
    std::string stitch_out;
    {
        stitch->add_option("inputs", stitch_inputs, "Graph files to merge")->required();
        stitch->add_option("--format", stitch_format, "Output encoding")
            ->check(CLI::IsMember({"provjson", "binary"}));
        stitch->add_option("--out", stitch_out, "Merged graph file (report goes to stdout)");
    }

    auto* query = app.add_subcommand("query", "Ask a built graph about lineage");
    std::string query_graph;
    std::string query_kind;
    std::string query_node;
    std::string query_edge_types;
    std::string query_object;
    std::vector<std::uint64_t> query_taints;
    std::string query_mode = "taint";
    std::string query_policy;
    {
        query->add_option("--graph", query_graph, "Graph file (provjson or binary)")
            ->required();
        query->add_option("--kind", query_kind, "ancestry, descendants, or dlp")
            ->required()
            ->check(CLI::IsMember({"ancestry", "descendants", "dlp"}));
        query->add_option("--node", query_node,
                          "Start node machine:boot:object:version (ancestry/descendants)");
        query->add_option("--edge-types", query_edge_types,
                          "Comma list of edge types to walk (default: all)");
        query->add_option("--object", query_object, "Checked object machine:boot:object (dlp)");
        query->add_option("--taint", query_taints, "Forbidden taint tag (dlp, repeatable)");
        query->add_option("--mode", query_mode, "dlp strategy")
            ->check(CLI::IsMember({"taint", "query"}));
        query->add_option("--policy", query_policy,
                          "Policy whose propagate filters bound the dlp query walk");
    }

    auto* audit = app.add_subcommand("audit", "Check a record stream against path constraints");
    std::string audit_stream;
    std::string audit_constraints;
    {
        audit->add_option("--stream", audit_stream, "Record stream file")->required();
        audit->add_option("--constraints", audit_constraints, "Constraints JSON file")
            ->required();
    }

    auto* stats = app.add_subcommand("stats", "Compare output volume of two policies");
    std::string stats_trace;
    std::string stats_policy_a;
    std::string stats_policy_b;
    {
        stats->add_option("--trace", stats_trace, "Input trace file")->required();
        stats->add_option("--policy-a", stats_policy_a, "Baseline policy (default: whole)");
        stats->add_option("--policy-b", stats_policy_b, "Compared policy (default: whole)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gen) return run_generate(gen_scenario, gen_seed, gen_params, gen_out);
        if (*build) {
            return run_build(build_trace, build_policy, build_machine, build_format,
                             build_out, build_stats);
        }
        if (*stitch) return run_stitch(stitch_inputs, stitch_format, stitch_out);
        if (*query) {
            prov::ProvGraph graph = prov::load_graph_file(query_graph);
            if (query_kind == "dlp") {
                if (query_object.empty() || query_taints.empty()) {
                    std::cerr << "query --kind dlp needs --object and --taint\n";
                    return kUsage;
                }
                return run_dlp_query(graph, query_object, query_taints, query_mode,
                                     query_policy);
            }
            if (query_node.empty()) {
                std::cerr << "query --kind " << query_kind << " needs --node\n";
                return kUsage;
            }
            return run_reach_query(graph, query_kind, query_node, query_edge_types);
        }
        if (*audit) return run_audit(audit_stream, audit_constraints);
        if (*stats) return run_stats(stats_trace, stats_policy_a, stats_policy_b);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
    return kOk;
}
