// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 the provkit authors
//
// Deterministic workload generator. Each scenario drives a small cast of
// tasks through kernel events and keeps byte-level ground truth on the
// side: tags injected into object contents move only when real data
// moves, mirrored through attached shared segments the same conservative
// way the capture engine assumes.

#include <random>
#include <sstream>

#include "prov/trace.hpp"

namespace prov {

namespace {

constexpr const char* kNamespaces = "net:4026531992,mnt:4026531840";

class Sim {
public:
    explicit Sim(std::uint64_t seed) : rng_(seed) {}

    Trace trace;

    // -- randomness ------------------------------------------------------
    std::uint64_t rnd(std::uint64_t lo, std::uint64_t hi) {
        return lo + rng_() % (hi - lo + 1);
    }
    bool chance(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return rng_() % 1000000 < static_cast<std::uint64_t>(p * 1000000.0);
    }

    // -- preamble ---------------------------------------------------------
    ObjectId pre_dir(MachineId m, const std::string& path) {
        ObjectId id = alloc();
        trace.preamble.push_back(PreambleEntry{m, 1, id, NodeType::directory, path, 0, 0, 0755});
        return id;
    }
    ObjectId pre_file(MachineId m, const std::string& path, std::uint64_t uid,
                      std::uint64_t gid, std::uint64_t mode) {
        ObjectId id = alloc();
        trace.preamble.push_back(PreambleEntry{m, 1, id, NodeType::file, path, uid, gid, mode});
        return id;
    }

    // -- events -----------------------------------------------------------
    void boot(MachineId m) { push(base(m, EventKind::machine_boot)); }

    ObjectId fork_task(MachineId m, ObjectId parent, std::uint64_t pid, std::uint64_t uid,
                       std::uint64_t gid, const std::string& secctx, const std::string& cgroup,
                       bool cap_audit_write = false) {
        ObjectId id = alloc();
        Event e = base(m, EventKind::task_fork);
        e.subject = parent;
        e.object.id = id;
        e.object.attrs["pid"] = pid;
        e.object.attrs["uid"] = uid;
        e.object.attrs["gid"] = gid;
        e.object.attrs["secctx"] = secctx;
        e.object.attrs["cgroup"] = cgroup;
        e.object.attrs["namespaces"] = std::string(kNamespaces);
        if (cap_audit_write) e.object.attrs["cap_audit_write"] = true;
        push(std::move(e));
        if (parent != 0) tags_[key(m, id)] = tags_[key(m, parent)];
        return id;
    }

    void exec(MachineId m, ObjectId task, ObjectId binary, const std::string& argv) {
        Event e = base(m, EventKind::task_exec);
        e.subject = task;
        e.object.id = binary;
        e.argv = argv;
        push(std::move(e));
        move_in(m, key(m, binary), task);
    }

    void exit(MachineId m, ObjectId task) {
        Event e = base(m, EventKind::task_exit);
        e.subject = task;
        push(std::move(e));
        attach_[key(m, task)].clear();
    }

    void set_uid(MachineId m, ObjectId task, std::uint64_t uid) {
        Event e = base(m, EventKind::setuid);
        e.subject = task;
        e.object.attrs["uid"] = uid;
        push(std::move(e));
    }

    ObjectId file_create(MachineId m, ObjectId task, const std::string& path,
                         std::uint64_t mode, std::vector<std::uint64_t> inject = {}) {
        ObjectId id = alloc();
        Event e = base(m, EventKind::file_create);
        e.subject = task;
        e.object.id = id;
        e.object.attrs["path"] = path;
        e.object.attrs["mode"] = mode;
        e.inject = inject;
        push(std::move(e));
        inject_tags(key(m, id), inject);
        return id;
    }

    ObjectId pipe_create(MachineId m, ObjectId task) {
        ObjectId id = alloc();
        Event e = base(m, EventKind::file_create);
        e.subject = task;
        e.object.id = id;
        e.object.attrs["obj_type"] = std::string("pipe");
        push(std::move(e));
        return id;
    }

    void open(MachineId m, ObjectId task, ObjectId file, const std::string& flags) {
        Event e = base(m, EventKind::open);
        e.subject = task;
        e.object.id = file;
        e.flags = flags;
        push(std::move(e));
    }

    void read(MachineId m, ObjectId task, ObjectId obj,
              std::vector<std::uint64_t> inject = {}) {
        Event e = base(m, EventKind::read);
        e.subject = task;
        e.object.id = obj;
        e.inject = inject;
        push(std::move(e));
        inject_tags(key(m, obj), inject);
        move_in(m, key(m, obj), task);
    }

    void write(MachineId m, ObjectId task, ObjectId obj) {
        Event e = base(m, EventKind::write);
        e.subject = task;
        e.object.id = obj;
        push(std::move(e));
        move_out(m, task, key(m, obj));
    }

    void setattr(MachineId m, ObjectId task, ObjectId file, const AttrMap& payload) {
        Event e = base(m, EventKind::setattr);
        e.subject = task;
        e.object.id = file;
        e.object.attrs = payload;
        push(std::move(e));
    }

    void getattr(MachineId m, ObjectId task, ObjectId file) {
        Event e = base(m, EventKind::getattr);
        e.subject = task;
        e.object.id = file;
        push(std::move(e));
    }

    void unlink(MachineId m, ObjectId task, ObjectId file) {
        Event e = base(m, EventKind::unlink);
        e.subject = task;
        e.object.id = file;
        push(std::move(e));
    }

    void mmap_attach(MachineId m, ObjectId task, ObjectId file) {
        Event e = base(m, EventKind::mmap_attach);
        e.subject = task;
        e.object.id = file;
        push(std::move(e));
        move_in(m, key(m, file), task);
        attach_[key(m, task)].insert(key(m, file));
    }

    ObjectId shm_attach(MachineId m, ObjectId task, ObjectId segment) {
        if (segment == 0) segment = alloc();
        Event e = base(m, EventKind::shm_attach);
        e.subject = task;
        e.object.id = segment;
        push(std::move(e));
        move_in(m, key(m, segment), task);
        attach_[key(m, task)].insert(key(m, segment));
        return segment;
    }

    void detach(MachineId m, ObjectId task, ObjectId segment) {
        Event e = base(m, EventKind::detach);
        e.subject = task;
        e.object.id = segment;
        push(std::move(e));
        attach_[key(m, task)].erase(key(m, segment));
    }

    ObjectId socket_create(MachineId m, ObjectId task) {
        ObjectId id = alloc();
        Event e = base(m, EventKind::socket_create);
        e.subject = task;
        e.object.id = id;
        push(std::move(e));
        return id;
    }

    void connect(MachineId m, ObjectId task, ObjectId socket, const std::string& ip,
                 std::uint16_t port) {
        Event e = base(m, EventKind::connect);
        e.subject = task;
        e.object.id = socket;
        e.address = Address{parse_ipv4(ip), port};
        push(std::move(e));
    }

    void bind(MachineId m, ObjectId task, ObjectId socket, const std::string& ip,
              std::uint16_t port) {
        Event e = base(m, EventKind::bind);
        e.subject = task;
        e.object.id = socket;
        e.address = Address{parse_ipv4(ip), port};
        push(std::move(e));
    }

    ObjectId accept(MachineId m, ObjectId task, ObjectId listener, const std::string& peer_ip,
                    std::uint16_t peer_port) {
        ObjectId id = alloc();
        Event e = base(m, EventKind::accept);
        e.subject = task;
        e.object.id = listener;
        e.object2 = ObjectRef{id, {}};
        e.address = Address{parse_ipv4(peer_ip), peer_port};
        push(std::move(e));
        return id;
    }

    void send(MachineId m, ObjectId task, ObjectId socket, const PacketIdentity& identity,
              std::uint64_t len) {
        Event e = base(m, EventKind::send_packet);
        e.subject = task;
        e.object.id = socket;
        e.packet = identity;
        e.payload_len = len;
        push(std::move(e));
        move_out(m, task, key(m, socket));
        tags_[wire(identity)].insert(tags_[key(m, socket)].begin(),
                                     tags_[key(m, socket)].end());
    }

    // wire_identity: what the sender put on the wire; differs from the
    // delivered identity when address translation rewrites the header.
    void recv(MachineId m, ObjectId task, ObjectId socket, const PacketIdentity& identity,
              std::uint64_t len, const PacketIdentity& wire_identity) {
        Event e = base(m, EventKind::recv_packet);
        e.subject = task;
        e.object.id = socket;
        e.packet = identity;
        e.payload_len = len;
        push(std::move(e));
        auto& delivered = tags_[wire(identity)];
        const auto& sent = tags_[wire(wire_identity)];
        delivered.insert(sent.begin(), sent.end());
        auto& sock = tags_[key(m, socket)];
        sock.insert(delivered.begin(), delivered.end());
        move_in(m, key(m, socket), task);
    }

    void recv(MachineId m, ObjectId task, ObjectId socket, const PacketIdentity& identity,
              std::uint64_t len) {
        recv(m, task, socket, identity, len, identity);
    }

    ObjectId log(MachineId m, ObjectId task, const std::string& text) {
        ObjectId id = alloc();
        Event e = base(m, EventKind::log_write);
        e.subject = task;
        e.object.id = id;
        e.text = text;
        push(std::move(e));
        move_out(m, task, key(m, id));
        return id;
    }

    ObjectId disclose_node(MachineId m, ObjectId task, const AttrMap& attrs) {
        ObjectId id = alloc();
        Event e = base(m, EventKind::disclose_node);
        e.subject = task;
        e.object.id = id;
        e.object.attrs = attrs;
        push(std::move(e));
        return id;
    }

    void disclose_edge(MachineId m, ObjectId task, ObjectId from, ObjectId to) {
        Event e = base(m, EventKind::disclose_edge);
        e.subject = task;
        e.object.id = from;
        e.object2 = ObjectRef{to, {}};
        push(std::move(e));
    }

    void drop(const PacketIdentity& identity) { truth_.dropped.push_back(identity); }

    GroundTruth finish() {
        for (const auto& [object, tags] : tags_) {
            for (std::uint64_t tag : tags) truth_.reached[tag].insert(object);
        }
        return std::move(truth_);
    }

private:
    ObjectId alloc() { return ++next_id_; }

    static ObjectKey key(MachineId m, ObjectId id) { return ObjectKey{m, 1, id}; }
    // Oracle view of a packet: one physical object, whichever host holds it.
    static ObjectKey wire(const PacketIdentity& identity) {
        return ObjectKey{0, 0, packet_object_id(identity)};
    }

    Event base(MachineId m, EventKind kind) {
        Event e;
        e.seq = ++seq_;
        e.machine = m;
        e.boot = 1;
        e.kind = kind;
        return e;
    }

    void push(Event e) { trace.events.push_back(std::move(e)); }

    void inject_tags(const ObjectKey& object, const std::vector<std::uint64_t>& tags) {
        for (std::uint64_t tag : tags) {
            tags_[object].insert(tag);
            truth_.injections.push_back(GroundTruth::Injection{tag, object, seq_});
        }
    }

    // Data arriving at a task also lands in every attached segment except
    // the one it came from; data leaving first absorbs every segment.
    void move_in(MachineId m, const ObjectKey& source, ObjectId task) {
        ObjectKey tkey = key(m, task);
        const auto moved = tags_[source];
        tags_[tkey].insert(moved.begin(), moved.end());
        for (const ObjectKey& segment : attach_[tkey]) {
            if (segment == source) continue;
            tags_[segment].insert(moved.begin(), moved.end());
        }
    }

    void move_out(MachineId m, ObjectId task, const ObjectKey& dest) {
        ObjectKey tkey = key(m, task);
        for (const ObjectKey& segment : attach_[tkey]) {
            if (segment == dest) continue;
            tags_[tkey].insert(tags_[segment].begin(), tags_[segment].end());
        }
        tags_[dest].insert(tags_[tkey].begin(), tags_[tkey].end());
    }

    std::mt19937_64 rng_;
    std::uint64_t seq_ = 0;
    ObjectId next_id_ = 0;
    GroundTruth truth_;
    std::map<ObjectKey, std::set<std::uint64_t>> tags_;
    std::map<ObjectKey, std::set<ObjectKey>> attach_;
};

PacketIdentity tcp_packet(std::uint64_t ip_id, const std::string& src_ip,
                          std::uint16_t src_port, const std::string& dst_ip,
                          std::uint16_t dst_port, std::uint32_t tcp_seq) {
    return packet_identifier(static_cast<std::uint16_t>(ip_id % 65536), parse_ipv4(src_ip),
                             parse_ipv4(dst_ip), src_port, dst_port, Protocol::tcp, tcp_seq);
}

struct ProvdFiles {
    ObjectId binary = 0;
    ObjectId relay = 0;
};

// Declares everything the capture daemon touches on one machine. Keeping
// the daemon in every workload makes "the engine never records itself"
// testable against realistic traffic.
ProvdFiles provd_preamble(Sim& s, MachineId m) {
    s.pre_dir(m, "/");
    s.pre_dir(m, "/usr");
    s.pre_dir(m, "/usr/sbin");
    s.pre_dir(m, "/run");
    s.pre_dir(m, "/run/prov");
    s.pre_dir(m, "/var");
    s.pre_dir(m, "/var/log");
    ProvdFiles files;
    files.binary = s.pre_file(m, "/usr/sbin/provd", 0, 0, 0755);
    files.relay = s.pre_file(m, "/run/prov/relay", 0, 0, 0600);
    return files;
}

ObjectId run_provd(Sim& s, MachineId m, const ProvdFiles& files, std::uint64_t pid) {
    ObjectId provd = s.fork_task(m, 0, pid, 0, 0, "system_u:system_r:provd_t",
                                 "/sys.slice/provd", true);
    s.exec(m, provd, files.binary, "provd --relay /run/prov/relay");
    s.open(m, provd, files.relay, "r");
    s.read(m, provd, files.relay);
    ObjectId logf = s.file_create(m, provd, "/var/log/provd.log", 0644);
    s.write(m, provd, logf);
    return provd;
}

// Single task copying a file through a socket and writing the reply
// back: the minimal round trip that exercises state versioning.
SimResult scenario_fig3(Sim& s, const ScenarioParams&) {
    const MachineId m = 1;
    ObjectId data = s.pre_file(m, "/home/user/data", 1000, 1000, 0644);
    s.boot(m);
    ObjectId p = s.fork_task(m, 0, 100, 1000, 1000, "user_u:user_r:user_t", "/user.slice");
    ObjectId sock = s.socket_create(m, p);
    s.read(m, p, data);
    s.write(m, p, sock);
    s.read(m, p, sock);
    s.write(m, p, data);
    SimResult result;
    result.trace = std::move(s.trace);
    result.truth = s.finish();
    return result;
}

SimResult scenario_wget(Sim& s, const ScenarioParams& params) {
    const MachineId m = 1;
    ProvdFiles provd_files = provd_preamble(s, m);
    s.pre_dir(m, "/usr/bin");
    s.pre_dir(m, "/etc");
    s.pre_dir(m, "/tmp");
    ObjectId wget_bin = s.pre_file(m, "/usr/bin/wget", 0, 0, 0755);
    ObjectId resolv = s.pre_file(m, "/etc/resolv.conf", 0, 0, 0644);
    ObjectId hosts = s.pre_file(m, "/etc/hosts", 0, 0, 0644);

    s.boot(m);
    ObjectId init = s.fork_task(m, 0, 1, 0, 0, "system_u:system_r:init_t", "/");
    run_provd(s, m, provd_files, 50);

    std::uint64_t rounds = params.iterations * params.scale;
    for (std::uint64_t i = 1; i <= rounds; ++i) {
        ObjectId w = s.fork_task(m, init, 100 + i, 1000, 1000, "user_u:user_r:user_t",
                                 "/user.slice");
        s.exec(m, w, wget_bin, "wget http://example.com/");
        s.open(m, w, resolv, "r");
        s.read(m, w, resolv);
        s.open(m, w, hosts, "r");
        s.read(m, w, hosts);
        ObjectId sock = s.socket_create(m, w);
        s.connect(m, w, sock, "142.250.80.36", 80);
        auto sport = static_cast<std::uint16_t>(s.rnd(32768, 60999));
        for (int k = 0; k < 2; ++k) {
            auto pkt = tcp_packet(s.rnd(1, 65535), "10.0.2.15", sport, "142.250.80.36", 80,
                                  static_cast<std::uint32_t>(s.rnd(1, 0xffffffff)));
            s.send(m, w, sock, pkt, 100 + s.rnd(0, 400));
        }
        for (int k = 0; k < 2; ++k) {
            auto pkt = tcp_packet(s.rnd(1, 65535), "142.250.80.36", 80, "10.0.2.15", sport,
                                  static_cast<std::uint32_t>(s.rnd(1, 0xffffffff)));
            s.recv(m, w, sock, pkt, 1000 + s.rnd(0, 4000));
        }
        ObjectId out = s.file_create(m, w, "/tmp/index." + std::to_string(i) + ".html", 0644);
        s.write(m, w, out);
        s.write(m, w, out);
        s.getattr(m, w, out);
        s.exit(m, w);
    }

    SimResult result;
    result.trace = std::move(s.trace);
    result.truth = s.finish();
    return result;
}

// Two tasks that never exchange a byte directly; everything crosses
// through one shared memory segment.
SimResult scenario_shm(Sim& s, const ScenarioParams& params) {
    const MachineId m = 1;
    ProvdFiles provd_files = provd_preamble(s, m);
    s.pre_dir(m, "/data");
    s.boot(m);
    run_provd(s, m, provd_files, 50);

    ObjectId a = s.fork_task(m, 0, 200, 1000, 1000, "user_u:user_r:user_t", "/user.slice");
    ObjectId b = s.fork_task(m, 0, 201, 1001, 1001, "user_u:user_r:user_t", "/user.slice");
    ObjectId segment = s.shm_attach(m, a, 0);
    s.shm_attach(m, b, segment);

    ObjectId secret = s.file_create(m, a, "/data/secret", 0600, {7});
    ObjectId out = s.file_create(m, b, "/data/out", 0644);

    std::uint64_t rounds = params.iterations * params.scale;
    for (std::uint64_t i = 0; i < rounds; ++i) {
        s.read(m, a, secret);
        s.write(m, b, out);
    }

    s.detach(m, a, segment);
    s.detach(m, b, segment);
    s.exit(m, a);
    s.exit(m, b);

    SimResult result;
    result.trace = std::move(s.trace);
    result.truth = s.finish();
    return result;
}

SimResult scenario_two_host(Sim& s, const ScenarioParams& params) {
    const MachineId client_m = 1;
    const MachineId server_m = 2;
    ProvdFiles provd1 = provd_preamble(s, client_m);
    s.pre_dir(client_m, "/data");
    ObjectId payload = s.pre_file(client_m, "/data/payload", 1000, 1000, 0600);
    ProvdFiles provd2 = provd_preamble(s, server_m);
    s.pre_dir(server_m, "/srv");

    s.boot(client_m);
    s.boot(server_m);
    run_provd(s, client_m, provd1, 50);
    run_provd(s, server_m, provd2, 60);

    ObjectId client = s.fork_task(client_m, 0, 300, 1000, 1000, "user_u:user_r:user_t",
                                  "/user.slice");
    ObjectId server = s.fork_task(server_m, 0, 400, 33, 33, "system_u:system_r:srv_t",
                                  "/system.slice/srv");
    ObjectId received = s.file_create(server_m, server, "/srv/received", 0600);

    ObjectId listener = s.socket_create(server_m, server);
    s.bind(server_m, server, listener, "0.0.0.0", 9000);
    ObjectId csock = s.socket_create(client_m, client);
    s.connect(client_m, client, csock, "198.51.100.7", 9000);
    auto cport = static_cast<std::uint16_t>(s.rnd(40000, 60000));
    ObjectId conn = s.accept(server_m, server, listener, "198.51.100.6", cport);

    s.read(client_m, client, payload, {21});

    // The middlebox rewrites the server address in both directions, so
    // under nat the two hosts log different header tuples.
    const std::string server_public = "198.51.100.7";
    const std::string server_private = "10.0.0.7";

    std::uint64_t rounds = params.iterations * params.scale;
    for (std::uint64_t i = 1; i <= rounds; ++i) {
        auto fwd_seq = static_cast<std::uint32_t>(100000 + i * 1460);
        auto fwd_sent = tcp_packet(1000 + i, "198.51.100.6", cport, server_public, 9000, fwd_seq);
        s.send(client_m, client, csock, fwd_sent, 1460);
        if (s.chance(params.drop)) {
            s.drop(fwd_sent);
        } else {
            auto fwd_seen = params.nat
                ? tcp_packet(1000 + i, "198.51.100.6", cport, server_private, 9000, fwd_seq)
                : fwd_sent;
            s.recv(server_m, server, conn, fwd_seen, 1460, fwd_sent);
            s.write(server_m, server, received);
        }

        auto rpl_seq = static_cast<std::uint32_t>(500000 + i * 536);
        auto rpl_sent = params.nat
            ? tcp_packet(30000 + i, server_private, 9000, "198.51.100.6", cport, rpl_seq)
            : tcp_packet(30000 + i, server_public, 9000, "198.51.100.6", cport, rpl_seq);
        s.send(server_m, server, conn, rpl_sent, 536);
        if (s.chance(params.drop)) {
            s.drop(rpl_sent);
        } else {
            auto rpl_seen = tcp_packet(30000 + i, server_public, 9000, "198.51.100.6", cport,
                                       rpl_seq);
            s.recv(client_m, client, csock, rpl_seen, 536, rpl_sent);
        }
    }

    s.exit(client_m, client);
    s.exit(server_m, server);

    SimResult result;
    result.trace = std::move(s.trace);
    result.truth = s.finish();
    return result;
}

// Web server in front of a database, optionally with a scrubber task
// interposed on the database leg. Log lines and outbound replies are the
// interesting sinks.
SimResult scenario_webstack(Sim& s, const ScenarioParams& params) {
    const MachineId m = 1;
    ProvdFiles provd_files = provd_preamble(s, m);
    s.pre_dir(m, "/usr/bin");
    s.pre_dir(m, "/var/db");
    ObjectId httpd_bin = s.pre_file(m, "/usr/sbin/httpd", 0, 0, 0755);
    ObjectId pg_bin = s.pre_file(m, "/usr/sbin/postgres", 0, 0, 0755);
    ObjectId scrub_bin = s.pre_file(m, "/usr/bin/scrub", 0, 0, 0755);
    ObjectId db_file = s.pre_file(m, "/var/db/main.db", 26, 26, 0600);

    s.boot(m);
    run_provd(s, m, provd_files, 50);

    ObjectId web = s.fork_task(m, 0, 500, 48, 48, "system_u:system_r:httpd_t",
                               "/system.slice/httpd");
    s.exec(m, web, httpd_bin, "httpd -D FOREGROUND");
    ObjectId db = s.fork_task(m, 0, 600, 26, 26, "system_u:system_r:postgresql_t",
                              "/system.slice/postgresql");
    s.exec(m, db, pg_bin, "postgres -D /var/db");
    ObjectId scrub = 0;
    if (params.sanitizer) {
        scrub = s.fork_task(m, 0, 700, 48, 48, "system_u:system_r:scrub_t",
                            "/system.slice/scrub");
        s.exec(m, scrub, scrub_bin, "scrub --pipe");
    }

    ObjectId db_listener = s.socket_create(m, db);
    s.bind(m, db, db_listener, "127.0.0.1", 5432);
    ObjectId db_owner = params.sanitizer ? scrub : web;
    ObjectId db_sock = s.socket_create(m, db_owner);
    s.connect(m, db_owner, db_sock, "127.0.0.1", 5432);
    ObjectId db_conn = s.accept(m, db, db_listener, "127.0.0.1", 45001);
    s.open(m, db, db_file, "rw");

    ObjectId to_scrub = 0;
    ObjectId from_scrub = 0;
    if (params.sanitizer) {
        to_scrub = s.pipe_create(m, web);
        from_scrub = s.pipe_create(m, scrub);
    }

    ObjectId web_listener = s.socket_create(m, web);
    s.bind(m, web, web_listener, "0.0.0.0", 80);

    std::uint64_t rounds = params.iterations * params.scale;
    for (std::uint64_t r = 1; r <= rounds; ++r) {
        auto client_port = static_cast<std::uint16_t>(50000 + (r % 10000));
        ObjectId conn = s.accept(m, web, web_listener, "203.0.113.9", client_port);
        auto req = tcp_packet(r, "203.0.113.9", client_port, "198.51.100.10", 80,
                              static_cast<std::uint32_t>(s.rnd(1, 0xffffffff)));
        s.recv(m, web, conn, req, 200 + s.rnd(0, 200));
        s.log(m, web, "GET /report/" + std::to_string(r));

        auto query = tcp_packet(20000 + r, "127.0.0.1", 45001, "127.0.0.1", 5432,
                                static_cast<std::uint32_t>(s.rnd(1, 0xffffffff)));
        if (params.sanitizer) {
            s.write(m, web, to_scrub);
            s.read(m, scrub, to_scrub);
            s.send(m, scrub, db_sock, query, 64);
        } else {
            s.send(m, web, db_sock, query, 64);
        }
        s.recv(m, db, db_conn, query, 64);

        s.read(m, db, db_file, r == 1 ? std::vector<std::uint64_t>{31}
                                      : std::vector<std::uint64_t>{});
        s.write(m, db, db_file);

        auto resp = tcp_packet(40000 + r, "127.0.0.1", 5432, "127.0.0.1", 45001,
                               static_cast<std::uint32_t>(s.rnd(1, 0xffffffff)));
        s.send(m, db, db_conn, resp, 500 + s.rnd(0, 1000));
        if (params.sanitizer) {
            s.recv(m, scrub, db_sock, resp, 500);
            s.write(m, scrub, from_scrub);
            s.read(m, web, from_scrub);
        } else {
            s.recv(m, web, db_sock, resp, 500);
        }
        s.log(m, web, "200 /report/" + std::to_string(r));

        auto out = tcp_packet(40000 + rounds + r, "198.51.100.10", 80, "203.0.113.9",
                              client_port, static_cast<std::uint32_t>(s.rnd(1, 0xffffffff)));
        s.send(m, web, conn, out, 1000 + s.rnd(0, 2000));
    }

    SimResult result;
    result.trace = std::move(s.trace);
    result.truth = s.finish();
    return result;
}

// Three stages joined by pipes, with stages two and three also sharing a
// mapped scratch file. One tag rides the pipes; a second can only cross
// through the mapping.
SimResult scenario_pipeline(Sim& s, const ScenarioParams& params) {
    const MachineId m = 1;
    ProvdFiles provd_files = provd_preamble(s, m);
    s.pre_dir(m, "/data");
    ObjectId input = s.pre_file(m, "/data/input", 1000, 1000, 0644);
    ObjectId side = s.pre_file(m, "/data/side", 1000, 1000, 0644);

    s.boot(m);
    run_provd(s, m, provd_files, 50);

    ObjectId t1 = s.fork_task(m, 0, 800, 1000, 1000, "user_u:user_r:user_t", "/user.slice",
                              true);
    ObjectId t2 = s.fork_task(m, 0, 801, 1000, 1000, "user_u:user_r:user_t", "/user.slice");
    ObjectId t3 = s.fork_task(m, 0, 802, 1000, 1000, "user_u:user_r:user_t", "/user.slice");

    ObjectId stage1 = s.pipe_create(m, t1);
    ObjectId stage2 = s.pipe_create(m, t2);
    ObjectId scratch = s.file_create(m, t2, "/data/scratch", 0600);
    s.mmap_attach(m, t2, scratch);
    s.mmap_attach(m, t3, scratch);
    ObjectId out = s.file_create(m, t3, "/data/out", 0644);
    s.getattr(m, t1, input);

    std::uint64_t rounds = params.iterations * params.scale;
    for (std::uint64_t i = 1; i <= rounds; ++i) {
        s.read(m, t1, input, i == 1 ? std::vector<std::uint64_t>{11}
                                    : std::vector<std::uint64_t>{});
        s.write(m, t1, stage1);
        s.read(m, t2, stage1);
        s.write(m, t2, stage2);
        s.read(m, t3, stage2);
        s.write(m, t3, out);
        if (i == 1) {
            AttrMap payload;
            payload["attr_kind"] = std::string("xattr");
            payload["name"] = std::string("user.stage");
            payload["value"] = std::string("3");
            s.setattr(m, t3, out, payload);
        }
    }

    // This tag never touches a pipe; only the shared mapping can carry it.
    s.read(m, t2, side, {12});
    ObjectId out2 = s.file_create(m, t3, "/data/out2", 0644);
    s.write(m, t3, out2);

    AttrMap summary;
    summary["label"] = std::string("batch-summary");
    ObjectId note = s.disclose_node(m, t1, summary);
    s.disclose_edge(m, t1, note, out);
    AttrMap denied;
    denied["label"] = std::string("uncredentialed");
    s.disclose_node(m, t2, denied);  // t2 lacks the capability: dropped

    s.detach(m, t2, scratch);
    s.detach(m, t3, scratch);
    s.exit(m, t1);
    s.exit(m, t2);
    s.exit(m, t3);

    SimResult result;
    result.trace = std::move(s.trace);
    result.truth = s.finish();
    return result;
}

}  // namespace

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names{
        "fig3", "wget", "shm", "two_host", "webstack", "pipeline",
    };
    return names;
}

SimResult simulate(const std::string& scenario, std::uint64_t seed,
                   const ScenarioParams& params) {
    Sim sim(seed);
    if (scenario == "fig3") return scenario_fig3(sim, params);
    if (scenario == "wget") return scenario_wget(sim, params);
    if (scenario == "shm") return scenario_shm(sim, params);
    if (scenario == "two_host") return scenario_two_host(sim, params);
    if (scenario == "webstack") return scenario_webstack(sim, params);
    if (scenario == "pipeline") return scenario_pipeline(sim, params);
    std::ostringstream known;
    for (const auto& name : scenario_names()) known << " " << name;
    throw Error("unknown scenario '" + scenario + "'; known:" + known.str());
}

}  // namespace prov
