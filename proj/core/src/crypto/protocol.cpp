#include "copra/crypto/protocol.hpp"

#include <sodium.h>

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace copra::crypto {

using net::Channel;
using net::Handshake;
using net::MsgType;
using net::WireError;
using net::WireMessage;

namespace {

constexpr std::string_view kCaTagDomain = "ca-tag";
constexpr std::string_view kDtTagDomain = "dt-tag";
constexpr std::string_view kDtKeyDomain = "dt-key";

struct BytesHash {
    std::size_t operator()(const Bytes& b) const {
        return std::hash<std::string_view>{}(
            std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
    }
};

// Uniform permutation of [0, n) from the OS entropy source. Protocol privacy
// must not depend on the experiment's seeded generator.
std::vector<std::size_t> os_random_permutation(std::size_t n) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = randombytes_uniform(static_cast<std::uint32_t>(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

Bytes aead_seal(BytesView plaintext, const Bytes& key) {
    Bytes out(crypto_aead_chacha20poly1305_ietf_NPUBBYTES);
    randombytes_buf(out.data(), out.size());
    std::size_t ct_offset = out.size();
    out.resize(ct_offset + plaintext.size() + crypto_aead_chacha20poly1305_ietf_ABYTES);
    unsigned long long ct_len = 0;
    crypto_aead_chacha20poly1305_ietf_encrypt(out.data() + ct_offset, &ct_len, plaintext.data(),
                                              plaintext.size(), nullptr, 0, nullptr, out.data(),
                                              key.data());
    out.resize(ct_offset + ct_len);
    return out;
}

Bytes aead_open(BytesView sealed, const Bytes& key) {
    constexpr std::size_t npub = crypto_aead_chacha20poly1305_ietf_NPUBBYTES;
    constexpr std::size_t abytes = crypto_aead_chacha20poly1305_ietf_ABYTES;
    if (sealed.size() < npub + abytes)
        throw PayloadCorruptError("sealed payload shorter than nonce + tag");
    Bytes out(sealed.size() - npub - abytes);
    unsigned long long pt_len = 0;
    if (crypto_aead_chacha20poly1305_ietf_decrypt(out.data(), &pt_len, nullptr,
                                                  sealed.data() + npub, sealed.size() - npub,
                                                  nullptr, 0, sealed.data(), key.data()) != 0)
        throw PayloadCorruptError("authenticated decryption failed on matched item");
    out.resize(pt_len);
    return out;
}

}  // namespace

PeerError::PeerError(WireError c, const std::string& detail)
    : ProtocolError("peer error 0x" + std::to_string(static_cast<int>(c)) + ": " + detail),
      code(c) {}

Bytes AssociatedPayload::serialize() const {
    Bytes out;
    put_u32(out, item);
    put_u32(out, static_cast<std::uint32_t>(events.size()));
    for (const auto& [ts, port] : events) {
        put_i64(out, ts);
        put_u16(out, port);
    }
    return out;
}

AssociatedPayload AssociatedPayload::deserialize(BytesView data) {
    ByteReader r(data);
    AssociatedPayload p;
    p.item = r.u32();
    std::uint32_t n = r.u32();
    p.events.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::int64_t ts = r.i64();
        std::uint16_t port = r.u16();
        p.events.emplace_back(ts, port);
    }
    r.expect_done();
    return p;
}

Session::Session(CryptoParams params, Role role)
    : params_(params), role_(role), group_(make_group(params.group_id)) {}

Bytes item_bytes(std::uint32_t ip) {
    Bytes out;
    put_u32(out, ip);
    return out;
}

std::pair<IpSet, std::size_t> plaintext_intersection(const IpSet& a, const IpSet& b) {
    IpSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return {out, out.size()};
}

// ---------------------------------------------------------------------------
// Shared protocol machinery.
// ---------------------------------------------------------------------------

class ProtocolRun {
public:
    ProtocolRun(Session& session, Channel& ch, ProtocolId proto, const ProtocolOptions& opts)
        : s_(session), ch_(ch), proto_(proto), opts_(opts) {
        if (s_.used_) throw SessionReusedError();
        if (!(s_.params_ == opts.params))
            throw HandshakeError("session params differ from protocol options");
        s_.used_ = true;
    }

    const Group& group() const { return *s_.group_; }
    std::size_t tag_size() const { return s_.params_.tag_size(); }

    WireMessage recv_expect(MsgType want) {
        WireMessage msg = ch_.recv();
        s_.phase_++;
        if (msg.type == MsgType::Error) {
            auto [code, detail] = net::decode_error_payload(msg.payload);
            throw PeerError(code, detail);
        }
        if (msg.type != want)
            throw SequenceError("unexpected message type 0x" +
                                std::to_string(static_cast<int>(msg.type)));
        return msg;
    }

    void send(MsgType type, Bytes payload) {
        ch_.send(WireMessage{type, std::move(payload)});
        s_.phase_++;
    }

    void send_error(WireError code, std::string_view detail) {
        ch_.send(WireMessage{MsgType::Error, net::encode_error_payload(code, detail)});
    }

    // Client half of the HELLO exchange. Returns the server's HELLO_ACK.
    Handshake client_handshake(std::uint32_t set_size) {
        Handshake hello{net::kProtocolVersion, opts_.params.group_id, proto_, set_size,
                        opts_.entity_id};
        send(MsgType::Hello, hello.encode());
        WireMessage ack_msg = recv_expect(MsgType::HelloAck);
        Handshake ack = decode_handshake(ack_msg.payload);
        if (ack.protocol_version != net::kProtocolVersion)
            throw HandshakeError("peer protocol version mismatch");
        if (ack.group_id != opts_.params.group_id) throw HandshakeError("peer group mismatch");
        if (ack.protocol_id != proto_) throw HandshakeError("peer acknowledged wrong protocol");
        s_.peer_set_size_ = ack.declared_set_size;
        return ack;
    }

    // Server half; validates the peer's HELLO (already received by the caller
    // when dispatching) and replies HELLO_ACK.
    void server_handshake(const Handshake& hello, std::uint32_t set_size) {
        if (hello.protocol_version != net::kProtocolVersion) {
            send_error(WireError::VersionMismatch, "unsupported protocol version");
            throw HandshakeError("peer protocol version mismatch");
        }
        if (hello.group_id != opts_.params.group_id) {
            send_error(WireError::GroupMismatch, "group parameter mismatch");
            throw HandshakeError("peer group mismatch");
        }
        if (hello.declared_set_size == 0) {
            send_error(WireError::MalformedMessage, "declared set size must be positive");
            throw HandshakeError("peer declared empty set");
        }
        s_.peer_set_size_ = hello.declared_set_size;
        Handshake ack{net::kProtocolVersion, opts_.params.group_id, proto_, set_size,
                      opts_.entity_id};
        send(MsgType::HelloAck, ack.encode());
    }

    Handshake recv_hello() {
        WireMessage msg = recv_expect(MsgType::Hello);
        return decode_handshake(msg.payload);
    }

    Bytes encode_elements(const std::vector<Bytes>& elems) const {
        Bytes out;
        put_u32(out, static_cast<std::uint32_t>(elems.size()));
        for (const auto& e : elems) put_bytes(out, e);
        return out;
    }

    std::vector<Bytes> decode_elements(BytesView payload) const {
        ByteReader r(payload);
        std::uint32_t count = r.u32();
        std::size_t width = group().element_size();
        if (r.remaining() != static_cast<std::size_t>(count) * width)
            throw SequenceError("element list length inconsistent with count");
        std::vector<Bytes> elems;
        elems.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) elems.push_back(r.take(width));
        return elems;
    }

    std::vector<Bytes> blind_items(const IpSet& items, const Bytes& scalar) const {
        std::vector<Bytes> out;
        out.reserve(items.size());
        for (std::uint32_t ip : items)
            out.push_back(group().exponentiate(group().hash_to_group(item_bytes(ip)), scalar));
        return out;
    }

    void record_permutation(std::vector<std::size_t> perm) { s_.permutation_ = std::move(perm); }

    Session& session() { return s_; }
    const ProtocolOptions& opts() const { return opts_; }

private:
    Handshake decode_handshake(BytesView payload) {
        try {
            return Handshake::decode(payload);
        } catch (const ByteReaderError& e) {
            throw SequenceError(std::string("malformed handshake: ") + e.what());
        }
    }

    Session& s_;
    Channel& ch_;
    ProtocolId proto_;
    ProtocolOptions opts_;
};

namespace {

void require_nonempty(const IpSet& set) {
    if (set.empty()) throw std::invalid_argument("local set must be nonempty");
}

// --------------------------- PSI-CA ---------------------------------------

std::uint64_t psi_ca_client(ProtocolRun& run, const IpSet& local_set) {
    const Group& g = run.group();
    run.client_handshake(static_cast<std::uint32_t>(local_set.size()));

    Bytes r_c = g.random_scalar();
    run.send(MsgType::CaBlinded, run.encode_elements(run.blind_items(local_set, r_c)));

    auto reply = run.decode_elements(run.recv_expect(MsgType::CaReply).payload);
    if (reply.size() != local_set.size())
        throw SequenceError("reply count differs from blinded count");

    WireMessage tags_msg = run.recv_expect(MsgType::CaTags);
    ByteReader tr(tags_msg.payload);
    std::uint32_t tag_count = tr.u32();
    if (tr.remaining() != static_cast<std::size_t>(tag_count) * run.tag_size())
        throw SequenceError("tag list length inconsistent with count");
    std::unordered_set<Bytes, BytesHash> server_tags;
    for (std::uint32_t i = 0; i < tag_count; ++i) server_tags.insert(tr.take(run.tag_size()));

    Bytes r_inv = g.invert_scalar(r_c);
    std::uint64_t count = 0;
    for (const auto& e : reply) {
        Bytes unblinded = g.exponentiate(e, r_inv);
        if (server_tags.contains(tag_hash(unblinded, kCaTagDomain, run.tag_size()))) count++;
    }
    return count;
}

void psi_ca_server_exchange(ProtocolRun& run, const IpSet& local_set) {
    const Group& g = run.group();
    Bytes r_s = g.random_scalar();

    auto blinded = run.decode_elements(run.recv_expect(MsgType::CaBlinded).payload);
    if (blinded.empty()) throw SequenceError("peer sent empty blinded list");

    std::vector<Bytes> reblinded;
    reblinded.reserve(blinded.size());
    for (const auto& e : blinded) reblinded.push_back(g.exponentiate(e, r_s));

    auto perm = os_random_permutation(reblinded.size());
    std::vector<Bytes> shuffled;
    shuffled.reserve(reblinded.size());
    for (std::size_t idx : perm) shuffled.push_back(std::move(reblinded[idx]));
    run.record_permutation(std::move(perm));
    run.send(MsgType::CaReply, run.encode_elements(shuffled));

    std::vector<Bytes> tags;
    tags.reserve(local_set.size());
    for (std::uint32_t ip : local_set) {
        Bytes masked = g.exponentiate(g.hash_to_group(item_bytes(ip)), r_s);
        tags.push_back(tag_hash(masked, kCaTagDomain, run.tag_size()));
    }
    auto tag_perm = os_random_permutation(tags.size());
    Bytes payload;
    put_u32(payload, static_cast<std::uint32_t>(tags.size()));
    for (std::size_t idx : tag_perm) put_bytes(payload, tags[idx]);
    run.send(MsgType::CaTags, std::move(payload));
}

std::optional<std::uint64_t> maybe_recv_report(ProtocolRun& run) {
    if (!run.opts().send_report) return std::nullopt;
    WireMessage msg = run.recv_expect(MsgType::Report);
    ByteReader r(msg.payload);
    std::uint64_t value = r.u64();
    r.expect_done();
    return value;
}

void maybe_send_report(ProtocolRun& run, std::uint64_t value) {
    if (!run.opts().send_report) return;
    Bytes payload;
    put_u64(payload, value);
    run.send(MsgType::Report, std::move(payload));
}

PsiCaResult psi_ca_run(Session& session, Channel& ch, const IpSet& local_set,
                       const ProtocolOptions& opts, const Handshake* hello) {
    require_nonempty(local_set);
    ProtocolRun run(session, ch, ProtocolId::PsiCa, opts);
    PsiCaResult result;
    if (session.role() == Role::Client) {
        std::uint64_t count = psi_ca_client(run, local_set);
        maybe_send_report(run, count);
        result.cardinality = count;
    } else {
        Handshake h = hello ? *hello : run.recv_hello();
        run.server_handshake(h, static_cast<std::uint32_t>(local_set.size()));
        psi_ca_server_exchange(run, local_set);
        result.cardinality = maybe_recv_report(run);
    }
    result.peer_set_size = session.peer_set_size().value_or(0);
    return result;
}

// --------------------------- PSI-DT ---------------------------------------

std::vector<DtMatch> psi_dt_client(ProtocolRun& run, const IpSet& local_set) {
    const Group& g = run.group();
    run.client_handshake(static_cast<std::uint32_t>(local_set.size()));

    Bytes r_c = g.random_scalar();
    run.send(MsgType::DtBlinded, run.encode_elements(run.blind_items(local_set, r_c)));

    // Reply keeps the client's order so matches can be attributed.
    auto reply = run.decode_elements(run.recv_expect(MsgType::DtReply).payload);
    if (reply.size() != local_set.size())
        throw SequenceError("reply count differs from blinded count");

    WireMessage tp_msg = run.recv_expect(MsgType::DtTaggedPayloads);
    ByteReader tr(tp_msg.payload);
    std::uint32_t count = tr.u32();
    std::unordered_map<Bytes, Bytes, BytesHash> sealed_by_tag;
    sealed_by_tag.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Bytes tag = tr.take(run.tag_size());
        Bytes sealed = tr.take(tr.u32());
        if (!sealed_by_tag.emplace(std::move(tag), std::move(sealed)).second)
            throw SequenceError("duplicate item tag in payload list");
    }
    tr.expect_done();

    Bytes r_inv = g.invert_scalar(r_c);
    std::vector<DtMatch> matched;
    for (std::size_t i = 0; i < local_set.size(); ++i) {
        Bytes unblinded = g.exponentiate(reply[i], r_inv);
        auto it = sealed_by_tag.find(tag_hash(unblinded, kDtTagDomain, run.tag_size()));
        if (it == sealed_by_tag.end()) continue;
        Bytes key = tag_hash(unblinded, kDtKeyDomain, crypto_aead_chacha20poly1305_ietf_KEYBYTES);
        Bytes plaintext = aead_open(it->second, key);
        AssociatedPayload payload;
        try {
            payload = AssociatedPayload::deserialize(plaintext);
        } catch (const ByteReaderError&) {
            throw PayloadCorruptError("matched payload failed to parse");
        }
        if (payload.item != local_set[i])
            throw PayloadCorruptError("matched payload names a different item");
        matched.push_back(DtMatch{local_set[i], std::move(payload)});
    }
    return matched;
}

void psi_dt_server_exchange(ProtocolRun& run, const IpSet& local_set, const PayloadMap& payloads) {
    const Group& g = run.group();
    Bytes r_s = g.random_scalar();

    auto blinded = run.decode_elements(run.recv_expect(MsgType::DtBlinded).payload);
    if (blinded.empty()) throw SequenceError("peer sent empty blinded list");

    std::vector<Bytes> reblinded;
    reblinded.reserve(blinded.size());
    for (const auto& e : blinded) reblinded.push_back(g.exponentiate(e, r_s));
    run.send(MsgType::DtReply, run.encode_elements(reblinded));

    // Shuffle the tagged-payload list so positions reveal nothing about the
    // ordering of non-matched items.
    auto perm = os_random_permutation(local_set.size());
    Bytes payload_msg;
    put_u32(payload_msg, static_cast<std::uint32_t>(local_set.size()));
    for (std::size_t idx : perm) {
        std::uint32_t ip = local_set[idx];
        Bytes masked = g.exponentiate(g.hash_to_group(item_bytes(ip)), r_s);
        Bytes key = tag_hash(masked, kDtKeyDomain, crypto_aead_chacha20poly1305_ietf_KEYBYTES);
        Bytes sealed = aead_seal(payloads.at(ip).serialize(), key);
        put_bytes(payload_msg, tag_hash(masked, kDtTagDomain, run.tag_size()));
        put_u32(payload_msg, static_cast<std::uint32_t>(sealed.size()));
        put_bytes(payload_msg, sealed);
    }
    run.send(MsgType::DtTaggedPayloads, std::move(payload_msg));
}

PsiDtResult psi_dt_run(Session& session, Channel& ch, const IpSet& local_set,
                       const PayloadMap& payloads, const ProtocolOptions& opts,
                       const Handshake* hello) {
    require_nonempty(local_set);
    ProtocolRun run(session, ch, ProtocolId::PsiDt, opts);
    PsiDtResult result;
    if (session.role() == Role::Client) {
        result.matched = psi_dt_client(run, local_set);
        maybe_send_report(run, result.matched.size());
    } else {
        for (std::uint32_t ip : local_set)
            if (auto it = payloads.find(ip); it == payloads.end() || it->second.item != ip)
                throw std::invalid_argument("server must supply a payload for every item");
        Handshake h = hello ? *hello : run.recv_hello();
        run.server_handshake(h, static_cast<std::uint32_t>(local_set.size()));
        psi_dt_server_exchange(run, local_set, payloads);
        result.reported_count = maybe_recv_report(run);
    }
    result.peer_set_size = session.peer_set_size().value_or(0);
    return result;
}

// --------------------------- PJS -------------------------------------------

double jaccard_from_counts(std::uint64_t inter, std::uint64_t n, std::uint64_t m) {
    std::uint64_t uni = n + m - inter;
    if (uni == 0) throw std::invalid_argument("Jaccard undefined for two empty sets");
    return static_cast<double>(inter) / static_cast<double>(uni);
}

PjsResult pjs_run(Session& session, Channel& ch, const IpSet& local_set,
                  const ProtocolOptions& opts, const Handshake* hello) {
    require_nonempty(local_set);
    ProtocolRun run(session, ch, ProtocolId::Pjs, opts);
    PjsResult result;
    std::uint64_t n = local_set.size();
    if (session.role() == Role::Client) {
        std::uint64_t count = psi_ca_client(run, local_set);
        maybe_send_report(run, count);
        result.cardinality = count;
        result.jaccard = jaccard_from_counts(count, n, *session.peer_set_size());
    } else {
        Handshake h = hello ? *hello : run.recv_hello();
        run.server_handshake(h, static_cast<std::uint32_t>(local_set.size()));
        psi_ca_server_exchange(run, local_set);
        if (auto count = maybe_recv_report(run)) {
            result.cardinality = count;
            result.jaccard = jaccard_from_counts(*count, n, *session.peer_set_size());
        }
    }
    result.peer_set_size = session.peer_set_size().value_or(0);
    return result;
}

}  // namespace

PsiCaResult run_psi_ca(Session& session, Channel& ch, const IpSet& local_set) {
    ProtocolOptions opts;
    opts.params = session.params();
    return psi_ca_run(session, ch, local_set, opts, nullptr);
}

PsiDtResult run_psi_dt(Session& session, Channel& ch, const IpSet& local_set,
                       const PayloadMap& payloads) {
    ProtocolOptions opts;
    opts.params = session.params();
    return psi_dt_run(session, ch, local_set, payloads, opts, nullptr);
}

PjsResult run_private_jaccard(Session& session, Channel& ch, const IpSet& local_set) {
    ProtocolOptions opts;
    opts.params = session.params();
    return pjs_run(session, ch, local_set, opts, nullptr);
}

PsiCaResult run_psi_ca(Channel& ch, Role role, const IpSet& local_set,
                       const ProtocolOptions& opts) {
    Session session(opts.params, role);
    return psi_ca_run(session, ch, local_set, opts, nullptr);
}

PsiDtResult run_psi_dt(Channel& ch, Role role, const IpSet& local_set, const PayloadMap& payloads,
                       const ProtocolOptions& opts) {
    Session session(opts.params, role);
    return psi_dt_run(session, ch, local_set, payloads, opts, nullptr);
}

PjsResult run_private_jaccard(Channel& ch, Role role, const IpSet& local_set,
                              const ProtocolOptions& opts) {
    Session session(opts.params, role);
    return pjs_run(session, ch, local_set, opts, nullptr);
}

ServeOutcome serve_session(Channel& ch, const ServeDataset& dataset, const ProtocolOptions& opts) {
    // Peek the HELLO to learn which protocol the initiator wants, then hand
    // the already-parsed handshake to the matching runner.
    WireMessage msg = ch.recv();
    if (msg.type == MsgType::Error) {
        auto [code, detail] = net::decode_error_payload(msg.payload);
        throw PeerError(code, detail);
    }
    if (msg.type != MsgType::Hello) throw SequenceError("expected HELLO as first message");
    Handshake hello;
    try {
        hello = Handshake::decode(msg.payload);
    } catch (const ByteReaderError& e) {
        ch.send(WireMessage{MsgType::Error,
                            net::encode_error_payload(WireError::MalformedMessage, e.what())});
        throw SequenceError(std::string("malformed HELLO: ") + e.what());
    }

    ServeOutcome outcome;
    outcome.peer_entity = hello.entity_id;
    outcome.protocol = hello.protocol_id;
    Session session(opts.params, Role::Server);
    switch (hello.protocol_id) {
        case ProtocolId::PsiCa: {
            auto r = psi_ca_run(session, ch, dataset.set, opts, &hello);
            outcome.reported_count = r.cardinality;
            break;
        }
        case ProtocolId::PsiDt: {
            auto r = psi_dt_run(session, ch, dataset.set, dataset.payloads, opts, &hello);
            outcome.reported_count = r.reported_count;
            break;
        }
        case ProtocolId::Pjs: {
            auto r = pjs_run(session, ch, dataset.set, opts, &hello);
            outcome.reported_count = r.cardinality;
            outcome.jaccard = r.jaccard;
            break;
        }
        default:
            ch.send(WireMessage{MsgType::Error, net::encode_error_payload(
                                                    WireError::UnsupportedProtocol,
                                                    "unknown protocol id")});
            throw HandshakeError("peer requested unknown protocol");
    }
    outcome.peer_set_size = session.peer_set_size().value_or(0);
    return outcome;
}

}  // namespace copra::crypto
