#pragma once

#include <map>
#include <optional>
#include <vector>

#include "copra/crypto/group.hpp"
#include "copra/net/wire.hpp"

namespace copra::crypto {

using net::ProtocolId;

// Sorted unique 32-bit IPv4 values.
using IpSet = std::vector<std::uint32_t>;

enum class Role { Client, Server };

class ProtocolError : public CryptoError {
public:
    using CryptoError::CryptoError;
};

// CryptoParams or protocol disagreement detected during HELLO exchange.
class HandshakeError : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

// Peer sent an ERROR frame.
class PeerError : public ProtocolError {
public:
    PeerError(net::WireError code, const std::string& detail);
    net::WireError code;
};

// Message arrived out of protocol order or with an inconsistent shape.
class SequenceError : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

// Authenticated decryption failed on a matched item.
class PayloadCorruptError : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

class SessionReusedError : public ProtocolError {
public:
    SessionReusedError() : ProtocolError("session is single-use") {}
};

// Event records transferred alongside a matched item: (timestamp, port).
struct AssociatedPayload {
    std::uint32_t item = 0;
    std::vector<std::pair<std::int64_t, std::uint16_t>> events;

    Bytes serialize() const;
    static AssociatedPayload deserialize(BytesView data);

    bool operator==(const AssociatedPayload&) const = default;
};

using PayloadMap = std::map<std::uint32_t, AssociatedPayload>;

struct ProtocolOptions {
    CryptoParams params;
    bool send_report = true;  // final REPORT message giving both sides the output
    std::string entity_id = "anonymous";
};

// Per-run protocol state: role, the ephemeral blinding scalar, and a phase
// counter enforcing single use. The scalar never leaves this object.
class Session {
public:
    Session(CryptoParams params, Role role);

    Role role() const { return role_; }
    const CryptoParams& params() const { return params_; }
    std::optional<std::uint32_t> peer_set_size() const { return peer_set_size_; }

    // Server-side PSI-CA reply permutation from the last run (test hook).
    const std::vector<std::size_t>& last_permutation() const { return permutation_; }

private:
    friend class ProtocolRun;

    CryptoParams params_;
    Role role_;
    std::shared_ptr<const Group> group_;
    int phase_ = 0;
    bool used_ = false;
    std::optional<std::uint32_t> peer_set_size_;
    std::vector<std::size_t> permutation_;
};

struct PsiCaResult {
    // Cardinality of the intersection. Always set on the client; set on the
    // server only when the client sent the REPORT message.
    std::optional<std::uint64_t> cardinality;
    std::uint32_t peer_set_size = 0;
};

struct DtMatch {
    std::uint32_t item = 0;
    AssociatedPayload payload;

    bool operator==(const DtMatch&) const = default;
};

struct PsiDtResult {
    std::vector<DtMatch> matched;  // client side; empty on the server
    std::uint32_t peer_set_size = 0;
    std::optional<std::uint64_t> reported_count;  // server side, from REPORT
};

struct PjsResult {
    std::optional<double> jaccard;
    std::optional<std::uint64_t> cardinality;
    std::uint32_t peer_set_size = 0;
};

// Protocol runners. Each performs the HELLO handshake, runs the blinded
// exchange, and optionally the REPORT step. The server role of run_psi_dt
// requires a payload for every item in `local_set`.
PsiCaResult run_psi_ca(Session& session, net::Channel& ch, const IpSet& local_set);
PsiDtResult run_psi_dt(Session& session, net::Channel& ch, const IpSet& local_set,
                       const PayloadMap& payloads = {});
PjsResult run_private_jaccard(Session& session, net::Channel& ch, const IpSet& local_set);

// Single-shot conveniences that construct a fresh session.
PsiCaResult run_psi_ca(net::Channel& ch, Role role, const IpSet& local_set,
                       const ProtocolOptions& opts = {});
PsiDtResult run_psi_dt(net::Channel& ch, Role role, const IpSet& local_set,
                       const PayloadMap& payloads = {}, const ProtocolOptions& opts = {});
PjsResult run_private_jaccard(net::Channel& ch, Role role, const IpSet& local_set,
                              const ProtocolOptions& opts = {});

// Server-side dispatcher: reads HELLO and serves whichever protocol the peer
// requested against one dataset.
struct ServeDataset {
    IpSet set;
    PayloadMap payloads;
};

struct ServeOutcome {
    ProtocolId protocol;
    std::string peer_entity;
    std::uint32_t peer_set_size = 0;
    std::optional<std::uint64_t> reported_count;
    std::optional<double> jaccard;
};

ServeOutcome serve_session(net::Channel& ch, const ServeDataset& dataset,
                           const ProtocolOptions& opts = {});

// Test oracle: exact intersection and its cardinality.
std::pair<IpSet, std::size_t> plaintext_intersection(const IpSet& a, const IpSet& b);

// Canonical item encoding fed to hash_to_group (4-byte big-endian IPv4).
Bytes item_bytes(std::uint32_t ip);

}  // namespace copra::crypto
