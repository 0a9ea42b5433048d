#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include "copra/bytes.hpp"
#include "copra/crypto/group.hpp"

namespace copra::net {

// Message type registry. Values are part of the wire contract.
enum class MsgType : std::uint8_t {
    Hello           = 0x01,
    HelloAck        = 0x02,
    CaBlinded       = 0x10,
    CaReply         = 0x11,
    CaTags          = 0x12,
    DtBlinded       = 0x20,
    DtReply         = 0x21,
    DtTaggedPayloads = 0x22,
    Report          = 0x30,
    Error           = 0x7F,
};

// Error frame codes.
enum class WireError : std::uint8_t {
    VersionMismatch    = 0x01,
    GroupMismatch      = 0x02,
    UnsupportedProtocol = 0x03,
    MalformedMessage   = 0x04,
    Internal           = 0x05,
};

constexpr std::uint16_t kProtocolVersion = 1;
constexpr std::size_t kMaxFrameLen = 16u << 20;  // type byte + payload

struct WireMessage {
    MsgType type;
    Bytes payload;

    bool operator==(const WireMessage&) const = default;
};

class ChannelClosed : public std::runtime_error {
public:
    ChannelClosed() : std::runtime_error("channel closed by peer") {}
};

class TruncatedStream : public std::runtime_error {
public:
    explicit TruncatedStream(const std::string& what) : std::runtime_error(what) {}
};

class FramingError : public std::runtime_error {
public:
    explicit FramingError(const std::string& what) : std::runtime_error(what) {}
};

// Frame layout: u32 big-endian length of (type + payload), then type, then payload.
Bytes encode_frame(const WireMessage& msg);

// Parses one frame from `data` starting at `offset`; advances offset. Returns
// nullopt when fewer bytes than a complete frame remain.
std::optional<WireMessage> decode_frame(BytesView data, std::size_t& offset);

// Duplex lock-step message stream.
class Channel {
public:
    virtual ~Channel() = default;
    virtual void send(const WireMessage& msg) = 0;
    virtual WireMessage recv() = 0;
};

// In-memory channel endpoint. make_loopback() wires two endpoints so that each
// side's send feeds the other's recv. Thread-safe; used for in-process protocol
// runs and tests.
class QueueChannel final : public Channel {
public:
    void send(const WireMessage& msg) override;
    WireMessage recv() override;
    void close();

    static std::pair<std::shared_ptr<QueueChannel>, std::shared_ptr<QueueChannel>> make_loopback();

private:
    struct Queue {
        std::mutex mu;
        std::condition_variable cv;
        std::deque<WireMessage> items;
        bool closed = false;
    };

    std::shared_ptr<Queue> tx_;
    std::shared_ptr<Queue> rx_;
};

// Decorator that records every message passing through, for transcript checks.
class RecordingChannel final : public Channel {
public:
    explicit RecordingChannel(std::shared_ptr<Channel> inner) : inner_(std::move(inner)) {}

    void send(const WireMessage& msg) override {
        transcript_.push_back(msg);
        inner_->send(msg);
    }

    WireMessage recv() override {
        WireMessage msg = inner_->recv();
        transcript_.push_back(msg);
        return msg;
    }

    const std::vector<WireMessage>& transcript() const { return transcript_; }

private:
    std::shared_ptr<Channel> inner_;
    std::vector<WireMessage> transcript_;
};

enum class ProtocolId : std::uint8_t {
    PsiCa = 1,
    PsiDt = 2,
    Pjs   = 3,
};

std::string_view protocol_name(ProtocolId id);

struct Handshake {
    std::uint16_t protocol_version = kProtocolVersion;
    crypto::GroupId group_id = crypto::GroupId::Ristretto255;
    ProtocolId protocol_id = ProtocolId::PsiCa;
    std::uint32_t declared_set_size = 0;
    std::string entity_id;

    Bytes encode() const;
    static Handshake decode(BytesView payload);
};

Bytes encode_error_payload(WireError code, std::string_view detail);
std::pair<WireError, std::string> decode_error_payload(BytesView payload);

}  // namespace copra::net
