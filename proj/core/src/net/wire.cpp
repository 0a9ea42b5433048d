#include "copra/net/wire.hpp"

namespace copra::net {

Bytes encode_frame(const WireMessage& msg) {
    std::size_t body_len = 1 + msg.payload.size();
    if (body_len > kMaxFrameLen) throw FramingError("frame exceeds 16 MiB cap");
    Bytes out;
    out.reserve(4 + body_len);
    put_u32(out, static_cast<std::uint32_t>(body_len));
    put_u8(out, static_cast<std::uint8_t>(msg.type));
    put_bytes(out, msg.payload);
    return out;
}

std::optional<WireMessage> decode_frame(BytesView data, std::size_t& offset) {
    if (data.size() - offset < 4) return std::nullopt;
    std::uint32_t body_len = 0;
    for (int i = 0; i < 4; ++i) body_len = body_len << 8 | data[offset + i];
    if (body_len < 1) throw FramingError("frame length below minimum");
    if (body_len > kMaxFrameLen) throw FramingError("frame exceeds 16 MiB cap");
    if (data.size() - offset < 4 + static_cast<std::size_t>(body_len)) return std::nullopt;
    WireMessage msg;
    msg.type = static_cast<MsgType>(data[offset + 4]);
    msg.payload.assign(data.begin() + offset + 5, data.begin() + offset + 4 + body_len);
    offset += 4 + body_len;
    return msg;
}

void QueueChannel::send(const WireMessage& msg) {
    // Round-trip through the frame codec so queue transport and socket
    // transport exercise identical encodings.
    Bytes frame = encode_frame(msg);
    std::size_t off = 0;
    auto decoded = decode_frame(frame, off);
    std::lock_guard lock(tx_->mu);
    if (tx_->closed) throw ChannelClosed();
    tx_->items.push_back(std::move(*decoded));
    tx_->cv.notify_one();
}

WireMessage QueueChannel::recv() {
    std::unique_lock lock(rx_->mu);
    rx_->cv.wait(lock, [&] { return !rx_->items.empty() || rx_->closed; });
    if (rx_->items.empty()) throw ChannelClosed();
    WireMessage msg = std::move(rx_->items.front());
    rx_->items.pop_front();
    return msg;
}

void QueueChannel::close() {
    for (auto& q : {tx_, rx_}) {
        std::lock_guard lock(q->mu);
        q->closed = true;
        q->cv.notify_all();
    }
}

std::pair<std::shared_ptr<QueueChannel>, std::shared_ptr<QueueChannel>> QueueChannel::make_loopback() {
    auto a = std::make_shared<QueueChannel>();
    auto b = std::make_shared<QueueChannel>();
    auto q_ab = std::make_shared<Queue>();
    auto q_ba = std::make_shared<Queue>();
    a->tx_ = q_ab;
    a->rx_ = q_ba;
    b->tx_ = q_ba;
    b->rx_ = q_ab;
    return {a, b};
}

std::string_view protocol_name(ProtocolId id) {
    switch (id) {
        case ProtocolId::PsiCa: return "psi-ca";
        case ProtocolId::PsiDt: return "psi-dt";
        case ProtocolId::Pjs: return "pjs";
    }
    return "unknown";
}

Bytes Handshake::encode() const {
    Bytes out;
    put_u16(out, protocol_version);
    put_u8(out, static_cast<std::uint8_t>(group_id));
    put_u8(out, static_cast<std::uint8_t>(protocol_id));
    put_u32(out, declared_set_size);
    put_u16(out, static_cast<std::uint16_t>(entity_id.size()));
    put_bytes(out, to_bytes(entity_id));
    return out;
}

Handshake Handshake::decode(BytesView payload) {
    ByteReader r(payload);
    Handshake h;
    h.protocol_version = r.u16();
    h.group_id = static_cast<crypto::GroupId>(r.u8());
    h.protocol_id = static_cast<ProtocolId>(r.u8());
    h.declared_set_size = r.u32();
    Bytes id = r.take(r.u16());
    h.entity_id.assign(id.begin(), id.end());
    r.expect_done();
    return h;
}

Bytes encode_error_payload(WireError code, std::string_view detail) {
    Bytes out;
    put_u8(out, static_cast<std::uint8_t>(code));
    put_u16(out, static_cast<std::uint16_t>(detail.size()));
    put_bytes(out, to_bytes(detail));
    return out;
}

std::pair<WireError, std::string> decode_error_payload(BytesView payload) {
    ByteReader r(payload);
    auto code = static_cast<WireError>(r.u8());
    Bytes msg = r.take(r.u16());
    return {code, std::string(msg.begin(), msg.end())};
}

}  // namespace copra::net
