#include "copra/net/peer.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <sstream>

namespace copra::net {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw SocketError(what + ": " + std::strerror(errno));
}

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
    while (len > 0) {
        ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_errno("socket send failed");
        }
        data += n;
        len -= static_cast<std::size_t>(n);
    }
}

// Reads exactly len bytes. Returns false on clean EOF before the first byte;
// throws TruncatedStream on EOF mid-buffer.
bool read_exact(int fd, std::uint8_t* data, std::size_t len) {
    std::size_t got = 0;
    while (got < len) {
        ssize_t n = ::recv(fd, data + got, len - got, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_errno("socket recv failed");
        }
        if (n == 0) {
            if (got == 0) return false;
            throw TruncatedStream("stream ended mid-frame");
        }
        got += static_cast<std::size_t>(n);
    }
    return true;
}

sockaddr_in resolve_ipv4(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw SocketError("address must be dotted-decimal IPv4: " + host);
    return addr;
}

std::string describe_outcome(const crypto::ServeOutcome& outcome) {
    std::ostringstream os;
    os << protocol_name(outcome.protocol) << " peer=" << outcome.peer_entity
       << " peer_set=" << outcome.peer_set_size;
    if (outcome.reported_count) os << " reported=" << *outcome.reported_count;
    if (outcome.jaccard) os << " jaccard=" << *outcome.jaccard;
    return os.str();
}

}  // namespace

SocketChannel::SocketChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

SocketChannel::~SocketChannel() {
    if (fd_ >= 0) ::close(fd_);
}

void SocketChannel::send(const WireMessage& msg) {
    Bytes frame = encode_frame(msg);
    write_all(fd_, frame.data(), frame.size());
}

WireMessage SocketChannel::recv() {
    std::uint8_t header[4];
    if (!read_exact(fd_, header, 4)) throw ChannelClosed();
    std::uint32_t body_len = 0;
    for (int i = 0; i < 4; ++i) body_len = body_len << 8 | header[i];
    if (body_len < 1 || body_len > kMaxFrameLen) throw FramingError("bad frame length");
    Bytes body(body_len);
    if (!read_exact(fd_, body.data(), body.size()))
        throw TruncatedStream("stream ended after frame header");
    WireMessage msg;
    msg.type = static_cast<MsgType>(body[0]);
    msg.payload.assign(body.begin() + 1, body.end());
    return msg;
}

Listener::Listener(const std::string& bind_address, std::uint16_t port,
                   crypto::ServeDataset dataset, crypto::ProtocolOptions opts,
                   SessionLogger logger)
    : dataset_(std::move(dataset)), opts_(std::move(opts)), logger_(std::move(logger)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw_errno("socket creation failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = resolve_ipv4(bind_address, port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(listen_fd_);
        throw_errno("bind failed");
    }
    if (::listen(listen_fd_, 16) != 0) {
        ::close(listen_fd_);
        throw_errno("listen failed");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    bound_port_ = ntohs(addr.sin_port);
    accept_thread_ = std::thread([this] { accept_loop(); });
}

Listener::~Listener() { stop(); }

void Listener::stop() {
    bool expected = false;
    if (!stopping_.compare_exchange_strong(expected, true)) {
        if (accept_thread_.joinable()) accept_thread_.join();
        return;
    }
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    std::lock_guard lock(workers_mu_);
    for (auto& t : workers_)
        if (t.joinable()) t.join();
}

void Listener::accept_loop() {
    while (!stopping_) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            break;  // listener closed
        }
        std::lock_guard lock(workers_mu_);
        workers_.emplace_back([this, fd] {
            SessionLogEntry entry;
            try {
                SocketChannel ch(fd);
                crypto::ServeOutcome outcome = crypto::serve_session(ch, dataset_, opts_);
                entry.peer_entity = outcome.peer_entity;
                entry.protocol = outcome.protocol;
                entry.ok = true;
                entry.detail = describe_outcome(outcome);
            } catch (const std::exception& e) {
                entry.ok = false;
                entry.detail = e.what();
            }
            if (logger_) logger_(entry);
        });
    }
}

InitiateResult initiate(const std::string& host, std::uint16_t port, ProtocolId protocol,
                        const crypto::ServeDataset& dataset, const crypto::ProtocolOptions& opts) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket creation failed");
    sockaddr_in addr = resolve_ipv4(host, port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int saved = errno;
        ::close(fd);
        errno = saved;
        throw_errno("connect failed");
    }
    SocketChannel ch(fd);
    InitiateResult result;
    result.protocol = protocol;
    switch (protocol) {
        case ProtocolId::PsiCa: {
            auto r = crypto::run_psi_ca(ch, crypto::Role::Client, dataset.set, opts);
            result.value = *r.cardinality;
            result.peer_set_size = r.peer_set_size;
            break;
        }
        case ProtocolId::PsiDt: {
            auto r = crypto::run_psi_dt(ch, crypto::Role::Client, dataset.set, {}, opts);
            result.peer_set_size = r.peer_set_size;
            result.value = std::move(r.matched);
            break;
        }
        case ProtocolId::Pjs: {
            auto r = crypto::run_private_jaccard(ch, crypto::Role::Client, dataset.set, opts);
            result.value = *r.jaccard;
            result.peer_set_size = r.peer_set_size;
            break;
        }
    }
    return result;
}

}  // namespace copra::net
