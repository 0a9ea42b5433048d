#pragma once

#include <atomic>
#include <functional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "copra/crypto/protocol.hpp"
#include "copra/net/wire.hpp"

namespace copra::net {

class SocketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Channel over a connected stream socket. Owns the descriptor.
class SocketChannel final : public Channel {
public:
    explicit SocketChannel(int fd);
    ~SocketChannel() override;

    SocketChannel(const SocketChannel&) = delete;
    SocketChannel& operator=(const SocketChannel&) = delete;

    void send(const WireMessage& msg) override;
    WireMessage recv() override;

private:
    int fd_;
};

struct SessionLogEntry {
    std::string peer_entity;
    ProtocolId protocol = ProtocolId::PsiCa;
    bool ok = false;
    std::string detail;  // formatted outcome or error text
};

using SessionLogger = std::function<void(const SessionLogEntry&)>;

// Serves protocol sessions against one dataset until stopped. Each accepted
// connection runs on its own thread; a failing session never stops the
// listener. The dataset is read-only while serving.
class Listener {
public:
    Listener(const std::string& bind_address, std::uint16_t port, crypto::ServeDataset dataset,
             crypto::ProtocolOptions opts, SessionLogger logger = nullptr);
    ~Listener();

    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    std::uint16_t bound_port() const { return bound_port_; }
    void stop();

private:
    void accept_loop();

    crypto::ServeDataset dataset_;
    crypto::ProtocolOptions opts_;
    SessionLogger logger_;
    int listen_fd_ = -1;
    std::uint16_t bound_port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::mutex workers_mu_;
    std::vector<std::thread> workers_;
};

struct InitiateResult {
    ProtocolId protocol;
    // PSI-CA carries the cardinality, PSI-DT the matched items, PJS the ratio.
    std::variant<std::uint64_t, std::vector<crypto::DtMatch>, double> value;
    std::uint32_t peer_set_size = 0;
};

InitiateResult initiate(const std::string& host, std::uint16_t port, ProtocolId protocol,
                        const crypto::ServeDataset& dataset, const crypto::ProtocolOptions& opts);

}  // namespace copra::net
