// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parma/agent.hpp"
#include "parma/attestation.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace parma::bridge {

using nlohmann::json;

constexpr std::size_t max_frame_size = 1u << 20;
constexpr std::size_t frame_header_size = 4;

namespace reason {
inline constexpr std::string_view framing_error = "framing error";
inline constexpr std::string_view malformed_message = "malformed message";
inline constexpr std::string_view stale_sequence = "sequence not increasing";
inline constexpr std::string_view unknown_action = "unknown action";
inline constexpr std::string_view connection_closed = "connection closed";
} // namespace reason

// 4-byte big-endian length followed by the body. Throws std::length_error
// for bodies above max_frame_size.
Bytes encode_frame(std::string_view body);

struct FramingError {
    std::string detail;
};

/// Incremental decoder for a byte stream of frames.
class FrameDecoder {
public:
    void feed(ByteView bytes);

    // A complete body, a framing error (the stream is unusable afterwards),
    // or nullopt when more bytes are needed.
    std::optional<std::variant<std::string, FramingError>> next();

    std::size_t buffered() const { return buffer_.size(); }

private:
    std::deque<std::uint8_t> buffer_;
    bool failed_ = false;
};

// Number of responses a well-behaved peer owes for `bytes`: one per complete
// frame, plus one if an oversize header is reached.
std::size_t expected_responses(ByteView bytes);

struct Request {
    std::uint64_t seq = 0;
    std::string action;
    json payload = json::object();
};

struct Response {
    std::uint64_t seq = 0;
    std::string action;
    bool allowed = false;
    std::string deny_reason;
    json result = json::object();

    bool framing_error() const { return deny_reason.rfind(reason::framing_error, 0) == 0; }
};

std::string encode_request(const Request& r);
std::string encode_response(const Response& r);
// Throws std::invalid_argument on a body that is not a well-formed request.
Request decode_request(std::string_view body);
Response decode_response(std::string_view body);

/// Server-side action handler. Implementations serialize internally.
class Endpoint {
public:
    virtual ~Endpoint() = default;
    virtual Response handle(const Request& request) = 0;
};

/// Guest agent behind the wire protocol. All connections share one agent and
/// requests are processed one at a time in arrival order.
class GuestService final : public Endpoint {
public:
    explicit GuestService(agent::GuestAgent agent) : agent_(std::move(agent)) {}

    Response handle(const Request& request) override;

    // Runs `f` with exclusive access to the agent.
    template <typename F>
    auto with_agent(F&& f)
    {
        std::lock_guard lock(mutex_);
        return f(agent_);
    }

private:
    std::mutex mutex_;
    agent::GuestAgent agent_;
};

/// Verifier and key-release service on the same framing.
/// Actions: verify, register_key, release_key.
class AttestationEndpoint final : public Endpoint {
public:
    AttestationEndpoint(attest::AttestationService& verifier, attest::KeyReleaseService& kms)
        : verifier_(verifier), kms_(kms)
    {}

    Response handle(const Request& request) override;

private:
    std::mutex mutex_;
    attest::AttestationService& verifier_;
    attest::KeyReleaseService& kms_;
};

/// One ordered stream into an endpoint. Never throws on input bytes.
class Connection {
public:
    explicit Connection(Endpoint& endpoint) : endpoint_(endpoint) {}

    // Returns encoded response frames for every complete frame in `bytes`.
    Bytes receive(ByteView bytes);

    bool closed() const { return closed_; }

private:
    Endpoint& endpoint_;
    FrameDecoder decoder_;
    std::optional<std::uint64_t> last_seq_;
    bool closed_ = false;
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Client side of a connection.
class Transport {
public:
    virtual ~Transport() = default;
    // Writes raw bytes and returns the responses they provoke. Throws
    // TransportError when the peer is unreachable.
    virtual std::vector<Response> exchange(ByteView bytes) = 0;
};

class InProcessTransport final : public Transport {
public:
    explicit InProcessTransport(Endpoint& endpoint) : connection_(endpoint) {}
    std::vector<Response> exchange(ByteView bytes) override;

private:
    Connection connection_;
};

class TcpTransport final : public Transport {
public:
    TcpTransport(const std::string& host, std::uint16_t port);
    ~TcpTransport() override;
    TcpTransport(const TcpTransport&) = delete;
    TcpTransport& operator=(const TcpTransport&) = delete;

    std::vector<Response> exchange(ByteView bytes) override;

private:
    int fd_ = -1;
    FrameDecoder decoder_;
};

/// Accepts TCP connections and runs each on its own thread.
class TcpServer {
public:
    // Port 0 picks an ephemeral port.
    TcpServer(Endpoint& endpoint, const std::string& host, std::uint16_t port);
    ~TcpServer();
    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;

    std::uint16_t port() const { return port_; }
    void stop();

private:
    void accept_loop();
    void serve(int fd);

    Endpoint& endpoint_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;
    std::mutex workers_mutex_;
    std::vector<std::thread> workers_;
    std::vector<int> client_fds_;
};

/// Convenience wrapper assigning increasing sequence numbers.
class Client {
public:
    explicit Client(Transport& transport) : transport_(transport) {}

    Response call(const std::string& action, const json& payload);
    Response call(const Request& request);

    std::uint64_t next_seq() const { return next_seq_; }

private:
    Transport& transport_;
    std::uint64_t next_seq_ = 1;
};

// Payload for the host-side attach_device action.
json attach_payload(const std::string& target, const storage::VerityImage& image);

} // namespace parma::bridge
