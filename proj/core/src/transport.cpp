// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/bridge.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace parma::bridge {

namespace {

struct AddrInfo {
    addrinfo* head = nullptr;
    ~AddrInfo()
    {
        if (head)
            freeaddrinfo(head);
    }
};

AddrInfo resolve(const std::string& host, std::uint16_t port, bool passive)
{
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    if (passive)
        hints.ai_flags = AI_PASSIVE;
    AddrInfo out;
    const std::string service = std::to_string(port);
    const int rc = getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints,
                               &out.head);
    if (rc != 0)
        throw TransportError("cannot resolve " + host + ": " + gai_strerror(rc));
    return out;
}

bool send_all(int fd, ByteView bytes)
{
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            return false;
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

void set_nodelay(int fd)
{
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

} // namespace

TcpTransport::TcpTransport(const std::string& host, std::uint16_t port)
{
    const AddrInfo info = resolve(host, port, false);
    for (addrinfo* a = info.head; a; a = a->ai_next) {
        const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0)
            continue;
        if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
            fd_ = fd;
            set_nodelay(fd_);
            return;
        }
        ::close(fd);
    }
    throw TransportError("cannot connect to " + host + ":" + std::to_string(port));
}

TcpTransport::~TcpTransport()
{
    if (fd_ >= 0)
        ::close(fd_);
}

std::vector<Response> TcpTransport::exchange(ByteView bytes)
{
    if (!send_all(fd_, bytes))
        throw TransportError(std::string("send failed: ") + std::strerror(errno));
    const std::size_t want = expected_responses(bytes);
    std::vector<Response> out;
    std::array<std::uint8_t, 65536> buf{};
    while (out.size() < want) {
        while (auto item = decoder_.next()) {
            const auto* body = std::get_if<std::string>(&*item);
            if (!body)
                throw TransportError("server sent an oversize frame");
            out.push_back(decode_response(*body));
        }
        if (out.size() >= want)
            break;
        const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0) {
            if (out.empty())
                throw TransportError("connection closed by peer");
            break;
        }
        decoder_.feed(ByteView(buf.data(), static_cast<std::size_t>(n)));
    }
    return out;
}

TcpServer::TcpServer(Endpoint& endpoint, const std::string& host, std::uint16_t port)
    : endpoint_(endpoint)
{
    const AddrInfo info = resolve(host, port, true);
    for (addrinfo* a = info.head; a; a = a->ai_next) {
        const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0)
            continue;
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 16) == 0) {
            listen_fd_ = fd;
            break;
        }
        ::close(fd);
    }
    if (listen_fd_ < 0)
        throw TransportError("cannot listen on " + host + ":" + std::to_string(port));

    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    if (addr.ss_family == AF_INET)
        port_ = ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    else
        port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);

    acceptor_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer()
{
    stop();
}

void TcpServer::stop()
{
    if (stopping_.exchange(true))
        return;
    if (acceptor_.joinable())
        acceptor_.join();
    ::close(listen_fd_);
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(workers_mutex_);
        for (int fd : client_fds_)
            ::shutdown(fd, SHUT_RDWR);
        workers.swap(workers_);
    }
    for (auto& t : workers)
        t.join();
}

void TcpServer::accept_loop()
{
    while (!stopping_) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        if (::poll(&pfd, 1, 100) <= 0)
            continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0)
            continue;
        set_nodelay(fd);
        std::lock_guard lock(workers_mutex_);
        client_fds_.push_back(fd);
        workers_.emplace_back([this, fd] { serve(fd); });
    }
}

void TcpServer::serve(int fd)
{
    Connection connection(endpoint_);
    std::array<std::uint8_t, 65536> buf{};
    while (!connection.closed()) {
        const ssize_t n = ::recv(fd, buf.data(), buf.size(), 0);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            break;
        const Bytes out = connection.receive(ByteView(buf.data(), static_cast<std::size_t>(n)));
        if (!out.empty() && !send_all(fd, out))
            break;
    }
    ::shutdown(fd, SHUT_RDWR);
    std::lock_guard lock(workers_mutex_);
    std::erase(client_fds_, fd);
    ::close(fd);
}

} // namespace parma::bridge
