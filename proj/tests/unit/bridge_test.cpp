// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/bridge.hpp"
#include "parma/fuzz.hpp"
#include "parma/scenario.hpp"

#include <gtest/gtest.h>

#include <random>
#include <thread>

namespace {

using namespace parma;
using namespace parma::bridge;

agent::GuestAgent boot_world(std::uint64_t seed)
{
    const auto world = fuzz::generate_world(seed);
    return agent::GuestAgent::boot(world.policy, policy::measure_policy(world.policy).host_data());
}

Bytes frame_of(const Request& r)
{
    return encode_frame(encode_request(r));
}

TEST(Framing, HeaderIsBigEndianLength)
{
    const auto f = encode_frame("abc");
    EXPECT_EQ(to_hex(f), "00000003616263");
    EXPECT_THROW(encode_frame(std::string(max_frame_size + 1, 'x')), std::length_error);
    EXPECT_NO_THROW(encode_frame(std::string(max_frame_size, 'x')));
}

TEST(Framing, DecoderHandlesByteByByteDelivery)
{
    Bytes stream = encode_frame("first");
    append(stream, encode_frame(""));
    append(stream, encode_frame("third"));
    FrameDecoder d;
    std::vector<std::string> bodies;
    for (auto b : stream) {
        d.feed(ByteView(&b, 1));
        while (auto item = d.next())
            bodies.push_back(std::get<std::string>(*item));
    }
    EXPECT_EQ(bodies, (std::vector<std::string>{"first", "", "third"}));
    EXPECT_EQ(d.buffered(), 0u);
    EXPECT_EQ(expected_responses(stream), 3u);
}

TEST(Framing, OversizeHeaderIsAFramingError)
{
    FrameDecoder d;
    const Bytes header = {0x00, 0x10, 0x00, 0x01};
    d.feed(header);
    auto item = d.next();
    ASSERT_TRUE(item);
    EXPECT_TRUE(std::holds_alternative<FramingError>(*item));
    EXPECT_EQ(expected_responses(header), 1u);
}

TEST(Messages, RequestAndResponseRoundTrip)
{
    const Request r{7, "mount_device", {{"target", "/dev/sda"}}};
    const auto back = decode_request(encode_request(r));
    EXPECT_EQ(back.seq, 7u);
    EXPECT_EQ(back.action, "mount_device");
    EXPECT_EQ(back.payload, r.payload);
    const auto j = nlohmann::json::parse(encode_request(r));
    EXPECT_EQ(j.at("kind"), "request");

    Response ok{3, "get_properties", true, "", {{"x", 1}}};
    const auto jr = nlohmann::json::parse(encode_response(ok));
    EXPECT_TRUE(jr.at("deny_reason").is_null());
    EXPECT_EQ(jr.at("kind"), "response");
    EXPECT_EQ(decode_response(encode_response(ok)).result, ok.result);

    EXPECT_THROW(decode_request("[]"), std::invalid_argument);
    EXPECT_THROW(decode_request(R"({"seq":1,"kind":"response","action":"x","payload":{}})"),
                 std::invalid_argument);
    EXPECT_THROW(decode_request(R"({"seq":-1,"kind":"request","action":"x","payload":{}})"),
                 std::invalid_argument);
}

TEST(Connection, SequenceMustIncrease)
{
    GuestService guest(boot_world(1));
    InProcessTransport t(guest);
    auto r1 = t.exchange(frame_of({5, "get_properties", {}}));
    ASSERT_EQ(r1.size(), 1u);
    EXPECT_EQ(r1[0].seq, 5u);
    auto r2 = t.exchange(frame_of({5, "get_properties", {}}));
    ASSERT_EQ(r2.size(), 1u);
    EXPECT_FALSE(r2[0].allowed);
    EXPECT_EQ(r2[0].deny_reason, reason::stale_sequence);
    auto r3 = t.exchange(frame_of({4, "get_properties", {}}));
    EXPECT_EQ(r3[0].deny_reason, reason::stale_sequence);
    auto r4 = t.exchange(frame_of({6, "no_such_action", {}}));
    EXPECT_EQ(r4[0].deny_reason, reason::unknown_action);
}

TEST(Connection, MalformedBodiesAndOversizeFrames)
{
    GuestService guest(boot_world(2));
    InProcessTransport t(guest);
    auto r = t.exchange(encode_frame("{not json"));
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].deny_reason, reason::malformed_message);

    Bytes stream = frame_of({1, "get_properties", {}});
    append(stream, Bytes{0xff, 0xff, 0xff, 0xff});
    append(stream, frame_of({2, "get_properties", {}}));
    r = t.exchange(stream);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_TRUE(r[1].framing_error());
    EXPECT_TRUE(t.exchange(frame_of({3, "get_properties", {}})).empty());
}

TEST(Connection, RandomFramesNeverBreakTheService)
{
    GuestService guest(boot_world(3));
    std::mt19937_64 rng(99);
    auto below = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    const std::vector<std::string> actions = {"mount_device", "create_container", "mount_overlay",
                                              "signal_process", "mount_scratch", "attach_device",
                                              "get_properties", "bogus"};
    auto transport = std::make_unique<InProcessTransport>(guest);
    std::uint64_t seq = 1;
    std::size_t responses = 0, expected = 0;
    for (int i = 0; i < 10000; ++i) {
        Bytes frame;
        switch (below(5)) {
        case 0: {
            Bytes body(below(64));
            for (auto& b : body)
                b = static_cast<std::uint8_t>(below(256));
            frame = encode_frame(to_string(body));
            break;
        }
        case 1: {
            nlohmann::json payload;
            const auto shape = below(4);
            if (shape == 0)
                payload = {{"target", "/dev/sd" + std::string(1, char('a' + below(3)))}};
            else if (shape == 1)
                payload = {{"target", below(100)}, {"encrypted", "maybe"}};
            else if (shape == 2)
                payload = nlohmann::json::array({1, 2, 3});
            frame = frame_of({seq++, actions[below(actions.size())], payload});
            break;
        }
        case 2: {
            std::string body = encode_request({seq++, actions[below(actions.size())], {}});
            body.resize(below(body.size() + 1));
            frame = encode_frame(body);
            break;
        }
        case 3:
            frame = frame_of({below(3) == 0 ? 1 : seq++, "get_properties", {}});
            break;
        default:
            if (below(50) == 0) {
                frame = {0x7f, 0x00, 0x00, 0x00};
            } else {
                frame = encode_frame(R"({"seq":)" + std::to_string(seq++) +
                                     R"(,"kind":"request","action":"mount_device","payload":{"device_hash":")" +
                                     std::string(64, 'f') + R"(","target":"/dev/x"}})");
            }
        }
        expected += expected_responses(frame);
        std::vector<Response> got;
        ASSERT_NO_THROW(got = transport->exchange(frame));
        responses += got.size();
        if (!got.empty() && got.back().framing_error()) {
            transport = std::make_unique<InProcessTransport>(guest);
            seq = 1;
        }
    }
    EXPECT_EQ(responses, expected);
    EXPECT_TRUE(guest.with_agent([](agent::GuestAgent& a) { return agent::safety_oracle(a.state()); }));
}

TEST(GuestService, AttachDeviceThenMount)
{
    const auto image = scenario::make_image("layer", {0x42, 2});
    policy::ExecutionPolicy p;
    policy::ContainerTemplate t;
    t.id = "t";
    t.layers = {policy::LayerDigest{image.root_hash}};
    t.command = {"/x"};
    p.containers = {t};
    GuestService guest(agent::GuestAgent::boot(p, policy::measure_policy(p).host_data()));
    InProcessTransport transport(guest);
    Client client(transport);
    const auto attach = client.call("attach_device", attach_payload("/dev/sda", image));
    EXPECT_TRUE(attach.allowed) << attach.deny_reason;
    const auto mount = client.call("mount_device", {{"device_hash", to_hex(image.root_hash)}, {"target", "/dev/sda"}});
    EXPECT_TRUE(mount.allowed) << mount.deny_reason;
    EXPECT_EQ(mount.result.at("outcome"), "allowed");
    const auto bad = client.call("attach_device", {{"target", "/dev/sdb"}, {"data", "!!"}});
    EXPECT_FALSE(bad.allowed);
    EXPECT_EQ(client.next_seq(), 4u);
}

TEST(Tcp, ConcurrentClientsShareOneGuest)
{
    GuestService guest(boot_world(4));
    TcpServer server(guest, "127.0.0.1", 0);
    ASSERT_NE(server.port(), 0);
    std::vector<std::thread> clients;
    std::atomic<int> allowed{0};
    for (int c = 0; c < 4; ++c) {
        clients.emplace_back([&, c] {
            TcpTransport transport("127.0.0.1", server.port());
            Client client(transport);
            for (int i = 0; i < 25; ++i) {
                const auto r = client.call("mount_scratch",
                                           {{"target", "/scratch/" + std::to_string(c * 100 + i)},
                                            {"encrypted", true}});
                allowed += r.allowed ? 1 : 0;
            }
        });
    }
    for (auto& t : clients)
        t.join();
    EXPECT_EQ(allowed.load(), 100);
    EXPECT_EQ(guest.with_agent([](agent::GuestAgent& a) { return a.state().store.scratch.size(); }), 100u);

    TcpTransport raw("127.0.0.1", server.port());
    const auto r = raw.exchange(Bytes{0xff, 0xff, 0xff, 0xff});
    ASSERT_EQ(r.size(), 1u);
    EXPECT_TRUE(r[0].framing_error());
    server.stop();
    EXPECT_THROW(TcpTransport("127.0.0.1", server.port()), TransportError);
}

TEST(AttestationEndpoint, VerifyAndReleaseOverTheWire)
{
    const auto vendor = attest::MockVendor::from_seed(crypto::sha256(as_bytes("v")));
    attest::MockPsp psp(crypto::sha256(as_bytes("chip")), 2, vendor);
    psp.launch_update(Bytes(attest::page_size, 1), 0);
    const Digest32 host_data = crypto::sha256(as_bytes("hd"));
    const auto measurement = psp.launch_finalize(host_data);
    const auto wrapping = crypto::RsaKeyPair::generate();
    attest::GuestChannel channel(psp.guest_channel_key());
    const auto report = psp.issue_report(channel.seal_request(crypto::sha512(wrapping.public_der())));

    attest::AttestationService verifier(crypto::Ed25519Key::from_seed(crypto::sha256(as_bytes("s"))),
                                        "svc", vendor.root_public_key());
    attest::KeyReleaseService kms(verifier.public_key());
    AttestationEndpoint endpoint(verifier, kms);
    InProcessTransport transport(endpoint);
    Client client(transport);

    const nlohmann::json expected = {{"measurements", {to_hex(measurement)}},
                                     {"host_data", to_hex(host_data)},
                                     {"runtime_claim", base64_encode(wrapping.public_der())}};
    const auto verdict = client.call("verify", {{"report", base64_encode(report.serialize())},
                                                {"chain", base64_encode(psp.cert_chain().serialize())},
                                                {"expected", expected}});
    ASSERT_TRUE(verdict.allowed) << verdict.deny_reason;
    EXPECT_TRUE(verdict.result.at("checks").at("chain").get<bool>());

    const Bytes secret = {1, 2, 3, 4};
    ASSERT_TRUE(client.call("register_key", {{"key_id", "k"},
                                             {"secret", base64_encode(secret)},
                                             {"host_data", to_hex(host_data)},
                                             {"measurements", {to_hex(measurement)}}})
                    .allowed);
    const auto release = client.call("release_key", {{"key_id", "k"},
                                                     {"token", verdict.result.at("token")},
                                                     {"wrapping_key", base64_encode(wrapping.public_der())}});
    ASSERT_TRUE(release.allowed) << release.deny_reason;
    EXPECT_EQ(wrapping.decrypt(base64_decode(release.result.at("wrapped_key").get<std::string>())), secret);

    const auto unknown = client.call("release_key", {{"key_id", "nope"},
                                                     {"token", verdict.result.at("token")},
                                                     {"wrapping_key", base64_encode(wrapping.public_der())}});
    EXPECT_EQ(unknown.deny_reason, "unknown_key");
    auto tampered = report.serialize();
    tampered[200] ^= 1;
    const auto bad = client.call("verify", {{"report", base64_encode(tampered)},
                                            {"chain", base64_encode(psp.cert_chain().serialize())},
                                            {"expected", expected}});
    EXPECT_EQ(bad.deny_reason, "bad_signature");
    EXPECT_EQ(client.call("verify", {{"report", "AAAA"}}).deny_reason, reason::malformed_message);
    EXPECT_EQ(client.call("reboot", {}).deny_reason, reason::unknown_action);
}

} // namespace
