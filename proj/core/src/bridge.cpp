// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/bridge.hpp"

#include "parma/codec.hpp"

#include <stdexcept>

namespace parma::bridge {

namespace {

std::uint32_t read_be32(const std::deque<std::uint8_t>& b)
{
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
           std::uint32_t{b[3]};
}

std::uint32_t read_be32(ByteView b, std::size_t at)
{
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

Response deny(std::uint64_t seq, std::string action, std::string_view why)
{
    Response r;
    r.seq = seq;
    r.action = std::move(action);
    r.deny_reason = std::string(why);
    return r;
}

template <std::size_t N>
ByteArray<N> hex_field(const json& j, const char* key)
{
    return array_from_hex<N>(j.at(key).get<std::string>());
}

Bytes b64_field(const json& j, const char* key)
{
    return base64_decode(j.at(key).get<std::string>());
}

} // namespace

Bytes encode_frame(std::string_view body)
{
    if (body.size() > max_frame_size)
        throw std::length_error("frame body exceeds maximum size");
    const auto n = static_cast<std::uint32_t>(body.size());
    Bytes out = {static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
                 static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

void FrameDecoder::feed(ByteView bytes)
{
    if (!failed_)
        buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<std::variant<std::string, FramingError>> FrameDecoder::next()
{
    if (failed_ || buffer_.size() < frame_header_size)
        return std::nullopt;
    const std::uint32_t length = read_be32(buffer_);
    if (length > max_frame_size) {
        failed_ = true;
        buffer_.clear();
        return FramingError{"frame length " + std::to_string(length) + " exceeds limit"};
    }
    if (buffer_.size() < frame_header_size + length)
        return std::nullopt;
    std::string body(buffer_.begin() + frame_header_size,
                     buffer_.begin() + frame_header_size + length);
    buffer_.erase(buffer_.begin(), buffer_.begin() + frame_header_size + length);
    return body;
}

std::size_t expected_responses(ByteView bytes)
{
    std::size_t count = 0;
    std::size_t pos = 0;
    while (bytes.size() - pos >= frame_header_size) {
        const std::uint32_t length = read_be32(bytes, pos);
        if (length > max_frame_size)
            return count + 1;
        if (bytes.size() - pos - frame_header_size < length)
            break;
        ++count;
        pos += frame_header_size + length;
    }
    return count;
}

std::string encode_request(const Request& r)
{
    return json{{"seq", r.seq}, {"kind", "request"}, {"action", r.action}, {"payload", r.payload}}
        .dump();
}

std::string encode_response(const Response& r)
{
    json j{{"seq", r.seq},
           {"kind", "response"},
           {"action", r.action},
           {"allowed", r.allowed},
           {"result", r.result}};
    j["deny_reason"] = r.allowed ? json(nullptr) : json(r.deny_reason);
    return j.dump();
}

Request decode_request(std::string_view body)
{
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw std::invalid_argument("request is not a JSON object");
    for (const auto& [key, value] : j.items())
        if (key != "seq" && key != "kind" && key != "action" && key != "payload")
            throw std::invalid_argument("unexpected field " + key);
    if (!j.contains("seq") || !j["seq"].is_number_unsigned())
        throw std::invalid_argument("seq must be an unsigned integer");
    if (j.value("kind", json()) != "request")
        throw std::invalid_argument("kind must be request");
    if (!j.contains("action") || !j["action"].is_string())
        throw std::invalid_argument("action must be a string");
    Request r;
    r.seq = j["seq"].get<std::uint64_t>();
    r.action = j["action"].get<std::string>();
    r.payload = j.value("payload", json::object());
    return r;
}

Response decode_response(std::string_view body)
{
    try {
        json j = json::parse(body);
        if (j.at("kind") != "response")
            throw std::invalid_argument("kind must be response");
        Response r;
        r.seq = j.at("seq").get<std::uint64_t>();
        r.action = j.at("action").get<std::string>();
        r.allowed = j.at("allowed").get<bool>();
        if (j.at("deny_reason").is_string())
            r.deny_reason = j["deny_reason"].get<std::string>();
        r.result = j.value("result", json::object());
        return r;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed response: ") + e.what());
    }
}

Response GuestService::handle(const Request& request)
{
    if (request.action == "attach_device") {
        try {
            const auto& p = request.payload;
            auto image = std::make_shared<const storage::VerityImage>(
                storage::load_image(b64_field(p, "data"), b64_field(p, "sidecar")));
            const auto target = p.at("target").get<std::string>();
            std::lock_guard lock(mutex_);
            agent_.attach_device(target, std::move(image));
        } catch (const std::exception&) {
            return deny(request.seq, request.action, reason::malformed_message);
        }
        Response r;
        r.seq = request.seq;
        r.action = request.action;
        r.allowed = true;
        return r;
    }

    const auto action = engine::action_from_name(request.action);
    if (!action)
        return deny(request.seq, request.action, reason::unknown_action);
    const auto enforcement = engine::request_from_json(*action, request.payload);

    std::lock_guard lock(mutex_);
    const auto out = agent_.handle_request(enforcement);
    Response r;
    r.seq = request.seq;
    r.action = request.action;
    r.allowed = out.allowed;
    r.deny_reason = out.deny_reason;
    r.result = out.result;
    r.result["outcome"] = agent::outcome_name(out.outcome);
    return r;
}

Response AttestationEndpoint::handle(const Request& request)
{
    const auto& p = request.payload;
    Response r;
    r.seq = request.seq;
    r.action = request.action;
    try {
        std::lock_guard lock(mutex_);
        if (request.action == "verify") {
            const auto report = attest::AttestationReport::parse(b64_field(p, "report"));
            const auto chain = attest::CertChain::parse(b64_field(p, "chain"));
            const auto& e = p.at("expected");
            attest::ExpectedClaims expected;
            for (const auto& m : e.at("measurements"))
                expected.measurements.push_back(array_from_hex<48>(m.get<std::string>()));
            expected.host_data = hex_field<32>(e, "host_data");
            expected.runtime_claim = b64_field(e, "runtime_claim");
            if (e.contains("policy_digest"))
                expected.policy_digest = hex_field<64>(e, "policy_digest");
            const auto out = verifier_.verify_report(report, chain, expected);
            r.result["checks"] = {{"chain", out.checks.chain},
                                  {"signature", out.checks.signature},
                                  {"measurement", out.checks.measurement},
                                  {"host_data", out.checks.host_data},
                                  {"report_data", out.checks.report_data}};
            if (out.token) {
                r.allowed = true;
                r.result["token"] = out.token->to_json();
            } else {
                r.deny_reason = std::string(attest::rejection_name(*out.rejection));
            }
        } else if (request.action == "register_key") {
            attest::KeyReleasePolicy policy;
            policy.expected_host_data = hex_field<32>(p, "host_data");
            for (const auto& m : p.at("measurements"))
                policy.allowed_measurements.insert(array_from_hex<48>(m.get<std::string>()));
            kms_.register_key(p.at("key_id").get<std::string>(), b64_field(p, "secret"),
                              std::move(policy));
            r.allowed = true;
        } else if (request.action == "release_key") {
            const auto token = attest::AttestationToken::from_json(p.at("token"));
            const auto out = kms_.release_key(p.at("key_id").get<std::string>(), token,
                                              b64_field(p, "wrapping_key"));
            if (out.wrapped_key) {
                r.allowed = true;
                r.result["wrapped_key"] = base64_encode(*out.wrapped_key);
            } else {
                r.deny_reason = std::string(attest::denial_name(*out.denial));
            }
        } else {
            return deny(request.seq, request.action, reason::unknown_action);
        }
    } catch (const std::exception&) {
        return deny(request.seq, request.action, reason::malformed_message);
    }
    return r;
}

Bytes Connection::receive(ByteView bytes)
{
    Bytes out;
    if (closed_)
        return out;
    decoder_.feed(bytes);
    while (auto item = decoder_.next()) {
        if (auto* err = std::get_if<FramingError>(&*item)) {
            append(out, encode_frame(encode_response(
                            deny(0, "", std::string(reason::framing_error) + ": " + err->detail))));
            closed_ = true;
            break;
        }
        const auto& body = std::get<std::string>(*item);
        Response response;
        try {
            const Request request = decode_request(body);
            if (last_seq_ && request.seq <= *last_seq_) {
                response = deny(request.seq, request.action, reason::stale_sequence);
            } else {
                last_seq_ = request.seq;
                response = endpoint_.handle(request);
                response.seq = request.seq;
            }
        } catch (const agent::AgentFault& fault) {
            response = deny(0, "", std::string("agent fault: ") + fault.what());
            closed_ = true;
        } catch (const std::exception&) {
            response = deny(0, "", reason::malformed_message);
        }
        append(out, encode_frame(encode_response(response)));
        if (closed_)
            break;
    }
    return out;
}

std::vector<Response> InProcessTransport::exchange(ByteView bytes)
{
    const Bytes raw = connection_.receive(bytes);
    FrameDecoder decoder;
    decoder.feed(raw);
    std::vector<Response> out;
    while (auto item = decoder.next())
        out.push_back(decode_response(std::get<std::string>(*item)));
    return out;
}

Response Client::call(const std::string& action, const json& payload)
{
    return call(Request{next_seq_, action, payload});
}

Response Client::call(const Request& request)
{
    next_seq_ = std::max(next_seq_, request.seq + 1);
    const auto responses = transport_.exchange(encode_frame(encode_request(request)));
    if (responses.empty())
        throw TransportError("no response for seq " + std::to_string(request.seq));
    return responses.front();
}

json attach_payload(const std::string& target, const storage::VerityImage& image)
{
    return {{"target", target},
            {"data", base64_encode(image.data)},
            {"sidecar", base64_encode(storage::serialize_sidecar(image))}};
}

} // namespace parma::bridge
