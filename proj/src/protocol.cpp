/*
 * Copyright 2026 The autolrs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "autolrs/protocol.hpp"

#include <cmath>
#include <optional>

#include "autolrs/errors.hpp"

namespace autolrs::protocol {

std::string to_string(DecodeErrorKind kind) {
    switch (kind) {
        case DecodeErrorKind::Malformed: return "malformed";
        case DecodeErrorKind::UnknownType: return "unknown type";
        case DecodeErrorKind::MissingField: return "missing field";
        case DecodeErrorKind::InvalidField: return "invalid field";
    }
    return "unknown";
}

namespace {

Json body(const Message& message) {
    Json j;
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, Hello>) {
                j["type"] = "hello";
                j["protocol_version"] = m.protocol_version;
                j["config_overrides"] = m.config_overrides;
            } else if constexpr (std::is_same_v<M, LossReport>) {
                j["type"] = "loss";
                j["step"] = m.step;
                if (std::isfinite(m.value)) {
                    j["value"] = m.value;
                } else {
                    j["diverged"] = true;
                }
                j["source"] = to_string(m.source);
            } else if constexpr (std::is_same_v<M, CommandDone>) {
                j["type"] = "done";
                j["command_id"] = m.command_id;
            } else if constexpr (std::is_same_v<M, TrainerError>) {
                j["type"] = "error";
                j["message"] = m.message;
            } else if constexpr (std::is_same_v<M, Stop>) {
                j["type"] = "stop";
            } else if constexpr (std::is_same_v<M, SetLr>) {
                j["type"] = "set_lr";
                j["lr"] = m.lr;
            } else if constexpr (std::is_same_v<M, SaveCkpt>) {
                j["type"] = "save_ckpt";
            } else if constexpr (std::is_same_v<M, RestoreCkpt>) {
                j["type"] = "restore_ckpt";
            } else if constexpr (std::is_same_v<M, Train>) {
                j["type"] = "train";
                j["steps"] = m.steps;
                j["loss_source"] = to_string(m.loss_source);
                j["report_every"] = m.report_every;
                j["command_id"] = m.command_id;
            } else if constexpr (std::is_same_v<M, EvalConfig>) {
                j["type"] = "eval_config";
                j["val_minibatches"] = m.val_minibatches;
                j["val_every"] = m.val_every;
            } else {
                j["type"] = "shutdown";
                j["reason"] = m.reason;
            }
        },
        message);
    return j;
}

struct FieldError {
    DecodeError error;
};

const Json& field(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw FieldError{{DecodeErrorKind::MissingField, key}};
    }
    return *it;
}

[[noreturn]] void invalid(const char* key, const char* why) {
    throw FieldError{{DecodeErrorKind::InvalidField, std::string(key) + ": " + why}};
}

std::int64_t get_count(const Json& j, const char* key, std::int64_t min_value) {
    const Json& v = field(j, key);
    if (!v.is_number_integer()) invalid(key, "expected integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
        invalid(key, "out of range");
    }
    const auto n = v.get<std::int64_t>();
    if (n < min_value) invalid(key, "out of range");
    return n;
}

double get_real(const Json& j, const char* key) {
    const Json& v = field(j, key);
    if (!v.is_number()) invalid(key, "expected number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) invalid(key, "non-finite number");
    return x;
}

std::string get_string(const Json& j, const char* key) {
    const Json& v = field(j, key);
    if (!v.is_string()) invalid(key, "expected string");
    return v.get<std::string>();
}

LossSource get_source(const Json& j, const char* key) {
    const std::string s = get_string(j, key);
    if (s == "train") return LossSource::Train;
    if (s == "validation") return LossSource::Validation;
    invalid(key, "expected \"train\" or \"validation\"");
}

Message parse_body(const Json& j, const std::string& type) {
    if (type == "hello") {
        Hello h;
        h.protocol_version = get_string(j, "protocol_version");
        if (auto it = j.find("config_overrides"); it != j.end()) {
            if (!it->is_object()) invalid("config_overrides", "expected object");
            h.config_overrides = *it;
        }
        return h;
    }
    if (type == "loss") {
        LossReport r;
        r.step = get_count(j, "step", 0);
        auto div = j.find("diverged");
        if (div != j.end() && div->is_boolean() && div->get<bool>()) {
            r.value = std::numeric_limits<double>::infinity();
        } else {
            r.value = get_real(j, "value");
        }
        r.source = get_source(j, "source");
        return r;
    }
    if (type == "done") return CommandDone{get_count(j, "command_id", 0)};
    if (type == "error") return TrainerError{get_string(j, "message")};
    if (type == "stop") return Stop{};
    if (type == "set_lr") {
        const double lr = get_real(j, "lr");
        if (lr < 0.0) invalid("lr", "negative");
        return SetLr{lr};
    }
    if (type == "save_ckpt") return SaveCkpt{};
    if (type == "restore_ckpt") return RestoreCkpt{};
    if (type == "train") {
        Train t;
        t.steps = get_count(j, "steps", 1);
        t.loss_source = get_source(j, "loss_source");
        t.report_every = get_count(j, "report_every", 0);
        t.command_id = get_count(j, "command_id", 0);
        return t;
    }
    if (type == "eval_config") {
        return EvalConfig{get_count(j, "val_minibatches", 0), get_count(j, "val_every", 0)};
    }
    if (type == "shutdown") return Shutdown{get_string(j, "reason")};
    throw FieldError{{DecodeErrorKind::UnknownType, type}};
}

}  // namespace

std::string encode(const Message& message) {
    std::string line = body(message).dump(-1, ' ', false, Json::error_handler_t::replace);
    line.push_back('\n');
    return line;
}

std::string encode(const TrainerMessage& message) { return encode(to_message(message)); }
std::string encode(const ControllerMessage& message) { return encode(to_message(message)); }

DecodeResult decode(std::string_view line, std::size_t max_bytes) {
    if (line.size() > max_bytes) {
        return DecodeError{DecodeErrorKind::Malformed, "line exceeds length limit"};
    }
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    Json j = Json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded()) return DecodeError{DecodeErrorKind::Malformed, "invalid JSON"};
    if (!j.is_object()) return DecodeError{DecodeErrorKind::Malformed, "expected a JSON object"};
    auto type = j.find("type");
    if (type == j.end()) return DecodeError{DecodeErrorKind::MissingField, "type"};
    if (!type->is_string()) return DecodeError{DecodeErrorKind::InvalidField, "type: expected string"};
    try {
        return parse_body(j, type->get<std::string>());
    } catch (const FieldError& e) {
        return e.error;
    } catch (const nlohmann::json::exception& e) {
        return DecodeError{DecodeErrorKind::Malformed, e.what()};
    }
}

}  // namespace autolrs::protocol
