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

#pragma once

// Newline-delimited JSON codec. Every message is one line of UTF-8 JSON whose
// first key is "type"; fields follow in a fixed order. Unknown fields are
// ignored on decode.

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>

#include "autolrs/messages.hpp"

namespace autolrs::protocol {

inline constexpr std::size_t kMaxLineBytes = 1 << 20;

enum class DecodeErrorKind { Malformed, UnknownType, MissingField, InvalidField };

std::string to_string(DecodeErrorKind kind);

struct DecodeError {
    DecodeErrorKind kind;
    std::string detail;
};

using DecodeResult = std::variant<Message, DecodeError>;

/// Canonical encoding, terminated by '\n'.
std::string encode(const Message& message);
std::string encode(const TrainerMessage& message);
std::string encode(const ControllerMessage& message);

/// Total: any byte sequence yields a message or a DecodeError. A single
/// trailing "\n" or "\r\n" is accepted; lines longer than max_bytes are
/// rejected as malformed.
DecodeResult decode(std::string_view line, std::size_t max_bytes = kMaxLineBytes);

}  // namespace autolrs::protocol
