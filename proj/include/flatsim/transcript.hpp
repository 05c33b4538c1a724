// Copyright 2026 The Flatsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "flatsim/bytes.hpp"
#include "flatsim/params.hpp"

// Message harness for the simulated workers. Every inter-worker transfer is
// an immutable, typed message appended to a transcript, so tests can audit
// exactly what crossed a trust boundary and inject faults in flight.

namespace flatsim {

// Logical worker id of the aggregation server.
inline constexpr std::uint32_t kServerId = 0xffffffffu;

enum class MessageType : std::uint8_t {
  kModelHashAnnounce = 1,
  kAttestationReport = 2,
  kAttestationVerdict = 3,
  kEncryptedUpdate = 4,
  kEncryptedGlobalModel = 5,
  kRejoinRequest = 6,
};

inline std::string_view message_type_name(MessageType t) {
  switch (t) {
    case MessageType::kModelHashAnnounce: return "model_hash_announce";
    case MessageType::kAttestationReport: return "attestation_report";
    case MessageType::kAttestationVerdict: return "attestation_verdict";
    case MessageType::kEncryptedUpdate: return "encrypted_update";
    case MessageType::kEncryptedGlobalModel: return "encrypted_global_model";
    case MessageType::kRejoinRequest: return "rejoin_request";
  }
  return "?";
}

// Setup traffic is recorded as round 0; training rounds start at 1.
struct Message {
  std::uint32_t round = 0;
  std::uint32_t sender = 0;
  std::uint32_t receiver = 0;
  MessageType type = MessageType::kModelHashAnnounce;
  Bytes payload;
};

// Fault-injection hook: may mutate the message in flight; returning false
// drops it (the receiver never sees it).
using MessageTap = std::function<bool(Message&)>;

inline std::string worker_name(std::uint32_t id) {
  if (id == kServerId) return "server";
  return "party" + std::to_string(id);
}

struct Transcript {
  std::vector<Message> messages;

  void record(Message m) { messages.push_back(std::move(m)); }

  // One line per message: round, sender, receiver, type, byte length.
  std::string to_lines() const {
    std::ostringstream out;
    for (const Message& m : messages) {
      out << m.round << ' ' << worker_name(m.sender) << ' ' << worker_name(m.receiver) << ' '
          << message_type_name(m.type) << ' ' << m.payload.size() << '\n';
    }
    return out.str();
  }
};

struct AuditResult {
  bool clean = true;
  std::string detail;
};

// Raw byte signature of a parameter vector: the concatenated f64 LE
// coordinates. Any message that embeds the plaintext vector, with or
// without framing, contains this substring.
inline Bytes plaintext_signature(const ParameterVector& v) {
  Bytes sig;
  sig.reserve(8 * v.size());
  for (double x : v) append_f64_le(sig, x);
  return sig;
}

// Scans every recorded message for every known plaintext parameter vector.
// A hit means an unencrypted parameter payload crossed a worker boundary.
inline AuditResult audit_transcript(const Transcript& transcript,
                                    const std::vector<Bytes>& plaintext_signatures) {
  for (std::size_t mi = 0; mi < transcript.messages.size(); ++mi) {
    const Message& m = transcript.messages[mi];
    for (const Bytes& sig : plaintext_signatures) {
      if (sig.empty() || sig.size() > m.payload.size()) continue;
      const auto hit =
          std::search(m.payload.begin(), m.payload.end(), sig.begin(), sig.end());
      if (hit != m.payload.end()) {
        std::ostringstream out;
        out << "message " << mi << " (round " << m.round << ", " << worker_name(m.sender)
            << " -> " << worker_name(m.receiver) << ", " << message_type_name(m.type)
            << ") carries a plaintext parameter vector of " << sig.size() << " bytes";
        return {false, out.str()};
      }
    }
  }
  return {true, ""};
}

}  // namespace flatsim
