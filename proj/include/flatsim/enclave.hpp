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

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "flatsim/bytes.hpp"
#include "flatsim/crypto.hpp"
#include "flatsim/errors.hpp"
#include "flatsim/rng.hpp"

// Software model of a trusted execution environment. An enclave holds a data
// blob and a code blob, advances through the lifecycle
// Created -> Loaded -> Initialized -> Removed, and is identified by a
// measurement: a digest over its length-prefixed content. Attestation is a
// MAC under a per-experiment root key, standing in for the hardware vendor's
// provisioning secret; the verifier holds the same root. Secret keys derived
// inside an enclave are reachable only through a handle that refuses
// serialization and dies with the enclave.

namespace flatsim {

enum class EnclavePhase : std::uint8_t { kCreated, kLoaded, kInitialized, kRemoved };

inline std::string_view enclave_phase_name(EnclavePhase p) {
  switch (p) {
    case EnclavePhase::kCreated: return "Created";
    case EnclavePhase::kLoaded: return "Loaded";
    case EnclavePhase::kInitialized: return "Initialized";
    case EnclavePhase::kRemoved: return "Removed";
  }
  return "?";
}

struct Measurement {
  Digest32 digest{};

  bool operator==(const Measurement&) const = default;
  std::string hex() const { return to_hex(digest); }
};

// Digest over len(data) || data || len(code) || code. The length prefixes
// make the encoding injective, so moving a byte between the blobs changes
// the measurement, not just changing a byte in place.
inline Measurement measure_content(ByteSpan data, ByteSpan code) {
  Bytes buf;
  buf.reserve(16 + data.size() + code.size());
  append_u64_le(buf, data.size());
  append_bytes(buf, data);
  append_u64_le(buf, code.size());
  append_bytes(buf, code);
  return Measurement{sha256(buf)};
}

class SecretKeyHandle;

namespace internal {
// Sole access path to handle key material; only envelope operations running
// "inside" the owning enclave call this.
const Key32& unwrap_secret(const SecretKeyHandle& handle);
}  // namespace internal

// Opaque reference to a secret key living inside an enclave. Copies share
// the underlying state; removing the enclave revokes them all.
class SecretKeyHandle {
 public:
  SecretKeyHandle() = default;

  bool valid() const { return state_ != nullptr && !state_->revoked; }

  // The secret half never leaves the enclave.
  Bytes serialize() const { throw ForbiddenError("secret key handles cannot be serialized"); }

 private:
  friend class Enclave;
  friend const Key32& internal::unwrap_secret(const SecretKeyHandle&);

  struct State {
    Key32 key{};
    bool revoked = false;
    ~State() { sodium_memzero(key.data(), key.size()); }
  };

  std::shared_ptr<State> state_;
};

namespace internal {
inline const Key32& unwrap_secret(const SecretKeyHandle& handle) {
  if (!handle.valid())
    throw LifecycleError("secret key unavailable: enclave removed or key never derived");
  return handle.state_->key;
}
}  // namespace internal

struct KeyDerivation {
  Bytes public_key;
  SecretKeyHandle secret;
};

// Wire format: "FLAT" | version u8=1 | signer_id u32 BE | measurement 32 |
// init_token 32 | pk_len u16 BE | pk.
struct AttestationReport {
  std::uint32_t signer_id = 0;
  Measurement measurement;
  Digest32 init_token{};
  Bytes enclave_pk;

  static constexpr std::array<std::uint8_t, 4> kMagic = {'F', 'L', 'A', 'T'};
  static constexpr std::uint8_t kVersion = 1;

  Bytes serialize() const {
    Bytes out;
    append_bytes(out, kMagic);
    append_u8(out, kVersion);
    append_u32_be(out, signer_id);
    append_bytes(out, measurement.digest);
    append_bytes(out, init_token);
    if (enclave_pk.size() > 0xffff) throw InvalidInputError("public key too long for report");
    append_u16_be(out, static_cast<std::uint16_t>(enclave_pk.size()));
    append_bytes(out, enclave_pk);
    return out;
  }

  static AttestationReport parse(ByteSpan bytes) {
    ByteReader r(bytes, "attestation report");
    r.expect_magic(kMagic, "FLAT");
    if (r.u8() != kVersion) throw ParseError("attestation report: unsupported version");
    AttestationReport rep;
    rep.signer_id = r.u32_be();
    rep.measurement.digest = r.take_array<32>();
    rep.init_token = r.take_array<32>();
    const std::uint16_t pk_len = r.u16_be();
    ByteSpan pk = r.take(pk_len);
    rep.enclave_pk.assign(pk.begin(), pk.end());
    r.expect_done();
    return rep;
  }

  // MAC input: measurement || enclave_pk || signer_id.
  Bytes mac_message() const {
    Bytes msg;
    append_bytes(msg, measurement.digest);
    append_bytes(msg, enclave_pk);
    append_u32_be(msg, signer_id);
    return msg;
  }
};

class Enclave {
 public:
  // A default-constructed enclave has an all-zero instance seed; create()
  // is the provisioning path that models per-instance hardware entropy.
  Enclave() = default;
  Enclave(const Enclave&) = delete;
  Enclave& operator=(const Enclave&) = delete;
  Enclave(Enclave&&) = default;
  Enclave& operator=(Enclave&&) = default;

  // TEE.create: a fresh, uninitialized enclave. The instance seed models
  // per-instance hardware entropy, so two enclaves with identical content
  // still derive different keys.
  static Enclave create(Rng& rng) {
    Enclave e;
    rng.fill_bytes(e.instance_seed_);
    return e;
  }

  // TEE.add: loads data and code verbatim. Single load only.
  void add(Bytes data, Bytes code) {
    require_phase(EnclavePhase::kCreated, "add");
    data_ = std::move(data);
    code_ = std::move(code);
    phase_ = EnclavePhase::kLoaded;
  }

  // TEE.extend: (re)computes the content measurement. Idempotent.
  Measurement extend() {
    require_phase(EnclavePhase::kLoaded, "extend");
    measurement_ = measure_content(data_, code_);
    return *measurement_;
  }

  // TEE.init: finalizes the measurement and marks the loaded code
  // executable. The returned init token is MAC(root, measurement); the root
  // key stays inside (it models a fused hardware secret) so reports can be
  // MACed later.
  Digest32 init(const Key32& attestation_root) {
    require_phase(EnclavePhase::kLoaded, "init");
    if (!measurement_) throw LifecycleError("init requires a measurement; call extend first");
    root_ = attestation_root;
    init_token_ = hmac_sha256(attestation_root, measurement_->digest);
    phase_ = EnclavePhase::kInitialized;
    return *init_token_;
  }

  // TEE.KeyDerive: recipient keypair deterministic in (measurement,
  // instance seed). The public half is exportable; the secret half is only
  // reachable through the returned handle.
  KeyDerivation key_derive() {
    require_phase(EnclavePhase::kInitialized, "key_derive");
    if (!keys_) {
      Bytes msg = str_bytes("flatsim-key-derive-v1");
      append_bytes(msg, measurement_->digest);
      const Key32 seed = hmac_sha256(instance_seed_, msg);
      auto [pk, sk] = default_cipher_suite().keypair_from_seed(seed);
      KeyDerivation kd;
      kd.public_key = std::move(pk);
      kd.secret.state_ = std::make_shared<SecretKeyHandle::State>();
      kd.secret.state_->key = sk;
      sodium_memzero(const_cast<std::uint8_t*>(sk.data()), sk.size());
      keys_ = std::move(kd);
    }
    return *keys_;
  }

  // TEE.remove: clears content, keys, and measurement; revokes outstanding
  // secret handles. Every later operation fails.
  void remove() {
    if (phase_ == EnclavePhase::kRemoved) throw LifecycleError("enclave already removed");
    data_.clear();
    code_.clear();
    measurement_.reset();
    init_token_.reset();
    if (root_) sodium_memzero(root_->data(), root_->size());
    root_.reset();
    if (keys_) {
      keys_->secret.state_->revoked = true;
      sodium_memzero(keys_->secret.state_->key.data(), keys_->secret.state_->key.size());
    }
    keys_.reset();
    sodium_memzero(instance_seed_.data(), instance_seed_.size());
    phase_ = EnclavePhase::kRemoved;
  }

  // Builds the report a verifier checks: the enclave's measurement, public
  // key, and a MAC binding them to the signer id under the root key.
  AttestationReport attestation_report(std::uint32_t signer_id) {
    require_phase(EnclavePhase::kInitialized, "attestation_report");
    const KeyDerivation kd = key_derive();
    AttestationReport rep;
    rep.signer_id = signer_id;
    rep.measurement = *measurement_;
    rep.enclave_pk = kd.public_key;
    rep.init_token = hmac_sha256(*root_, rep.mac_message());
    return rep;
  }

  EnclavePhase phase() const { return phase_; }
  const std::optional<Measurement>& measurement() const { return measurement_; }
  const std::optional<Digest32>& init_token() const { return init_token_; }
  ByteSpan data() const { return data_; }
  ByteSpan code() const { return code_; }

 private:
  void require_phase(EnclavePhase expected, const char* op) const {
    if (phase_ != expected)
      throw LifecycleError(std::string(op) + " requires phase " +
                           std::string(enclave_phase_name(expected)) + ", enclave is " +
                           std::string(enclave_phase_name(phase_)));
  }

  EnclavePhase phase_ = EnclavePhase::kCreated;
  Bytes data_;
  Bytes code_;
  Key32 instance_seed_{};
  std::optional<Measurement> measurement_;
  std::optional<Digest32> init_token_;
  std::optional<Key32> root_;
  std::optional<KeyDerivation> keys_;
};

struct AttestOutcome {
  bool accepted = false;
  std::string reason;
};

// Accepts iff the reported measurement equals the expected one and the MAC
// verifies under the root key. The MAC comparison is constant-time.
inline AttestOutcome attest(const AttestationReport& report, const Measurement& expected,
                            const Key32& attestation_root) {
  if (!(report.measurement == expected)) return {false, "measurement mismatch"};
  const Digest32 want = hmac_sha256(attestation_root, report.mac_message());
  if (!ct_equal(report.init_token, want)) return {false, "init token verification failed"};
  return {true, ""};
}

// Parses then verifies; malformed bytes reject rather than throw.
inline AttestOutcome attest_serialized(ByteSpan bytes, const Measurement& expected,
                                       const Key32& attestation_root) {
  try {
    return attest(AttestationReport::parse(bytes), expected, attestation_root);
  } catch (const ParseError& e) {
    return {false, std::string("parse failure: ") + e.what()};
  }
}

}  // namespace flatsim
