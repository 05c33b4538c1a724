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

#include <sodium.h>

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <utility>

#include "flatsim/bytes.hpp"
#include "flatsim/errors.hpp"
#include "flatsim/rng.hpp"

namespace flatsim {

inline void ensure_sodium_init() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error("libsodium initialization failed");
}

using Digest32 = std::array<std::uint8_t, 32>;
using Key32 = std::array<std::uint8_t, 32>;
using Nonce24 = std::array<std::uint8_t, 24>;

inline Digest32 sha256(ByteSpan data) {
  ensure_sodium_init();
  Digest32 out;
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

inline Digest32 hmac_sha256(const Key32& key, ByteSpan msg) {
  ensure_sodium_init();
  Digest32 out;
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, msg.data(), msg.size());
  crypto_auth_hmacsha256_final(&st, out.data());
  return out;
}

// Constant-time comparison; length mismatch compares unequal.
inline bool ct_equal(ByteSpan a, ByteSpan b) {
  ensure_sodium_init();
  if (a.size() != b.size()) return false;
  return sodium_memcmp(a.data(), b.data(), a.size()) == 0;
}

// Shared key plus the bytes the sender must transmit so the recipient can
// re-derive it.
struct Encapsulated {
  Bytes encapsulation;
  Key32 shared_key{};
};

// Pluggable cipher suite behind the update envelope. Two contract points:
// key encapsulation against a recipient public key, and an AEAD with 24-byte
// nonces. The desk instantiation below is classical (X25519 +
// XChaCha20-Poly1305); a post-quantum KEM slots into
// encapsulate/decapsulate without changing the envelope format, which only
// sees opaque encapsulation bytes.
class CipherSuite {
 public:
  virtual ~CipherSuite() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t public_key_size() const = 0;
  virtual std::size_t encapsulation_size() const = 0;

  // Deterministic recipient keypair from a 32-byte seed.
  virtual std::pair<Bytes, Key32> keypair_from_seed(const Key32& seed) const = 0;

  // Fresh encapsulation against a recipient public key; randomness comes from
  // the caller's stream so envelopes stay reproducible per seed.
  virtual Encapsulated encapsulate(ByteSpan recipient_pk, Rng& rng) const = 0;
  virtual Key32 decapsulate(ByteSpan encapsulation, const Key32& recipient_sk) const = 0;

  virtual Bytes aead_seal(const Key32& key, const Nonce24& nonce, ByteSpan plaintext,
                          ByteSpan aad) const = 0;
  virtual std::optional<Bytes> aead_open(const Key32& key, const Nonce24& nonce, ByteSpan ct,
                                         ByteSpan aad) const = 0;
};

class X25519XChaChaSuite final : public CipherSuite {
 public:
  std::string_view name() const override { return "x25519-xchacha20poly1305"; }
  std::size_t public_key_size() const override { return crypto_scalarmult_BYTES; }
  std::size_t encapsulation_size() const override { return crypto_scalarmult_BYTES; }

  std::pair<Bytes, Key32> keypair_from_seed(const Key32& seed) const override {
    ensure_sodium_init();
    Key32 sk = sha256(ByteSpan(seed.data(), seed.size()));
    Bytes pk(crypto_scalarmult_BYTES);
    crypto_scalarmult_base(pk.data(), sk.data());
    return {std::move(pk), sk};
  }

  Encapsulated encapsulate(ByteSpan recipient_pk, Rng& rng) const override {
    ensure_sodium_init();
    if (recipient_pk.size() != crypto_scalarmult_BYTES)
      throw KeyError("malformed recipient public key (expected 32 bytes)");
    Key32 eph_seed;
    rng.fill_bytes(eph_seed);
    auto [eph_pk, eph_sk] = keypair_from_seed(eph_seed);
    Key32 shared;
    if (crypto_scalarmult(shared.data(), eph_sk.data(), recipient_pk.data()) != 0)
      throw KeyError("key agreement failed (low-order public key)");
    Encapsulated out;
    out.shared_key = derive_key(shared, eph_pk);
    out.encapsulation = std::move(eph_pk);
    sodium_memzero(eph_sk.data(), eph_sk.size());
    sodium_memzero(shared.data(), shared.size());
    return out;
  }

  Key32 decapsulate(ByteSpan encapsulation, const Key32& recipient_sk) const override {
    ensure_sodium_init();
    if (encapsulation.size() != crypto_scalarmult_BYTES)
      throw KeyError("malformed encapsulation (expected 32 bytes)");
    Key32 shared;
    if (crypto_scalarmult(shared.data(), recipient_sk.data(), encapsulation.data()) != 0)
      throw KeyError("key agreement failed (low-order public key)");
    Key32 key = derive_key(shared, Bytes(encapsulation.begin(), encapsulation.end()));
    sodium_memzero(shared.data(), shared.size());
    return key;
  }

  Bytes aead_seal(const Key32& key, const Nonce24& nonce, ByteSpan plaintext,
                  ByteSpan aad) const override {
    ensure_sodium_init();
    Bytes ct(plaintext.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
    unsigned long long ct_len = 0;
    crypto_aead_xchacha20poly1305_ietf_encrypt(ct.data(), &ct_len, plaintext.data(),
                                               plaintext.size(), aad.data(), aad.size(), nullptr,
                                               nonce.data(), key.data());
    ct.resize(ct_len);
    return ct;
  }

  std::optional<Bytes> aead_open(const Key32& key, const Nonce24& nonce, ByteSpan ct,
                                 ByteSpan aad) const override {
    ensure_sodium_init();
    if (ct.size() < crypto_aead_xchacha20poly1305_ietf_ABYTES) return std::nullopt;
    Bytes pt(ct.size() - crypto_aead_xchacha20poly1305_ietf_ABYTES);
    unsigned long long pt_len = 0;
    if (crypto_aead_xchacha20poly1305_ietf_decrypt(pt.data(), &pt_len, nullptr, ct.data(),
                                                   ct.size(), aad.data(), aad.size(), nonce.data(),
                                                   key.data()) != 0) {
      return std::nullopt;
    }
    pt.resize(pt_len);
    return pt;
  }

 private:
  // key = HMAC(shared, label || eph_pk): binds the AEAD key to this
  // encapsulation so reusing a shared point across envelopes is harmless.
  static Key32 derive_key(const Key32& shared, const Bytes& eph_pk) {
    Bytes msg = str_bytes("flatsim-envelope-v1");
    append_bytes(msg, eph_pk);
    return hmac_sha256(shared, msg);
  }
};

inline const CipherSuite& default_cipher_suite() {
  static const X25519XChaChaSuite suite;
  return suite;
}

}  // namespace flatsim
