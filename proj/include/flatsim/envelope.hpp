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
#include <optional>
#include <string>
#include <utility>

#include "flatsim/bytes.hpp"
#include "flatsim/crypto.hpp"
#include "flatsim/enclave.hpp"
#include "flatsim/errors.hpp"
#include "flatsim/params.hpp"
#include "flatsim/rng.hpp"

// Encrypted model-update envelopes. A party seals its parameter vector to
// the server enclave's public key; the round number, party id, and the
// sender's measurement ride along as associated data, so a ciphertext can
// neither be replayed into a different round nor attributed to a different
// sender without the AEAD tag failing.

namespace flatsim {

// u32 LE dimension, then each coordinate as IEEE-754 f64 LE. Bit-exact
// round trip, including NaN payloads and signed zero.
inline Bytes encode_vector(const ParameterVector& v) {
  if (v.size() > 0xffffffffu) throw InvalidInputError("vector too long to encode");
  Bytes out;
  out.reserve(4 + 8 * v.size());
  append_u32_le(out, static_cast<std::uint32_t>(v.size()));
  for (double x : v) append_f64_le(out, x);
  return out;
}

inline ParameterVector decode_vector(ByteSpan bytes) {
  ByteReader r(bytes, "encoded vector");
  const std::uint32_t dim = r.u32_le();
  if (r.remaining() != static_cast<std::size_t>(dim) * 8)
    throw ParseError("encoded vector: length does not match dimension");
  ParameterVector v;
  v.reserve(dim);
  for (std::uint32_t i = 0; i < dim; ++i) v.push_back(r.f64_le());
  r.expect_done();
  return v;
}

// Wire format: "FLUP" | version u8=1 | round u32 BE | party_id u32 BE |
// nonce 24 | aad_digest 32 | ct_len u32 BE | ct. The ciphertext is the key
// encapsulation followed by the AEAD output.
struct EncryptedUpdate {
  std::uint32_t round = 0;
  std::uint32_t party_id = 0;
  Nonce24 nonce{};
  Digest32 aad_digest{};
  Bytes ciphertext;

  static constexpr std::array<std::uint8_t, 4> kMagic = {'F', 'L', 'U', 'P'};
  static constexpr std::uint8_t kVersion = 1;

  Bytes serialize() const {
    Bytes out;
    append_bytes(out, kMagic);
    append_u8(out, kVersion);
    append_u32_be(out, round);
    append_u32_be(out, party_id);
    append_bytes(out, nonce);
    append_bytes(out, aad_digest);
    if (ciphertext.size() > 0xffffffffu) throw InvalidInputError("ciphertext too long");
    append_u32_be(out, static_cast<std::uint32_t>(ciphertext.size()));
    append_bytes(out, ciphertext);
    return out;
  }

  static EncryptedUpdate parse(ByteSpan bytes) {
    ByteReader r(bytes, "encrypted update");
    r.expect_magic(kMagic, "FLUP");
    if (r.u8() != kVersion) throw ParseError("encrypted update: unsupported version");
    EncryptedUpdate u;
    u.round = r.u32_be();
    u.party_id = r.u32_be();
    u.nonce = r.take_array<24>();
    u.aad_digest = r.take_array<32>();
    const std::uint32_t ct_len = r.u32_be();
    if (r.remaining() != ct_len)
      throw ParseError("encrypted update: ciphertext length mismatch");
    ByteSpan ct = r.take(ct_len);
    u.ciphertext.assign(ct.begin(), ct.end());
    r.expect_done();
    return u;
  }
};

// Associated data: round u32 BE || party_id u32 BE || sender measurement.
inline Bytes update_aad(std::uint32_t round, std::uint32_t party_id,
                        const Measurement& sender_measurement) {
  Bytes aad;
  append_u32_be(aad, round);
  append_u32_be(aad, party_id);
  append_bytes(aad, sender_measurement.digest);
  return aad;
}

inline EncryptedUpdate encrypt_update(const ParameterVector& params, std::uint32_t round,
                                      std::uint32_t party_id,
                                      const Measurement& sender_measurement,
                                      ByteSpan recipient_pk, Rng& rng) {
  check_finite(params, "update");
  const CipherSuite& suite = default_cipher_suite();
  Encapsulated enc = suite.encapsulate(recipient_pk, rng);

  EncryptedUpdate u;
  u.round = round;
  u.party_id = party_id;
  rng.fill_bytes(u.nonce);

  const Bytes aad = update_aad(round, party_id, sender_measurement);
  u.aad_digest = sha256(aad);

  const Bytes plaintext = encode_vector(params);
  Bytes sealed = suite.aead_seal(enc.shared_key, u.nonce, plaintext, aad);
  sodium_memzero(enc.shared_key.data(), enc.shared_key.size());

  u.ciphertext = std::move(enc.encapsulation);
  append_bytes(u.ciphertext, sealed);
  return u;
}

// Runs "inside" the recipient enclave: the secret handle is unwrapped here
// and nowhere else. Checks run in a fixed order so every failure mode has a
// deterministic, typed rejection:
//   1. associated-data digest against the wire header and the sender's
//      attested measurement (TamperError),
//   2. AEAD open, authenticating header fields via the AAD (TamperError),
//   3. round freshness (StaleUpdateError), checked only after
//      authentication so replay decisions never act on forged headers,
//   4. plaintext decode (ParseError).
inline ParameterVector decrypt_update(const EncryptedUpdate& u, std::uint32_t expected_round,
                                      const Measurement& sender_measurement,
                                      const SecretKeyHandle& recipient_secret) {
  const CipherSuite& suite = default_cipher_suite();
  const Bytes aad = update_aad(u.round, u.party_id, sender_measurement);
  if (!ct_equal(sha256(aad), u.aad_digest))
    throw TamperError("encrypted update: associated-data digest mismatch");

  const std::size_t enc_size = suite.encapsulation_size();
  if (u.ciphertext.size() < enc_size)
    throw TamperError("encrypted update: ciphertext shorter than key encapsulation");
  ByteSpan ct(u.ciphertext);
  Key32 key = suite.decapsulate(ct.first(enc_size), internal::unwrap_secret(recipient_secret));
  std::optional<Bytes> plaintext = suite.aead_open(key, u.nonce, ct.subspan(enc_size), aad);
  sodium_memzero(key.data(), key.size());
  if (!plaintext) throw TamperError("encrypted update: authentication failed");

  if (u.round != expected_round)
    throw StaleUpdateError("encrypted update: round " + std::to_string(u.round) +
                           " does not match current round " + std::to_string(expected_round));

  return decode_vector(*plaintext);
}

inline ParameterVector decrypt_update_serialized(ByteSpan bytes, std::uint32_t expected_round,
                                                 const Measurement& sender_measurement,
                                                 const SecretKeyHandle& recipient_secret) {
  return decrypt_update(EncryptedUpdate::parse(bytes), expected_round, sender_measurement,
                        recipient_secret);
}

}  // namespace flatsim
