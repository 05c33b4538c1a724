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

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flatsim/adversary.hpp"
#include "flatsim/config.hpp"
#include "flatsim/crypto.hpp"
#include "flatsim/enclave.hpp"
#include "flatsim/envelope.hpp"
#include "flatsim/errors.hpp"
#include "flatsim/metrics.hpp"
#include "flatsim/model.hpp"
#include "flatsim/params.hpp"
#include "flatsim/privacy.hpp"
#include "flatsim/rng.hpp"
#include "flatsim/robust_agg.hpp"
#include "flatsim/transcript.hpp"

// The protocol round state machine. One server worker and n party workers,
// each backed by a software enclave, exchange typed messages only: model
// hash publication, mutual attestation, encrypted update submission,
// in-enclave aggregation with optional multi-krum filtering, loss-gated
// continuation, and an encrypted global broadcast at the end. Parties can
// drop at any point and rejoin at round boundaries after re-attesting.

namespace flatsim {

// Stand-ins for the binaries a real deployment would measure. Attestation
// binds each worker to these exact bytes; the tampered-code scenario flips
// one bit and must be rejected.
inline constexpr std::string_view kTrainingCodeV1 =
    "flatsim party training code v1: logistic sgd, dp delta pipeline, envelope submit";
inline constexpr std::string_view kAggregationCodeV1 =
    "flatsim server aggregation code v1: envelope decrypt, krum filter, federated average";

enum class PartyStatus : std::uint8_t { kActive = 1, kDropped = 2, kRejected = 3 };

inline std::string_view party_status_name(PartyStatus s) {
  switch (s) {
    case PartyStatus::kActive: return "active";
    case PartyStatus::kDropped: return "dropped";
    case PartyStatus::kRejected: return "rejected";
  }
  return "?";
}

struct PartyState {
  std::uint32_t id = 0;
  Enclave enclave;
  Dataset dataset;  // local training data, poison already applied
  AdversarySpec adversary;
  PartyStatus status = PartyStatus::kActive;
  bool verified_model_hash = false;
  ModelSpec local_spec;              // what this party believes it is training
  Measurement expected_measurement;  // verifier-side reference for this party
  Measurement attested_measurement;  // set once attestation accepted
  Bytes public_key;                  // from the accepted attestation report
  SecretKeyHandle secret;            // enclave-held recipient key
  std::string reject_reason;
  bool pending_rejoin = false;
};

struct AggregationOutcome {
  std::vector<std::uint32_t> participants;  // ascending ids of decrypted updates
  std::vector<double> krum_scores;          // aligned with participants; empty if krum off
  std::vector<std::uint32_t> selected;      // ids whose updates entered the aggregate
  std::vector<std::uint32_t> discarded;     // ids krum filtered out
  ParameterVector aggregate;
};

struct RoundState {
  std::uint32_t round_index = 0;
  ParameterVector round_start_global;
  // Delivered update envelopes by party id. Kept as wire bytes: parsing
  // happens inside the server enclave's decrypt step, so a corrupted
  // delivery is an excluded update, not a crashed round.
  std::map<std::uint32_t, Bytes> received;
  std::optional<AggregationOutcome> outcome;
  std::optional<double> global_loss;
  double global_accuracy = 0.0;
};

class Simulation {
 public:
  explicit Simulation(ExperimentConfig config) : cfg_(std::move(config)) { cfg_.validate(); }

  void set_message_tap(MessageTap tap) { tap_ = std::move(tap); }

  // Builds enclaves and datasets, publishes the model hash, and runs mutual
  // attestation. Parties failing the hash check or either attestation
  // direction end up rejected and never submit.
  void setup() {
    if (setup_done_) throw LifecycleError("setup already ran");

    Rng root_rng(derive_seed(cfg_.master_seed, "attestation-root"));
    root_rng.fill_bytes(root_);

    spec_ = ModelSpec{cfg_.model.dim, ModelKind::kLogisticRegression};
    published_hash_ = spec_.hash();
    global_ = init_model(spec_, derive_seed(cfg_.master_seed, "init-model"));
    note_plaintext(global_);
    eval_data_ = gen_synthetic(derive_seed(cfg_.master_seed, "eval-data"), cfg_.data.eval_samples,
                               cfg_.model.dim, cfg_.data.margin);

    Rng server_rng(derive_seed(cfg_.master_seed, "enclave", kServerId));
    server_enclave_ = Enclave::create(server_rng);
    server_enclave_->add(spec_.canonical_bytes(), str_bytes(kAggregationCodeV1));
    server_enclave_->extend();
    server_enclave_->init(root_);
    KeyDerivation server_keys = server_enclave_->key_derive();
    server_pk_ = std::move(server_keys.public_key);
    server_secret_ = std::move(server_keys.secret);
    server_measurement_ = *server_enclave_->measurement();

    parties_.resize(cfg_.n_parties);
    for (std::uint32_t id = 0; id < cfg_.n_parties; ++id) {
      const PartyConfig& pc = cfg_.parties[id];
      PartyState& ps = parties_[id];
      ps.id = id;
      ps.adversary = pc.adversary;
      const Dataset clean =
          gen_synthetic(derive_seed(cfg_.master_seed, "party-data", id), cfg_.party_samples(id),
                        cfg_.model.dim, cfg_.party_margin(id));
      ps.dataset = poison_dataset(clean, pc.adversary, derive_seed(cfg_.master_seed, "poison", id));
      ps.local_spec = ModelSpec{cfg_.party_model_dim(id), ModelKind::kLogisticRegression};

      const Bytes data_bytes = str_bytes(dataset_to_text(ps.dataset));
      const Bytes honest_code = str_bytes(kTrainingCodeV1);
      Bytes loaded_code = honest_code;
      if (pc.tamper_code) loaded_code[0] ^= 0x01;
      ps.expected_measurement = measure_content(data_bytes, honest_code);

      Rng enclave_rng(derive_seed(cfg_.master_seed, "enclave", id));
      ps.enclave = Enclave::create(enclave_rng);
      ps.enclave.add(data_bytes, std::move(loaded_code));
      ps.enclave.extend();
      ps.enclave.init(root_);
      ps.secret = ps.enclave.key_derive().secret;
    }

    // Step 1: the server publishes H(model spec); each party checks it
    // against the hash of its own local spec before doing anything else.
    for (PartyState& ps : parties_) {
      Message m{0, kServerId, ps.id, MessageType::kModelHashAnnounce,
                Bytes(published_hash_.begin(), published_hash_.end())};
      if (deliver(m)) {
        const Digest32 local = ps.local_spec.hash();
        ps.verified_model_hash = ct_equal(m.payload, local);
      }
      if (!ps.verified_model_hash) {
        ps.status = PartyStatus::kRejected;
        ps.reject_reason = "model hash mismatch";
        warn("setup: party " + std::to_string(ps.id) + " rejected: model hash mismatch");
      }
    }

    // Step 2: mutual attestation for everyone still standing.
    for (PartyState& ps : parties_) {
      if (ps.status == PartyStatus::kActive) attest_party_at(ps.id, 0);
    }
    setup_done_ = true;
  }

  // Mutual attestation of one party against the server, recorded in the
  // transcript. Both directions must accept; a failure rejects the party
  // with the failing direction named.
  AttestOutcome attest_party(std::uint32_t id) {
    require_setup();
    return attest_party_at(id, next_round_);
  }

  // One full round: boundary bookkeeping, local training and submission by
  // every active party, in-enclave decryption and aggregation, evaluation.
  RoundState run_round() {
    require_setup();
    const auto round_begin = std::chrono::steady_clock::now();
    const std::uint32_t r = next_round_;

    process_pending_rejoins(r);
    apply_scheduled_drops(r, DropWhen::kBeforeTraining);

    std::size_t active = 0;
    for (const PartyState& ps : parties_)
      if (ps.status == PartyStatus::kActive) ++active;
    if (active < cfg_.min_participants)
      throw QuorumError("round " + std::to_string(r) + " aborted: " + std::to_string(active) +
                        " active parties < min_participants " +
                        std::to_string(cfg_.min_participants));

    RoundState rs;
    rs.round_index = r;
    rs.round_start_global = global_;

    std::map<std::uint32_t, std::string> status;
    for (const PartyState& ps : parties_)
      status[ps.id] = std::string(party_status_name(ps.status));

    for (PartyState& ps : parties_) {
      if (ps.status != PartyStatus::kActive) continue;
      const ParameterVector trained =
          local_train(global_, ps.dataset, cfg_.training.epochs, cfg_.training.lr,
                      static_cast<std::size_t>(cfg_.training.batch),
                      derive_seed(cfg_.master_seed, "train", r, ps.id));
      const ParameterVector shaped = shape_update(trained, global_, ps.adversary);
      ParameterVector submitted;
      if (cfg_.dp.enabled) {
        ParameterVector delta(shaped.size());
        for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = shaped[j] - global_[j];
        Rng noise_rng(derive_seed(cfg_.master_seed, "dp-noise", r, ps.id));
        const ParameterVector defended = apply_dp_delta(delta, cfg_.dp, noise_rng);
        submitted.resize(defended.size());
        for (std::size_t j = 0; j < defended.size(); ++j) submitted[j] = global_[j] + defended[j];
      } else {
        submitted = shaped;
      }
      note_plaintext(trained);
      note_plaintext(shaped);
      note_plaintext(submitted);

      Rng envelope_rng(derive_seed(cfg_.master_seed, "envelope", r, ps.id));
      const EncryptedUpdate update = encrypt_update(submitted, r, ps.id,
                                                    *ps.enclave.measurement(), server_pk_,
                                                    envelope_rng);
      Message m{r, ps.id, kServerId, MessageType::kEncryptedUpdate, update.serialize()};
      if (deliver(m)) {
        rs.received[ps.id] = m.payload;
        status[ps.id] = "submitted";
      } else {
        status[ps.id] = "lost";
        warn("round " + std::to_string(r) + ": update from party " + std::to_string(ps.id) +
             " lost in transit");
      }
    }

    // A party dropping now already submitted; its update stays counted.
    apply_scheduled_drops(r, DropWhen::kAfterSubmission);

    if (rs.received.size() < cfg_.min_participants)
      throw QuorumError("round " + std::to_string(r) + " aborted: " +
                        std::to_string(rs.received.size()) + " submissions < min_participants " +
                        std::to_string(cfg_.min_participants));

    // Server enclave: decrypt in ascending party-id order, always. The
    // iteration order never depends on update contents, the desk-scale
    // stand-in for a data-oblivious aggregation pass.
    std::vector<ParameterVector> updates;
    std::vector<std::uint32_t> participant_ids;
    std::vector<double> weights;
    for (const auto& [id, bytes] : rs.received) {
      try {
        ParameterVector p =
            decrypt_update_serialized(bytes, r, parties_[id].attested_measurement, server_secret_);
        if (p.size() != global_.size())
          throw ShapeError("decoded update has dimension " + std::to_string(p.size()) +
                           ", model has " + std::to_string(global_.size()));
        updates.push_back(std::move(p));
        participant_ids.push_back(id);
        weights.push_back(cfg_.aggregation.weights_mode == WeightsMode::kSampleCount
                              ? static_cast<double>(parties_[id].dataset.size())
                              : 1.0);
      } catch (const Error& e) {
        status[id] = "excluded";
        warn("round " + std::to_string(r) + ": update from party " + std::to_string(id) +
             " rejected: " + e.what());
      }
    }
    if (updates.size() < cfg_.min_participants)
      throw QuorumError("round " + std::to_string(r) + " aborted: " +
                        std::to_string(updates.size()) + " valid updates < min_participants " +
                        std::to_string(cfg_.min_participants));

    AggregationOutcome out;
    out.participants = participant_ids;
    if (cfg_.aggregation.krum_enabled) {
      const KrumResult kr = multi_krum(updates, cfg_.aggregation.krum_k);
      out.krum_scores = kr.scores;
      for (std::size_t idx : kr.selected) out.selected.push_back(participant_ids[idx]);
      for (std::size_t idx : kr.discarded) out.discarded.push_back(participant_ids[idx]);
      if (cfg_.aggregation.method == Aggregation::kFedAvg) {
        out.aggregate = kr.aggregate;
      } else {
        std::vector<ParameterVector> kept;
        for (std::size_t idx : kr.selected) kept.push_back(updates[idx]);
        out.aggregate = aggregate(cfg_.aggregation.method, kept,
                                  std::vector<double>(kept.size(), 1.0), 0);
      }
    } else {
      out.aggregate = aggregate(cfg_.aggregation.method, updates, weights, 0);
      out.selected = participant_ids;
    }

    global_ = out.aggregate;
    note_plaintext(global_);
    const Evaluation ev = evaluate(global_, eval_data_);
    rs.outcome = std::move(out);
    rs.global_loss = ev.loss;
    rs.global_accuracy = ev.accuracy;

    RoundRecord rec;
    rec.round = r;
    rec.loss = ev.loss;
    rec.accuracy = ev.accuracy;
    for (const PartyState& ps : parties_) rec.parties.push_back({ps.id, status[ps.id]});
    rec.krum_scores = rs.outcome->krum_scores;
    rec.selected = rs.outcome->selected;
    rec.discarded = rs.outcome->discarded;
    if (const auto* bd = backdoor_attacker()) {
      rec.backdoor_success = backdoor_success_rate(global_, eval_data_, bd->trigger,
                                                   bd->target_label);
    }
    rec.wall_clock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - round_begin)
            .count();
    metrics_.rounds.push_back(std::move(rec));

    register_scheduled_rejoins(r);
    ++next_round_;
    return rs;
  }

  // Marks the party dropped. Scheduled drops take effect at the named phase
  // of their round; a manual call between rounds takes effect immediately.
  bool handle_dropout(std::uint32_t id, DropWhen) {
    PartyState& ps = party(id);
    if (ps.status == PartyStatus::kDropped) {
      warn("party " + std::to_string(id) + " already dropped; ignoring");
      return false;
    }
    if (ps.status == PartyStatus::kRejected) {
      warn("party " + std::to_string(id) + " is rejected and cannot drop");
      return false;
    }
    ps.status = PartyStatus::kDropped;
    return true;
  }

  // A dropped party asks to come back. Honored only at the next round
  // boundary, where it must re-attest before re-entering.
  bool request_rejoin(std::uint32_t id) {
    PartyState& ps = party(id);
    Message m{next_round_, id, kServerId, MessageType::kRejoinRequest, {}};
    deliver(m);
    if (ps.status != PartyStatus::kDropped) {
      warn("party " + std::to_string(id) + " requested rejoin but is " +
           std::string(party_status_name(ps.status)));
      return false;
    }
    ps.pending_rejoin = true;
    return true;
  }

  // Full experiment: rounds until the loss threshold or the round limit,
  // then the encrypted global model goes out to every active party.
  MetricsLog run(const std::function<void(const RoundState&)>& on_round = {}) {
    if (!setup_done_) setup();
    bool met = false;
    while (true) {
      const RoundState rs = run_round();
      if (on_round) on_round(rs);
      if (rs.global_loss && *rs.global_loss <= cfg_.stopping.loss_threshold) {
        met = true;
        break;
      }
      if (rs.round_index >= cfg_.stopping.max_rounds) break;
    }
    broadcast_global();

    ExperimentSummary& s = metrics_.summary;
    s.rounds_executed = static_cast<std::uint32_t>(metrics_.rounds.size());
    s.final_loss = metrics_.rounds.back().loss;
    s.final_accuracy = metrics_.rounds.back().accuracy;
    s.met_threshold = met;
    s.krum_enabled = cfg_.aggregation.krum_enabled;
    for (const PartyState& ps : parties_)
      s.parties.push_back({ps.id, std::string(adversary_kind_name(ps.adversary.kind))});
    s.final_backdoor_success = metrics_.rounds.back().backdoor_success;
    double total = 0.0;
    for (const RoundRecord& r : metrics_.rounds) total += r.wall_clock_ms;
    s.total_wall_clock_ms = total;
    return metrics_;
  }

  const ExperimentConfig& config() const { return cfg_; }
  const std::vector<PartyState>& parties() const { return parties_; }
  const ParameterVector& global_model() const { return global_; }
  const Transcript& transcript() const { return transcript_; }
  const Dataset& eval_data() const { return eval_data_; }
  const ModelSpec& model_spec() const { return spec_; }
  const Measurement& server_measurement() const { return server_measurement_; }
  const Key32& attestation_root() const { return root_; }
  ByteSpan server_public_key() const { return server_pk_; }
  const MetricsLog& metrics() const { return metrics_; }
  std::uint32_t next_round() const { return next_round_; }

  // Leak audit over everything recorded so far: no message may contain any
  // plaintext parameter vector this simulation ever produced.
  AuditResult audit() const { return audit_transcript(transcript_, plaintext_sigs_); }

 private:
  PartyState& party(std::uint32_t id) {
    if (id >= parties_.size()) throw InvalidInputError("unknown party id " + std::to_string(id));
    return parties_[id];
  }

  void require_setup() const {
    if (!setup_done_) throw LifecycleError("setup has not run");
  }

  void warn(std::string msg) { metrics_.warnings.push_back(std::move(msg)); }

  void note_plaintext(const ParameterVector& v) {
    Bytes sig = plaintext_signature(v);
    if (!plaintext_sigs_.empty() && plaintext_sigs_.back() == sig) return;
    plaintext_sigs_.push_back(std::move(sig));
  }

  // Sends through the tap (which may mutate or drop), then records what
  // actually crossed the wire. Returns whether the receiver saw it.
  bool deliver(Message& m) {
    bool ok = true;
    if (tap_) ok = tap_(m);
    transcript_.record(m);
    return ok;
  }

  AttestOutcome attest_party_at(std::uint32_t id, std::uint32_t round) {
    PartyState& ps = party(id);

    AttestationReport party_report = ps.enclave.attestation_report(id);
    Message to_server{round, id, kServerId, MessageType::kAttestationReport,
                      party_report.serialize()};
    AttestOutcome server_side{false, "report not delivered"};
    if (deliver(to_server))
      server_side = attest_serialized(to_server.payload, ps.expected_measurement, root_);
    send_verdict(round, kServerId, id, server_side);

    AttestationReport server_report = server_enclave_->attestation_report(kServerId);
    Message to_party{round, kServerId, id, MessageType::kAttestationReport,
                     server_report.serialize()};
    AttestOutcome party_side{false, "report not delivered"};
    const Measurement expected_server =
        measure_content(ps.local_spec.canonical_bytes(), str_bytes(kAggregationCodeV1));
    if (deliver(to_party))
      party_side = attest_serialized(to_party.payload, expected_server, root_);
    send_verdict(round, id, kServerId, party_side);

    if (server_side.accepted && party_side.accepted) {
      const AttestationReport accepted = AttestationReport::parse(to_server.payload);
      ps.attested_measurement = accepted.measurement;
      ps.public_key = accepted.enclave_pk;
      ps.status = PartyStatus::kActive;
      return {true, ""};
    }
    ps.status = PartyStatus::kRejected;
    ps.reject_reason = server_side.accepted
                           ? "party-direction attestation failed: " + party_side.reason
                           : "server-direction attestation failed: " + server_side.reason;
    warn("round " + std::to_string(round) + ": party " + std::to_string(id) +
         " rejected: " + ps.reject_reason);
    return {false, ps.reject_reason};
  }

  void send_verdict(std::uint32_t round, std::uint32_t sender, std::uint32_t receiver,
                    const AttestOutcome& outcome) {
    Bytes payload;
    append_u8(payload, outcome.accepted ? 1 : 0);
    append_bytes(payload, str_bytes(outcome.reason));
    Message m{round, sender, receiver, MessageType::kAttestationVerdict, std::move(payload)};
    deliver(m);
  }

  void apply_scheduled_drops(std::uint32_t round, DropWhen when) {
    for (const DropoutEvent& e : cfg_.dropout_schedule) {
      if (e.round == round && e.when == when) handle_dropout(e.party_id, e.when);
    }
  }

  void register_scheduled_rejoins(std::uint32_t round) {
    for (const RejoinEvent& e : cfg_.rejoin_schedule) {
      if (e.round == round) request_rejoin(e.party_id);
    }
  }

  void process_pending_rejoins(std::uint32_t round) {
    for (PartyState& ps : parties_) {
      if (!ps.pending_rejoin) continue;
      ps.pending_rejoin = false;
      if (ps.status != PartyStatus::kDropped) continue;
      attest_party_at(ps.id, round);
    }
  }

  const AdversarySpec* backdoor_attacker() const {
    for (const PartyState& ps : parties_)
      if (ps.adversary.kind == AdversaryKind::kBackdoor) return &ps.adversary;
    return nullptr;
  }

  void broadcast_global() {
    const std::uint32_t r = next_round_ - 1;
    for (PartyState& ps : parties_) {
      if (ps.status != PartyStatus::kActive) continue;
      Rng envelope_rng(derive_seed(cfg_.master_seed, "broadcast", r, ps.id));
      const EncryptedUpdate sealed = encrypt_update(global_, r, ps.id, server_measurement_,
                                                    ps.public_key, envelope_rng);
      Message m{r, kServerId, ps.id, MessageType::kEncryptedGlobalModel, sealed.serialize()};
      if (!deliver(m)) {
        warn("broadcast to party " + std::to_string(ps.id) + " lost in transit");
        continue;
      }
      const ParameterVector got =
          decrypt_update_serialized(m.payload, r, server_measurement_, ps.secret);
      if (got != global_)
        throw TamperError("party " + std::to_string(ps.id) +
                          ": decrypted global model does not match the aggregate");
    }
  }

  ExperimentConfig cfg_;
  bool setup_done_ = false;
  std::uint32_t next_round_ = 1;
  Key32 root_{};
  ModelSpec spec_;
  Digest32 published_hash_{};
  ParameterVector global_;
  Dataset eval_data_;
  std::optional<Enclave> server_enclave_;
  Bytes server_pk_;
  SecretKeyHandle server_secret_;
  Measurement server_measurement_;
  std::vector<PartyState> parties_;
  Transcript transcript_;
  MessageTap tap_;
  MetricsLog metrics_;
  std::vector<Bytes> plaintext_sigs_;
};

inline MetricsLog run_experiment(const ExperimentConfig& config) {
  Simulation sim(config);
  return sim.run();
}

}  // namespace flatsim
