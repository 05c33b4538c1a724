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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "flatsim/bytes.hpp"
#include "flatsim/crypto.hpp"
#include "flatsim/errors.hpp"
#include "flatsim/params.hpp"
#include "flatsim/rng.hpp"

namespace flatsim {

// Binary classification dataset: fixed-dim real feature vectors, labels in
// {0, 1}. This is each party's private data in the simulation.
struct Dataset {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;

  std::size_t size() const { return features.size(); }
  std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }

  void validate() const {
    if (features.empty()) throw InvalidInputError("dataset is empty");
    if (features.size() != labels.size())
      throw InvalidInputError("dataset features/labels length mismatch");
    const std::size_t d = features.front().size();
    for (const auto& x : features) {
      if (x.size() != d) throw ShapeError("dataset has ragged feature rows");
      for (double v : x)
        if (!std::isfinite(v)) throw InvalidInputError("dataset feature is non-finite");
    }
    for (int y : labels)
      if (y != 0 && y != 1) throw InvalidInputError("dataset label outside {0,1}");
  }
};

// Two Gaussian blobs with unit covariance, means 2*margin apart along the
// first axis, labeled by blob, class counts balanced within one sample.
// Deterministic in the seed.
inline Dataset gen_synthetic(std::uint64_t seed, std::size_t n_samples, std::size_t dim,
                             double margin) {
  if (n_samples < 2) throw InvalidInputError("gen_synthetic requires n_samples >= 2");
  if (dim < 2) throw InvalidInputError("gen_synthetic requires dim >= 2");
  if (!(margin >= 0.0) || !std::isfinite(margin))
    throw InvalidInputError("gen_synthetic requires finite margin >= 0");

  Rng rng(seed);
  Dataset ds;
  ds.features.reserve(n_samples);
  ds.labels.reserve(n_samples);
  const std::size_t n0 = n_samples / 2;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const int label = i < n0 ? 0 : 1;
    const double mean0 = label == 0 ? -margin : margin;
    std::vector<double> x(dim);
    for (std::size_t j = 0; j < dim; ++j) x[j] = rng.normal(j == 0 ? mean0 : 0.0, 1.0);
    ds.features.push_back(std::move(x));
    ds.labels.push_back(label);
  }
  // Deterministic row shuffle so mini-batches mix classes.
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  Dataset shuffled;
  shuffled.features.reserve(n_samples);
  shuffled.labels.reserve(n_samples);
  for (std::size_t idx : order) {
    shuffled.features.push_back(std::move(ds.features[idx]));
    shuffled.labels.push_back(ds.labels[idx]);
  }
  return shuffled;
}

enum class ModelKind : std::uint8_t { kLogisticRegression = 1 };

// The model every party agrees to train. Its digest is what the server
// publishes and what each party checks its local copy against.
struct ModelSpec {
  std::uint32_t dim = 2;
  ModelKind kind = ModelKind::kLogisticRegression;

  Bytes canonical_bytes() const {
    Bytes out;
    append_u32_be(out, dim);
    append_u8(out, static_cast<std::uint8_t>(kind));
    return out;
  }

  Digest32 hash() const { return sha256(canonical_bytes()); }

  bool operator==(const ModelSpec&) const = default;
};

// Weights for the first `dim` coordinates plus a trailing bias term.
inline ParameterVector init_model(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.dim == 0) throw InvalidInputError("model dim must be >= 1");
  Rng rng(seed);
  ParameterVector params(spec.dim + 1);
  for (double& w : params) w = rng.uniform(-0.01, 0.01);
  return params;
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double predict_probability(const ParameterVector& params, const std::vector<double>& x) {
  if (params.size() != x.size() + 1)
    throw ShapeError("parameter vector does not match feature dim + bias");
  double z = params.back();
  for (std::size_t j = 0; j < x.size(); ++j) z += params[j] * x[j];
  return sigmoid(z);
}

// Threshold 0.5; a tie predicts class 1.
inline int predict(const ParameterVector& params, const std::vector<double>& x) {
  return predict_probability(params, x) >= 0.5 ? 1 : 0;
}

// Analytic gradient of the per-sample cross-entropy: (p - y) * [x ; 1].
inline ParameterVector bce_gradient(const ParameterVector& params, const std::vector<double>& x,
                                    int label) {
  const double r = predict_probability(params, x) - static_cast<double>(label);
  ParameterVector g(params.size());
  for (std::size_t j = 0; j < x.size(); ++j) g[j] = r * x[j];
  g.back() = r;
  return g;
}

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Mean binary cross-entropy (probabilities clamped to [1e-12, 1 - 1e-12])
// and 0/1 accuracy at threshold 0.5.
inline Evaluation evaluate(const ParameterVector& params, const Dataset& data) {
  data.validate();
  if (params.size() != data.dim() + 1)
    throw ShapeError("parameter vector does not match dataset dim + bias");
  constexpr double kClamp = 1e-12;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double p = predict_probability(params, data.features[i]);
    const double pc = std::clamp(p, kClamp, 1.0 - kClamp);
    const int y = data.labels[i];
    loss -= y == 1 ? std::log(pc) : std::log(1.0 - pc);
    if ((p >= 0.5 ? 1 : 0) == y) ++correct;
  }
  return {loss / static_cast<double>(data.size()),
          static_cast<double>(correct) / static_cast<double>(data.size())};
}

// Mini-batch SGD on the cross-entropy. Shuffling is deterministic in the
// seed; the returned vector is the full trained parameter vector, not a
// delta.
inline ParameterVector local_train(const ParameterVector& start, const Dataset& data, int epochs,
                                   double lr, std::size_t batch, std::uint64_t seed) {
  data.validate();
  if (start.size() != data.dim() + 1)
    throw ShapeError("start parameters do not match dataset dim + bias");
  if (epochs < 1) throw InvalidInputError("epochs must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidInputError("lr must be finite and >= 0");
  if (batch < 1) throw InvalidInputError("batch must be >= 1");

  Rng rng(seed);
  ParameterVector w = start;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  ParameterVector grad(w.size());
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t pos = 0; pos < order.size(); pos += batch) {
      const std::size_t end = std::min(pos + batch, order.size());
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = pos; i < end; ++i) {
        const std::size_t s = order[i];
        const double r =
            predict_probability(w, data.features[s]) - static_cast<double>(data.labels[s]);
        for (std::size_t j = 0; j + 1 < w.size(); ++j) grad[j] += r * data.features[s][j];
        grad.back() += r;
      }
      const double scale = lr / static_cast<double>(end - pos);
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= scale * grad[j];
    }
  }
  return w;
}

// Columnar text export: one sample per line, label first, then features,
// comma separated. Doubles are written in shortest round-trip form, so
// export -> import is bit-exact.
inline std::string dataset_to_text(const Dataset& data) {
  data.validate();
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back(data.labels[i] == 1 ? '1' : '0');
    for (double v : data.features[i]) {
      out.push_back(',');
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out.append(buf, end);
    }
    out.push_back('\n');
  }
  return out;
}

inline Dataset dataset_from_text(std::string_view text) {
  Dataset ds;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    int label = -1;
    std::size_t field = 0;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string_view::npos) comma = line.size();
      std::string_view tok = line.substr(start, comma - start);
      if (field == 0) {
        if (tok == "0")
          label = 0;
        else if (tok == "1")
          label = 1;
        else
          throw ParseError("dataset line " + std::to_string(line_no) + ": bad label '" +
                           std::string(tok) + "'");
      } else {
        double v = 0.0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size())
          throw ParseError("dataset line " + std::to_string(line_no) + ": bad feature '" +
                           std::string(tok) + "'");
        row.push_back(v);
      }
      ++field;
      if (comma == line.size()) break;
      start = comma + 1;
    }
    if (row.empty())
      throw ParseError("dataset line " + std::to_string(line_no) + ": no features");
    ds.features.push_back(std::move(row));
    ds.labels.push_back(label);
  }
  ds.validate();
  return ds;
}

inline void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << dataset_to_text(data);
  if (!out) throw IoError("write failed: " + path);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return dataset_from_text(ss.str());
}

}  // namespace flatsim
