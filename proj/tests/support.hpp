/*
 * Copyright 2026 The dcgrank Authors.
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing,
 *  software distributed under the License is distributed on an "AS
 *  IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either
 *  express or implied.  See the License for the specific language
 *  governing permissions and limitations under the License.
 */

// Shared helpers for the unit tests.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "dcgrank/ranker.hpp"
#include "dcgrank/synthetic.hpp"
#include "dcgrank/trainer.hpp"

namespace dcgrank::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dcgrank_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Small widths so a full forward/backward runs in milliseconds.
inline ModelConfig small_config() {
  ModelConfig m;
  m.doc.embed_dim = 6;
  m.doc.hidden_dim = 6;
  m.doc.encoder_layers = 2;
  m.doc.gcn_dim = 5;
  m.doc.gcn_layers = 2;
  m.doc.doc_dim = 5;
  m.doc.decoder_hidden = 5;
  m.doc.dropout = 0.0;
  m.query.filters = 4;
  m.query.query_dim = 5;
  return m;
}

inline TrainConfig small_train(std::size_t epochs) {
  TrainConfig t;
  t.learning_rate = 0.01;
  t.epochs = epochs;
  t.batch_size = 8;
  t.dropout = 0.0;
  t.seed = 3;
  t.pairs_per_query = 10;
  return t;
}

// Every (better, worse) judged pair of every query.
inline std::vector<TrainExample> judged_examples(const synth::Fixture& fx) {
  std::vector<TrainExample> batch;
  for (const auto& q : fx.queries) {
    if (!fx.qrels.count(q.id)) continue;
    const Query e = expand(q, fx.lexicon);
    const auto tokens = query_token_ids(e, fx.corpus.vocab);
    for (const auto& [better, rb] : fx.qrels.at(q.id)) {
      for (const auto& [worse, rw] : fx.qrels.at(q.id)) {
        if (rb > rw) {
          batch.push_back({e, tokens, *fx.corpus.doc_index(better), *fx.corpus.doc_index(worse)});
        }
      }
    }
  }
  return batch;
}

inline Tensor2 random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng,
                             double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor2 t(r, c);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

inline bool bit_equal(const Tensor2& a, const Tensor2& b) {
  if (!a.same_shape(b)) return false;
  return a.size() == 0 ||
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace dcgrank::testing
