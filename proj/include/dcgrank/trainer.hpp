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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dcgrank/gradcheck.hpp"
#include "dcgrank/metrics.hpp"
#include "dcgrank/numkit.hpp"
#include "dcgrank/queryrep.hpp"
#include "dcgrank/ranker.hpp"

#include "json.hpp"

namespace dcgrank {

enum class Stage { pretrain, finetune };

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;  // pairs per optimizer step
  double dropout = 0.5;
  std::uint64_t seed = 0;
  double momentum = 0.9;  // 0 gives plain Adagrad
  double adagrad_eps = 1e-8;
  std::size_t pairs_per_query = 50;
  bool select_best = true;  // keep the parameters with the lowest validation L_rank
  bool paranoid = false;    // finite-difference spot check of one coordinate every N steps
  std::size_t paranoid_every = 10;
  double paranoid_tolerance = 1e-3;
  Stage stage = Stage::pretrain;
};

// Per-coordinate Adagrad. With momentum m the preconditioned step is fed
// through a heavy-ball velocity: v = m v + lr g / (sqrt(G) + eps), p -= v.
struct AdagradState {
  std::map<std::string, Tensor2> accumulator;
  std::map<std::string, Tensor2> velocity;
};

// Uses the gradients held in `params`. Throws EvaluationError naming the
// parameter when any gradient is non-finite; nothing is updated then.
void adagrad_step(ParamStore& params, AdagradState& state, double learning_rate,
                  double momentum = 0.0, double eps = 1e-8);

// One negative per positive, uniform over the other documents.
std::vector<std::size_t> sample_negatives(std::span<const std::size_t> positives,
                                          std::size_t num_docs, std::mt19937_64& rng);

// Generator for one (stage, epoch, step) so runs can resume mid-stream.
std::mt19937_64 stream_rng(std::uint64_t seed, Stage stage, std::uint64_t epoch,
                           std::uint64_t step, std::uint64_t purpose);

struct TrainExample {
  Query query;  // expanded
  std::vector<std::size_t> query_tokens;
  std::size_t better = 0;
  std::size_t worse = 0;
};

struct BatchLoss {
  double total = 0.0;
  double graph = 0.0;
  double rank = 0.0;
  std::size_t skipped_titles = 0;
};

// beta * L_graph + gamma * L_rank for one batch. With `backward`, the
// gradient is added into model.params(). Dropout is applied when
// `dropout_rng` is non-null and the rate is positive.
BatchLoss batch_objective(Model& model, std::span<const TrainExample> batch, double dropout,
                          std::mt19937_64* dropout_rng, bool backward);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_graph = 0.0;
  double train_rank = 0.0;
  double val_rank = 0.0;  // NaN when there is no validation split
  double val_loss = 0.0;
};

struct TrainState {
  AdagradState optimizer;
  std::size_t epochs_done = 0;
  std::vector<EpochLog> history;
  std::optional<ParamStore> best;  // best validation snapshot
  double best_val_rank = 0.0;
};

struct TrainHooks {
  std::function<void(const std::string&)> log;
  // Called after each epoch with the state that a checkpoint would hold.
  std::function<void(const Model&, const TrainState&, const TrainConfig&)> on_epoch;
};

struct PretrainSplit {
  std::vector<std::size_t> train, validation, test;  // document indices
};

// Seeded 8:1:1 split of the documents (one indexing-term pair each).
PretrainSplit split_pretrain(std::size_t num_docs, std::uint64_t seed);

// Indexing-term query for a document, expanded with the lexicon.
Query doc_mesh_query(const Corpus& corpus, std::size_t doc, const ExpansionLexicon& lexicon);

// Trains on (indexing terms of d, d) against a sampled unrelated document.
// Throws IngestError listing documents without indexing terms. `resume`
// continues a previous run from its saved state.
TrainState pretrain(Model& model, const ExpansionLexicon& lexicon, const TrainConfig& config,
                    const TrainHooks& hooks = {}, std::optional<TrainState> resume = std::nullopt);

// Continues training on graded judgments. Topics with no relevant document
// are excluded with a warning; an empty topic set leaves the model as is.
TrainState finetune(Model& model, std::span<const Query> topics, const QRels& qrels,
                    const ExpansionLexicon& lexicon, const TrainConfig& config,
                    const TrainHooks& hooks = {}, std::optional<TrainState> resume = std::nullopt);

// Configuration <-> JSON.
nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
std::string config_hash(const ModelConfig& model, const TrainConfig& train);

// Model and training settings together, as read from a settings file.
struct Settings {
  ModelConfig model;
  TrainConfig train;
};

// One setting by key, e.g. ("learning_rate", "0.01") or ("filter_widths",
// "2,3"). Throws std::invalid_argument naming the key on an unknown key or a
// malformed value.
void apply_setting(Settings& settings, const std::string& key, const std::string& value);

// Settings file: one "key = value" per line; '#' starts a comment. Later
// lines win. Errors carry the line number.
Settings parse_settings(std::istream& in, const std::string& name = "config",
                        Settings base = {});
Settings load_settings(const std::string& path, Settings base = {});
std::vector<std::string> setting_keys();

// Range checks (learning_rate > 0, 0 <= dropout < 1, alpha >= 1, ...).
void validate(const Settings& settings);

// Checkpoint: parameters, optimizer state, best snapshot, epoch counter,
// loss history and both configurations in one TensorArchive.
void save_checkpoint(const std::string& path, const Model& model, const TrainState& state,
                     const TrainConfig& config,
                     const std::map<std::string, std::string>& extra_metadata = {});

struct LoadedCheckpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  ParamStore params;
  TrainState state;
  std::map<std::string, std::string> metadata;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// Runs grad_check on the full objective over a batch with a fixed dropout
// seed.
GradCheckReport check_model_gradients(Model& model, std::span<const TrainExample> batch,
                                      double dropout, double eps,
                                      const GradCheckOptions& options = {});

}  // namespace dcgrank
