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

#include "dcgrank/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dcgrank {

namespace {

using nlohmann::json;

enum Purpose : std::uint64_t { kNegatives = 1, kShuffle, kDropout, kPairs, kValidation, kParanoid };

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void log_to(const TrainHooks& hooks, const std::string& msg) {
  if (hooks.log) hooks.log(msg);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

const char* stage_name(Stage s) { return s == Stage::pretrain ? "pretrain" : "finetune"; }

Stage stage_from(const std::string& s) {
  if (s == "pretrain") return Stage::pretrain;
  if (s == "finetune") return Stage::finetune;
  throw std::invalid_argument("unknown stage \"" + s + "\"");
}

TrainExample make_example(const Corpus& corpus, const Query& q, std::size_t better,
                          std::size_t worse) {
  TrainExample ex;
  ex.query = q;
  ex.query_tokens = query_token_ids(q, corpus.vocab);
  ex.better = better;
  ex.worse = worse;
  return ex;
}

// Mean losses over a list of examples in evaluation mode.
BatchLoss evaluate_examples(Model& model, std::span<const TrainExample> examples,
                            std::size_t batch_size) {
  BatchLoss sum;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < examples.size(); i += batch_size) {
    const auto n = std::min(batch_size, examples.size() - i);
    const auto b = batch_objective(model, examples.subspan(i, n), 0.0, nullptr, false);
    sum.total += b.total * static_cast<double>(n);
    sum.graph += b.graph * static_cast<double>(n);
    sum.rank += b.rank * static_cast<double>(n);
    seen += n;
  }
  if (seen > 0) {
    sum.total /= static_cast<double>(seen);
    sum.graph /= static_cast<double>(seen);
    sum.rank /= static_cast<double>(seen);
  }
  return sum;
}

// One finite-difference coordinate against the analytic gradient already in
// the store. Throws EvaluationError when they disagree.
void paranoid_check(Model& model, std::span<const TrainExample> batch, double dropout,
                    std::uint64_t dropout_seed_step, const TrainConfig& cfg, std::size_t epoch,
                    std::size_t step) {
  auto rng = stream_rng(cfg.seed, cfg.stage, epoch, step, kParanoid);
  auto& params = model.params();
  const auto names = params.names();
  std::uniform_int_distribution<std::size_t> pick_param(0, names.size() - 1);
  const auto& name = names[pick_param(rng)];
  Tensor2& value = params.value(name);
  std::uniform_int_distribution<std::size_t> pick_coord(0, value.size() - 1);
  const std::size_t k = pick_coord(rng);
  const double analytic = params.grad(name)[k];

  auto eval = [&] {
    auto drop = stream_rng(cfg.seed, cfg.stage, epoch, dropout_seed_step, kDropout);
    return batch_objective(model, batch, dropout, &drop, false).total;
  };
  const double eps = 1e-5;
  const double saved = value[k];
  value[k] = saved + eps;
  const double up = eval();
  value[k] = saved - eps;
  const double down = eval();
  value[k] = saved;
  const double numeric = (up - down) / (2.0 * eps);
  const double rel =
      std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
  if (!(rel <= cfg.paranoid_tolerance)) {
    std::ostringstream msg;
    msg << "gradient spot check failed at epoch " << epoch << " batch " << step << ": " << name
        << "[" << k << "] analytic " << analytic << " numeric " << numeric << " rel " << rel;
    throw EvaluationError(msg.str());
  }
}

using EpochSource = std::function<std::vector<TrainExample>(std::size_t epoch)>;

TrainState train_loop(Model& model, const TrainConfig& cfg, const TrainHooks& hooks,
                      std::optional<TrainState> resume, const EpochSource& epoch_examples,
                      std::span<const TrainExample> validation) {
  if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
    throw std::invalid_argument("momentum must be in [0, 1)");
  }
  TrainState state = resume ? std::move(*resume) : TrainState{};
  if (!resume) state.best_val_rank = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = state.epochs_done + 1; epoch <= cfg.epochs; ++epoch) {
    auto examples = epoch_examples(epoch);
    auto shuffle_rng = stream_rng(cfg.seed, cfg.stage, epoch, 0, kShuffle);
    std::shuffle(examples.begin(), examples.end(), shuffle_rng);

    BatchLoss sum;
    std::size_t batches = 0;
    for (std::size_t i = 0; i < examples.size(); i += cfg.batch_size) {
      const std::size_t step = batches + 1;
      const auto n = std::min(cfg.batch_size, examples.size() - i);
      const auto batch = std::span<const TrainExample>(examples).subspan(i, n);
      model.params().zero_grad();
      auto drop = stream_rng(cfg.seed, cfg.stage, epoch, step, kDropout);
      const auto loss = batch_objective(model, batch, cfg.dropout, &drop, true);
      if (cfg.paranoid && cfg.paranoid_every > 0 && (step - 1) % cfg.paranoid_every == 0) {
        paranoid_check(model, batch, cfg.dropout, step, cfg, epoch, step);
      }
      try {
        adagrad_step(model.params(), state.optimizer, cfg.learning_rate, cfg.momentum,
                     cfg.adagrad_eps);
      } catch (const EvaluationError& e) {
        throw EvaluationError(std::string(stage_name(cfg.stage)) + " epoch " +
                              std::to_string(epoch) + " batch " + std::to_string(step) + ": " +
                              e.what());
      }
      sum.total += loss.total;
      sum.graph += loss.graph;
      sum.rank += loss.rank;
      ++batches;
    }

    EpochLog log;
    log.epoch = epoch;
    if (batches > 0) {
      log.train_loss = sum.total / static_cast<double>(batches);
      log.train_graph = sum.graph / static_cast<double>(batches);
      log.train_rank = sum.rank / static_cast<double>(batches);
    }
    log.val_rank = kNaN;
    log.val_loss = kNaN;
    if (!validation.empty()) {
      const auto v = evaluate_examples(model, validation, cfg.batch_size);
      log.val_rank = v.rank;
      log.val_loss = v.total;
      if (cfg.select_best && v.rank < state.best_val_rank) {
        state.best_val_rank = v.rank;
        state.best = model.params();
      }
    }
    state.history.push_back(log);
    state.epochs_done = epoch;
    log_to(hooks, std::string(stage_name(cfg.stage)) + " epoch " + std::to_string(epoch) +
                      " loss " + fmt(log.train_loss) + " graph " + fmt(log.train_graph) +
                      " rank " + fmt(log.train_rank) +
                      (validation.empty() ? "" : " val_rank " + fmt(log.val_rank)));
    if (hooks.on_epoch) hooks.on_epoch(model, state, cfg);
  }

  if (cfg.select_best && state.best) {
    for (auto& [name, p] : model.params()) p.value = state.best->value(name);
  }
  return state;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// Optimizer and sampling

void adagrad_step(ParamStore& params, AdagradState& state, double learning_rate,
                  double momentum, double eps) {
  for (const auto& [name, p] : params) {
    if (!p.grad.all_finite()) throw EvaluationError("non-finite gradient in parameter " + name);
  }
  for (auto& [name, p] : params) {
    auto& acc = state.accumulator[name];
    if (acc.size() == 0 && p.value.size() != 0) acc = Tensor2(p.value.rows(), p.value.cols());
    Tensor2* vel = nullptr;
    if (momentum > 0.0) {
      vel = &state.velocity[name];
      if (vel->size() == 0 && p.value.size() != 0) *vel = Tensor2(p.value.rows(), p.value.cols());
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      acc[i] += g * g;
      const double step = learning_rate * g / (std::sqrt(acc[i]) + eps);
      if (vel) {
        (*vel)[i] = momentum * (*vel)[i] + step;
        p.value[i] -= (*vel)[i];
      } else {
        p.value[i] -= step;
      }
    }
  }
}

std::vector<std::size_t> sample_negatives(std::span<const std::size_t> positives,
                                          std::size_t num_docs, std::mt19937_64& rng) {
  if (num_docs < 2) {
    throw std::invalid_argument("negative sampling needs at least two documents");
  }
  std::uniform_int_distribution<std::size_t> pick(0, num_docs - 2);
  std::vector<std::size_t> out;
  out.reserve(positives.size());
  for (auto p : positives) {
    if (p >= num_docs) throw IndexError("positive document " + std::to_string(p) + " out of range");
    std::size_t n = pick(rng);
    if (n >= p) ++n;
    out.push_back(n);
  }
  return out;
}

std::mt19937_64 stream_rng(std::uint64_t seed, Stage stage, std::uint64_t epoch,
                           std::uint64_t step, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stage), static_cast<std::uint32_t>(epoch),
                    static_cast<std::uint32_t>(epoch >> 32), static_cast<std::uint32_t>(step),
                    static_cast<std::uint32_t>(step >> 32), static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Objective

BatchLoss batch_objective(Model& model, std::span<const TrainExample> batch, double dropout,
                          std::mt19937_64* dropout_rng, bool backward) {
  if (batch.empty()) throw std::invalid_argument("batch_objective: empty batch");
  const auto& cfg = model.config();
  const auto& rank_cfg = cfg.ranking;
  Tape tape(&model.params());
  const DropoutContext drop{dropout, dropout_rng};

  std::vector<std::vector<Var>> concept_layers;
  if (cfg.doc.use_graph) concept_layers = concept_forward(tape, model.graph(), cfg.doc);

  // Overlays: one for the whole batch, or one per query.
  std::vector<MatchOverlay> overlays;
  std::vector<std::size_t> overlay_of(batch.size(), 0);
  if (cfg.match_scope == MatchScope::batch) {
    std::vector<Query> qs;
    for (const auto& ex : batch) qs.push_back(ex.query);
    overlays.push_back(model.overlay_for(qs));
  } else {
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto [it, fresh] = seen.emplace(batch[i].query.id, overlays.size());
      if (fresh) overlays.push_back(model.overlay_for(std::span<const Query>(&batch[i].query, 1)));
      overlay_of[i] = it->second;
    }
  }

  // The encoder does not depend on the overlay, so it runs once per doc.
  std::map<std::size_t, Var> enc_vars;
  std::map<std::pair<std::size_t, std::size_t>, Var> doc_vars;  // (overlay, doc) -> v_d
  std::vector<std::size_t> doc_order;                             // first-seen docs
  auto maybe_drop = [&](Var v) { return drop.active() ? tape.dropout(v, dropout, *dropout_rng) : v; };
  auto doc_var = [&](std::size_t overlay, std::size_t d) {
    auto key = std::make_pair(overlay, d);
    auto it = doc_vars.find(key);
    if (it != doc_vars.end()) return it->second;
    auto e = enc_vars.find(d);
    if (e == enc_vars.end()) {
      auto states = encode(tape, model.corpus().documents.at(d).tokens, cfg.doc, drop);
      e = enc_vars.emplace(d, maybe_drop(states.pooled)).first;
      doc_order.push_back(d);
    }
    Var g;
    if (cfg.doc.use_graph) {
      Var init = initial_doc_state(tape, e->second, cfg.doc);
      g = propagate_document(tape, model.graph(), overlays[overlay], d, init, concept_layers,
                             cfg.alpha, cfg.doc)
              .back();
    } else {
      g = tape.zeros(1, cfg.doc.gcn_dim);
    }
    Var v = maybe_drop(fuse(tape, e->second, g, cfg.doc));
    doc_vars.emplace(key, v);
    return v;
  };

  BatchLoss out;
  std::optional<Var> rank;
  if (rank_cfg.gamma != 0.0) {
    std::map<std::string, Var> query_vars;
    Var w = tape.param(kRankW);
    std::vector<Var> losses;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& ex = batch[i];
      auto it = query_vars.find(ex.query.id);
      if (it == query_vars.end()) {
        it = query_vars.emplace(ex.query.id, encode_query(tape, ex.query_tokens, cfg.query)).first;
      }
      Var fb = score(tape, it->second, doc_var(overlay_of[i], ex.better), w, rank_cfg.norm);
      Var fw = score(tape, it->second, doc_var(overlay_of[i], ex.worse), w, rank_cfg.norm);
      losses.push_back(pair_loss(tape, fb, fw, rank_cfg.margin));
    }
    rank = rank_loss(tape, losses);
    out.rank = tape.value(*rank)[0];
  } else {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      doc_var(overlay_of[i], batch[i].better);
      doc_var(overlay_of[i], batch[i].worse);
    }
  }

  std::optional<Var> graph;
  if (rank_cfg.beta != 0.0) {
    std::vector<std::vector<std::size_t>> titles;
    std::vector<Var> docs;
    for (auto d : doc_order) {
      const auto& title = model.corpus().documents[d].title_tokens;
      titles.push_back(title);
      // Any overlay's vector will do; take the first one computed for d.
      for (const auto& [key, v] : doc_vars) {
        if (key.second == d) {
          docs.push_back(v);
          break;
        }
      }
    }
    bool any_title = std::any_of(titles.begin(), titles.end(),
                                 [](const auto& t) { return !t.empty(); });
    if (any_title) {
      graph = graph_loss(tape, titles, docs, cfg.doc, &out.skipped_titles);
      out.graph = tape.value(*graph)[0];
    } else {
      out.skipped_titles = titles.size();
    }
  }

  std::optional<Var> total;
  if (graph) total = tape.scale(*graph, rank_cfg.beta);
  if (rank) {
    Var r = tape.scale(*rank, rank_cfg.gamma);
    total = total ? tape.add(*total, r) : r;
  }
  out.total = total ? tape.value(*total)[0] : 0.0;
  if (backward && total) tape.backward(*total);
  return out;
}

// ---------------------------------------------------------------------------
// Stages

PretrainSplit split_pretrain(std::size_t num_docs, std::uint64_t seed) {
  std::vector<std::size_t> idx(num_docs);
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = stream_rng(seed, Stage::pretrain, 0, 0, kValidation);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t held = num_docs >= 3 ? std::max<std::size_t>(1, num_docs / 10) : 0;
  PretrainSplit s;
  s.validation.assign(idx.begin(), idx.begin() + held);
  s.test.assign(idx.begin() + held, idx.begin() + 2 * held);
  s.train.assign(idx.begin() + 2 * held, idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Query doc_mesh_query(const Corpus& corpus, std::size_t doc, const ExpansionLexicon& lexicon) {
  const auto& d = corpus.documents.at(doc);
  return mesh_query("mesh:" + d.id, d.mesh, lexicon);
}

TrainState pretrain(Model& model, const ExpansionLexicon& lexicon, const TrainConfig& config,
                    const TrainHooks& hooks, std::optional<TrainState> resume) {
  const auto& corpus = model.corpus();
  std::vector<std::string> missing;
  for (const auto& d : corpus.documents) {
    if (d.mesh.empty()) missing.push_back(d.id);
  }
  if (!missing.empty()) {
    std::string msg = "documents without indexing terms:";
    for (const auto& id : missing) msg += " " + id;
    throw IngestError(msg);
  }
  if (corpus.documents.size() < 2) {
    throw std::invalid_argument("pretraining needs at least two documents");
  }
  TrainConfig cfg = config;
  cfg.stage = Stage::pretrain;

  const auto split = split_pretrain(corpus.documents.size(), cfg.seed);
  std::vector<Query> queries;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    queries.push_back(doc_mesh_query(corpus, d, lexicon));
  }
  std::vector<std::vector<std::size_t>> query_tokens;
  for (const auto& q : queries) query_tokens.push_back(query_token_ids(q, corpus.vocab));

  auto build = [&](std::span<const std::size_t> positives, std::mt19937_64& rng) {
    const auto negs = sample_negatives(positives, corpus.documents.size(), rng);
    std::vector<TrainExample> out;
    out.reserve(positives.size());
    for (std::size_t i = 0; i < positives.size(); ++i) {
      TrainExample ex;
      ex.query = queries[positives[i]];
      ex.query_tokens = query_tokens[positives[i]];
      ex.better = positives[i];
      ex.worse = negs[i];
      out.push_back(std::move(ex));
    }
    return out;
  };

  auto val_rng = stream_rng(cfg.seed, cfg.stage, 0, 0, kValidation);
  const auto validation = build(split.validation, val_rng);
  log_to(hooks, "pretrain split: " + std::to_string(split.train.size()) + " train, " +
                    std::to_string(split.validation.size()) + " validation, " +
                    std::to_string(split.test.size()) + " test");

  return train_loop(
      model, cfg, hooks, std::move(resume),
      [&](std::size_t epoch) {
        auto rng = stream_rng(cfg.seed, cfg.stage, epoch, 0, kNegatives);
        return build(split.train, rng);
      },
      validation);
}

TrainState finetune(Model& model, std::span<const Query> topics, const QRels& qrels,
                    const ExpansionLexicon& lexicon, const TrainConfig& config,
                    const TrainHooks& hooks, std::optional<TrainState> resume) {
  const auto& corpus = model.corpus();
  TrainConfig cfg = config;
  cfg.stage = Stage::finetune;

  struct Topic {
    Query query;
    std::map<std::string, int> judgments;
  };
  std::vector<Topic> usable;
  for (const auto& q : topics) {
    auto it = qrels.find(q.id);
    std::map<std::string, int> judged;
    std::size_t unknown = 0;
    if (it != qrels.end()) {
      for (const auto& [doc, rel] : it->second) {
        if (corpus.doc_index(doc)) {
          judged.emplace(doc, rel);
        } else {
          ++unknown;
        }
      }
    }
    if (unknown > 0) {
      log_to(hooks, "warning: topic " + q.id + ": " + std::to_string(unknown) +
                        " judged documents are not in the corpus");
    }
    const bool any_relevant =
        std::any_of(judged.begin(), judged.end(), [](const auto& kv) { return kv.second > 0; });
    if (!any_relevant) {
      log_to(hooks, "warning: topic " + q.id + " has no relevant documents; excluded");
      continue;
    }
    usable.push_back({expand(q, lexicon), std::move(judged)});
  }
  if (usable.empty()) {
    log_to(hooks, "warning: no usable topics; model left unchanged");
    return resume ? std::move(*resume) : TrainState{};
  }

  std::vector<std::string> candidates;
  candidates.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) candidates.push_back(d.id);

  // No held-out split at this stage; the final parameters are kept.
  cfg.select_best = false;
  return train_loop(
      model, cfg, hooks, std::move(resume),
      [&](std::size_t epoch) {
        auto rng = stream_rng(cfg.seed, cfg.stage, epoch, 0, kPairs);
        std::vector<TrainExample> out;
        for (const auto& t : usable) {
          for (const auto& p :
               make_pairs(t.query.id, t.judgments, candidates, cfg.pairs_per_query, rng)) {
            out.push_back(make_example(corpus, t.query, *corpus.doc_index(p.better),
                                       *corpus.doc_index(p.worse)));
          }
        }
        return out;
      },
      {});
}

// ---------------------------------------------------------------------------
// Configuration

json to_json(const ModelConfig& c) {
  json doc = {{"embed_dim", c.doc.embed_dim},
              {"hidden_dim", c.doc.hidden_dim},
              {"encoder_layers", c.doc.encoder_layers},
              {"gcn_dim", c.doc.gcn_dim},
              {"gcn_layers", c.doc.gcn_layers},
              {"doc_dim", c.doc.doc_dim},
              {"decoder_hidden", c.doc.decoder_hidden},
              {"max_title_len", c.doc.max_title_len},
              {"self_loops", c.doc.self_loops},
              {"mean_aggregation", c.doc.mean_aggregation},
              {"use_graph", c.doc.use_graph},
              {"decoder_feed_doc", c.doc.decoder_feed_doc},
              {"dropout", c.doc.dropout}};
  json query = {{"filter_widths", c.query.filter_widths},
                {"filters", c.query.filters},
                {"query_dim", c.query.query_dim}};
  json ranking = {{"norm", c.ranking.norm == Norm::l2 ? "l2" : "l1"},
                  {"margin", c.ranking.margin},
                  {"beta", c.ranking.beta},
                  {"gamma", c.ranking.gamma}};
  return {{"doc", doc},
          {"query", query},
          {"ranking", ranking},
          {"alpha", c.alpha},
          {"match_scope", c.match_scope == MatchScope::batch ? "batch" : "query"}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  const auto& d = j.at("doc");
  c.doc.embed_dim = d.at("embed_dim");
  c.doc.hidden_dim = d.at("hidden_dim");
  c.doc.encoder_layers = d.at("encoder_layers");
  c.doc.gcn_dim = d.at("gcn_dim");
  c.doc.gcn_layers = d.at("gcn_layers");
  c.doc.doc_dim = d.at("doc_dim");
  c.doc.decoder_hidden = d.at("decoder_hidden");
  c.doc.max_title_len = d.at("max_title_len");
  c.doc.self_loops = d.at("self_loops");
  c.doc.mean_aggregation = d.at("mean_aggregation");
  c.doc.use_graph = d.at("use_graph");
  c.doc.decoder_feed_doc = d.at("decoder_feed_doc");
  c.doc.dropout = d.at("dropout");
  const auto& q = j.at("query");
  c.query.filter_widths = q.at("filter_widths").get<std::vector<std::size_t>>();
  c.query.filters = q.at("filters");
  c.query.query_dim = q.at("query_dim");
  const auto& r = j.at("ranking");
  const std::string norm = r.at("norm");
  if (norm != "l1" && norm != "l2") throw FormatError("unknown norm \"" + norm + "\"");
  c.ranking.norm = norm == "l2" ? Norm::l2 : Norm::l1;
  c.ranking.margin = r.at("margin");
  c.ranking.beta = r.at("beta");
  c.ranking.gamma = r.at("gamma");
  c.alpha = j.at("alpha");
  const std::string scope = j.at("match_scope");
  if (scope != "batch" && scope != "query") {
    throw FormatError("unknown match scope \"" + scope + "\"");
  }
  c.match_scope = scope == "batch" ? MatchScope::batch : MatchScope::query;
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"dropout", c.dropout},
          {"seed", c.seed},
          {"momentum", c.momentum},
          {"adagrad_eps", c.adagrad_eps},
          {"pairs_per_query", c.pairs_per_query},
          {"select_best", c.select_best},
          {"paranoid", c.paranoid},
          {"paranoid_every", c.paranoid_every},
          {"paranoid_tolerance", c.paranoid_tolerance},
          {"stage", stage_name(c.stage)}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate");
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.dropout = j.at("dropout");
  c.seed = j.at("seed");
  c.momentum = j.at("momentum");
  c.adagrad_eps = j.at("adagrad_eps");
  c.pairs_per_query = j.at("pairs_per_query");
  c.select_best = j.at("select_best");
  c.paranoid = j.at("paranoid");
  c.paranoid_every = j.at("paranoid_every");
  c.paranoid_tolerance = j.at("paranoid_tolerance");
  c.stage = stage_from(j.at("stage"));
  return c;
}

std::string config_hash(const ModelConfig& model, const TrainConfig& train) {
  json j = {{"model", to_json(model)}, {"train", to_json(train)}};
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Settings files

namespace {

double to_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(out)) {
    throw std::invalid_argument("setting " + key + ": expected a number, got \"" + v + "\"");
  }
  return out;
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("setting " + key + ": expected a non-negative integer, got \"" +
                                v + "\"");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw std::invalid_argument("setting " + key + ": value out of range");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("setting " + key + ": expected true/false, got \"" + v + "\"");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using Setter = std::function<void(Settings&, const std::string& key, const std::string& v)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["learning_rate"] = [](Settings& s, auto& k, auto& v) { s.train.learning_rate = to_real(k, v); };
    t["epochs"] = [](Settings& s, auto& k, auto& v) { s.train.epochs = to_count(k, v); };
    t["batch_size"] = [](Settings& s, auto& k, auto& v) { s.train.batch_size = to_count(k, v); };
    t["dropout"] = [](Settings& s, auto& k, auto& v) {
      s.train.dropout = to_real(k, v);
      s.model.doc.dropout = s.train.dropout;
    };
    t["seed"] = [](Settings& s, auto& k, auto& v) { s.train.seed = to_count(k, v); };
    t["momentum"] = [](Settings& s, auto& k, auto& v) { s.train.momentum = to_real(k, v); };
    t["plain_adagrad"] = [](Settings& s, auto& k, auto& v) {
      if (to_bool(k, v)) s.train.momentum = 0.0;
    };
    t["adagrad_eps"] = [](Settings& s, auto& k, auto& v) { s.train.adagrad_eps = to_real(k, v); };
    t["pairs_per_query"] = [](Settings& s, auto& k, auto& v) {
      s.train.pairs_per_query = to_count(k, v);
    };
    t["select_best"] = [](Settings& s, auto& k, auto& v) { s.train.select_best = to_bool(k, v); };
    t["paranoid"] = [](Settings& s, auto& k, auto& v) { s.train.paranoid = to_bool(k, v); };
    t["paranoid_every"] = [](Settings& s, auto& k, auto& v) {
      s.train.paranoid_every = to_count(k, v);
    };
    t["alpha"] = [](Settings& s, auto& k, auto& v) { s.model.alpha = to_real(k, v); };
    t["match_scope"] = [](Settings& s, auto& k, auto& v) {
      if (v == "batch") {
        s.model.match_scope = MatchScope::batch;
      } else if (v == "query") {
        s.model.match_scope = MatchScope::query;
      } else {
        throw std::invalid_argument("setting " + k + ": expected batch or query");
      }
    };
    t["norm"] = [](Settings& s, auto& k, auto& v) {
      if (v == "l1") {
        s.model.ranking.norm = Norm::l1;
      } else if (v == "l2") {
        s.model.ranking.norm = Norm::l2;
      } else {
        throw std::invalid_argument("setting " + k + ": expected l1 or l2");
      }
    };
    t["margin"] = [](Settings& s, auto& k, auto& v) { s.model.ranking.margin = to_real(k, v); };
    t["beta"] = [](Settings& s, auto& k, auto& v) { s.model.ranking.beta = to_real(k, v); };
    t["gamma"] = [](Settings& s, auto& k, auto& v) { s.model.ranking.gamma = to_real(k, v); };
    t["embed_dim"] = [](Settings& s, auto& k, auto& v) { s.model.doc.embed_dim = to_count(k, v); };
    t["hidden_dim"] = [](Settings& s, auto& k, auto& v) { s.model.doc.hidden_dim = to_count(k, v); };
    t["encoder_layers"] = [](Settings& s, auto& k, auto& v) {
      s.model.doc.encoder_layers = to_count(k, v);
    };
    t["gcn_dim"] = [](Settings& s, auto& k, auto& v) { s.model.doc.gcn_dim = to_count(k, v); };
    t["gcn_layers"] = [](Settings& s, auto& k, auto& v) { s.model.doc.gcn_layers = to_count(k, v); };
    t["doc_dim"] = [](Settings& s, auto& k, auto& v) { s.model.doc.doc_dim = to_count(k, v); };
    t["decoder_hidden"] = [](Settings& s, auto& k, auto& v) {
      s.model.doc.decoder_hidden = to_count(k, v);
    };
    t["max_title_len"] = [](Settings& s, auto& k, auto& v) {
      s.model.doc.max_title_len = to_count(k, v);
    };
    t["self_loops"] = [](Settings& s, auto& k, auto& v) { s.model.doc.self_loops = to_bool(k, v); };
    t["mean_aggregation"] = [](Settings& s, auto& k, auto& v) {
      s.model.doc.mean_aggregation = to_bool(k, v);
    };
    t["use_graph"] = [](Settings& s, auto& k, auto& v) { s.model.doc.use_graph = to_bool(k, v); };
    t["decoder_feed_doc"] = [](Settings& s, auto& k, auto& v) {
      s.model.doc.decoder_feed_doc = to_bool(k, v);
    };
    t["filters"] = [](Settings& s, auto& k, auto& v) { s.model.query.filters = to_count(k, v); };
    t["query_dim"] = [](Settings& s, auto& k, auto& v) { s.model.query.query_dim = to_count(k, v); };
    t["filter_widths"] = [](Settings& s, auto& k, auto& v) {
      std::vector<std::size_t> widths;
      std::stringstream ss(v);
      std::string part;
      while (std::getline(ss, part, ',')) widths.push_back(to_count(k, trim(part)));
      if (widths.empty()) throw std::invalid_argument("setting " + k + ": empty list");
      s.model.query.filter_widths = widths;
    };
    return t;
  }();
  return table;
}

}  // namespace

void apply_setting(Settings& settings, const std::string& key, const std::string& value) {
  auto it = setters().find(key);
  if (it == setters().end()) throw std::invalid_argument("unknown setting \"" + key + "\"");
  it->second(settings, key, value);
}

Settings parse_settings(std::istream& in, const std::string& name, Settings base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(name, line_no, "expected key = value");
    try {
      apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw ParseError(name, line_no, e.what());
    }
  }
  return base;
}

Settings load_settings(const std::string& path, Settings base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_settings(in, path, std::move(base));
}

std::vector<std::string> setting_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

void validate(const Settings& s) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (!(s.train.learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(s.train.dropout >= 0.0 && s.train.dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(s.train.momentum >= 0.0 && s.train.momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (s.train.batch_size == 0) fail("batch_size must be >= 1");
  if (s.train.pairs_per_query == 0) fail("pairs_per_query must be >= 1");
  if (!(s.model.alpha >= 1.0)) fail("alpha must be >= 1");
  if (!(s.model.ranking.margin >= 0.0)) fail("margin must be >= 0");
  if (s.model.ranking.beta < 0.0 || s.model.ranking.gamma < 0.0) fail("beta and gamma must be >= 0");
  if (s.model.ranking.beta == 0.0 && s.model.ranking.gamma == 0.0) fail("beta and gamma are both 0");
  const auto& d = s.model.doc;
  if (d.embed_dim == 0 || d.gcn_dim == 0 || d.doc_dim == 0 || d.decoder_hidden == 0) {
    fail("dimensions must be >= 1");
  }
  if (d.hidden_dim == 0 || d.hidden_dim % 2 != 0) fail("hidden_dim must be even and >= 2");
  if (d.encoder_layers == 0) fail("encoder_layers must be >= 1");
  if (d.max_title_len == 0) fail("max_title_len must be >= 1");
  if (s.model.query.filters == 0 || s.model.query.query_dim == 0) fail("filters and query_dim must be >= 1");
  for (auto w : s.model.query.filter_widths) {
    if (w == 0) fail("filter widths must be >= 1");
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kParamPrefix = "param/";
constexpr const char* kAccPrefix = "adagrad.acc/";
constexpr const char* kVelPrefix = "adagrad.vel/";
constexpr const char* kBestPrefix = "best/";
constexpr const char* kHistory = "state/history";
constexpr const char* kBestVal = "state/best_val_rank";
constexpr std::size_t kHistoryCols = 6;

void put_prefixed(TensorArchive& ar, const std::map<std::string, Tensor2>& tensors,
                  const std::string& prefix) {
  for (const auto& [name, t] : tensors) ar.tensors[prefix + name] = t;
}

std::map<std::string, Tensor2> take_prefixed(const TensorArchive& ar, const std::string& prefix) {
  std::map<std::string, Tensor2> out;
  for (const auto& [name, t] : ar.tensors) {
    if (name.compare(0, prefix.size(), prefix) == 0) out[name.substr(prefix.size())] = t;
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const TrainState& state,
                     const TrainConfig& config,
                     const std::map<std::string, std::string>& extra_metadata) {
  TensorArchive ar;
  ar.metadata = extra_metadata;
  ar.metadata["model_config"] = to_json(model.config()).dump();
  ar.metadata["train_config"] = to_json(config).dump();
  ar.metadata["config_hash"] = config_hash(model.config(), config);
  ar.metadata["epochs_done"] = std::to_string(state.epochs_done);
  ar.metadata["has_best"] = state.best ? "1" : "0";

  save_params(model.params(), ar, kParamPrefix);
  put_prefixed(ar, state.optimizer.accumulator, kAccPrefix);
  put_prefixed(ar, state.optimizer.velocity, kVelPrefix);
  if (state.best) save_params(*state.best, ar, kBestPrefix);

  Tensor2 hist(state.history.size(), kHistoryCols);
  for (std::size_t i = 0; i < state.history.size(); ++i) {
    const auto& h = state.history[i];
    const double row[kHistoryCols] = {static_cast<double>(h.epoch), h.train_loss, h.train_graph,
                                      h.train_rank, h.val_rank, h.val_loss};
    for (std::size_t c = 0; c < kHistoryCols; ++c) hist(i, c) = row[c];
  }
  ar.tensors[kHistory] = hist;
  ar.tensors[kBestVal] = Tensor2(1, 1, state.best_val_rank);
  ar.save(path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  const auto ar = TensorArchive::load(path);
  LoadedCheckpoint out;
  auto meta = [&](const char* key) -> const std::string& {
    auto it = ar.metadata.find(key);
    if (it == ar.metadata.end()) throw FormatError(path + ": checkpoint lacks " + key);
    return it->second;
  };
  try {
    out.model_config = model_config_from_json(json::parse(meta("model_config")));
    out.train_config = train_config_from_json(json::parse(meta("train_config")));
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad configuration: " + e.what());
  }
  if (config_hash(out.model_config, out.train_config) != meta("config_hash")) {
    throw FormatError(path + ": configuration hash mismatch");
  }
  out.metadata = ar.metadata;

  for (auto& [name, t] : take_prefixed(ar, kParamPrefix)) out.params.add(name, std::move(t));
  if (out.params.count() == 0) throw FormatError(path + ": checkpoint holds no parameters");
  out.state.optimizer.accumulator = take_prefixed(ar, kAccPrefix);
  out.state.optimizer.velocity = take_prefixed(ar, kVelPrefix);
  if (meta("has_best") == "1") {
    ParamStore best;
    for (auto& [name, t] : take_prefixed(ar, kBestPrefix)) best.add(name, std::move(t));
    out.state.best = std::move(best);
  }
  out.state.epochs_done = std::stoull(meta("epochs_done"));
  auto hist = ar.tensors.find(kHistory);
  auto best_val = ar.tensors.find(kBestVal);
  if (hist == ar.tensors.end() || best_val == ar.tensors.end() ||
      (hist->second.size() > 0 && hist->second.cols() != kHistoryCols)) {
    throw FormatError(path + ": checkpoint lacks training state");
  }
  for (std::size_t i = 0; i < hist->second.rows(); ++i) {
    const auto& h = hist->second;
    out.state.history.push_back({static_cast<std::size_t>(h(i, 0)), h(i, 1), h(i, 2), h(i, 3),
                                 h(i, 4), h(i, 5)});
  }
  out.state.best_val_rank = best_val->second[0];
  return out;
}

// ---------------------------------------------------------------------------

GradCheckReport check_model_gradients(Model& model, std::span<const TrainExample> batch,
                                      double dropout, double eps,
                                      const GradCheckOptions& options) {
  const std::uint64_t dropout_seed = options.seed ^ 0x5bd1e995ULL;
  Objective f = [&](ParamStore&) {
    std::mt19937_64 rng(dropout_seed);
    return batch_objective(model, batch, dropout, dropout > 0.0 ? &rng : nullptr, true).total;
  };
  return grad_check(f, model.params(), eps, options);
}

}  // namespace dcgrank
