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

// dcgrank command-line driver.
//
//   dcgrank ingest      --docs D --concepts C [--embeddings E] --out DIR
//   dcgrank build-graph --corpus DIR [--kb K] --out graph.json
//   dcgrank pretrain    --corpus DIR --graph G [--lexicon L] --out ckpt
//   dcgrank finetune    --corpus DIR --graph G --queries Q --qrels R --out ckpt
//   dcgrank rank        --checkpoint ckpt --corpus DIR --graph G --queries Q --out run
//   dcgrank eval        --run run --qrels R [--metric ndcg --n 20]
//   dcgrank gradcheck   [--corrupt]
//   dcgrank synth       --kind containment|kb|toy --out DIR
//
// Every command that writes an artifact also writes <artifact>.manifest.json
// (or DIR/manifest.json) with the effective settings, input digests, seed
// and timing.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dcgrank/corpus.hpp"
#include "dcgrank/dcgraph.hpp"
#include "dcgrank/gradcheck.hpp"
#include "dcgrank/metrics.hpp"
#include "dcgrank/queryrep.hpp"
#include "dcgrank/ranker.hpp"
#include "dcgrank/synthetic.hpp"
#include "dcgrank/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dcgrank;

namespace {

constexpr const char* kVersion = "0.3.0";

void info(const std::string& msg) { std::cerr << "info: " << msg << "\n"; }
void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[32];
  std::snprintf(out, sizeof out, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return out;
}

// Flags shared by every command. Optional ones only override when given.
struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::string ablate;
  std::string norm;
  std::optional<double> margin;
  std::optional<double> alpha;
  bool graded_ap = false;
  bool paranoid = false;
  std::vector<std::string> set;  // key=value overrides
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Root random seed");
  app->add_option("--config", c.config, "Settings file (key = value lines)")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "Output path");
  app->add_option("--ablate", c.ablate, "Ablation: graph (no graph half) or reward (alpha = 1)")
      ->check(CLI::IsMember({"graph", "reward"}));
  app->add_option("--norm", c.norm, "Distance norm")->check(CLI::IsMember({"l1", "l2"}));
  app->add_option("--margin", c.margin, "Pairwise hinge margin");
  app->add_option("--alpha", c.alpha, "Reward factor on matched edges (>= 1)");
  app->add_flag("--graded-ap", c.graded_ap, "Grade-weighted average precision");
  app->add_flag("--paranoid", c.paranoid, "Finite-difference spot checks during training");
  app->add_option("--set", c.set, "Override one setting, key=value (repeatable)");
}

// Flags and the settings file on top of `base`; flags win.
Settings resolve(const Common& c, Settings base) {
  Settings s = c.config.empty() ? std::move(base) : load_settings(c.config, std::move(base));
  for (const auto& kv : c.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
    apply_setting(s, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) s.train.seed = *c.seed;
  if (!c.norm.empty()) apply_setting(s, "norm", c.norm);
  if (c.margin) s.model.ranking.margin = *c.margin;
  if (c.alpha) s.model.alpha = *c.alpha;
  if (c.paranoid) s.train.paranoid = true;
  if (c.ablate == "graph") s.model.doc.use_graph = false;
  if (c.ablate == "reward") s.model.alpha = 1.0;
  validate(s);
  return s;
}

void require_out(const Common& c) {
  if (c.out.empty()) throw std::invalid_argument("--out is required");
}

class Manifest {
 public:
  explicit Manifest(std::string command) : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["version"] = kVersion;
    j_["inputs"] = json::object();
    j_["outputs"] = json::array();
  }
  void input(const std::string& role, const std::string& path) {
    j_["inputs"][role] = {{"path", path}, {"digest", digest_file(path)}};
  }
  void output(const std::string& path) { j_["outputs"].push_back(path); }
  void settings(const Settings& s) {
    j_["seed"] = s.train.seed;
    j_["config"] = {{"model", to_json(s.model)}, {"train", to_json(s.train)}};
  }
  json& operator[](const char* key) { return j_[key]; }
  void write(const std::string& path) {
    j_["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j_.dump(2) << "\n";
    info("manifest " + path);
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

// A corpus argument may name the bundle file or the directory holding it.
std::string bundle_path(const std::string& arg) {
  return fs::is_directory(arg) ? (fs::path(arg) / "corpus.json").string() : arg;
}

std::string embeddings_path(const std::string& corpus_arg) {
  const auto p = fs::path(bundle_path(corpus_arg)).parent_path() / "embeddings.bin";
  return p.string();
}

ExpansionLexicon maybe_lexicon(const std::string& path, Manifest& m) {
  if (path.empty()) return {};
  m.input("lexicon", path);
  auto lex = load_lexicon(path);
  info("lexicon entries: " + std::to_string(lex.size()));
  return lex;
}

Model fresh_model(const Corpus& corpus, const DocumentConceptGraph& graph, const Settings& s,
                  const std::string& corpus_arg, Manifest& m) {
  const auto emb_path = embeddings_path(corpus_arg);
  if (fs::exists(emb_path)) {
    m.input("embeddings", emb_path);
    const auto ar = TensorArchive::load(emb_path);
    const auto& words = ar.tensors.at(pname::kWordEmbedding);
    if (words.cols() != s.model.doc.embed_dim || words.rows() != corpus.vocab.size()) {
      throw std::invalid_argument("embeddings " + words.shape() + " do not match vocabulary " +
                                  std::to_string(corpus.vocab.size()) + " x embed_dim " +
                                  std::to_string(s.model.doc.embed_dim));
    }
    info("word embeddings from " + emb_path);
    return Model::create(corpus, graph, s.model, s.train.seed, &words);
  }
  info("word embeddings drawn uniformly with seed " + std::to_string(s.train.seed));
  return Model::create(corpus, graph, s.model, s.train.seed);
}

// Parameters a trained checkpoint stands for: the best validation snapshot
// when one was kept, else the live parameters.
ParamStore serving_params(const LoadedCheckpoint& ck) {
  if (ck.state.best && ck.train_config.select_best) return *ck.state.best;
  return ck.params;
}

TrainHooks train_hooks(const std::string& out, const std::map<std::string, std::string>& meta) {
  TrainHooks hooks;
  hooks.log = [](const std::string& s) {
    if (s.rfind("warning: ", 0) == 0) {
      warn(s.substr(9));
    } else {
      info(s);
    }
  };
  hooks.on_epoch = [out, meta](const Model& model, const TrainState& state,
                               const TrainConfig& cfg) {
    const std::string tmp = out + ".tmp";
    save_checkpoint(tmp, model, state, cfg, meta);
    fs::rename(tmp, out);
  };
  return hooks;
}

json history_json(const TrainState& state) {
  json h = json::array();
  for (const auto& e : state.history) {
    h.push_back({{"epoch", e.epoch},
                 {"train_loss", e.train_loss},
                 {"train_graph", e.train_graph},
                 {"train_rank", e.train_rank},
                 {"val_rank", std::isfinite(e.val_rank) ? json(e.val_rank) : json(nullptr)}});
  }
  return h;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string docs, concepts, embeddings;
};

int cmd_ingest(const Common& c, const IngestArgs& a) {
  require_out(c);
  const auto s = resolve(c, {});
  Manifest m("ingest");
  m.settings(s);
  m.input("docs", a.docs);
  m.input("concepts", a.concepts);
  const Corpus corpus = load_corpus(a.docs, a.concepts);
  info("documents " + std::to_string(corpus.documents.size()) + ", concepts " +
       std::to_string(corpus.concepts.size()) + ", vocabulary " +
       std::to_string(corpus.vocab.size()));
  fs::create_directories(c.out);
  const auto bundle = (fs::path(c.out) / "corpus.json").string();
  save_corpus_bundle(corpus, bundle);
  m.output(bundle);
  const auto emb_out = (fs::path(c.out) / "embeddings.bin").string();
  if (!a.embeddings.empty()) {
    m.input("embeddings", a.embeddings);
    const auto table = load_embedding_file(a.embeddings);
    if (table.empty()) throw IngestError(a.embeddings + ": no vectors");
    const std::size_t dim = table.begin()->second.size();
    EmbeddingInitStats stats;
    TensorArchive ar;
    ar.tensors[pname::kWordEmbedding] = init_embeddings(corpus.vocab, dim, s.train.seed, &table, &stats);
    ar.metadata["dim"] = std::to_string(dim);
    ar.metadata["seed"] = std::to_string(s.train.seed);
    ar.save(emb_out);
    m.output(emb_out);
    info("embeddings dim " + std::to_string(dim) + ": " + std::to_string(stats.pretrained_hits) +
         " pretrained rows, " + std::to_string(stats.random_rows) + " random rows (seed " +
         std::to_string(s.train.seed) + ")");
  } else {
    if (fs::exists(emb_out)) fs::remove(emb_out);
    info("no embeddings given; word vectors will be drawn uniformly at training time (seed " +
         std::to_string(s.train.seed) + ")");
  }
  m.write((fs::path(c.out) / "manifest.json").string());
  return 0;
}

struct GraphArgs {
  std::string corpus, kb;
};

int cmd_build_graph(const Common& c, const GraphArgs& a) {
  require_out(c);
  const auto s = resolve(c, {});
  Manifest m("build-graph");
  m.settings(s);
  const auto bundle = bundle_path(a.corpus);
  m.input("corpus", bundle);
  const Corpus corpus = load_corpus_bundle(bundle);
  DocumentConceptGraph graph;
  if (a.kb.empty()) {
    graph = build_graph(corpus);
  } else {
    m.input("kb", a.kb);
    graph = build_graph(corpus, a.kb);
  }
  info("containment edges " + std::to_string(graph.num_containment_edges()) +
       ", knowledge edges " + std::to_string(graph.kb_edges().size()) + ", self-loops skipped " +
       std::to_string(graph.skipped_self_loops()));
  save_graph(graph, corpus, c.out);
  m.output(c.out);
  m["containment_edges"] = graph.num_containment_edges();
  m["knowledge_edges"] = graph.kb_edges().size();
  m.write(c.out + ".manifest.json");
  return 0;
}

struct TrainArgs {
  std::string corpus, graph, lexicon, queries, qrels, checkpoint, resume;
};

int cmd_pretrain(const Common& c, const TrainArgs& a) {
  require_out(c);
  Manifest m("pretrain");
  const auto bundle = bundle_path(a.corpus);
  m.input("corpus", bundle);
  m.input("graph", a.graph);
  const Corpus corpus = load_corpus_bundle(bundle);
  const auto graph = load_graph(corpus, a.graph);
  const auto lexicon = maybe_lexicon(a.lexicon, m);
  const std::map<std::string, std::string> meta = {{"manifest", c.out + ".manifest.json"},
                                                   {"corpus_digest", digest_file(bundle)}};

  std::optional<Model> model;
  std::optional<TrainState> resume;
  Settings s;
  if (!a.resume.empty()) {
    m.input("resume", a.resume);
    auto ck = load_checkpoint(a.resume);
    if (ck.train_config.stage != Stage::pretrain) {
      throw std::invalid_argument(a.resume + " is not a pretraining checkpoint");
    }
    if (auto it = ck.metadata.find("corpus_digest");
        it != ck.metadata.end() && it->second != meta.at("corpus_digest")) {
      warn("resuming on a different corpus than the checkpoint was trained on");
    }
    s = resolve(c, Settings{ck.model_config, ck.train_config});
    model.emplace(corpus, graph, s.model, std::move(ck.params));
    resume = std::move(ck.state);
    info("resuming after epoch " + std::to_string(resume->epochs_done));
  } else {
    s = resolve(c, {});
    model.emplace(fresh_model(corpus, graph, s, a.corpus, m));
  }
  s.train.stage = Stage::pretrain;
  m.settings(s);
  m["stage"] = "pretrain";
  const auto state = pretrain(*model, lexicon, s.train, train_hooks(c.out, meta), std::move(resume));
  if (state.epochs_done == 0 || !fs::exists(c.out)) {
    save_checkpoint(c.out, *model, state, s.train, meta);
  }
  m.output(c.out);
  m["history"] = history_json(state);
  m["config_hash"] = config_hash(s.model, s.train);
  m.write(c.out + ".manifest.json");
  return 0;
}

int cmd_finetune(const Common& c, const TrainArgs& a) {
  require_out(c);
  Manifest m("finetune");
  const auto bundle = bundle_path(a.corpus);
  m.input("corpus", bundle);
  m.input("graph", a.graph);
  m.input("queries", a.queries);
  m.input("qrels", a.qrels);
  const Corpus corpus = load_corpus_bundle(bundle);
  const auto graph = load_graph(corpus, a.graph);
  const auto lexicon = maybe_lexicon(a.lexicon, m);
  const auto topics = load_queries(a.queries);
  const auto qrels = load_qrels(a.qrels);
  const std::map<std::string, std::string> meta = {{"manifest", c.out + ".manifest.json"},
                                                   {"corpus_digest", digest_file(bundle)}};

  std::optional<Model> model;
  std::optional<TrainState> resume;
  Settings s;
  if (!a.resume.empty()) {
    m.input("resume", a.resume);
    auto ck = load_checkpoint(a.resume);
    if (ck.train_config.stage != Stage::finetune) {
      throw std::invalid_argument(a.resume + " is not a fine-tuning checkpoint");
    }
    s = resolve(c, Settings{ck.model_config, ck.train_config});
    model.emplace(corpus, graph, s.model, std::move(ck.params));
    resume = std::move(ck.state);
    info("resuming after epoch " + std::to_string(resume->epochs_done));
  } else if (!a.checkpoint.empty()) {
    m.input("checkpoint", a.checkpoint);
    auto ck = load_checkpoint(a.checkpoint);
    s = resolve(c, Settings{ck.model_config, TrainConfig{}});
    model.emplace(corpus, graph, s.model, serving_params(ck));
    info("starting from " + a.checkpoint);
  } else {
    s = resolve(c, {});
    model.emplace(fresh_model(corpus, graph, s, a.corpus, m));
    info("no checkpoint given; fine-tuning from fresh parameters");
  }
  s.train.stage = Stage::finetune;
  m.settings(s);
  m["stage"] = "finetune";
  const auto state =
      finetune(*model, topics, qrels, lexicon, s.train, train_hooks(c.out, meta), std::move(resume));
  if (state.epochs_done == 0 || !fs::exists(c.out)) {
    save_checkpoint(c.out, *model, state, s.train, meta);
  }
  m.output(c.out);
  m["history"] = history_json(state);
  m["config_hash"] = config_hash(s.model, s.train);
  m.write(c.out + ".manifest.json");
  return 0;
}

struct RankArgs {
  std::string checkpoint, corpus, graph, queries, lexicon, tag = "dcgrank";
  std::size_t depth = 1000;
  std::size_t candidates = 0;
};

int cmd_rank(const Common& c, const RankArgs& a) {
  require_out(c);
  Manifest m("rank");
  const auto bundle = bundle_path(a.corpus);
  m.input("checkpoint", a.checkpoint);
  m.input("corpus", bundle);
  m.input("graph", a.graph);
  m.input("queries", a.queries);
  const Corpus corpus = load_corpus_bundle(bundle);
  const auto graph = load_graph(corpus, a.graph);
  const auto lexicon = maybe_lexicon(a.lexicon, m);
  auto ck = load_checkpoint(a.checkpoint);
  const auto s = resolve(c, Settings{ck.model_config, ck.train_config});
  m.settings(s);
  Model model(corpus, graph, s.model, serving_params(ck));
  std::vector<Query> queries;
  for (auto q : load_queries(a.queries)) {
    if (!q.has_content()) {
      warn("query " + q.id + " is empty; skipped");
      continue;
    }
    queries.push_back(expand(std::move(q), lexicon));
  }
  const auto run = model.rank_all(queries, a.depth, a.candidates);
  std::ofstream out(c.out);
  if (!out) throw std::runtime_error("cannot write " + c.out);
  write_run(out, run, a.tag);
  out.close();
  info("ranked " + std::to_string(run.size()) + " queries into " + c.out);
  m.output(c.out);
  m.write(c.out + ".manifest.json");
  return 0;
}

struct EvalArgs {
  std::string run, qrels, metric = "all";
  std::size_t n = 20;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
  const auto run = load_run(a.run);
  const auto qrels = load_qrels(a.qrels);
  struct Item {
    std::string name;
    Metric metric;
    std::size_t n;
  };
  std::vector<Item> items;
  const std::string ns = std::to_string(a.n);
  if (a.metric == "ndcg" || a.metric == "all") items.push_back({"NDCG." + ns, Metric::ndcg, a.n});
  if (a.metric == "map" || a.metric == "all") items.push_back({"MAP", Metric::map, a.n});
  if (a.metric == "mrr" || a.metric == "all") items.push_back({"MRR", Metric::mrr, a.n});
  if (a.metric == "p" || a.metric == "all") items.push_back({"Prec." + ns, Metric::precision, a.n});
  if (a.metric == "all" && a.n != 10) items.push_back({"Prec.10", Metric::precision, 10});
  if (a.metric == "all" && a.n != 1) items.push_back({"Prec.1", Metric::precision, 1});

  json aggregate = json::object();
  std::ostringstream tsv;
  tsv << "query\tmetric\tvalue\n";
  bool warned = false;
  for (const auto& item : items) {
    const auto r = evaluate(item.metric, run, qrels, {item.n, c.graded_ap});
    if (!warned) {
      if (r.skipped_unjudged > 0) {
        warn(std::to_string(r.skipped_unjudged) + " run queries have no judgments; skipped");
      }
      if (r.missing_from_run > 0) {
        warn(std::to_string(r.missing_from_run) + " judged queries are missing from the run; scored 0");
      }
      if (r.skipped_no_relevant > 0) {
        warn(std::to_string(r.skipped_no_relevant) + " judged queries have no relevant documents; skipped");
      }
      warned = true;
    }
    aggregate[item.name] = r.mean;
    for (const auto& q : r.per_query) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", q.value);
      tsv << q.query << '\t' << item.name << '\t' << buf << '\n';
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", r.mean);
    std::cout << item.name << '\t' << buf << '\n';
    if (&item == &items.front()) {
      aggregate["queries_scored"] = r.per_query.size();
      aggregate["skipped_unjudged"] = r.skipped_unjudged;
      aggregate["skipped_no_relevant"] = r.skipped_no_relevant;
      aggregate["missing_from_run"] = r.missing_from_run;
    }
  }
  aggregate["graded_ap"] = c.graded_ap;
  if (!c.out.empty()) {
    Manifest m("eval");
    m.input("run", a.run);
    m.input("qrels", a.qrels);
    const std::string tsv_path = c.out + ".tsv";
    const std::string json_path = c.out + ".json";
    std::ofstream(tsv_path) << tsv.str();
    aggregate["manifest"] = c.out + ".manifest.json";
    std::ofstream(json_path) << aggregate.dump(2) << "\n";
    m.output(tsv_path);
    m.output(json_path);
    m["metrics"] = aggregate;
    m.write(c.out + ".manifest.json");
  }
  return 0;
}

struct GradArgs {
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::size_t max_coords = 0;
  bool corrupt = false;
};

int cmd_gradcheck(const Common& c, const GradArgs& a) {
  // Toy setting: five documents, four concepts, both loss terms active.
  Settings base;
  base.model.doc.embed_dim = 4;
  base.model.doc.hidden_dim = 4;
  base.model.doc.encoder_layers = 3;
  base.model.doc.gcn_dim = 3;
  base.model.doc.doc_dim = 5;
  base.model.doc.decoder_hidden = 4;
  base.model.query.filters = 3;
  base.model.query.query_dim = 4;
  base.model.ranking.beta = 0.5;
  base.model.ranking.gamma = 0.5;
  base.train.dropout = 0.0;
  base.train.seed = 5;
  const auto s = resolve(c, base);
  auto fx = synth::load_fixture(synth::toy_fixture());
  Model model = Model::create(fx.corpus, fx.graph, s.model, s.train.seed);

  std::vector<TrainExample> batch;
  for (const auto& q : fx.queries) {
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
  GradCheckOptions opts;
  opts.max_coords_per_param = a.max_coords;
  opts.seed = s.train.seed;
  Objective f = [&](ParamStore& params) {
    std::mt19937_64 rng(s.train.seed);
    const double loss =
        batch_objective(model, batch, s.train.dropout, s.train.dropout > 0 ? &rng : nullptr, true)
            .total;
    // Negative control: a gradient that is off by a small amount.
    if (a.corrupt) params.grad(kRankW)[0] += 1e-2;
    return loss;
  };
  const auto report = grad_check(f, model.params(), a.eps, opts);
  json out = {{"eps", a.eps},
              {"tolerance", a.tolerance},
              {"max_rel_error", report.max_rel_error},
              {"coords_checked", report.coords_checked},
              {"corrupted", a.corrupt},
              {"groups", report.per_param}};
  for (const auto& [name, err] : report.per_param) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", err);
    std::cout << (err < a.tolerance ? "ok   " : "FAIL ") << name << '\t' << buf << '\n';
  }
  const bool pass = report.max_rel_error < a.tolerance;
  std::cout << (pass ? "PASS" : "FAIL") << " max relative error " << report.max_rel_error
            << " over " << report.coords_checked << " coordinates\n";
  out["pass"] = pass;
  if (!c.out.empty()) std::ofstream(c.out) << out.dump(2) << "\n";
  return pass ? 0 : 1;
}

struct SynthArgs {
  std::string kind = "containment";
};

int cmd_synth(const Common& c, const SynthArgs& a) {
  require_out(c);
  const std::uint64_t seed = c.seed.value_or(1);
  synth::FixtureText text;
  if (a.kind == "containment") {
    synth::ContainmentSpec spec;
    spec.seed = seed;
    text = synth::containment_fixture(spec);
  } else if (a.kind == "kb") {
    synth::KbSpec spec;
    spec.seed = seed;
    text = synth::kb_fixture(spec);
  } else {
    text = synth::toy_fixture();
  }
  text.write(c.out);
  info("wrote " + a.kind + " fixture to " + c.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dcgrank: document-concept graph ranking for biomedical literature"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  IngestArgs ingest;
  GraphArgs graph;
  TrainArgs pre, fine;
  RankArgs rank;
  EvalArgs eval;
  GradArgs grad;
  SynthArgs synth_args;

  auto* c_ingest = app.add_subcommand("ingest", "Validate corpus files and write a bundle");
  add_common(c_ingest, common);
  c_ingest->add_option("--docs", ingest.docs, "Documents, JSON lines")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--concepts", ingest.concepts, "Concept surface forms, TSV")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--embeddings", ingest.embeddings, "Pretrained word vectors, text")->check(CLI::ExistingFile);

  auto* c_graph = app.add_subcommand("build-graph", "Build the document-concept graph");
  add_common(c_graph, common);
  c_graph->add_option("--corpus", graph.corpus, "Corpus bundle or directory")->required();
  c_graph->add_option("--kb", graph.kb, "Knowledge edges, TSV")->check(CLI::ExistingFile);

  auto add_train = [&](CLI::App* cmd, TrainArgs& t, bool topics) {
    add_common(cmd, common);
    cmd->add_option("--corpus", t.corpus, "Corpus bundle or directory")->required();
    cmd->add_option("--graph", t.graph, "Graph file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--lexicon", t.lexicon, "Expansion lexicon, TSV")->check(CLI::ExistingFile);
    cmd->add_option("--resume", t.resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
    if (topics) {
      cmd->add_option("--queries", t.queries, "Topics, JSON lines")->required()->check(CLI::ExistingFile);
      cmd->add_option("--qrels", t.qrels, "Graded judgments")->required()->check(CLI::ExistingFile);
      cmd->add_option("--checkpoint", t.checkpoint, "Start from this (pretrained) checkpoint")
          ->check(CLI::ExistingFile);
    }
  };
  auto* c_pre = app.add_subcommand("pretrain", "Pretrain on indexing-term queries");
  add_train(c_pre, pre, false);
  auto* c_fine = app.add_subcommand("finetune", "Fine-tune on judged topics");
  add_train(c_fine, fine, true);

  auto* c_rank = app.add_subcommand("rank", "Rank documents and write a TREC run");
  add_common(c_rank, common);
  c_rank->add_option("--checkpoint", rank.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  c_rank->add_option("--corpus", rank.corpus, "Corpus bundle or directory")->required();
  c_rank->add_option("--graph", rank.graph, "Graph file")->required()->check(CLI::ExistingFile);
  c_rank->add_option("--queries", rank.queries, "Topics, JSON lines")->required()->check(CLI::ExistingFile);
  c_rank->add_option("--lexicon", rank.lexicon, "Expansion lexicon, TSV")->check(CLI::ExistingFile);
  c_rank->add_option("--depth", rank.depth, "Documents per query (0 = all)");
  c_rank->add_option("--tag", rank.tag, "Run tag");
  c_rank->add_option("--candidates", rank.candidates,
                     "Score only the N documents with most concept overlap (0 = all)");

  auto* c_eval = app.add_subcommand("eval", "Score a run against judgments");
  add_common(c_eval, common);
  c_eval->add_option("--run", eval.run, "TREC run file")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--qrels", eval.qrels, "TREC qrels file")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--metric", eval.metric, "ndcg, map, mrr, p or all")
      ->check(CLI::IsMember({"ndcg", "map", "mrr", "p", "all"}));
  c_eval->add_option("--n", eval.n, "Cutoff for ndcg and precision")->check(CLI::PositiveNumber);

  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference check of the full objective");
  add_common(c_grad, common);
  c_grad->add_option("--eps", grad.eps, "Central-difference step");
  c_grad->add_option("--tolerance", grad.tolerance, "Maximum relative error");
  c_grad->add_option("--max-coords", grad.max_coords, "Coordinates per parameter (0 = all)");
  c_grad->add_flag("--corrupt", grad.corrupt, "Perturb one analytic gradient (negative control)");

  auto* c_synth = app.add_subcommand("synth", "Write a synthetic fixture");
  add_common(c_synth, common);
  c_synth->add_option("--kind", synth_args.kind, "containment, kb or toy")
      ->check(CLI::IsMember({"containment", "kb", "toy"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_ingest->parsed()) return cmd_ingest(common, ingest);
    if (c_graph->parsed()) return cmd_build_graph(common, graph);
    if (c_pre->parsed()) return cmd_pretrain(common, pre);
    if (c_fine->parsed()) return cmd_finetune(common, fine);
    if (c_rank->parsed()) return cmd_rank(common, rank);
    if (c_eval->parsed()) return cmd_eval(common, eval);
    if (c_grad->parsed()) return cmd_gradcheck(common, grad);
    if (c_synth->parsed()) return cmd_synth(common, synth_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
