/* Copyright 2026 The lrag Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// lrag: command-line front end.
//
//   lrag gen-toy-model --kind planted --out model/
//   lrag gen-data --split train --out train/
//   lrag select-layer --model model/model.st --data train/ --center 4 --out sel/
//   lrag eval --model model/model.st --adapter sel/adapter.st --data dev/ --mode lrag --k 4 --out eval/
//
// Exit codes: 0 ok, 1 runtime error, 2 bad flags or config.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lrag/lrag.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Common {
  std::uint64_t seed = 42;
  std::string out = ".";
};

/// Named sub-stream of the global seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  return lrag::Rng(seed).split(stream).next_u64();
}

/// Hash over every option of the subcommand except --out and --config, so
/// that two runs with the same effective settings share a hash.
std::string config_hash(const CLI::App& sub) {
  std::vector<std::string> parts;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name();
    if (name == "--out" || name == "--config" || name == "--help" || name.empty()) continue;
    std::string value;
    if (opt->count() > 0)
      for (const auto& r : opt->results()) value += r + ";";
    else
      value = opt->get_default_str();
    parts.push_back(name + "=" + value);
  }
  std::sort(parts.begin(), parts.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : parts) h = lrag::Rng::mix(h ^ lrag::Rng::fnv1a(p));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json provenance(const CLI::App& sub, const Common& c) {
  return {{"command", sub.get_name()}, {"seed", c.seed}, {"config_hash", config_hash(sub)}, {"version", kVersion}};
}

void write_json(const fs::path& path, const json& j) { lrag::write_text_file(path, j.dump(2) + "\n"); }

fs::path out_dir(const Common& c) {
  fs::create_directories(c.out);
  return fs::path(c.out);
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "global seed")->capture_default_str();
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
}

struct LoadedModel {
  lrag::ToyLM lm;
  lrag::Vocabulary vocab;
};

LoadedModel load_model(const std::string& path) {
  const lrag::TensorStore store = lrag::load_tensor_file(path);
  LoadedModel m{lrag::toy_lm_from_store(store), lrag::Vocabulary::placeholder(0)};
  if (auto v = lrag::vocabulary_from_store(store)) m.vocab = *v;
  else m.vocab = lrag::Vocabulary::placeholder(m.lm.config.vocab_size);
  lrag::require(m.vocab.size() == m.lm.config.vocab_size, lrag::ErrorCode::ShapeMismatch,
                "model vocabulary size does not match its embedding");
  return m;
}

struct DataDir {
  std::vector<lrag::Document> corpus;
  std::vector<lrag::QAExample> examples;
};

DataDir load_data(const std::string& dir) {
  const fs::path d(dir);
  return {lrag::corpus_from_jsonl(lrag::read_text_file(d / "corpus.jsonl")),
          lrag::dataset_from_jsonl(lrag::read_text_file(d / "dataset.jsonl"))};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---------------------------------------------------------------------------

struct TdArgs {
  std::string weights;
  std::string pattern = "layer.{}.w_v";
  std::string label;
  bool per_head = false;
  std::size_t heads = 1;
  std::string head_axis = "rows";
  std::size_t skip_first = 1;
};

int cmd_td(const CLI::App& sub, const Common& c, const TdArgs& a) {
  const lrag::TensorStore store = lrag::load_tensor_file(a.weights);
  const fs::path out = out_dir(c);
  auto report = [&](const lrag::TDProfile& profile) {
    std::optional<lrag::PhaseSegmentation> phases;
    std::optional<std::size_t> min_layer;
    if (profile.size() >= 3) phases = lrag::detect_phases(profile);
    if (profile.size() > a.skip_first) min_layer = lrag::min_td_layer(profile, a.skip_first);
    json j = lrag::td_report_json(profile, phases, min_layer);
    j["provenance"] = provenance(sub, c);
    return j;
  };
  const std::string label = a.label.empty() ? fs::path(a.weights).filename().string() : a.label;
  const lrag::TDProfile full = lrag::td_profile(store, a.pattern, {}, label);
  lrag::write_text_file(out / "td_profile.csv", lrag::td_profile_csv(full));
  write_json(out / "td_report.json", report(full));
  if (a.per_head) {
    lrag::TDOptions opts;
    opts.per_head = true;
    opts.n_heads = a.heads;
    opts.head_axis = a.head_axis == "cols" ? lrag::HeadAxis::Cols : lrag::HeadAxis::Rows;
    const lrag::TDProfile heads = lrag::td_profile(store, a.pattern, opts, label);
    lrag::write_text_file(out / "td_profile_per_head.csv", lrag::td_profile_csv(heads));
    write_json(out / "td_report_per_head.json", report(heads));
  }
  std::cout << "td: " << full.size() << " layers -> " << (out / "td_profile.csv").string() << "\n";
  return 0;
}

struct LensArgs {
  std::string model;
  std::string prompt;
  std::string tokens;
  std::string track;
  std::string final_norm = "off";
};

int cmd_logitlens(const CLI::App& sub, const Common& c, const LensArgs& a) {
  const LoadedModel m = load_model(a.model);
  std::vector<lrag::TokenId> tokens;
  if (!a.tokens.empty()) {
    for (const auto& t : split_list(a.tokens)) tokens.push_back(std::stoul(t));
  } else {
    tokens = m.vocab.encode(a.prompt);
  }
  if (tokens.empty()) lrag::fail(lrag::ErrorCode::EmptyAfterTokenization, "prompt has no tokens");
  std::vector<lrag::TokenId> tracked;
  for (const auto& t : split_list(a.track)) {
    const bool numeric = t.find_first_not_of("0123456789") == std::string::npos;
    if (numeric) tracked.push_back(std::stoul(t));
    else if (m.vocab.contains(t)) tracked.push_back(m.vocab.id(t));
    else lrag::fail(lrag::ErrorCode::TokenOutOfRange, "tracked word '" + t + "' not in the model vocabulary");
  }
  const fs::path out = out_dir(c);
  auto emit = [&](bool norm, const std::string& suffix) {
    const lrag::LogitLensTrace trace = lrag::token_trajectory(m.lm, tokens, tracked, norm);
    lrag::write_text_file(out / ("trajectory" + suffix + ".csv"), lrag::trajectory_csv(trace));
    json j = lrag::trajectory_json(trace, &m.vocab);
    j["final_norm"] = norm;
    j["provenance"] = provenance(sub, c);
    write_json(out / ("trajectory" + suffix + ".json"), j);
  };
  if (a.final_norm == "both") {
    emit(false, "");
    emit(true, "_final_norm");
  } else {
    emit(a.final_norm == "on", "");
  }
  std::cout << "logitlens: " << m.lm.config.n_layers + 1 << " layers, " << tracked.size() << " tracked tokens\n";
  return 0;
}

struct GenDataArgs {
  lrag::SyntheticSpec spec;
  std::string split = "train";
};

int cmd_gen_data(const CLI::App& sub, const Common& c, GenDataArgs a) {
  a.spec.seed = lrag::Rng(derive_seed(c.seed, "data")).split(a.split).next_u64();
  const lrag::SyntheticDataset ds = lrag::generate_synthetic_dataset(a.spec);
  const fs::path out = out_dir(c);
  lrag::write_text_file(out / "corpus.jsonl", lrag::corpus_to_jsonl(ds.corpus));
  lrag::write_text_file(out / "dataset.jsonl", lrag::dataset_to_jsonl(ds.examples));
  write_json(out / "data_report.json", {{"num_examples", ds.examples.size()},
                                        {"corpus_size", ds.corpus.size()},
                                        {"vocab", a.spec.vocab},
                                        {"leakage", a.spec.leakage},
                                        {"split", a.split},
                                        {"provenance", provenance(sub, c)}});
  std::cout << "gen-data: " << ds.examples.size() << " examples, " << ds.corpus.size() << " documents\n";
  return 0;
}

struct TrainArgs {
  std::string model;
  std::string data;
  std::size_t layer = 0;
  std::size_t d_emb = 32;
  std::size_t first_hop_k = 2;
  std::size_t k_eval = 2;
  std::size_t steps = 500;
  std::size_t batch = 16;
  double lr = 0.05;
  double temperature = 0.05;
  bool literal_loss = false;
  bool no_in_batch = false;
};

lrag::TrainConfig train_config(const TrainArgs& a, const Common& c) {
  lrag::TrainConfig cfg;
  cfg.steps = a.steps;
  cfg.batch_size = a.batch;
  cfg.learning_rate = a.lr;
  cfg.temperature = a.temperature;
  cfg.loss_form = a.literal_loss ? lrag::LossForm::Literal : lrag::LossForm::Standard;
  cfg.in_batch_negatives = !a.no_in_batch;
  cfg.seed = derive_seed(c.seed, "training");
  return cfg;
}

/// Adapter file with the settings eval needs to rebuild the same encoder.
void save_adapter(const fs::path& path, const lrag::MlpAdapter& g, std::size_t layer, std::uint64_t encoder_seed,
                  std::size_t d_emb) {
  lrag::TensorStore store = lrag::adapter_to_store(g);
  store.metadata["layer"] = std::to_string(layer);
  store.metadata["encoder_seed"] = std::to_string(encoder_seed);
  store.metadata["d_emb"] = std::to_string(d_emb);
  lrag::save_tensor_file(store, path);
}

lrag::RetrievalSystem retrieval_for(const LoadedModel& m, const DataDir& d, std::uint64_t encoder_seed,
                                    std::size_t d_emb) {
  return lrag::make_retrieval_system(d.corpus, lrag::make_doc_encoder(m.vocab, d_emb, encoder_seed));
}

int cmd_train(const CLI::App& sub, const Common& c, const TrainArgs& a) {
  const LoadedModel m = load_model(a.model);
  const DataDir d = load_data(a.data);
  const std::uint64_t enc_seed = derive_seed(c.seed, "encoder");
  const lrag::RetrievalSystem sys = retrieval_for(m, d, enc_seed, a.d_emb);
  lrag::require(a.layer <= m.lm.config.n_layers, lrag::ErrorCode::LayerOutOfRange,
                "layer " + std::to_string(a.layer) + " > n_layers " + std::to_string(m.lm.config.n_layers));
  const auto states = lrag::collect_states(m.lm, m.vocab, sys, d.examples, a.first_hop_k);
  std::vector<std::size_t> all(d.examples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const lrag::TrainConfig cfg = train_config(a, c);
  const lrag::TrainReport rep = lrag::train_on_layer(states, d.examples, all, a.layer, sys, cfg, {});
  const double recall = lrag::next_hop_recall(rep.adapter, states, d.examples, all, a.layer, sys, a.k_eval);

  const fs::path out = out_dir(c);
  save_adapter(out / "adapter.st", rep.adapter, a.layer, enc_seed, a.d_emb);
  // Training pairs: one row per example, positives in the sidecar.
  lrag::TensorStore reps;
  {
    lrag::Matrix r(d.examples.size(), m.lm.config.d_model);
    json positives = json::array();
    for (std::size_t i = 0; i < d.examples.size(); ++i) {
      std::copy(states[i].states[a.layer].begin(), states[i].states[a.layer].end(), r.row(i).begin());
      positives.push_back(d.examples[i].second_hop_ids);
    }
    reps.put("reps", r);
    lrag::save_tensor_file(reps, out / "train_reps.st");
    write_json(out / "train_reps.json", {{"layer", a.layer}, {"positive_ids", positives}});
  }
  write_json(out / "train_report.json", {{"layer", a.layer},
                                         {"loss_history", rep.loss_history},
                                         {"final_loss", rep.loss_history.empty() ? 0.0 : rep.loss_history.back()},
                                         {"train_recall_at_k", recall},
                                         {"k_eval", a.k_eval},
                                         {"provenance", provenance(sub, c)}});
  std::cout << "train: layer " << a.layer << ", train recall@" << a.k_eval << " " << lrag::format_double(recall)
            << "\n";
  return 0;
}

struct SelectArgs {
  TrainArgs train;
  std::optional<std::size_t> center;
  std::size_t step = 1;
  std::size_t half_width = 2;
};

int cmd_select_layer(const CLI::App& sub, const Common& c, const SelectArgs& a) {
  const LoadedModel m = load_model(a.train.model);
  const DataDir d = load_data(a.train.data);
  std::size_t center = 0;
  if (a.center) {
    center = *a.center;
  } else {
    const lrag::TDProfile profile =
        lrag::td_profile(lrag::to_tensor_store(m.lm), "layer.{}.w_v", {}, fs::path(a.train.model).filename().string());
    // Profile entries are block indices; the state after block i is layer i + 1.
    center = lrag::min_td_layer(profile) + 1;
  }
  const auto candidates = lrag::candidate_layers(a.step, a.half_width, center, m.lm.config.n_layers);
  const std::uint64_t enc_seed = derive_seed(c.seed, "encoder");
  const lrag::RetrievalSystem sys = retrieval_for(m, d, enc_seed, a.train.d_emb);
  const lrag::LayerSelection sel = lrag::select_layer(m.lm, m.vocab, sys, d.examples, candidates,
                                                      train_config(a.train, c), a.train.k_eval, a.train.first_hop_k);
  const fs::path out = out_dir(c);
  save_adapter(out / "adapter.st", sel.adapters.at(sel.best_layer), sel.best_layer, enc_seed, a.train.d_emb);
  json recall = json::object();
  for (const auto& [layer, r] : sel.recall_by_layer) recall[std::to_string(layer)] = r;
  write_json(out / "layer_selection.json", {{"center", center},
                                            {"candidates", candidates},
                                            {"best_layer", sel.best_layer},
                                            {"validation_recall", recall},
                                            {"k_eval", a.train.k_eval},
                                            {"provenance", provenance(sub, c)}});
  std::cout << "select-layer: best layer " << sel.best_layer << "\n";
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string adapter;
  std::string data;
  std::string mode = "lrag";
  std::size_t k = 4;
  std::size_t max_new_tokens = 16;
  std::size_t d_emb = 32;
};

int cmd_eval(const CLI::App& sub, const Common& c, const EvalArgs& a) {
  const LoadedModel m = load_model(a.model);
  const DataDir d = load_data(a.data);
  lrag::PipelineConfig cfg;
  cfg.mode = lrag::parse_mode(a.mode);
  cfg.max_new_tokens = a.max_new_tokens;
  cfg.first_hop_k = a.k / 2;
  cfg.next_hop_k = a.k - a.k / 2;
  std::uint64_t enc_seed = derive_seed(c.seed, "encoder");
  std::size_t d_emb = a.d_emb;
  std::optional<lrag::MlpAdapter> g;
  if (cfg.mode == lrag::PipelineMode::Lrag) {
    if (a.adapter.empty()) lrag::fail(lrag::ErrorCode::InvalidConfig, "--mode lrag needs --adapter");
    const lrag::TensorStore store = lrag::load_tensor_file(a.adapter);
    g = lrag::adapter_from_store(store);
    auto meta = [&](const char* key) {
      auto it = store.metadata.find(key);
      if (it == store.metadata.end()) lrag::fail(lrag::ErrorCode::MalformedHeader, std::string("adapter lacks ") + key);
      return std::stoull(it->second);
    };
    cfg.layer = meta("layer");
    enc_seed = meta("encoder_seed");
    d_emb = meta("d_emb");
  }
  const lrag::RetrievalSystem sys = retrieval_for(m, d, enc_seed, d_emb);
  const lrag::EvalReport report = lrag::evaluate(m.lm, m.vocab, sys, g ? &*g : nullptr, d.examples, cfg);
  const fs::path out = out_dir(c);
  json j = lrag::eval_report_json(report);
  j["provenance"] = provenance(sub, c);
  if (cfg.mode == lrag::PipelineMode::Lrag) j["aggregate"]["layer"] = cfg.layer;
  write_json(out / "eval_report.json", j);
  const std::string csv = lrag::eval_summary_csv(report);
  lrag::write_text_file(out / "eval_summary.csv", csv);
  std::cout << csv;
  return 0;
}

struct GenModelArgs {
  std::string kind = "random";
  std::size_t vocab = 512;
  std::size_t d_model = 64;
  std::size_t layers = 8;
  std::size_t heads = 4;
  std::size_t max_seq = 256;
  std::size_t planted_layer = 4;
  std::size_t dim = 16;
  std::string pattern = "layer.{}.w_v";
};

int cmd_gen_toy_model(const CLI::App& sub, const Common& c, const GenModelArgs& a) {
  const fs::path out = out_dir(c);
  const std::uint64_t seed = derive_seed(c.seed, "model");
  json info = {{"kind", a.kind}};
  if (a.kind == "random") {
    const auto cfg = lrag::ToyLMConfig::make(a.vocab, a.d_model, a.layers, a.heads, a.max_seq, seed);
    lrag::save_tensor_file(lrag::to_tensor_store(lrag::init_toy_lm(cfg), lrag::Vocabulary::placeholder(a.vocab)),
                           out / "model.st");
    info["config"] = cfg.to_json();
  } else if (a.kind == "planted") {
    const lrag::SyntheticWorld world = lrag::build_synthetic_world(a.vocab);
    lrag::PlantedSpec spec;
    spec.n_layers = a.layers;
    spec.planted_layer = a.planted_layer;
    spec.max_seq = a.max_seq;
    spec.seed = seed;
    const lrag::ToyLM lm = lrag::build_planted_model(world.vocab, world.bridge_words(), spec);
    lrag::save_tensor_file(lrag::to_tensor_store(lm, world.vocab), out / "model.st");
    info["config"] = lm.config.to_json();
    info["planted_layer"] = a.planted_layer;
  } else if (a.kind == "spectral") {
    lrag::Rng rng(seed);
    const std::size_t n = a.layers;
    lrag::require(n >= 4, lrag::ErrorCode::InvalidConfig, "spectral model needs >= 4 layers");
    const std::size_t e = n / 4, p = (3 * n) / 4;
    const double high = std::log(static_cast<double>(a.dim)) * 0.95;
    const auto targets = lrag::synth::three_block_targets(n, e, p, high, high * 0.5, high * 0.85, 0.0, rng);
    lrag::Rng mat_rng = rng.split("matrices");
    lrag::TensorStore store = lrag::synth::spectral_layer_store(targets, a.dim, mat_rng, a.pattern);
    lrag::save_tensor_file(store, out / "model.st");
    info["targets"] = targets;
    info["phases"] = {{"extract_end", e}, {"process_end", p}};
  } else {
    lrag::fail(lrag::ErrorCode::InvalidConfig, "unknown --kind '" + a.kind + "'");
  }
  info["provenance"] = provenance(sub, c);
  write_json(out / "model_report.json", info);
  std::cout << "gen-toy-model: " << a.kind << " -> " << (out / "model.st").string() << "\n";
  return 0;
}

int exit_code_for(const lrag::Error& e) {
  switch (e.code()) {
    case lrag::ErrorCode::InvalidConfig:
    case lrag::ErrorCode::InvalidSpec:
    case lrag::ErrorCode::InvalidTemperature:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-wise representation retrieval toolkit"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "TOML config file; [subcommand] sections hold that subcommand's keys");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  Common common;

  TdArgs td;
  CLI::App* td_cmd = app.add_subcommand("td", "Transformation divergence profile of a weight file");
  add_common(td_cmd, common);
  td_cmd->add_option("--weights", td.weights, "tensor file")->required();
  td_cmd->add_option("--pattern", td.pattern, "layer name pattern with {} for the index")->capture_default_str();
  td_cmd->add_option("--label", td.label, "model label for the report");
  td_cmd->add_flag("--per-head", td.per_head, "also emit the per-head mean profile");
  td_cmd->add_option("--heads", td.heads, "head count for --per-head")->capture_default_str();
  td_cmd->add_option("--head-axis", td.head_axis, "axis split into heads")
      ->check(CLI::IsMember({"rows", "cols"}))
      ->capture_default_str();
  td_cmd->add_option("--skip-first", td.skip_first, "leading layers ignored by the min-TD search")
      ->capture_default_str();

  LensArgs lens;
  CLI::App* lens_cmd = app.add_subcommand("logitlens", "Per-layer token probabilities through the unembedding");
  add_common(lens_cmd, common);
  lens_cmd->add_option("--model", lens.model, "model tensor file")->required();
  auto* prompt_opt = lens_cmd->add_option("--prompt", lens.prompt, "prompt text");
  auto* tokens_opt = lens_cmd->add_option("--tokens", lens.tokens, "comma-separated token ids");
  prompt_opt->excludes(tokens_opt);
  lens_cmd->add_option("--track", lens.track, "comma-separated words or token ids to track");
  lens_cmd->add_option("--final-norm", lens.final_norm, "apply the final norm before unembedding")
      ->check(CLI::IsMember({"off", "on", "both"}))
      ->capture_default_str();

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Synthetic two-hop corpus and questions");
  add_common(gen_cmd, common);
  gen_cmd->add_option("--num-examples", gen.spec.num_examples)->capture_default_str();
  gen_cmd->add_option("--corpus-size", gen.spec.corpus_size)->capture_default_str();
  gen_cmd->add_option("--vocab", gen.spec.vocab)->capture_default_str();
  gen_cmd->add_option("--leakage", gen.spec.leakage)->capture_default_str();
  gen_cmd->add_option("--split", gen.split, "seed sub-stream")->capture_default_str();

  TrainArgs train;
  auto add_train_opts = [](CLI::App* cmd, TrainArgs& t) {
    cmd->add_option("--model", t.model, "model tensor file")->required();
    cmd->add_option("--data", t.data, "directory with corpus.jsonl and dataset.jsonl")->required();
    cmd->add_option("--d-emb", t.d_emb)->capture_default_str();
    cmd->add_option("--first-hop-k", t.first_hop_k)->capture_default_str();
    cmd->add_option("--k-eval", t.k_eval)->capture_default_str();
    cmd->add_option("--steps", t.steps)->capture_default_str();
    cmd->add_option("--batch", t.batch)->capture_default_str();
    cmd->add_option("--lr", t.lr)->capture_default_str();
    cmd->add_option("--temperature", t.temperature)->capture_default_str();
    cmd->add_flag("--literal-loss", t.literal_loss, "-log of the summed probabilities instead of the mean");
    cmd->add_flag("--no-in-batch", t.no_in_batch, "score against the whole corpus");
  };
  CLI::App* train_cmd = app.add_subcommand("train", "Train the adapter on one layer");
  add_common(train_cmd, common);
  add_train_opts(train_cmd, train);
  train_cmd->add_option("--layer", train.layer)->required();

  SelectArgs sel;
  CLI::App* sel_cmd = app.add_subcommand("select-layer", "Train per candidate layer and keep the best");
  add_common(sel_cmd, common);
  add_train_opts(sel_cmd, sel.train);
  sel_cmd->add_option("--center", sel.center, "center layer (default: min-TD layer of the model)");
  sel_cmd->add_option("--step", sel.step)->capture_default_str();
  sel_cmd->add_option("--half-width", sel.half_width)->capture_default_str();

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a pipeline mode on a dataset");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--model", ev.model, "model tensor file")->required();
  eval_cmd->add_option("--adapter", ev.adapter, "adapter tensor file (lrag mode)");
  eval_cmd->add_option("--data", ev.data, "directory with corpus.jsonl and dataset.jsonl")->required();
  eval_cmd->add_option("--mode", ev.mode)
      ->check(CLI::IsMember({"lrag", "vanilla", "no-retrieval"}))
      ->capture_default_str();
  eval_cmd->add_option("--k", ev.k, "total retrieval budget")->capture_default_str();
  eval_cmd->add_option("--max-new-tokens", ev.max_new_tokens)->capture_default_str();
  eval_cmd->add_option("--d-emb", ev.d_emb, "encoder width when no adapter is given")->capture_default_str();

  GenModelArgs gm;
  CLI::App* gm_cmd = app.add_subcommand("gen-toy-model", "Write a random, planted or spectral toy model");
  add_common(gm_cmd, common);
  gm_cmd->add_option("--kind", gm.kind)->check(CLI::IsMember({"random", "planted", "spectral"}))->capture_default_str();
  gm_cmd->add_option("--vocab", gm.vocab)->capture_default_str();
  gm_cmd->add_option("--d-model", gm.d_model)->capture_default_str();
  gm_cmd->add_option("--layers", gm.layers)->capture_default_str();
  gm_cmd->add_option("--heads", gm.heads)->capture_default_str();
  gm_cmd->add_option("--max-seq", gm.max_seq)->capture_default_str();
  gm_cmd->add_option("--planted-layer", gm.planted_layer)->capture_default_str();
  gm_cmd->add_option("--dim", gm.dim, "matrix width for --kind spectral")->capture_default_str();
  gm_cmd->add_option("--pattern", gm.pattern, "layer name pattern for --kind spectral")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*td_cmd) return cmd_td(*td_cmd, common, td);
    if (*lens_cmd) return cmd_logitlens(*lens_cmd, common, lens);
    if (*gen_cmd) return cmd_gen_data(*gen_cmd, common, gen);
    if (*train_cmd) return cmd_train(*train_cmd, common, train);
    if (*sel_cmd) return cmd_select_layer(*sel_cmd, common, sel);
    if (*eval_cmd) return cmd_eval(*eval_cmd, common, ev);
    if (*gm_cmd) return cmd_gen_toy_model(*gm_cmd, common, gm);
  } catch (const lrag::Error& e) {
    std::cerr << "error [" << lrag::to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
