#include "conprom.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "conprom/config.hpp"
#include "conprom/corpus.hpp"
#include "conprom/episodes.hpp"
#include "conprom/error.hpp"
#include "conprom/eval.hpp"
#include "conprom/merging.hpp"
#include "conprom/model.hpp"
#include "conprom/pipeline.hpp"
#include "conprom/synthgen.hpp"
#include "conprom/trainer.hpp"

using nlohmann::json;

struct conprom_dataset {
  conprom::Dataset data;
};

struct conprom_episodes {
  conprom::EpisodeList episodes;
};

struct conprom_model {
  conprom::Model model;
};

namespace {

thread_local std::string g_last_error;

int code_for(conprom::ErrorKind kind) {
  switch (kind) {
    case conprom::ErrorKind::InvalidArgument: return CONPROM_ERR_INVALID_ARGUMENT;
    case conprom::ErrorKind::Parse: return CONPROM_ERR_PARSE;
    case conprom::ErrorKind::Validation: return CONPROM_ERR_VALIDATION;
    case conprom::ErrorKind::Io: return CONPROM_ERR_IO;
    case conprom::ErrorKind::Runtime: return CONPROM_ERR_RUNTIME;
  }
  return CONPROM_ERR_RUNTIME;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return CONPROM_OK;
  } catch (const conprom::Error& e) {
    g_last_error = e.what();
    return code_for(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CONPROM_ERR_RUNTIME;
  }
}

int require(bool condition, const char* message) {
  if (condition) return CONPROM_OK;
  g_last_error = message;
  return CONPROM_ERR_INVALID_ARGUMENT;
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* conprom_version(void) { return "0.1.0"; }

const char* conprom_last_error(void) { return g_last_error.c_str(); }

void conprom_string_free(char* s) { delete[] s; }

int conprom_dataset_parse(const char* json_text, conprom_dataset** out) {
  if (int rc = require(json_text && out, "conprom_dataset_parse: null argument")) return rc;
  return guarded([&] { *out = new conprom_dataset{conprom::parse_dataset(json_text)}; });
}

int conprom_dataset_load(const char* path, conprom_dataset** out) {
  if (int rc = require(path && out, "conprom_dataset_load: null argument")) return rc;
  return guarded([&] { *out = new conprom_dataset{conprom::load_dataset(path)}; });
}

int conprom_dataset_save(const conprom_dataset* dataset, const char* path) {
  if (int rc = require(dataset && path, "conprom_dataset_save: null argument")) return rc;
  return guarded([&] { conprom::save_dataset(dataset->data, path); });
}

int conprom_dataset_stats(const conprom_dataset* dataset, char** json_out) {
  if (int rc = require(dataset && json_out, "conprom_dataset_stats: null argument")) return rc;
  return guarded([&] {
    auto split_stats = [](const std::vector<conprom::Domain>& domains) {
      std::size_t frames = 0;
      for (const auto& d : domains) frames += d.frames.size();
      return json{{"domains", domains.size()}, {"frames", frames}};
    };
    json root{{"train", split_stats(dataset->data.train)},
              {"dev", split_stats(dataset->data.dev)},
              {"test", split_stats(dataset->data.test)}};
    *json_out = copy_string(root.dump(2));
  });
}

void conprom_dataset_free(conprom_dataset* dataset) { delete dataset; }

int conprom_synth_generate(const char* spec_text, conprom_dataset** out) {
  if (int rc = require(spec_text && out, "conprom_synth_generate: null argument")) return rc;
  return guarded([&] {
    auto cfg = conprom::Config::parse(spec_text);
    auto spec = conprom::SynthSpec::from_config(cfg);
    *out = new conprom_dataset{conprom::generate(spec)};
  });
}

int conprom_episodes_build(const conprom_dataset* dataset, const char* split, int k,
                           int query_size, int n_episodes, uint64_t seed,
                           conprom_episodes** out) {
  if (int rc = require(dataset && split && out, "conprom_episodes_build: null argument")) return rc;
  return guarded([&] {
    const auto& domains = dataset->data.split(split);
    *out = new conprom_episodes{
        conprom::build_episodes(domains, k, query_size, n_episodes, seed)};
  });
}

int conprom_episodes_load(const char* path, conprom_episodes** out) {
  if (int rc = require(path && out, "conprom_episodes_load: null argument")) return rc;
  return guarded([&] { *out = new conprom_episodes{conprom::load_episodes(path)}; });
}

int conprom_episodes_save(const conprom_episodes* episodes, const char* path) {
  if (int rc = require(episodes && path, "conprom_episodes_save: null argument")) return rc;
  return guarded([&] { conprom::save_episodes(episodes->episodes, path); });
}

int conprom_episodes_count(const conprom_episodes* episodes) {
  return episodes ? static_cast<int>(episodes->episodes.size()) : -1;
}

void conprom_episodes_free(conprom_episodes* episodes) { delete episodes; }

int conprom_train(const conprom_dataset* dataset, const conprom_episodes* episodes,
                  const char* config_text, const char* out_dir) {
  if (int rc = require(dataset && out_dir, "conprom_train: null argument")) return rc;
  return guarded([&] {
    auto cfg = conprom::Config::parse(config_text ? config_text : "");
    auto model_cfg = conprom::ModelConfig::from_config(cfg);
    auto train_cfg = conprom::TrainConfig::from_config(cfg);

    std::optional<conprom::EpisodeList> episode_list;
    if (episodes) episode_list = episodes->episodes;

    auto result = conprom::train(dataset->data, std::move(episode_list), model_cfg, train_cfg);

    namespace fs = std::filesystem;
    fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) conprom::raise(conprom::ErrorKind::Io, "cannot create output directory " + dir.string());

    conprom::save_checkpoint((dir / "best.ckpt").string(), result.best);
    conprom::save_checkpoint((dir / "final.ckpt").string(), result.final_model,
                             &result.final_state);
    std::ofstream log(dir / "loss_log.csv");
    if (!log) conprom::raise(conprom::ErrorKind::Io, "cannot write loss log");
    log << conprom::loss_log_csv(result.log);
  });
}

int conprom_model_load(const char* checkpoint_path, conprom_model** out) {
  if (int rc = require(checkpoint_path && out, "conprom_model_load: null argument")) return rc;
  return guarded([&] {
    auto loaded = conprom::load_checkpoint(checkpoint_path);
    *out = new conprom_model{std::move(loaded.model)};
  });
}

void conprom_model_free(conprom_model* model) { delete model; }

int conprom_gradcheck(uint64_t seed, double eps, double* max_rel_err_out) {
  if (int rc = require(max_rel_err_out != nullptr, "conprom_gradcheck: null out-parameter")) {
    return rc;
  }
  return guarded([&] {
    auto result = conprom::full_objective_grad_check(seed, eps);
    *max_rel_err_out = result.max_rel_err;
  });
}

int conprom_evaluate(const char* checkpoint_path, const conprom_episodes* episodes,
                     const char* options_text, char** report_json_out) {
  if (int rc = require(checkpoint_path && episodes && report_json_out,
                       "conprom_evaluate: null argument")) {
    return rc;
  }
  return guarded([&] {
    auto cfg = conprom::Config::parse(options_text ? options_text : "");
    int seeds = static_cast<int>(cfg.get_int("eval.seeds", 1));
    if (seeds <= 0) conprom::raise(conprom::ErrorKind::Validation, "eval.seeds must be positive");
    std::uint64_t seed_base = cfg.get_uint("eval.seed_base", 0);

    conprom::EvalOptions options;
    options.finetune = cfg.get_bool("eval.finetune", false);
    options.transition_rules = cfg.get_bool("eval.tr", false);
    options.finetune_steps = static_cast<std::size_t>(cfg.get_int("finetune.steps", 50));
    options.finetune_lr = cfg.get_double("finetune.lr", 1e-3);

    std::string pattern(checkpoint_path);
    auto path_for_seed = [&](std::uint64_t seed) {
      std::string path = pattern;
      std::size_t pos = path.find("{seed}");
      if (pos != std::string::npos) path.replace(pos, 6, std::to_string(seed));
      return path;
    };

    std::vector<std::vector<conprom::MetricsReport>> per_seed;
    for (int s = 0; s < seeds; ++s) {
      std::uint64_t seed = seed_base + static_cast<std::uint64_t>(s);
      auto loaded = conprom::load_checkpoint(path_for_seed(seed));
      std::vector<conprom::MetricsReport> reports;
      for (const auto& episode : episodes->episodes) {
        reports.push_back(conprom::evaluate_episode(loaded.model, episode, options));
      }
      per_seed.push_back(std::move(reports));
    }

    auto agg = conprom::aggregate(per_seed);
    std::map<std::string, std::string> option_map;
    option_map["checkpoint"] = pattern;
    option_map["seeds"] = std::to_string(seeds);
    option_map["seed_base"] = std::to_string(seed_base);
    option_map["finetune"] = options.finetune ? "true" : "false";
    option_map["tr"] = options.transition_rules ? "true" : "false";
    *report_json_out = copy_string(conprom::report_json(agg, option_map));
  });
}

int conprom_export_protos(const conprom_model* model, const conprom_episodes* episodes,
                          int episode_index, char** json_out) {
  if (int rc = require(model && episodes && json_out, "conprom_export_protos: null argument")) {
    return rc;
  }
  return guarded([&] {
    if (episode_index < 0 ||
        static_cast<std::size_t>(episode_index) >= episodes->episodes.size()) {
      conprom::raise(conprom::ErrorKind::InvalidArgument,
                     "episode index " + std::to_string(episode_index) + " out of range");
    }
    const auto& episode = episodes->episodes[static_cast<std::size_t>(episode_index)];
    const auto& m = model->model;

    conprom::ad::Graph graph;
    auto nodes = conprom::make_param_nodes(graph, m.config, m.params);
    auto fwd = conprom::build_episode_forward(graph, m.config, m.vocab, nodes, episode,
                                              conprom::PipelineOptions{.build_loss = false});

    auto matrix_to_json = [&](conprom::ad::NodeId id, const std::vector<std::string>& names) {
      const auto& t = graph.value(id);
      json obj = json::object();
      for (std::size_t i = 0; i < names.size(); ++i) {
        std::vector<double> row(t.values.begin() + static_cast<std::ptrdiff_t>(i * t.shape[1]),
                                t.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * t.shape[1]));
        obj[names[i]] = row;
      }
      return obj;
    };

    json root{{"domain", episode.domain_name},
              {"original",
               {{"intent", matrix_to_json(fwd.protos.intent_protos, fwd.vocab.intent_names)},
                {"slot", matrix_to_json(fwd.protos.slot_protos, fwd.vocab.tag_names)}}},
              {"merged",
               {{"intent", matrix_to_json(fwd.merged_intent, fwd.vocab.intent_names)},
                {"slot", matrix_to_json(fwd.merged_slot, fwd.vocab.tag_names)}}}};
    *json_out = copy_string(root.dump(2));
  });
}

}  // extern "C"
