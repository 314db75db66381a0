#include "conprom/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "conprom/error.hpp"

namespace conprom {

using nlohmann::json;

ModelConfig ModelConfig::from_config(const Config& cfg) {
  ModelConfig mc;
  mc.encoder_dim = static_cast<std::size_t>(cfg.get_int("encoder.dim", 32));
  if (mc.encoder_dim < 2) raise(ErrorKind::Validation, "encoder.dim must be at least 2");
  mc.encoder_shared = cfg.get_bool("encoder.shared", true);
  mc.merge_hidden = static_cast<std::size_t>(cfg.get_int("merge.hidden", 0));
  mc.merge_enabled = cfg.get_bool("merge.enabled", true);
  mc.merge_lambda = cfg.get_double("merge.lambda", 0.5);
  mc.merge_alpha = cfg.get_double("merge.alpha", 0.5);
  if (mc.merge_lambda < 0.0 || mc.merge_lambda > 1.0) {
    raise(ErrorKind::Validation, "merge.lambda must be in [0, 1]");
  }
  if (mc.merge_alpha < 0.0 || mc.merge_alpha > 1.0) {
    raise(ErrorKind::Validation, "merge.alpha must be in [0, 1]");
  }
  mc.cal_enabled = cfg.get_bool("cal.enabled", true);
  mc.cal_margin = cfg.get_double("cal.margin", 1.0);
  if (mc.cal_margin <= 0.0) raise(ErrorKind::Validation, "cal.margin must be positive");
  std::string space = cfg.get_string("cal.space", "merged");
  if (space == "merged") {
    mc.cal_space = CalSpace::Merged;
  } else if (space == "original") {
    mc.cal_space = CalSpace::Original;
  } else {
    raise(ErrorKind::Validation, "cal.space must be 'merged' or 'original'");
  }
  return mc;
}

void ModelConfig::to_config(Config& cfg) const {
  cfg.set_int("encoder.dim", static_cast<std::int64_t>(encoder_dim));
  cfg.set_bool("encoder.shared", encoder_shared);
  cfg.set_int("merge.hidden", static_cast<std::int64_t>(merge_hidden));
  cfg.set_bool("merge.enabled", merge_enabled);
  cfg.set_double("merge.lambda", merge_lambda);
  cfg.set_double("merge.alpha", merge_alpha);
  cfg.set_bool("cal.enabled", cal_enabled);
  cfg.set_double("cal.margin", cal_margin);
  cfg.set("cal.space", cal_space == CalSpace::Merged ? "merged" : "original");
}

Model init_model(const ModelConfig& config, const TokenVocab& vocab, Rng& rng) {
  Model model;
  model.config = config;
  model.vocab = vocab;
  std::size_t d = config.encoder_dim;
  std::size_t h = config.hidden();
  model.params[kParamEmbedding] = init_embedding(vocab.size(), d, rng);
  if (!config.encoder_shared) {
    model.params[kParamEmbeddingSlot] = init_embedding(vocab.size(), d, rng);
  }
  auto uniform = [&](std::vector<std::size_t> shape) {
    ad::Tensor t = ad::Tensor::zeros(std::move(shape));
    for (double& v : t.values) v = rng.uniform(-0.1, 0.1);
    return t;
  };
  model.params[kParamMergeW] = uniform({h, d});
  model.params[kParamMergeU] = uniform({h, d});
  model.params[kParamMergeV] = uniform({h});
  return model;
}

ParamNodes make_param_nodes(ad::Graph& graph, const ModelConfig& config, const ParamMap& params) {
  ParamNodes nodes;
  nodes.embedding_intent = graph.param(params.at(kParamEmbedding));
  nodes.embedding_slot = config.encoder_shared
                             ? nodes.embedding_intent
                             : graph.param(params.at(kParamEmbeddingSlot));
  nodes.merge_w = graph.param(params.at(kParamMergeW));
  nodes.merge_u = graph.param(params.at(kParamMergeU));
  nodes.merge_v = graph.param(params.at(kParamMergeV));
  return nodes;
}

namespace {

constexpr const char* kFormatName = "conprom-checkpoint";
constexpr int kFormatVersion = 1;

void write_doubles(std::ofstream& out, const std::vector<double>& values) {
  static_assert(sizeof(double) == 8);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      char buf[8];
      for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      out.write(buf, 8);
    }
  }
}

std::vector<double> read_doubles(std::ifstream& in, std::size_t count) {
  std::vector<double> values(count);
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      char buf[8];
      in.read(buf, 8);
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[b])) << (8 * b);
      }
      std::memcpy(&values[i], &bits, 8);
    }
  }
  if (!in) raise(ErrorKind::Io, "checkpoint: truncated tensor payload");
  return values;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const TrainerState* state) {
  // Tensor manifest: model params first, then optimizer moments.
  std::vector<std::pair<std::string, const ad::Tensor*>> tensors;
  for (const auto& [name, t] : model.params) tensors.emplace_back(name, &t);
  if (state) {
    for (const auto& [name, t] : state->adam_m) tensors.emplace_back("adam.m/" + name, &t);
    for (const auto& [name, t] : state->adam_v) tensors.emplace_back("adam.v/" + name, &t);
  }

  json manifest = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    manifest.push_back(json{{"name", name}, {"shape", t->shape}, {"offset", offset}});
    offset += t->numel();
  }

  Config snapshot;
  model.config.to_config(snapshot);
  json config_obj = json::object();
  for (const auto& [k, v] : snapshot.entries()) config_obj[k] = v;

  json header{{"format", kFormatName},
              {"version", kFormatVersion},
              {"dim", model.config.encoder_dim},
              {"vocab", model.vocab.tokens},
              {"config", std::move(config_obj)},
              {"tensors", std::move(manifest)}};
  if (state) {
    header["step"] = state->step;
    header["rng"] = state->rng_state;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write checkpoint " + path);
  out << header.dump() << "\n";
  for (const auto& [name, t] : tensors) write_doubles(out, t->values);
  if (!out) raise(ErrorKind::Io, "checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open checkpoint " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) raise(ErrorKind::Io, "checkpoint: missing header line");

  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::Parse, std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format", "") != kFormatName) {
    raise(ErrorKind::Validation, "checkpoint: unrecognized format");
  }

  LoadedCheckpoint loaded;
  Config snapshot;
  for (auto it = header.at("config").begin(); it != header.at("config").end(); ++it) {
    snapshot.set(it.key(), it.value().get<std::string>());
  }
  loaded.model.config = ModelConfig::from_config(snapshot);
  loaded.model.vocab = TokenVocab::build(header.at("vocab").get<std::vector<std::string>>());

  bool has_state = header.contains("step");
  TrainerState state;
  if (has_state) {
    state.step = header.at("step").get<std::int64_t>();
    state.rng_state = header.value("rng", "");
  }

  for (const auto& tj : header.at("tensors")) {
    std::string name = tj.at("name").get<std::string>();
    auto shape = tj.at("shape").get<std::vector<std::size_t>>();
    std::size_t count = 1;
    for (std::size_t d : shape) count *= d;
    ad::Tensor t;
    t.shape = std::move(shape);
    t.values = read_doubles(in, count);
    if (name.rfind("adam.m/", 0) == 0) {
      state.adam_m[name.substr(7)] = std::move(t);
    } else if (name.rfind("adam.v/", 0) == 0) {
      state.adam_v[name.substr(7)] = std::move(t);
    } else {
      loaded.model.params[name] = std::move(t);
    }
  }
  if (has_state) loaded.state = std::move(state);
  return loaded;
}

}  // namespace conprom
