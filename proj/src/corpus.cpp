#include "conprom/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "conprom/error.hpp"

namespace conprom {

using nlohmann::json;

const std::vector<Domain>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  raise(ErrorKind::InvalidArgument, "unknown split '" + name + "' (expected train|dev|test)");
}

bool is_valid_tag(const std::string& tag) {
  if (tag == "O") return true;
  if (tag.size() < 3) return false;
  if (tag[0] != 'B' && tag[0] != 'I') return false;
  return tag[1] == '-';
}

std::string tag_slot_name(const std::string& tag) {
  if (tag == "O" || !is_valid_tag(tag)) {
    raise(ErrorKind::InvalidArgument, "tag_slot_name: '" + tag + "' carries no slot name");
  }
  return tag.substr(2);
}

namespace {

std::vector<std::string> sorted_unique(std::set<std::string> values) {
  return {values.begin(), values.end()};
}

SemanticFrame parse_frame(const json& j, const std::string& domain_name, std::size_t index) {
  auto context = [&] { return "domain '" + domain_name + "' frame " + std::to_string(index); };
  if (!j.is_object() || !j.contains("tokens") || !j.contains("intent") || !j.contains("slot_tags")) {
    raise(ErrorKind::Validation, context() + ": expected object with tokens/intent/slot_tags");
  }
  SemanticFrame frame;
  frame.tokens = j.at("tokens").get<std::vector<std::string>>();
  frame.intent = j.at("intent").get<std::string>();
  frame.slot_tags = j.at("slot_tags").get<std::vector<std::string>>();
  if (frame.tokens.size() != frame.slot_tags.size()) {
    raise(ErrorKind::Validation,
          context() + ": length mismatch, " + std::to_string(frame.tokens.size()) +
              " tokens vs " + std::to_string(frame.slot_tags.size()) + " tags");
  }
  for (const auto& tag : frame.slot_tags) {
    if (!is_valid_tag(tag)) {
      raise(ErrorKind::Validation, context() + ": malformed tag '" + tag + "'");
    }
  }
  return frame;
}

Domain parse_domain(const json& j) {
  if (!j.is_object() || !j.contains("name") || !j.contains("frames")) {
    raise(ErrorKind::Validation, "domain object must carry name and frames");
  }
  Domain domain;
  domain.name = j.at("name").get<std::string>();
  std::size_t index = 0;
  for (const auto& fj : j.at("frames")) {
    domain.frames.push_back(parse_frame(fj, domain.name, index++));
  }

  std::set<std::string> intents, tags{"O"};
  for (const auto& frame : domain.frames) {
    intents.insert(frame.intent);
    tags.insert(frame.slot_tags.begin(), frame.slot_tags.end());
  }

  if (j.contains("intent_vocab")) {
    auto vocab = j.at("intent_vocab").get<std::vector<std::string>>();
    std::set<std::string> given(vocab.begin(), vocab.end());
    for (const auto& intent : intents) {
      if (!given.count(intent)) {
        raise(ErrorKind::Validation, "domain '" + domain.name + "': intent '" + intent +
                                         "' used in frames but missing from intent_vocab");
      }
    }
    domain.intent_vocab = sorted_unique(std::move(given));
  } else {
    domain.intent_vocab = sorted_unique(std::move(intents));
  }

  if (j.contains("tag_vocab")) {
    auto vocab = j.at("tag_vocab").get<std::vector<std::string>>();
    std::set<std::string> given(vocab.begin(), vocab.end());
    given.insert("O");
    for (const auto& tag : given) {
      if (!is_valid_tag(tag)) {
        raise(ErrorKind::Validation, "domain '" + domain.name + "': malformed tag '" + tag +
                                         "' in tag_vocab");
      }
    }
    for (const auto& tag : tags) {
      if (!given.count(tag)) {
        raise(ErrorKind::Validation, "domain '" + domain.name + "': tag '" + tag +
                                         "' used in frames but missing from tag_vocab");
      }
    }
    domain.tag_vocab = sorted_unique(std::move(given));
  } else {
    domain.tag_vocab = sorted_unique(std::move(tags));
  }
  return domain;
}

std::vector<Domain> parse_split(const json& root, const char* key) {
  std::vector<Domain> domains;
  if (!root.contains(key)) return domains;
  std::set<std::string> names;
  for (const auto& dj : root.at(key)) {
    Domain d = parse_domain(dj);
    if (!names.insert(d.name).second) {
      raise(ErrorKind::Validation,
            std::string("split '") + key + "': duplicate domain name '" + d.name + "'");
    }
    domains.push_back(std::move(d));
  }
  return domains;
}

json frame_json(const SemanticFrame& frame) {
  return json{{"tokens", frame.tokens}, {"intent", frame.intent}, {"slot_tags", frame.slot_tags}};
}

json domain_json(const Domain& domain) {
  json frames = json::array();
  for (const auto& frame : domain.frames) frames.push_back(frame_json(frame));
  return json{{"name", domain.name},
              {"frames", std::move(frames)},
              {"intent_vocab", domain.intent_vocab},
              {"tag_vocab", domain.tag_vocab}};
}

json split_json(const std::vector<Domain>& domains) {
  json out = json::array();
  for (const auto& domain : domains) out.push_back(domain_json(domain));
  return out;
}

}  // namespace

Dataset parse_dataset(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::Parse, std::string("dataset JSON: ") + e.what());
  }
  if (!root.is_object()) raise(ErrorKind::Validation, "dataset JSON: top level must be an object");
  try {
    Dataset ds;
    ds.train = parse_split(root, "train");
    ds.dev = parse_split(root, "dev");
    ds.test = parse_split(root, "test");
    return ds;
  } catch (const json::exception& e) {
    raise(ErrorKind::Validation, std::string("dataset JSON: ") + e.what());
  }
}

std::string serialize_dataset(const Dataset& dataset) {
  json root{{"train", split_json(dataset.train)},
            {"dev", split_json(dataset.dev)},
            {"test", split_json(dataset.test)}};
  return root.dump(2);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open dataset file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::Io, "cannot write dataset file " + path);
  out << serialize_dataset(dataset) << "\n";
}

std::vector<std::string> validate_frame(const SemanticFrame& frame) {
  std::vector<std::string> warnings;
  if (frame.tokens.size() != frame.slot_tags.size()) {
    warnings.push_back("length mismatch: " + std::to_string(frame.tokens.size()) + " tokens vs " +
                       std::to_string(frame.slot_tags.size()) + " tags");
  }
  for (std::size_t k = 0; k < frame.slot_tags.size(); ++k) {
    const std::string& tag = frame.slot_tags[k];
    if (!is_valid_tag(tag)) {
      warnings.push_back("malformed tag '" + tag + "' at index " + std::to_string(k));
      continue;
    }
    if (tag[0] != 'I') continue;
    bool orphan = true;
    if (k > 0) {
      const std::string& prev = frame.slot_tags[k - 1];
      if (is_valid_tag(prev) && prev != "O" && tag_slot_name(prev) == tag_slot_name(tag)) {
        orphan = false;
      }
    }
    if (orphan) {
      warnings.push_back("orphan " + tag + " at index " + std::to_string(k));
    }
  }
  return warnings;
}

}  // namespace conprom
