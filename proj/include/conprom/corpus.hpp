#pragma once

#include <string>
#include <vector>

namespace conprom {

// One utterance with its intent label and aligned BIO slot tag sequence.
struct SemanticFrame {
  std::vector<std::string> tokens;
  std::string intent;
  std::vector<std::string> slot_tags;

  bool operator==(const SemanticFrame&) const = default;
};

struct Domain {
  std::string name;
  std::vector<SemanticFrame> frames;
  std::vector<std::string> intent_vocab;  // sorted
  std::vector<std::string> tag_vocab;     // sorted, always contains "O"

  bool operator==(const Domain&) const = default;
};

struct Dataset {
  std::vector<Domain> train;
  std::vector<Domain> dev;
  std::vector<Domain> test;

  bool operator==(const Dataset&) const = default;
  const std::vector<Domain>& split(const std::string& name) const;
};

// Tag syntax helpers. A valid tag is "O", "B-<name>" or "I-<name>".
bool is_valid_tag(const std::string& tag);
// Slot name of a non-"O" tag ("B-film" -> "film").
std::string tag_slot_name(const std::string& tag);

// Parses the dataset JSON document, enforcing all invariants. Vocabularies
// are derived from the data (sorted) when absent.
Dataset parse_dataset(const std::string& json_text);
std::string serialize_dataset(const Dataset& dataset);

Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& dataset, const std::string& path);

// Warnings for structurally legal but suspicious content, e.g. an "I-x" tag
// whose predecessor is neither "B-x" nor "I-x". Never fails.
std::vector<std::string> validate_frame(const SemanticFrame& frame);

}  // namespace conprom
