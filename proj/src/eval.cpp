#include "conprom/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "conprom/error.hpp"
#include "conprom/pipeline.hpp"
#include "conprom/trainer.hpp"

namespace conprom {

using nlohmann::json;

std::vector<std::string> decode_slots(const std::vector<std::vector<double>>& distributions,
                                      const std::vector<std::string>& tag_names,
                                      bool transition_rules) {
  if (tag_names.empty()) raise(ErrorKind::InvalidArgument, "decode_slots: empty tag vocabulary");
  std::vector<std::string> output;
  output.reserve(distributions.size());
  for (std::size_t pos = 0; pos < distributions.size(); ++pos) {
    const auto& dist = distributions[pos];
    if (dist.size() != tag_names.size()) {
      raise(ErrorKind::InvalidArgument, "decode_slots: distribution width " +
                                            std::to_string(dist.size()) + " does not match " +
                                            std::to_string(tag_names.size()) + " tags");
    }
    std::size_t best = tag_names.size();
    for (std::size_t t = 0; t < tag_names.size(); ++t) {
      if (transition_rules && tag_names[t][0] == 'I' && is_valid_tag(tag_names[t]) &&
          tag_names[t] != "O") {
        // "I-x" is legal only right after an output "B-x" or "I-x".
        if (pos == 0) continue;
        const std::string& prev = output[pos - 1];
        if (prev == "O" || tag_slot_name(prev) != tag_slot_name(tag_names[t])) continue;
      }
      if (best == tag_names.size() || dist[t] > dist[best] ||
          (dist[t] == dist[best] && tag_names[t] < tag_names[best])) {
        best = t;
      }
    }
    // "O" and "B-*" are never masked, so a choice always exists.
    if (best == tag_names.size()) {
      raise(ErrorKind::Runtime, "decode_slots: all tags masked");
    }
    output.push_back(tag_names[best]);
  }
  return output;
}

std::vector<Chunk> extract_chunks(const std::vector<std::string>& tags) {
  std::vector<Chunk> chunks;
  bool open = false;
  Chunk current;
  auto close = [&](std::size_t end) {
    if (open) {
      current.end = end;
      chunks.push_back(current);
      open = false;
    }
  };
  for (std::size_t k = 0; k < tags.size(); ++k) {
    const std::string& tag = tags[k];
    if (!is_valid_tag(tag)) raise(ErrorKind::Validation, "extract_chunks: malformed tag '" + tag + "'");
    if (tag == "O") {
      close(k - 1);
    } else if (tag[0] == 'B') {
      close(k - 1);
      current = {tag_slot_name(tag), k, k};
      open = true;
    } else {  // I-x continues a same-name chunk, otherwise starts one (orphan I)
      std::string name = tag_slot_name(tag);
      if (!open || current.name != name) {
        close(k - 1);
        current = {name, k, k};
        open = true;
      }
    }
  }
  close(tags.empty() ? 0 : tags.size() - 1);
  return chunks;
}

SlotF1 slot_f1(const std::vector<std::vector<std::string>>& pred,
               const std::vector<std::vector<std::string>>& gold) {
  if (pred.size() != gold.size()) {
    raise(ErrorKind::InvalidArgument, "slot_f1: " + std::to_string(pred.size()) +
                                          " predicted vs " + std::to_string(gold.size()) +
                                          " gold sequences");
  }
  SlotF1 out;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].size() != gold[s].size()) {
      raise(ErrorKind::InvalidArgument,
            "slot_f1: length mismatch in sentence " + std::to_string(s));
    }
    auto pc = extract_chunks(pred[s]);
    auto gc = extract_chunks(gold[s]);
    std::set<Chunk> gold_set(gc.begin(), gc.end());
    for (const auto& chunk : pc) {
      if (gold_set.count(chunk)) ++out.matched;
    }
    out.n_pred += pc.size();
    out.n_gold += gc.size();
  }
  out.precision = out.n_pred ? static_cast<double>(out.matched) / static_cast<double>(out.n_pred) : 0.0;
  out.recall = out.n_gold ? static_cast<double>(out.matched) / static_cast<double>(out.n_gold) : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

EpisodePredictions predict_episode(const Model& model, const Episode& episode,
                                   const EvalOptions& options) {
  if (episode.query.empty()) {
    raise(ErrorKind::InvalidArgument, "predict_episode: episode has no query frames");
  }
  const Model* active = &model;
  Model adapted;
  if (options.finetune) {
    adapted = finetune(model, episode.support,
                       FinetuneOptions{options.finetune_steps, options.finetune_lr});
    active = &adapted;
  }

  ad::Graph graph;
  ParamNodes nodes = make_param_nodes(graph, active->config, active->params);
  EpisodeForward fwd = build_episode_forward(graph, active->config, active->vocab, nodes, episode,
                                             PipelineOptions{.build_loss = false});

  const ad::Tensor& intent_probs = graph.value(fwd.intent_probs);
  const ad::Tensor& slot_probs = graph.value(fwd.slot_probs);

  EpisodePredictions preds;
  for (std::size_t q = 0; q < episode.query.size(); ++q) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < fwd.vocab.intent_names.size(); ++i) {
      double cur = intent_probs.at(q, i);
      double top = intent_probs.at(q, best);
      if (cur > top || (cur == top && fwd.vocab.intent_names[i] < fwd.vocab.intent_names[best])) {
        best = i;
      }
    }
    preds.intents.push_back(fwd.vocab.intent_names[best]);

    std::size_t offset = fwd.query_token_offsets[q];
    std::size_t len = episode.query[q].tokens.size();
    std::vector<std::vector<double>> dists(len);
    for (std::size_t k = 0; k < len; ++k) {
      dists[k].resize(fwd.vocab.tag_names.size());
      for (std::size_t t = 0; t < fwd.vocab.tag_names.size(); ++t) {
        dists[k][t] = slot_probs.at(offset + k, t);
      }
    }
    preds.slot_tags.push_back(decode_slots(dists, fwd.vocab.tag_names, options.transition_rules));
  }
  return preds;
}

MetricsReport evaluate_episode(const Model& model, const Episode& episode,
                               const EvalOptions& options) {
  EpisodePredictions preds = predict_episode(model, episode, options);

  MetricsReport report;
  report.n_sentences = episode.query.size();
  std::size_t intent_correct = 0, slots_correct = 0, joint_correct = 0;
  std::vector<std::vector<std::string>> gold_tags;
  for (std::size_t q = 0; q < episode.query.size(); ++q) {
    bool intent_ok = preds.intents[q] == episode.query[q].intent;
    bool slots_ok = preds.slot_tags[q] == episode.query[q].slot_tags;
    intent_correct += intent_ok;
    slots_correct += slots_ok;
    joint_correct += intent_ok && slots_ok;
    gold_tags.push_back(episode.query[q].slot_tags);
  }
  double n = static_cast<double>(report.n_sentences);
  report.intent_accuracy = static_cast<double>(intent_correct) / n;
  report.sentence_slot_accuracy = static_cast<double>(slots_correct) / n;
  report.joint_accuracy = static_cast<double>(joint_correct) / n;

  SlotF1 f1 = slot_f1(preds.slot_tags, gold_tags);
  report.slot_precision = f1.precision;
  report.slot_recall = f1.recall;
  report.slot_f1 = f1.f1;
  report.n_pred_chunks = f1.n_pred;
  report.n_gold_chunks = f1.n_gold;
  return report;
}

namespace {

template <typename Get>
double mean_of(const std::vector<MetricsReport>& reports, Get get) {
  double acc = 0.0;
  for (const auto& r : reports) acc += get(r);
  return acc / static_cast<double>(reports.size());
}

template <typename Get>
double stddev_of(const std::vector<MetricsReport>& reports, Get get) {
  double mu = mean_of(reports, get);
  double acc = 0.0;
  for (const auto& r : reports) {
    double d = get(r) - mu;
    acc += d * d;
  }
  // population sigma, matching the reported-mean-over-seeds convention
  return std::sqrt(acc / static_cast<double>(reports.size()));
}

json report_to_json(const MetricsReport& r) {
  return json{{"intent_accuracy", r.intent_accuracy},
              {"slot_precision", r.slot_precision},
              {"slot_recall", r.slot_recall},
              {"slot_f1", r.slot_f1},
              {"joint_accuracy", r.joint_accuracy},
              {"sentence_slot_accuracy", r.sentence_slot_accuracy},
              {"n_sentences", r.n_sentences},
              {"n_gold_chunks", r.n_gold_chunks},
              {"n_pred_chunks", r.n_pred_chunks}};
}

}  // namespace

MetricsReport mean_report(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) raise(ErrorKind::InvalidArgument, "mean_report: no reports");
  MetricsReport mean;
  mean.intent_accuracy = mean_of(reports, [](const auto& r) { return r.intent_accuracy; });
  mean.slot_precision = mean_of(reports, [](const auto& r) { return r.slot_precision; });
  mean.slot_recall = mean_of(reports, [](const auto& r) { return r.slot_recall; });
  mean.slot_f1 = mean_of(reports, [](const auto& r) { return r.slot_f1; });
  mean.joint_accuracy = mean_of(reports, [](const auto& r) { return r.joint_accuracy; });
  mean.sentence_slot_accuracy =
      mean_of(reports, [](const auto& r) { return r.sentence_slot_accuracy; });
  for (const auto& r : reports) {
    mean.n_sentences += r.n_sentences;
    mean.n_gold_chunks += r.n_gold_chunks;
    mean.n_pred_chunks += r.n_pred_chunks;
  }
  return mean;
}

AggregateReport aggregate(const std::vector<std::vector<MetricsReport>>& per_seed_reports) {
  if (per_seed_reports.empty()) raise(ErrorKind::InvalidArgument, "aggregate: no reports");
  AggregateReport out;
  for (const auto& seed_reports : per_seed_reports) {
    out.per_seed.push_back(mean_report(seed_reports));
  }
  out.mean = mean_report(out.per_seed);
  out.stddev.intent_accuracy = stddev_of(out.per_seed, [](const auto& r) { return r.intent_accuracy; });
  out.stddev.slot_precision = stddev_of(out.per_seed, [](const auto& r) { return r.slot_precision; });
  out.stddev.slot_recall = stddev_of(out.per_seed, [](const auto& r) { return r.slot_recall; });
  out.stddev.slot_f1 = stddev_of(out.per_seed, [](const auto& r) { return r.slot_f1; });
  out.stddev.joint_accuracy = stddev_of(out.per_seed, [](const auto& r) { return r.joint_accuracy; });
  out.stddev.sentence_slot_accuracy =
      stddev_of(out.per_seed, [](const auto& r) { return r.sentence_slot_accuracy; });
  return out;
}

std::string report_json(const AggregateReport& report,
                        const std::map<std::string, std::string>& options) {
  json per_seed = json::array();
  for (const auto& r : report.per_seed) per_seed.push_back(report_to_json(r));
  json root{{"options", options},
            {"per_seed", std::move(per_seed)},
            {"mean", report_to_json(report.mean)},
            {"std", report_to_json(report.stddev)},
            {"sigma_convention", "population"}};
  return root.dump(2);
}

}  // namespace conprom
