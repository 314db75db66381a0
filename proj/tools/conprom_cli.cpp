// Command-line front end for the conprom shared library. Everything model-
// related goes through the C API in conprom.h.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "conprom.h"

namespace {

[[noreturn]] void die(const std::string& context, int code) {
  std::cerr << "error: " << context << ": " << conprom_last_error() << "\n";
  std::exit(code == CONPROM_OK ? 1 : code);
}

void check(int rc, const std::string& context) {
  if (rc != CONPROM_OK) die(context, rc);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    std::exit(CONPROM_ERR_IO);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    std::exit(CONPROM_ERR_IO);
  }
  out << content;
}

// `--checkpoint` accepts either a checkpoint file or a training output
// directory containing best.ckpt.
std::string resolve_checkpoint(const std::string& path) {
  namespace fs = std::filesystem;
  if (path.find("{seed}") == std::string::npos && fs::is_directory(path)) {
    return (fs::path(path) / "best.ckpt").string();
  }
  return path;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conprom: few-shot joint intent detection and slot filling"};
  app.require_subcommand(1);

  // ---- synth ----
  std::string synth_spec, synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", synth_spec, "flat key=value spec file (synth.* keys)");
  synth->add_option("--out", synth_out, "output dataset JSON")->required();

  // ---- episodes build ----
  auto* episodes_cmd = app.add_subcommand("episodes", "episode utilities");
  episodes_cmd->require_subcommand(1);
  std::string epb_data, epb_split = "test", epb_out;
  int epb_k = 1, epb_query = 16, epb_n = 50;
  std::uint64_t epb_seed = 0;
  auto* epb = episodes_cmd->add_subcommand("build", "build episodes from a dataset split");
  epb->add_option("--data", epb_data, "dataset JSON file")->required();
  epb->add_option("--split", epb_split, "train|dev|test");
  epb->add_option("--k", epb_k, "shot count");
  epb->add_option("--query-size", epb_query, "query frames per episode");
  epb->add_option("--n-episodes", epb_n, "number of episodes");
  epb->add_option("--seed", epb_seed, "random seed");
  epb->add_option("--out", epb_out, "output episode JSON")->required();

  // ---- gradcheck ----
  std::uint64_t gc_seed = 0;
  double gc_eps = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the full objective");
  gradcheck->add_option("--seed", gc_seed, "parameter init seed");
  gradcheck->add_option("--eps", gc_eps, "finite-difference epsilon");

  // ---- train ----
  std::string train_data, train_episodes, train_config, train_out;
  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--data", train_data, "dataset JSON file")->required();
  train->add_option("--episodes", train_episodes, "pre-built training episodes (optional)");
  train->add_option("--config", train_config, "flat key=value config file");
  train->add_option("--out", train_out, "output directory for checkpoints and loss log")
      ->required();

  // ---- eval ----
  std::string eval_ckpt, eval_episodes, eval_report;
  bool eval_finetune = false, eval_tr = false;
  int eval_seeds = 1;
  std::uint64_t eval_seed_base = 0;
  int eval_ft_steps = 50;
  double eval_ft_lr = 1e-3;
  auto* eval = app.add_subcommand("eval", "evaluate checkpoint(s) on episodes");
  eval->add_option("--checkpoint", eval_ckpt,
                   "checkpoint file, train output dir, or pattern with {seed}")
      ->required();
  eval->add_option("--episodes", eval_episodes, "episode JSON file")->required();
  eval->add_flag("--finetune", eval_finetune, "fine-tune on each support set first");
  eval->add_flag("--tr", eval_tr, "apply transition rules during decoding");
  eval->add_option("--seeds", eval_seeds, "number of seeds to aggregate");
  eval->add_option("--seed-base", eval_seed_base, "first seed value");
  eval->add_option("--finetune-steps", eval_ft_steps, "fine-tune steps");
  eval->add_option("--finetune-lr", eval_ft_lr, "fine-tune learning rate");
  eval->add_option("--report", eval_report, "write the report JSON here (default stdout)");

  // ---- export-protos ----
  std::string xp_episode, xp_ckpt, xp_out;
  int xp_index = 0;
  auto* export_protos = app.add_subcommand("export-protos",
                                           "dump original and merged prototypes as JSON");
  export_protos->add_option("--episode", xp_episode, "episode JSON file")->required();
  export_protos->add_option("--checkpoint", xp_ckpt, "checkpoint file")->required();
  export_protos->add_option("--index", xp_index, "episode index within the file");
  export_protos->add_option("--out", xp_out, "output JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  if (*synth) {
    std::string spec_text = synth_spec.empty() ? "" : read_file(synth_spec);
    conprom_dataset* ds = nullptr;
    check(conprom_synth_generate(spec_text.c_str(), &ds), "synth");
    check(conprom_dataset_save(ds, synth_out.c_str()), "synth: save");
    char* stats = nullptr;
    check(conprom_dataset_stats(ds, &stats), "synth: stats");
    std::cout << stats << "\n";
    conprom_string_free(stats);
    conprom_dataset_free(ds);
    return 0;
  }

  if (*epb) {
    conprom_dataset* ds = nullptr;
    check(conprom_dataset_load(epb_data.c_str(), &ds), "episodes build: load");
    conprom_episodes* eps = nullptr;
    check(conprom_episodes_build(ds, epb_split.c_str(), epb_k, epb_query, epb_n, epb_seed, &eps),
          "episodes build");
    check(conprom_episodes_save(eps, epb_out.c_str()), "episodes build: save");
    std::cout << "wrote " << conprom_episodes_count(eps) << " episodes to " << epb_out << "\n";
    conprom_episodes_free(eps);
    conprom_dataset_free(ds);
    return 0;
  }

  if (*gradcheck) {
    double max_rel_err = 0.0;
    check(conprom_gradcheck(gc_seed, gc_eps, &max_rel_err), "gradcheck");
    std::printf("max relative error: %.3e\n", max_rel_err);
    return max_rel_err <= 1e-4 ? 0 : 1;
  }

  if (*train) {
    conprom_dataset* ds = nullptr;
    check(conprom_dataset_load(train_data.c_str(), &ds), "train: load data");
    conprom_episodes* eps = nullptr;
    if (!train_episodes.empty()) {
      check(conprom_episodes_load(train_episodes.c_str(), &eps), "train: load episodes");
    }
    std::string config_text = train_config.empty() ? "" : read_file(train_config);
    check(conprom_train(ds, eps, config_text.c_str(), train_out.c_str()), "train");
    std::cout << "checkpoints and loss log written to " << train_out << "\n";
    conprom_episodes_free(eps);
    conprom_dataset_free(ds);
    return 0;
  }

  if (*eval) {
    conprom_episodes* eps = nullptr;
    check(conprom_episodes_load(eval_episodes.c_str(), &eps), "eval: load episodes");
    std::ostringstream options;
    options << "eval.seeds = " << eval_seeds << "\n"
            << "eval.seed_base = " << eval_seed_base << "\n"
            << "eval.finetune = " << (eval_finetune ? "true" : "false") << "\n"
            << "eval.tr = " << (eval_tr ? "true" : "false") << "\n"
            << "finetune.steps = " << eval_ft_steps << "\n"
            << "finetune.lr = " << eval_ft_lr << "\n";
    char* report = nullptr;
    check(conprom_evaluate(resolve_checkpoint(eval_ckpt).c_str(), eps, options.str().c_str(),
                           &report),
          "eval");
    if (eval_report.empty()) {
      std::cout << report << "\n";
    } else {
      write_file(eval_report, std::string(report) + "\n");
      std::cout << "report written to " << eval_report << "\n";
    }
    conprom_string_free(report);
    conprom_episodes_free(eps);
    return 0;
  }

  if (*export_protos) {
    conprom_model* model = nullptr;
    check(conprom_model_load(resolve_checkpoint(xp_ckpt).c_str(), &model), "export-protos: load");
    conprom_episodes* eps = nullptr;
    check(conprom_episodes_load(xp_episode.c_str(), &eps), "export-protos: episodes");
    char* dump = nullptr;
    check(conprom_export_protos(model, eps, xp_index, &dump), "export-protos");
    write_file(xp_out, std::string(dump) + "\n");
    std::cout << "prototypes written to " << xp_out << "\n";
    conprom_string_free(dump);
    conprom_episodes_free(eps);
    conprom_model_free(model);
    return 0;
  }

  return 0;
}
