// sdm: command-line front end for the dataset pipeline, trainer, parser,
// edit replay and the HTTP service.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "sdm/command_parser.hpp"
#include "sdm/edit_engine.hpp"
#include "sdm/generator.hpp"
#include "sdm/mesh_io.hpp"
#include "sdm/service.hpp"
#include "sdm/synthetic.hpp"
#include "sdm/tokenizer.hpp"
#include "sdm/trainer.hpp"

namespace {

using nlohmann::json;

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text << "\n";
  } else {
    sdm::write_text_file(out, text + "\n");
  }
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(sdm::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw sdm::ParseError(path + ": malformed JSON: " + e.what());
  }
}

/// {"network": NetworkConfig, "train": TrainConfig, "split_seed": n}; all optional.
struct RunConfig {
  sdm::NetworkConfig network;
  sdm::TrainConfig train;
  std::uint64_t split_seed = 0;
};

RunConfig load_run_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  const json j = read_json_file(path);
  try {
    if (j.contains("network")) rc.network = j.at("network").get<sdm::NetworkConfig>();
    if (j.contains("train")) rc.train = j.at("train").get<sdm::TrainConfig>();
    rc.split_seed = j.value("split_seed", rc.split_seed);
  } catch (const json::exception& e) {
    throw sdm::ParseError(path + ": " + e.what());
  }
  rc.network.validate();
  rc.train.validate();
  return rc;
}

std::vector<sdm::MeshModel> pick_split(const std::vector<sdm::MeshModel>& all, const std::string& split,
                                       std::uint64_t seed) {
  if (split == "all") return all;
  auto s = sdm::split_dataset(all, seed);
  if (split == "train") return s.train;
  if (split == "val") return s.val;
  return s.test;
}

sdm::HttpFrontend* g_front = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic direct modeling workbench"};
  app.require_subcommand(1);

  // convert
  std::string conv_in, conv_out, conv_id;
  auto* convert = app.add_subcommand("convert", "ingest an externally tessellated SDM-Mesh file (derives missing topology)");
  convert->add_option("input", conv_in, "input SDM-Mesh JSON")->required()->check(CLI::ExistingFile);
  convert->add_option("-o,--out", conv_out, "output file (default stdout)");
  convert->add_option("--id", conv_id, "override model_id");

  // generate-data
  int gd_count = 500;
  std::uint64_t gd_seed = 1;
  std::string gd_out;
  auto* gendata = app.add_subcommand("generate-data", "write a synthetic labeled dataset");
  gendata->add_option("--count", gd_count, "number of models")->check(CLI::PositiveNumber);
  gendata->add_option("--seed", gd_seed, "random seed");
  gendata->add_option("--out", gd_out, "output directory")->required();

  // tokens
  std::string tok_model, tok_out;
  auto* tokens = app.add_subcommand("tokens", "dump per-face segment/polygon/triangle tokens");
  tokens->add_option("--model", tok_model)->required()->check(CLI::ExistingFile);
  tokens->add_option("-o,--out", tok_out);

  // train
  std::string tr_data, tr_config, tr_out, tr_report;
  auto* train = app.add_subcommand("train", "train the feature generator");
  train->add_option("--data", tr_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--config", tr_config, "run config JSON")->check(CLI::ExistingFile);
  train->add_option("--out", tr_out, "checkpoint path")->required();
  train->add_option("--report", tr_report, "write validation metrics JSON here");

  // eval
  std::string ev_ckpt, ev_data, ev_report, ev_split = "test";
  std::uint64_t ev_split_seed = 0;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", ev_ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", ev_data)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--report", ev_report, "metrics JSON (default stdout)");
  eval->add_option("--split", ev_split, "which split of --data to score")
      ->check(CLI::IsMember({"all", "train", "val", "test"}));
  eval->add_option("--split-seed", ev_split_seed, "must match the seed used for training");

  // parse
  std::string pa_text, pa_engine = "grammar", pa_gold;
  auto* parse = app.add_subcommand("parse", "turn an edit instruction into a structured command");
  parse->add_option("--text", pa_text);
  parse->add_option("--engine", pa_engine)->check(CLI::IsMember({"grammar", "llm"}));
  parse->add_option("--gold", pa_gold, "score a JSONL corpus instead")->check(CLI::ExistingFile);

  // generate
  std::string ge_ckpt, ge_model, ge_type;
  int ge_seed = 0;
  bool ge_dist = false;
  auto* generate = app.add_subcommand("generate", "generate a feature's face ids from a seed face");
  generate->add_option("--ckpt", ge_ckpt)->required()->check(CLI::ExistingFile);
  generate->add_option("--model", ge_model)->required()->check(CLI::ExistingFile);
  generate->add_option("--seed-face", ge_seed)->required();
  generate->add_option("--type", ge_type, "feature type, e.g. slot")->required();
  generate->add_flag("--distributions", ge_dist, "include per-step distributions");

  // replay
  std::string rp_model, rp_calls, rp_out;
  auto* replay = app.add_subcommand("replay", "re-apply recorded api_calls to a model");
  replay->add_option("--model", rp_model)->required()->check(CLI::ExistingFile);
  replay->add_option("--calls", rp_calls, "api_calls JSON (array, or object with \"api_calls\")")
      ->required()
      ->check(CLI::ExistingFile);
  replay->add_option("-o,--out", rp_out);

  // serve
  sdm::ServiceConfig sv;
  bool sv_env_done = false;
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  serve->add_option("--host", sv.host);
  serve->add_option("--port", sv.port);
  serve->add_option("--checkpoint", sv.checkpoint);
  serve->add_option("--session-limit", sv.session_limit)->check(CLI::PositiveNumber);
  serve->preparse_callback([&](std::size_t) {
    sv = sdm::ServiceConfig::from_env();
    sv_env_done = true;
  });

  CLI11_PARSE(app, argc, argv);

  try {
    if (*convert) {
      auto model = sdm::model_from_json(read_json_file(conv_in), {.derive_missing_topology = true});
      if (!conv_id.empty()) model.model_id = conv_id;
      emit(sdm::model_to_json_text(model), conv_out);
      std::cerr << "faces: " << model.face_count() << ", labels: " << model.labels.size() << "\n";
    } else if (*gendata) {
      const auto manifest = sdm::generate_synthetic_dataset(gd_count, gd_seed, gd_out);
      std::cout << json{{"models", manifest.at("models").size()}, {"per_type", manifest.at("per_type")}}.dump() << "\n";
    } else if (*tokens) {
      const auto model = sdm::load_model(tok_model);
      emit(sdm::tokens_to_json(model.model_id, sdm::tokenize_model(model)).dump(), tok_out);
    } else if (*train) {
      const auto rc = load_run_config(tr_config);
      const auto split = sdm::split_dataset(sdm::load_dataset(tr_data), rc.split_seed);
      std::cerr << "train " << split.train.size() << " / val " << split.val.size() << " / test " << split.test.size()
                << " models\n";
      if (split.val.empty()) std::cerr << "warning: validation split is empty; keeping the last epoch's weights\n";
      sdm::FeatureGenerator gen(rc.network);
      const auto result = sdm::train(gen, sdm::prepare_dataset(split.train), sdm::prepare_dataset(split.val), rc.train,
                                     [](const sdm::EpochRecord& r) {
                                       std::cerr << "epoch " << r.epoch << " loss " << r.train_loss << " val_iou "
                                                 << r.val_iou << " val_em " << r.val_em << " (" << r.seconds << " s)\n";
                                     });
      gen.save(tr_out, {{"train", rc.train}, {"split_seed", rc.split_seed}, {"best_epoch", result.best_epoch}});
      auto report = result.report.to_json();
      report["best_epoch"] = result.best_epoch;
      report["epochs_run"] = result.epochs_run;
      if (!tr_report.empty()) sdm::write_text_file(tr_report, report.dump(2) + "\n");
      std::cerr << "best epoch " << result.best_epoch << ": val_iou " << result.report.iou_mean << " val_em "
                << result.report.em_rate << "\n";
    } else if (*eval) {
      const auto gen = sdm::FeatureGenerator::load(ev_ckpt);
      const auto models = pick_split(sdm::load_dataset(ev_data), ev_split, ev_split_seed);
      const auto prepared = sdm::prepare_dataset(models);
      if (prepared.samples.empty()) throw sdm::InvalidArgument("split '" + ev_split + "' of " + ev_data + " has no labeled features");
      const auto report = sdm::evaluate(*gen, prepared);
      emit(report.to_json().dump(2), ev_report);
      std::cerr << ev_split << ": " << report.count << " samples, iou " << report.iou_mean << ", em " << report.em_rate
                << "\n";
    } else if (*parse) {
      std::unique_ptr<sdm::LlmClient> client;
      if (pa_engine == "llm") {
        const auto cfg = sdm::LlmConfig::from_env();
        if (!cfg.configured()) {
          std::cerr << "error: --engine llm needs SDM_LLM_ENDPOINT\n";
          return 2;
        }
        client = std::make_unique<sdm::LlmClient>(cfg);
      }
      auto run = [&](const std::string& text) {
        return client ? sdm::parse_with_llm(text, *client) : sdm::parse_with_grammar(text);
      };
      if (!pa_gold.empty()) {
        const auto report = sdm::score_corpus(sdm::load_corpus(pa_gold), run);
        std::cout << report.to_json().dump(2) << "\n";
        std::cerr << report.matched << "/" << report.total << " exact matches\n";
        return report.matched == report.total ? 0 : 1;
      }
      if (pa_text.empty()) {
        std::cerr << "error: parse needs --text or --gold\n";
        return 2;
      }
      const auto r = run(pa_text);
      std::cout << r.to_json().dump(2) << "\n";
      if (!r.ok()) {
        std::cerr << "error: " << r.failure->reason << "\n";
        return 1;
      }
    } else if (*generate) {
      const auto gen = sdm::FeatureGenerator::load(ge_ckpt);
      const auto model = sdm::load_model(ge_model);
      std::cout << gen->generate(model, ge_seed, ge_type, ge_dist).to_json().dump() << "\n";
    } else if (*replay) {
      const auto model = sdm::load_model(rp_model);
      json calls = read_json_file(rp_calls);
      if (calls.is_object() && calls.contains("api_calls")) calls = calls.at("api_calls");
      emit(sdm::model_to_json_text(sdm::replay(model, calls)), rp_out);
    } else if (*serve) {
      if (!sv_env_done) sv = sdm::ServiceConfig::from_env();
      sdm::Service service(sv);
      sdm::HttpFrontend front(service);
      const int port = front.bind(sv.host, sv.port);
      g_front = &front;
      std::signal(SIGINT, [](int) {
        if (g_front) g_front->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_front) g_front->stop();
      });
      std::cerr << "listening on http://" << sv.host << ":" << port << " (checkpoint: "
                << (service.has_checkpoint() ? sv.checkpoint : "none") << ")\n";
      front.listen();
    }
  } catch (const sdm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
