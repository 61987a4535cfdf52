// Pipeline driver: generate or import syndrome data, train the decoder,
// train the RL adversary, evaluate attacks (learned and brute-force),
// harden the decoder, and compare before/after reports.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qdra/adversary.hpp"
#include "qdra/checkpoint.hpp"
#include "qdra/codesim.hpp"
#include "qdra/decoder.hpp"
#include "qdra/hardening.hpp"
#include "qdra/manifest.hpp"
#include "qdra/report.hpp"

namespace {

using nlohmann::json;

struct GlobalOpts {
  std::uint64_t seed = 1;
  int workers = 1;
};

std::uint64_t stage_seed(const GlobalOpts& g, const std::string& stage) {
  return qdra::derive_seed(g.seed, stage);
}

std::vector<std::size_t> pick_split(const qdra::Dataset& ds, const std::string& which) {
  qdra::SplitView view = qdra::split(ds);
  if (which == "train") return view.train;
  if (which == "test") return view.test;
  if (which == "all") {
    std::vector<std::size_t> all(ds.records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  throw qdra::ConfigError("unknown split '" + which + "' (use train|test|all)");
}

void maybe_emit_heatmap(const qdra::AttackReport& report, const std::string& csv,
                        const std::string& svg) {
  if (!csv.empty() && !svg.empty()) {
    qdra::emit_heatmap(report, csv, svg);
  } else if (!csv.empty() || !svg.empty()) {
    throw qdra::ConfigError("--heatmap-csv and --heatmap-svg must be given together");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GAT syndrome decoder robustness harness"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value config file; flags override it")
      ->envname("QDRA_CONFIG");

  GlobalOpts g;
  app.add_option("--seed", g.seed, "Master seed; each stage derives its own stream")
      ->capture_default_str();
  app.add_option("--workers", g.workers, "Worker threads for evaluation stages")
      ->capture_default_str();

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic syndrome dataset");
  std::string gen_mode = "rep-code", gen_out;
  qdra::NoiseModel gen_model;
  int gen_n = 10000, gen_ns = 4, gen_t = 2;
  gen->add_option("--mode", gen_mode, "rep-code | teacher")->capture_default_str();
  gen->add_option("--p", gen_model.p, "Per-round data-flip probability")->capture_default_str();
  gen->add_option("--q", gen_model.q, "Measurement-flip probability")->capture_default_str();
  gen->add_option("--teacher-seed", gen_model.teacher_seed, "Teacher-network seed")
      ->capture_default_str();
  gen->add_option("--n", gen_n, "Number of shots")->capture_default_str();
  gen->add_option("--ns", gen_ns, "Spatial detector count")->capture_default_str();
  gen->add_option("--t", gen_t, "Measurement rounds")->capture_default_str();
  gen->add_option("--out", gen_out, "Output dataset file")->required();

  // ---- import-01 ----
  auto* imp = app.add_subcommand("import-01", "Import detection-event / obs-flip 01 files");
  std::string imp_dets, imp_obs, imp_out, imp_order = "round-major";
  int imp_ns = 4, imp_t = 2;
  imp->add_option("--dets", imp_dets, "Detection-event 01 file")->required();
  imp->add_option("--obs", imp_obs, "Observable-flip 01 file")->required();
  imp->add_option("--ns", imp_ns, "Spatial detector count")->capture_default_str();
  imp->add_option("--t", imp_t, "Measurement rounds")->capture_default_str();
  imp->add_option("--order", imp_order, "Input detector order: round-major | node-major")
      ->capture_default_str();
  imp->add_option("--out", imp_out, "Output dataset file")->required();

  // ---- train-decoder ----
  auto* td = app.add_subcommand("train-decoder", "Train the GAT decoder");
  std::string td_data, td_out, td_curves;
  qdra::DecoderConfig td_cfg;
  td->add_option("--data", td_data, "Dataset file")->required();
  td->add_option("--hidden", td_cfg.hidden_dim, "GAT hidden width")->capture_default_str();
  td->add_option("--heads", td_cfg.heads, "Attention heads")->capture_default_str();
  td->add_option("--mlp-hidden", td_cfg.mlp_hidden, "MLP hidden width")->capture_default_str();
  td->add_option("--lr", td_cfg.lr, "Learning rate")->capture_default_str();
  td->add_option("--epochs", td_cfg.epochs, "Training epochs")->capture_default_str();
  td->add_option("--batch", td_cfg.batch, "Mini-batch size")->capture_default_str();
  td->add_option("--out", td_out, "Decoder checkpoint output")->required();
  td->add_option("--curves", td_curves, "Learning-curve CSV output");

  // ---- train-adversary ----
  auto* ta = app.add_subcommand("train-adversary", "Train the REINFORCE attack policy");
  std::string ta_decoder, ta_data, ta_out;
  qdra::ReinforceConfig ta_cfg;
  int ta_max_steps = 5;
  ta->add_option("--decoder", ta_decoder, "Frozen decoder checkpoint")->required();
  ta->add_option("--data", ta_data, "Dataset file")->required();
  ta->add_option("--episodes", ta_cfg.episodes, "Training episodes")->capture_default_str();
  ta->add_option("--gamma", ta_cfg.gamma, "Discount factor")->capture_default_str();
  ta->add_option("--lr", ta_cfg.lr, "Learning rate")->capture_default_str();
  ta->add_option("--hidden", ta_cfg.hidden_dim, "Actor hidden width")->capture_default_str();
  ta->add_option("--max-steps", ta_max_steps, "Episode step budget")->capture_default_str();
  ta->add_option("--out", ta_out, "Actor checkpoint output")->required();

  // ---- attack ----
  auto* at = app.add_subcommand("attack", "Greedy attack evaluation of a trained actor");
  std::string at_decoder, at_actor, at_data, at_out, at_split = "test", at_csv, at_svg;
  int at_max_steps = 5;
  at->add_option("--decoder", at_decoder, "Decoder checkpoint")->required();
  at->add_option("--actor", at_actor, "Actor checkpoint")->required();
  at->add_option("--data", at_data, "Dataset file")->required();
  at->add_option("--split", at_split, "Evaluation split: test | train | all")
      ->capture_default_str();
  at->add_option("--max-steps", at_max_steps, "Episode step budget")->capture_default_str();
  at->add_option("--out", at_out, "Attack report JSON output")->required();
  at->add_option("--heatmap-csv", at_csv, "Heatmap CSV output");
  at->add_option("--heatmap-svg", at_svg, "Heatmap SVG output");

  // ---- oracle-attack ----
  auto* oa = app.add_subcommand("oracle-attack", "Exhaustive minimum-flip attack oracle");
  std::string oa_decoder, oa_data, oa_out, oa_split = "test", oa_csv, oa_svg;
  int oa_budget = 5;
  oa->add_option("--decoder", oa_decoder, "Decoder checkpoint")->required();
  oa->add_option("--data", oa_data, "Dataset file")->required();
  oa->add_option("--split", oa_split, "Evaluation split: test | train | all")
      ->capture_default_str();
  oa->add_option("--budget", oa_budget, "Maximum flips per sample")->capture_default_str();
  oa->add_option("--out", oa_out, "Oracle report JSON output")->required();
  oa->add_option("--heatmap-csv", oa_csv, "Heatmap CSV output");
  oa->add_option("--heatmap-svg", oa_svg, "Heatmap SVG output");

  // ---- harden ----
  auto* hd = app.add_subcommand("harden", "Adversarial retraining of the decoder");
  std::string hd_decoder, hd_actor, hd_data, hd_out, hd_curves;
  qdra::HardenConfig hd_cfg;
  bool hd_fresh = false;
  int hd_max_steps = 5;
  hd->add_option("--decoder", hd_decoder, "Baseline decoder checkpoint")->required();
  hd->add_option("--actor", hd_actor, "Trained actor checkpoint")->required();
  hd->add_option("--data", hd_data, "Dataset file")->required();
  hd->add_option("--alpha", hd_cfg.alpha, "Adversarial loss weight")->capture_default_str();
  hd->add_option("--epochs", hd_cfg.epochs, "Retraining epochs")->capture_default_str();
  hd->add_flag("--fresh-init", hd_fresh, "Re-initialize instead of warm-starting");
  hd->add_option("--max-steps", hd_max_steps, "Episode step budget for example generation")
      ->capture_default_str();
  hd->add_option("--out", hd_out, "Hardened decoder checkpoint output")->required();
  hd->add_option("--curves", hd_curves, "Learning-curve CSV output");

  // ---- bayes ----
  auto* by = app.add_subcommand("bayes", "Exact rep-code posterior / Bayes accuracy");
  std::string by_data, by_out, by_syndrome;
  qdra::NoiseModel by_model;
  int by_t = 2, by_budget = 26;
  by->add_option("--p", by_model.p, "Per-round data-flip probability")->capture_default_str();
  by->add_option("--q", by_model.q, "Measurement-flip probability")->capture_default_str();
  by->add_option("--t", by_t, "Measurement rounds")->capture_default_str();
  by->add_option("--max-bits", by_budget, "Enumeration budget (total error bits)")
      ->capture_default_str();
  by->add_option("--data", by_data, "Dataset file to score on its test split");
  by->add_option("--syndrome", by_syndrome, "Single syndrome bit string to query");
  by->add_option("--out", by_out, "Summary JSON output")->required();

  // ---- compare ----
  auto* cp = app.add_subcommand("compare", "Delta summary of two attack reports");
  std::string cp_before, cp_after, cp_out;
  cp->add_option("--before", cp_before, "Report before hardening")->required();
  cp->add_option("--after", cp_after, "Report after hardening")->required();
  cp->add_option("--out", cp_out, "Delta summary JSON output")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      if (gen_mode == "rep-code") {
        gen_model.mode = qdra::NoiseMode::RepCode;
      } else if (gen_mode == "teacher") {
        gen_model.mode = qdra::NoiseMode::Teacher;
      } else {
        throw qdra::ConfigError("unknown mode '" + gen_mode + "' (use rep-code|teacher)");
      }
      std::uint64_t seed = stage_seed(g, "gen-data");
      qdra::Dataset ds = qdra::generate(gen_model, gen_n, seed, gen_ns, gen_t);
      qdra::write_dataset(ds, gen_out);
      json cfg{{"mode", gen_mode}, {"p", gen_model.p},   {"q", gen_model.q},
               {"n", gen_n},       {"ns", gen_ns},       {"t", gen_t},
               {"teacher_seed", gen_model.teacher_seed}, {"master_seed", g.seed}};
      qdra::write_manifest(gen_out, "gen-data", cfg, seed, {}, {gen_out});
    } else if (*imp) {
      qdra::DetectorOrder order;
      if (imp_order == "round-major") {
        order = qdra::DetectorOrder::RoundMajor;
      } else if (imp_order == "node-major") {
        order = qdra::DetectorOrder::NodeMajor;
      } else {
        throw qdra::ConfigError("unknown order '" + imp_order + "'");
      }
      qdra::Dataset ds = qdra::import_01(imp_dets, imp_obs, imp_ns, imp_t, order);
      ds.split_seed = qdra::derive_seed(stage_seed(g, "import-01"), "split");
      qdra::write_dataset(ds, imp_out);
      json cfg{{"dets", imp_dets}, {"obs", imp_obs},       {"ns", imp_ns},
               {"t", imp_t},       {"order", imp_order},   {"master_seed", g.seed}};
      qdra::write_manifest(imp_out, "import-01", cfg, stage_seed(g, "import-01"),
                           {imp_dets, imp_obs}, {imp_out});
    } else if (*td) {
      qdra::Dataset ds = qdra::read_dataset(td_data);
      td_cfg.in_dim = ds.t;
      std::uint64_t seed = stage_seed(g, "train-decoder");
      qdra::TrainResult result = qdra::train_decoder(ds, td_cfg, seed);
      qdra::save_decoder(result.model, td_out, json{{"data", qdra::file_digest(td_data)}});
      std::vector<std::string> outputs{td_out};
      if (!td_curves.empty()) {
        qdra::emit_curves(result.curves, td_curves);
        outputs.push_back(td_curves);
      }
      qdra::EvalMetrics m = qdra::evaluate(result.model, ds, qdra::split(ds).test);
      std::cout << "trained decoder: w_p=" << result.w_p << " test_accuracy=" << m.accuracy
                << "\n";
      json cfg{{"data", td_data},           {"hidden", td_cfg.hidden_dim},
               {"heads", td_cfg.heads},     {"mlp_hidden", td_cfg.mlp_hidden},
               {"lr", td_cfg.lr},           {"epochs", td_cfg.epochs},
               {"batch", td_cfg.batch},     {"master_seed", g.seed}};
      qdra::write_manifest(td_out, "train-decoder", cfg, seed, {td_data}, outputs);
    } else if (*ta) {
      qdra::Dataset ds = qdra::read_dataset(ta_data);
      qdra::DecoderModel decoder = qdra::load_decoder(ta_decoder);
      qdra::Environment env = qdra::Environment::from_model(decoder, ta_max_steps);
      auto pool = qdra::negative_pool(env, ds, qdra::split(ds).train);
      std::uint64_t seed = stage_seed(g, "train-adversary");
      qdra::ActorModel actor = qdra::reinforce_train(env, pool, ds.t, ta_cfg, seed);
      qdra::save_actor(actor, ta_out, json{{"decoder", qdra::file_digest(ta_decoder)}});
      std::cout << "trained adversary on pool of " << pool.size() << " start states\n";
      json cfg{{"decoder", ta_decoder},       {"data", ta_data},
               {"episodes", ta_cfg.episodes}, {"gamma", ta_cfg.gamma},
               {"lr", ta_cfg.lr},             {"hidden", ta_cfg.hidden_dim},
               {"max_steps", ta_max_steps},   {"master_seed", g.seed}};
      qdra::write_manifest(ta_out, "train-adversary", cfg, seed, {ta_decoder, ta_data}, {ta_out});
    } else if (*at) {
      qdra::Dataset ds = qdra::read_dataset(at_data);
      qdra::DecoderModel decoder = qdra::load_decoder(at_decoder);
      qdra::ActorModel actor = qdra::load_actor(at_actor);
      qdra::Environment env = qdra::Environment::from_model(decoder, at_max_steps);
      auto pool = qdra::negative_pool(env, ds, pick_split(ds, at_split));
      qdra::AttackReport report = qdra::attack_eval(env, actor, pool, g.workers);
      qdra::write_report(report, at_out);
      maybe_emit_heatmap(report, at_csv, at_svg);
      std::cout << "attack: pool=" << report.pool_size << " asr=" << report.asr()
                << " avg_flips=" << (report.avg_flips ? std::to_string(*report.avg_flips) : "n/a")
                << "\n";
      std::vector<std::string> outputs{at_out};
      if (!at_csv.empty()) outputs.push_back(at_csv);
      if (!at_svg.empty()) outputs.push_back(at_svg);
      json cfg{{"decoder", at_decoder}, {"actor", at_actor},       {"data", at_data},
               {"split", at_split},     {"max_steps", at_max_steps}, {"master_seed", g.seed}};
      qdra::write_manifest(at_out, "attack", cfg, g.seed, {at_decoder, at_actor, at_data},
                           outputs);
    } else if (*oa) {
      qdra::Dataset ds = qdra::read_dataset(oa_data);
      qdra::DecoderModel decoder = qdra::load_decoder(oa_decoder);
      qdra::Environment env = qdra::Environment::from_model(decoder, oa_budget);
      auto pool = qdra::negative_pool(env, ds, pick_split(ds, oa_split));
      qdra::OracleReport oracle = qdra::brute_force_attack(env, pool, oa_budget, g.workers);
      json j = qdra::report_to_json(oracle.report);
      j["budget"] = oracle.budget;
      j["min_flip_hist"] = oracle.min_flip_hist;
      qdra::detail::write_json_file(j, oa_out);
      maybe_emit_heatmap(oracle.report, oa_csv, oa_svg);
      std::cout << "oracle: pool=" << oracle.report.pool_size << " asr=" << oracle.report.asr()
                << "\n";
      std::vector<std::string> outputs{oa_out};
      if (!oa_csv.empty()) outputs.push_back(oa_csv);
      if (!oa_svg.empty()) outputs.push_back(oa_svg);
      json cfg{{"decoder", oa_decoder}, {"data", oa_data}, {"split", oa_split},
               {"budget", oa_budget},   {"master_seed", g.seed}};
      qdra::write_manifest(oa_out, "oracle-attack", cfg, g.seed, {oa_decoder, oa_data}, outputs);
    } else if (*hd) {
      qdra::Dataset ds = qdra::read_dataset(hd_data);
      qdra::DecoderModel baseline = qdra::load_decoder(hd_decoder);
      qdra::ActorModel actor = qdra::load_actor(hd_actor);
      qdra::Environment env = qdra::Environment::from_model(baseline, hd_max_steps);
      qdra::AdversarialSet adv =
          qdra::generate_adversarial(actor, env, ds, qdra::split(ds).train);
      if (adv.empty()) {
        std::cerr << "warning: actor produced no successful attacks; hardening is a no-op\n";
      }
      hd_cfg.warm_start = !hd_fresh;
      std::uint64_t seed = stage_seed(g, "harden");
      qdra::TrainResult result = qdra::robust_train(baseline, ds, adv, hd_cfg, seed);
      qdra::save_decoder(result.model, hd_out,
                         json{{"baseline", qdra::file_digest(hd_decoder)},
                              {"actor", qdra::file_digest(hd_actor)},
                              {"adversarial_examples", adv.size()},
                              {"alpha", hd_cfg.alpha}});
      std::vector<std::string> outputs{hd_out};
      if (!hd_curves.empty()) {
        qdra::emit_curves(result.curves, hd_curves);
        outputs.push_back(hd_curves);
      }
      std::cout << "hardened decoder with " << adv.size() << " adversarial examples\n";
      json cfg{{"decoder", hd_decoder}, {"actor", hd_actor},     {"data", hd_data},
               {"alpha", hd_cfg.alpha}, {"epochs", hd_cfg.epochs},
               {"fresh_init", hd_fresh}, {"max_steps", hd_max_steps}, {"master_seed", g.seed}};
      qdra::write_manifest(hd_out, "harden", cfg, seed, {hd_decoder, hd_actor, hd_data}, outputs);
    } else if (*by) {
      qdra::BayesTable table = qdra::bayes_table(by_model, by_t, by_budget);
      json j{{"p", by_model.p},
             {"q", by_model.q},
             {"t", by_t},
             {"positive_rate", table.positive_rate()},
             {"bayes_accuracy", table.bayes_accuracy()}};
      std::vector<std::string> inputs;
      if (!by_syndrome.empty()) {
        std::vector<std::uint8_t> bits;
        for (char c : by_syndrome) {
          if (c != '0' && c != '1') throw qdra::ConfigError("--syndrome must be a 0/1 string");
          bits.push_back(static_cast<std::uint8_t>(c - '0'));
        }
        if (bits.size() != static_cast<std::size_t>(qdra::repcode::kStabilizers) * by_t)
          throw qdra::ConfigError("--syndrome must have ns*t bits");
        j["syndrome"] = by_syndrome;
        j["posterior"] = table.posterior(bits);
      }
      if (!by_data.empty()) {
        qdra::Dataset ds = qdra::read_dataset(by_data);
        if (ds.t != by_t) throw qdra::ConfigError("--t must match the dataset");
        auto test = qdra::split(ds).test;
        std::size_t correct = 0;
        for (std::size_t idx : test) {
          const auto& rec = ds.records[idx];
          int pred = table.posterior(rec.bits) > 0.5 ? 1 : 0;
          correct += pred == rec.label;
        }
        j["test_split_size"] = test.size();
        j["bayes_test_accuracy"] = static_cast<double>(correct) / test.size();
        inputs.push_back(by_data);
      }
      qdra::detail::write_json_file(j, by_out);
      json cfg{{"p", by_model.p}, {"q", by_model.q}, {"t", by_t},
               {"data", by_data}, {"syndrome", by_syndrome}, {"master_seed", g.seed}};
      qdra::write_manifest(by_out, "bayes", cfg, g.seed, inputs, {by_out});
    } else if (*cp) {
      qdra::AttackReport before = qdra::read_report(cp_before);
      qdra::AttackReport after = qdra::read_report(cp_after);
      json j = qdra::compare_reports(before, after);
      qdra::detail::write_json_file(j, cp_out);
      std::cout << "compare: asr " << j["asr_before"] << " -> " << j["asr_after"] << " (ratio "
                << j["ratio"] << ")\n";
      json cfg{{"before", cp_before}, {"after", cp_after}, {"master_seed", g.seed}};
      qdra::write_manifest(cp_out, "compare", cfg, g.seed, {cp_before, cp_after}, {cp_out});
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
