#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "experiment.hpp"
#include "reco/cco.hpp"
#include "reco/rng.hpp"
#include "reco/sensors.hpp"
#include "reco/threading.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reco;
using namespace reco::cli;

namespace {

struct RunFlags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

void add_run_flags(CLI::App* sub, RunFlags& f) {
  sub->add_option("--config", f.config, "experiment config JSON")->required();
  f.seed_opt = sub->add_option("--seed", f.seed, "override the config seed");
  f.threads_opt = sub->add_option(
      "--threads", f.threads, "worker thread count (0 = hardware default)");
  sub->add_option("--out", f.out, "parent directory for run outputs");
}

void print_report(const json& report, const std::string& dir) {
  std::printf("run: %s stage=%s model=%s seed=%llu hash=%s\n",
              report.value("experiment", "").c_str(),
              report.value("stage", "").c_str(),
              report.value("model", "").c_str(),
              static_cast<unsigned long long>(
                  report.value("seed", std::uint64_t{0})),
              report.value("config_hash", "").c_str());
  std::string line = "metrics:";
  for (const auto& [k, v] : report.at("metrics").items())
    line += " " + k + "=" + v.dump();
  std::printf("%s\n", line.c_str());
  std::printf("out: %s\n", dir.c_str());
}

int execute_config(const RunFlags& f, const char* required_stage,
                   const std::vector<std::string>* plan_override) {
  ExperimentConfig cfg = load_experiment_config(f.config);
  if (f.seed_opt != nullptr && *f.seed_opt) {
    cfg.seed = f.seed;
    cfg.seed_set = true;
  }
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (required_stage != nullptr && cfg.stage != required_stage)
    throw CliError(2, std::string(f.config) + ": stage must be " +
                          required_stage + ", got \"" + cfg.stage + "\"");
  if (plan_override != nullptr) {
    if (plan_override->size() == 1 && (*plan_override)[0] == "none")
      cfg.plan.clear();
    else
      cfg.plan = *plan_override;
  }
  if (f.threads_opt != nullptr && *f.threads_opt) set_num_threads(f.threads);

  std::string dir;
  const json report = run_experiment(cfg, &dir);
  print_report(report, dir);
  return 0;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CliError(2, "cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw CliError(2, path + ": " + e.what());
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage recommender experiments: co-occurrence candidate "
               "generation plus a federated click ranker"};
  app.require_subcommand(1);

  RunFlags run_f, ctr_f, fed_f;
  auto* cmd_run = app.add_subcommand("run", "run a config-driven experiment");
  add_run_flags(cmd_run, run_f);
  auto* cmd_ctr =
      app.add_subcommand("ctr-train", "train a centralized click model "
                                      "(config with stage ctr-central)");
  add_run_flags(cmd_ctr, ctr_f);
  auto* cmd_fed =
      app.add_subcommand("fed-train", "federated training "
                                      "(config with stage ctr-federated)");
  add_run_flags(cmd_fed, fed_f);
  std::vector<std::string> fed_plan;
  auto* fed_plan_opt =
      cmd_fed
          ->add_option("--plan", fed_plan,
                       "override the federation plan: comma-separated group "
                       "names, or \"none\" for purely local training")
          ->delimiter(',');

  std::string ing_data, ing_out;
  bool ing_item = false, ing_user = false;
  auto* cmd_ingest = app.add_subcommand(
      "ingest", "parse the rating files and write the event log");
  cmd_ingest->add_option("--data", ing_data,
                         "directory with ratings.dat/users.dat/movies.dat "
                         "(default $RECO_DATA_ROOT/ml-1m)");
  cmd_ingest->add_option("--out", ing_out, "output directory")->required();
  cmd_ingest->add_flag("--item-properties", ing_item,
                       "add genre/year/title-token indicators");
  cmd_ingest->add_flag("--user-properties", ing_user,
                       "add gender/age/occupation/zip indicators");

  std::string ccob_events, ccob_out;
  double ccob_threshold = 0.0;
  std::size_t ccob_max = 50;
  auto* cmd_ccob = app.add_subcommand(
      "cco-build", "build per-indicator similarity matrices from an event "
                   "log");
  cmd_ccob->add_option("--events", ccob_events, "event log (NDJSON)")
      ->required();
  cmd_ccob->add_option("--out", ccob_out, "output directory")->required();
  cmd_ccob->add_option("--llr-threshold", ccob_threshold,
                       "minimum association score to keep");
  cmd_ccob->add_option("--max-correlators", ccob_max,
                       "correlated items kept per target");

  std::string ccoe_data, ccoe_sims, ccoe_out;
  std::size_t ccoe_negatives = 100, ccoe_k = 10;
  std::uint64_t ccoe_seed = 1;
  auto* cmd_ccoe = app.add_subcommand(
      "cco-eval", "leave-one-out ranking evaluation of built similarity "
                  "matrices");
  cmd_ccoe->add_option("--data", ccoe_data,
                       "directory with the rating files (default "
                       "$RECO_DATA_ROOT/ml-1m)");
  cmd_ccoe->add_option("--sims", ccoe_sims,
                       "directory holding sim_*.jsonl files")
      ->required();
  cmd_ccoe->add_option("--negatives", ccoe_negatives,
                       "sampled negatives per user (0 = full catalog)");
  cmd_ccoe->add_option("--k", ccoe_k, "ranking cutoff");
  cmd_ccoe->add_option("--seed", ccoe_seed, "negative-sampling seed");
  cmd_ccoe->add_option("--out", ccoe_out, "also write the result JSON here");

  std::string feat_input, feat_out = "embeddings.csv", feat_json;
  auto* cmd_feat = app.add_subcommand(
      "features-extract", "sensor CSV -> windowed 112-feature embeddings");
  cmd_feat->add_option("input", feat_input, "timestamp + 6-channel CSV")
      ->required();
  cmd_feat->add_option("--out", feat_out, "output CSV path");
  cmd_feat->add_option("--json", feat_json, "also write JSON rows here");

  std::vector<std::string> rep_inputs;
  std::string rep_out = "report.csv";
  auto* cmd_report = app.add_subcommand(
      "report", "merge run reports into one comparison table");
  cmd_report->add_option("inputs", rep_inputs, "report.json files")
      ->required()
      ->expected(-1);
  cmd_report->add_option("--out", rep_out, "merged CSV path");

  std::string synth_out;
  SynthSpec synth_spec;
  auto* cmd_synth = app.add_subcommand(
      "synth", "generate a deterministic synthetic dataset (rating files + "
               "sensor stream)");
  cmd_synth->add_option("--out", synth_out, "output directory")->required();
  cmd_synth->add_option("--users", synth_spec.users, "number of users");
  cmd_synth->add_option("--movies", synth_spec.movies, "number of movies");
  cmd_synth->add_option("--ratings-per-user", synth_spec.ratings_per_user,
                        "ratings generated per user");
  cmd_synth->add_option("--sensor-seconds", synth_spec.sensor_seconds,
                        "length of the sensor stream");
  cmd_synth->add_option("--seed", synth_spec.seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*cmd_run) return execute_config(run_f, nullptr, nullptr);
    if (*cmd_ctr) return execute_config(ctr_f, "ctr-central", nullptr);
    if (*cmd_fed)
      return execute_config(fed_f, "ctr-federated",
                            *fed_plan_opt ? &fed_plan : nullptr);

    if (*cmd_ingest) {
      const Dataset ds = load_dataset(resolve_data_root(ing_data));
      IndicatorConfig ind;
      ind.item_properties = ing_item;
      ind.user_properties = ing_user;
      const EventLog log = build_event_log(ds, ind);
      fs::create_directories(ing_out);
      write_event_log_ndjson(log, (fs::path(ing_out) / "events.ndjson").string());
      json summary;
      summary["ratings"] = ds.ratings.size();
      summary["users"] = ds.users.size();
      summary["movies"] = ds.movies.size();
      summary["malformed_lines"] = ds.malformed_lines;
      summary["dropped_foreign_key"] = ds.dropped_foreign_key;
      summary["dataset_hash"] = hex16(dataset_content_hash(ds));
      json per;
      for (const auto& [name, pairs] : log.indicators)
        per[name] = pairs.size();
      summary["indicator_events"] = per;
      std::ofstream f(fs::path(ing_out) / "ingest.json");
      f << summary.dump(2) << '\n';
      std::printf("%s\n", summary.dump().c_str());
      return 0;
    }

    if (*cmd_ccob) {
      const EventLog log = read_event_log_ndjson(ccob_events);
      const auto primary = build_interaction_matrix(log, log.primary);
      fs::create_directories(ccob_out);
      json summary;
      summary["primary"] = log.primary;
      summary["llr_threshold"] = ccob_threshold;
      summary["max_correlators"] = ccob_max;
      json entries;
      for (const auto& [name, pairs] : log.indicators) {
        (void)pairs;
        const auto secondary = build_interaction_matrix(log, name);
        SimilarityMatrix sim =
            cross_occurrence(primary, secondary, ccob_threshold, ccob_max);
        sim.indicator = name;
        write_similarity_jsonl(
            sim, (fs::path(ccob_out) / ("sim_" + name + ".jsonl")).string());
        entries[name] = sim.entry_count();
        std::printf("%s: %zu entries\n", name.c_str(), sim.entry_count());
      }
      summary["entries"] = entries;
      std::ofstream f(fs::path(ccob_out) / "build.json");
      f << summary.dump(2) << '\n';
      return 0;
    }

    if (*cmd_ccoe) {
      std::map<std::string, SimilarityMatrix> sims;
      for (const auto& entry : fs::directory_iterator(ccoe_sims)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("sim_", 0) != 0 || entry.path().extension() != ".jsonl")
          continue;
        SimilarityMatrix sim = read_similarity_jsonl(entry.path().string());
        // Older files (or empty matrices) may lack the embedded name;
        // fall back to the sim_<name>.jsonl convention.
        std::string key = sim.indicator;
        if (key.empty()) key = name.substr(4, name.size() - 4 - 6);
        sims[key] = std::move(sim);
      }
      if (sims.empty())
        throw CliError(2, "no sim_*.jsonl files in " + ccoe_sims);
      // Histories must cover whatever the matrices were built from.
      IndicatorConfig ind;
      for (const auto& [name, _] : sims) {
        if (name.rfind("item_", 0) == 0) ind.item_properties = true;
        if (name.rfind("user_", 0) == 0) ind.user_properties = true;
      }
      const LooEvalSetup setup = prepare_loo_eval(ccoe_data, ind);
      const LooResult r = eval_similarities(setup, std::move(sims),
                                            ccoe_negatives, ccoe_k, ccoe_seed);
      json out;
      out["hr"] = r.hr;
      out["ndcg"] = r.ndcg;
      out["k"] = ccoe_k;
      out["negatives"] = ccoe_negatives;
      out["seed"] = ccoe_seed;
      out["users_evaluated"] = r.users_evaluated;
      out["users_skipped"] = r.users_skipped;
      out["dataset_hash"] = hex16(setup.dataset_hash);
      if (!ccoe_out.empty()) {
        std::ofstream f(ccoe_out);
        f << out.dump(2) << '\n';
      }
      std::printf("%s\n", out.dump().c_str());
      return 0;
    }

    if (*cmd_feat) {
      const auto readings = read_sensor_csv(feat_input);
      const auto sessions = sessionize(readings);
      const Tensor2D emb = embed_sessions(sessions);
      write_embeddings_csv(emb, feat_out);
      if (!feat_json.empty()) write_embeddings_json(emb, feat_json);
      std::printf("%zu readings -> %zu sessions -> %s\n", readings.size(),
                  sessions.size(), feat_out.c_str());
      return 0;
    }

    if (*cmd_report) {
      std::vector<json> reports;
      for (const auto& path : rep_inputs)
        reports.push_back(read_json_file(path));
      const std::string csv = merge_reports(reports);
      std::ofstream f(rep_out, std::ios::trunc);
      if (!f) throw CliError(1, "cannot write " + rep_out);
      f << csv;
      std::fputs(csv.c_str(), stdout);
      return 0;
    }

    if (*cmd_synth) {
      write_synthetic_movielens(synth_spec, synth_out);
      write_synthetic_sensor_csv(synth_spec,
                                 (fs::path(synth_out) / "sensor.csv").string());
      std::printf("synthetic dataset in %s: %zu users, %zu movies, ~%zu "
                  "ratings, %.0f s sensor stream\n",
                  synth_out.c_str(), synth_spec.users, synth_spec.movies,
                  synth_spec.users * synth_spec.ratings_per_user,
                  synth_spec.sensor_seconds);
      return 0;
    }
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
