#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "reco/cco.hpp"
#include "reco/ctr.hpp"
#include "reco/ingest.hpp"
#include "reco/metrics.hpp"

namespace reco::cli {

// Anything that should terminate the process: exit code 2 for configuration
// and validation problems, 1 for runtime failures.
struct CliError : std::runtime_error {
  int exit_code;
  CliError(int code, const std::string& msg)
      : std::runtime_error(msg), exit_code(code) {}
};

// One experiment, fully described. Everything has a default except stage,
// seed, and (outside the features stage) model.
struct ExperimentConfig {
  std::string experiment; // report id; defaults to the config file stem
  std::string stage;      // cco | ctr-central | ctr-federated | features
  std::string model;      // cco | poprec | lr-raw | lr-emb | autoint
  std::uint64_t seed = 0;
  bool seed_set = false;

  // Directory holding ratings.dat / users.dat / movies.dat. Empty means
  // $RECO_DATA_ROOT/ml-1m, resolved at run time.
  std::string data_root;

  IndicatorConfig indicators;
  double llr_threshold = 0.0;
  std::size_t max_correlators = 50;

  std::size_t eval_negatives = 100; // 0 = rank against the full catalog
  std::size_t eval_k = 10;
  std::string auc_mode = "exact"; // exact | thresholded10

  bool include_timestamp = true;
  AutoIntConfig autoint;
  std::size_t epochs = 10;
  std::size_t batch_size = 256;
  std::string optimizer = "adam";
  double learning_rate = 1e-3;
  std::array<double, 3> split = {0.8, 0.1, 0.1};
  double subsample = 1.0; // stratified fraction of the binarized records

  std::string partition = "iid"; // iid | cluster
  std::size_t num_clients = 10;
  double client_fraction = 1.0;
  std::size_t local_epochs = 1;
  std::size_t local_batch = 256;
  std::size_t rounds = 10;
  std::vector<std::string> plan = {"embedding", "interaction", "output"};
  double noise_sigma = 0.0;
  std::size_t svd_rank = 50;

  std::string features_input;
  std::string features_format = "csv"; // csv | json | both

  std::string out_dir = "runs";
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                         const std::string& default_name);
ExperimentConfig load_experiment_config(const std::string& path);

// Stage/model compatibility, ranges, enum values. Throws CliError(2).
void validate(const ExperimentConfig& cfg);

// The experiment's identity: every semantic field with defaults
// materialized, output location excluded. Hashed for the run directory name
// and embedded in every report.
nlohmann::json canonical_json(const ExperimentConfig& cfg);
std::string config_hash_hex(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string hex16(std::uint64_t v);

std::uint64_t dataset_content_hash(const Dataset& ds);

// Resolve the configured data root (possibly via $RECO_DATA_ROOT) and parse
// the three MovieLens-format files under it.
std::string resolve_data_root(const std::string& configured);
Dataset load_dataset(const std::string& root);

// Shared ranking-evaluation scaffold: leave-one-out split, train-side event
// log, per-user cases and the candidate catalog.
struct LooEvalSetup {
  Dataset ds;
  LooSplit loo;
  EventLog log;
  std::vector<LooCase> cases;
  std::vector<int> catalog;
  std::uint64_t dataset_hash = 0;
};

LooEvalSetup prepare_loo_eval(const std::string& data_root,
                              const IndicatorConfig& ind);
LooResult eval_popularity(const LooEvalSetup& s, std::size_t negatives,
                          std::size_t k, std::uint64_t seed);
LooResult eval_similarities(const LooEvalSetup& s,
                            std::map<std::string, SimilarityMatrix> sims,
                            std::size_t negatives, std::size_t k,
                            std::uint64_t seed);

// Executes the experiment end-to-end and writes, under
// <out_dir>/<experiment>-<confighash>/: config.json (echo), report.json,
// report.csv, and per-stage artifacts (similarity matrices, checkpoints,
// round history, embeddings). Returns the report.
nlohmann::json run_experiment(const ExperimentConfig& cfg,
                              std::string* run_dir_out = nullptr);

// One comparison CSV row per run report. Refuses to merge reports whose
// dataset hashes disagree.
std::string merge_reports(const std::vector<nlohmann::json>& reports);

// Self-contained synthetic fixture: MovieLens-format rating files with
// planted user/movie taste clusters, plus a 6-channel sensor stream.
struct SynthSpec {
  std::size_t users = 300;
  std::size_t movies = 200;
  std::size_t ratings_per_user = 30;
  double sensor_seconds = 600.0;
  std::uint64_t seed = 1;
};

void write_synthetic_movielens(const SynthSpec& spec, const std::string& dir);
void write_synthetic_sensor_csv(const SynthSpec& spec, const std::string& path);

} // namespace reco::cli
