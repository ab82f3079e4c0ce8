#include "experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>

#include "reco/cco.hpp"
#include "reco/federation.hpp"
#include "reco/metrics.hpp"
#include "reco/rng.hpp"
#include "reco/sensors.hpp"
#include "reco/threading.hpp"

namespace reco::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

struct Fnv {
  std::uint64_t h = kFnvOffset;
  void add(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= kFnvPrime;
    }
  }
  template <typename T>
  void add_pod(const T& v) {
    add(&v, sizeof v);
  }
  void add_str(const std::string& s) { add(s.data(), s.size()); }
};

void require_cfg(bool ok, const std::string& msg) {
  if (!ok) throw CliError(2, msg);
}

// Typo guard: every object in a config must contain only known keys.
void check_keys(const json& obj, const std::string& context,
                std::initializer_list<const char*> allowed) {
  require_cfg(obj.is_object(), context + ": expected a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end())
      throw CliError(2, context + ": unknown key \"" + key + "\"");
  }
}

bool one_of(const std::string& v, std::initializer_list<const char*> set) {
  return std::find_if(set.begin(), set.end(), [&](const char* s) {
           return v == s;
         }) != set.end();
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string metric_cell(const json& obj, const char* key) {
  if (!obj.contains(key)) return "";
  const json& v = obj.at(key);
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_float()) return fmt_g(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return "";
}

const char* kReportColumns[] = {"experiment", "stage",  "model", "seed",
                                "config_hash", "dataset_hash", "hr", "ndcg",
                                "k",           "auc",   "logloss", "rounds"};

std::string report_csv_header() {
  std::string out;
  for (const char* c : kReportColumns) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out + "\n";
}

std::string report_csv_row(const json& report) {
  const json& m = report.at("metrics");
  std::string out;
  auto cell = [&](const std::string& s) {
    if (!out.empty()) out += ',';
    out += s;
  };
  cell(report.value("experiment", ""));
  cell(report.value("stage", ""));
  cell(report.value("model", ""));
  cell(metric_cell(report, "seed"));
  cell(report.value("config_hash", ""));
  cell(report.value("dataset_hash", ""));
  cell(metric_cell(m, "hr"));
  cell(metric_cell(m, "ndcg"));
  cell(metric_cell(m, "k"));
  cell(metric_cell(m, "auc"));
  cell(metric_cell(m, "logloss"));
  cell(metric_cell(m, "rounds"));
  return out + "\n";
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw CliError(1, "cannot write " + path.string());
  f << content;
}

bool has_both_classes(const std::vector<int>& labels) {
  bool pos = false, neg = false;
  for (int y : labels) (y > 0 ? pos : neg) = true;
  return pos && neg;
}

std::vector<int> labels_of(const std::vector<Sample>& samples) {
  std::vector<int> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.label);
  return y;
}

// Keeps ceil(fraction·n) records of each label class, chosen by a seeded
// shuffle, emitted in their original order.
std::vector<CtrRecord> stratified_subsample(const std::vector<CtrRecord>& recs,
                                            double fraction,
                                            std::uint64_t seed) {
  if (fraction >= 1.0) return recs;
  std::array<std::vector<std::size_t>, 2> by_label;
  for (std::size_t i = 0; i < recs.size(); ++i)
    by_label[recs[i].label == 1 ? 1 : 0].push_back(i);
  std::vector<char> keep(recs.size(), 0);
  for (int label = 0; label < 2; ++label) {
    auto& idx = by_label[label];
    auto eng = make_engine(derive_seed(seed, static_cast<std::uint64_t>(label)));
    std::shuffle(idx.begin(), idx.end(), eng);
    const auto n = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < n && i < idx.size(); ++i) keep[idx[i]] = 1;
  }
  std::vector<CtrRecord> out;
  out.reserve(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i)
    if (keep[i]) out.push_back(recs[i]);
  return out;
}

} // namespace

LooEvalSetup prepare_loo_eval(const std::string& data_root,
                              const IndicatorConfig& ind) {
  LooEvalSetup s;
  s.ds = load_dataset(resolve_data_root(data_root));
  s.dataset_hash = dataset_content_hash(s.ds);
  s.loo = split_leave_one_out(s.ds);
  s.log = build_event_log(s.ds, s.loo.train, ind);

  std::unordered_map<int, std::vector<int>> seen;
  std::set<int> catalog;
  for (const auto& r : s.loo.train) {
    seen[r.user_id].push_back(r.movie_id);
    catalog.insert(r.movie_id);
  }
  s.catalog.assign(catalog.begin(), catalog.end());
  for (const auto& h : s.loo.held_out) {
    LooCase c;
    c.user_id = h.user_id;
    c.held_out_item = h.movie_id;
    const auto it = seen.find(h.user_id);
    if (it != seen.end()) c.seen_items = it->second;
    s.cases.push_back(std::move(c));
  }
  return s;
}

LooResult eval_popularity(const LooEvalSetup& s, std::size_t negatives,
                          std::size_t k, std::uint64_t seed) {
  auto counts = std::make_shared<std::unordered_map<int, double>>();
  for (const auto& p : s.log.indicators.at(s.log.primary))
    (*counts)[std::stoi(p.second)] += 1.0;
  const Scorer scorer = [counts](int, int item) {
    const auto it = counts->find(item);
    return it == counts->end() ? 0.0 : it->second;
  };
  return loo_ranking_eval(scorer, s.cases, s.catalog, negatives, k,
                          derive_seed(seed, 7));
}

LooResult eval_similarities(const LooEvalSetup& s,
                            std::map<std::string, SimilarityMatrix> sims,
                            std::size_t negatives, std::size_t k,
                            std::uint64_t seed) {
  auto engine = std::make_shared<CcoEngine>(s.log, std::move(sims));
  // The ranking loop scores each user's candidates consecutively, so one
  // cached score map at a time is enough.
  auto memo = std::make_shared<std::pair<int, std::map<std::string, double>>>(
      std::numeric_limits<int>::min(), std::map<std::string, double>{});
  const Scorer scorer = [engine, memo](int user, int item) {
    if (memo->first != user) {
      memo->second = engine->score_map(std::to_string(user));
      memo->first = user;
    }
    const auto it = memo->second.find(std::to_string(item));
    return it == memo->second.end() ? 0.0 : it->second;
  };
  return loo_ranking_eval(scorer, s.cases, s.catalog, negatives, k,
                          derive_seed(seed, 7));
}

namespace {

json param_count_json(const ParameterSet& ps) {
  json out;
  std::size_t total = 0;
  for (const auto& g : ps.groups()) {
    const std::size_t n = ps.param_count({g.name});
    out[g.name] = n;
    total += n;
  }
  out["total"] = total;
  return out;
}

std::uint64_t run_stage_cco(const ExperimentConfig& cfg, const fs::path& dir,
                            json& metrics, json& counts) {
  LooEvalSetup s = prepare_loo_eval(cfg.data_root, cfg.indicators);

  LooResult r;
  if (cfg.model == "poprec") {
    r = eval_popularity(s, cfg.eval_negatives, cfg.eval_k, cfg.seed);
  } else {
    const auto primary = build_interaction_matrix(s.log, s.log.primary);
    std::map<std::string, SimilarityMatrix> sims;
    for (const auto& [name, pairs] : s.log.indicators) {
      (void)pairs;
      const auto secondary = build_interaction_matrix(s.log, name);
      sims[name] = cross_occurrence(primary, secondary, cfg.llr_threshold,
                                    cfg.max_correlators);
      sims[name].indicator = name;
      write_similarity_jsonl(sims[name],
                             (dir / ("sim_" + name + ".jsonl")).string());
    }
    json sim_counts;
    for (const auto& [name, sim] : sims) sim_counts[name] = sim.entry_count();
    counts["similarity_entries"] = sim_counts;
    r = eval_similarities(s, std::move(sims), cfg.eval_negatives, cfg.eval_k,
                          cfg.seed);
  }

  metrics["hr"] = r.hr;
  metrics["ndcg"] = r.ndcg;
  metrics["k"] = cfg.eval_k;
  counts["users_evaluated"] = r.users_evaluated;
  counts["users_skipped"] = r.users_skipped;
  counts["users_single_interaction"] = s.loo.excluded_users;
  counts["catalog_items"] = s.catalog.size();
  counts["train_events"] = s.loo.train.size();
  json per_indicator;
  for (const auto& [name, pairs] : s.log.indicators)
    per_indicator[name] = pairs.size();
  counts["indicator_events"] = per_indicator;
  return s.dataset_hash;
}

struct CtrPrep {
  Dataset ds;
  FeatureSchema schema;
  std::vector<Sample> train, val, test;
  std::uint64_t dataset_hash = 0;
};

CtrPrep prepare_ctr(const ExperimentConfig& cfg) {
  CtrPrep p;
  p.ds = load_dataset(resolve_data_root(cfg.data_root));
  p.dataset_hash = dataset_content_hash(p.ds);
  auto recs = binarize_ratings(p.ds);
  recs = stratified_subsample(recs, cfg.subsample, derive_seed(cfg.seed, 11));
  const CtrSplit sp =
      split_train_val_test(recs, cfg.split, derive_seed(cfg.seed, 12));
  p.schema = build_ctr_schema(sp.train, cfg.include_timestamp);
  p.train = encode_samples(sp.train, p.schema);
  p.val = encode_samples(sp.val, p.schema);
  p.test = encode_samples(sp.test, p.schema);
  return p;
}

void eval_split(const std::string& prefix, CtrModel& model,
                const std::vector<Sample>& samples, const std::string& mode,
                json& metrics) {
  if (samples.empty()) return;
  const auto probs = predict_probs(model, samples);
  const auto y = labels_of(samples);
  metrics[prefix + "logloss"] = logloss(probs, y);
  if (!has_both_classes(y)) {
    std::fprintf(stderr, "eval: %s split has a single class, AUC omitted\n",
                 prefix.empty() ? "test" : prefix.c_str());
    return;
  }
  const double exact = auc(probs, y, AucMode::kExact);
  const double t10 = auc(probs, y, AucMode::kThresholded10);
  metrics[prefix + "auc_exact"] = exact;
  metrics[prefix + "auc_thresholded10"] = t10;
  metrics[prefix + "auc"] = mode == "thresholded10" ? t10 : exact;
}

std::uint64_t run_stage_ctr_central(const ExperimentConfig& cfg,
                                    const fs::path& dir, json& metrics,
                                    json& counts, json& report) {
  CtrPrep p = prepare_ctr(cfg);
  auto model =
      make_ctr_model(cfg.model, p.schema, cfg.autoint, derive_seed(cfg.seed, 13));
  auto opt = make_optimizer(cfg.optimizer, cfg.learning_rate);
  const auto trace = train_epochs(*model, p.train, *opt, cfg.batch_size,
                                  cfg.epochs, derive_seed(cfg.seed, 14));

  eval_split("", *model, p.test, cfg.auc_mode, metrics);
  eval_split("val_", *model, p.val, cfg.auc_mode, metrics);
  if (!trace.empty()) metrics["train_loss_final"] = trace.back();

  counts["samples"] = p.train.size() + p.val.size() + p.test.size();
  counts["train"] = p.train.size();
  counts["val"] = p.val.size();
  counts["test"] = p.test.size();
  report["param_counts"] = param_count_json(model->params());
  report["train_trace"] = trace;
  save_ctr_checkpoint(*model, (dir / "model").string());
  return p.dataset_hash;
}

std::uint64_t run_stage_ctr_federated(const ExperimentConfig& cfg,
                                      const fs::path& dir, json& metrics,
                                      json& counts, json& report) {
  CtrPrep p = prepare_ctr(cfg);

  std::vector<ClientPartition> parts;
  if (cfg.partition == "iid") {
    parts = partition_iid(p.train, p.test, cfg.num_clients,
                          derive_seed(cfg.seed, 15));
  } else {
    parts = partition_cluster(p.ds, p.train, p.test, cfg.num_clients,
                              cfg.svd_rank, derive_seed(cfg.seed, 15));
  }

  RoundConfig rc;
  rc.num_clients = parts.size(); // cluster partitions may drop empty clients
  rc.client_fraction = cfg.client_fraction;
  rc.local_epochs = cfg.local_epochs;
  rc.local_batch = cfg.local_batch;
  rc.rounds = cfg.rounds;
  rc.federation_plan = cfg.plan;
  rc.noise_sigma = cfg.noise_sigma;
  rc.seed = derive_seed(cfg.seed, 16);
  rc.optimizer = cfg.optimizer;
  rc.learning_rate = cfg.learning_rate;

  const std::uint64_t model_seed = derive_seed(cfg.seed, 13);
  const ModelFactory factory = [&p, &cfg, model_seed] {
    return make_ctr_model(cfg.model, p.schema, cfg.autoint, model_seed);
  };
  FederatedRun run = run_rounds(rc, parts, factory);

  write_round_history_csv(run.history, (dir / "rounds.csv").string());
  write_round_history_json(run.history, (dir / "rounds.json").string());
  save_ctr_checkpoint(*run.model, (dir / "model").string());
  for (std::size_t i = 0; i < run.client_states.size(); ++i)
    save_parameters(run.client_states[i],
                    (dir / ("client_" + std::to_string(parts[i].client_id) +
                            ".params"))
                        .string());

  const RoundRecord& last = run.history.rounds.back();
  metrics["auc"] = last.test_auc;
  metrics["logloss"] = last.test_logloss;
  metrics["rounds"] = rc.rounds;
  std::uint64_t bytes = 0;
  for (const auto& r : run.history.rounds) bytes += r.bytes_communicated;
  metrics["bytes_communicated"] = bytes;

  json client_train = json::array(), client_test = json::array();
  for (const auto& c : parts) {
    client_train.push_back(c.train.size());
    client_test.push_back(c.test.size());
  }
  counts["clients"] = parts.size();
  counts["client_train_sizes"] = client_train;
  counts["client_test_sizes"] = client_test;
  counts["train"] = p.train.size();
  counts["test"] = p.test.size();
  report["param_counts"] = param_count_json(run.model->params());
  report["plan"] = cfg.plan;
  report["plan_params"] =
      cfg.plan.empty() ? 0 : run.model->params().param_count(cfg.plan);
  report["partition"] = cfg.partition;
  return p.dataset_hash;
}

std::uint64_t run_stage_features(const ExperimentConfig& cfg,
                                 const fs::path& dir, json& counts) {
  const auto readings = read_sensor_csv(cfg.features_input);
  Fnv f;
  for (const auto& r : readings) {
    f.add_pod(r.t);
    for (double v : r.v) f.add_pod(v);
  }
  const auto sessions = sessionize(readings);
  const Tensor2D emb = embed_sessions(sessions);
  if (cfg.features_format != "json")
    write_embeddings_csv(emb, (dir / "embeddings.csv").string());
  if (cfg.features_format != "csv")
    write_embeddings_json(emb, (dir / "embeddings.json").string());
  counts["readings"] = readings.size();
  counts["sessions"] = sessions.size();
  counts["embedding_dim"] = kEmbeddingDim;
  return f.h;
}

} // namespace

ExperimentConfig parse_experiment_config(const json& j,
                                         const std::string& default_name) {
  ExperimentConfig c;
  c.experiment = default_name;
  try {
    check_keys(j, "config",
               {"experiment", "stage", "model", "seed", "data", "indicators",
                "cco", "eval", "ctr", "federation", "features", "out_dir"});
    if (j.contains("experiment")) c.experiment = j.at("experiment").get<std::string>();
    if (j.contains("stage")) c.stage = j.at("stage").get<std::string>();
    if (j.contains("model")) c.model = j.at("model").get<std::string>();
    if (j.contains("seed")) {
      c.seed = j.at("seed").get<std::uint64_t>();
      c.seed_set = true;
    }
    if (j.contains("data")) {
      const json& d = j.at("data");
      check_keys(d, "data", {"root"});
      c.data_root = d.value("root", "");
    }
    if (j.contains("indicators")) {
      const json& d = j.at("indicators");
      check_keys(d, "indicators", {"item_properties", "user_properties"});
      c.indicators.item_properties = d.value("item_properties", false);
      c.indicators.user_properties = d.value("user_properties", false);
    }
    if (j.contains("cco")) {
      const json& d = j.at("cco");
      check_keys(d, "cco", {"llr_threshold", "max_correlators"});
      c.llr_threshold = d.value("llr_threshold", c.llr_threshold);
      c.max_correlators = d.value("max_correlators", c.max_correlators);
    }
    if (j.contains("eval")) {
      const json& d = j.at("eval");
      check_keys(d, "eval", {"negatives", "k", "auc_mode"});
      c.eval_negatives = d.value("negatives", c.eval_negatives);
      c.eval_k = d.value("k", c.eval_k);
      c.auc_mode = d.value("auc_mode", c.auc_mode);
    }
    if (j.contains("ctr")) {
      const json& d = j.at("ctr");
      check_keys(d, "ctr",
                 {"embedding_dim", "attention_layers", "heads",
                  "attention_size", "hidden_units", "dropout",
                  "include_timestamp", "epochs", "batch_size", "optimizer",
                  "learning_rate", "split", "subsample"});
      c.autoint.d = d.value("embedding_dim", c.autoint.d);
      c.autoint.attention_layers =
          d.value("attention_layers", c.autoint.attention_layers);
      c.autoint.heads = d.value("heads", c.autoint.heads);
      c.autoint.attention_size =
          d.value("attention_size", c.autoint.attention_size);
      c.autoint.hidden_units = d.value("hidden_units", c.autoint.hidden_units);
      c.autoint.dropout = d.value("dropout", c.autoint.dropout);
      c.include_timestamp = d.value("include_timestamp", c.include_timestamp);
      c.epochs = d.value("epochs", c.epochs);
      c.batch_size = d.value("batch_size", c.batch_size);
      c.optimizer = d.value("optimizer", c.optimizer);
      c.learning_rate = d.value("learning_rate", c.learning_rate);
      if (d.contains("split")) {
        const json& s = d.at("split");
        require_cfg(s.is_array() && s.size() == 3,
                    "ctr.split: expected [train, val, test]");
        for (std::size_t i = 0; i < 3; ++i) c.split[i] = s[i].get<double>();
      }
      c.subsample = d.value("subsample", c.subsample);
    }
    if (j.contains("federation")) {
      const json& d = j.at("federation");
      check_keys(d, "federation",
                 {"partition", "num_clients", "client_fraction",
                  "local_epochs", "local_batch", "rounds", "plan",
                  "noise_sigma", "svd_rank"});
      c.partition = d.value("partition", c.partition);
      c.num_clients = d.value("num_clients", c.num_clients);
      c.client_fraction = d.value("client_fraction", c.client_fraction);
      c.local_epochs = d.value("local_epochs", c.local_epochs);
      c.local_batch = d.value("local_batch", c.local_batch);
      c.rounds = d.value("rounds", c.rounds);
      if (d.contains("plan"))
        c.plan = d.at("plan").get<std::vector<std::string>>();
      c.noise_sigma = d.value("noise_sigma", c.noise_sigma);
      c.svd_rank = d.value("svd_rank", c.svd_rank);
    }
    if (j.contains("features")) {
      const json& d = j.at("features");
      check_keys(d, "features", {"input", "format"});
      c.features_input = d.value("input", "");
      c.features_format = d.value("format", c.features_format);
    }
    c.out_dir = j.value("out_dir", c.out_dir);
  } catch (const json::exception& e) {
    throw CliError(2, std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CliError(2, "cannot open config " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw CliError(2, path + ": " + e.what());
  }
  return parse_experiment_config(j, fs::path(path).stem().string());
}

void validate(const ExperimentConfig& cfg) {
  require_cfg(!cfg.experiment.empty(), "experiment id must not be empty");
  require_cfg(one_of(cfg.stage, {"cco", "ctr-central", "ctr-federated",
                                 "features"}),
              "stage must be one of cco | ctr-central | ctr-federated | "
              "features, got \"" + cfg.stage + "\"");
  require_cfg(cfg.seed_set, "seed is mandatory");

  if (cfg.stage == "cco") {
    require_cfg(one_of(cfg.model, {"cco", "poprec"}),
                "stage cco supports model cco or poprec, got \"" + cfg.model +
                    "\"");
  } else if (cfg.stage == "features") {
    require_cfg(cfg.model.empty(),
                "the features stage does not take a model");
    require_cfg(!cfg.features_input.empty(), "features.input is required");
    require_cfg(one_of(cfg.features_format, {"csv", "json", "both"}),
                "features.format must be csv | json | both");
  } else {
    require_cfg(one_of(cfg.model, {"lr-raw", "lr-emb", "autoint"}),
                "stage " + cfg.stage +
                    " supports lr-raw | lr-emb | autoint, got \"" + cfg.model +
                    "\"");
  }

  require_cfg(cfg.llr_threshold >= 0.0, "cco.llr_threshold must be >= 0");
  require_cfg(cfg.max_correlators >= 1, "cco.max_correlators must be >= 1");
  require_cfg(cfg.eval_k >= 1, "eval.k must be >= 1");
  require_cfg(one_of(cfg.auc_mode, {"exact", "thresholded10"}),
              "eval.auc_mode must be exact | thresholded10");
  require_cfg(one_of(cfg.optimizer, {"sgd", "adam"}),
              "ctr.optimizer must be sgd | adam");
  require_cfg(cfg.learning_rate > 0.0, "ctr.learning_rate must be positive");
  require_cfg(cfg.batch_size >= 1, "ctr.batch_size must be >= 1");
  require_cfg(cfg.subsample > 0.0 && cfg.subsample <= 1.0,
              "ctr.subsample must be in (0, 1]");
  double ratio_sum = 0.0;
  for (double r : cfg.split) {
    require_cfg(r >= 0.0, "ctr.split entries must be >= 0");
    ratio_sum += r;
  }
  require_cfg(cfg.split[0] > 0.0, "ctr.split needs a training share");
  require_cfg(std::abs(ratio_sum - 1.0) < 1e-9, "ctr.split must sum to 1");

  if (cfg.stage == "ctr-central" || cfg.stage == "ctr-federated") {
    try {
      cfg.autoint.validate();
    } catch (const std::exception& e) {
      throw CliError(2, std::string("ctr: ") + e.what());
    }
  }
  if (cfg.stage == "ctr-federated") {
    require_cfg(one_of(cfg.partition, {"iid", "cluster"}),
                "federation.partition must be iid | cluster");
    require_cfg(cfg.svd_rank >= 1, "federation.svd_rank must be >= 1");
    // Plan groups must exist on the chosen model: lr-raw has no embedding
    // table and only autoint has attention parameters.
    for (const auto& g : cfg.plan) {
      const bool ok = g == "output" ||
                      (g == "embedding" && cfg.model != "lr-raw") ||
                      (g == "interaction" && cfg.model == "autoint");
      require_cfg(ok, "federation.plan: model " + cfg.model +
                          " has no parameter group \"" + g + "\"");
    }
    RoundConfig rc;
    rc.num_clients = cfg.num_clients;
    rc.client_fraction = cfg.client_fraction;
    rc.local_epochs = cfg.local_epochs;
    rc.local_batch = cfg.local_batch;
    rc.rounds = cfg.rounds;
    rc.federation_plan = cfg.plan;
    rc.noise_sigma = cfg.noise_sigma;
    rc.optimizer = cfg.optimizer;
    rc.learning_rate = cfg.learning_rate;
    try {
      rc.validate();
    } catch (const std::exception& e) {
      throw CliError(2, std::string("federation: ") + e.what());
    }
  }
}

json canonical_json(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = cfg.experiment;
  j["stage"] = cfg.stage;
  j["model"] = cfg.model;
  j["seed"] = cfg.seed;
  j["data"] = {{"root", cfg.data_root}};
  j["indicators"] = {{"item_properties", cfg.indicators.item_properties},
                     {"user_properties", cfg.indicators.user_properties}};
  j["cco"] = {{"llr_threshold", cfg.llr_threshold},
              {"max_correlators", cfg.max_correlators}};
  j["eval"] = {{"negatives", cfg.eval_negatives},
               {"k", cfg.eval_k},
               {"auc_mode", cfg.auc_mode}};
  j["ctr"] = {{"embedding_dim", cfg.autoint.d},
              {"attention_layers", cfg.autoint.attention_layers},
              {"heads", cfg.autoint.heads},
              {"attention_size", cfg.autoint.attention_size},
              {"hidden_units", cfg.autoint.hidden_units},
              {"dropout", cfg.autoint.dropout},
              {"include_timestamp", cfg.include_timestamp},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"optimizer", cfg.optimizer},
              {"learning_rate", cfg.learning_rate},
              {"split", cfg.split},
              {"subsample", cfg.subsample}};
  j["federation"] = {{"partition", cfg.partition},
                     {"num_clients", cfg.num_clients},
                     {"client_fraction", cfg.client_fraction},
                     {"local_epochs", cfg.local_epochs},
                     {"local_batch", cfg.local_batch},
                     {"rounds", cfg.rounds},
                     {"plan", cfg.plan},
                     {"noise_sigma", cfg.noise_sigma},
                     {"svd_rank", cfg.svd_rank}};
  j["features"] = {{"input", cfg.features_input},
                   {"format", cfg.features_format}};
  return j;
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
  const std::string bytes = canonical_json(cfg).dump();
  return hex16(fnv1a64(bytes.data(), bytes.size()));
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  Fnv f;
  f.add(data, len);
  return f.h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t dataset_content_hash(const Dataset& ds) {
  Fnv f;
  f.add_pod(ds.ratings.size());
  f.add_pod(ds.users.size());
  f.add_pod(ds.movies.size());
  for (const auto& r : ds.ratings) {
    f.add_pod(r.user_id);
    f.add_pod(r.movie_id);
    f.add_pod(r.rating);
    f.add_pod(r.timestamp);
  }
  for (const auto& [id, m] : ds.movies) {
    f.add_pod(id);
    f.add_str(m.title);
  }
  return f.h;
}

std::string resolve_data_root(const std::string& configured) {
  if (!configured.empty()) return configured;
  const char* env = std::getenv("RECO_DATA_ROOT");
  if (env == nullptr || *env == '\0')
    throw CliError(1,
                   "no data root configured and RECO_DATA_ROOT is not set");
  return (fs::path(env) / "ml-1m").string();
}

Dataset load_dataset(const std::string& root) {
  const fs::path base(root);
  for (const char* name : {"ratings.dat", "users.dat", "movies.dat"}) {
    if (!fs::exists(base / name))
      throw CliError(1, "dataset file missing: " + (base / name).string());
  }
  return parse_movielens((base / "ratings.dat").string(),
                         (base / "users.dat").string(),
                         (base / "movies.dat").string());
}

json run_experiment(const ExperimentConfig& cfg, std::string* run_dir_out) {
  validate(cfg);
  const std::string hash = config_hash_hex(cfg);
  const fs::path dir = fs::path(cfg.out_dir) / (cfg.experiment + "-" + hash);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError(1, "cannot create " + dir.string());
  if (run_dir_out != nullptr) *run_dir_out = dir.string();

  json report;
  report["experiment"] = cfg.experiment;
  report["stage"] = cfg.stage;
  report["model"] = cfg.model;
  report["seed"] = cfg.seed;
  report["config_hash"] = hash;
  report["config"] = canonical_json(cfg);

  json metrics = json::object(), counts = json::object();
  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t ds_hash = 0;
  if (cfg.stage == "cco") {
    ds_hash = run_stage_cco(cfg, dir, metrics, counts);
  } else if (cfg.stage == "ctr-central") {
    ds_hash = run_stage_ctr_central(cfg, dir, metrics, counts, report);
  } else if (cfg.stage == "ctr-federated") {
    ds_hash = run_stage_ctr_federated(cfg, dir, metrics, counts, report);
  } else {
    ds_hash = run_stage_features(cfg, dir, counts);
  }
  const auto t1 = std::chrono::steady_clock::now();

  report["dataset_hash"] = hex16(ds_hash);
  report["metrics"] = metrics;
  report["counts"] = counts;
  report["wall_seconds"] =
      std::chrono::duration<double>(t1 - t0).count();

  json echo = canonical_json(cfg);
  echo["out_dir"] = cfg.out_dir;
  write_text(dir / "config.json", echo.dump(2) + "\n");
  write_text(dir / "report.json", report.dump(2) + "\n");
  write_text(dir / "report.csv", report_csv_header() + report_csv_row(report));
  return report;
}

std::string merge_reports(const std::vector<json>& reports) {
  if (reports.empty()) throw CliError(2, "report: no inputs");
  std::string csv = report_csv_header();
  std::string dataset;
  for (const auto& r : reports) {
    if (!r.contains("dataset_hash") || !r.contains("metrics"))
      throw CliError(2, "report: input is not a run report");
    const std::string h = r.at("dataset_hash").get<std::string>();
    if (dataset.empty()) {
      dataset = h;
    } else if (dataset != h) {
      throw CliError(2, "report: dataset hash mismatch (" + dataset + " vs " +
                            h + "); runs are not comparable");
    }
    csv += report_csv_row(r);
  }
  return csv;
}

} // namespace reco::cli
