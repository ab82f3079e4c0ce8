#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "experiment.hpp"
#include "reco/ingest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reco;
using namespace reco::cli;

namespace {

// One synthetic dataset shared by every case in this binary.
struct Fixture {
  fs::path base;
  fs::path data; // rating files + sensor.csv
};

const Fixture& fx() {
  static const Fixture f = [] {
    Fixture x;
    x.base = fs::path("/tmp/reco_cli_fixture");
    x.data = x.base / "data";
    fs::remove_all(x.base);
    SynthSpec spec;
    spec.users = 120;
    spec.movies = 80;
    spec.ratings_per_user = 20;
    spec.sensor_seconds = 240.0;
    spec.seed = 5;
    write_synthetic_movielens(spec, x.data.string());
    write_synthetic_sensor_csv(spec, (x.data / "sensor.csv").string());
    return x;
  }();
  return f;
}

ExperimentConfig base_cfg(const std::string& name, const std::string& stage,
                          const std::string& model) {
  ExperimentConfig cfg;
  cfg.experiment = name;
  cfg.stage = stage;
  cfg.model = model;
  cfg.seed = 11;
  cfg.seed_set = true;
  cfg.data_root = fx().data.string();
  cfg.out_dir = (fx().base / "runs").string();
  // Tiny network so the CTR stages stay fast.
  cfg.autoint.d = 8;
  cfg.autoint.attention_size = 16;
  cfg.autoint.hidden_units = 16;
  cfg.epochs = 2;
  cfg.batch_size = 128;
  cfg.eval_negatives = 50;
  cfg.num_clients = 3;
  cfg.rounds = 3;
  return cfg;
}

int parse_error_code(const json& j) {
  try {
    ExperimentConfig cfg = parse_experiment_config(j, "t");
    validate(cfg);
    return 0;
  } catch (const CliError& e) {
    return e.exit_code;
  }
}

json minimal_json(const std::string& stage, const std::string& model) {
  json j = {{"stage", stage}, {"seed", 1}};
  if (!model.empty()) j["model"] = model;
  return j;
}

int run_binary(const std::string& args) {
  const std::string cmd =
      std::string(RECO_BIN_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("experiment config: parsing, defaults, strict keys") {
  const json j = minimal_json("cco", "cco");
  ExperimentConfig cfg = parse_experiment_config(j, "fallback");
  CHECK(cfg.experiment == "fallback");
  CHECK(cfg.stage == "cco");
  CHECK(cfg.seed == 1);
  CHECK(cfg.seed_set);
  CHECK(cfg.max_correlators == 50);
  CHECK(cfg.llr_threshold == 0.0);
  CHECK(cfg.eval_negatives == 100);
  CHECK(cfg.eval_k == 10);
  CHECK(cfg.autoint.d == 16);
  CHECK(cfg.epochs == 10);
  CHECK(cfg.partition == "iid");
  CHECK(cfg.plan == std::vector<std::string>{"embedding", "interaction",
                                             "output"});
  CHECK(cfg.out_dir == "runs");
  CHECK(cfg.features_format == "csv");

  SUBCASE("sections override defaults") {
    json k = j;
    k["experiment"] = "named";
    k["cco"] = {{"llr_threshold", 2.5}, {"max_correlators", 7}};
    k["eval"] = {{"negatives", 0}, {"k", 5}, {"auc_mode", "thresholded10"}};
    k["ctr"] = {{"embedding_dim", 4}, {"epochs", 1}, {"subsample", 0.25},
                {"split", {0.7, 0.2, 0.1}}};
    k["federation"] = {{"plan", {"output"}}, {"noise_sigma", 0.1}};
    k["features"] = {{"input", "x.csv"}, {"format", "both"}};
    const ExperimentConfig c = parse_experiment_config(k, "fallback");
    CHECK(c.experiment == "named");
    CHECK(c.llr_threshold == 2.5);
    CHECK(c.max_correlators == 7);
    CHECK(c.eval_negatives == 0);
    CHECK(c.eval_k == 5);
    CHECK(c.auc_mode == "thresholded10");
    CHECK(c.autoint.d == 4);
    CHECK(c.epochs == 1);
    CHECK(c.subsample == 0.25);
    CHECK(c.split == std::array<double, 3>{0.7, 0.2, 0.1});
    CHECK(c.plan == std::vector<std::string>{"output"});
    CHECK(c.noise_sigma == 0.1);
    CHECK(c.features_input == "x.csv");
    CHECK(c.features_format == "both");
  }

  SUBCASE("unknown keys are rejected, not ignored") {
    json k = j;
    k["tuning"] = true;
    CHECK(parse_error_code(k) == 2);
    k = j;
    k["cco"] = {{"llr_treshold", 1.0}}; // typo
    CHECK(parse_error_code(k) == 2);
    k = j;
    k["eval"] = {{"negaatives", 10}};
    CHECK(parse_error_code(k) == 2);
    k = j;
    k["federation"] = {{"round", 5}};
    CHECK(parse_error_code(k) == 2);
  }

  SUBCASE("type errors surface as config errors") {
    json k = j;
    k["seed"] = "forty-two";
    CHECK(parse_error_code(k) == 2);
    k = j;
    k["ctr"] = {{"split", {0.8, 0.2}}}; // needs 3 entries
    CHECK(parse_error_code(k) == 2);
  }
}

TEST_CASE("experiment config: validation matrix") {
  CHECK(parse_error_code(minimal_json("cco", "cco")) == 0);
  CHECK(parse_error_code(minimal_json("cco", "poprec")) == 0);
  CHECK(parse_error_code(minimal_json("ctr-central", "autoint")) == 0);
  // default plan names groups lr-raw lacks
  CHECK(parse_error_code(minimal_json("ctr-federated", "lr-raw")) == 2);
  CHECK(parse_error_code(minimal_json("ctr-federated", "autoint")) == 0);

  // stage/model compatibility
  CHECK(parse_error_code(minimal_json("cco", "autoint")) == 2);
  CHECK(parse_error_code(minimal_json("ctr-central", "cco")) == 2);
  CHECK(parse_error_code(minimal_json("ctr-central", "poprec")) == 2);
  CHECK(parse_error_code(minimal_json("nonsense", "cco")) == 2);
  CHECK(parse_error_code(minimal_json("cco", "")) == 2);
  CHECK(parse_error_code(json{{"stage", "cco"}, {"model", "cco"}}) == 2);

  // features takes no model but requires an input
  json f = {{"stage", "features"}, {"seed", 1},
            {"features", {{"input", "s.csv"}}}};
  CHECK(parse_error_code(f) == 0);
  f["model"] = "cco";
  CHECK(parse_error_code(f) == 2);
  f.erase("model");
  f["features"] = {{"input", ""}};
  CHECK(parse_error_code(f) == 2);
  f["features"] = {{"input", "s.csv"}, {"format", "yaml"}};
  CHECK(parse_error_code(f) == 2);

  SUBCASE("range checks") {
    json k = minimal_json("cco", "cco");
    k["cco"] = {{"llr_threshold", -1.0}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("cco", "cco");
    k["cco"] = {{"max_correlators", 0}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("cco", "cco");
    k["eval"] = {{"k", 0}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("cco", "cco");
    k["eval"] = {{"auc_mode", "approximate"}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("ctr-central", "lr-raw");
    k["ctr"] = {{"learning_rate", 0.0}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("ctr-central", "lr-raw");
    k["ctr"] = {{"optimizer", "rmsprop"}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("ctr-central", "lr-raw");
    k["ctr"] = {{"subsample", 0.0}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("ctr-central", "lr-raw");
    k["ctr"] = {{"subsample", 1.5}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("ctr-central", "lr-raw");
    k["ctr"] = {{"split", {0.5, 0.4, 0.3}}}; // sums past 1
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("ctr-central", "autoint");
    k["ctr"] = {{"embedding_dim", 0}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("ctr-federated", "autoint");
    k["federation"] = {{"partition", "dirichlet"}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("ctr-federated", "autoint");
    k["federation"] = {{"num_clients", 0}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("ctr-federated", "autoint");
    k["federation"] = {{"client_fraction", 0.0}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("ctr-federated", "autoint");
    k["federation"] = {{"plan", {"attention"}}};
    CHECK(parse_error_code(k) == 2);
  }

  SUBCASE("plan groups must exist on the model") {
    json k = minimal_json("ctr-federated", "lr-emb");
    k["federation"] = {{"plan", {"embedding", "output"}}};
    CHECK(parse_error_code(k) == 0);
    k["federation"] = {{"plan", {"interaction"}}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("ctr-federated", "lr-raw");
    k["federation"] = {{"plan", {"output"}}};
    CHECK(parse_error_code(k) == 0);
    k["federation"] = {{"plan", {"embedding"}}};
    CHECK(parse_error_code(k) == 2);
    k = minimal_json("ctr-federated", "autoint");
    k["federation"] = {{"plan", json::array()}}; // purely local is allowed
    CHECK(parse_error_code(k) == 0);
  }
}

TEST_CASE("experiment config: canonical hash") {
  ExperimentConfig a = base_cfg("hash", "cco", "cco");
  const std::string ha = config_hash_hex(a);
  CHECK(ha.size() == 16);
  CHECK(ha.find_first_not_of("0123456789abcdef") == std::string::npos);

  SUBCASE("out_dir does not participate") {
    ExperimentConfig b = a;
    b.out_dir = "/somewhere/else";
    CHECK(config_hash_hex(b) == ha);
  }
  SUBCASE("every semantic field participates") {
    ExperimentConfig b = a;
    b.seed = 12;
    CHECK(config_hash_hex(b) != ha);
    b = a;
    b.max_correlators = 49;
    CHECK(config_hash_hex(b) != ha);
    b = a;
    b.indicators.item_properties = true;
    CHECK(config_hash_hex(b) != ha);
    b = a;
    b.experiment = "other";
    CHECK(config_hash_hex(b) != ha);
  }
  SUBCASE("json key order is irrelevant") {
    const json j1 = json::parse(
        R"({"stage":"cco","model":"cco","seed":3,"eval":{"k":5,"negatives":9}})");
    const json j2 = json::parse(
        R"({"eval":{"negatives":9,"k":5},"seed":3,"model":"cco","stage":"cco"})");
    CHECK(config_hash_hex(parse_experiment_config(j1, "t")) ==
          config_hash_hex(parse_experiment_config(j2, "t")));
  }
  SUBCASE("canonical json carries no out_dir") {
    CHECK(!canonical_json(a).contains("out_dir"));
  }
}

TEST_CASE("dataset content hash tracks the rating files") {
  const Dataset ds = load_dataset(fx().data.string());
  const std::uint64_t h1 = dataset_content_hash(ds);
  const std::uint64_t h2 = dataset_content_hash(load_dataset(fx().data.string()));
  CHECK(h1 == h2);
  CHECK(hex16(h1).size() == 16);

  // A different synthetic seed is a different dataset.
  SynthSpec spec;
  spec.users = 120;
  spec.movies = 80;
  spec.ratings_per_user = 20;
  spec.seed = 6;
  const fs::path other = fx().base / "data_other";
  write_synthetic_movielens(spec, other.string());
  CHECK(dataset_content_hash(load_dataset(other.string())) != h1);
}

TEST_CASE("cco stage runs end to end") {
  ExperimentConfig cfg = base_cfg("t-cco", "cco", "cco");
  cfg.indicators.item_properties = true;
  std::string dir;
  const json report = run_experiment(cfg, &dir);

  CHECK(fs::path(dir).filename().string() ==
        "t-cco-" + report["config_hash"].get<std::string>());
  for (const char* f :
       {"config.json", "report.json", "report.csv", "sim_like.jsonl",
        "sim_dislike.jsonl", "sim_item_genre.jsonl", "sim_item_year.jsonl"})
    CHECK_MESSAGE(fs::exists(fs::path(dir) / f), f);

  const double hr = report["metrics"]["hr"].get<double>();
  const double ndcg = report["metrics"]["ndcg"].get<double>();
  CHECK(hr >= 0.0);
  CHECK(hr <= 1.0);
  CHECK(ndcg >= 0.0);
  CHECK(ndcg <= hr + 1e-12); // DCG of one relevant item never beats a hit
  CHECK(report["metrics"]["k"] == 10);
  CHECK(report["counts"]["users_evaluated"].get<std::size_t>() > 0);
  CHECK(report["dataset_hash"] ==
        hex16(dataset_content_hash(load_dataset(fx().data.string()))));

  // The similarity files are self-describing and round-trip.
  const SimilarityMatrix sim = read_similarity_jsonl(
      (fs::path(dir) / "sim_item_genre.jsonl").string());
  CHECK(sim.indicator == "item_genre");
  CHECK(sim.entry_count() ==
        report["counts"]["similarity_entries"]["item_genre"]
            .get<std::size_t>());

  SUBCASE("popularity baseline shares the eval protocol") {
    ExperimentConfig pop = base_cfg("t-pop", "cco", "poprec");
    const json rp = run_experiment(pop);
    CHECK(rp["metrics"]["hr"].get<double>() >= 0.0);
    CHECK(rp["counts"]["users_evaluated"] ==
          report["counts"]["users_evaluated"]);
  }
}

TEST_CASE("ctr-central stage runs end to end") {
  ExperimentConfig cfg = base_cfg("t-ctr", "ctr-central", "lr-raw");
  std::string dir;
  const json report = run_experiment(cfg, &dir);

  const auto& m = report["metrics"];
  for (const char* k : {"auc", "auc_exact", "auc_thresholded10", "logloss",
                        "val_auc", "val_logloss", "train_loss_final"})
    CHECK_MESSAGE(m.contains(k), k);
  CHECK(m["auc"].get<double>() > 0.0);
  CHECK(m["auc"].get<double>() < 1.0);
  CHECK(m["logloss"].get<double>() > 0.0);
  CHECK(m["auc"] == m["auc_exact"]); // default eval.auc_mode
  CHECK(fs::exists(fs::path(dir) / "model.params"));
  CHECK(fs::exists(fs::path(dir) / "model.schema.json"));

  const std::size_t train = report["counts"]["train"].get<std::size_t>();
  const std::size_t val = report["counts"]["val"].get<std::size_t>();
  const std::size_t test = report["counts"]["test"].get<std::size_t>();
  CHECK(train + val + test == report["counts"]["samples"].get<std::size_t>());
  CHECK(train > val);

  SUBCASE("stratified subsample shrinks the pool, keeps both classes") {
    ExperimentConfig half = base_cfg("t-ctr-half", "ctr-central", "lr-raw");
    half.subsample = 0.5;
    const json r2 = run_experiment(half);
    const std::size_t n2 = r2["counts"]["samples"].get<std::size_t>();
    const std::size_t n1 = report["counts"]["samples"].get<std::size_t>();
    CHECK(n2 < n1);
    CHECK(n2 >= n1 / 2); // ceil per class
    CHECK(std::isfinite(r2["metrics"]["auc"].get<double>()));
  }

  SUBCASE("thresholded10 mode selects the reported auc") {
    ExperimentConfig th = base_cfg("t-ctr-th", "ctr-central", "lr-raw");
    th.auc_mode = "thresholded10";
    const json r2 = run_experiment(th);
    CHECK(r2["metrics"]["auc"] == r2["metrics"]["auc_thresholded10"]);
  }
}

TEST_CASE("ctr-federated stage runs end to end") {
  ExperimentConfig cfg = base_cfg("t-fed", "ctr-federated", "lr-emb");
  cfg.plan = {"embedding", "output"};
  std::string dir;
  const json report = run_experiment(cfg, &dir);

  CHECK(report["metrics"]["rounds"] == 3);
  CHECK(report["plan"] == json::array({"embedding", "output"}));
  CHECK(report["partition"] == "iid");
  const double auc = report["metrics"]["auc"].get<double>();
  CHECK(auc > 0.0);
  CHECK(auc < 1.0);

  for (const char* f : {"rounds.csv", "rounds.json", "model.params",
                        "client_0.params", "client_1.params",
                        "client_2.params"})
    CHECK_MESSAGE(fs::exists(fs::path(dir) / f), f);

  // Traffic accounting: one download + one upload of the plan parameters per
  // participant per round.
  const std::size_t plan_params = report["plan_params"].get<std::size_t>();
  const std::size_t clients = report["counts"]["clients"].get<std::size_t>();
  CHECK(report["metrics"]["bytes_communicated"].get<std::uint64_t>() ==
        3ull * 2ull * clients * plan_params * 8ull);
  CHECK(plan_params ==
        report["param_counts"]["embedding"].get<std::size_t>() +
            report["param_counts"]["output"].get<std::size_t>());

  SUBCASE("purely local training moves no bytes") {
    ExperimentConfig local = base_cfg("t-fed-local", "ctr-federated",
                                      "lr-emb");
    local.plan = {};
    const json r2 = run_experiment(local);
    CHECK(r2["metrics"]["bytes_communicated"] == 0);
    CHECK(r2["plan_params"] == 0);
  }

  SUBCASE("cluster partition works on the synthetic taste clusters") {
    ExperimentConfig cl = base_cfg("t-fed-cluster", "ctr-federated",
                                   "lr-emb");
    cl.plan = {"embedding", "output"};
    cl.partition = "cluster";
    cl.num_clients = 4;
    cl.svd_rank = 8;
    const json r2 = run_experiment(cl);
    CHECK(r2["counts"]["clients"].get<std::size_t>() >= 2);
    CHECK(r2["counts"]["clients"].get<std::size_t>() <= 4);
  }
}

TEST_CASE("features stage runs end to end") {
  ExperimentConfig cfg = base_cfg("t-feat", "features", "");
  cfg.features_input = (fx().data / "sensor.csv").string();
  cfg.features_format = "both";
  std::string dir;
  const json report = run_experiment(cfg, &dir);

  CHECK(report["counts"]["embedding_dim"] == 112);
  CHECK(report["counts"]["sessions"].get<std::size_t>() > 0);
  CHECK(fs::exists(fs::path(dir) / "embeddings.csv"));
  CHECK(fs::exists(fs::path(dir) / "embeddings.json"));

  // Header row + one line per session, 112 columns each.
  std::ifstream f(fs::path(dir) / "embeddings.csv");
  std::string header;
  std::getline(f, header);
  CHECK(std::count(header.begin(), header.end(), ',') == 111);
  std::size_t rows = 0;
  for (std::string line; std::getline(f, line);) ++rows;
  CHECK(rows == report["counts"]["sessions"].get<std::size_t>());
}

TEST_CASE("re-running a config reproduces every metric bit for bit") {
  auto run_pair = [](ExperimentConfig cfg) {
    cfg.out_dir = (fx().base / "runsA").string();
    std::string dirA;
    const json a = run_experiment(cfg, &dirA);
    cfg.out_dir = (fx().base / "runsB").string();
    std::string dirB;
    const json b = run_experiment(cfg, &dirB);
    CHECK(a["metrics"] == b["metrics"]);
    CHECK(a["config_hash"] == b["config_hash"]);
    CHECK(slurp(fs::path(dirA) / "report.csv") ==
          slurp(fs::path(dirB) / "report.csv"));
    return std::pair<std::string, std::string>(dirA, dirB);
  };

  SUBCASE("cco") { run_pair(base_cfg("t-rep-cco", "cco", "cco")); }
  SUBCASE("ctr-central") {
    run_pair(base_cfg("t-rep-ctr", "ctr-central", "autoint"));
  }
  SUBCASE("ctr-federated") {
    ExperimentConfig cfg = base_cfg("t-rep-fed", "ctr-federated", "autoint");
    const auto [dirA, dirB] = run_pair(cfg);
    CHECK(slurp(fs::path(dirA) / "rounds.csv") ==
          slurp(fs::path(dirB) / "rounds.csv"));
    CHECK(slurp(fs::path(dirA) / "model.params") ==
          slurp(fs::path(dirB) / "model.params"));
    CHECK(slurp(fs::path(dirA) / "client_1.params") ==
          slurp(fs::path(dirB) / "client_1.params"));
  }
  SUBCASE("a different seed is a different run directory and result") {
    ExperimentConfig cfg = base_cfg("t-rep-seed", "cco", "cco");
    std::string dirA, dirB;
    const json a = run_experiment(cfg, &dirA);
    cfg.seed = 12;
    const json b = run_experiment(cfg, &dirB);
    CHECK(dirA != dirB);
    CHECK(a["config_hash"] != b["config_hash"]);
  }
}

TEST_CASE("merge_reports builds the comparison table and guards the dataset") {
  ExperimentConfig c1 = base_cfg("t-m-pop", "cco", "poprec");
  ExperimentConfig c2 = base_cfg("t-m-cco", "cco", "cco");
  const json r1 = run_experiment(c1);
  const json r2 = run_experiment(c2);

  const std::string csv = merge_reports({r1, r2});
  std::istringstream ss(csv);
  std::string line;
  std::getline(ss, line);
  CHECK(line ==
        "experiment,stage,model,seed,config_hash,dataset_hash,hr,ndcg,k,auc,"
        "logloss,rounds");
  std::getline(ss, line);
  CHECK(line.rfind("t-m-pop,cco,poprec,11,", 0) == 0);
  std::getline(ss, line);
  CHECK(line.rfind("t-m-cco,cco,cco,11,", 0) == 0);
  CHECK(!std::getline(ss, line));

  // %.17g cells parse back to the exact stored doubles.
  {
    std::istringstream rows(csv);
    std::string row;
    std::getline(rows, row); // header
    std::getline(rows, row); // t-m-pop
    std::vector<std::string> cells;
    std::istringstream cs(row);
    for (std::string c; std::getline(cs, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() >= 8);
    CHECK(std::stod(cells[6]) == r1["metrics"]["hr"].get<double>());
    CHECK(std::stod(cells[7]) == r1["metrics"]["ndcg"].get<double>());
  }

  SUBCASE("mismatched dataset hashes refuse to merge") {
    json r3 = r2;
    r3["dataset_hash"] = "0000000000000000";
    try {
      merge_reports({r1, r3});
      FAIL("expected a merge refusal");
    } catch (const CliError& e) {
      CHECK(e.exit_code == 2);
    }
  }
}

TEST_CASE("reco binary: exit codes and operational subcommands") {
  const fs::path work = fx().base / "bin";
  fs::create_directories(work);

  // validation error -> 2
  {
    std::ofstream f(work / "bad.json");
    f << R"({"stage":"cco","model":"autoint","seed":1})";
  }
  CHECK(run_binary("run --config " + (work / "bad.json").string()) == 2);
  // malformed json -> 2
  {
    std::ofstream f(work / "broken.json");
    f << "{nope";
  }
  CHECK(run_binary("run --config " + (work / "broken.json").string()) == 2);
  // missing dataset -> 1
  {
    std::ofstream f(work / "nodata.json");
    f << R"({"stage":"cco","model":"cco","seed":1,
             "data":{"root":"/nonexistent-dataset"}})";
  }
  CHECK(run_binary("run --config " + (work / "nodata.json").string()) == 1);
  // missing required flag / unknown subcommand -> 2
  CHECK(run_binary("run") == 2);
  CHECK(run_binary("frobnicate") == 2);
  CHECK(run_binary("--help") == 0);
  // stage guards on the dedicated train subcommands
  {
    std::ofstream f(work / "cco.json");
    f << json{{"stage", "cco"}, {"model", "cco"}, {"seed", 3},
              {"data", {{"root", fx().data.string()}}},
              {"eval", {{"negatives", 20}}},
              {"out_dir", (work / "runs").string()}}
             .dump();
  }
  CHECK(run_binary("ctr-train --config " + (work / "cco.json").string()) ==
        2);
  CHECK(run_binary("fed-train --config " + (work / "cco.json").string()) ==
        2);
  // a valid run -> 0
  CHECK(run_binary("run --config " + (work / "cco.json").string()) == 0);

  SUBCASE("synth -> ingest -> cco-build -> cco-eval pipeline") {
    const fs::path ds = work / "ds";
    CHECK(run_binary("synth --out " + ds.string() +
                     " --users 40 --movies 30 --ratings-per-user 10") == 0);
    CHECK(fs::exists(ds / "ratings.dat"));
    CHECK(run_binary("ingest --data " + ds.string() + " --out " +
                     (work / "ing").string()) == 0);
    CHECK(fs::exists(work / "ing" / "events.ndjson"));
    CHECK(run_binary("cco-build --events " +
                     (work / "ing" / "events.ndjson").string() + " --out " +
                     (work / "sims").string()) == 0);
    CHECK(fs::exists(work / "sims" / "sim_like.jsonl"));
    CHECK(run_binary("cco-eval --data " + ds.string() + " --sims " +
                     (work / "sims").string() + " --negatives 20 --out " +
                     (work / "eval.json").string()) == 0);
    const json ev = json::parse(slurp(work / "eval.json"));
    CHECK(ev["hr"].get<double>() >= 0.0);
    CHECK(ev["users_evaluated"].get<std::size_t>() > 0);
  }

  SUBCASE("features-extract and report") {
    CHECK(run_binary("features-extract " + (fx().data / "sensor.csv").string() +
                     " --out " + (work / "emb.csv").string()) == 0);
    CHECK(fs::exists(work / "emb.csv"));

    // two runs with the same dataset merge; the binary prints the table
    ExperimentConfig c1 = base_cfg("t-bin-a", "cco", "poprec");
    ExperimentConfig c2 = base_cfg("t-bin-b", "cco", "cco");
    std::string d1, d2;
    run_experiment(c1, &d1);
    run_experiment(c2, &d2);
    CHECK(run_binary("report " + (fs::path(d1) / "report.json").string() +
                     " " + (fs::path(d2) / "report.json").string() +
                     " --out " + (work / "merged.csv").string()) == 0);
    const std::string merged = slurp(work / "merged.csv");
    CHECK(merged.find("t-bin-a") != std::string::npos);
    CHECK(merged.find("t-bin-b") != std::string::npos);
  }
}
