#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace reco {

struct RatingRecord {
  int user_id;
  int movie_id;
  int rating;    // 1..5
  long long timestamp;
};

struct UserInfo {
  std::string gender;
  std::string age_bucket;  // MovieLens bucket code, e.g. "25"
  std::string occupation;  // occupation code
  std::string zip;
};

struct MovieInfo {
  std::string title;
  int release_year;  // trailing "(YYYY)" in the title, 0 when absent
  std::vector<std::string> genres;
};

struct Dataset {
  std::vector<RatingRecord> ratings;
  std::map<int, UserInfo> users;
  std::map<int, MovieInfo> movies;
  std::size_t malformed_lines = 0;
  std::size_t dropped_foreign_key = 0;
};

// MovieLens 1M layout: "::"-delimited ISO-8859-1 text. Malformed lines are
// counted and skipped; ratings whose user or movie is missing from the maps
// are dropped with a warning.
Dataset parse_movielens(const std::string& ratings_path,
                        const std::string& users_path,
                        const std::string& movies_path);

// Raw per-rating CTR row before vocabulary encoding.
struct CtrRecord {
  int user_id;
  int movie_id;
  std::vector<std::string> genres;
  std::string gender;
  std::string age_bucket;
  std::string occupation;
  std::string zip3;
  long long timestamp;
  int label; // 1 = rating above 3, 0 = below 3
};

// rating > 3 → label 1, rating < 3 → label 0, rating = 3 dropped.
std::vector<CtrRecord> binarize_ratings(const Dataset& ds);

struct CtrSplit {
  std::vector<CtrRecord> train, val, test;
};

// Shuffled disjoint splits; sizes land within ±1 of the exact proportions.
CtrSplit split_train_val_test(const std::vector<CtrRecord>& samples,
                              std::array<double, 3> ratios,
                              std::uint64_t seed);

enum class FieldKind { kNumeric, kCategorical, kMultiValued };

struct FieldSpec {
  std::string name;
  FieldKind kind;
  // Non-numeric kinds: index 0 is the reserved out-of-vocabulary slot,
  // known values sorted ascending from index 1.
  std::vector<std::string> vocab;
  // Numeric kinds: train-split range for min-max normalization.
  double min_value = 0.0;
  double max_value = 0.0;

  std::size_t vocab_index(const std::string& value) const; // 0 when unknown
};

struct FeatureSchema {
  std::vector<FieldSpec> fields;

  std::size_t field_count() const { return fields.size(); }
  const FieldSpec& field(const std::string& name) const;
  // Content hash covering names, kinds, vocabularies and numeric ranges.
  std::uint64_t content_hash() const;
};

// Vocabularies and numeric ranges come from the training split only. Field
// order is fixed: user_id, movie_id, genres, gender, age_bucket, occupation,
// zip3, then timestamp when include_timestamp.
FeatureSchema build_ctr_schema(const std::vector<CtrRecord>& train,
                               bool include_timestamp = true);

// Encoded sample, aligned with the schema's field order.
struct Sample {
  std::vector<double> numeric;          // per numeric field, normalized
  std::vector<int> cat;                 // per categorical field, vocab index
  std::vector<std::vector<int>> multi;  // per multi-valued field, non-empty
  int label;
  int user_id; // carried for grouping and evaluation, not a model input
};

Sample encode_sample(const CtrRecord& rec, const FeatureSchema& schema);
std::vector<Sample> encode_samples(const std::vector<CtrRecord>& recs,
                                   const FeatureSchema& schema);

struct LooHeldOut {
  int user_id;
  int movie_id;
};

struct LooSplit {
  std::vector<RatingRecord> train;
  std::vector<LooHeldOut> held_out; // one per retained user
  std::size_t excluded_users = 0;   // users with a single interaction
};

// Hold out each user's max-timestamp interaction; timestamp ties go to the
// larger movie_id. Users with one interaction keep it in train and are
// excluded from evaluation.
LooSplit split_leave_one_out(const Dataset& ds);

struct EventLog {
  // indicator name → (actor, target) pairs, deduplicated.
  std::map<std::string, std::vector<std::pair<std::string, std::string>>>
      indicators;
  std::string primary; // indicator name, always "like"
};

struct IndicatorConfig {
  bool item_properties = false; // genre / release year / title tokens
  bool user_properties = false; // gender / age / occupation / zip
};

// Rating events become like (≥4) / dislike (<3) / neutral (=3) indicators.
// Property indicators attach tags to users: item properties through the
// movies the user liked, user properties as the user's own attributes.
EventLog build_event_log(const Dataset& ds,
                         const std::vector<RatingRecord>& ratings,
                         const IndicatorConfig& cfg = {});
EventLog build_event_log(const Dataset& ds, const IndicatorConfig& cfg = {});

void write_event_log_ndjson(const EventLog& log, const std::string& path);
EventLog read_event_log_ndjson(const std::string& path,
                               const std::string& primary = "like");

// Lowercase alphanumeric tokens of a movie title, year suffix removed,
// single characters dropped.
std::vector<std::string> title_tokens(const std::string& title);

} // namespace reco
