#include "reco/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "reco/rng.hpp"

namespace reco {

namespace {

std::vector<std::string> split_on(const std::string& line,
                                  const std::string& delim) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(delim, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + delim.size();
  }
  return out;
}

bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  std::size_t i = s[0] == '-' ? 1 : 0;
  if (i == s.size()) return false;
  for (std::size_t j = i; j < s.size(); ++j)
    if (!std::isdigit(static_cast<unsigned char>(s[j]))) return false;
  try {
    out = std::stoll(s);
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return f;
}

// Trailing "(YYYY)" of a MovieLens title.
int release_year_of(const std::string& title) {
  std::size_t close = title.rfind(')');
  if (close == std::string::npos || close + 1 != title.size()) return 0;
  std::size_t open = title.rfind('(');
  if (open == std::string::npos || close - open != 5) return 0;
  long long year;
  if (!parse_int(title.substr(open + 1, 4), year)) return 0;
  return static_cast<int>(year);
}

} // namespace

std::vector<std::string> title_tokens(const std::string& title) {
  std::string body = title;
  if (release_year_of(title) != 0) {
    body = title.substr(0, title.rfind('('));
  }
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : body) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  std::erase_if(tokens, [](const std::string& t) { return t.size() < 2; });
  return tokens;
}

Dataset parse_movielens(const std::string& ratings_path,
                        const std::string& users_path,
                        const std::string& movies_path) {
  Dataset ds;
  std::string line;

  {
    std::ifstream f = open_or_throw(users_path);
    while (std::getline(f, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto fields = split_on(line, "::");
      long long uid, age, occ;
      if (fields.size() != 5 || !parse_int(fields[0], uid) ||
          !parse_int(fields[2], age) || !parse_int(fields[3], occ) ||
          fields[1].empty() || fields[4].empty()) {
        ++ds.malformed_lines;
        continue;
      }
      ds.users[static_cast<int>(uid)] =
          UserInfo{fields[1], fields[2], fields[3], fields[4]};
    }
  }

  {
    std::ifstream f = open_or_throw(movies_path);
    while (std::getline(f, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto fields = split_on(line, "::");
      long long mid;
      if (fields.size() != 3 || !parse_int(fields[0], mid) ||
          fields[1].empty()) {
        ++ds.malformed_lines;
        continue;
      }
      MovieInfo info;
      info.title = fields[1];
      info.release_year = release_year_of(fields[1]);
      for (auto& g : split_on(fields[2], "|"))
        if (!g.empty()) info.genres.push_back(g);
      ds.movies[static_cast<int>(mid)] = std::move(info);
    }
  }

  {
    std::ifstream f = open_or_throw(ratings_path);
    while (std::getline(f, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto fields = split_on(line, "::");
      long long uid, mid, rating, ts;
      if (fields.size() != 4 || !parse_int(fields[0], uid) ||
          !parse_int(fields[1], mid) || !parse_int(fields[2], rating) ||
          !parse_int(fields[3], ts) || rating < 1 || rating > 5 || ts < 0) {
        ++ds.malformed_lines;
        continue;
      }
      if (!ds.users.count(static_cast<int>(uid)) ||
          !ds.movies.count(static_cast<int>(mid))) {
        ++ds.dropped_foreign_key;
        continue;
      }
      ds.ratings.push_back(RatingRecord{static_cast<int>(uid),
                                        static_cast<int>(mid),
                                        static_cast<int>(rating), ts});
    }
  }

  if (ds.malformed_lines > 0)
    std::fprintf(stderr, "parse_movielens: skipped %zu malformed lines\n",
                 ds.malformed_lines);
  if (ds.dropped_foreign_key > 0)
    std::fprintf(stderr,
                 "parse_movielens: dropped %zu ratings with unresolved ids\n",
                 ds.dropped_foreign_key);
  return ds;
}

std::vector<CtrRecord> binarize_ratings(const Dataset& ds) {
  std::vector<CtrRecord> out;
  out.reserve(ds.ratings.size());
  for (const auto& r : ds.ratings) {
    if (r.rating == 3) continue;
    const UserInfo& u = ds.users.at(r.user_id);
    const MovieInfo& m = ds.movies.at(r.movie_id);
    CtrRecord rec;
    rec.user_id = r.user_id;
    rec.movie_id = r.movie_id;
    rec.genres = m.genres;
    rec.gender = u.gender;
    rec.age_bucket = u.age_bucket;
    rec.occupation = u.occupation;
    rec.zip3 = u.zip.substr(0, 3);
    rec.timestamp = r.timestamp;
    rec.label = r.rating > 3 ? 1 : 0;
    out.push_back(std::move(rec));
  }
  return out;
}

CtrSplit split_train_val_test(const std::vector<CtrRecord>& samples,
                              std::array<double, 3> ratios,
                              std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must sum to 1");

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto eng = make_engine(seed);
  std::shuffle(order.begin(), order.end(), eng);

  const auto n = static_cast<double>(samples.size());
  const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * n));
  const auto n_val = static_cast<std::size_t>(std::llround(ratios[1] * n));
  if (n_train + n_val > samples.size())
    throw std::invalid_argument("split ratios overflow the sample count");

  CtrSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const CtrRecord& s = samples[order[i]];
    if (i < n_train) split.train.push_back(s);
    else if (i < n_train + n_val) split.val.push_back(s);
    else split.test.push_back(s);
  }
  return split;
}

std::size_t FieldSpec::vocab_index(const std::string& value) const {
  // Vocab is sorted from index 1, so binary search over that suffix.
  auto begin = vocab.begin() + 1;
  auto it = std::lower_bound(begin, vocab.end(), value);
  if (it != vocab.end() && *it == value)
    return static_cast<std::size_t>(it - vocab.begin());
  return 0;
}

const FieldSpec& FeatureSchema::field(const std::string& name) const {
  for (const auto& f : fields)
    if (f.name == name) return f;
  throw std::out_of_range("no field named " + name);
}

std::uint64_t FeatureSchema::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const std::string& s) {
    h = fnv1a64(s.data(), s.size(), h);
    h = fnv1a64("\x1f", 1, h);
  };
  for (const auto& f : fields) {
    mix(f.name);
    mix(std::to_string(static_cast<int>(f.kind)));
    for (const auto& v : f.vocab) mix(v);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g|%.17g", f.min_value, f.max_value);
    mix(buf);
  }
  return h;
}

namespace {

FieldSpec categorical_field(const std::string& name,
                            std::set<std::string> values) {
  FieldSpec f;
  f.name = name;
  f.kind = FieldKind::kCategorical;
  f.vocab.push_back("<oov>");
  f.vocab.insert(f.vocab.end(), values.begin(), values.end());
  return f;
}

} // namespace

FeatureSchema build_ctr_schema(const std::vector<CtrRecord>& train,
                               bool include_timestamp) {
  std::set<std::string> users, movies, genres, genders, ages, occs, zips;
  long long ts_min = 0, ts_max = 0;
  bool first = true;
  for (const auto& r : train) {
    users.insert(std::to_string(r.user_id));
    movies.insert(std::to_string(r.movie_id));
    for (const auto& g : r.genres) genres.insert(g);
    genders.insert(r.gender);
    ages.insert(r.age_bucket);
    occs.insert(r.occupation);
    zips.insert(r.zip3);
    if (first || r.timestamp < ts_min) ts_min = r.timestamp;
    if (first || r.timestamp > ts_max) ts_max = r.timestamp;
    first = false;
  }

  FeatureSchema schema;
  schema.fields.push_back(categorical_field("user_id", std::move(users)));
  schema.fields.push_back(categorical_field("movie_id", std::move(movies)));
  FieldSpec genre_field = categorical_field("genres", std::move(genres));
  genre_field.kind = FieldKind::kMultiValued;
  schema.fields.push_back(std::move(genre_field));
  schema.fields.push_back(categorical_field("gender", std::move(genders)));
  schema.fields.push_back(categorical_field("age_bucket", std::move(ages)));
  schema.fields.push_back(categorical_field("occupation", std::move(occs)));
  schema.fields.push_back(categorical_field("zip3", std::move(zips)));
  if (include_timestamp) {
    FieldSpec ts;
    ts.name = "timestamp";
    ts.kind = FieldKind::kNumeric;
    ts.min_value = static_cast<double>(ts_min);
    ts.max_value = static_cast<double>(ts_max);
    schema.fields.push_back(std::move(ts));
  }
  return schema;
}

Sample encode_sample(const CtrRecord& rec, const FeatureSchema& schema) {
  Sample s;
  s.label = rec.label;
  s.user_id = rec.user_id;
  for (const auto& f : schema.fields) {
    if (f.kind == FieldKind::kNumeric) {
      // Only timestamp is numeric in this schema.
      const double range = f.max_value - f.min_value;
      double v = range > 0.0
                     ? (static_cast<double>(rec.timestamp) - f.min_value) / range
                     : 0.0;
      s.numeric.push_back(std::clamp(v, 0.0, 1.0));
    } else if (f.kind == FieldKind::kCategorical) {
      std::string value;
      if (f.name == "user_id") value = std::to_string(rec.user_id);
      else if (f.name == "movie_id") value = std::to_string(rec.movie_id);
      else if (f.name == "gender") value = rec.gender;
      else if (f.name == "age_bucket") value = rec.age_bucket;
      else if (f.name == "occupation") value = rec.occupation;
      else if (f.name == "zip3") value = rec.zip3;
      else throw std::out_of_range("unmapped categorical field " + f.name);
      s.cat.push_back(static_cast<int>(f.vocab_index(value)));
    } else {
      std::vector<int> idx;
      for (const auto& g : rec.genres) {
        const int i = static_cast<int>(f.vocab_index(g));
        if (i != 0) idx.push_back(i);
      }
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
      if (idx.empty()) idx.push_back(0); // all-unknown collapses to OOV
      s.multi.push_back(std::move(idx));
    }
  }
  return s;
}

std::vector<Sample> encode_samples(const std::vector<CtrRecord>& recs,
                                   const FeatureSchema& schema) {
  std::vector<Sample> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(encode_sample(r, schema));
  return out;
}

LooSplit split_leave_one_out(const Dataset& ds) {
  std::unordered_map<int, std::vector<const RatingRecord*>> by_user;
  for (const auto& r : ds.ratings) by_user[r.user_id].push_back(&r);

  LooSplit out;
  std::vector<int> user_ids;
  user_ids.reserve(by_user.size());
  for (const auto& [uid, _] : by_user) user_ids.push_back(uid);
  std::sort(user_ids.begin(), user_ids.end());

  for (int uid : user_ids) {
    const auto& recs = by_user[uid];
    if (recs.size() < 2) {
      std::fprintf(stderr,
                   "split_leave_one_out: user %d has one interaction, "
                   "excluded from evaluation\n",
                   uid);
      ++out.excluded_users;
      for (const auto* r : recs) out.train.push_back(*r);
      continue;
    }
    const RatingRecord* held = recs[0];
    for (const auto* r : recs) {
      if (r->timestamp > held->timestamp ||
          (r->timestamp == held->timestamp && r->movie_id > held->movie_id)) {
        held = r;
      }
    }
    for (const auto* r : recs)
      if (r != held) out.train.push_back(*r);
    out.held_out.push_back(LooHeldOut{uid, held->movie_id});
  }
  return out;
}

namespace {

void add_pairs(EventLog& log, const std::string& indicator,
               std::vector<std::pair<std::string, std::string>> pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  log.indicators[indicator] = std::move(pairs);
}

} // namespace

EventLog build_event_log(const Dataset& ds,
                         const std::vector<RatingRecord>& ratings,
                         const IndicatorConfig& cfg) {
  EventLog log;
  log.primary = "like";

  std::vector<std::pair<std::string, std::string>> like, dislike, neutral;
  for (const auto& r : ratings) {
    auto pair = std::make_pair(std::to_string(r.user_id),
                               std::to_string(r.movie_id));
    if (r.rating >= 4) like.push_back(pair);
    else if (r.rating == 3) neutral.push_back(pair);
    else dislike.push_back(pair);
  }

  if (cfg.item_properties || cfg.user_properties) {
    std::vector<std::pair<std::string, std::string>> genre, year, token;
    std::vector<std::pair<std::string, std::string>> gender, age, occ, zip;
    std::unordered_set<int> liked_users;
    for (const auto& r : ratings) {
      if (r.rating < 4) continue;
      const std::string uid = std::to_string(r.user_id);
      if (cfg.item_properties) {
        const MovieInfo& m = ds.movies.at(r.movie_id);
        for (const auto& g : m.genres) genre.emplace_back(uid, g);
        if (m.release_year != 0)
          year.emplace_back(uid, std::to_string(m.release_year));
        for (const auto& t : title_tokens(m.title)) token.emplace_back(uid, t);
      }
      liked_users.insert(r.user_id);
    }
    if (cfg.item_properties) {
      add_pairs(log, "item_genre", std::move(genre));
      add_pairs(log, "item_year", std::move(year));
      add_pairs(log, "item_title_token", std::move(token));
    }
    if (cfg.user_properties) {
      for (int uid : liked_users) {
        const UserInfo& u = ds.users.at(uid);
        const std::string us = std::to_string(uid);
        gender.emplace_back(us, u.gender);
        age.emplace_back(us, u.age_bucket);
        occ.emplace_back(us, u.occupation);
        zip.emplace_back(us, u.zip.substr(0, 3));
      }
      add_pairs(log, "user_gender", std::move(gender));
      add_pairs(log, "user_age", std::move(age));
      add_pairs(log, "user_occupation", std::move(occ));
      add_pairs(log, "user_zip", std::move(zip));
    }
  }

  add_pairs(log, "like", std::move(like));
  add_pairs(log, "dislike", std::move(dislike));
  add_pairs(log, "neutral", std::move(neutral));
  return log;
}

EventLog build_event_log(const Dataset& ds, const IndicatorConfig& cfg) {
  return build_event_log(ds, ds.ratings, cfg);
}

void write_event_log_ndjson(const EventLog& log, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& [name, pairs] : log.indicators) {
    for (const auto& [actor, target] : pairs) {
      nlohmann::json j{{"indicator", name}, {"actor", actor}, {"target", target}};
      f << j.dump() << '\n';
    }
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

EventLog read_event_log_ndjson(const std::string& path,
                               const std::string& primary) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  EventLog log;
  log.primary = primary;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    log.indicators[j.at("indicator").get<std::string>()].emplace_back(
        j.at("actor").get<std::string>(), j.at("target").get<std::string>());
  }
  for (auto& [name, pairs] : log.indicators) {
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  }
  return log;
}

} // namespace reco
