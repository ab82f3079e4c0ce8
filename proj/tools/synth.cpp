#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "experiment.hpp"
#include "reco/rng.hpp"

namespace reco::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kClusters = 4;
const char* kGenres[] = {"Action", "Comedy", "Drama",
                         "Thriller", "SciFi", "Romance"};
const int kAges[] = {1, 18, 25, 35, 45, 50, 56};

int movie_cluster(std::size_t movie_id) {
  return static_cast<int>((movie_id - 1) % kClusters);
}

} // namespace

// Planted structure: movies belong to one of four genre-aligned clusters and
// users prefer one cluster, so co-occurrence and CTR models both have signal
// to find. Ratings are "user::movie::rating::timestamp" with per-user
// strictly increasing timestamps.
void write_synthetic_movielens(const SynthSpec& spec, const std::string& dir) {
  if (spec.users < 2 || spec.movies < 2 * kClusters)
    throw CliError(2, "synth: need at least 2 users and 8 movies");
  if (spec.ratings_per_user < 2 || spec.ratings_per_user > spec.movies / 2)
    throw CliError(
        2, "synth: ratings_per_user must be in [2, movies/2] so distinct "
           "sampling terminates");

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError(1, "cannot create " + dir);

  {
    std::ofstream f(fs::path(dir) / "movies.dat", std::ios::trunc);
    if (!f) throw CliError(1, "cannot write movies.dat");
    for (std::size_t m = 1; m <= spec.movies; ++m) {
      const int c = movie_cluster(m);
      const int year = 1980 + static_cast<int>(m % 40);
      f << m << "::Synthetic Feature " << m << " (" << year << ")::"
        << kGenres[c] << '|' << kGenres[4 + (m & 1)] << '\n';
    }
  }

  std::vector<int> user_cluster(spec.users + 1, 0);
  {
    auto eng = make_engine(derive_seed(spec.seed, 101));
    std::uniform_int_distribution<int> pick_cluster(0, kClusters - 1);
    std::uniform_int_distribution<int> pick_age(0, 6);
    std::uniform_int_distribution<int> pick_occ(0, 20);
    std::uniform_int_distribution<int> pick_zip(10000, 99999);
    std::bernoulli_distribution male(0.5);
    std::ofstream f(fs::path(dir) / "users.dat", std::ios::trunc);
    if (!f) throw CliError(1, "cannot write users.dat");
    for (std::size_t u = 1; u <= spec.users; ++u) {
      user_cluster[u] = pick_cluster(eng);
      f << u << "::" << (male(eng) ? 'M' : 'F') << "::"
        << kAges[pick_age(eng)] << "::" << pick_occ(eng) << "::"
        << pick_zip(eng) << '\n';
    }
  }

  std::vector<std::vector<std::size_t>> cluster_movies(kClusters);
  for (std::size_t m = 1; m <= spec.movies; ++m)
    cluster_movies[movie_cluster(m)].push_back(m);

  {
    auto eng = make_engine(derive_seed(spec.seed, 102));
    std::bernoulli_distribution own_cluster(0.7);
    std::uniform_int_distribution<std::size_t> any_movie(1, spec.movies);
    std::normal_distribution<double> noise(0.0, 0.9);
    std::ofstream f(fs::path(dir) / "ratings.dat", std::ios::trunc);
    if (!f) throw CliError(1, "cannot write ratings.dat");
    for (std::size_t u = 1; u <= spec.users; ++u) {
      const auto& own = cluster_movies[user_cluster[u]];
      std::uniform_int_distribution<std::size_t> own_pick(0, own.size() - 1);
      std::set<std::size_t> chosen;
      while (chosen.size() < spec.ratings_per_user) {
        const std::size_t m =
            own_cluster(eng) ? own[own_pick(eng)] : any_movie(eng);
        chosen.insert(m);
      }
      long long ts = 978300000LL + static_cast<long long>(u) * 100000;
      for (std::size_t m : chosen) {
        const bool match = movie_cluster(m) == user_cluster[u];
        const double base = match ? 4.2 : 2.4;
        const int rating = std::clamp(
            static_cast<int>(std::lround(base + noise(eng))), 1, 5);
        f << u << "::" << m << "::" << rating << "::" << ts++ << '\n';
      }
    }
  }
}

// 1 Hz six-channel stream: sinusoids whose base frequency steps every 120 s
// plus seeded noise, so sessions differ but everything stays deterministic.
void write_synthetic_sensor_csv(const SynthSpec& spec,
                                const std::string& path) {
  if (spec.sensor_seconds < 0.0)
    throw CliError(2, "synth: sensor_seconds must be >= 0");
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw CliError(1, "cannot write " + path);
  f << "timestamp,acc_x,acc_y,acc_z,gyro_x,gyro_y,gyro_z\n";

  auto eng = make_engine(derive_seed(spec.seed, 103));
  std::normal_distribution<double> noise(0.0, 0.05);
  const double two_pi = 2.0 * std::numbers::pi;
  char buf[32];
  for (double t = 0.0; t <= spec.sensor_seconds + 1e-9; t += 1.0) {
    const double fb = 0.06 + 0.02 * static_cast<double>(
                                        (static_cast<long>(t) / 120) % 3);
    const double chans[6] = {
        0.8 * std::sin(two_pi * fb * t + 0.3) + noise(eng),
        0.6 * std::sin(two_pi * fb * t + 1.5) + noise(eng),
        0.4 + 0.5 * std::sin(two_pi * 0.5 * fb * t) + noise(eng),
        1.1 * std::sin(two_pi * 1.5 * fb * t + 0.7) + noise(eng),
        0.9 * std::cos(two_pi * fb * t + 2.1) + noise(eng),
        0.3 * std::sin(two_pi * 0.8 * fb * t) + noise(eng),
    };
    std::snprintf(buf, sizeof buf, "%.3f", t);
    f << buf;
    for (double v : chans) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      f << buf;
    }
    f << '\n';
  }
}

} // namespace reco::cli
