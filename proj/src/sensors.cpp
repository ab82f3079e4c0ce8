#include "reco/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "reco/threading.hpp"

namespace reco {

namespace {

constexpr double kResampleTolerance = 1.0; // seconds

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

double percentile_linear(const std::vector<double>& sorted, double p) {
  // Linear interpolation between order statistics (the common "type 7").
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - std::floor(h);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double median_sorted(const std::vector<double>& sorted) {
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2]
                    : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

// Population Pearson correlation; either side constant → 0 by convention.
double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  const double denom = std::sqrt(va * vb);
  return denom > 0.0 ? cov / denom : 0.0;
}

std::vector<double> channel_of(const SensorSession& s, std::size_t ch) {
  std::vector<double> out(kSessionSteps);
  for (std::size_t t = 0; t < kSessionSteps; ++t) out[t] = s.samples.at(t, ch);
  return out;
}

std::vector<double> demeaned(std::vector<double> x) {
  const double mean =
      std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  for (double& v : x) v -= mean;
  return x;
}

} // namespace

std::vector<SensorSession> sessionize(const std::vector<SensorReading>& stream,
                                      double window_s, double overlap,
                                      double rate_hz) {
  if (window_s <= 0.0 || rate_hz <= 0.0 || overlap < 0.0 || overlap >= 1.0)
    throw std::invalid_argument("sessionize: bad window parameters");
  for (std::size_t i = 1; i < stream.size(); ++i)
    if (stream[i].t < stream[i - 1].t)
      throw std::invalid_argument("sessionize: stream not time-sorted");

  const double dt = 1.0 / rate_hz;
  const auto steps = static_cast<std::size_t>(std::llround(window_s * rate_hz));
  const double stride = window_s * (1.0 - overlap);
  std::vector<SensorSession> out;
  if (stream.empty() || steps == 0) return out;

  const double t0 = stream.front().t;
  const double t_last = stream.back().t;
  std::vector<double> times(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) times[i] = stream[i].t;

  for (std::size_t w = 0;; ++w) {
    const double start = t0 + stride * static_cast<double>(w);
    const double last_grid = start + dt * static_cast<double>(steps - 1);
    if (last_grid > t_last + kResampleTolerance + 1e-9) break;

    SensorSession session;
    session.samples = Tensor2D(steps, kSessionChannels);
    bool ok = true;
    for (std::size_t g = 0; g < steps && ok; ++g) {
      const double target = start + dt * static_cast<double>(g);
      auto it = std::lower_bound(times.begin(), times.end(), target);
      // Candidates: the reading at/after target and the one before; the
      // nearer wins, ties go to the earlier reading.
      std::size_t best = times.size();
      double best_d = kResampleTolerance + 1e-9;
      if (it != times.begin()) {
        const auto i = static_cast<std::size_t>(it - times.begin()) - 1;
        const double d = std::abs(times[i] - target);
        if (d <= best_d) {
          best = i;
          best_d = d;
        }
      }
      if (it != times.end()) {
        const auto i = static_cast<std::size_t>(it - times.begin());
        const double d = std::abs(times[i] - target);
        if (d < best_d) {
          best = i;
          best_d = d;
        }
      }
      if (best == times.size()) {
        ok = false;
        break;
      }
      for (std::size_t c = 0; c < kSessionChannels; ++c)
        session.samples.at(g, c) = stream[best].v[c];
    }
    if (ok) out.push_back(std::move(session));
  }
  return out;
}

std::vector<std::complex<double>> fft_complex(
    std::vector<std::complex<double>> x, bool inverse) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("fft: empty input");
  if ((n & (n - 1)) != 0)
    throw std::invalid_argument("fft: size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang =
        (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = x[i + k];
        const std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& c : x) c *= inv_n;
  }
  return x;
}

std::vector<std::complex<double>> fft(const std::vector<double>& signal) {
  if (signal.empty()) throw std::invalid_argument("fft: empty signal");
  std::vector<std::complex<double>> x(next_pow2(signal.size()));
  for (std::size_t i = 0; i < signal.size(); ++i) x[i] = signal[i];
  return fft_complex(std::move(x), false);
}

std::array<double, 12> time_features(const std::vector<double>& channel) {
  const std::size_t n = channel.size();
  if (n == 0) throw std::invalid_argument("time_features: empty channel");

  double mean = 0.0;
  for (double v : channel) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0, energy = 0.0;
  for (double v : channel) {
    var += (v - mean) * (v - mean);
    energy += v * v;
  }
  var /= static_cast<double>(n);
  energy /= static_cast<double>(n);
  const double sd = std::sqrt(var);

  std::vector<double> sorted = channel;
  std::sort(sorted.begin(), sorted.end());
  const double vmin = sorted.front(), vmax = sorted.back();
  const double med = median_sorted(sorted);
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = std::abs(channel[i] - med);
  std::sort(dev.begin(), dev.end());
  const double mad = median_sorted(dev);
  const double iqr =
      percentile_linear(sorted, 0.75) - percentile_linear(sorted, 0.25);

  double peaks = 0.0, num_mean = 0.0;
  const double peak_threshold = mean + sd;
  for (std::size_t i = 0; i < n; ++i) {
    if (channel[i] > mean) num_mean += 1.0;
    if (i > 0 && i + 1 < n && channel[i] > channel[i - 1] &&
        channel[i] > channel[i + 1] && channel[i] > peak_threshold)
      peaks += 1.0;
  }

  // Shannon entropy of a 10-bin histogram spanning [min, max].
  double entropy = 0.0;
  if (vmax > vmin) {
    std::array<double, 10> hist{};
    const double scale = 10.0 / (vmax - vmin);
    for (double v : channel) {
      auto bin = static_cast<std::size_t>((v - vmin) * scale);
      if (bin >= 10) bin = 9;
      hist[bin] += 1.0;
    }
    for (double h : hist) {
      if (h == 0.0) continue;
      const double p = h / static_cast<double>(n);
      entropy -= p * std::log(p);
    }
  }

  // Order-2 autoregression by Yule-Walker on biased autocovariances.
  double ar1 = 0.0, ar2 = 0.0;
  if (var > 0.0 && n > 2) {
    double r0 = 0.0, r1 = 0.0, r2 = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double x0 = channel[t] - mean;
      r0 += x0 * x0;
      if (t >= 1) r1 += x0 * (channel[t - 1] - mean);
      if (t >= 2) r2 += x0 * (channel[t - 2] - mean);
    }
    r0 /= static_cast<double>(n);
    r1 /= static_cast<double>(n);
    r2 /= static_cast<double>(n);
    const double det = r0 * r0 - r1 * r1;
    if (std::abs(det) > 1e-12 * r0 * r0) {
      ar1 = (r0 * r1 - r1 * r2) / det;
      ar2 = (r0 * r2 - r1 * r1) / det;
    }
  }

  return {mean, sd,  mad,     vmax,    vmin, peaks,
          num_mean, energy, iqr, entropy, ar1,  ar2};
}

std::array<double, 5> freq_features(
    const std::vector<std::complex<double>>& spectrum) {
  constexpr std::size_t kFirst = 1, kLast = 16;
  if (spectrum.size() <= kLast)
    throw std::invalid_argument("freq_features: spectrum too short");

  std::array<double, kLast - kFirst + 1> mag{};
  double total = 0.0;
  for (std::size_t k = kFirst; k <= kLast; ++k) {
    mag[k - kFirst] = std::abs(spectrum[k]);
    total += mag[k - kFirst];
  }
  if (total == 0.0) return {1.0, 1.0, 0.0, 0.0, 0.0};

  std::size_t min_bin = kFirst, max_bin = kFirst;
  for (std::size_t k = kFirst; k <= kLast; ++k) {
    if (mag[k - kFirst] < mag[min_bin - kFirst]) min_bin = k;
    if (mag[k - kFirst] > mag[max_bin - kFirst]) max_bin = k;
  }

  double mean_freq = 0.0;
  for (std::size_t k = kFirst; k <= kLast; ++k)
    mean_freq += static_cast<double>(k) * mag[k - kFirst] / total;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (std::size_t k = kFirst; k <= kLast; ++k) {
    const double w = mag[k - kFirst] / total;
    const double d = static_cast<double>(k) - mean_freq;
    m2 += w * d * d;
    m3 += w * d * d * d;
    m4 += w * d * d * d * d;
  }
  const double skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  const double kurt = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  return {static_cast<double>(min_bin), static_cast<double>(max_bin),
          mean_freq, skew, kurt};
}

SessionEmbedding session_embedding(const SensorSession& session) {
  if (session.samples.rows() != kSessionSteps ||
      session.samples.cols() != kSessionChannels)
    throw std::invalid_argument("session_embedding: bad session shape");
  check_finite(session.samples, "sensor session");

  SessionEmbedding out{};
  std::size_t pos = 0;

  std::array<std::vector<double>, kSessionChannels> chans;
  for (std::size_t c = 0; c < kSessionChannels; ++c)
    chans[c] = channel_of(session, c);

  for (std::size_t c = 0; c < kSessionChannels; ++c) {
    const auto tf = time_features(chans[c]);
    for (double v : tf) out[pos++] = v;
  }

  // Signal magnitude area per sensor.
  for (std::size_t sensor = 0; sensor < 2; ++sensor) {
    double sma = 0.0;
    for (std::size_t t = 0; t < kSessionSteps; ++t)
      sma += std::abs(chans[3 * sensor][t]) +
             std::abs(chans[3 * sensor + 1][t]) +
             std::abs(chans[3 * sensor + 2][t]);
    out[pos++] = sma / static_cast<double>(kSessionSteps);
  }

  // Axis-pair correlations within each sensor: xy, xz, yz.
  for (std::size_t sensor = 0; sensor < 2; ++sensor) {
    const std::size_t b = 3 * sensor;
    out[pos++] = pearson(chans[b], chans[b + 1]);
    out[pos++] = pearson(chans[b], chans[b + 2]);
    out[pos++] = pearson(chans[b + 1], chans[b + 2]);
  }

  // Frequency block. Channels are demeaned first so the zero-padding step
  // does not leak the DC level into the positive-frequency bins.
  std::array<std::vector<std::complex<double>>, kSessionChannels> spectra;
  for (std::size_t c = 0; c < kSessionChannels; ++c)
    spectra[c] = fft(demeaned(chans[c]));
  for (std::size_t c = 0; c < kSessionChannels; ++c) {
    const auto ff = freq_features(spectra[c]);
    for (double v : ff) out[pos++] = v;
  }

  // Energy of bins 1..8, averaged over each sensor's three channels.
  for (std::size_t sensor = 0; sensor < 2; ++sensor) {
    double e = 0.0;
    for (std::size_t c = 3 * sensor; c < 3 * sensor + 3; ++c)
      for (std::size_t k = 1; k <= 8; ++k) e += std::norm(spectra[c][k]);
    out[pos++] = e / (3.0 * 8.0);
  }

  if (pos != kEmbeddingDim)
    throw std::logic_error("session_embedding: layout drifted");
  return out;
}

const std::vector<std::string>& session_feature_names() {
  static const std::vector<std::string> names = [] {
    const std::array<std::string, kSessionChannels> ch = {
        "acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z"};
    const std::array<std::string, 12> tf = {
        "mean",    "std",    "mad",  "max",     "min",      "peaks",
        "numMean", "energy", "iqr",  "entropy", "arCoeff1", "arCoeff2"};
    const std::array<std::string, 5> ff = {"minFreqInd", "maxFreqInd",
                                           "meanFreq", "skewness", "kurtosis"};
    std::vector<std::string> out;
    out.reserve(kEmbeddingDim);
    for (const auto& c : ch)
      for (const auto& f : tf) out.push_back(c + "_" + f);
    out.push_back("sma_acc");
    out.push_back("sma_gyro");
    for (const std::string sensor : {"acc", "gyro"})
      for (const std::string pair : {"xy", "xz", "yz"})
        out.push_back("corr_" + sensor + "_" + pair);
    for (const auto& c : ch)
      for (const auto& f : ff) out.push_back(c + "_" + f);
    out.push_back("energyband_acc");
    out.push_back("energyband_gyro");
    return out;
  }();
  return names;
}

Tensor2D embed_sessions(const std::vector<SensorSession>& sessions) {
  Tensor2D out(sessions.size(), kEmbeddingDim);
  const auto n = static_cast<long>(sessions.size());
#pragma omp parallel for schedule(dynamic, 4) if (n > 8)
  for (long i = 0; i < n; ++i) {
    const SessionEmbedding e =
        session_embedding(sessions[static_cast<std::size_t>(i)]);
    double* row = out.row(static_cast<std::size_t>(i));
    std::copy(e.begin(), e.end(), row);
  }
  return out;
}

std::vector<SensorReading> read_sensor_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<SensorReading> out;
  std::string line;
  bool first = true;
  std::size_t malformed = 0;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("timestamp", 0) == 0) continue; // header
    }
    std::vector<std::string> fields;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    SensorReading r;
    bool ok = fields.size() == 1 + kSessionChannels;
    try {
      if (ok) {
        std::size_t used = 0;
        r.t = std::stod(fields[0], &used);
        ok = used == fields[0].size();
        for (std::size_t c = 0; ok && c < kSessionChannels; ++c) {
          r.v[c] = std::stod(fields[c + 1], &used);
          ok = used == fields[c + 1].size();
        }
      }
    } catch (const std::exception&) {
      ok = false;
    }
    if (!ok) {
      ++malformed;
      continue;
    }
    out.push_back(r);
  }
  if (malformed > 0)
    std::fprintf(stderr, "read_sensor_csv: skipped %zu malformed lines\n",
                 malformed);
  return out;
}

void write_embeddings_csv(const Tensor2D& embeddings,
                          const std::string& path) {
  if (embeddings.cols() != kEmbeddingDim)
    throw std::invalid_argument("write_embeddings_csv: wrong width");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  const auto& names = session_feature_names();
  for (std::size_t j = 0; j < names.size(); ++j)
    f << (j ? "," : "") << names[j];
  f << '\n';
  f.precision(17);
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    for (std::size_t j = 0; j < embeddings.cols(); ++j)
      f << (j ? "," : "") << embeddings.at(i, j);
    f << '\n';
  }
}

void write_embeddings_json(const Tensor2D& embeddings,
                           const std::string& path) {
  if (embeddings.cols() != kEmbeddingDim)
    throw std::invalid_argument("write_embeddings_json: wrong width");
  const auto& names = session_feature_names();
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    nlohmann::json row;
    for (std::size_t j = 0; j < embeddings.cols(); ++j)
      row[names[j]] = embeddings.at(i, j);
    rows.push_back(std::move(row));
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << rows.dump(2) << '\n';
}

} // namespace reco
