#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "reco/tensor.hpp"

namespace reco {

inline constexpr std::size_t kSessionSteps = 30;
inline constexpr std::size_t kSessionChannels = 6;
inline constexpr std::size_t kEmbeddingDim = 112;

// One timestamped reading: acc x/y/z (m/s²), gyro x/y/z (rad/s).
struct SensorReading {
  double t = 0.0;
  std::array<double, kSessionChannels> v{};
};

// 60 s of resampled data on the 0.5 Hz grid: 30 rows × 6 channels.
struct SensorSession {
  Tensor2D samples{kSessionSteps, kSessionChannels};
};

using SessionEmbedding = std::array<double, kEmbeddingDim>;

// Slide a 60 s window by 60·(1−overlap) seconds over the stream and resample
// each window to the rate grid by nearest neighbor within ±1 s (ties take the
// earlier reading). Windows with an unresolvable grid point are dropped.
std::vector<SensorSession> sessionize(const std::vector<SensorReading>& stream,
                                      double window_s = 60.0,
                                      double overlap = 0.95,
                                      double rate_hz = 0.5);

// Iterative radix-2 transform; size must be a power of two.
std::vector<std::complex<double>> fft_complex(
    std::vector<std::complex<double>> x, bool inverse);

// Forward transform of a real signal, zero-padded to the next power of two.
// Unnormalized convention: X[k] = Σ_t x[t]·e^{−2πikt/n}.
std::vector<std::complex<double>> fft(const std::vector<double>& signal);

// [mean, std, mad, max, min, peaks, numMean, energy, iqr, entropy,
//  arCoeff1, arCoeff2]
std::array<double, 12> time_features(const std::vector<double>& channel);

// Over positive-frequency bins 1..16 of a 32-point spectrum:
// [minFreqInd, maxFreqInd, meanFreq, skewness, kurtosis].
std::array<double, 5> freq_features(
    const std::vector<std::complex<double>>& spectrum);

// The frozen 112-dim layout:
//   [  0.. 71] 6 channels × 12 time features
//   [ 72.. 73] signal magnitude area per sensor (acc, gyro)
//   [ 74.. 79] Pearson correlation per within-sensor axis pair
//   [ 80..109] 6 channels × 5 frequency features (channels demeaned first)
//   [110..111] energy of bins 1..8 per sensor
SessionEmbedding session_embedding(const SensorSession& session);

// Stable column names matching the layout above, length 112.
const std::vector<std::string>& session_feature_names();

// One embedding row per session; parallel across sessions.
Tensor2D embed_sessions(const std::vector<SensorSession>& sessions);

// CSV front ends. Input header: timestamp,acc_x,acc_y,acc_z,gyro_x,gyro_y,
// gyro_z. Output columns follow session_feature_names().
std::vector<SensorReading> read_sensor_csv(const std::string& path);
void write_embeddings_csv(const Tensor2D& embeddings, const std::string& path);
void write_embeddings_json(const Tensor2D& embeddings,
                           const std::string& path);

} // namespace reco
