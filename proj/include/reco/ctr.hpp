#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "reco/ingest.hpp"
#include "reco/optim.hpp"
#include "reco/params.hpp"
#include "reco/tensor.hpp"

namespace reco {

struct AutoIntConfig {
  std::size_t d = 16;              // embedding dimension
  std::size_t attention_layers = 3;
  std::size_t heads = 2;
  std::size_t attention_size = 32; // total width across heads
  std::size_t hidden_units = 32;
  double dropout = 0.3;

  void validate() const;
};

using SampleBatch = std::vector<const Sample*>;
SampleBatch make_batch(const std::vector<Sample>& samples);

// Field embeddings for one sample as an M×d matrix, tables aligned with the
// schema's field order. Numeric field m: e_m = v_m·x_m. Categorical field i:
// the x_i-th row of V_i. Multi-valued field i with q active indices: the mean
// of the q rows (V_i x_i / q).
Tensor2D embed_sample(const FeatureSchema& schema,
                      const std::vector<const Tensor2D*>& tables,
                      const Sample& sample);

class CtrModel {
 public:
  virtual ~CtrModel() = default;

  // Probabilities as a B×1 tensor. Training mode enables dropout (seeded per
  // call) and caches activations for the following backward.
  virtual Tensor2D forward(const SampleBatch& batch, bool train,
                           std::uint64_t dropout_seed = 0) = 0;
  // Accumulates parameter gradients for the last training-mode forward.
  virtual void backward(const Tensor2D& dprobs) = 0;

  virtual ParameterSet& params() = 0;
  const ParameterSet& params() const {
    return const_cast<CtrModel*>(this)->params();
  }
  virtual const FeatureSchema& schema() const = 0;
  virtual std::string kind() const = 0;
};

// kind ∈ {"lr-raw", "lr-emb", "autoint"}. The config only affects models
// with embeddings; lr-raw ignores it.
std::unique_ptr<CtrModel> make_ctr_model(const std::string& kind,
                                         const FeatureSchema& schema,
                                         const AutoIntConfig& config,
                                         std::uint64_t seed);

// Shuffled mini-batch training; returns the per-epoch mean loss.
std::vector<double> train_epochs(CtrModel& model,
                                 const std::vector<Sample>& samples,
                                 Optimizer& opt, std::size_t batch_size,
                                 std::size_t epochs, std::uint64_t seed);

// Eval-mode probabilities over a whole sample list.
std::vector<double> predict_probs(CtrModel& model,
                                  const std::vector<Sample>& samples);

// Checkpoint = parameters + schema descriptor; loading verifies the stored
// schema hash so a checkpoint cannot be applied to a mismatched vocabulary.
void save_ctr_checkpoint(const CtrModel& model, const std::string& prefix);
void load_ctr_checkpoint(CtrModel& model, const std::string& prefix);

} // namespace reco
