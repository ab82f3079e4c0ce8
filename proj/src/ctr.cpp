#include "reco/ctr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "reco/nn.hpp"
#include "reco/rng.hpp"

namespace reco {

void AutoIntConfig::validate() const {
  if (d == 0 || attention_layers == 0 || heads == 0 || attention_size == 0 ||
      hidden_units == 0)
    throw std::invalid_argument("autoint config: zero-sized dimension");
  if (attention_size % heads != 0)
    throw std::invalid_argument(
        "autoint config: attention_size must divide evenly across heads");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("autoint config: dropout outside [0,1)");
}

SampleBatch make_batch(const std::vector<Sample>& samples) {
  SampleBatch b;
  b.reserve(samples.size());
  for (const auto& s : samples) b.push_back(&s);
  return b;
}

namespace {

// Row-block and column-band helpers for per-sample attention arithmetic.
Tensor2D block_rows(const Tensor2D& t, std::size_t start, std::size_t count) {
  Tensor2D out(count, t.cols());
  std::memcpy(out.data(), t.row(start), count * t.cols() * sizeof(double));
  return out;
}

void add_block_rows(Tensor2D& dst, std::size_t start, const Tensor2D& rows) {
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    double* d = dst.row(start + i);
    const double* s = rows.row(i);
    for (std::size_t j = 0; j < rows.cols(); ++j) d[j] += s[j];
  }
}

void set_block_rows(Tensor2D& dst, std::size_t start, const Tensor2D& rows) {
  std::memcpy(dst.row(start), rows.data(),
              rows.rows() * rows.cols() * sizeof(double));
}

Tensor2D get_cols(const Tensor2D& t, std::size_t col_start, std::size_t n) {
  Tensor2D out(t.rows(), n);
  for (std::size_t i = 0; i < t.rows(); ++i)
    std::memcpy(out.row(i), t.row(i) + col_start, n * sizeof(double));
  return out;
}

Tensor2D reshape(const Tensor2D& t, std::size_t rows, std::size_t cols) {
  if (rows * cols != t.size()) throw std::invalid_argument("reshape: size");
  Tensor2D out(rows, cols);
  std::memcpy(out.data(), t.data(), t.size() * sizeof(double));
  return out;
}

void init_embedding_group(ParameterGroup& g, const FeatureSchema& schema,
                          std::size_t d, std::uint64_t seed) {
  for (std::size_t fi = 0; fi < schema.fields.size(); ++fi) {
    const FieldSpec& f = schema.fields[fi];
    const std::size_t rows =
        f.kind == FieldKind::kNumeric ? 1 : f.vocab.size();
    Tensor2D t(rows, d);
    fill_normal(t, 0.0, 0.01, derive_seed(seed, fi));
    g.add("f" + std::to_string(fi) + "_" + f.name, std::move(t));
  }
}

std::vector<const Tensor2D*> embedding_tables(const ParameterGroup& g) {
  std::vector<const Tensor2D*> tables;
  tables.reserve(g.tensors.size());
  for (const auto& t : g.tensors) tables.push_back(&t.value);
  return tables;
}

// Batch embedding: row b·M+f of the result is field f of sample b.
Tensor2D embed_batch(const FeatureSchema& schema, const ParameterGroup& g,
                     const SampleBatch& batch) {
  const std::size_t m = schema.field_count();
  const std::size_t d = g.tensors.front().value.cols();
  Tensor2D e(batch.size() * m, d);
  auto tables = embedding_tables(g);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Tensor2D rows = embed_sample(schema, tables, *batch[b]);
    set_block_rows(e, b * m, rows);
  }
  return e;
}

// Scatter dE (B·M × d) back into the per-field tables.
void embed_backward(const FeatureSchema& schema, ParameterGroup& g,
                    const SampleBatch& batch, const Tensor2D& de) {
  const std::size_t m = schema.field_count();
  const std::size_t d = de.cols();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Sample& s = *batch[b];
    std::size_t ni = 0, ci = 0, mi = 0;
    for (std::size_t fi = 0; fi < m; ++fi) {
      const double* grad_row = de.row(b * m + fi);
      Tensor2D& gt = g.tensors[fi].grad;
      switch (schema.fields[fi].kind) {
        case FieldKind::kNumeric: {
          const double x = s.numeric[ni++];
          double* row = gt.row(0);
          for (std::size_t j = 0; j < d; ++j) row[j] += grad_row[j] * x;
          break;
        }
        case FieldKind::kCategorical: {
          double* row = gt.row(static_cast<std::size_t>(s.cat[ci++]));
          for (std::size_t j = 0; j < d; ++j) row[j] += grad_row[j];
          break;
        }
        case FieldKind::kMultiValued: {
          const auto& idx = s.multi[mi++];
          const double scale = 1.0 / static_cast<double>(idx.size());
          for (int id : idx) {
            double* row = gt.row(static_cast<std::size_t>(id));
            for (std::size_t j = 0; j < d; ++j)
              row[j] += grad_row[j] * scale;
          }
          break;
        }
      }
    }
  }
}

Tensor2D sigmoid_prob_grad_to_logit(const Tensor2D& dprobs,
                                    const Tensor2D& probs) {
  Tensor2D dz = dprobs;
  for (std::size_t i = 0; i < dz.size(); ++i)
    dz.data()[i] *= probs.data()[i] * (1.0 - probs.data()[i]);
  return dz;
}

// ---------------------------------------------------------------------------

class LogisticRaw final : public CtrModel {
 public:
  LogisticRaw(const FeatureSchema& schema, std::uint64_t /*seed*/)
      : schema_(schema) {
    std::size_t dim = 0;
    for (const auto& f : schema_.fields) {
      offsets_.push_back(dim);
      dim += f.kind == FieldKind::kNumeric ? 1 : f.vocab.size();
    }
    dim_ = dim;
    auto& out = params_.add_group("output");
    out.add("w", Tensor2D(dim_, 1, 0.0));
    out.add("b", Tensor2D(1, 1, 0.0));
  }

  Tensor2D forward(const SampleBatch& batch, bool train,
                   std::uint64_t) override {
    const auto& w = params_.group("output").find("w").value;
    const double b = params_.group("output").find("b").value.at(0, 0);
    Tensor2D probs(batch.size(), 1);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      double z = b;
      for_each_active(*batch[i], [&](std::size_t idx, double x) {
        z += w.at(idx, 0) * x;
      });
      probs.at(i, 0) = 1.0 / (1.0 + std::exp(-z));
    }
    check_finite(probs, "lr-raw probabilities");
    if (train) cache_ = batch;
    last_probs_ = probs;
    return probs;
  }

  void backward(const Tensor2D& dprobs) override {
    Tensor2D dz = sigmoid_prob_grad_to_logit(dprobs, last_probs_);
    auto& out = params_.group("output");
    Tensor2D& dw = out.find("w").grad;
    Tensor2D& db = out.find("b").grad;
    for (std::size_t i = 0; i < cache_.size(); ++i) {
      const double g = dz.at(i, 0);
      db.at(0, 0) += g;
      for_each_active(*cache_[i], [&](std::size_t idx, double x) {
        dw.at(idx, 0) += g * x;
      });
    }
  }

  ParameterSet& params() override { return params_; }
  const FeatureSchema& schema() const override { return schema_; }
  std::string kind() const override { return "lr-raw"; }

 private:
  template <typename Fn>
  void for_each_active(const Sample& s, Fn&& fn) {
    std::size_t ni = 0, ci = 0, mi = 0;
    for (std::size_t fi = 0; fi < schema_.fields.size(); ++fi) {
      const std::size_t off = offsets_[fi];
      switch (schema_.fields[fi].kind) {
        case FieldKind::kNumeric: {
          const double x = s.numeric[ni++];
          if ((x < -0.5 || x > 1.5) && !warned_) {
            std::fprintf(stderr,
                         "lr-raw: numeric input %.3f outside [-0.5, 1.5]; "
                         "check normalization\n",
                         x);
            warned_ = true;
          }
          fn(off, x);
          break;
        }
        case FieldKind::kCategorical:
          fn(off + static_cast<std::size_t>(s.cat[ci++]), 1.0);
          break;
        case FieldKind::kMultiValued:
          for (int id : s.multi[mi]) fn(off + static_cast<std::size_t>(id), 1.0);
          ++mi;
          break;
      }
    }
  }

  FeatureSchema schema_;
  std::vector<std::size_t> offsets_;
  std::size_t dim_ = 0;
  ParameterSet params_;
  SampleBatch cache_;
  Tensor2D last_probs_;
  bool warned_ = false;
};

// ---------------------------------------------------------------------------

class LogisticEmbed final : public CtrModel {
 public:
  LogisticEmbed(const FeatureSchema& schema, std::size_t d, std::uint64_t seed)
      : schema_(schema), d_(d) {
    init_embedding_group(params_.add_group("embedding"), schema_, d_, seed);
    const std::size_t m = schema_.field_count();
    auto& out = params_.add_group("output");
    out.add("w", Tensor2D(m * d_, 1, 0.0));
    out.add("b", Tensor2D(1, 1, 0.0));
  }

  Tensor2D forward(const SampleBatch& batch, bool train,
                   std::uint64_t) override {
    const std::size_t m = schema_.field_count();
    Tensor2D e = embed_batch(schema_, params_.group("embedding"), batch);
    Tensor2D x = reshape(e, batch.size(), m * d_);
    Tensor2D z = affine_forward(x, params_.group("output").find("w").value,
                                params_.group("output").find("b").value);
    Tensor2D probs = sigmoid_forward(z);
    check_finite(probs, "lr-emb probabilities");
    if (train) {
      cache_ = batch;
      x_ = std::move(x);
    }
    last_probs_ = probs;
    return probs;
  }

  void backward(const Tensor2D& dprobs) override {
    Tensor2D dz = sigmoid_prob_grad_to_logit(dprobs, last_probs_);
    auto& out = params_.group("output");
    AffineGrads g = affine_backward(dz, x_, out.find("w").value);
    out.find("w").grad.add_(g.dw);
    out.find("b").grad.add_(g.db);
    Tensor2D de = reshape(g.dx, cache_.size() * schema_.field_count(), d_);
    embed_backward(schema_, params_.group("embedding"), cache_, de);
  }

  ParameterSet& params() override { return params_; }
  const FeatureSchema& schema() const override { return schema_; }
  std::string kind() const override { return "lr-emb"; }

 private:
  FeatureSchema schema_;
  std::size_t d_;
  ParameterSet params_;
  SampleBatch cache_;
  Tensor2D x_;
  Tensor2D last_probs_;
};

// ---------------------------------------------------------------------------

class AutoInt final : public CtrModel {
 public:
  AutoInt(const FeatureSchema& schema, const AutoIntConfig& cfg,
          std::uint64_t seed)
      : schema_(schema), cfg_(cfg) {
    cfg_.validate();
    const std::size_t m = schema_.field_count();
    init_embedding_group(params_.add_group("embedding"), schema_, cfg_.d,
                         derive_seed(seed, 1));

    auto& inter = params_.add_group("interaction");
    const std::size_t p = cfg_.attention_size / cfg_.heads;
    std::uint64_t s = derive_seed(seed, 2);
    for (std::size_t l = 0; l < cfg_.attention_layers; ++l) {
      const std::size_t d_in = l == 0 ? cfg_.d : cfg_.attention_size;
      for (std::size_t h = 0; h < cfg_.heads; ++h) {
        for (const char* which : {"q", "k", "v"}) {
          Tensor2D w(d_in, p);
          fill_xavier_uniform(w, splitmix64(s));
          inter.add("l" + std::to_string(l) + "_" + which + std::to_string(h),
                    std::move(w));
        }
      }
      if (d_in != cfg_.attention_size) {
        Tensor2D w(d_in, cfg_.attention_size);
        fill_xavier_uniform(w, splitmix64(s));
        inter.add("l" + std::to_string(l) + "_res", std::move(w));
      }
    }

    auto& out = params_.add_group("output");
    Tensor2D w1(m * cfg_.attention_size, cfg_.hidden_units);
    fill_xavier_uniform(w1, derive_seed(seed, 3));
    out.add("w1", std::move(w1));
    out.add("b1", Tensor2D(1, cfg_.hidden_units, 0.0));
    Tensor2D w2(cfg_.hidden_units, 1);
    fill_xavier_uniform(w2, derive_seed(seed, 4));
    out.add("w2", std::move(w2));
    out.add("b2", Tensor2D(1, 1, 0.0));
  }

  Tensor2D forward(const SampleBatch& batch, bool train,
                   std::uint64_t dropout_seed) override {
    const std::size_t m = schema_.field_count();
    const std::size_t p = cfg_.attention_size / cfg_.heads;
    Cache c;
    c.batch = batch;
    c.train = train;
    Tensor2D x = embed_batch(schema_, params_.group("embedding"), batch);
    c.emb = x;

    auto& inter = params_.group("interaction");
    for (std::size_t l = 0; l < cfg_.attention_layers; ++l) {
      LayerCache lc;
      lc.input = x;
      Tensor2D concat(x.rows(), cfg_.attention_size, 0.0);
      for (std::size_t h = 0; h < cfg_.heads; ++h) {
        const std::string pre = "l" + std::to_string(l) + "_";
        Tensor2D q = matmul(x, inter.find(pre + "q" + std::to_string(h)).value);
        Tensor2D k = matmul(x, inter.find(pre + "k" + std::to_string(h)).value);
        Tensor2D v = matmul(x, inter.find(pre + "v" + std::to_string(h)).value);
        Tensor2D a(x.rows(), m);
        for (std::size_t b = 0; b < batch.size(); ++b) {
          Tensor2D qb = block_rows(q, b * m, m);
          Tensor2D kb = block_rows(k, b * m, m);
          Tensor2D vb = block_rows(v, b * m, m);
          // Plain inner-product attention: α_ij = softmax_j(⟨q_i, k_j⟩).
          Tensor2D ab = softmax_rowwise(matmul_nt(qb, kb));
          set_block_rows(a, b * m, ab);
          Tensor2D ob = matmul(ab, vb);
          for (std::size_t i = 0; i < m; ++i)
            std::memcpy(concat.row(b * m + i) + h * p, ob.row(i),
                        p * sizeof(double));
        }
        lc.q.push_back(std::move(q));
        lc.k.push_back(std::move(k));
        lc.v.push_back(std::move(v));
        lc.a.push_back(std::move(a));
      }
      lc.concat = concat;
      Tensor2D dropped = dropout_forward(concat, cfg_.dropout, train,
                                         derive_seed(dropout_seed, l),
                                         &lc.drop_mask);
      const std::string res_name = "l" + std::to_string(l) + "_res";
      Tensor2D residual = has_tensor(inter, res_name)
                              ? matmul(x, inter.find(res_name).value)
                              : x;
      Tensor2D pre = dropped;
      pre.add_(residual);
      lc.pre_relu = pre;
      x = relu_forward(pre);
      c.layers.push_back(std::move(lc));
    }

    auto& out = params_.group("output");
    c.flat = reshape(x, batch.size(), m * cfg_.attention_size);
    c.h_pre = affine_forward(c.flat, out.find("w1").value,
                             out.find("b1").value);
    c.h_act = relu_forward(c.h_pre);
    c.h_drop = dropout_forward(c.h_act, cfg_.dropout, train,
                               derive_seed(dropout_seed, 1000), &c.h_mask);
    Tensor2D z = affine_forward(c.h_drop, out.find("w2").value,
                                out.find("b2").value);
    c.probs = sigmoid_forward(z);
    check_finite(c.probs, "autoint probabilities");
    if (train) cache_ = std::move(c);
    else last_probs_ = c.probs;
    return train ? cache_.probs : last_probs_;
  }

  void backward(const Tensor2D& dprobs) override {
    const std::size_t m = schema_.field_count();
    const std::size_t p = cfg_.attention_size / cfg_.heads;
    Cache& c = cache_;
    auto& inter = params_.group("interaction");
    auto& out = params_.group("output");

    Tensor2D dz = sigmoid_prob_grad_to_logit(dprobs, c.probs);
    AffineGrads g2 = affine_backward(dz, c.h_drop, out.find("w2").value);
    out.find("w2").grad.add_(g2.dw);
    out.find("b2").grad.add_(g2.db);
    Tensor2D dh_act = dropout_backward(g2.dx, c.h_mask);
    Tensor2D dh_pre = relu_backward(dh_act, c.h_pre);
    AffineGrads g1 = affine_backward(dh_pre, c.flat, out.find("w1").value);
    out.find("w1").grad.add_(g1.dw);
    out.find("b1").grad.add_(g1.db);

    Tensor2D dx = reshape(g1.dx, c.batch.size() * m, cfg_.attention_size);
    for (std::size_t li = cfg_.attention_layers; li-- > 0;) {
      LayerCache& lc = c.layers[li];
      Tensor2D ds = relu_backward(dx, lc.pre_relu);

      // Residual path.
      Tensor2D dinput;
      const std::string res_name = "l" + std::to_string(li) + "_res";
      if (has_tensor(inter, res_name)) {
        auto& res = inter.find(res_name);
        res.grad.add_(matmul_tn(lc.input, ds));
        dinput = matmul_nt(ds, res.value);
      } else {
        dinput = ds;
      }

      // Attention path.
      Tensor2D dconcat = dropout_backward(ds, lc.drop_mask);
      for (std::size_t h = 0; h < cfg_.heads; ++h) {
        Tensor2D dout_h = get_cols(dconcat, h * p, p);
        Tensor2D dq(lc.q[h].rows(), p, 0.0);
        Tensor2D dk(lc.k[h].rows(), p, 0.0);
        Tensor2D dv(lc.v[h].rows(), p, 0.0);
        for (std::size_t b = 0; b < c.batch.size(); ++b) {
          Tensor2D dob = block_rows(dout_h, b * m, m);
          Tensor2D ab = block_rows(lc.a[h], b * m, m);
          Tensor2D qb = block_rows(lc.q[h], b * m, m);
          Tensor2D kb = block_rows(lc.k[h], b * m, m);
          Tensor2D vb = block_rows(lc.v[h], b * m, m);

          Tensor2D da = matmul_nt(dob, vb);
          add_block_rows(dv, b * m, matmul_tn(ab, dob));
          Tensor2D dscores = softmax_rowwise_backward(da, ab);
          add_block_rows(dq, b * m, matmul(dscores, kb));
          add_block_rows(dk, b * m, matmul_tn(dscores, qb));
        }
        const std::string pre = "l" + std::to_string(li) + "_";
        auto& wq = inter.find(pre + "q" + std::to_string(h));
        auto& wk = inter.find(pre + "k" + std::to_string(h));
        auto& wv = inter.find(pre + "v" + std::to_string(h));
        wq.grad.add_(matmul_tn(lc.input, dq));
        wk.grad.add_(matmul_tn(lc.input, dk));
        wv.grad.add_(matmul_tn(lc.input, dv));
        dinput.add_(matmul_nt(dq, wq.value));
        dinput.add_(matmul_nt(dk, wk.value));
        dinput.add_(matmul_nt(dv, wv.value));
      }
      dx = std::move(dinput);
    }
    embed_backward(schema_, params_.group("embedding"), c.batch, dx);
  }

  ParameterSet& params() override { return params_; }
  const FeatureSchema& schema() const override { return schema_; }
  std::string kind() const override { return "autoint"; }

 private:
  struct LayerCache {
    Tensor2D input;
    std::vector<Tensor2D> q, k, v; // per head, B·M × p
    std::vector<Tensor2D> a;       // per head, B·M × M softmax rows
    Tensor2D concat;
    Tensor2D drop_mask;
    Tensor2D pre_relu;
  };
  struct Cache {
    SampleBatch batch;
    bool train = false;
    Tensor2D emb;
    std::vector<LayerCache> layers;
    Tensor2D flat, h_pre, h_act, h_drop, h_mask, probs;
  };

  static bool has_tensor(const ParameterGroup& g, const std::string& name) {
    for (const auto& t : g.tensors)
      if (t.name == name) return true;
    return false;
  }

  FeatureSchema schema_;
  AutoIntConfig cfg_;
  ParameterSet params_;
  Cache cache_;
  Tensor2D last_probs_;
};

} // namespace

Tensor2D embed_sample(const FeatureSchema& schema,
                      const std::vector<const Tensor2D*>& tables,
                      const Sample& sample) {
  if (tables.size() != schema.field_count())
    throw std::invalid_argument("embed_sample: table/field count mismatch");
  const std::size_t d = tables.empty() ? 0 : tables.front()->cols();
  Tensor2D out(schema.field_count(), d);
  std::size_t ni = 0, ci = 0, mi = 0;
  for (std::size_t fi = 0; fi < schema.fields.size(); ++fi) {
    const Tensor2D& table = *tables[fi];
    double* row = out.row(fi);
    switch (schema.fields[fi].kind) {
      case FieldKind::kNumeric: {
        const double x = sample.numeric.at(ni++);
        for (std::size_t j = 0; j < d; ++j) row[j] = table.at(0, j) * x;
        break;
      }
      case FieldKind::kCategorical: {
        const auto idx = static_cast<std::size_t>(sample.cat.at(ci++));
        if (idx >= table.rows())
          throw std::out_of_range("embed_sample: category index out of bounds");
        std::memcpy(row, table.row(idx), d * sizeof(double));
        break;
      }
      case FieldKind::kMultiValued: {
        const auto& idx = sample.multi.at(mi++);
        if (idx.empty())
          throw std::invalid_argument("embed_sample: empty multi-value set");
        const double scale = 1.0 / static_cast<double>(idx.size());
        for (int id : idx) {
          const auto r = static_cast<std::size_t>(id);
          if (r >= table.rows())
            throw std::out_of_range("embed_sample: multi index out of bounds");
          const double* src = table.row(r);
          for (std::size_t j = 0; j < d; ++j) row[j] += src[j] * scale;
        }
        break;
      }
    }
  }
  return out;
}

std::unique_ptr<CtrModel> make_ctr_model(const std::string& kind,
                                         const FeatureSchema& schema,
                                         const AutoIntConfig& config,
                                         std::uint64_t seed) {
  if (kind == "lr-raw") return std::make_unique<LogisticRaw>(schema, seed);
  if (kind == "lr-emb")
    return std::make_unique<LogisticEmbed>(schema, config.d, seed);
  if (kind == "autoint")
    return std::make_unique<AutoInt>(schema, config, seed);
  throw std::invalid_argument("unknown ctr model kind: " + kind);
}

std::vector<double> train_epochs(CtrModel& model,
                                 const std::vector<Sample>& samples,
                                 Optimizer& opt, std::size_t batch_size,
                                 std::size_t epochs, std::uint64_t seed) {
  if (samples.empty()) throw std::invalid_argument("train_epochs: no samples");
  if (batch_size == 0) throw std::invalid_argument("train_epochs: batch_size");

  std::vector<double> trace;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    auto eng = make_engine(derive_seed(seed, epoch));
    std::shuffle(order.begin(), order.end(), eng);

    double loss_sum = 0.0;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      SampleBatch batch;
      Tensor2D labels(end - start, 1);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&samples[order[i]]);
        labels.at(i - start, 0) = samples[order[i]].label;
      }
      const std::uint64_t dropout_seed =
          derive_seed(derive_seed(seed, 0x10000 + epoch), step);
      Tensor2D probs = model.forward(batch, true, dropout_seed);
      BceResult r = bce_loss(probs, labels);
      model.params().zero_grads();
      model.backward(r.dprobs);
      opt.step(model.params());
      loss_sum += r.loss * static_cast<double>(batch.size());
      ++step;
    }
    trace.push_back(loss_sum / static_cast<double>(samples.size()));
  }
  return trace;
}

std::vector<double> predict_probs(CtrModel& model,
                                  const std::vector<Sample>& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  constexpr std::size_t kChunk = 1024;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t end = std::min(samples.size(), start + kChunk);
    SampleBatch batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[i]);
    Tensor2D probs = model.forward(batch, false);
    for (std::size_t i = 0; i < probs.rows(); ++i) out.push_back(probs.at(i, 0));
  }
  return out;
}

void save_ctr_checkpoint(const CtrModel& model, const std::string& prefix) {
  save_parameters(model.params(), prefix + ".params");
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : model.schema().fields) {
    fields.push_back({{"name", f.name},
                      {"kind", static_cast<int>(f.kind)},
                      {"vocab_size", f.vocab.size()}});
  }
  nlohmann::json j{{"kind", model.kind()},
                   {"schema_hash", hex64(model.schema().content_hash())},
                   {"fields", fields}};
  std::ofstream f(prefix + ".schema.json", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + prefix + ".schema.json");
  f << j.dump(2) << '\n';
}

void load_ctr_checkpoint(CtrModel& model, const std::string& prefix) {
  std::ifstream f(prefix + ".schema.json");
  if (!f) throw std::runtime_error("cannot open " + prefix + ".schema.json");
  nlohmann::json j = nlohmann::json::parse(f);
  if (j.at("kind").get<std::string>() != model.kind())
    throw std::runtime_error("checkpoint model kind mismatch");
  if (j.at("schema_hash").get<std::string>() !=
      hex64(model.schema().content_hash()))
    throw std::runtime_error("checkpoint schema mismatch");
  ParameterSet loaded = load_parameters(prefix + ".params");
  if (!loaded.same_structure(model.params()))
    throw std::runtime_error("checkpoint parameter structure mismatch");
  for (std::size_t gi = 0; gi < loaded.groups().size(); ++gi) {
    auto& src = loaded.groups()[gi];
    auto& dst = model.params().groups()[gi];
    for (std::size_t ti = 0; ti < src.tensors.size(); ++ti)
      dst.tensors[ti].value = src.tensors[ti].value;
  }
}

} // namespace reco
