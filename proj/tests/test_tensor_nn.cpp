#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "reco/gradcheck.hpp"
#include "reco/nn.hpp"
#include "reco/optim.hpp"
#include "reco/params.hpp"
#include "reco/rng.hpp"
#include "reco/serial_ref.hpp"
#include "reco/tensor.hpp"
#include "reco/threading.hpp"

using namespace reco;

namespace {

Tensor2D random_tensor(std::size_t r, std::size_t c, std::uint64_t seed,
                       double lo = -1.0, double hi = 1.0) {
  Tensor2D t(r, c);
  auto eng = make_engine(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = u(eng);
  return t;
}

double max_abs_diff(const Tensor2D& a, const Tensor2D& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

} // namespace

TEST_CASE("matmul identity and scalar") {
  Tensor2D eye(3, 3);
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  Tensor2D x = random_tensor(3, 4, 7);
  CHECK(max_abs_diff(matmul(eye, x), x) == 0.0);

  Tensor2D a(1, 1), b(1, 1);
  a.at(0, 0) = 2.0;
  b.at(0, 0) = 3.0;
  CHECK(matmul(a, b).at(0, 0) == 6.0);
}

TEST_CASE("matmul matches naive triple loop") {
  Tensor2D a = random_tensor(4, 5, 11);
  Tensor2D b = random_tensor(5, 3, 13);
  CHECK(max_abs_diff(matmul(a, b), serial::matmul_naive(a, b)) <= 1e-12);

  // Large enough to trip the parallel path.
  Tensor2D big_a = random_tensor(64, 48, 17);
  Tensor2D big_b = random_tensor(48, 32, 19);
  CHECK(max_abs_diff(matmul(big_a, big_b),
                     serial::matmul_naive(big_a, big_b)) == 0.0);
}

TEST_CASE("matmul is bit-identical across thread counts") {
  Tensor2D a = random_tensor(96, 64, 23);
  Tensor2D b = random_tensor(64, 80, 29);
  set_num_threads(1);
  Tensor2D c1 = matmul(a, b);
  set_num_threads(4);
  Tensor2D c4 = matmul(a, b);
  set_num_threads(0);
  CHECK(max_abs_diff(c1, c4) == 0.0);
}

TEST_CASE("matmul_tn and matmul_nt agree with explicit transpose") {
  Tensor2D a = random_tensor(6, 4, 31);
  Tensor2D b = random_tensor(6, 5, 37);
  CHECK(max_abs_diff(matmul_tn(a, b),
                     serial::matmul_naive(transpose(a), b)) <= 1e-12);
  Tensor2D c = random_tensor(7, 4, 41); // against a as 6×4: c·aᵀ is 7×6
  CHECK(max_abs_diff(matmul_nt(c, a),
                     serial::matmul_naive(c, transpose(a))) <= 1e-12);
}

TEST_CASE("matmul rejects mismatched shapes") {
  Tensor2D a(2, 3), b(4, 2);
  CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("relu and sigmoid basics") {
  Tensor2D x(1, 3);
  x.at(0, 0) = -1.0;
  x.at(0, 1) = 0.0;
  x.at(0, 2) = 2.0;
  Tensor2D y = relu_forward(x);
  CHECK(y.at(0, 0) == 0.0);
  CHECK(y.at(0, 1) == 0.0);
  CHECK(y.at(0, 2) == 2.0);

  Tensor2D z(1, 1);
  CHECK(sigmoid_forward(z).at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  Tensor2D s = sigmoid_forward(random_tensor(5, 5, 43, -10.0, 10.0));
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.data()[i] > 0.0);
    CHECK(s.data()[i] < 1.0);
  }
}

TEST_CASE("softmax rows sum to one") {
  Tensor2D x = random_tensor(8, 6, 47, -5.0, 5.0);
  Tensor2D y = softmax_rowwise(x);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) s += y.at(i, j);
    CHECK(std::fabs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("layer backward passes match central differences") {
  // Scalar probe loss L = Σ w_ij · layer(x)_ij with fixed random weights, so
  // dL/dx comes straight out of the layer backward with dy = w.
  auto probe = [](auto&& fwd, auto&& bwd, const Tensor2D& x0) {
    Tensor2D w = random_tensor(x0.rows(), x0.cols(), 101);
    auto loss_at = [&](const Tensor2D& x) {
      Tensor2D y = fwd(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i)
        s += w.data()[i] * y.data()[i];
      return s;
    };
    Tensor2D analytic = bwd(w, x0);
    const double h = 1e-5;
    double worst = 0.0;
    Tensor2D x = x0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x.data()[i];
      x.data()[i] = orig + h;
      const double lp = loss_at(x);
      x.data()[i] = orig - h;
      const double lm = loss_at(x);
      x.data()[i] = orig;
      const double num = (lp - lm) / (2.0 * h);
      const double a = analytic.data()[i];
      worst = std::max(worst, std::fabs(a - num) /
                                  std::max({std::fabs(a), std::fabs(num), 1e-8}));
    }
    return worst;
  };

  Tensor2D x = random_tensor(4, 5, 103, 0.1, 2.0); // keep relu away from kink
  CHECK(probe([](const Tensor2D& t) { return relu_forward(t); },
              [](const Tensor2D& dy, const Tensor2D& t) {
                return relu_backward(dy, t);
              },
              x) <= 1e-6);
  Tensor2D x2 = random_tensor(4, 5, 107, -2.0, 2.0);
  CHECK(probe([](const Tensor2D& t) { return sigmoid_forward(t); },
              [](const Tensor2D& dy, const Tensor2D& t) {
                return sigmoid_backward(dy, sigmoid_forward(t));
              },
              x2) <= 1e-6);
  CHECK(probe([](const Tensor2D& t) { return softmax_rowwise(t); },
              [](const Tensor2D& dy, const Tensor2D& t) {
                return softmax_rowwise_backward(dy, softmax_rowwise(t));
              },
              x2) <= 1e-6);
}

TEST_CASE("affine backward matches central differences") {
  Tensor2D x = random_tensor(3, 4, 109);
  Tensor2D w = random_tensor(4, 2, 113);
  Tensor2D b = random_tensor(1, 2, 127);
  Tensor2D dy = random_tensor(3, 2, 131);

  auto loss = [&](const Tensor2D& xx, const Tensor2D& ww, const Tensor2D& bb) {
    Tensor2D y = affine_forward(xx, ww, bb);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += dy.data()[i] * y.data()[i];
    return s;
  };

  AffineGrads g = affine_backward(dy, x, w);
  const double h = 1e-6;
  auto check_block = [&](Tensor2D& target, const Tensor2D& analytic,
                         auto&& eval) {
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double orig = target.data()[i];
      target.data()[i] = orig + h;
      const double lp = eval();
      target.data()[i] = orig - h;
      const double lm = eval();
      target.data()[i] = orig;
      const double num = (lp - lm) / (2.0 * h);
      CHECK(std::fabs(analytic.data()[i] - num) <= 1e-6);
    }
  };
  check_block(x, g.dx, [&] { return loss(x, w, b); });
  check_block(w, g.dw, [&] { return loss(x, w, b); });
  check_block(b, g.db, [&] { return loss(x, w, b); });
}

TEST_CASE("dropout semantics") {
  Tensor2D x = random_tensor(20, 20, 137, 0.5, 1.5);
  Tensor2D mask;
  Tensor2D eval_out = dropout_forward(x, 0.3, false, 1, &mask);
  CHECK(max_abs_diff(eval_out, x) == 0.0);

  Tensor2D train_out = dropout_forward(x, 0.3, true, 42, &mask);
  const double keep = 1.0 / 0.7;
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double m = mask.data()[i];
    CHECK((m == 0.0 || m == doctest::Approx(keep).epsilon(1e-12)));
    if (m == 0.0) {
      CHECK(train_out.data()[i] == 0.0);
      ++zeros;
    } else {
      CHECK(train_out.data()[i] ==
            doctest::Approx(x.data()[i] * keep).epsilon(1e-12));
    }
  }
  // 400 Bernoulli(0.3) draws: expect ~120 dropped.
  CHECK(zeros > 60);
  CHECK(zeros < 200);

  Tensor2D again = dropout_forward(x, 0.3, true, 42, nullptr);
  CHECK(max_abs_diff(train_out, again) == 0.0);

  CHECK(max_abs_diff(dropout_forward(x, 0.0, true, 7, nullptr), x) == 0.0);
  CHECK_THROWS_AS(dropout_forward(x, 1.0, true, 7, nullptr),
                  std::invalid_argument);
}

TEST_CASE("bce loss closed forms and gradient") {
  Tensor2D p(1, 1), y(1, 1);
  p.at(0, 0) = 1.0 - 1e-7;
  y.at(0, 0) = 1.0;
  CHECK(bce_loss(p, y).loss == doctest::Approx(0.0).epsilon(1e-6));

  p.at(0, 0) = 0.5;
  CHECK(bce_loss(p, y).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor2D probs = random_tensor(16, 1, 139, 0.05, 0.95);
  Tensor2D labels(16, 1);
  auto eng = make_engine(149);
  std::uniform_int_distribution<int> coin(0, 1);
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels.data()[i] = static_cast<double>(coin(eng));

  BceResult r = bce_loss(probs, labels);
  const double h = 1e-7;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double orig = probs.data()[i];
    probs.data()[i] = orig + h;
    const double lp = bce_loss(probs, labels).loss;
    probs.data()[i] = orig - h;
    const double lm = bce_loss(probs, labels).loss;
    probs.data()[i] = orig;
    const double num = (lp - lm) / (2.0 * h);
    const double a = r.dprobs.data()[i];
    CHECK(std::fabs(a - num) / std::max({std::fabs(a), std::fabs(num), 1e-8}) <=
          1e-6);
  }

  Tensor2D empty(0, 0);
  CHECK_THROWS(bce_loss(empty, empty));
}

TEST_CASE("sgd and adam steps") {
  ParameterSet ps;
  auto& g = ps.add_group("output");
  Tensor2D w(1, 1);
  w.at(0, 0) = 1.0;
  g.add("w", w);
  g.find("w").grad.at(0, 0) = 0.5;
  Sgd(0.1).step(ps);
  CHECK(ps.group("output").find("w").value.at(0, 0) ==
        doctest::Approx(0.95).epsilon(1e-15));

  // Bias-corrected first Adam step moves by ≈ lr whatever the gradient scale.
  for (double scale : {1e-4, 1.0, 1e4}) {
    ParameterSet q;
    auto& qg = q.add_group("output");
    qg.add("w", Tensor2D(1, 1, 3.0));
    qg.find("w").grad.at(0, 0) = scale;
    Adam opt(1e-3);
    opt.step(q);
    CHECK(std::fabs(q.group("output").find("w").value.at(0, 0) - 3.0) ==
          doctest::Approx(1e-3).epsilon(1e-3));
  }

  // Descent on f(w) = w²: gradient 2w.
  ParameterSet q;
  auto& qg = q.add_group("output");
  qg.add("w", Tensor2D(1, 1, 1.0));
  Adam opt(0.1);
  for (int i = 0; i < 100; ++i) {
    auto& t = q.group("output").find("w");
    t.grad.at(0, 0) = 2.0 * t.value.at(0, 0);
    opt.step(q);
  }
  CHECK(std::fabs(q.group("output").find("w").value.at(0, 0)) < 0.1);
}

TEST_CASE("gradient_check on a linear model and a corrupted gradient") {
  // L(w) = Σ c_i w_i is linear, so central differences are exact up to fp.
  ParameterSet ps;
  auto& g = ps.add_group("output");
  g.add("w", random_tensor(4, 4, 151));
  Tensor2D c = random_tensor(4, 4, 157);

  auto loss_fn = [&] {
    double s = 0.0;
    const auto& w = ps.group("output").find("w").value;
    for (std::size_t i = 0; i < w.size(); ++i)
      s += c.data()[i] * w.data()[i];
    return s;
  };
  auto grad_fn = [&] {
    auto& t = ps.group("output").find("w");
    for (std::size_t i = 0; i < t.grad.size(); ++i)
      t.grad.data()[i] = c.data()[i];
  };
  GradCheckReport rep = gradient_check(ps, loss_fn, grad_fn, 1);
  CHECK(rep.coords_checked == 16);
  CHECK(rep.max_rel_err <= 1e-9);

  auto bad_grad = [&] {
    grad_fn();
    ps.group("output").find("w").grad.at(0, 0) += 1.0;
  };
  CHECK_FALSE(gradient_check(ps, loss_fn, bad_grad, 1).ok(1e-4));
}

TEST_CASE("parameter set structure, counting and serialization") {
  ParameterSet ps;
  auto& e = ps.add_group("embedding");
  e.add("table", random_tensor(5, 4, 163));
  auto& o = ps.add_group("output");
  o.add("?w", random_tensor(4, 1, 167));
  o.add("b", random_tensor(1, 1, 173));

  CHECK(ps.param_count() == 25);
  CHECK(ps.param_count({"embedding"}) == 20);
  CHECK(ps.param_count({"output"}) == 5);
  CHECK(ps.param_count({"embedding", "output"}) == 25);

  std::string bytes = serialize_parameters(ps);
  CHECK(serialize_parameters(ps) == bytes); // byte-stable
  ParameterSet back = deserialize_parameters(bytes);
  CHECK(back.same_structure(ps));
  CHECK(max_abs_diff(back.group("embedding").find("table").value,
                     ps.group("embedding").find("table").value) == 0.0);

  ParameterSet other;
  other.add_group("embedding").add("table", Tensor2D(5, 3));
  CHECK_FALSE(other.same_structure(ps));

  CHECK_THROWS_AS((void)ps.group("nope"), std::out_of_range);
  CHECK_THROWS_AS(ps.add_group("output"), std::invalid_argument);
}

TEST_CASE("check_finite rejects NaN") {
  Tensor2D t(2, 2, 1.0);
  t.at(1, 1) = std::nan("");
  CHECK_THROWS_AS(check_finite(t, "t"), std::runtime_error);
}

TEST_CASE("seed derivation is order-free and spreads") {
  CHECK(derive_seed(42, 1) != derive_seed(42, 2));
  CHECK(derive_seed(42, 1) == derive_seed(42, 1));
  CHECK(derive_seed(42, 1) != derive_seed(43, 1));
}
