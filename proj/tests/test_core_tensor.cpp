#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "szgan/checkpoint.hpp"
#include "szgan/loss.hpp"
#include "szgan/optimizer.hpp"

using namespace szgan;
using gradcheck::random_tensor;

TEST_CASE("tensor shape checks") {
  CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.at({1, 2}) == 6.0);
  CHECK_THROWS_AS(t.at({2, 0}), DimensionError);
  CHECK_THROWS_AS(t.reshaped({4}), DimensionError);
  CHECK(t.reshaped({3, 2}).at({2, 0}) == 5.0);
  CHECK_THROWS_AS(t.grad(), StateError);

  std::vector<Tensor> parts{Tensor({2}, {1, 2}), Tensor({2}, {3, 4})};
  const Tensor b = stack(parts);
  CHECK(b.shape() == Shape{2, 2});
  CHECK(slice_sample(b, 1) == parts[1]);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  SUBCASE("halving a 16x56x112 input with 32 filters") {
    const auto g = conv_geometry(56, 112, {5, 5}, {2, 2});
    CHECK(g.out_h == 28);
    CHECK(g.out_w == 56);
  }
  SUBCASE("identity 1x1 kernel") {
    const Tensor x({1, 1, 1}, {3.5});
    const Tensor y = conv2d_forward(x, Tensor({1, 1, 1, 1}, {1.0}), Tensor({1}), {1, 1});
    CHECK(y == x);
  }
  SUBCASE("ones kernel counts in-bounds taps") {
    const Tensor x = Tensor::constant({1, 4, 4}, 1.0);
    const Tensor w = Tensor::constant({1, 1, 3, 3}, 1.0);
    const Tensor y = conv2d_forward(x, w, Tensor({1}), {2, 2});
    CHECK(y.shape() == Shape{1, 2, 2});
    CHECK(y == oracle::conv2d(x, w, Tensor({1}), {2, 2}));
    // padding total 1 goes to the bottom/right
    CHECK(y.at({0, 0, 0}) == 9.0);
    CHECK(y.at({0, 1, 1}) == 4.0);
  }
  SUBCASE("random shapes") {
    Rng rng(11);
    std::uniform_int_distribution<Index> c(1, 3), side(1, 11), k(1, 5), s(1, 3);
    for (int trial = 0; trial < 25; ++trial) {
      const Tensor x = random_tensor({c(rng), side(rng), side(rng)}, rng);
      const Tensor w = random_tensor({c(rng), x.dim(0), k(rng), k(rng)}, rng);
      const Tensor b = random_tensor({w.dim(0)}, rng);
      const Extent2 st{s(rng), s(rng)};
      const Tensor got = conv2d_forward(x, w, b, st);
      const Tensor want = oracle::conv2d(x, w, b, st);
      REQUIRE(got.shape() == want.shape());
      CHECK((got.data() - want.data()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("deconv2d is the adjoint of conv2d") {
  SUBCASE("dimension chain 64x7x14 -> 32 -> 16 -> n") {
    Tensor x({64, 7, 14});
    Tensor y = deconv2d_forward(x, Tensor({64, 32, 5, 5}), Tensor({32}), {2, 2});
    CHECK(y.shape() == Shape{32, 14, 28});
    y = deconv2d_forward(y, Tensor({32, 16, 5, 5}), Tensor({16}), {2, 2});
    CHECK(y.shape() == Shape{16, 28, 56});
    y = deconv2d_forward(y, Tensor({16, 6, 5, 5}), Tensor({6}), {2, 2});
    CHECK(y.shape() == Shape{6, 56, 112});
  }
  SUBCASE("zero input gives the broadcast bias") {
    const Tensor b({2}, {0.25, -1.5});
    Rng rng(3);
    const Tensor y = deconv2d_forward(Tensor({3, 2, 3}), random_tensor({3, 2, 3, 3}, rng), b, {2, 2});
    for (Index i = 0; i < y.size(); ++i) CHECK(y[i] == b[i / 24]);
  }
  SUBCASE("1x2x2 input, one 3x3 filter, stride 2") {
    Rng rng(5);
    const Tensor x = random_tensor({1, 2, 2}, rng), w = random_tensor({1, 1, 3, 3}, rng);
    const Tensor got = deconv2d_forward(x, w, Tensor({1}), {2, 2});
    const Tensor want = oracle::deconv2d(x, w, Tensor({1}), {2, 2});
    CHECK((got.data() - want.data()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("random shapes against the transposed matrix") {
    Rng rng(17);
    std::uniform_int_distribution<Index> c(1, 3), side(1, 5), k(1, 5), s(1, 3);
    for (int trial = 0; trial < 15; ++trial) {
      const Tensor x = random_tensor({c(rng), side(rng), side(rng)}, rng);
      const Tensor w = random_tensor({x.dim(0), c(rng), k(rng), k(rng)}, rng);
      const Tensor b = random_tensor({w.dim(1)}, rng);
      const Extent2 st{s(rng), s(rng)};
      const Tensor got = deconv2d_forward(x, w, b, st);
      const Tensor want = oracle::deconv2d(x, w, b, st);
      REQUIRE(got.shape() == want.shape());
      CHECK((got.data() - want.data()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("inner-product identity <conv(u), v> == <u, deconv(v)>") {
    Rng rng(23);
    const Tensor u = random_tensor({2, 8, 10}, rng), w = random_tensor({3, 2, 5, 5}, rng);
    const Tensor v = random_tensor({3, 4, 5}, rng);
    const Tensor cu = conv2d_forward(u, w, Tensor({3}), {2, 2});
    const Tensor dv = deconv2d_forward(v, w, Tensor({2}), {2, 2});
    CHECK(cu.data().dot(v.data()) == doctest::Approx(u.data().dot(dv.data())).epsilon(1e-12));
  }
}

TEST_CASE("dense forward") {
  CHECK(dense_forward(Tensor({100}), Tensor({6272, 100}), Tensor({6272})).shape() == Shape{6272});
  const Tensor x({3}, {1, -2, 0.5});
  const Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(dense_forward(x, eye, Tensor({3})) == x);
  const Tensor w({2, 3}, {1, 2, 3, -1, 0, 4});
  const Tensor y = dense_forward(x, w, Tensor({2}, {0.5, 0}));
  CHECK(y[0] == doctest::Approx(1 * 1 + 2 * -2 + 3 * 0.5 + 0.5));
  CHECK(y[1] == doctest::Approx(-1 * 1 + 0 + 4 * 0.5));
}

TEST_CASE("activations") {
  const Tensor x({1, 4}, {-2, -0.5, 0.5, 2});
  CHECK(relu(x)[0] == 0.0);
  CHECK(leaky_relu(x, 0.2)[0] == doctest::Approx(-0.4));
  CHECK(sigmoid(Tensor({1}, {0.0}))[0] == 0.5);
  CHECK(tanh(x)[3] == doctest::Approx(std::tanh(2.0)));
  const Tensor p = softmax(Tensor({2, 3}, {1, 2, 3, 1000, 1000, 1000}));
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[4] == doctest::Approx(1.0 / 3));
}

TEST_CASE("dropout") {
  Rng rng(1);
  const Tensor x = Tensor::constant({100000}, 1.0);
  CHECK(dropout_forward(x, 0.7, Mode::infer, rng) == x);
  CHECK(dropout_forward(x, 0.0, Mode::train, rng) == x);
  const Tensor y = dropout_forward(x, 0.5, Mode::train, rng);
  const double mean = y.data().mean();
  CHECK(mean >= 0.98);
  CHECK(mean <= 1.02);
  CHECK_THROWS(LayerSpec::dropout(1.0).validate());
}

TEST_CASE("finite-difference gradients for every layer kind") {
  Rng rng(101);
  for (LayerKind kind : gradcheck::all_kinds) {
    CAPTURE(to_string(kind));
    for (int shape = 0; shape < 5; ++shape) {
      auto [net, in] = gradcheck::network_for(kind, rng);
      Parameters params = net.init_parameters(std::uint64_t(shape) + 1);
      gradcheck::randomize(params, rng);
      const Tensor x = random_tensor(in, rng);
      const auto rep = gradcheck::run(net, params, x, 1000 + std::uint64_t(shape));
      CAPTURE(rep.worst_at);
      CHECK(rep.checked >= 20);
      CHECK(rep.worst < 1e-4);
    }
  }
}

TEST_CASE("backward special cases") {
  Sequential net({3}, {LayerSpec::dense("fc", 1)});
  Parameters params = net.init_parameters(4);
  const Tensor x({1, 3}, {0.3, -1.2, 2.0});
  net.forward(params, x, Mode::train);
  net.backward(params, Tensor({1, 1}, {1.0}));
  for (Index i = 0; i < 3; ++i) CHECK(params.at("fc").weight.grad()[i] == x[i]);

  Sequential conv({2, 6, 6}, {LayerSpec::conv2d("c", 3, {3, 3}, {2, 2}), LayerSpec::activation(LayerKind::tanh),
                              LayerSpec::flatten(), LayerSpec::dense("d", 2)});
  Parameters p2 = conv.init_parameters(9, 0.3);
  Rng rng(2);
  conv.forward(p2, random_tensor({2, 2, 6, 6}, rng), Mode::train);
  conv.backward(p2, Tensor({2, 2}));
  for (const auto& [name, lp] : p2.layers) {
    CHECK(lp.weight.grad().cwiseAbs().maxCoeff() == 0.0);
    CHECK(lp.bias.grad().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("frozen layers receive no gradient and are skipped by the optimizer") {
  Sequential net({4}, {LayerSpec::dense("a", 3), LayerSpec::activation(LayerKind::relu), LayerSpec::dense("b", 2)});
  Parameters p = net.init_parameters(1, 0.5);
  p.at("a").trainable = false;
  const Parameters before = p;
  Rng rng(8);
  net.forward(p, random_tensor({2, 4}, rng), Mode::train);
  net.backward(p, Tensor::constant({2, 2}, 1.0), {true, false});
  OptimizerState opt;
  optimizer_step(opt, p);
  CHECK(p.at("a").weight == before.at("a").weight);
  CHECK_FALSE(p.at("b").weight == before.at("b").weight);
}

TEST_CASE("losses") {
  const Loss l = bce_with_logits(Tensor({2, 1}, {0.0, 0.0}), 1.0);
  CHECK(l.value == doctest::Approx(std::log(2.0)));
  CHECK(l.grad[0] == doctest::Approx(-0.25));
  CHECK(softplus(1000.0) == doctest::Approx(1000.0));
  CHECK(std::isfinite(softplus(-1000.0)));

  const Tensor probs({2, 2}, {0.9, 0.1, 0.2, 0.8});
  const std::vector<int> labels{0, 1};
  const Loss ce = cross_entropy(probs, labels);
  CHECK(ce.value == doctest::Approx(-(std::log(0.9) + std::log(0.8)) / 2));
}

TEST_CASE("optimizer steps") {
  auto one_param = [](double w, double g) {
    Parameters p;
    LayerParams lp{Tensor({1}, {w}), Tensor({1}, {0.0}), true};
    lp.weight.ensure_grad()[0] = g;
    lp.bias.ensure_grad()[0] = 0.0;
    p.layers.emplace("x", std::move(lp));
    return p;
  };
  SUBCASE("sgd") {
    Parameters p = one_param(1.0, 1.0);
    OptimizerState s(OptimizerSettings{Algorithm::sgd, 0.1});
    optimizer_step(s, p);
    CHECK(p.at("x").weight[0] == doctest::Approx(0.9));
  }
  SUBCASE("first adam step in closed form") {
    const double w = 0.7, g = -0.3, lr = 2e-4, b1 = 0.5, b2 = 0.999, eps = 1e-8;
    Parameters p = one_param(w, g);
    OptimizerState s(OptimizerSettings{Algorithm::adam, lr, b1, b2, eps});
    optimizer_step(s, p);
    const double m_hat = (1 - b1) * g / (1 - b1), v_hat = (1 - b2) * g * g / (1 - b2);
    CHECK(p.at("x").weight[0] == doctest::Approx(w - lr * m_hat / (std::sqrt(v_hat) + eps)).epsilon(1e-14));
  }
  SUBCASE("second adam step in closed form") {
    const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    Parameters p = one_param(1.0, 0.5);
    OptimizerState s(OptimizerSettings{Algorithm::adam, lr, b1, b2, eps});
    optimizer_step(s, p);
    const double w1 = p.at("x").weight[0];
    p.at("x").weight.ensure_grad()[0] = -0.2;
    p.at("x").bias.ensure_grad()[0] = 0.0;
    optimizer_step(s, p);
    const double m = b1 * (1 - b1) * 0.5 + (1 - b1) * -0.2;
    const double v = b2 * (1 - b2) * 0.25 + (1 - b2) * 0.04;
    const double expect = w1 - lr * (m / (1 - b1 * b1)) / (std::sqrt(v / (1 - b2 * b2)) + eps);
    CHECK(p.at("x").weight[0] == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    for (Algorithm a : {Algorithm::sgd, Algorithm::adam}) {
      Parameters p = one_param(0.42, 0.0);
      OptimizerState s(OptimizerSettings{a, 0.1});
      optimizer_step(s, p);
      CHECK(p.at("x").weight[0] == 0.42);
    }
  }
  SUBCASE("missing gradient is a state error") {
    Parameters p = one_param(1.0, 1.0);
    p.at("x").weight.clear_grad();
    OptimizerState s;
    CHECK_THROWS_AS(optimizer_step(s, p), StateError);
  }
}

TEST_CASE("network shape algebra and composition") {
  Sequential net({2, 8, 8}, {LayerSpec::conv2d("c", 4, {3, 3}, {2, 2}), LayerSpec::flatten()});
  CHECK(net.output_shape() == Shape{64});
  CHECK(net.parameter_count() == 4 * 2 * 9 + 4);
  const Sequential tail({64}, {LayerSpec::dense("d", 2)});
  const Sequential whole = net.then(tail);
  CHECK(whole.layers().size() == 3);
  CHECK(whole.head_layers(2).output_shape() == Shape{64});
  CHECK_THROWS_AS(net.then(Sequential({10}, {LayerSpec::dense("d", 2)})), DimensionError);
  CHECK_THROWS_AS(Sequential({7}, {LayerSpec::reshape({2, 3})}), DimensionError);

  const Parameters p = whole.init_parameters(3);
  Rng rng(1);
  const Tensor x = random_tensor({3, 2, 8, 8}, rng);
  CHECK(whole.infer(p, x) == whole.infer(p, x));
  CHECK(whole.infer(p, x).shape() == Shape{3, 2});
}

TEST_CASE("checkpoint container round trip") {
  Sequential net({3}, {LayerSpec::dense("a", 4), LayerSpec::dense("b", 2)});
  Checkpoint c{CheckpointRole::trunk, net.init_parameters(77, 0.3), {{"note", "x"}}};
  c.params.at("a").trainable = false;
  const std::string bytes = encode_checkpoint(c);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.role == CheckpointRole::trunk);
  CHECK(back.params.same_values(c.params));
  CHECK_FALSE(back.params.at("a").trainable);
  CHECK(back.params.rng_seed == 77);
  CHECK(back.meta["note"] == "x");
  CHECK(encode_checkpoint(back) == bytes);
  CHECK(fingerprint(back.params) == fingerprint(c.params));

  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), ParseError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), ParseError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/file.szg"), MissingArtifactError);
}

TEST_CASE("derived seeds differ by tag") {
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
  CHECK(derive_seed(5, "x") == derive_seed(5, "x"));
}
