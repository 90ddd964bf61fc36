#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mdpt/numcore/finite_diff.hpp"
#include "mdpt/numcore/optimizer.hpp"
#include "mdpt/numcore/tape.hpp"
#include "mdpt/numcore/tensor.hpp"

using namespace mdpt::numcore;

namespace {

// Small random MLP used to cross-check backprop against finite differences:
// per row, loss contribution = sum(gelu(x W1 + b1) W2)^2 summed via square.
struct ToyMlp {
  ParameterSet params;
  Tensor input;

  static ToyMlp make(size_t in_dim, size_t hid, size_t out_dim, size_t rows, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 0.5);
    auto rand_tensor = [&](std::vector<size_t> shape) {
      Tensor t(std::move(shape));
      for (auto& v : t.values()) v = dist(rng);
      return t;
    };
    ToyMlp m;
    m.params["w1"] = rand_tensor({in_dim, hid});
    m.params["b1"] = rand_tensor({hid});
    m.params["w2"] = rand_tensor({hid, out_dim});
    m.params["b2"] = rand_tensor({out_dim});
    m.input = rand_tensor({rows, in_dim});
    return m;
  }

  static double loss(const ParameterSet& p, const Tensor& input) {
    Tape tape;
    Value x = tape.input(input);
    Value h = tape.gelu(tape.add_bias(tape.matmul(x, tape.param("w1", p.at("w1"))),
                                      tape.param("b1", p.at("b1"))));
    Value y = tape.add_bias(tape.matmul(h, tape.param("w2", p.at("w2"))),
                            tape.param("b2", p.at("b2")));
    return tape.scalar(tape.sum_all(tape.square(y)));
  }

  GradientMap backprop_grads() const {
    Tape tape;
    Value x = tape.input(input);
    Value h = tape.gelu(tape.add_bias(tape.matmul(x, tape.param("w1", params.at("w1"))),
                                      tape.param("b1", params.at("b1"))));
    Value y = tape.add_bias(tape.matmul(h, tape.param("w2", params.at("w2"))),
                            tape.param("b2", params.at("b2")));
    Value l = tape.sum_all(tape.square(y));
    Tape& t = const_cast<Tape&>(tape);
    return t.backprop(l);
  }
};

double max_rel_err(const GradientMap& got, const GradientMap& want) {
  double worst = 0.0;
  for (const auto& [name, g] : want) {
    const Tensor& h = got.at(name);
    for (size_t i = 0; i < g.size(); ++i) {
      const double denom = std::max({std::fabs(g[i]), std::fabs(h[i]), 1e-8});
      worst = std::max(worst, std::fabs(g[i] - h[i]) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("backprop: f(theta)=theta^2 at theta=3 gives 6") {
  ParameterSet p;
  p["theta"] = Tensor::scalar(3.0);
  Tape tape;
  Value th = tape.param("theta", p["theta"]);
  Value loss = tape.square(th);
  auto grads = tape.backprop(loss);
  CHECK(grads.at("theta")[0] == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(tape.released());
}

TEST_CASE("backprop: constant loss gives exactly zero gradient") {
  ParameterSet p;
  p["theta"] = Tensor::scalar(1.5);
  Tape tape;
  Value th = tape.param("theta", p["theta"]);
  Value zero = tape.scale(tape.square(th), 0.0);
  Value loss = tape.add(zero, tape.input(Tensor::scalar(4.2)));
  auto grads = tape.backprop(loss);
  CHECK(grads.at("theta")[0] == 0.0);
}

TEST_CASE("backprop: unreached parameters are absent from the gradient map") {
  ParameterSet p;
  p["used"] = Tensor::scalar(2.0);
  p["unused"] = Tensor::scalar(5.0);
  Tape tape;
  Value u = tape.param("used", p["used"]);
  tape.param("unused", p["unused"]);
  auto grads = tape.backprop(tape.square(u));
  CHECK(grads.size() == 1);
  CHECK(grads.count("used") == 1);
}

TEST_CASE("backprop matches finite differences on a toy MLP") {
  auto mlp = ToyMlp::make(5, 7, 3, 4, 42);
  auto grads = mlp.backprop_grads();
  auto fd = finite_diff_grad([&](const ParameterSet& p) { return ToyMlp::loss(p, mlp.input); },
                             mlp.params, 1e-5);
  CHECK(max_rel_err(grads, fd) <= 1e-4);
}

TEST_CASE("gradient of a sum of losses equals the sum of gradients") {
  auto a = ToyMlp::make(4, 6, 2, 3, 7);
  auto b = a;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> dist(0.0, 0.5);
  for (auto& v : b.input.values()) v = dist(rng);

  Tape joint;
  auto forward = [&](Tape& tape, const Tensor& input) {
    Value x = tape.input(input);
    Value h = tape.gelu(tape.add_bias(tape.matmul(x, tape.param("w1", a.params.at("w1"))),
                                      tape.param("b1", a.params.at("b1"))));
    Value y = tape.add_bias(tape.matmul(h, tape.param("w2", a.params.at("w2"))),
                            tape.param("b2", a.params.at("b2")));
    return tape.sum_all(tape.square(y));
  };
  Value sum = joint.add(forward(joint, a.input), forward(joint, b.input));
  auto g_joint = joint.backprop(sum);

  Tape ta, tb;
  auto ga = ta.backprop(forward(ta, a.input));
  auto gb = tb.backprop(forward(tb, b.input));
  for (const auto& [name, g] : g_joint) {
    for (size_t i = 0; i < g.size(); ++i)
      CHECK(g[i] == doctest::Approx(ga.at(name)[i] + gb.at(name)[i]).epsilon(1e-10));
  }
}

TEST_CASE("backprop rejects non-scalar loss") {
  ParameterSet p;
  p["w"] = Tensor({2, 2}, {1, 2, 3, 4});
  Tape tape;
  Value w = tape.param("w", p["w"]);
  CHECK_THROWS_AS((void)tape.backprop(w), std::invalid_argument);
}

TEST_CASE("non-finite values are rejected at the producing op") {
  Tape tape;
  Tensor bad({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS((void)tape.input(bad), std::runtime_error);

  // overflow produced mid-graph
  Tape t2;
  Value big = t2.input(Tensor({1}, {1e308}));
  CHECK_THROWS_AS((void)t2.square(big), std::runtime_error);
}

TEST_CASE("tape cannot be reused after backprop") {
  Tape tape;
  Value x = tape.param("x", Tensor::scalar(1.0));
  (void)tape.backprop(tape.square(x));
  CHECK_THROWS_AS((void)tape.input(Tensor::scalar(1.0)), std::runtime_error);
}

TEST_CASE("finite_diff: cube at 2 is 12") {
  ParameterSet p;
  p["x"] = Tensor::scalar(2.0);
  auto f = [](const ParameterSet& q) {
    const double x = q.at("x")[0];
    return x * x * x;
  };
  auto g = finite_diff_grad(f, p, 1e-5);
  CHECK(g.at("x")[0] == doctest::Approx(12.0).epsilon(1e-6));
}

TEST_CASE("finite_diff: constant function gives zeros") {
  ParameterSet p;
  p["x"] = Tensor({3}, {1, 2, 3});
  auto g = finite_diff_grad([](const ParameterSet&) { return 3.25; }, p, 1e-5);
  for (size_t i = 0; i < 3; ++i) CHECK(g.at("x")[i] == 0.0);
}

TEST_CASE("finite_diff rejects non-positive epsilon") {
  ParameterSet p;
  p["x"] = Tensor::scalar(1.0);
  auto f = [](const ParameterSet&) { return 0.0; };
  CHECK_THROWS_AS((void)finite_diff_grad(f, p, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)finite_diff_grad(f, p, -1e-5), std::invalid_argument);
}

TEST_CASE("finite_diff agrees with backprop on a ~100 parameter model") {
  auto mlp = ToyMlp::make(6, 8, 4, 5, 1234);  // 6*8+8+8*4+4 = 92 parameters
  auto grads = mlp.backprop_grads();
  auto fd = finite_diff_grad([&](const ParameterSet& p) { return ToyMlp::loss(p, mlp.input); },
                             mlp.params, 1e-5);
  CHECK(max_rel_err(grads, fd) <= 1e-4);
}

TEST_CASE("attention and layer_norm gradients match finite differences") {
  const size_t B = 2, S = 3, H = 4, heads = 2;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> dist(0.0, 0.7);
  ParameterSet p;
  auto rand_tensor = [&](std::vector<size_t> shape) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = dist(rng);
    return t;
  };
  p["wq"] = rand_tensor({H, H});
  p["wk"] = rand_tensor({H, H});
  p["wv"] = rand_tensor({H, H});
  p["gain"] = rand_tensor({H});
  p["bias"] = rand_tensor({H});
  Tensor x = rand_tensor({B * S, H});
  std::vector<uint8_t> key_valid = {1, 1, 0, 1, 1, 1};  // one padded key in batch 0

  auto forward = [&](const ParameterSet& q) {
    Tape tape;
    Value xv = tape.input(x);
    Value h = tape.layer_norm(xv, tape.param("gain", q.at("gain")),
                              tape.param("bias", q.at("bias")), 1e-5);
    Value qv = tape.matmul(h, tape.param("wq", q.at("wq")));
    Value kv = tape.matmul(h, tape.param("wk", q.at("wk")));
    Value vv = tape.matmul(h, tape.param("wv", q.at("wv")));
    Value att = tape.attention(qv, kv, vv, AttentionShape{B, S, heads}, key_valid);
    return tape.scalar(tape.sum_all(tape.square(att)));
  };

  Tape tape;
  Value xv = tape.input(x);
  Value h = tape.layer_norm(xv, tape.param("gain", p.at("gain")),
                            tape.param("bias", p.at("bias")), 1e-5);
  Value qv = tape.matmul(h, tape.param("wq", p.at("wq")));
  Value kv = tape.matmul(h, tape.param("wk", p.at("wk")));
  Value vv = tape.matmul(h, tape.param("wv", p.at("wv")));
  Value att = tape.attention(qv, kv, vv, AttentionShape{B, S, heads}, key_valid);
  auto grads = tape.backprop(tape.sum_all(tape.square(att)));

  auto fd = finite_diff_grad([&](const ParameterSet& q) { return forward(q); }, p, 1e-5);
  CHECK(max_rel_err(grads, fd) <= 1e-4);
}

TEST_CASE("masked_cross_entropy gradients match finite differences") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist(0.0, 1.0);
  ParameterSet p;
  Tensor logits_w({4, 6});
  for (auto& v : logits_w.values()) v = dist(rng);
  p["w"] = logits_w;
  std::vector<int32_t> targets = {2, 5};
  std::vector<size_t> rows = {0, 3};

  auto forward = [&](const ParameterSet& q) {
    Tape tape;
    Value w = tape.param("w", q.at("w"));
    return tape.scalar(tape.masked_cross_entropy(w, targets, rows));
  };
  Tape tape;
  Value w = tape.param("w", p.at("w"));
  auto grads = tape.backprop(tape.masked_cross_entropy(w, targets, rows));
  auto fd = finite_diff_grad([&](const ParameterSet& q) { return forward(q); }, p, 1e-6);
  CHECK(max_rel_err(grads, fd) <= 1e-4);
}

TEST_CASE("masked_cross_entropy rejects an empty target set") {
  Tape tape;
  Value w = tape.input(Tensor({2, 3}, {0, 0, 0, 0, 0, 0}));
  CHECK_THROWS_AS((void)tape.masked_cross_entropy(w, {}, {}), std::invalid_argument);
}

TEST_CASE("optimizer: sgd step matches hand arithmetic") {
  ParameterSet p;
  p["theta"] = Tensor::scalar(1.0);
  GradientMap g;
  g["theta"] = Tensor::scalar(2.0);
  OptimizerConfig cfg;
  cfg.algo = OptAlgo::kSgd;
  auto opt = Optimizer::uniform(cfg, 0.1);
  opt.step(p, g);
  CHECK(p["theta"][0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("optimizer: zero learning rate for a group leaves it bit-exact") {
  ParameterSet p;
  p["a.w"] = Tensor({2}, {0.25, -0.75});
  p["b.w"] = Tensor({2}, {1.0, 2.0});
  GradientMap g;
  g["a.w"] = Tensor({2}, {1.0, 1.0});
  g["b.w"] = Tensor({2}, {1.0, 1.0});
  std::map<std::string, int> groups{{"a.w", 0}, {"b.w", 1}};
  Optimizer opt(OptimizerConfig{}, groups, {0.0, 0.1});
  const Tensor before = p["a.w"];
  for (int i = 0; i < 5; ++i) opt.step(p, g);
  CHECK(p["a.w"][0] == before[0]);
  CHECK(p["a.w"][1] == before[1]);
  CHECK(p["b.w"][0] != 1.0);
}

TEST_CASE("optimizer: adam converges on a quadratic bowl") {
  ParameterSet p;
  p["x"] = Tensor({2}, {3.0, -2.0});
  auto opt = Optimizer::uniform(OptimizerConfig{}, 0.05);
  for (int step = 0; step < 2000; ++step) {
    GradientMap g;
    g["x"] = Tensor({2}, {2.0 * (p["x"][0] - 1.0), 2.0 * (p["x"][1] + 0.5)});
    opt.step(p, g);
  }
  CHECK(std::fabs(p["x"][0] - 1.0) < 1e-3);
  CHECK(std::fabs(p["x"][1] + 0.5) < 1e-3);
}

TEST_CASE("optimizer: deterministic given identical inputs and state") {
  auto run = []() {
    ParameterSet p;
    p["x"] = Tensor({3}, {1.0, 2.0, 3.0});
    auto opt = Optimizer::uniform(OptimizerConfig{}, 0.01);
    for (int i = 0; i < 50; ++i) {
      GradientMap g;
      g["x"] = Tensor({3}, {p["x"][0], -p["x"][1], 0.5 * p["x"][2]});
      opt.step(p, g);
    }
    return p["x"].values();
  };
  CHECK(run() == run());
}

TEST_CASE("optimizer errors: missing gradient and negative learning rate") {
  ParameterSet p;
  p["x"] = Tensor::scalar(1.0);
  GradientMap empty;
  auto opt = Optimizer::uniform(OptimizerConfig{}, 0.1);
  CHECK_THROWS_AS(opt.step(p, empty), std::invalid_argument);
  CHECK_THROWS_AS(Optimizer::uniform(OptimizerConfig{}, -0.1), std::invalid_argument);
}
