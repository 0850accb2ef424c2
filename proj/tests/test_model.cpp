#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cs4l/errors.hpp"
#include "cs4l/model.hpp"
#include "cs4l/optim.hpp"
#include "synthetic.hpp"

using namespace cs4l;

namespace {

bool same_state(torch::nn::Module& a, torch::nn::Module& b) {
  auto pa = a.named_parameters(), pb = b.named_parameters();
  if (pa.size() != pb.size()) return false;
  for (const auto& p : pa)
    if (!torch::equal(p.value(), pb[p.key()])) return false;
  return true;
}

// Hand count for a pre-activation WRN with bias-free convs and a 1x1
// projection wherever the block changes shape.
std::int64_t wrn_closed_form(int depth, int k, int num_classes) {
  int n = (depth - 4) / 6;
  std::int64_t total = 3 * 16 * 9;  // stem
  int widths[3] = {16 * k, 32 * k, 64 * k};
  int c_in = 16;
  for (int g = 0; g < 3; ++g) {
    int c = widths[g];
    for (int i = 0; i < n; ++i) {
      int in = i == 0 ? c_in : c;
      total += 2 * in + 9LL * in * c + 2 * c + 9LL * c * c;
      if (i == 0 && (in != c || g > 0)) total += static_cast<std::int64_t>(in) * c;
    }
    c_in = c;
  }
  int f = widths[2];
  total += 2 * f;                                  // final BN
  total += static_cast<std::int64_t>(f) * num_classes + num_classes;  // head_super
  total += static_cast<std::int64_t>(f) * 7 + 7;   // head_self
  return total;
}

torch::Tensor probe_loss(DualHeadModel& m, const torch::Tensor& x, const std::vector<int>& y, Head head) {
  return cross_entropy(m->forward(x, head), y);
}

}  // namespace

TEST_CASE("architecture tags") {
  CHECK(parse_arch("convnet13") == Arch::ConvNet13);
  CHECK(parse_arch("wrn_28_4") == Arch::Wrn28_4);
  CHECK(to_string(Arch::Wrn28_4) == "wrn_28_4");
  CHECK_THROWS_AS(parse_arch("resnet50"), ConfigError);
}

TEST_CASE("dual-head output sizes") {
  for (auto arch : {Arch::ConvNet13, Arch::Wrn28_4}) {
    for (int k : {10, 100}) {
      auto m = build_model({arch, k, 1, 0.125});
      m->eval();
      torch::NoGradGuard no_grad;
      auto x = torch::randn({2, 3, 32, 32});
      CHECK(m->forward(x, Head::Supervised).sizes() == torch::IntArrayRef({2, k}));
      CHECK(m->forward(x, Head::Self).sizes() == torch::IntArrayRef({2, 7}));
      CHECK(m->num_classes() == k);
      CHECK(m->arch_tag() == to_string(arch));
    }
  }
}

TEST_CASE("initialization is determined by arch, K and seed") {
  auto a = build_model({Arch::ConvNet13, 10, 42, 0.125});
  auto b = build_model({Arch::ConvNet13, 10, 42, 0.125});
  auto c = build_model({Arch::ConvNet13, 10, 43, 0.125});
  CHECK(same_state(*a, *b));
  CHECK_FALSE(same_state(*a, *c));
}

TEST_CASE("published architecture sizes") {
  auto wrn = build_model({Arch::Wrn28_4, 100, 0, 1.0});
  CHECK(count_parameters(*wrn) == wrn_closed_form(28, 4, 100));
  // About 5.9M parameters, the usual size quoted for WRN-28-4 on CIFAR-100.
  CHECK(count_parameters(*wrn) > 5'800'000);
  CHECK(count_parameters(*wrn) < 6'000'000);

  auto cnn = build_model({Arch::ConvNet13, 10, 0, 1.0});
  // 3x3 convs 3-128-128-128 | 256 x3 | 512 x3, BN after each, then two heads.
  std::int64_t convs = 0, c_in = 3;
  for (int c : {128, 128, 128, 256, 256, 256, 512, 512, 512}) {
    convs += 9 * c_in * c + c + 2 * c;
    c_in = c;
  }
  CHECK(count_parameters(*cnn) == convs + 512 * 10 + 10 + 512 * 7 + 7);
}

TEST_CASE("inference is independent of the rest of the batch") {
  auto m = build_model({Arch::ConvNet13, 10, 3, 0.125});
  m->eval();
  torch::NoGradGuard no_grad;
  auto batch = torch::randn({32, 3, 32, 32});
  auto single = m->forward(batch.slice(0, 0, 1), Head::Supervised);
  auto full = m->forward(batch, Head::Supervised);
  CHECK(torch::allclose(single[0], full[0], 1e-5, 1e-5));
}

TEST_CASE("zero heads produce zero logits") {
  auto m = build_model({Arch::Wrn28_4, 10, 3, 0.25});
  m->eval();
  torch::NoGradGuard no_grad;
  for (auto* head : {&m->head_super, &m->head_self}) {
    (*head)->weight.zero_();
    (*head)->bias.zero_();
  }
  auto x = torch::randn({3, 3, 32, 32});
  CHECK(m->forward(x, Head::Supervised).abs().max().item<double>() == 0.0);
  CHECK(m->forward(x, Head::Self).abs().max().item<double>() == 0.0);
}

TEST_CASE("softmax") {
  auto logits = torch::randn({64, 10}) * 30;
  auto p = softmax(logits);
  CHECK((p.sum(1) - 1).abs().max().item<double>() < 1e-5);
  auto big = softmax(torch::tensor({{1000.0f, 1000.0f}}));
  CHECK(big[0][0].item<double>() == doctest::Approx(0.5));
}

TEST_CASE("cross_entropy") {
  CHECK(cross_entropy(torch::zeros({4, 10}), std::vector<int>{0, 3, 7, 9}).item<double>() ==
        doctest::Approx(std::log(10.0)).epsilon(1e-6));
  auto stable = cross_entropy(torch::tensor({{1000.0f, 0.0f}}), std::vector<int>{0});
  CHECK(std::isfinite(stable.item<double>()));
  CHECK(stable.item<double>() == doctest::Approx(0.0));
  CHECK(cross_entropy(torch::tensor({{1000.0f, 0.0f}}), std::vector<int>{1}).item<double>() ==
        doctest::Approx(1000.0));
  CHECK(cross_entropy(torch::zeros({1, 2}), std::vector<int>{1}).item<double>() ==
        doctest::Approx(std::numbers::ln2).epsilon(1e-6));
  CHECK_THROWS_AS(cross_entropy(torch::zeros({1, 2}), std::vector<int>{2}), ContractError);
  CHECK_THROWS_AS(cross_entropy(torch::zeros({1, 2}), std::vector<int>{-1}), ContractError);
  CHECK_THROWS_AS(cross_entropy(torch::zeros({2, 2}), std::vector<int>{0}), ContractError);

  // Agrees with the direct definition on random inputs and is never negative.
  auto logits = torch::randn({16, 5}, torch::kFloat64) * 4;
  std::vector<int> y;
  for (int i = 0; i < 16; ++i) y.push_back(i % 5);
  double direct = 0;
  for (int i = 0; i < 16; ++i) {
    double z = 0;
    for (int c = 0; c < 5; ++c) z += std::exp(logits[i][c].item<double>());
    direct -= std::log(std::exp(logits[i][y[i]].item<double>()) / z);
  }
  CHECK(cross_entropy(logits, y).item<double>() == doctest::Approx(direct / 16).epsilon(1e-12));
}

TEST_CASE("argmax ties go to the lowest index") {
  auto logits = torch::tensor({{1.0f, 3.0f, 3.0f}, {2.0f, 2.0f, 2.0f}, {0.0f, -1.0f, 5.0f}});
  CHECK(argmax_rows(logits) == std::vector<int>{1, 0, 2});
}

TEST_CASE("probe gradients agree with central differences") {
  auto m = testing::probe_model(5, 9);
  auto x = torch::randn({3, 3, 8, 8}, torch::kFloat64);
  std::vector<int> y{0, 4, 2}, ys{6, 1, 3};
  const double h = 1e-5;

  for (int which = 0; which < 3; ++which) {
    auto loss_fn = [&] {
      auto ls = probe_loss(m, x, y, Head::Supervised);
      auto lp = probe_loss(m, x, ys, Head::Self);
      return which == 0 ? ls : which == 1 ? lp : ls + 0.7 * lp;
    };
    auto grads = gradients(*m, loss_fn());
    auto params = m->parameters();
    REQUIRE(grads.size() == params.size());
    double worst = 0;
    torch::NoGradGuard no_grad;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      auto flat = params[pi].view(-1);
      for (std::int64_t e = 0; e < flat.numel(); ++e) {
        double orig = flat[e].item<double>();
        flat[e].fill_(orig + h);
        double up = loss_fn().item<double>();
        flat[e].fill_(orig - h);
        double down = loss_fn().item<double>();
        flat[e].fill_(orig);
        double num = (up - down) / (2 * h), ana = grads[pi].view(-1)[e].item<double>();
        double denom = std::max({std::abs(num), std::abs(ana), 1e-8});
        worst = std::max(worst, std::abs(num - ana) / denom);
      }
    }
    CAPTURE(which);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("zero regression loss gives zero gradients") {
  auto m = testing::probe_model(3, 1);
  auto x = torch::randn({2, 3, 8, 8}, torch::kFloat64);
  auto pred = m->forward(x, Head::Supervised);
  auto loss = (pred - pred.detach()).pow(2).mean();
  for (const auto& g : gradients(*m, loss)) CHECK(g.abs().max().item<double>() == 0.0);
}

TEST_CASE("the two heads receive disjoint gradients") {
  auto m = testing::probe_model(4, 2);
  auto x = torch::randn({2, 3, 8, 8}, torch::kFloat64);
  auto names = m->named_parameters();
  auto check_zero = [&](const torch::Tensor& loss, const std::string& prefix) {
    auto grads = gradients(*m, loss);
    std::size_t i = 0;
    for (const auto& p : names) {
      if (p.key().rfind(prefix, 0) == 0) CHECK(grads[i].abs().max().item<double>() == 0.0);
      ++i;
    }
  };
  check_zero(probe_loss(m, x, {0, 1}, Head::Supervised), "head_self.");
  check_zero(probe_loss(m, x, {5, 6}, Head::Self), "head_super.");
}

TEST_CASE("sgd_step") {
  SUBCASE("definition") {
    auto w = torch::ones({1});
    OptimState st;
    st.options = {0.1, 0.9, 0.0, 1'000'000};
    sgd_step({{"w", w}}, {torch::ones({1})}, st);
    CHECK(w.item<double>() == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(st.step == 1);
    // Second step: buffer = 0.9 * 1 + 1.
    sgd_step({{"w", w}}, {torch::ones({1})}, st);
    CHECK(w.item<double>() == doctest::Approx(0.9 - 0.1 * 1.9).epsilon(1e-5));
  }
  SUBCASE("zero gradient and no decay leave parameters untouched") {
    auto w = torch::randn({3, 3});
    auto before = w.clone();
    OptimState st;
    st.options.weight_decay = 0.0;
    sgd_step({{"w", w}}, {torch::zeros({3, 3})}, st);
    CHECK(torch::equal(w, before));
  }
  SUBCASE("undefined gradients skip the parameter, decay included") {
    auto w = torch::randn({2});
    auto before = w.clone();
    OptimState st;
    sgd_step({{"w", w}}, {torch::Tensor()}, st);
    CHECK(torch::equal(w, before));
    CHECK(st.momentum.empty());
  }
  SUBCASE("cosine schedule") {
    SgdOptions o{0.05, 0.9, 5e-4, 1000};
    CHECK(cosine_lr(o, 0) == doctest::Approx(0.05));
    CHECK(cosine_lr(o, 500) == doctest::Approx(0.025));
    CHECK(cosine_lr(o, 1000) == doctest::Approx(0.0));
    CHECK(cosine_lr(o, 999) < 1e-6);
  }
}

TEST_CASE("non-finite activations are reported") {
  auto m = build_model({Arch::ConvNet13, 10, 0, 0.125});
  m->eval();
  torch::NoGradGuard no_grad;
  auto x = torch::randn({1, 3, 32, 32});
  x[0][0][0][0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(m->forward(x, Head::Supervised), NumericError);
  CHECK_THROWS_AS(check_finite(torch::tensor({1.0f, INFINITY}), "t"), NumericError);
}
