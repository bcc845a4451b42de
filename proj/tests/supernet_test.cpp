#include <cmath>

#include "cabm/quantizer.hpp"
#include "cabm/rng.hpp"
#include "cabm/supernet.hpp"
#include "doctest.h"

using namespace cabm;

namespace {

TensorF random_image(int64_t h, int64_t w, uint64_t seed) {
  Rng rng = Rng::seeded(seed);
  TensorF t({1, 3, h, w});
  for (auto& v : t.data) v = static_cast<float>(rng.uniform());
  return t;
}

void calibrate(SuperNetF& net, const TensorF& sample) {
  // set clamp bounds from one full-precision pass
  BitConfig fp(net.spec().quantized_layers(), kFullPrecisionBits);
  Tape<float> tape;
  std::vector<TensorF> inputs;
  net.forward_hooked(tape, sample, [&](int, Value<float> x, Value<float>, double) {
    inputs.push_back(x.val());
    return HookOut<float>{x, kFullPrecisionBits};
  });
  auto alphas = net.alphas();
  for (size_t i = 0; i < alphas.size(); ++i) {
    const double a = abs_percentile<float>({&inputs[i]}, 99.9);
    alphas[i]->data[0] = static_cast<float>(std::max(a, 1e-3));
  }
  (void)fp;
}

}  // namespace

TEST_CASE("build: quantized layer count and deterministic init") {
  SupernetSpec spec;
  spec.num_blocks = 4;
  CHECK(spec.quantized_layers() == 8);

  SuperNetF a(spec, 42), b(spec, 42), c(spec, 43);
  auto pa = a.named_parameters();
  auto pb = b.named_parameters();
  auto pc = c.named_parameters();
  REQUIRE(pa.size() == pb.size());
  bool all_equal = true, differs_from_c = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].second->data != pb[i].second->data) all_equal = false;
    if (pa[i].second->data != pc[i].second->data) differs_from_c = true;
  }
  CHECK(all_equal);
  CHECK(differs_from_c);
}

TEST_CASE("x4 net maps 24x24 to 96x96") {
  SupernetSpec spec;
  spec.scale = 4;
  spec.num_blocks = 2;
  spec.channels = 8;
  SuperNetF net(spec, 7);
  TensorF lr = random_image(24, 24, 1);
  BitConfig cfg(spec.quantized_layers(), 8);
  auto [sr, stats] = net.forward_with_bits(lr, cfg);
  CHECK(sr.shape == Shape4{1, 3, 96, 96});
  CHECK(stats.size() == static_cast<size_t>(spec.quantized_layers()));
}

TEST_CASE("all-32 sentinel config equals the full-precision forward exactly") {
  SupernetSpec spec;
  spec.num_blocks = 2;
  spec.channels = 8;
  SuperNetF net(spec, 11);
  TensorF lr = random_image(12, 12, 2);
  calibrate(net, lr);

  BitConfig fp_cfg(spec.quantized_layers(), kFullPrecisionBits);
  auto [sr_q, s1] = net.forward_with_bits(lr, fp_cfg);

  // reference full-precision pass through the same machinery with no hooks
  Tape<float> tape;
  auto ref = net.forward_hooked(tape, lr, [](int, Value<float> x, Value<float>, double) {
    return HookOut<float>{x, kFullPrecisionBits};
  });
  CHECK(sr_q.data == ref.val().data);
}

TEST_CASE("zero input propagates identically through every config") {
  SupernetSpec spec;
  spec.num_blocks = 2;
  spec.channels = 8;
  SuperNetF net(spec, 3);
  TensorF zero({1, 3, 10, 10});
  auto [sr8, a] = net.forward_with_bits(zero, BitConfig(spec.quantized_layers(), 8));
  auto [sr4, b] = net.forward_with_bits(zero, BitConfig(spec.quantized_layers(), 4));
  auto [sr6, c] = net.forward_with_bits(zero, BitConfig(spec.quantized_layers(), 6));
  CHECK(sr8.data == sr4.data);
  CHECK(sr8.data == sr6.data);
}

TEST_CASE("weight sharing: config order does not change results") {
  SupernetSpec spec;
  spec.num_blocks = 2;
  spec.channels = 8;
  SuperNetF net(spec, 5);
  TensorF lr = random_image(12, 12, 9);
  calibrate(net, lr);
  BitConfig cfg8(spec.quantized_layers(), 8);
  BitConfig cfg4(spec.quantized_layers(), 4);

  auto [first8, s1] = net.forward_with_bits(lr, cfg8);
  auto [first4, s2] = net.forward_with_bits(lr, cfg4);
  auto [second4, s3] = net.forward_with_bits(lr, cfg4);
  auto [second8, s4] = net.forward_with_bits(lr, cfg8);
  CHECK(first8.data == second8.data);
  CHECK(first4.data == second4.data);
}

TEST_CASE("coarser quantization hurts more often than finer (toy-scale oracle)") {
  SupernetSpec spec;
  spec.num_blocks = 2;
  spec.channels = 8;
  SuperNetF net(spec, 21);
  TensorF warm = random_image(12, 12, 0);
  calibrate(net, warm);

  BitConfig fp(spec.quantized_layers(), kFullPrecisionBits);
  BitConfig c8(spec.quantized_layers(), 8);
  BitConfig c4(spec.quantized_layers(), 4);
  int wins = 0, diff = 0;
  const int kPatches = 100;
  for (int i = 0; i < kPatches; ++i) {
    TensorF lr = random_image(12, 12, 100 + i);
    auto [ref, s0] = net.forward_with_bits(lr, fp);
    auto [q8, s8] = net.forward_with_bits(lr, c8);
    auto [q4, s4] = net.forward_with_bits(lr, c4);
    const double gap8 = l1_loss(q8, ref);
    const double gap4 = l1_loss(q4, ref);
    if (gap4 >= gap8) ++wins;
    if (q8.data != q4.data) ++diff;
  }
  CHECK(wins >= 90);
  CHECK(diff == kPatches);
}

TEST_CASE("residual identity: zero body weights reduce blocks to skips") {
  SupernetSpec spec;
  spec.num_blocks = 3;
  spec.channels = 8;
  SuperNetF net(spec, 13);
  for (auto& blk : net.blocks()) {
    std::fill(blk.conv1.w.data.begin(), blk.conv1.w.data.end(), 0.0f);
    std::fill(blk.conv1.b.data.begin(), blk.conv1.b.data.end(), 0.0f);
    std::fill(blk.conv2.w.data.begin(), blk.conv2.w.data.end(), 0.0f);
    std::fill(blk.conv2.b.data.begin(), blk.conv2.b.data.end(), 0.0f);
  }
  TensorF lr = random_image(10, 10, 4);
  auto [with_body, s1] = net.forward_with_bits(lr, BitConfig(spec.quantized_layers(), 4));

  // tail(head(x)) reference: skip the body entirely
  SuperNetF ref(spec, 13);
  for (auto& blk : ref.blocks()) {
    std::fill(blk.conv1.w.data.begin(), blk.conv1.w.data.end(), 0.0f);
    std::fill(blk.conv2.w.data.begin(), blk.conv2.w.data.end(), 0.0f);
  }
  Tape<float> tape;
  auto out = ref.forward_hooked(tape, lr, [](int, Value<float> x, Value<float>, double) {
    return HookOut<float>{x, kFullPrecisionBits};
  });
  CHECK(with_body.data == out.val().data);
}

TEST_CASE("config length mismatch throws") {
  SupernetSpec spec;
  SuperNetF net(spec, 1);
  TensorF lr = random_image(8, 8, 1);
  BitConfig wrong(spec.quantized_layers() + 1, 8);
  CHECK_THROWS_AS(net.forward_with_bits(lr, wrong), ShapeError);
}

TEST_CASE("l1_loss plain: zero, constant offset, hand case") {
  TensorF a({1, 1, 1, 2}, {0.0f, 1.0f});
  TensorF b({1, 1, 1, 2}, {1.0f, 1.0f});
  CHECK(l1_loss(a, a) == 0.0);
  CHECK(l1_loss(a, b) == doctest::Approx(0.5));
  TensorF c({1, 1, 1, 2}, {0.3f, 1.3f});
  CHECK(l1_loss(a, c) == doctest::Approx(0.3).epsilon(1e-6));
  TensorF bad({1, 1, 2, 1});
  CHECK_THROWS_AS(l1_loss(a, bad), ShapeError);
}

TEST_CASE("gradient oracle on the double supernet (unquantized path)") {
  // central finite differences on sampled coordinates of the full net
  SupernetSpec spec;
  spec.num_blocks = 2;
  spec.channels = 6;
  spec.scale = 2;
  SuperNetD net(spec, 31);
  Rng rng = Rng::seeded(99);
  TensorD lr({1, 3, 8, 8});
  for (auto& v : lr.data) v = rng.uniform(0.1, 0.9);
  TensorD hr({1, 3, 16, 16});
  for (auto& v : hr.data) v = rng.uniform(2.0, 3.0);  // offset keeps |.| kink away

  BitConfig fp(spec.quantized_layers(), kFullPrecisionBits);
  auto params = net.parameters();
  for (auto* p : params) {
    p->ensure_grad();
    p->zero_grad();
  }
  {
    Tape<double> tape;
    auto sr = net.forward_with_bits_on_tape(tape, lr, fp);
    auto loss = ag::l1_loss(sr, hr);
    tape.backward(loss);
    tape.apply_leaf_grads();
  }
  auto loss_fn = [&]() {
    Tape<double> tape;
    auto sr = net.forward_with_bits_on_tape(tape, lr, fp);
    return ag::l1_loss(sr, hr).val().item();
  };
  const double eps = 1e-5;
  double max_rel = 0.0;
  int checked = 0;
  for (auto* p : params) {
    if (p->data.size() == 1 && p->grad[0] == 0.0) continue;  // untouched alphas
    for (size_t probe = 0; probe < 3; ++probe) {
      const size_t i = rng.uniform_int(static_cast<int64_t>(p->data.size()));
      const double orig = p->data[i];
      p->data[i] = orig + eps;
      const double fp_ = loss_fn();
      p->data[i] = orig - eps;
      const double fm = loss_fn();
      p->data[i] = orig;
      const double fd = (fp_ - fm) / (2 * eps);
      const double an = p->grad[i];
      if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
      max_rel = std::max(max_rel, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
      ++checked;
    }
  }
  CHECK(checked > 10);
  CHECK(max_rel < 1e-4);
}
