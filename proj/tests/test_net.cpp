#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gaze/net.hpp"
#include "gaze/rng.hpp"
#include "testutil.hpp"

using namespace gaze;

namespace {

template <typename T>
std::vector<T*> param_ptrs(NetworkState<T>& s) {
  std::vector<T*> out;
  for (auto& p : s.params) {
    for (auto& w : p.w) out.push_back(&w);
    for (auto& b : p.b) out.push_back(&b);
  }
  return out;
}

template <typename T>
std::vector<T> flat_grads(const Gradients<T>& g) {
  std::vector<T> out;
  for (const auto& layer : g.layers) {
    out.insert(out.end(), layer.gw.begin(), layer.gw.end());
    out.insert(out.end(), layer.gb.begin(), layer.gb.end());
  }
  return out;
}

template <typename T>
Tensor<T> random_batch(Rng& rng, int n, const Shape3& shape) {
  Tensor<T> t(n, shape.c, shape.h, shape.w);
  for (auto& v : t.v) v = static_cast<T>(rng.next_unit());
  return t;
}

}  // namespace

TEST_CASE("parameter counting") {
  CHECK(param_count(reference_spec(3)) == 63233);
  CHECK(param_count(reference_spec(2)) == 63112);

  // softmax over ten inputs: 10*3 + 3
  NetworkSpec tiny{{10, 1, 1}, {SoftmaxOutSpec{3}}};
  CHECK(param_count(tiny) == 33);

  // no learnables at all
  NetworkSpec plumbing{{2, 9, 9}, {MaxPoolSpec{3, 3}, ReluSpec{}}};
  CHECK(param_count(plumbing) == 0);

  // parameter budget anchor: within +-15% of 60K
  CHECK(param_count(reference_spec(3)) >= 51000);
  CHECK(param_count(reference_spec(3)) <= 69000);

  NetworkSpec broken{{1, 4, 4}, {ConvSpec{2, 5, 1}, SoftmaxOutSpec{2}}};
  CHECK_THROWS_AS(param_count(broken), ShapeError);
}

TEST_CASE("reference spec shape chain") {
  const auto shapes = chain_shapes(reference_spec(3));
  REQUIRE(shapes.size() == 11);
  CHECK(shapes[0] == Shape3{1, 72, 72});
  CHECK(shapes[1] == Shape3{6, 68, 68});   // conv 5x5
  CHECK(shapes[3] == Shape3{6, 22, 22});   // pool 3/3
  CHECK(shapes[4] == Shape3{14, 18, 18});  // conv 5x5
  CHECK(shapes[6] == Shape3{14, 6, 6});    // pool 3/3 -> 504 features
  CHECK(shapes[8] == Shape3{120, 1, 1});
  CHECK(shapes[10] == Shape3{3, 1, 1});

  // forward on a zero batch propagates those shapes
  NetworkState<float> state = init_state<float>(reference_spec(3), 1);
  const Tensor<float> zeros(2, 1, 72, 72);
  const Forward<float> fwd = forward(state, zeros, RunMode::infer);
  CHECK(fwd.probs.n == 2);
  CHECK(fwd.probs.features() == 3);

  CHECK_THROWS_AS(forward(state, Tensor<float>(1, 1, 64, 64), RunMode::infer), ShapeError);
  CHECK_THROWS_AS(validate_spec(NetworkSpec{{1, 8, 8}, {FcSpec{4}}}), ShapeError);
  CHECK_THROWS_AS(validate_spec(NetworkSpec{{1, 8, 8}, {SoftmaxOutSpec{4}}}), ShapeError);
}

TEST_CASE("forward basics") {
  SECTION("zero weights give a uniform softmax") {
    NetworkState<float> state = init_state<float>(reference_spec(3), 2);
    for (auto& p : state.params) {
      std::fill(p.w.begin(), p.w.end(), 0.0f);
      std::fill(p.b.begin(), p.b.end(), 0.0f);
    }
    Rng rng(71);
    const Tensor<float> batch = random_batch<float>(rng, 3, {1, 72, 72});
    const Forward<float> fwd = forward(state, batch, RunMode::infer);
    for (int bi = 0; bi < 3; ++bi)
      for (int c = 0; c < 3; ++c)
        CHECK(fwd.probs.row(bi)[c] == Catch::Approx(1.0 / 3.0).epsilon(1e-6));
  }

  SECTION("inference is deterministic") {
    NetworkState<float> state = init_state<float>(reference_spec(3, 0.5f), 3);
    Rng rng(72);
    const Tensor<float> batch = random_batch<float>(rng, 2, {1, 72, 72});
    const Forward<float> a = forward(state, batch, RunMode::infer);
    const Forward<float> b = forward(state, batch, RunMode::infer);
    CHECK(a.probs.v == b.probs.v);
  }

  SECTION("a 1x1 identity-like conv scales its input map") {
    NetworkSpec spec{{1, 3, 3}, {ConvSpec{1, 1, 1}, SoftmaxOutSpec{2}}};
    NetworkState<float> state = init_state<float>(spec, 4);
    state.params[0].w = {2.0f};
    state.params[0].b = {0.0f};
    Rng rng(73);
    const Tensor<float> batch = random_batch<float>(rng, 1, {1, 3, 3});
    const Forward<float> fwd = forward(state, batch, RunMode::train, {});
    // the softmax layer's cached input is the conv output
    const Tensor<float>& conv_out = fwd.layers[1].input;
    for (std::size_t i = 0; i < batch.v.size(); ++i)
      CHECK(conv_out.v[i] == batch.v[i] * 2.0f);
  }

  SECTION("softmax rows sum to one on random networks") {
    Rng rng(74);
    NetworkSpec spec{{1, 12, 12},
                     {ConvSpec{2, 3, 1}, ReluSpec{}, MaxPoolSpec{2, 2}, FcSpec{8},
                      SoftmaxOutSpec{3}}};
    for (int trial = 0; trial < 10; ++trial) {
      NetworkState<float> state = init_state<float>(spec, rng.next_u64());
      const Tensor<float> batch = random_batch<float>(rng, 4, {1, 12, 12});
      const Forward<float> fwd = forward(state, batch, RunMode::infer);
      for (int bi = 0; bi < 4; ++bi) {
        double sum = 0.0;
        for (int c = 0; c < 3; ++c) {
          const float p = fwd.probs.row(bi)[c];
          CHECK(p >= 0.0f);
          CHECK(p <= 1.0f);
          sum += p;
        }
        CHECK(sum == Catch::Approx(1.0).margin(1e-6));
      }
    }
  }
}

TEST_CASE("backward basics") {
  SECTION("saturated correct class sends zero gradient into the output layer") {
    NetworkSpec spec{{2, 1, 1}, {SoftmaxOutSpec{2}}};
    NetworkState<float> state = init_state<float>(spec, 5);
    std::fill(state.params[0].w.begin(), state.params[0].w.end(), 0.0f);
    // gap wide enough that exp(-400) underflows past the denormal range
    state.params[0].b = {200.0f, -200.0f};
    Tensor<float> batch(1, 2, 1, 1);
    batch.v = {0.3f, 0.7f};
    const Forward<float> fwd = forward(state, batch, RunMode::train, {});
    CHECK(fwd.probs.v[0] == 1.0f);
    const Gradients<float> grads = backward(state, fwd, {0});
    for (float g : flat_grads(grads)) CHECK(g == 0.0f);
  }

  SECTION("duplicating a sample leaves the mean gradient bit-identical") {
    NetworkSpec spec{{1, 6, 6},
                     {ConvSpec{2, 3, 1}, MaxPoolSpec{2, 2}, FcSpec{5}, SoftmaxOutSpec{3}}};
    NetworkState<float> state = init_state<float>(spec, 6);
    Rng rng(75);
    const Tensor<float> one = random_batch<float>(rng, 1, {1, 6, 6});
    Tensor<float> two(2, 1, 6, 6);
    std::copy(one.v.begin(), one.v.end(), two.v.begin());
    std::copy(one.v.begin(), one.v.end(), two.v.begin() + one.v.size());

    const Gradients<float> g1 = backward(state, forward(state, one, RunMode::train, {}), {1});
    const Gradients<float> g2 = backward(state, forward(state, two, RunMode::train, {}), {1, 1});
    CHECK(flat_grads(g1) == flat_grads(g2));
  }

  SECTION("label validation") {
    NetworkSpec spec{{4, 1, 1}, {SoftmaxOutSpec{2}}};
    NetworkState<float> state = init_state<float>(spec, 7);
    Tensor<float> batch(1, 4, 1, 1);
    const Forward<float> fwd = forward(state, batch, RunMode::train, {});
    CHECK_THROWS_AS(backward(state, fwd, {2}), ArgumentError);
    CHECK_THROWS_AS(backward(state, fwd, {-1}), ArgumentError);
    const Forward<float> inf = forward(state, batch, RunMode::infer);
    CHECK_THROWS_AS(backward(state, inf, {0}), ArgumentError);
  }
}

TEST_CASE("gradients match central finite differences on a tiny network") {
  // 64-bit shadow arithmetic end to end
  NetworkSpec spec{{1, 8, 8},
                   {ConvSpec{2, 3, 1}, MaxPoolSpec{2, 2}, FcSpec{6}, SoftmaxOutSpec{3}}};
  NetworkState<double> state = init_state<double>(spec, 8);
  Rng rng(76);
  const Tensor<double> batch = random_batch<double>(rng, 3, {1, 8, 8});
  const std::vector<int> labels{0, 2, 1};

  const Forward<double> fwd = forward(state, batch, RunMode::train, {});
  const std::vector<double> analytic = flat_grads(backward(state, fwd, labels));
  const auto ptrs = param_ptrs(state);
  REQUIRE(analytic.size() == ptrs.size());

  const double h = 1e-3;
  int within_tight = 0;
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    const double saved = *ptrs[i];
    *ptrs[i] = saved + h;
    const double up = mean_cross_entropy(forward(state, batch, RunMode::train, {}).probs, labels);
    *ptrs[i] = saved - h;
    const double down = mean_cross_entropy(forward(state, batch, RunMode::train, {}).probs, labels);
    *ptrs[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic[i] - numeric) /
                       std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3});
    CHECK(rel < 1e-3);
    if (rel < 1e-4) ++within_tight;
  }
  // >= 99% of parameters inside the tight tolerance
  CHECK(within_tight >= static_cast<int>(0.99 * static_cast<double>(ptrs.size())));
}

TEST_CASE("max-pool routes every gradient to exactly one input cell") {
  Rng rng(77);
  const MaxPoolSpec pool{3, 3};
  Tensor<float> in = random_batch<float>(rng, 2, {2, 9, 9});
  Tensor<float> out(2, 2, 3, 3);
  std::vector<std::int32_t> argmax(out.size());
  gaze::detail::maxpool_forward(in, pool, out, &argmax);

  // forward picks the window max (first occurrence)
  for (int bi = 0; bi < 2; ++bi)
    for (int ci = 0; ci < 2; ++ci)
      for (int oy = 0; oy < 3; ++oy)
        for (int ox = 0; ox < 3; ++ox) {
          float best = -1.0f;
          for (int dy = 0; dy < 3; ++dy)
            for (int dx = 0; dx < 3; ++dx)
              best = std::max(best, in.plane(bi, ci)[(oy * 3 + dy) * 9 + (ox * 3 + dx)]);
          CHECK(out.plane(bi, ci)[oy * 3 + ox] == best);
        }

  // backward: the routed sum equals the incoming sum exactly, and each
  // window's gradient lands on a single cell
  NetworkSpec spec{{2, 9, 9}, {MaxPoolSpec{3, 3}, FcSpec{4}, SoftmaxOutSpec{2}}};
  NetworkState<float> state = init_state<float>(spec, 9);
  const Forward<float> fwd = forward(state, in, RunMode::train, {});
  // feed a synthetic upstream gradient through the pool layer alone
  Tensor<float> dout = random_batch<float>(rng, 2, {2, 3, 3});
  Tensor<float> din(2, 2, 9, 9);
  const auto& cache = fwd.layers[0];
  for (int bi = 0; bi < 2; ++bi)
    for (int ci = 0; ci < 2; ++ci) {
      const std::int32_t* am = cache.argmax.data() + (bi * 2 + ci) * 9;
      for (int o = 0; o < 9; ++o) din.plane(bi, ci)[am[o]] += dout.plane(bi, ci)[o];
    }
  double din_sum = 0, dout_sum = 0;
  int touched = 0;
  for (float v : din.v) {
    din_sum += v;
    touched += v != 0.0f;
  }
  for (float v : dout.v) dout_sum += v;
  CHECK(din_sum == Catch::Approx(dout_sum).margin(1e-5));
  CHECK(touched <= 2 * 2 * 9);  // at most one cell per pooling window
}

TEST_CASE("inverted dropout matches inference in expectation") {
  const float p = 0.4f;
  NetworkSpec spec{{16, 1, 1}, {DropoutSpec{p}, SoftmaxOutSpec{2}}};
  NetworkState<float> state = init_state<float>(spec, 10);
  Tensor<float> batch(5, 16, 1, 1);
  Rng rng(78);
  for (auto& v : batch.v) v = static_cast<float>(0.5 + rng.next_unit());

  // infer mode: dropout is a pass-through
  const Forward<float> inf = forward(state, batch, RunMode::infer);
  (void)inf;

  double sum_ratio = 0.0;
  long long n = 0;
  for (int step = 0; step < 1000; ++step) {
    const DropoutRng drng{42, static_cast<std::uint64_t>(step), 0};
    const Forward<float> fwd = forward(state, batch, RunMode::train, drng);
    const Tensor<float>& dropped = fwd.layers[1].input;  // dropout output
    for (std::size_t i = 0; i < dropped.v.size(); ++i) {
      sum_ratio += dropped.v[i] / batch.v[i];
      ++n;
    }
  }
  const double mean_ratio = sum_ratio / static_cast<double>(n);
  CHECK(mean_ratio == Catch::Approx(1.0).margin(0.02));

  // masks vary across steps but are reproducible per step
  const Forward<float> a = forward(state, batch, RunMode::train, {42, 7, 0});
  const Forward<float> b = forward(state, batch, RunMode::train, {42, 7, 0});
  CHECK(a.layers[1].input.v == b.layers[1].input.v);
}

TEST_CASE("sgd step follows the momentum recurrence") {
  NetworkSpec spec{{1, 1, 1}, {SoftmaxOutSpec{2}}};
  NetworkState<float> state = init_state<float>(spec, 11);
  const std::vector<float> w0 = state.params[0].w;

  Gradients<float> g = zero_gradients(state);
  g.layers[0].gw = {0.5f, -0.25f};
  g.layers[0].gb = {1.0f, 2.0f};

  SECTION("lr 0 momentum 0 is a no-op") {
    sgd_step(state, g, 0.0f, 0.0f);
    CHECK(state.params[0].w == w0);
  }

  SECTION("momentum 0 reduces to vanilla sgd") {
    sgd_step(state, g, 0.1f, 0.0f);
    CHECK(state.params[0].w[0] == w0[0] - 0.1f * 0.5f);
    CHECK(state.params[0].w[1] == w0[1] - 0.1f * -0.25f);
  }

  SECTION("two steps with momentum 0.9 match the hand-unrolled recurrence") {
    Gradients<float> g2 = zero_gradients(state);
    g2.layers[0].gw = {-0.125f, 0.75f};
    g2.layers[0].gb = {0.0f, 0.0f};
    const float lr = 0.2f;
    sgd_step(state, g, lr, 0.9f);
    sgd_step(state, g2, lr, 0.9f);
    for (int i = 0; i < 2; ++i) {
      const float v1 = -lr * g.layers[0].gw[i];
      const float w1 = w0[i] + v1;
      const float v2 = 0.9f * v1 - lr * g2.layers[0].gw[i];
      CHECK(state.params[0].w[i] == w1 + v2);
    }
  }
}

TEST_CASE("weight serialization") {
  NetworkState<float> state = init_state<float>(reference_spec(3), 12);
  const std::vector<std::uint8_t> bytes = save_weights(state);
  CHECK(std::string(bytes.begin(), bytes.begin() + 6) == "GZCNN1");

  const NetworkState<float> loaded = load_weights(bytes, reference_spec(3));
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    CHECK(loaded.params[i].w == state.params[i].w);
    CHECK(loaded.params[i].b == state.params[i].b);
  }
  // save -> load -> save is byte-identical
  CHECK(save_weights(loaded) == bytes);

  SECTION("corruption is caught") {
    std::vector<std::uint8_t> bad = bytes;
    bad[bad.size() - 1] ^= 0x01;  // checksum byte
    CHECK_THROWS_WITH(load_weights(bad, reference_spec(3)),
                      Catch::Matchers::ContainsSubstring("checksum"));

    std::vector<std::uint8_t> payload_flip = bytes;
    payload_flip[40] ^= 0x10;  // inside the first layer payload
    CHECK_THROWS_AS(load_weights(payload_flip, reference_spec(3)), ParseError);

    std::vector<std::uint8_t> magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_WITH(load_weights(magic, reference_spec(3)),
                      Catch::Matchers::ContainsSubstring("magic"));

    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + bytes.size() / 2);
    CHECK_THROWS_WITH(load_weights(truncated, reference_spec(3)),
                      Catch::Matchers::ContainsSubstring("truncated"));

    std::vector<std::uint8_t> trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(load_weights(trailing, reference_spec(3)), ParseError);
  }

  SECTION("shape mismatch against a different spec") {
    CHECK_THROWS_AS(load_weights(bytes, reference_spec(2)), ShapeError);
  }
}

TEST_CASE("predict") {
  SECTION("zero weights tie-break toward class 0") {
    NetworkState<float> state = init_state<float>(reference_spec(3), 13);
    for (auto& p : state.params) {
      std::fill(p.w.begin(), p.w.end(), 0.0f);
      std::fill(p.b.begin(), p.b.end(), 0.0f);
    }
    const PairEyeImage img(GrayImage(72, 72, std::uint8_t(100)));
    const Prediction pred = predict(state, img);
    CHECK(pred.cls == 0);
    REQUIRE(pred.probs.size() == 3);
  }

  SECTION("predict agrees with the forward argmax and ignores bias shifts") {
    Rng rng(79);
    NetworkState<float> state = init_state<float>(reference_spec(3), 14);
    GrayImage img = testutil::random_image(rng, 72, 72);
    const PairEyeImage pair{img};
    const Prediction pred = predict(state, pair);

    const Forward<float> fwd = forward(state, image_to_tensor(img), RunMode::infer);
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if (fwd.probs.v[c] > fwd.probs.v[best]) best = c;
    CHECK(pred.cls == best);

    // softmax shift invariance: adding a constant to all output biases
    for (auto& b : state.params.back().b) b += 3.5f;
    CHECK(predict(state, pair).cls == pred.cls);
  }
}
