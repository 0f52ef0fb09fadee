#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "kpaction/neural/adam.hpp"
#include "kpaction/neural/gradient_check.hpp"
#include "kpaction/neural/layers.hpp"
#include "kpaction/neural/model.hpp"
#include "kpaction/rng.hpp"
#include "kpaction/synthgen.hpp"

using namespace kpaction;
using namespace kpaction::neural;

namespace {

template <class T>
std::vector<T> gaussian_buffer(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<T> out(n);
  for (auto& v : out) v = static_cast<T>(rng.gaussian());
  return out;
}

ArchConfig tiny(ModelKind kind, std::size_t d, std::size_t t) {
  ArchConfig a = kind == ModelKind::lstm_classifier ? ArchConfig::lstm_default(d, t, 2) : ArchConfig::mlp_default(d, t, 2);
  if (kind == ModelKind::lstm_classifier) {
    a.recurrent_units = {16};
    a.hidden_units = {8};
  } else {
    a.hidden_units = {16, 8};
  }
  return a;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Relu, Examples) {
  EXPECT_EQ(relu(std::vector<double>{-1, 0, 2}), (std::vector<double>{0, 0, 2}));
  EXPECT_EQ(relu(std::vector<double>{-3, -0.5}), (std::vector<double>{0, 0}));
  const auto x = gaussian_buffer<double>(100, 1);
  EXPECT_EQ(relu(relu(x)), relu(x));
}

TEST(Softmax, Examples) {
  EXPECT_EQ(softmax(std::vector<double>{0, 0}), (std::vector<double>{0.5, 0.5}));
  const auto p = softmax(std::vector<double>{std::log(2.0), 0.0});
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
  const auto big = softmax(std::vector<double>{1000, 0});
  EXPECT_TRUE(std::isfinite(big[0]) && std::isfinite(big[1]));
  EXPECT_NEAR(big[0], 1.0, 1e-15);
  EXPECT_NEAR(big[1], 0.0, 1e-15);
}

TEST(Softmax, DistributionAndShiftInvariance) {
  SplitMix64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x(1 + rng.below(8));
    for (auto& v : x) v = rng.uniform(-20.0, 20.0);
    const auto p = softmax(x);
    double sum = 0.0;
    for (double v : p) {
      ASSERT_GT(v, 0.0);
      ASSERT_LE(v, 1.0);  // a 40-unit logit gap rounds the top entry to exactly 1
      sum += v;
    }
    ASSERT_NEAR(sum, 1.0, 1e-12);
    const double c = rng.uniform(-50.0, 50.0);
    auto shifted = x;
    for (auto& v : shifted) v -= c;
    const auto q = softmax(shifted);
    for (std::size_t k = 0; k < p.size(); ++k) ASSERT_NEAR(p[k], q[k], 1e-12);
  }
}

TEST(Argmax, TiesGoLow) {
  EXPECT_EQ(argmax(std::vector<double>{0.5, 0.5}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{0.1, 0.7, 0.7}), 1u);
}

TEST(Dense, Examples) {
  DenseParams<double> id(2, 2);
  id.weights(0, 0) = id.weights(1, 1) = 1.0;
  EXPECT_EQ(dense_forward(id, std::vector<double>{3, -4}), (std::vector<double>{3, -4}));

  DenseParams<double> p(2, 2);
  p.weights.data = {1, 2, 3, 4};
  EXPECT_EQ(dense_forward(p, std::vector<double>{1, 1}), (std::vector<double>{3, 7}));

  DenseParams<double> z(3, 2);
  z.bias = {0.25, -2};
  EXPECT_EQ(dense_forward(z, std::vector<double>{9, 9, 9}), z.bias);
  EXPECT_THROW(dense_forward(z, std::vector<double>{1, 1}), ShapeError);
}

TEST(Dense, GemvMatchesNaiveSum) {
  SplitMix64 rng(3);
  for (std::size_t in : {1u, 3u, 4u, 7u, 33u}) {
    DenseParams<double> p(in, 5);
    for (auto& w : p.weights.data) w = static_cast<double>(rng.below(64)) / 8.0 - 4.0;
    std::vector<double> x(in);
    for (auto& v : x) v = static_cast<double>(rng.below(64)) / 8.0;
    const auto y = dense_forward(p, x);
    for (std::size_t r = 0; r < 5; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < in; ++c) s += p.weights(r, c) * x[c];
      EXPECT_EQ(y[r], s);  // dyadic values: exact in any order
    }
  }
}

TEST(Lstm, ZeroParamsZeroState) {
  LstmParams<double> p(3, 4);
  const auto [s, cache] = lstm_cell_forward(p, std::vector<double>{1, 2, 3}, LstmState<double>::zeros(4));
  EXPECT_EQ(s.hidden, std::vector<double>(4, 0.0));
  EXPECT_EQ(s.cell, std::vector<double>(4, 0.0));
  EXPECT_EQ(cache.gates[0], 0.5);
  EXPECT_EQ(cache.gates[8], 0.0);
}

TEST(Lstm, ScalarCellMatchesHandUnrolledReference) {
  // Gate rows: input, forget, candidate, output.
  const double wx[4] = {0.7, -0.3, 1.1, 0.45};
  const double wh[4] = {-0.25, 0.6, 0.35, -0.8};
  const double b[4] = {0.05, 1.0, -0.2, 0.15};
  LstmParams<double> p(1, 1);
  for (int k = 0; k < 4; ++k) {
    p.w_input.data[k] = wx[k];
    p.w_hidden.data[k] = wh[k];
    p.bias[k] = b[k];
  }
  const double xs[5] = {0.3, -1.2, 2.0, 0.0, 0.9};
  double h = 0.0, c = 0.0;
  auto state = LstmState<double>::zeros(1);
  for (double x : xs) {
    const double i = sig(wx[0] * x + wh[0] * h + b[0]);
    const double f = sig(wx[1] * x + wh[1] * h + b[1]);
    const double g = std::tanh(wx[2] * x + wh[2] * h + b[2]);
    const double o = sig(wx[3] * x + wh[3] * h + b[3]);
    c = f * c + i * g;
    h = o * std::tanh(c);
    state = lstm_cell_forward(p, std::vector<double>{x}, state).first;
    EXPECT_NEAR(state.cell[0], c, 1e-12);
    EXPECT_NEAR(state.hidden[0], h, 1e-12);
  }
}

TEST(Lstm, GateRangesAndCellBound) {
  SplitMix64 rng(4);
  LstmParams<double> p(6, 5);
  for (auto* m : {&p.w_input, &p.w_hidden}) {
    for (auto& v : m->data) v = rng.uniform(-4.0, 4.0);
  }
  for (auto& v : p.bias) v = rng.uniform(-4.0, 4.0);
  auto s = LstmState<double>::zeros(5);
  for (int t = 1; t <= 200; ++t) {
    std::vector<double> x(6);
    for (auto& v : x) v = 3.0 * rng.gaussian();
    auto [next, cache] = lstm_cell_forward(p, x, s);
    for (std::size_t k = 0; k < 20; ++k) {
      if (k >= 10 && k < 15) {
        ASSERT_GE(cache.gates[k], -1.0);
        ASSERT_LE(cache.gates[k], 1.0);
      } else {
        ASSERT_GE(cache.gates[k], 0.0);
        ASSERT_LE(cache.gates[k], 1.0);
      }
    }
    for (std::size_t k = 0; k < 5; ++k) {
      ASSERT_LE(std::abs(next.cell[k]), std::abs(s.cell[k]) + 1.0);
      ASSERT_LE(std::abs(next.cell[k]), static_cast<double>(t));
      ASSERT_LE(std::abs(next.hidden[k]), 1.0);
    }
    s = next;
  }
}

TEST(Lstm, DimensionMismatchThrows) {
  LstmParams<double> p(3, 2);
  EXPECT_THROW(lstm_cell_forward(p, std::vector<double>{1, 2}, LstmState<double>::zeros(2)), ShapeError);
}

TEST(Model, ZeroHeadGivesUniformOutput) {
  for (auto kind : {ModelKind::lstm_classifier, ModelKind::mlp_baseline}) {
    auto m = init_params<double>(tiny(kind, 8, 5), 1);
    std::fill(m.output_layer().weights.data.begin(), m.output_layer().weights.data.end(), 0.0);
    const auto x = gaussian_buffer<double>(40, 2);
    EXPECT_EQ(model_forward(m, view_of(x, 5)), (std::vector<double>{0.5, 0.5}));
  }
}

TEST(Model, OutputIsDistribution) {
  const auto m = init_params<double>(ArchConfig::lstm_default(12, 6, 3), 5);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto x = gaussian_buffer<double>(72, i);
    const auto p = model_forward(m, view_of(x, 6));
    ASSERT_EQ(p.size(), 3u);
    ASSERT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (double v : p) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
  }
}

TEST(Model, ShapeMismatchThrows) {
  const auto m = init_params<double>(tiny(ModelKind::lstm_classifier, 8, 5), 1);
  const auto x = gaussian_buffer<double>(36, 1);
  EXPECT_THROW(model_forward(m, view_of(x, 4)), ShapeError);
  EXPECT_THROW(model_forward(m, view_of(x, 6)), ShapeError);
}

TEST(Model, FrameOrderMattersOnlyToTheLstm) {
  synth::SynthConfig c;
  c.gesture.noise_sigma = 0.0;
  const std::size_t dim = c.layout.total_dim();
  auto lstm = init_params<double>(ArchConfig::lstm_default(dim, c.window, 2), 3);
  auto mlp = init_params<double>(ArchConfig::mlp_default(dim, c.window, 2), 3);
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto [a, b] = synth::generate_order_probe_pair(c, i);
    const auto xa = window_buffer<double>(a.frames), xb = window_buffer<double>(b.frames);
    EXPECT_NE(forward_trace(lstm, view_of(xa, c.window)).logits, forward_trace(lstm, view_of(xb, c.window)).logits);
    EXPECT_EQ(forward_trace(mlp, view_of(xa, c.window)).logits, forward_trace(mlp, view_of(xb, c.window)).logits);
    mlp.input_offset = std::vector<double>(dim, 0.3);
    EXPECT_EQ(forward_trace(mlp, view_of(xa, c.window)).logits, forward_trace(mlp, view_of(xb, c.window)).logits);
    mlp.input_offset.clear();
  }
}

TEST(Model, InputOffsetShiftsEveryFrame) {
  auto m = init_params<double>(tiny(ModelKind::lstm_classifier, 4, 3), 7);
  const auto x = gaussian_buffer<double>(12, 8);
  m.input_offset = {0.5, -1.0, 0.0, 2.0};
  auto shifted = x;
  for (std::size_t i = 0; i < x.size(); ++i) shifted[i] -= m.input_offset[i % 4];
  auto plain = m;
  plain.input_offset.clear();
  EXPECT_EQ(model_forward(m, view_of(x, 3)), model_forward(plain, view_of(shifted, 3)));
}

TEST(Pool, Examples) {
  const std::vector<double> constant{1, 2, 1, 2, 1, 2};
  EXPECT_EQ(pool_sequence(view_of(constant, 3), PoolKind::mean), (std::vector<double>{1, 2}));
  EXPECT_EQ(pool_sequence(view_of(constant, 3), PoolKind::flatten).size(), 6u);
  EXPECT_THROW(pool_sequence(WindowView<double>{{}, 0, 2}, PoolKind::mean), ContractError);
}

TEST(Backward, ZeroGradientsAtCertainPrediction) {
  for (auto kind : {ModelKind::lstm_classifier, ModelKind::mlp_baseline}) {
    auto m = init_params<double>(tiny(kind, 8, 5), 2);
    std::fill(m.output_layer().weights.data.begin(), m.output_layer().weights.data.end(), 0.0);
    m.output_layer().bias = {800.0, -800.0};
    const auto x = gaussian_buffer<double>(40, 3);
    ASSERT_EQ(model_forward(m, view_of(x, 5))[0], 1.0);
    const auto g = model_backward(m, view_of(x, 5), 0);
    EXPECT_EQ(g.loss, 0.0);
    for (auto t : g.grads.parameters()) {
      for (double v : t) ASSERT_EQ(v, 0.0);
    }
    const auto report = gradient_check(m, view_of(x, 5), 0);
    EXPECT_TRUE(report.passed);
  }
}

TEST(Backward, ScalesLinearly) {
  const auto m = init_params<double>(ArchConfig::lstm_default(8, 5, 2), 9);
  const auto x = gaussian_buffer<double>(40, 10);
  const auto once = model_backward(m, view_of(x, 5), 1);
  const auto twice = model_backward(m, view_of(x, 5), 1, 2.0);
  const auto a = once.grads.parameters(), b = twice.grads.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].size(); ++k) ASSERT_EQ(b[i][k], 2.0 * a[i][k]);
  }
  EXPECT_EQ(once.loss, model_loss(m, view_of(x, 5), 1));
}

TEST(Backward, LinearSoftmaxModelMatchesClosedForm) {
  // No hidden layers: logits = W * mean(x) + b, so dL/dW = (p - y) x_bar^T and dL/db = p - y.
  ArchConfig a = ArchConfig::mlp_default(6, 4, 3);
  a.hidden_units.clear();
  const auto m = init_params<double>(a, 11);
  const auto x = gaussian_buffer<double>(24, 12);
  const std::size_t label = 2;
  const auto xbar = pool_sequence(view_of(x, 4), PoolKind::mean);
  auto p = model_forward(m, view_of(x, 4));
  p[label] -= 1.0;
  const auto g = model_backward(m, view_of(x, 4), label);
  double worst = 0.0;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 6; ++c) {
      const double expect = p[r] * xbar[c];
      const double got = g.grads.dense[0].weights(r, c);
      worst = std::max(worst, std::abs(got - expect) / std::max({std::abs(got), std::abs(expect), 1e-8}));
    }
    worst = std::max(worst, std::abs(g.grads.dense[0].bias[r] - p[r]) / std::max(std::abs(p[r]), 1e-8));
  }
  EXPECT_LT(worst, 1e-10);

  // Finite differences agree too.
  const auto xl = gaussian_buffer<long double>(24, 12);
  const auto ml = init_params<long double>(a, 11);
  EXPECT_LT(gradient_check(ml, view_of(xl, 4), label, 1e-5, 1e-4).max_rel_error, 1e-7);
}

// Double-precision finite differences bottom out near 1e-11 absolute, which
// exceeds 1e-4 relative on coordinates with gradients below ~1e-7. The seed
// sweep therefore runs in long double; the fixed default case runs in double.
TEST(GradientCheck, EveryArchitectureOverRandomSeeds) {
  std::vector<ArchConfig> archs;
  archs.push_back(tiny(ModelKind::lstm_classifier, 8, 5));
  archs.push_back(tiny(ModelKind::mlp_baseline, 8, 5));
  auto stacked = ArchConfig::lstm_default(8, 5, 2);
  stacked.recurrent_units = {12, 6};
  stacked.hidden_units = {6};
  archs.push_back(stacked);
  auto tanh_lstm = stacked;
  tanh_lstm.hidden_activation = Activation::tanh;
  archs.push_back(tanh_lstm);
  auto flat = tiny(ModelKind::mlp_baseline, 8, 5);
  flat.pool = PoolKind::flatten;
  archs.push_back(flat);
  auto three = tiny(ModelKind::lstm_classifier, 8, 5);
  three.class_count = 3;
  archs.push_back(three);

  for (std::size_t ai = 0; ai < archs.size(); ++ai) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      auto m = init_params<long double>(archs[ai], seed);
      if (seed % 2 == 0) m.input_offset = gaussian_buffer<long double>(8, seed + 100);
      const auto x = gaussian_buffer<long double>(40, seed + 50);
      const std::size_t label = seed % archs[ai].class_count;
      const auto r = gradient_check(m, view_of(x, 5), label);
      EXPECT_TRUE(r.passed) << "arch " << ai << " seed " << seed << " err " << r.max_rel_error << " at " << r.worst_parameter
                            << "[" << r.worst_index << "]";
    }
  }
}

TEST(GradientCheck, DefaultTinyLstmInDouble) {
  const auto m = init_params<double>(tiny(ModelKind::lstm_classifier, 8, 5), 42);
  const auto x = gaussian_buffer<double>(40, 43);
  const auto r = gradient_check(m, view_of(x, 5), 1);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_parameter << "[" << r.worst_index << "]";
  EXPECT_EQ(r.coordinates, m.parameter_count());
  EXPECT_FALSE(gradient_check(m, view_of(x, 5), 1, 1e-5, 1e-14).passed);
}

TEST(Adam, ZeroGradientsKeepParameters) {
  std::vector<double> a{1.0, -2.0, 3.5}, b{0.25};
  const auto a0 = a, b0 = b;
  const std::vector<double> ga(3, 0.0), gb(1, 0.0);
  AdamState<double> st;
  for (int i = 0; i < 5; ++i) adam_step<double>(st, {std::span<double>(a), std::span<double>(b)}, {std::span<const double>(ga), std::span<const double>(gb)});
  EXPECT_EQ(a, a0);
  EXPECT_EQ(b, b0);
  EXPECT_EQ(st.step, 5u);
}

TEST(Adam, FirstStepClosedForm) {
  std::vector<double> theta{0.0};
  const std::vector<double> g{4.0};
  AdamState<double> st;
  adam_step<double>(st, {std::span<double>(theta)}, {std::span<const double>(g)});
  EXPECT_NEAR(theta[0], -1e-3 * 4.0 / (4.0 + 1e-8), 1e-15);
  EXPECT_NEAR(theta[0], -0.001, 1e-11);
}

TEST(Adam, TensorsUpdateIndependently) {
  SplitMix64 rng(20);
  std::vector<double> a(7), b(3);
  for (auto& v : a) v = rng.gaussian();
  for (auto& v : b) v = rng.gaussian();
  auto a_solo = a, b_solo = b;
  AdamState<double> joint, sa, sb;
  for (int step = 0; step < 10; ++step) {
    std::vector<double> ga(7), gb(3);
    for (auto& v : ga) v = rng.gaussian();
    for (auto& v : gb) v = rng.gaussian();
    adam_step<double>(joint, {std::span<double>(a), std::span<double>(b)}, {std::span<const double>(ga), std::span<const double>(gb)});
    adam_step<double>(sa, {std::span<double>(a_solo)}, {std::span<const double>(ga)});
    adam_step<double>(sb, {std::span<double>(b_solo)}, {std::span<const double>(gb)});
  }
  EXPECT_EQ(a, a_solo);
  EXPECT_EQ(b, b_solo);
}

TEST(Adam, ShapeChecks) {
  std::vector<double> a(3), g(2);
  AdamState<double> st;
  EXPECT_THROW(adam_step<double>(st, {std::span<double>(a)}, {std::span<const double>(g)}), ShapeError);
  AdamState<double> bad;
  bad.beta1 = 1.0;
  EXPECT_THROW(bad.validate(), ContractError);
}

TEST(Init, DeterministicInSeed) {
  const auto arch = ArchConfig::lstm_default(10, 4, 2);
  EXPECT_EQ(init_params<double>(arch, 5), init_params<double>(arch, 5));
  EXPECT_NE(init_params<double>(arch, 5), init_params<double>(arch, 6));
}

TEST(Init, ForgetBiasOnesOtherBiasesZero) {
  const auto m = init_params<double>(ArchConfig::lstm_default(10, 4, 2), 5);
  for (const auto& l : m.recurrent) {
    const std::size_t h = l.hidden_size();
    for (std::size_t k = 0; k < 4 * h; ++k) EXPECT_EQ(l.bias[k], (k >= h && k < 2 * h) ? 1.0 : 0.0);
  }
  for (const auto& l : m.dense) {
    for (double v : l.bias) EXPECT_EQ(v, 0.0);
  }
}

TEST(Init, WeightsBoundedWithMeanNearZero) {
  ArchConfig a = ArchConfig::mlp_default(100, 1, 2);
  a.hidden_units = {100};
  const auto m = init_params<double>(a, 21);
  const auto& w = m.dense[0].weights;
  ASSERT_EQ(w.data.size(), 10000u);
  const double limit = std::sqrt(6.0 / 200.0);
  double sum = 0.0;
  for (double v : w.data) {
    ASSERT_LE(std::abs(v), limit);
    sum += v;
  }
  const double sigma_of_mean = limit / std::sqrt(3.0) / std::sqrt(10000.0);
  EXPECT_LT(std::abs(sum / 10000.0), 3.0 * sigma_of_mean);
}

TEST(Model, ArgmaxInvariantUnderOutputBiasShift) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto m = init_params<double>(ArchConfig::lstm_default(8, 5, 3), seed);
    const auto x = gaussian_buffer<double>(40, seed + 7);
    const auto before = argmax(model_forward(m, view_of(x, 5)));
    for (auto& b : m.output_layer().bias) b += 3.75;
    EXPECT_EQ(argmax(model_forward(m, view_of(x, 5))), before);
  }
}

TEST(Model, ParameterNamesMatchShapes) {
  const auto m = init_params<double>(ArchConfig::lstm_default(8, 5, 2), 1);
  const auto names = m.parameter_names();
  const auto shapes = m.parameter_shapes();
  const auto params = m.parameters();
  ASSERT_EQ(names.size(), params.size());
  ASSERT_EQ(shapes.size(), params.size());
  EXPECT_EQ(names.front(), "recurrent0.w_input");
  for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(shapes[i].first * shapes[i].second, params[i].size());
}

TEST(ArchConfig, Validation) {
  auto a = ArchConfig::lstm_default(8, 5, 2);
  a.recurrent_units.clear();
  EXPECT_THROW(a.validate(), ContractError);
  a = ArchConfig::mlp_default(8, 5, 2);
  a.class_count = 1;
  EXPECT_THROW(a.validate(), ContractError);
  EXPECT_EQ(model_kind_from_string("lstm"), ModelKind::lstm_classifier);
  EXPECT_EQ(model_kind_from_string("mlp_baseline"), ModelKind::mlp_baseline);
  EXPECT_THROW(model_kind_from_string("cnn"), ContractError);
}
