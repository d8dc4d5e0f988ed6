#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "flowcast/autodiff/ops.hpp"

using namespace flowcast::ad;
using T = double;

namespace {

using Builder = std::function<Var<T>(Tape<T>&, const std::vector<Var<T>>&)>;

struct Input {
  std::vector<T> values;
  std::size_t rows, cols;
};

/// Reduces the op output to a scalar with fixed random weights, backpropagates,
/// and compares every input gradient against central differences.
void check_gradients(std::vector<Input> inputs, const Builder& build, double tol = 1e-7) {
  std::mt19937_64 rng(123);
  std::normal_distribution<T> n;
  std::vector<T> probe;
  auto evaluate = [&](bool record, std::vector<std::vector<T>>* grads) {
    Tape<T> tape(record);
    std::vector<Var<T>> vars;
    for (auto& in : inputs) vars.push_back(tape.input(std::span<const T>(in.values), in.rows, in.cols, true));
    Var<T> out = build(tape, vars);
    if (probe.empty()) {
      probe.resize(out.size());
      for (T& p : probe) p = n(rng);
    }
    T s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += probe[i] * out.data()[i];
    if (grads) {
      tape.backward(out, probe);
      for (auto& v : vars) {
        auto g = tape.grad_of(v);
        grads->emplace_back(g.begin(), g.end());
        if (grads->back().empty()) grads->back().assign(v.size(), 0.0);
      }
    }
    return s;
  };
  std::vector<std::vector<T>> grads;
  evaluate(true, &grads);
  const T h = 1e-6;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    for (std::size_t i = 0; i < inputs[a].values.size(); ++i) {
      const T keep = inputs[a].values[i];
      inputs[a].values[i] = keep + h;
      const T fp = evaluate(false, nullptr);
      inputs[a].values[i] = keep - h;
      const T fm = evaluate(false, nullptr);
      inputs[a].values[i] = keep;
      const T fd = (fp - fm) / (2 * h);
      EXPECT_NEAR(grads[a][i], fd, tol * std::max<T>(1.0, std::abs(fd))) << "input " << a << " element " << i;
    }
  }
}

Input random_input(std::size_t r, std::size_t c, std::uint64_t seed, T scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<T> n;
  Input in{std::vector<T>(r * c), r, c};
  for (T& v : in.values) v = scale * n(rng);
  return in;
}

}  // namespace

TEST(Autodiff, LinearWithBias) {
  check_gradients({random_input(5, 4, 1), random_input(4, 3, 2), random_input(1, 3, 3)},
                  [](Tape<T>&, const std::vector<Var<T>>& v) { return linear(v[0], v[1], v[2]); });
}

TEST(Autodiff, PointwiseAndNormalisation) {
  check_gradients({random_input(4, 6, 4)}, [](Tape<T>&, const std::vector<Var<T>>& v) { return gelu(v[0]); });
  check_gradients({random_input(4, 6, 5)}, [](Tape<T>&, const std::vector<Var<T>>& v) { return silu(v[0]); });
  check_gradients({random_input(4, 6, 6, 3.0)}, [](Tape<T>&, const std::vector<Var<T>>& v) { return layernorm(v[0]); });
}

TEST(Autodiff, BroadcastOps) {
  check_gradients({random_input(3, 5, 7), random_input(1, 5, 8), random_input(1, 5, 9)},
                  [](Tape<T>&, const std::vector<Var<T>>& v) { return affine_rows(v[0], v[1], v[2], true); });
  check_gradients({random_input(3, 5, 10), random_input(3, 5, 11), random_input(1, 5, 12)},
                  [](Tape<T>&, const std::vector<Var<T>>& v) { return gated_add(v[0], v[1], v[2]); });
  check_gradients({random_input(3, 5, 13), random_input(3, 5, 14)},
                  [](Tape<T>&, const std::vector<Var<T>>& v) { return axpy(add(v[0], v[1]), v[1], 0.25); });
}

TEST(Autodiff, LayoutOps) {
  auto idx = std::make_shared<const std::vector<long>>(std::vector<long>{5, -1, 0, 0, 11, 3, 7, -1});
  check_gradients({random_input(3, 4, 15)},
                  [idx](Tape<T>&, const std::vector<Var<T>>& v) { return gather(v[0], idx, 2, 4); });
  auto rows = std::make_shared<const std::vector<long>>(std::vector<long>{2, 2, -1, 0});
  check_gradients({random_input(3, 4, 16)},
                  [rows](Tape<T>&, const std::vector<Var<T>>& v) { return gather_rows(v[0], rows); });
  check_gradients({random_input(2, 6, 17), random_input(3, 6, 18)}, [](Tape<T>&, const std::vector<Var<T>>& v) {
    return slice_cols(slice_rows(concat_rows(v[0], v[1]), 1, 3), 2, 3);
  });
}

TEST(Autodiff, WindowAttentionWithMasksAndPadding) {
  auto layout = std::make_shared<AttentionLayout>();
  layout->windows = 2;
  layout->window_tokens = 4;
  layout->heads = 2;
  layout->dim = 4;
  layout->n_rel = 7;
  for (long i = 0; i < 4; ++i)
    for (long j = 0; j < 4; ++j) layout->rel_index.push_back(i - j + 3);
  layout->slot_label = {0, 0, 1, 1, 0, 0, 0, -1};
  std::shared_ptr<const AttentionLayout> L = layout;
  check_gradients({random_input(8, 12, 19), random_input(7, 2, 20)},
                  [L](Tape<T>&, const std::vector<Var<T>>& v) { return window_attention(v[0], v[1], L); });
}

TEST(Autodiff, WindowAttentionMatchesDirectSoftmax) {
  auto layout = std::make_shared<AttentionLayout>();
  layout->windows = 1;
  layout->window_tokens = 3;
  layout->heads = 1;
  layout->dim = 2;
  layout->n_rel = 1;
  layout->rel_index.assign(9, 0);
  layout->slot_label = {0, 0, 0};
  Tape<T> tape(false);
  const std::vector<T> qkv{1, 0, 1, 0, 1, 2, 0, 1, 0, 1, 3, 4, 1, 1, 1, 1, 5, 6};
  const std::vector<T> bias{0.5};
  auto out = window_attention(tape.input(std::span<const T>(qkv), 3, 6), tape.input(std::span<const T>(bias), 1, 1),
                              std::shared_ptr<const AttentionLayout>(layout));
  // Query 0 = (1,0): scores k=(1,0),(0,1),(1,1) -> 1,0,1 scaled by 1/sqrt(2), plus bias.
  const T s = 1.0 / std::sqrt(2.0);
  const T e0 = std::exp(s), e1 = 1.0, e2 = std::exp(s), z = e0 + e1 + e2;
  EXPECT_NEAR(out.data()[0], (e0 * 1 + e1 * 3 + e2 * 5) / z, 1e-14);
  EXPECT_NEAR(out.data()[1], (e0 * 2 + e1 * 4 + e2 * 6) / z, 1e-14);
}

TEST(Autodiff, WeightedSquareErrorAndParamReuse) {
  Parameter<T> p{"p", {2, 2}, {1.0, -2.0, 0.5, 3.0}};
  Tape<T> tape;
  auto a = tape.param(p, 2, 2);
  auto b = tape.param(p, 2, 2);
  EXPECT_EQ(a.id, b.id);
  auto w = std::make_shared<const std::vector<T>>(std::vector<T>{1, 2, 3, 4});
  const std::vector<T> target{0, 0, 0, 0};
  auto loss = add(weighted_square_error(a, target, w, 0.5), weighted_square_error(b, target, w, 0.5));
  EXPECT_DOUBLE_EQ(loss.data()[0], 1.0 * 1 + 2 * 4 + 3 * 0.25 + 4 * 9);
  tape.backward(loss);
  const auto g = tape.param_grad(p);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_DOUBLE_EQ(g[0], 2.0 * 1 * 1.0);
  EXPECT_DOUBLE_EQ(g[3], 2.0 * 4 * 3.0);
}
