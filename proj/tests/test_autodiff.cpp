/*
Copyright 2026 The apose Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include <doctest.h>

#include <random>

#include "apose/autodiff.hpp"

using namespace apose::ad;

namespace {

Tensor<double> random_tensor(Shape s, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Tensor<double> t(std::move(s));
  for (Index i = 0; i < t.size(); ++i) t.data[i] = d(rng);
  return t;
}

// Random quadratic readout so every output entry receives a distinct upstream gradient.
Var readout(Tape<double>& t, Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Var target = t.constant(random_tensor(t.shape(out), rng));
  return sum(t, square(t, sub(t, out, target)));
}

template <typename Fn>
double check(Fn&& op, std::vector<Tensor<double>*> params) {
  const auto r = grad_check([&](Tape<double>& t) {
    std::vector<Var> vs;
    for (auto* p : params) vs.push_back(t.watch(*p));
    return readout(t, op(t, vs), 99);
  }, params, 1e-6);
  return r.max_rel_error;
}

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("elementwise and reduction kernels pass gradient checks") {
    std::mt19937_64 rng(1);
    Tensor<double> a = random_tensor({3, 4, 6}, rng), b = random_tensor({3, 4, 6}, rng);
    CHECK(check([](auto& t, auto v) { return add(t, v[0], v[1]); }, {&a, &b}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return sub(t, v[0], v[1]); }, {&a, &b}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return scale(t, v[0], 0.7); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return square(t, v[0]); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return reshape(t, v[0], Shape{12, 6}); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return scale(t, sum(t, v[0]), 0.1); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return mean(t, v[0]); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return leaky_relu(t, v[0], 0.2); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return relu(t, v[0]); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return softmax(t, v[0]); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return std_reduce(t, v[0]); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return row_norm(t, v[0]); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return mean_last(t, v[0]); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return avg_pool_last(t, v[0], 2); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return transpose12(t, v[0]); }, {&a}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return time_diff(t, v[0]); }, {&a}) < 1e-4);
  }

  TEST_CASE("soft cross entropy passes gradient check") {
    std::mt19937_64 rng(2);
    Tensor<double> logits = random_tensor({4, 5}, rng);
    Tensor<double> target({4, 5});
    for (Index r = 0; r < 4; ++r) {
      target.data[r * 5 + r % 5] = 0.5;
      target.data[r * 5 + (r + 1) % 5] = 0.5;
    }
    const auto res = grad_check([&](Tape<double>& t) { return soft_cross_entropy(t, softmax(t, t.watch(logits)), target); },
                                {&logits});
    CHECK(res.max_rel_error < 1e-6);
  }

  TEST_CASE("linear and convolution kernels pass tight gradient checks") {
    std::mt19937_64 rng(3);
    Tensor<double> x = random_tensor({5, 6}, rng), w = random_tensor({6, 4}, rng), b = random_tensor({4}, rng);
    CHECK(check([](auto& t, auto v) { return linear(t, v[0], v[1], v[2]); }, {&x, &w, &b}) < 1e-4);

    Tensor<double> img = random_tensor({2, 3, 5, 6}, rng), k = random_tensor({4, 3, 3, 3}, rng),
                   kb = random_tensor({4}, rng);
    CHECK(check([](auto& t, auto v) { return conv2d(t, v[0], v[1], v[2], {1, 1, 1, 1}); }, {&img, &k, &kb}) < 1e-4);
    Tensor<double> img2 = random_tensor({1, 2, 7, 7}, rng), k2 = random_tensor({3, 2, 3, 3}, rng),
                   kb2 = random_tensor({3}, rng);
    CHECK(check([](auto& t, auto v) { return conv2d(t, v[0], v[1], v[2], {2, 2, 0, 0}); }, {&img2, &k2, &kb2}) < 1e-4);

    Tensor<double> seq = random_tensor({2, 3, 10}, rng), k1 = random_tensor({4, 3, 5}, rng), b1 = random_tensor({4}, rng);
    CHECK(check([](auto& t, auto v) { return conv1d(t, v[0], v[1], v[2], 1, 2); }, {&seq, &k1, &b1}) < 1e-4);
    CHECK(check([](auto& t, auto v) { return conv1d(t, v[0], v[1], v[2], 1, 0); }, {&seq, &k1, &b1}) < 1e-4);
  }

  TEST_CASE("quadratic loss gradient is essentially exact") {
    std::mt19937_64 rng(4);
    Tensor<double> W = random_tensor({3, 2}, rng), x = random_tensor({4, 3}, rng), zero({2});
    Tensor<double> y = random_tensor({4, 2}, rng);
    const auto r = grad_check([&](Tape<double>& t) {
      const Var out = linear(t, t.constant(x), t.watch(W), t.constant(zero));
      return sum(t, square(t, sub(t, out, t.constant(y))));
    }, {&W});
    CHECK(r.max_rel_error < 1e-7);
  }

  TEST_CASE("corrupted backward is flagged") {
    std::mt19937_64 rng(5);
    Tensor<double> a = random_tensor({10}, rng);
    const auto r = grad_check([&](Tape<double>& t) {
      const Var v = t.watch(a);
      Tensor<double> out(t.shape(v), t.value(v).data.array().square().matrix());
      const Var sq = t.record(std::move(out), {v}, [v](Tape<double>& tp, Var o) {
        tp.grad(v) -= (2.0 * tp.value(v).data.array() * tp.grad(o).array()).matrix();
      });
      return sum(t, sq);
    }, {&a});
    CHECK(r.max_rel_error > 0.5);
  }

  TEST_CASE("conv2d examples") {
    Tape<double> t;
    Tensor<double> x({1, 1, 5, 5}, Vec<double>::LinSpaced(25, 1, 25));
    const Var id = conv2d(t, t.constant(x), t.constant(Tensor<double>({1, 1, 1, 1}, Vec<double>::Ones(1))),
                          t.constant(Tensor<double>({1})));
    CHECK(t.value(id).data == x.data);
    const Var nine = conv2d(t, t.constant(Tensor<double>({1, 1, 5, 5}, Vec<double>::Ones(25))),
                            t.constant(Tensor<double>({1, 1, 3, 3}, Vec<double>::Ones(9))), t.constant(Tensor<double>({1})));
    CHECK(t.shape(nine) == Shape{1, 1, 3, 3});
    CHECK((t.value(nine).data.array() == 9.0).all());
  }

  TEST_CASE("conv1d and linear examples") {
    Tape<double> t;
    Tensor<double> x({1, 1, 4}, Vec<double>::LinSpaced(4, 1, 4));
    const Var id = conv1d(t, t.constant(x), t.constant(Tensor<double>({1, 1, 1}, Vec<double>::Ones(1))),
                          t.constant(Tensor<double>({1})));
    CHECK(t.value(id).data == x.data);
    const Var ms = conv1d(t, t.constant(x), t.constant(Tensor<double>({1, 1, 2}, Vec<double>::Ones(2))),
                          t.constant(Tensor<double>({1})));
    CHECK(t.value(ms).data == (Vec<double>(3) << 3, 5, 7).finished());

    Tensor<double> in({1, 2}, (Vec<double>(2) << 1, 2).finished());
    Tensor<double> w({2, 2}, (Vec<double>(4) << 1, 0, 0, 1).finished());
    Tensor<double> b({2}, Vec<double>::Ones(2));
    const Var y = linear(t, t.constant(in), t.constant(w), t.constant(b));
    CHECK(t.value(y).data == (Vec<double>(2) << 2, 3).finished());
    const Var y0 = linear(t, t.constant(in), t.constant(w), t.constant(Tensor<double>({2})));
    CHECK(t.value(y0).data == in.data);
  }

  TEST_CASE("softmax and std examples") {
    Tape<double> t;
    const Var p = softmax(t, t.constant(Tensor<double>({1, 5})));
    for (Index i = 0; i < 5; ++i) CHECK(t.value(p).data[i] == doctest::Approx(0.2));
    CHECK(t.value(p).data.sum() == doctest::Approx(1.0));
    const Var s = std_reduce(t, t.constant(Tensor<double>({1, 5}, (Vec<double>(5) << 1, 0, 0, 0, 0).finished())));
    CHECK(t.item(s) == doctest::Approx(0.4).epsilon(1e-12));
  }

  TEST_CASE("shape errors are reported") {
    Tape<double> t;
    const Var a = t.constant(Tensor<double>({2, 3})), b = t.constant(Tensor<double>({3, 2}));
    CHECK_THROWS_AS(add(t, a, b), std::invalid_argument);
    CHECK_THROWS_AS(linear(t, a, a, t.constant(Tensor<double>({3}))), std::invalid_argument);
    CHECK_THROWS_AS(reshape(t, a, Shape{7}), std::invalid_argument);
    CHECK_THROWS_AS(t.backward(a), std::invalid_argument);
  }

  TEST_CASE("weight sharing accumulates gradients") {
    Tensor<double> a({3}, (Vec<double>(3) << 1, 2, 3).finished(), true);
    a.zero_grad();
    Tape<double> t;
    const Var v1 = t.watch(a), v2 = t.watch(a);
    t.backward(sum(t, add(t, square(t, v1), scale(t, v2, 3.0))));
    CHECK(*a.grad == (Vec<double>(3) << 5, 7, 9).finished());
  }

  TEST_CASE("adam on zero gradient leaves parameters unchanged") {
    ParamSet<double> ps;
    ps.add("w", Tensor<double>({4}, Vec<double>::LinSpaced(4, 1, 4), true));
    ps.zero_grad();
    AdamState<double> st;
    const Vec<double> before = ps[0].data;
    adam_step(ps, st);
    CHECK(ps[0].data == before);
    CHECK(st.t == 1);
  }

  TEST_CASE("adam first step moves each coordinate by the learning rate") {
    ParamSet<double> ps;
    ps.add("w", Tensor<double>({3}, Vec<double>::Zero(3), true));
    ps[0].grad = (Vec<double>(3) << 2.0, -0.5, 1e-3).finished();
    AdamState<double> st;
    st.lr = 0.01;
    adam_step(ps, st);
    CHECK(ps[0].data[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(ps[0].data[1] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(ps[0].data[2] == doctest::Approx(-0.01).epsilon(1e-4));
  }

  TEST_CASE("adam trajectories are deterministic") {
    auto run = [] {
      std::mt19937_64 rng(7);
      ParamSet<double> ps;
      ps.add("w", random_tensor({6}, rng));
      ps[0].requires_grad = true;
      AdamState<double> st;
      for (int i = 0; i < 20; ++i) {
        ps[0].grad = ps[0].data * 2.0;
        adam_step(ps, st);
      }
      return ps.checksum();
    };
    CHECK(run() == run());
  }

  TEST_CASE("gradient clipping bounds the global norm") {
    ParamSet<double> ps;
    ps.add("a", Tensor<double>({2}, Vec<double>::Zero(2), true));
    ps.add("b", Tensor<double>({1}, Vec<double>::Zero(1), true));
    ps[0].grad = (Vec<double>(2) << 3, 4).finished();
    ps[1].grad = (Vec<double>(1) << 12).finished();
    CHECK(clip_grad_norm(ps, 5.0) == doctest::Approx(13.0));
    CHECK(grad_norm(ps) == doctest::Approx(5.0));
    CHECK(clip_grad_norm(ps, 10.0) == doctest::Approx(5.0));
    CHECK(grad_norm(ps) == doctest::Approx(5.0));
  }

  TEST_CASE("float and double tapes agree") {
    std::mt19937_64 rng(8);
    Tensor<double> x = random_tensor({2, 3, 4, 4}, rng), w = random_tensor({2, 3, 3, 3}, rng), b = random_tensor({2}, rng);
    Tape<double> td;
    const double vd = td.item(mean(td, leaky_relu(td, conv2d(td, td.constant(x), td.constant(w), td.constant(b), {1, 1, 1, 1}), 0.2)));
    Tape<float> tf;
    const float vf = tf.item(mean(tf, leaky_relu(tf, conv2d(tf, tf.constant(x.cast<float>()), tf.constant(w.cast<float>()),
                                                         tf.constant(b.cast<float>()), {1, 1, 1, 1}), 0.2f)));
    CHECK(vf == doctest::Approx(vd).epsilon(1e-5));
  }
}
