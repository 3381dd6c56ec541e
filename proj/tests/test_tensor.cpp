#include <doctest.h>

#include <cmath>

#include "dan/tensor.hpp"
#include "testutil.hpp"

using namespace dan;
using dantest::random_tensor;

TEST_CASE("sigmoid at zero") {
  Tensor x({1}, {0.0});
  CHECK(sigmoid(x).value() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("matmul identity") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor b({2, 2}, {3, 4, 5, 6});
  Tensor out = matmul(eye, b);
  for (int i = 0; i < 4; ++i) CHECK(out.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
}

TEST_CASE("softmax symmetry") {
  Tensor x({3}, {1, 1, 1});
  Tensor y = softmax(x);
  for (int i = 0; i < 3; ++i) CHECK(y.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("concat definition") {
  Tensor a({2}, {1, 2});
  Tensor b({1}, {3});
  Tensor c = concat(a, b);
  CHECK(c.shape() == std::vector<int>{3});
  CHECK(c.at(0) == 1);
  CHECK(c.at(1) == 2);
  CHECK(c.at(2) == 3);
}

TEST_CASE("shape mismatch diagnostics name both shapes") {
  Tensor a({2}, {1, 2});
  Tensor b({3}, {1, 2, 3});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("(2)"), std::invalid_argument);
  try {
    add(a, b);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("(3)") != std::string::npos);
  }
}

TEST_CASE("ln rejects non-positive input") {
  Tensor x({2}, {1.0, -0.5});
  CHECK_THROWS_AS(ln(x), std::domain_error);
  Tensor z({1}, {0.0});
  CHECK_THROWS_AS(ln(z), std::domain_error);
}

TEST_CASE("backward of x*x at x=3") {
  Tensor x({1}, {3.0});
  Tape tape;
  Tape::Scope scope(tape);
  tape.watch(x);
  Tensor loss = mul(x, x);
  tape.backward(loss);
  CHECK(x.grad_at(0) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward of mean over R^4") {
  Tensor v({4}, {1, 2, 3, 4});
  Tape tape;
  Tape::Scope scope(tape);
  tape.watch(v);
  Tensor loss = mean(v);
  tape.backward(loss);
  for (int i = 0; i < 4; ++i) CHECK(v.grad_at(i) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward of sum(sigmoid(W x)) matches finite differences") {
  dan::Rng rng(7);
  Tensor w = random_tensor({4, 3}, rng);
  Tensor x = random_tensor({3}, rng);
  double err = dantest::check_gradients(
      [](const std::vector<Tensor>& in) { return sum(sigmoid(matmul(in[0], in[1]))); }, {w, x});
  CHECK(err <= 1e-4);
}

TEST_CASE("backward rejects non-scalar loss and missing tape") {
  Tensor x({2}, {1, 2});
  Tape tape;
  {
    Tape::Scope scope(tape);
    tape.watch(x);
    Tensor y = scalar_mul(x, 2.0);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
  }
  Tensor z = Tensor::scalar(1.0);
  CHECK_THROWS_AS(dan::backward(z), std::invalid_argument);  // no active tape
}

TEST_CASE("backward rejects a loss from another tape") {
  Tensor x = Tensor::scalar(2.0);
  Tensor loss;
  {
    Tape tape1;
    Tape::Scope scope(tape1);
    tape1.watch(x);
    loss = mul(x, x);
  }
  Tape tape2;
  Tape::Scope scope(tape2);
  CHECK_THROWS_AS(tape2.backward(loss), std::invalid_argument);
}

TEST_CASE("reverse_gradient forward identity, backward sign flip") {
  Tensor x({2}, {1, 2});
  SUBCASE("forward is identity") {
    Tensor y = reverse_gradient(x, 1.0);
    CHECK(y.at(0) == 1);
    CHECK(y.at(1) == 2);
  }
  SUBCASE("lambda=1 flips the upstream gradient") {
    Tape tape;
    Tape::Scope scope(tape);
    tape.watch(x);
    Tensor loss = sum(reverse_gradient(x, 1.0));  // upstream grad [1,1]
    tape.backward(loss);
    CHECK(x.grad_at(0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(x.grad_at(1) == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("lambda=0.1 scales the upstream gradient") {
    Tensor t({1}, {5.0});
    Tape tape;
    Tape::Scope scope(tape);
    tape.watch(t);
    Tensor loss = scalar_mul(reverse_gradient(t, 0.1), 2.0);  // upstream grad [2]
    tape.backward(loss);
    CHECK(t.grad_at(0) == doctest::Approx(-0.2).epsilon(1e-12));
  }
  SUBCASE("lambda=0 produces exactly zero upstream gradients") {
    Tape tape;
    Tape::Scope scope(tape);
    tape.watch(x);
    Tensor loss = sum(sigmoid(reverse_gradient(x, 0.0)));
    tape.backward(loss);
    CHECK(x.grad_at(0) == 0.0);
    CHECK(x.grad_at(1) == 0.0);
  }
}

TEST_CASE("every primitive matches central finite differences") {
  auto sweep = dantest::primitive_gradient_sweep(/*seed=*/42, /*rounds=*/3);
  INFO("worst case: ", sweep.worst_case);
  CHECK(sweep.max_rel_err <= 1e-4);
}

TEST_CASE("softmax rows are non-negative and sum to 1") {
  dan::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    int r = 1 + rng.uniform_int(6), c = 1 + rng.uniform_int(6);
    Tensor y = softmax(random_tensor({r, c}, rng, -30.0, 30.0));
    for (int i = 0; i < r; ++i) {
      real_t s = 0;
      for (int j = 0; j < c; ++j) {
        CHECK(y.at(i, j) >= 0.0);
        s += y.at(i, j);
      }
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("loss independent of a leaf yields exactly zero gradient") {
  Tensor used({2}, {1, 2});
  Tensor untouched({3}, {4, 5, 6});
  Tape tape;
  Tape::Scope scope(tape);
  tape.watch(used);
  tape.watch(untouched);
  Tensor loss = sum(used);
  tape.backward(loss);
  CHECK(untouched.has_grad());
  for (int i = 0; i < 3; ++i) CHECK(untouched.grad_at(i) == 0.0);
}

TEST_CASE("forward_primitive dispatches every kind") {
  Tensor v({2}, {1.0, 2.0});
  CHECK(forward_primitive(OpKind::Sum, {v}).value() == doctest::Approx(3.0));
  CHECK(forward_primitive(OpKind::ScalarMul, {v}, 2.0).at(1) == doctest::Approx(4.0));
  CHECK_THROWS_AS(forward_primitive(OpKind::Add, {v}), std::invalid_argument);  // arity
}

TEST_CASE("operations on finite inputs stay finite") {
  dan::Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a = random_tensor({4, 4}, rng, -50.0, 50.0);
    Tensor b = random_tensor({4, 4}, rng, -50.0, 50.0);
    CHECK(all_finite(matmul(a, b)));
    CHECK(all_finite(sigmoid(a)));
    CHECK(all_finite(tanh(a)));
    CHECK(all_finite(softmax(a)));
    CHECK(all_finite(mul(a, b)));
  }
}
