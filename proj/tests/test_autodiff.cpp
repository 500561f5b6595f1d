#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsde/rng.hpp"
#include "bsde/tape.hpp"

using namespace bsde;

namespace {

Tensor rand_in(GaussianStream& rng, std::int64_t r, std::int64_t c, double lo, double hi) {
  Tensor t(r, c);
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("forward values of primitives") {
  Tape tape;
  Var v = tape.constant(Tensor(1, 3, {-1.0, 0.0, 2.0}));
  Var r = relu(v);
  CHECK(r.val().data == std::vector<double>{0.0, 0.0, 2.0});

  Var ms = mean_all(square(tape.constant(Tensor(1, 2, {3.0, 4.0}))));
  CHECK(ms.val().value() == doctest::Approx(12.5));  // (9+16)/2

  Var id = matmul(tape.constant(Tensor::identity(3)), tape.constant(Tensor(3, 1, {1.0, 2.0, 3.0})));
  CHECK(id.val().data == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("backward basics") {
  // d/dx sum(x) = 1
  {
    Tape tape;
    Var x = tape.leaf(Tensor(2, 3, {1, 2, 3, 4, 5, 6}), "x");
    Var root = mean_all(x);
    GradientMap g = tape.backward(affine(root, 6.0, 0.0));  // sum = 6 * mean
    for (double v : g.by_leaf[0].data) CHECK(v == doctest::Approx(1.0));
  }
  // d/dx 0.5|x|^2 = x
  {
    Tape tape;
    Var x = tape.leaf(Tensor(1, 2, {3.0, -4.0}), "x");
    Var root = affine(mean_all(square(x)), 1.0, 0.0);  // mean of squares = |x|^2 / 2
    GradientMap g = tape.backward(root);
    CHECK(g.by_leaf[0].data[0] == doctest::Approx(3.0));
    CHECK(g.by_leaf[0].data[1] == doctest::Approx(-4.0));
  }
  // non-scalar root rejected; unreached leaf gets zeros
  {
    Tape tape;
    Var x = tape.leaf(Tensor(2, 2), "x");
    Var y = tape.leaf(Tensor::scalar(1.0), "y");
    CHECK_THROWS_AS(tape.backward(x), std::logic_error);
    GradientMap g = tape.backward(mean_all(square(y)));
    CHECK(g.by_leaf[0].rows == 2);
    for (double v : g.by_leaf[0].data) CHECK(v == 0.0);
  }
}

TEST_CASE("finite_diff_check contract") {
  // product of two scalar leaves at (2,3): gradients (3,2)
  auto f = [](const std::vector<Tensor>& p) { return p[0].value() * p[1].value(); };
  std::vector<Tensor> params = {Tensor::scalar(2.0), Tensor::scalar(3.0)};
  std::vector<Tensor> grads = {Tensor::scalar(3.0), Tensor::scalar(2.0)};
  CHECK(finite_diff_check(f, params, grads, 1e-6) <= 1e-8);

  // quadratic: exact for any small eps
  auto q = [](const std::vector<Tensor>& p) {
    double s = 0.0;
    for (double v : p[0].data) s += v * v;
    return s;
  };
  std::vector<Tensor> qp = {Tensor(1, 3, {1.0, -2.0, 0.5})};
  std::vector<Tensor> qg = {Tensor(1, 3, {2.0, -4.0, 1.0})};
  CHECK(finite_diff_check(q, qp, qg, 1e-4) <= 1e-8);

  // constant function: gradient 0, error 0
  auto c = [](const std::vector<Tensor>&) { return 7.0; };
  std::vector<Tensor> cp = {Tensor(1, 2, {1.0, 2.0})};
  std::vector<Tensor> cg = {Tensor(1, 2)};
  CHECK(finite_diff_check(c, cp, cg, 1e-6) == 0.0);

  CHECK_THROWS_AS(finite_diff_check(c, cp, cg, 0.0), std::invalid_argument);
}

namespace {

/// Scalar graph touching every primitive; leaves: a (4,3), b (3,5), c (4,5),
/// row (1,5), col (4,1).
Var primitive_zoo(Tape& tape, const std::vector<Tensor>& p) {
  Var a = tape.leaf(p[0], "a");
  Var b = tape.leaf(p[1], "b");
  Var c = tape.leaf(p[2], "c");
  Var row = tape.leaf(p[3], "row");
  Var col = tape.leaf(p[4], "col");
  Var t = matmul(a, b);
  t = add(t, row);
  t = sub(t, col);
  t = mul(t, c);
  t = div(t, affine(square(c), 1.0, 1.5));  // denominators kept away from 0
  t = add(relu(t), exp_v(affine(t, 0.3, 0.0)));
  t = add(t, sin_v(c));
  t = sub(t, cos_v(c));
  t = add(t, sqrt_v(affine(square(t), 1.0, 0.1)));
  Var j = concat_cols(rowsum(t), square(col));  // (4,2)
  Var root = mean_all(add(square(j), neg(j)));
  return add(root, mean_all(square(colmean(t))));
}

}  // namespace

TEST_CASE("every primitive matches central finite differences") {
  GaussianStream rng(7);
  std::vector<Tensor> params = {rand_in(rng, 4, 3, -2, 2), rand_in(rng, 3, 5, -2, 2),
                                rand_in(rng, 4, 5, -2, 2), rand_in(rng, 1, 5, -2, 2),
                                rand_in(rng, 4, 1, -2, 2)};
  auto f = [](const std::vector<Tensor>& p) {
    Tape tape;
    return primitive_zoo(tape, p).val().value();
  };

  Tape tape;
  Var root = primitive_zoo(tape, params);
  CHECK(f(params) == doctest::Approx(root.val().value()));

  GradientMap g = tape.backward(root);
  CHECK(finite_diff_check(f, params, g.by_leaf, 1e-6) <= 1e-4);
}

TEST_CASE("backward is linear in the root") {
  GaussianStream rng(11);
  Tensor x0 = rand_in(rng, 3, 3, -1, 1);
  auto grads_of = [&](double a, double b) {
    Tape tape;
    Var x = tape.leaf(x0, "x");
    Var f = mean_all(square(x));
    Var g = mean_all(exp_v(affine(x, 0.5, 0.0)));
    Var combo = add(affine(f, a, 0.0), affine(g, b, 0.0));
    return tape.backward(combo).by_leaf[0];
  };
  Tensor gf = grads_of(1.0, 0.0), gg = grads_of(0.0, 1.0), gc = grads_of(2.5, -1.5);
  for (std::size_t i = 0; i < gc.data.size(); ++i)
    CHECK(gc.data[i] == doctest::Approx(2.5 * gf.data[i] - 1.5 * gg.data[i]).epsilon(1e-12));
}

TEST_CASE("replaying a tape is bit-identical") {
  GaussianStream rng(5);
  Tensor x0 = rand_in(rng, 6, 4, -2, 2);
  auto run = [&]() {
    Tape tape;
    Var x = tape.leaf(x0, "x");
    Var y = mean_all(mul(exp_v(affine(x, 0.2, 0.0)), sin_v(x)));
    auto g = tape.backward(y);
    return std::make_pair(y.val().value(), g.by_leaf[0]);
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  CHECK(v1 == v2);
  for (std::size_t i = 0; i < g1.data.size(); ++i) CHECK(g1.data[i] == g2.data[i]);
}

TEST_CASE("gradient accumulates over fan-out") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(1.5), "x");
  Var y = add(mul(x, x), affine(x, 3.0, 0.0));  // x^2 + 3x -> dy/dx = 2x + 3
  GradientMap g = tape.backward(y);
  CHECK(g.by_leaf[0].value() == doctest::Approx(6.0));
}

TEST_CASE("checked mode rejects non-finite values") {
  Tape tape;
  tape.set_checked(true);
  Var x = tape.constant(Tensor(1, 2, {1.0, 0.0}));
  CHECK_THROWS(div(x, x));  // 0/0 -> NaN recorded
}
