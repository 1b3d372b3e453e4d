#include <doctest.h>

#include <functional>
#include <vector>

#include "splatsdf/ad/finite_diff.hpp"
#include "splatsdf/ad/tape.hpp"
#include "splatsdf/core/rng.hpp"

using namespace splatsdf;
using Tape = ad::Tape<double>;
using Mat = ad::Tensor<double>;

namespace {

Mat random_mat(Rng& rng, Index r, Index c, double lo = -1.0, double hi = 1.0) {
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// Checks analytic leaf gradients of `graph` (tape -> scalar var) against
// central differences over the single leaf matrix `x0`.
double check_graph(const Mat& x0,
                   const std::function<Tape::Var(Tape&, Tape::Var)>& graph,
                   double eps = 1e-6) {
  Tape tape;
  auto x = tape.input(x0);
  auto out = graph(tape, x);
  tape.backward(out);
  Mat g = tape.gradient(x);

  VecX<double> params(x0.size());
  VecX<double> analytic(x0.size());
  for (Index i = 0; i < x0.size(); ++i) {
    params[i] = x0(i / x0.cols(), i % x0.cols());
    analytic[i] = g(i / x0.cols(), i % x0.cols());
  }
  auto f = [&](const VecX<double>& p) {
    Mat xm(x0.rows(), x0.cols());
    for (Index i = 0; i < x0.size(); ++i) xm(i / x0.cols(), i % x0.cols()) = p[i];
    Tape t;
    auto xv = t.input(xm);
    return t.value(graph(t, xv))(0, 0);
  };
  return ad::finite_diff_check(f, params, analytic, eps);
}

}  // namespace

TEST_CASE("forward examples") {
  Tape tape;
  Mat a(1, 2), b(1, 2);
  a << 1, 2;
  b << 3, 4;
  auto s = tape.add(tape.input(a), tape.input(b));
  CHECK(tape.value(s)(0, 0) == 4);
  CHECK(tape.value(s)(0, 1) == 6);

  Mat eye = Mat::Identity(3, 3);
  Mat v(3, 1);
  v << 0.5, -1.25, 2.0;
  auto mv = tape.matmul(tape.input(eye), tape.input(v));
  CHECK(tape.value(mv).isApprox(v));

  Mat zero = Mat::Zero(1, 1);
  auto sg = tape.sigmoid(tape.input(zero));
  CHECK(tape.value(sg)(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("backward on simple scalars") {
  {
    // f(x) = x^2 at x=3 -> grad 6
    Tape tape;
    Mat x(1, 1);
    x << 3.0;
    auto xv = tape.input(x);
    auto y = tape.mul(xv, xv);
    tape.backward(y);
    CHECK(tape.gradient(xv)(0, 0) == doctest::Approx(6.0));
  }
  {
    // f(x) = sigmoid(x) at 0 -> grad 0.25
    Tape tape;
    Mat x = Mat::Zero(1, 1);
    auto xv = tape.input(x);
    auto y = tape.sigmoid(xv);
    tape.backward(y);
    CHECK(tape.gradient(xv)(0, 0) == doctest::Approx(0.25));
  }
}

TEST_CASE("||Wx+b||^2 gradient matches finite differences") {
  Rng rng(17);
  Mat w0 = random_mat(rng, 4, 3, -0.5, 0.5);
  Mat b0 = random_mat(rng, 4, 1, -0.5, 0.5);
  Mat xc = random_mat(rng, 3, 1);

  Tape tape;
  auto w = tape.input(w0);
  auto b = tape.input(b0);
  auto x = tape.constant(xc);
  auto y = tape.add(tape.matmul(w, x), b);
  auto loss = tape.sum(tape.mul(y, y));
  tape.backward(loss);
  Mat gw = tape.gradient(w), gb = tape.gradient(b);

  VecX<double> params(w0.size() + b0.size());
  VecX<double> analytic(params.size());
  Index k = 0;
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j, ++k) {
      params[k] = w0(i, j);
      analytic[k] = gw(i, j);
    }
  for (Index i = 0; i < 4; ++i, ++k) {
    params[k] = b0(i, 0);
    analytic[k] = gb(i, 0);
  }
  auto f = [&](const VecX<double>& p) {
    Mat wm(4, 3), bm(4, 1);
    Index q = 0;
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 3; ++j, ++q) wm(i, j) = p[q];
    for (Index i = 0; i < 4; ++i, ++q) bm(i, 0) = p[q];
    Tape t;
    auto yv = t.add(t.matmul(t.input(wm), t.constant(xc)), t.input(bm));
    return t.value(t.sum(t.mul(yv, yv)))(0, 0);
  };
  CHECK(ad::finite_diff_check(f, params, analytic, 1e-4) < 1e-8);
}

TEST_CASE("finite_diff_check harness contract") {
  // linear -> essentially exact
  VecX<double> p(3);
  p << 0.3, -0.7, 1.1;
  VecX<double> g(3);
  g << 2.0, -1.0, 0.5;
  auto lin = [&](const VecX<double>& x) { return 2.0 * x[0] - x[1] + 0.5 * x[2]; };
  CHECK(ad::finite_diff_check(lin, p, g, 1e-5) < 1e-9);

  // exp at 1
  VecX<double> p1(1), g1(1);
  p1 << 1.0;
  g1 << std::exp(1.0);
  auto ex = [](const VecX<double>& x) { return std::exp(x[0]); };
  CHECK(ad::finite_diff_check(ex, p1, g1, 1e-5) < 1e-6);

  // non-finite probe raises
  auto bad = [](const VecX<double>& x) { return std::log(x[0]); };
  VecX<double> p2(1), g2(1);
  p2 << 1e-6;
  g2 << 1e6;
  CHECK_THROWS(ad::finite_diff_check(bad, p2, g2, 1e-5));
}

TEST_CASE("small MLP loss gradient, 64+ params") {
  Rng rng(3);
  const Index in = 4, hid = 12, out = 1;
  Mat w1 = random_mat(rng, in, hid, -0.5, 0.5);
  Mat b1 = random_mat(rng, 1, hid, -0.2, 0.2);
  Mat w2 = random_mat(rng, hid, out, -0.5, 0.5);
  Mat xc = random_mat(rng, 5, in);

  auto build = [&](Tape& t, const Mat& w1m, const Mat& b1m, const Mat& w2m,
                   Tape::Var* vw1, Tape::Var* vb1, Tape::Var* vw2) {
    auto w1v = t.input(w1m), b1v = t.input(b1m), w2v = t.input(w2m);
    if (vw1) *vw1 = w1v;
    if (vb1) *vb1 = b1v;
    if (vw2) *vw2 = w2v;
    auto h = t.softplus(t.add_row(t.matmul(t.constant(xc), w1v), b1v), 1.0);
    auto y = t.matmul(h, w2v);
    return t.mean(t.mul(y, y));
  };

  Tape tape;
  Tape::Var vw1, vb1, vw2;
  auto loss = build(tape, w1, b1, w2, &vw1, &vb1, &vw2);
  tape.backward(loss);
  Mat g1m = tape.gradient(vw1), g2m = tape.gradient(vb1), g3m = tape.gradient(vw2);

  const Index np = w1.size() + b1.size() + w2.size();
  REQUIRE(np >= 64);
  VecX<double> params(np), analytic(np);
  Index k = 0;
  auto pack = [&](const Mat& v, const Mat& g) {
    for (Index i = 0; i < v.size(); ++i, ++k) {
      params[k] = v(i / v.cols(), i % v.cols());
      analytic[k] = g(i / v.cols(), i % v.cols());
    }
  };
  pack(w1, g1m);
  pack(b1, g2m);
  pack(w2, g3m);

  auto f = [&](const VecX<double>& p) {
    Mat w1m(in, hid), b1m(1, hid), w2m(hid, out);
    Index q = 0;
    for (Index i = 0; i < w1m.size(); ++i, ++q) w1m(i / hid, i % hid) = p[q];
    for (Index i = 0; i < b1m.size(); ++i, ++q) b1m(0, i) = p[q];
    for (Index i = 0; i < w2m.size(); ++i, ++q) w2m(i / out, i % out) = p[q];
    Tape t;
    return t.value(build(t, w1m, b1m, w2m, nullptr, nullptr, nullptr))(0, 0);
  };
  CHECK(ad::finite_diff_check(f, params, analytic, 1e-5) < 1e-3);
}

TEST_CASE("every primitive matches finite differences at random points") {
  Rng rng(42);
  struct Case {
    const char* name;
    std::function<Tape::Var(Tape&, Tape::Var)> graph;
    double lo, hi;
    Index r, c;
  };
  Rng aux(7);
  const Mat other = random_mat(aux, 3, 4, 0.2, 1.5);
  const Mat rowv = random_mat(aux, 1, 4, -1, 1);
  const Mat colv = random_mat(aux, 3, 1, 0.3, 1.2);
  const Mat mm = random_mat(aux, 4, 2, -1, 1);
  const Mat w38 = random_mat(aux, 3, 8);
  const Mat w32 = random_mat(aux, 3, 2);
  const Mat w43 = random_mat(aux, 4, 3);
  const Mat w34 = random_mat(aux, 3, 4);
  const Mat w39 = random_mat(aux, 3, 9);

  std::vector<Case> cases = {
      {"add", [&](Tape& t, Tape::Var x) { return t.sum(t.add(x, t.constant(other))); }, -1, 1, 3, 4},
      {"sub", [&](Tape& t, Tape::Var x) { return t.sum(t.sub(x, t.constant(other))); }, -1, 1, 3, 4},
      {"mul", [&](Tape& t, Tape::Var x) { return t.sum(t.mul(x, t.constant(other))); }, -1, 1, 3, 4},
      {"div", [&](Tape& t, Tape::Var x) { return t.sum(t.div(t.constant(other), x)); }, 0.5, 2, 3, 4},
      {"scale", [&](Tape& t, Tape::Var x) { return t.sum(t.scale(x, -2.5, 0.75)); }, -1, 1, 3, 4},
      {"matmul", [&](Tape& t, Tape::Var x) { return t.sum(t.matmul(x, t.constant(mm))); }, -1, 1, 3, 4},
      {"add_row", [&](Tape& t, Tape::Var x) { return t.sum(t.add_row(x, t.constant(rowv))); }, -1, 1, 3, 4},
      {"colmul", [&](Tape& t, Tape::Var x) { return t.sum(t.colmul(x, t.constant(colv))); }, -1, 1, 3, 4},
      {"exp", [&](Tape& t, Tape::Var x) { return t.sum(t.exp(x)); }, -1, 1, 3, 4},
      {"log", [&](Tape& t, Tape::Var x) { return t.sum(t.log(x)); }, 0.2, 2, 3, 4},
      {"sigmoid", [&](Tape& t, Tape::Var x) { return t.sum(t.sigmoid(x)); }, -2, 2, 3, 4},
      {"softplus", [&](Tape& t, Tape::Var x) { return t.sum(t.softplus(x, 3.0)); }, -2, 2, 3, 4},
      {"relu", [&](Tape& t, Tape::Var x) { return t.sum(t.relu(x)); }, 0.1, 2, 3, 4},
      {"sin", [&](Tape& t, Tape::Var x) { return t.sum(t.sin(x)); }, -3, 3, 3, 4},
      {"cos", [&](Tape& t, Tape::Var x) { return t.sum(t.cos(x)); }, -3, 3, 3, 4},
      {"abs", [&](Tape& t, Tape::Var x) { return t.sum(t.abs(x)); }, 0.1, 2, 3, 4},
      {"sqrt", [&](Tape& t, Tape::Var x) { return t.sum(t.sqrt(x)); }, 0.3, 2, 3, 4},
      {"clamp_min", [&](Tape& t, Tape::Var x) { return t.sum(t.clamp_min(x, 0.5)); }, 0.8, 2, 3, 4},
      {"mean", [&](Tape& t, Tape::Var x) { return t.mean(x); }, -1, 1, 3, 4},
      {"row_sum", [&](Tape& t, Tape::Var x) { return t.sum(t.row_sum(x)); }, -1, 1, 3, 4},
      {"row_norm", [&](Tape& t, Tape::Var x) { return t.sum(t.row_norm(x)); }, 0.4, 2, 3, 4},
      {"hcat", [&](Tape& t, Tape::Var x) { return t.sum(t.mul(t.hcat(x, x), t.constant(w38))); }, -1, 1, 3, 4},
      {"slice_cols", [&](Tape& t, Tape::Var x) { return t.sum(t.mul(t.slice_cols(x, 1, 2), t.constant(w32))); }, -1, 1, 3, 4},
      {"reshape", [&](Tape& t, Tape::Var x) { return t.sum(t.mul(t.reshape(x, 4, 3), t.constant(w43))); }, -1, 1, 3, 4},
      {"cumprod", [&](Tape& t, Tape::Var x) { return t.sum(t.mul(t.cumprod_exclusive_row(x), t.constant(w34))); }, 0.2, 0.9, 3, 4},
      {"quat_to_rot", [&](Tape& t, Tape::Var x) { return t.sum(t.mul(t.quat_to_rot(x), t.constant(w39))); }, -1, 1, 3, 4},
  };

  for (auto& c : cases) {
    CAPTURE(c.name);
    double worst = 0;
    for (int rep = 0; rep < 4; ++rep) {
      Mat x0 = random_mat(rng, c.r, c.c, c.lo, c.hi);
      worst = std::max(worst, check_graph(x0, c.graph));
    }
    CHECK_MESSAGE(worst < 1e-3, c.name);
  }
}

TEST_CASE("gradient accumulation is linear") {
  Rng rng(5);
  Mat x0 = random_mat(rng, 2, 3);
  auto fa = [](Tape& t, Tape::Var x) { return t.sum(t.sin(x)); };
  auto fb = [](Tape& t, Tape::Var x) { return t.mean(t.mul(x, x)); };

  Tape t1;
  auto x1 = t1.input(x0);
  t1.backward(t1.add(fa(t1, x1), fb(t1, x1)));
  Mat g_sum = t1.gradient(x1);

  Tape t2;
  auto x2 = t2.input(x0);
  t2.backward(fa(t2, x2));
  Mat ga = t2.gradient(x2);
  Tape t3;
  auto x3 = t3.input(x0);
  t3.backward(fb(t3, x3));
  Mat gb = t3.gradient(x3);

  CHECK((g_sum - (ga + gb)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("replaying the same tape is bit-identical") {
  Rng rng(11);
  Mat x0 = random_mat(rng, 4, 4, 0.1, 1.0);
  auto build = [&](Tape& t, Tape::Var x) {
    auto h = t.softplus(t.matmul(x, t.constant(Mat::Identity(4, 4))), 2.0);
    return t.mean(t.mul(h, t.sigmoid(h)));
  };
  Mat g1, g2;
  {
    Tape t;
    auto x = t.input(x0);
    auto out = build(t, x);
    t.backward(out);
    g1 = t.gradient(x);
    t.backward(out);  // replay on the same tape
    g2 = t.gradient(x);
  }
  CHECK(memcmp(g1.data(), g2.data(), sizeof(double) * g1.size()) == 0);

  Tape t2;
  auto x = t2.input(x0);
  t2.backward(build(t2, x));
  Mat g3 = t2.gradient(x);
  CHECK(memcmp(g1.data(), g3.data(), sizeof(double) * g1.size()) == 0);
}

TEST_CASE("error paths") {
  Tape tape;
  Mat a = Mat::Zero(2, 3), b = Mat::Zero(3, 2);
  CHECK_THROWS_AS(tape.add(tape.input(a), tape.input(b)), std::invalid_argument);

  Mat neg = -Mat::Ones(1, 1);
  CHECK_THROWS(tape.log(tape.input(neg)));  // log(-1) -> nan -> error state

  Mat ok = Mat::Ones(2, 2);
  auto v = tape.input(ok);
  CHECK_THROWS_AS(tape.backward(v), std::invalid_argument);  // non-scalar seed
}
