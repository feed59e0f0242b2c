#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "qpace/adam.hpp"
#include "qpace/gradcheck.hpp"
#include "qpace/loss.hpp"
#include "qpace/random.hpp"
#include "qpace/tensor.hpp"

using namespace qpace;

TEST_CASE("tensor shape contract") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), ContractError);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  t.at({1, 2}) = 5.0;
  CHECK(t[5] == 5.0);
  t[0] = std::nan("");
  CHECK_THROWS_AS(t.require_finite("test"), ContractError);
}

TEST_CASE("adam first step matches the hand-evaluated update") {
  // t=1, g=1: m_hat=1, v_hat=1, delta = -lr / sqrt(1 + eps)
  Tensor params({1}, {0.0});
  Tensor grads({1}, {1.0});
  AdamState state = AdamState::init({1});
  auto [updated, next] = adam_step(params, grads, state);
  CHECK(next.step == 1);
  CHECK_THAT(updated[0], Catch::Matchers::WithinAbs(-9.99999995e-4, 1e-12));
}

TEST_CASE("adam zero gradient leaves parameters bit-identical") {
  Tensor params({3}, {1.5, -2.25, 0.125});
  Tensor grads({3}, {0.0, 0.0, 0.0});
  AdamState state = AdamState::init({3});
  auto [updated, next] = adam_step(params, grads, state);
  CHECK(next.step == 1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(updated[i] == params[i]);
}

TEST_CASE("adam first-step magnitude is scale invariant") {
  Tensor params({1}, {0.0});
  Tensor grads({1}, {1000.0});
  AdamState state = AdamState::init({1});
  auto [updated, next] = adam_step(params, grads, state);
  CHECK_THAT(std::fabs(updated[0]), Catch::Matchers::WithinAbs(1e-3, 1e-12));
}

TEST_CASE("adam shape mismatch is a contract violation") {
  Tensor params({2});
  Tensor grads({3});
  AdamState state = AdamState::init({2});
  CHECK_THROWS_AS(adam_step(params, grads, state), ContractError);
}

TEST_CASE("adam steps are bit-deterministic") {
  auto run = [] {
    Tensor params({4}, {0.1, 0.2, 0.3, 0.4});
    AdamState state = AdamState::init({4});
    RandomStream rs(99);
    for (int i = 0; i < 50; ++i) {
      Tensor grads({4});
      for (auto& g : grads.values()) g = rs.uniform(-1.0, 1.0);
      adam_step_inplace(params, grads, state);
    }
    return params;
  };
  Tensor a = run();
  Tensor b = run();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("finite differences of x^2 and a constant") {
  auto square = [](const Tensor& x) { return x[0] * x[0]; };
  Tensor x({1}, {3.0});
  Tensor g = finite_diff_grad(square, x, 1e-5);
  CHECK_THAT(g[0], Catch::Matchers::WithinAbs(6.0, 1e-6));

  auto constant = [](const Tensor&) { return 4.25; };
  Tensor gc = finite_diff_grad(constant, x, 1e-5);
  CHECK(gc[0] == 0.0);
}

TEST_CASE("finite difference of pinball away from the kink") {
  // y_hat > y branch of the quantile loss has slope (1 - alpha)
  auto f = [](const Tensor& yhat) { return pinball(1.0, yhat[0], 0.9); };
  Tensor x({1}, {2.0});
  Tensor g = finite_diff_grad(f, x, 1e-5);
  CHECK_THAT(g[0], Catch::Matchers::WithinAbs(0.1, 1e-9));
}

TEST_CASE("finite difference reports the offending coordinate") {
  auto f = [](const Tensor& x) { return std::sqrt(x[1]); };  // NaN for x[1] < 0
  Tensor x({3}, {1.0, 1e-10, 1.0});
  try {
    finite_diff_grad(f, x, 1e-5);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("coordinate 1") != std::string::npos);
  }
}

TEST_CASE("random stream determinism and label separation") {
  RandomStream a(42);
  RandomStream b(42);
  RandomStream ai = a.derive("init");
  RandomStream bi = b.derive("init");
  for (int i = 0; i < 100; ++i) CHECK(ai.next_u64() == bi.next_u64());

  RandomStream noise = a.derive("noise");
  RandomStream init2 = a.derive("init");
  bool differs = false;
  for (int i = 0; i < 32; ++i) {
    if (noise.next_u64() != init2.next_u64()) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("derived streams ignore parent draws") {
  RandomStream a(7);
  RandomStream before = a.derive("child");
  for (int i = 0; i < 10; ++i) a.uniform();
  RandomStream after = a.derive("child");
  for (int i = 0; i < 20; ++i) CHECK(before.next_u64() == after.next_u64());
}

TEST_CASE("uniform draws have the right mean") {
  RandomStream rs(2024);
  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = rs.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    acc += u;
  }
  CHECK_THAT(acc / n, Catch::Matchers::WithinAbs(0.5, 0.01));
}

TEST_CASE("indexed substreams differ") {
  RandomStream root(5);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t i = 0; i < 50; ++i) firsts.insert(root.derive("iter", i).next_u64());
  CHECK(firsts.size() == 50);
}
