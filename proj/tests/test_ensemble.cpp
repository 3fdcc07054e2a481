#include <cmath>
#include <functional>

#include "doctest.h"
#include "physiodecode/ensemble.hpp"
#include "physiodecode/error.hpp"
#include "physiodecode/rng.hpp"

using namespace physiodecode;
using namespace physiodecode::ensemble;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Io;
}

Matrix random_proba(std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  Matrix p(rows, 4);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (auto& v : p.row(i)) s += (v = rng.uniform());
    for (auto& v : p.row(i)) v /= s;
  }
  return p;
}

EnsembleModel small_ensemble() {
  Rng rng(1);
  Matrix x(80, 3);
  std::vector<int> y(80);
  std::vector<double> w(80, 1.0);
  for (std::size_t i = 0; i < 80; ++i) {
    y[i] = static_cast<int>(i % 4);
    for (std::size_t j = 0; j < 3; ++j) x(i, j) = rng.normal() + (j == 0 ? y[i] : 0.0);
  }
  gbdt::GbdtConfig a;
  a.n_estimators = 5;
  a.max_depth = 2;
  gbdt::GbdtConfig b = a;
  b.growth = gbdt::Growth::LeafWise;
  b.num_leaves = 4;
  b.min_child_samples = 3;
  EnsembleModel ens;
  ens.member_a = gbdt::train(x, y, w, a, {"x0", "x1", "x2"});
  ens.member_b = gbdt::train(x, y, w, b, {"x0", "x1", "x2"});
  return ens;
}

}  // namespace

TEST_CASE("reference blend fixture") {
  Matrix pa(1, 4), pb(1, 4);
  pa(0, 0) = 0.6;
  pa(0, 1) = 0.4;
  pb(0, 0) = 0.2;
  pb(0, 1) = 0.8;
  const auto p = blend(pa, pb, 0.35);
  CHECK(std::abs(p(0, 0) - 0.34) <= 1e-12);
  CHECK(std::abs(p(0, 1) - 0.66) <= 1e-12);
  CHECK(p(0, 2) == 0.0);
  CHECK(p(0, 3) == 0.0);
}

TEST_CASE("alpha endpoints are identities") {
  const auto pa = random_proba(20, 1), pb = random_proba(20, 2);
  CHECK(blend(pa, pb, 1.0).data == pa.data);
  CHECK(blend(pa, pb, 0.0).data == pb.data);
}

TEST_CASE("blend is affine in alpha and keeps rows normalised") {
  const auto pa = random_proba(30, 3), pb = random_proba(30, 4);
  for (int k = 0; k <= 10; ++k) {
    const double alpha = k / 10.0;
    const auto p = blend(pa, pb, alpha);
    for (std::size_t i = 0; i < p.data.size(); ++i)
      CHECK(std::abs(p.data[i] - (pb.data[i] + alpha * (pa.data[i] - pb.data[i]))) <= 1e-12);
    for (std::size_t i = 0; i < p.rows; ++i) {
      double s = 0.0;
      for (double v : p.row(i)) s += v;
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
  CHECK(kind_of([&] { blend(pa, random_proba(5, 1), 0.5); }) == ErrorKind::RegistryMismatch);
}

TEST_CASE("argmax and ties") {
  Matrix p(2, 4);
  p(0, 0) = 0.1;
  p(0, 1) = 0.2;
  p(0, 2) = 0.3;
  p(0, 3) = 0.4;
  for (std::size_t c = 0; c < 4; ++c) p(1, c) = 0.25;
  const auto y = argmax_rows(p);
  CHECK(class_from_ordinal(y[0]) == BehaviorClass::Turn);
  CHECK(class_from_ordinal(y[1]) == BehaviorClass::Brake);
}

TEST_CASE("predictions are invariant to row permutation") {
  const auto ens = small_ensemble();
  Rng rng(5);
  Matrix x(30, 3);
  for (auto& v : x.data) v = rng.normal();
  Matrix reversed(30, 3);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 3; ++j) reversed(29 - i, j) = x(i, j);
  const auto p = predict_proba(ens, x), q = predict_proba(ens, reversed);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t c = 0; c < 4; ++c) CHECK(p(i, c) == q(29 - i, c));
  const auto labels = predict(ens, x);
  CHECK(labels.size() == 30);
}

TEST_CASE("member and input mismatches are rejected") {
  auto ens = small_ensemble();
  CHECK_NOTHROW(ens.validate());
  CHECK(kind_of([&] { predict_proba(ens, Matrix(2, 4)); }) == ErrorKind::RegistryMismatch);
  auto renamed = ens;
  renamed.member_b.feature_names[1] = "other";
  CHECK(kind_of([&] { renamed.validate(); }) == ErrorKind::RegistryMismatch);
  auto bad_alpha = ens;
  bad_alpha.alpha = 1.5;
  CHECK(kind_of([&] { bad_alpha.validate(); }) == ErrorKind::ConfigInvalid);
}

TEST_CASE("ensemble JSON round trip") {
  auto ens = small_ensemble();
  ens.alpha = 0.4;
  const auto text = to_json(ens);
  const auto back = from_json(text);
  CHECK(back.alpha == 0.4);
  CHECK(to_json(back) == text);
}
