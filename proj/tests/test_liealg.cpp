#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "horolab/liealg.hpp"
#include "horolab/rng.hpp"

#include <cmath>

using namespace horolab;

namespace {

AlgebraElement randomSmall(const Sl2Frame& fr, Rng& rng, double scale) {
  AlgebraElement x = AlgebraElement::zeroLike(fr.dims);
  for (auto& m : x.f) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-scale, scale);
    const double tr = m.trace() / static_cast<double>(m.rows());
    for (int i = 0; i < m.rows(); ++i) m(i, i) -= tr;
  }
  return x;
}

TrackParams randomParams(const Sl2Frame& fr, Rng& rng, double scale) {
  TrackParams p;
  p.c.resize(fr.modules.size());
  for (size_t i = 0; i < fr.modules.size(); ++i) {
    p.c[i].resize(fr.modules[i].d + 1);
    for (auto& v : p.c[i]) v = rng.uniform(-scale, scale);
  }
  p.a = rng.uniform(-scale, scale);
  p.ubar = rng.uniform(-scale, scale);
  p.u = rng.uniform(-scale, scale);
  return p;
}

}  // namespace

TEST_CASE("sl2 triple: catalog frames pass, scaled generator fails") {
  for (const char* name : {"sl2", "sl2_x_sl2", "sl3"}) {
    const Sl2Frame& fr = catalogFrame(name);
    TripleReport r = verify_sl2_triple(fr.U, fr.A, fr.Ubar, 1e-12);
    CHECK(r.pass);
    CHECK(r.res_AU <= 1e-12);
    CHECK(r.res_AUbar <= 1e-12);
    CHECK(r.res_UUbar <= 1e-12);
  }
  const Sl2Frame& fr = frame_sl2();
  TripleReport bad = verify_sl2_triple(fr.U * 2.0, fr.A, fr.Ubar, 1e-9);
  CHECK_FALSE(bad.pass);
  CHECK(bad.res_UUbar == doctest::Approx(2.0 * std::sqrt(0.5)).epsilon(1e-9));
}

TEST_CASE("jordan basis: ladder and weight relations hold to 1e-9") {
  for (const char* name : {"sl2", "sl2_x_sl2", "sl3"}) {
    const Sl2Frame& fr = catalogFrame(name);
    for (const auto& mod : fr.modules) {
      REQUIRE(static_cast<int>(mod.E.size()) == mod.d + 1);
      // ad(U) ladder: E_j -> E_{j-1}, top killed.
      CHECK(fr.U.bracket(mod.E[0]).frob() <= 1e-9);
      for (int j = 1; j <= mod.d; ++j)
        CHECK((fr.U.bracket(mod.E[j]) - mod.E[j - 1]).frob() <= 1e-9);
      // ad(A) weights: (d/2 - j).
      for (int j = 0; j <= mod.d; ++j) {
        const double w = mod.d / 2.0 - j;
        CHECK((fr.A.bracket(mod.E[j]) - mod.E[j] * w).frob() <= 1e-9);
      }
    }
  }
}

TEST_CASE("jordan basis: catalog shapes") {
  CHECK(frame_sl2().modules.empty());

  const Sl2Frame& f2 = frame_sl2_x_sl2();
  REQUIRE(f2.modules.size() == 3);
  for (const auto& mod : f2.modules) CHECK(mod.d == 0);
  CHECK(f2.componentBound() == 2);

  const Sl2Frame& f3 = frame_sl3();
  REQUIRE(f3.modules.size() == 3);
  CHECK(f3.modules[0].d == 1);
  CHECK(f3.modules[1].d == 1);
  CHECK(f3.modules[2].d == 0);
  CHECK(f3.mDim() == 5);
  CHECK(f3.componentBound() == 2);
  CHECK(f3.maxModuleDegree() == 1);
}

TEST_CASE("jordan basis: complement is orthogonal to the triple and spans") {
  for (const char* name : {"sl2_x_sl2", "sl3"}) {
    const Sl2Frame& fr = catalogFrame(name);
    int mdim = 0;
    for (const auto& mod : fr.modules) {
      for (const auto& e : mod.E) {
        CHECK(std::abs(e.dot(fr.U)) <= 1e-9);
        CHECK(std::abs(e.dot(fr.A)) <= 1e-9);
        CHECK(std::abs(e.dot(fr.Ubar)) <= 1e-9);
      }
      mdim += mod.d + 1;
    }
    int ambient = 0;
    for (int d : fr.dims) ambient += d * d - 1;
    CHECK(mdim == ambient - 3);
  }
}

TEST_CASE("jordan basis: brute-force expansion of Ad(exp(sU)) on module tops") {
  // exp(s ad U) E_j = sum_{k<=j} s^k/k! E_{j-k}; check at the group level against
  // conjugation by exp(sU).
  Rng rng(7001);
  for (const char* name : {"sl2_x_sl2", "sl3"}) {
    const Sl2Frame& fr = catalogFrame(name);
    for (int trial = 0; trial < 20; ++trial) {
      const double s = rng.uniform(-2.0, 2.0);
      GroupElement us = expm(fr.U * s);
      GroupElement usInv = expm(fr.U * (-s));
      for (const auto& mod : fr.modules) {
        for (int j = 0; j <= mod.d; ++j) {
          AlgebraElement lhs = mod.E[j];
          for (size_t q = 0; q < lhs.f.size(); ++q)
            lhs.f[q] = us.f[q] * mod.E[j].f[q] * usInv.f[q];
          AlgebraElement rhs = AlgebraElement::zeroLike(fr.dims);
          double fact = 1.0;
          for (int k = 0; k <= j; ++k) {
            if (k > 0) fact *= static_cast<double>(k);
            rhs = rhs + mod.E[j - k] * (std::pow(s, k) / fact);
          }
          CHECK((lhs - rhs).frob() <= 1e-9 * std::max(1.0, std::pow(std::abs(s), mod.d)));
        }
      }
    }
  }
}

TEST_CASE("decompose: closed-form cases") {
  const Sl2Frame& fr = frame_sl2();
  SUBCASE("pure u") {
    TrackParams p;
    p.u = 0.1;
    GroupElement g = expm(fr.U * 0.1);
    TrackParams q = decompose_near_identity(g, fr);
    CHECK(q.u == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(std::abs(q.a) <= 1e-12);
    CHECK(std::abs(q.ubar) <= 1e-12);
    CHECK(q.dist() == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("a then u ordering is respected") {
    GroupElement g = expm(fr.A * 0.02) * expm(fr.U * 0.05);
    TrackParams q = decompose_near_identity(g, fr);
    CHECK(q.a == doctest::Approx(0.02).epsilon(1e-10));
    CHECK(q.u == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(std::abs(q.ubar) <= 1e-12);
  }
  SUBCASE("module coordinate on sl3") {
    const Sl2Frame& f3 = frame_sl3();
    GroupElement g = expm(f3.modules[0].E[0] * 0.05) * expm(f3.A * 0.02);
    TrackParams q = decompose_near_identity(g, f3);
    CHECK(q.c[0][0] == doctest::Approx(0.05).epsilon(1e-8));
    CHECK(q.a == doctest::Approx(0.02).epsilon(1e-8));
    CHECK(q.dist() <= 0.06);
  }
}

TEST_CASE("decompose: round trip on random draws (1e-8)") {
  Rng rng(7002);
  for (const char* name : {"sl2", "sl2_x_sl2", "sl3"}) {
    const Sl2Frame& fr = catalogFrame(name);
    for (int trial = 0; trial < 300; ++trial) {
      TrackParams p = randomParams(fr, rng, 0.12);
      GroupElement g = assemble(fr, p);
      TrackParams q = decompose_near_identity(g, fr);
      CHECK(std::abs(q.a - p.a) <= 1e-8);
      CHECK(std::abs(q.ubar - p.ubar) <= 1e-8);
      CHECK(std::abs(q.u - p.u) <= 1e-8);
      for (size_t i = 0; i < p.c.size(); ++i)
        for (size_t j = 0; j < p.c[i].size(); ++j)
          CHECK(std::abs(q.c[i][j] - p.c[i][j]) <= 1e-8);
      // And the reassembled element matches.
      CHECK(assemble(fr, q).frobDist(g) <= 1e-8);
    }
  }
}

TEST_CASE("decompose: far element is outside the chart") {
  const Sl2Frame& fr = frame_sl2();
  GroupElement far = expm(fr.U * 3.0);  // dist would be 3 > eps0
  CHECK_THROWS_AS(decompose_near_identity(far, fr), OutsideChartError);
  CHECK(std::isinf(group_distance(far, fr)));

  Eigen::MatrixXd neg(2, 2);
  neg << -1, 0, 0, -1;  // -I: no principal chart image
  CHECK(std::isinf(group_distance(GroupElement({neg}), fr)));
}

TEST_CASE("group_distance: matches chart coordinates") {
  const Sl2Frame& fr = frame_sl2();
  GroupElement g = expm(fr.A * 0.03) * expm(fr.Ubar * 0.01) * expm(fr.U * 0.02);
  CHECK(group_distance(g, fr) == doctest::Approx(0.06).epsilon(1e-9));

  const Sl2Frame& f3 = frame_sl3();
  TrackParams p;
  p.c = {{0.2, 0.0}, {0.0, 0.0}, {0.0}};
  p.a = 0.01;
  p.ubar = 0.0;
  p.u = 0.02;
  CHECK(group_distance(assemble(f3, p), f3) == doctest::Approx(0.2).epsilon(1e-7));
}

TEST_CASE("custom frame build rejects non-triples") {
  const Sl2Frame& fr = frame_sl2();
  CHECK_THROWS_AS(build_jordan_basis(fr.U * 2.0, fr.A, fr.Ubar, {2}), std::invalid_argument);
}

TEST_CASE("log/exp consistency for algebra draws") {
  Rng rng(7003);
  const Sl2Frame& fr = frame_sl3();
  for (int trial = 0; trial < 50; ++trial) {
    AlgebraElement x = randomSmall(fr, rng, 0.15);
    AlgebraElement y = logm(expm(x));
    CHECK((x - y).frob() <= 1e-10);
  }
}
