#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "horolab/liealg.hpp"
#include "horolab/quotient.hpp"
#include "horolab/rng.hpp"

#include <cmath>

using namespace horolab;

namespace {

Eigen::Matrix2d uMat(double t) {
  Eigen::Matrix2d m;
  m << 1, t, 0, 1;
  return m;
}

Eigen::Matrix2d aMat(double t) {
  Eigen::Matrix2d m;
  m << std::exp(t / 2.0), 0, 0, std::exp(-t / 2.0);
  return m;
}

Eigen::Matrix2d ubarMat(double t) {
  Eigen::Matrix2d m;
  m << 1, 0, t, 1;
  return m;
}

GroupElement sl2Element(const Eigen::Matrix2d& m) {
  GroupElement g = GroupElement::identity({2});
  g.f[0] = m;
  return g;
}

// Fundamental-domain membership of the leading factor (closed domain, slack).
bool inFundamentalDomain(const Eigen::Matrix2d& g, double slack = 1e-9) {
  const double a = g(0, 0), b = g(0, 1), c = g(1, 0), d = g(1, 1);
  const double den = c * c + d * d;
  const double x = (a * c + b * d) / den;
  const double y = (a * d - b * c) / den;
  return y > 0 && std::abs(x) <= 0.5 + slack && x * x + y * y >= 1.0 - slack;
}

GroupElement randomBulk(Rng& rng, double spread = 1.5) {
  return sl2Element(uMat(rng.uniform(-spread, spread)) *
                    ubarMat(rng.uniform(-spread, spread)) *
                    aMat(rng.uniform(-spread, spread)));
}

double frobDiff(const GroupElement& a, const GroupElement& b) {
  double s = 0;
  for (size_t i = 0; i < a.f.size(); ++i) s = std::max(s, (a.f[i] - b.f[i]).norm());
  return s;
}

}  // namespace

TEST_CASE("reduction moves the leading factor into the fundamental domain") {
  const Lattice& lat = Lattice::sl2z();

  SUBCASE("unipotent shift lands at its fractional part") {
    auto r = reduce(sl2Element(uMat(1.3)), lat);
    CHECK((r.point.rep.f[0] - uMat(0.3)).norm() < 1e-12);
    CHECK(r.gamma.f[0] == std::array<std::int64_t, 4>{1, -1, 0, 1});
  }

  SUBCASE("diagonal elements high in the cusp are already reduced") {
    auto r = reduce(sl2Element(aMat(3.0)), lat);
    CHECK((r.point.rep.f[0] - aMat(3.0)).norm() < 1e-12);
    CHECK(r.gamma.isPlusMinusIdentity());
  }

  SUBCASE("representative contract and idempotence on random inputs") {
    RngFactory fac(20260801);
    Rng rng = fac.stream(1);
    for (int trial = 0; trial < 300; ++trial) {
      GroupElement g = randomBulk(rng, 2.5);
      auto r = reduce(g, lat);
      CHECK(inFundamentalDomain(r.point.rep.f[0]));
      GroupElement recon = latticeToGroup(r.gamma) * g;
      CHECK(frobDiff(recon, r.point.rep) < 1e-10);
      auto r2 = reduce(r.point.rep, lat);
      CHECK(r2.gamma.isPlusMinusIdentity());
      CHECK(frobDiff(r2.point.rep, r.point.rep) < 1e-12);
    }
  }

  SUBCASE("sign of the representative is canonical") {
    RngFactory fac(20260802);
    Rng rng = fac.stream(1);
    for (int trial = 0; trial < 50; ++trial) {
      GroupElement g = randomBulk(rng);
      GroupElement gneg = g;
      gneg.f[0] = -gneg.f[0];
      CHECK(frobDiff(reduce(g, lat).point.rep, reduce(gneg, lat).point.rep) < 1e-12);
    }
  }

  SUBCASE("deep cusp excursions stay finite") {
    QuotientPoint p = makePoint(GroupElement::identity({2}), lat);
    QuotientPoint q = flow_a(p, 30.0);
    CHECK(inFundamentalDomain(q.rep.f[0]));
    QuotientPoint q2 = flow_u(q, 0.37);
    CHECK(inFundamentalDomain(q2.rep.f[0]));
    auto r = reduce(sl2Element(ubarMat(7.0) * aMat(-3.0)), lat);
    CHECK(inFundamentalDomain(r.point.rep.f[0]));
  }

  SUBCASE("product lattice reduces factorwise") {
    const Lattice& lat2 = Lattice::sl2z_x_sl2z();
    GroupElement g = GroupElement::identity({2, 2});
    g.f[0] = uMat(2.3);
    g.f[1] = ubarMat(1.7) * aMat(0.4);
    auto r = reduce(g, lat2);
    CHECK(inFundamentalDomain(r.point.rep.f[0]));
    CHECK(inFundamentalDomain(r.point.rep.f[1]));
    CHECK((r.point.rep.f[0] - uMat(0.3)).norm() < 1e-12);
  }
}

TEST_CASE("lattice element algebra and enumeration") {
  LatticeElement s;
  s.f = {{0, -1, 1, 0}};
  LatticeElement t;
  t.f = {{1, 1, 0, 1}};
  CHECK(latticeMul(s, latticeInv(s)).isIdentity());
  CHECK(latticeMul(t, latticeInv(t)).isIdentity());
  LatticeElement w = latticeMul(s, latticeMul(t, s));
  CHECK(latticeMul(w, latticeInv(w)).isIdentity());

  const Lattice& lat = Lattice::sl2z();
  const auto& en = lat.enumeration();
  CHECK(en.size() > 100);
  auto contains = [&](const std::array<std::int64_t, 4>& m) {
    for (const auto& g : en)
      if (g == m) return true;
    return false;
  };
  CHECK(contains({1, 0, 0, 1}));
  CHECK(contains({-1, 0, 0, -1}));
  CHECK(contains({0, -1, 1, 0}));
  CHECK(contains({1, 1, 0, 1}));
  CHECK(contains({1, -1, 0, 1}));
  for (const auto& g : en) {
    CHECK(g[0] * g[3] - g[1] * g[2] == 1);
    std::array<std::int64_t, 4> ng{-g[0], -g[1], -g[2], -g[3]};
    CHECK(contains(ng));
  }
  for (const auto& g : lat.bridgeSet())
    for (std::int64_t v : g) CHECK(std::abs(v) <= 3);
  CHECK(lat.bridgeSet().size() > 20);
}

TEST_CASE("flows satisfy the group commutation relations") {
  const Lattice& lat = Lattice::sl2z();
  RngFactory fac(20260803);
  Rng rng = fac.stream(7);

  SUBCASE("u flow is additive") {
    for (int trial = 0; trial < 40; ++trial) {
      QuotientPoint p = makePoint(randomBulk(rng), lat);
      const double s = rng.uniform(-2, 2), t = rng.uniform(-2, 2);
      CHECK(quotient_distance(flow_u(flow_u(p, s), t), flow_u(p, s + t)) < 1e-9);
    }
  }

  SUBCASE("a flow renormalizes u flow") {
    for (int trial = 0; trial < 40; ++trial) {
      QuotientPoint p = makePoint(randomBulk(rng), lat);
      const double t = rng.uniform(-1.5, 1.5), s = rng.uniform(-2, 2);
      QuotientPoint lhs = flow_u(flow_a(p, t), s);
      QuotientPoint rhs = flow_a(flow_u(p, s * std::exp(t)), t);
      CHECK(quotient_distance(lhs, rhs) < 1e-9);
    }
    QuotientPoint p = makePoint(sl2Element(uMat(0.31) * ubarMat(0.17) * aMat(-0.23)), lat);
    QuotientPoint lhs = flow_u(flow_a(p, 0.9), 1.1);
    QuotientPoint rhs = flow_a(flow_u(p, 1.1 * std::exp(0.9)), 0.9);
    CHECK(frobDiff(lhs.rep, rhs.rep) < 1e-9);
  }

  SUBCASE("identity coset horocycle is closed with period one") {
    QuotientPoint p = makePoint(GroupElement::identity({2}), lat);
    QuotientPoint q = flow_u(p, 1.0);
    CHECK(frobDiff(q.rep, p.rep) < 1e-12);
    CHECK(quotient_distance(p, flow_u(p, 1.0)) < 1e-12);
    CHECK(quotient_distance(p, flow_u(p, 0.25)) == doctest::Approx(0.25).epsilon(1e-9));
  }
}

TEST_CASE("quotient distance matches chart offsets and is metric-like") {
  const Lattice& lat = Lattice::sl2z();
  RngFactory fac(20260804);
  Rng rng = fac.stream(3);

  SUBCASE("pure u offsets on a bulk point") {
    QuotientPoint p = makePoint(sl2Element(uMat(0.3) * ubarMat(0.2)), lat);
    CHECK(quotient_distance(p, p) < 1e-12);
    for (double du : {0.02, 0.15}) {
      GroupElement off = sl2Element(uMat(du));
      const double d = quotient_distance(p, rmul(p, off));
      CHECK(d == doctest::Approx(du).epsilon(1e-9));
    }
  }

  SUBCASE("mixed chart offsets agree with coordinate sums up to second order") {
    QuotientPoint p = makePoint(sl2Element(uMat(0.3) * ubarMat(0.2)), lat);
    for (int trial = 0; trial < 60; ++trial) {
      const double a = rng.uniform(-0.08, 0.08);
      const double ub = rng.uniform(-0.08, 0.08);
      const double u = rng.uniform(-0.08, 0.08);
      const double sum = std::abs(a) + std::abs(ub) + std::abs(u);
      GroupElement off = sl2Element(aMat(a) * ubarMat(ub) * uMat(u));
      const double d = quotient_distance(p, rmul(p, off));
      CHECK(std::abs(d - sum) <= 4.0 * sum * sum + 1e-12);
    }
  }

  SUBCASE("lattice translations are null directions") {
    QuotientPoint p = makePoint(randomBulk(rng), lat);
    LatticeElement s;
    s.f = {{0, -1, 1, 0}};
    LatticeElement t;
    t.f = {{1, 1, 0, 1}};
    for (const auto& gam : {s, t, latticeMul(t, latticeMul(s, t))})
      CHECK(quotient_distance(p, translate(p, gam)) < 1e-12);
  }

  SUBCASE("symmetry") {
    for (int trial = 0; trial < 40; ++trial) {
      QuotientPoint p = makePoint(randomBulk(rng), lat);
      GroupElement off = sl2Element(aMat(rng.uniform(-0.1, 0.1)) *
                                    ubarMat(rng.uniform(-0.1, 0.1)) *
                                    uMat(rng.uniform(-0.1, 0.1)));
      QuotientPoint q = rmul(p, off);
      const double dpq = quotient_distance(p, q);
      const double dqp = quotient_distance(q, p);
      CHECK(std::abs(dpq - dqp) < 1e-12);
    }
  }

  SUBCASE("triangle inequality holds with quadratic slack") {
    for (int trial = 0; trial < 100; ++trial) {
      QuotientPoint p = makePoint(randomBulk(rng), lat);
      GroupElement o1 = sl2Element(aMat(rng.uniform(-0.05, 0.05)) *
                                   ubarMat(rng.uniform(-0.05, 0.05)) *
                                   uMat(rng.uniform(-0.05, 0.05)));
      GroupElement o2 = sl2Element(aMat(rng.uniform(-0.05, 0.05)) *
                                   ubarMat(rng.uniform(-0.05, 0.05)) *
                                   uMat(rng.uniform(-0.05, 0.05)));
      QuotientPoint q = rmul(p, o1);
      QuotientPoint r = rmul(q, o2);
      const double dpq = quotient_distance(p, q);
      const double dqr = quotient_distance(q, r);
      const double dpr = quotient_distance(p, r);
      const double s = dpq + dqr;
      CHECK(dpr <= s + 4.0 * s * s + 1e-12);
    }
  }

  SUBCASE("distant points report the sentinel") {
    QuotientPoint p = makePoint(GroupElement::identity({2}), lat);
    QuotientPoint q = flow_a(p, 2.0);
    CHECK(std::isinf(quotient_distance(p, q)));
  }

  SUBCASE("product lattice takes the max over factors") {
    const Lattice& lat2 = Lattice::sl2z_x_sl2z();
    const Sl2Frame& fr = frame_sl2_x_sl2();
    QuotientPoint p = makePoint(GroupElement::identity({2, 2}), lat2);

    GroupElement offLead = GroupElement::identity({2, 2});
    offLead.f[0] = uMat(0.03);
    CHECK(quotient_distance(p, rmul(p, offLead)) == doctest::Approx(0.03).epsilon(1e-9));

    GroupElement offTail = expm(fr.modules[0].E[0] * 0.04);
    CHECK(quotient_distance(p, rmul(p, offTail)) == doctest::Approx(0.04).epsilon(1e-6));

    GroupElement both = offLead;
    for (size_t i = 0; i < both.f.size(); ++i) both.f[i] = both.f[i] * offTail.f[i];
    CHECK(quotient_distance(p, rmul(p, both)) == doctest::Approx(0.04).epsilon(1e-6));
  }
}

TEST_CASE("injectivity radius proxy") {
  const Lattice& lat = Lattice::sl2z();
  const double cal = injectivity_calibration(lat);
  CHECK(cal >= 1e-3);
  CHECK(cal <= 1.0);

  QuotientPoint p = makePoint(GroupElement::identity({2}), lat);
  const double inj0 = injectivity_radius(p);
  CHECK(inj0 == doctest::Approx(std::min(cal, 0.3)).epsilon(1e-12));

  SUBCASE("exponential decay along the cusp excursion") {
    for (double t : {2.0, 4.0, 7.0}) {
      const double inj = injectivity_radius(flow_a(p, t));
      CHECK(inj == doctest::Approx(std::min(cal * std::exp(-t), 0.3)).epsilon(1e-9));
    }
    CHECK(injectivity_radius(flow_a(p, 2.0)) > injectivity_radius(flow_a(p, 4.0)));
  }

  SUBCASE("deck invariance is exact") {
    RngFactory fac(20260805);
    Rng rng = fac.stream(11);
    LatticeElement w;
    w.f = {{2, 1, 1, 1}};
    for (int trial = 0; trial < 30; ++trial) {
      QuotientPoint q = makePoint(randomBulk(rng), lat);
      CHECK(injectivity_radius(translate(q, w)) == injectivity_radius(q));
    }
  }

  SUBCASE("proxy does not exceed the nearest chart collision") {
    for (double t : {1.25, 2.25, 3.75, 5.5}) {
      QuotientPoint q = flow_a(p, t);
      // Conjugated unit translation gives an explicit deck collision scale.
      Eigen::Matrix2d rep = q.rep.f[0];
      Eigen::Matrix2d repInv;
      repInv << rep(1, 1), -rep(0, 1), -rep(1, 0), rep(0, 0);
      Eigen::Matrix2d X = repInv * uMat(1.0) * rep;
      const double collision = std::abs(X(0, 1)) + std::abs(X(1, 0)) +
                               2.0 * std::abs(std::log(std::abs(X(0, 0))));
      CHECK(injectivity_radius(q) <= collision + 1e-12);
    }
  }

  SUBCASE("product lattice takes the min over factors") {
    const Lattice& lat2 = Lattice::sl2z_x_sl2z();
    QuotientPoint p2 = makePoint(GroupElement::identity({2, 2}), lat2);
    QuotientPoint q2 = flow_a(p2, 5.0);  // only the leading factor moves
    CHECK(injectivity_radius(q2) <=
          injectivity_radius(flow_a(makePoint(GroupElement::identity({2}), lat), 5.0)) +
              1e-12);
  }
}

TEST_CASE("injectivity window check") {
  const Lattice& lat = Lattice::sl2z();
  QuotientPoint id = makePoint(GroupElement::identity({2}), lat);

  SUBCASE("closed horocycle at the identity coset collides") {
    auto rep = check_IC(id, 0.05, 2.0);
    CHECK(rep.verdict == Tri::Fail);
  }

  SUBCASE("deep cusp point collides at tiny gaps") {
    auto rep = check_IC(flow_a(id, 6.0), 0.05, 2.0);
    CHECK(rep.verdict == Tri::Fail);
  }

  SUBCASE("generic bulk point passes a modest window") {
    QuotientPoint p = makePoint(sl2Element(uMat(0.31) * ubarMat(0.17) * aMat(-0.23)),
                                lat);
    auto rep = check_IC(p, 0.02, 2.0);
    CHECK(rep.verdict == Tri::Pass);
  }

  SUBCASE("degenerate window passes trivially") {
    CHECK(check_IC(id, 0.0, 5.0).verdict == Tri::Pass);
    CHECK(check_IC(id, 0.05, 0.0).verdict == Tri::Pass);
  }

  SUBCASE("coarse grid is inconclusive") {
    CHECK(check_IC(id, 0.05, 2.0, 0.2).verdict == Tri::Inconclusive);
  }

  SUBCASE("product lattice") {
    const Lattice& lat2 = Lattice::sl2z_x_sl2z();
    QuotientPoint id2 = makePoint(GroupElement::identity({2, 2}), lat2);
    CHECK(check_IC(id2, 0.05, 2.0).verdict == Tri::Fail);
    GroupElement g = GroupElement::identity({2, 2});
    g.f[0] = uMat(0.31) * ubarMat(0.17) * aMat(-0.23);
    g.f[1] = uMat(0.11) * ubarMat(0.29) * aMat(0.13);
    CHECK(check_IC(makePoint(g, lat2), 0.02, 2.0).verdict == Tri::Pass);
  }
}

TEST_CASE("flow box recurrence check") {
  const Lattice& lat = Lattice::sl2z();
  QuotientPoint id = makePoint(GroupElement::identity({2}), lat);

  SUBCASE("identity coset recurs for both window conventions") {
    CHECK(check_FBR(id, 1.0, 0.5, 1e-4, 6.0).verdict == Tri::Pass);
    CHECK(check_FBR(id, 1.0, 1.05, 1e-4, 6.0).verdict == Tri::Pass);
  }

  SUBCASE("deep cusp start fails") {
    auto rep = check_FBR(flow_a(id, 12.0), 1.0, 0.5, 1e-4, 4.0);
    CHECK(rep.verdict == Tri::Fail);
    CHECK(rep.witness_a == doctest::Approx(1.0));
  }

  SUBCASE("unattainable radius fails") {
    CHECK(check_FBR(id, 1.0, 0.5, 0.5, 3.0).verdict == Tri::Fail);
  }

  SUBCASE("empty range is inconclusive") {
    CHECK(check_FBR(id, 5.0, 0.5, 1e-4, 4.0).verdict == Tri::Inconclusive);
  }
}
