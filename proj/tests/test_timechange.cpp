#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "horolab/liealg.hpp"
#include "horolab/quotient.hpp"
#include "horolab/rng.hpp"
#include "horolab/timechange.hpp"

#include <cmath>

using namespace horolab;

namespace {

QuotientPoint bulkPoint(const Lattice& lat, double u, double ub, double a) {
  const Sl2Frame& fr = *lat.frame;
  GroupElement g = expm(fr.U * u) * expm(fr.Ubar * ub) * expm(fr.A * a);
  return makePoint(g, lat);
}

QuotientPoint randomPoint(const Lattice& lat, Rng& rng) {
  return bulkPoint(lat, rng.uniform(0, 1), rng.uniform(-0.5, 0.5),
                   rng.uniform(-0.8, 0.8));
}

}  // namespace

TEST_CASE("bump profile calculus") {
  BumpProfile phi{0.02, 1.0, 0.15};
  CHECK(phi.value(0.84) == 0.0);
  CHECK(phi.value(1.16) == 0.0);
  CHECK(phi.value(1.0) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(phi.deriv(1.0) == doctest::Approx(0.0));
  for (double r : {0.87, 0.93, 1.02, 1.09, 1.13}) {
    const double h = 1e-6;
    const double fd = (phi.value(r + h) - phi.value(r - h)) / (2 * h);
    CHECK(phi.deriv(r) == doctest::Approx(fd).epsilon(1e-6));
  }
  // Independent midpoint-rule cross-check of the plane integral.
  double acc = 0;
  const int n = 200000;
  const double lo = 0.85, hi = 1.15, h = (hi - lo) / n;
  for (int i = 0; i < n; ++i) {
    const double r = lo + (i + 0.5) * h;
    acc += phi.value(r) * r * h;
  }
  CHECK(phi.planeIntegral() == doctest::Approx(6.283185307179586 * acc).epsilon(1e-9));
}

TEST_CASE("lattice sum observable") {
  const Lattice& lat = Lattice::sl2z();
  LatticeSumObservable raw(BumpProfile{0.02, 1.0, 0.15}, 0.0);
  LatticeSumObservable sat(BumpProfile{0.02, 1.0, 0.15}, 0.05);
  RngFactory fac(20260810);
  Rng rng = fac.stream(1);

  SUBCASE("independent of the coset representative") {
    const Sl2Frame& fr = *lat.frame;
    GroupElement g = expm(fr.U * 0.41) * expm(fr.Ubar * 0.23) * expm(fr.A * 0.37);
    QuotientPoint p = makePoint(g, lat);
    LatticeElement w;
    w.f = {{2, 1, 1, 1}};
    QuotientPoint q = translate(p, w);
    CHECK(raw.value(p) == doctest::Approx(raw.value(q)).epsilon(1e-12));
    CHECK(raw.uDerivative(p) == doctest::Approx(raw.uDerivative(q)).epsilon(1e-12));
  }

  SUBCASE("direct sum cross-check at the identity lattice") {
    // Z^2 vectors with norm in (0.85, 1.15): the four unit vectors.
    QuotientPoint p = makePoint(GroupElement::identity({2}), lat);
    BumpProfile phi{0.02, 1.0, 0.15};
    CHECK(raw.value(p) == doctest::Approx(4.0 * phi.value(1.0)).epsilon(1e-12));
    CHECK(raw.uDerivative(p) == doctest::Approx(0.0));
  }

  SUBCASE("u derivative matches finite differences") {
    for (int trial = 0; trial < 25; ++trial) {
      QuotientPoint p = randomPoint(lat, rng);
      const double h = 1e-5;
      for (const LatticeSumObservable* f : {&raw, &sat}) {
        const double fd =
            (f->value(flow_u(p, h)) - f->value(flow_u(p, -h))) / (2 * h);
        CHECK(f->uDerivative(p) == doctest::Approx(fd).epsilon(5e-5));
      }
    }
  }

  SUBCASE("compression preserves sign and bounds") {
    for (int trial = 0; trial < 40; ++trial) {
      QuotientPoint p = randomPoint(lat, rng);
      const double v = sat.value(p);
      CHECK(std::abs(v) <= 0.05);
      CHECK(v >= 0.0);  // the raw sum is nonnegative
    }
  }

  SUBCASE("closed-form mean requires the raw sum") {
    CHECK(raw.exactMean() == doctest::Approx(raw.profile().planeIntegral()));
    CHECK_THROWS_AS(sat.exactMean(), std::logic_error);
  }
}

TEST_CASE("orbit integrals") {
  const Lattice& lat = Lattice::sl2z();
  RngFactory fac(20260811);
  Rng rng = fac.stream(2);

  SUBCASE("unit time change integrates to t") {
    OrbitIntegral cur(unit_time_change(), randomPoint(lat, rng));
    for (double t : {0.3, 1.0, 17.25, -5.6, -0.125, 403.7}) {
      CHECK(cur.value(t) == doctest::Approx(t).epsilon(1e-12));
    }
    CHECK(cur.inverse(17.25) == doctest::Approx(17.25).epsilon(1e-12));
  }

  ConjugacyTestbed tb = make_coboundary_testbed();

  SUBCASE("coboundary cocycle has the closed form") {
    for (int trial = 0; trial < 12; ++trial) {
      QuotientPoint p = randomPoint(lat, rng);
      OrbitIntegral cur(tb.alpha1, p);
      for (double t : {0.7, 3.2, -4.8, 41.3, -17.9})
        CHECK(std::abs(cur.value(t) - tb.exactXi(p, t)) < 1e-10 * (1 + std::abs(t)));
    }
  }

  SUBCASE("additivity across restarted cursors") {
    for (int trial = 0; trial < 8; ++trial) {
      QuotientPoint p = randomPoint(lat, rng);
      OrbitIntegral cur(tb.alpha1, p);
      const double t = rng.uniform(-20, 20), s = rng.uniform(-20, 20);
      OrbitIntegral tail(tb.alpha1, cur.at(t));
      CHECK(std::abs(cur.value(t + s) - (cur.value(t) + tail.value(s))) < 1e-9);
    }
  }

  SUBCASE("inverse pair") {
    QuotientPoint p = randomPoint(lat, rng);
    OrbitIntegral cur(tb.alpha1, p);
    for (int trial = 0; trial < 40; ++trial) {
      const double t = rng.uniform(-100, 100);
      CHECK(std::abs(cur.inverse(cur.value(t)) - t) < 1e-9);
    }
  }

  SUBCASE("monotone with certified slope") {
    QuotientPoint p = randomPoint(lat, rng);
    OrbitIntegral cur(tb.alpha1, p);
    double prev = cur.value(-30.0);
    for (double t = -29.5; t <= 30.0; t += 0.5) {
      const double v = cur.value(t);
      CHECK(v - prev >= 0.5 * tb.alpha1.lower - 1e-9);
      CHECK(v - prev <= 0.5 * tb.alpha1.upper + 1e-9);
      prev = v;
    }
  }

  SUBCASE("bracket violations throw") {
    // A bracket this tight is violated wherever the bump derivative is active.
    TimeChange tight = tb.alpha1;
    tight.lower = 0.9999;
    tight.upper = 1.0001;
    bool active = false;
    Rng scan = fac.stream(3);
    for (int trial = 0; trial < 200 && !active; ++trial)
      active = std::abs(tb.f.uDerivative(randomPoint(lat, scan))) > 2e-4;
    REQUIRE(active);
    Rng scan2 = fac.stream(3);
    CHECK_THROWS_AS(
        [&] {
          for (int trial = 0; trial < 200; ++trial) {
            OrbitIntegral cur(tight, randomPoint(lat, scan2));
            (void)cur.value(1.0);
          }
        }(),
        std::runtime_error);
  }
}

TEST_CASE("transfer cocycle against the unit flow") {
  const Lattice& lat = Lattice::sl2z();
  RngFactory fac(20260812);
  Rng rng = fac.stream(5);
  ConjugacyTestbed tb = make_coboundary_testbed();

  SUBCASE("z equals the source cocycle when the target runs at unit speed") {
    QuotientPoint p = randomPoint(lat, rng);
    TransferCocycle tz(tb.alpha1, tb.alpha2, p, tb.psi(p));
    for (double t : {0.9, 7.3, -12.6, 55.0})
      CHECK(std::abs(tz.z(t) - tb.exactXi(p, t)) < 1e-9);
    for (double s : {1.7, -8.2, 23.9})
      CHECK(std::abs(tz.z(tz.inverse(s)) - s) < 1e-9);
  }

  SUBCASE("conjugacy intertwines the reparametrized flows") {
    for (int trial = 0; trial < 10; ++trial) {
      QuotientPoint p = randomPoint(lat, rng);
      OrbitIntegral cur(tb.alpha1, p);
      const double s = rng.uniform(-30, 30);
      const double t = cur.inverse(s);  // time-changed flow reaches p u^t
      QuotientPoint lhs = tb.psi(cur.at(t));
      QuotientPoint rhs = flow_u(tb.psi(p), s);
      CHECK(quotient_distance(lhs, rhs) < 1e-8);
    }
  }

  SUBCASE("derivative brackets for z") {
    QuotientPoint p = randomPoint(lat, rng);
    TransferCocycle tz(tb.alpha1, tb.alpha2, p, tb.psi(p));
    const double C = std::max(tb.alpha1.upper, 1.0 / tb.alpha1.lower);
    const double h = 0.25;
    double prev = tz.z(-10.0);
    for (double t = -10.0 + h; t <= 10.0; t += h) {
      const double v = tz.z(t);
      const double rate = (v - prev) / h;
      CHECK(rate >= 1.0 / (C * C) - 1e-9);
      CHECK(rate <= C * C + 1e-9);
      prev = v;
    }
  }
}

TEST_CASE("deviation grid is deterministic and sublinear") {
  const Lattice& lat = Lattice::sl2z();
  LatticeSumObservable raw(BumpProfile{0.02, 1.0, 0.15}, 0.0);
  RngFactory fac(20260813);
  Rng r1 = fac.stream(9);
  DeviationReport a = deviation_exponent(raw, lat, r1, 10.0, 200.0, 4, 6);
  Rng r2 = fac.stream(9);
  DeviationReport b = deviation_exponent(raw, lat, r2, 10.0, 200.0, 4, 6);
  CHECK(a.slope == b.slope);
  CHECK(a.times.size() == 6);
  CHECK(a.meanAbs.size() == 6);
  for (double v : a.meanAbs) CHECK(v >= 0.0);
  CHECK(a.slope < 1.05);
  CHECK(a.slope > -0.5);
}
