#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "horolab/quotient.hpp"
#include "horolab/rng.hpp"

namespace horolab {

// Smooth radial bump supported on (center - width, center + width).
struct BumpProfile {
  double amplitude = 0.02;
  double center = 1.0;
  double width = 0.15;

  double value(double r) const;
  double deriv(double r) const;
  // Integral of value over the plane in polar form: 2*pi * int r*value(r) dr.
  double planeIntegral() const;
};

// Sum of phi(|w|) over nonzero vectors w of the leading-factor lattice,
// optionally compressed through s*tanh(./s) to keep cusp excursions bounded.
// The sum is invariant under the deck group, and its derivative along the
// u flow is available in closed form.
class LatticeSumObservable {
 public:
  LatticeSumObservable(BumpProfile phi, double saturation = 0.0)
      : phi_(phi), sat_(saturation) {}

  double value(const QuotientPoint& p) const;
  double uDerivative(const QuotientPoint& p) const;
  void valueAndDerivative(const QuotientPoint& p, double& val, double& der) const;

  // Space average of the raw sum (saturation disabled).
  double exactMean() const;

  const BumpProfile& profile() const { return phi_; }
  double saturation() const { return sat_; }

 private:
  void rawSum(const Eigen::Matrix2d& rep, double& val, double& der) const;

  BumpProfile phi_;
  double sat_;
};

// Positive observable driving a time change, with a certified bracket
// lower <= alpha <= upper that integration asserts at every node.
struct TimeChange {
  std::function<double(const QuotientPoint&)> alpha;
  double lower = 1.0;
  double upper = 1.0;
};

TimeChange unit_time_change();
TimeChange coboundary_time_change(const LatticeSumObservable& f, double lower,
                                  double upper);

// Integral of an observable along a u orbit, with unit-spaced reduced anchors,
// monotone prefix sums, and adaptive Gauss panels. `value` is the additive
// cocycle xi(base, t); `inverse` solves xi(base, t) = s (positive alpha only).
class OrbitIntegral {
 public:
  OrbitIntegral(TimeChange tc, QuotientPoint base, double unitTol = 1e-12);

  double value(double t);
  double inverse(double s);
  QuotientPoint at(double t);
  const QuotientPoint& basePoint() const { return base_; }
  std::size_t evalCount() const { return evals_; }

 private:
  const QuotientPoint& anchor(int n);
  double segment(const QuotientPoint& anch, double a, double b);
  double panel(const Eigen::Matrix2d& lead, const QuotientPoint& anch, double a,
               double b);
  double adapt(const Eigen::Matrix2d& lead, const QuotientPoint& anch, double a,
               double b, double whole, double tol, int depth);
  double evalAt(const Eigen::Matrix2d& lead, const QuotientPoint& anch, double t);

  TimeChange tc_;
  QuotientPoint base_;
  double unitTol_;
  std::vector<QuotientPoint> pos_, neg_;    // anchors at +n, -n
  std::vector<double> posPrefix_, negPrefix_;
  std::size_t evals_ = 0;
};

// Transfer cocycle z(x, t) of a conjugacy pair: time spent by the target flow
// while the source flow spends xi_1(x, t), i.e. z = xi_2^{-1}(psi x, xi_1(x, t)).
class TransferCocycle {
 public:
  TransferCocycle(const TimeChange& a1, const TimeChange& a2, QuotientPoint x,
                  QuotientPoint psix)
      : xi1_(a1, std::move(x)), xi2_(a2, std::move(psix)) {}

  double z(double t) { return xi2_.inverse(xi1_.value(t)); }
  double inverse(double s) { return xi1_.inverse(xi2_.value(s)); }
  OrbitIntegral& sourceIntegral() { return xi1_; }
  OrbitIntegral& targetIntegral() { return xi2_; }

 private:
  OrbitIntegral xi1_, xi2_;
};

// Coboundary testbed: alpha_1 = 1 + D_U f against the unit time change,
// conjugated by psi(p) = p u^{f(p)}, whose cocycle has the closed form
// xi_1(p, t) = t + f(p u^t) - f(p).
struct ConjugacyTestbed {
  LatticeSumObservable f;
  TimeChange alpha1;
  TimeChange alpha2;

  QuotientPoint psi(const QuotientPoint& p) const;
  double exactXi(const QuotientPoint& p, double t) const;
};

ConjugacyTestbed make_coboundary_testbed();

// Least-squares slope of log mean |int_0^T (f - mean)| against log T on a
// geometric grid in [Tmin, Tmax], averaged over random base points.
struct DeviationReport {
  double slope = 0.0;
  std::vector<double> times;
  std::vector<double> meanAbs;
};

DeviationReport deviation_exponent(const LatticeSumObservable& f, const Lattice& lat,
                                   Rng& rng, double Tmin, double Tmax, int bases,
                                   int gridPoints);

}  // namespace horolab
