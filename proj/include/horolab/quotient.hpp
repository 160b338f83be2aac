#pragma once

#include "horolab/liealg.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace horolab {

// Product of SL(2,Z) factors, entries row-major [a b; c d].
struct LatticeElement {
  std::vector<std::array<std::int64_t, 4>> f;
  bool operator==(const LatticeElement& o) const { return f == o.f; }
  bool isIdentity() const {
    for (const auto& m : f)
      if (m != std::array<std::int64_t, 4>{1, 0, 0, 1}) return false;
    return true;
  }
  bool isPlusMinusIdentity() const {
    for (const auto& m : f)
      if (m != std::array<std::int64_t, 4>{1, 0, 0, 1} &&
          m != std::array<std::int64_t, 4>{-1, 0, 0, -1})
        return false;
    return true;
  }
};

LatticeElement latticeIdentity(int factors);
LatticeElement latticeMul(const LatticeElement& a, const LatticeElement& b);
LatticeElement latticeInv(const LatticeElement& a);
GroupElement latticeToGroup(const LatticeElement& a);

struct Lattice {
  std::string kind;
  int factors = 1;
  const Sl2Frame* frame = nullptr;
  int wordLength = 8;  // enumeration radius: words in {S, T, T^-1}

  static const Lattice& sl2z();
  static const Lattice& sl2z_x_sl2z();
  static const Lattice& byName(const std::string& name);

  // Single-factor enumeration (shared across factors), deduplicated, closed
  // under inversion and negation.
  const std::vector<std::array<std::int64_t, 4>>& enumeration() const;
  // The subset with small entries, enough to bridge two reduced representatives
  // that are within chart range of each other.
  const std::vector<std::array<std::int64_t, 4>>& bridgeSet() const;
};

struct QuotientPoint {
  GroupElement rep;  // Gauss-reduced representative, one block per factor
  const Lattice* lat = nullptr;
};

struct ReduceResult {
  QuotientPoint point;
  LatticeElement gamma;  // rep = gamma * input
};

// Reduces g to the standard fundamental domain factor by factor
// (|Re z| <= 1/2, |z| >= 1, ties resolved toward non-negative Re).
ReduceResult reduce(const GroupElement& g, const Lattice& lat);

QuotientPoint makePoint(const GroupElement& g, const Lattice& lat);
QuotientPoint flow_u(const QuotientPoint& p, double t);
QuotientPoint flow_a(const QuotientPoint& p, double t);
QuotientPoint rmul(const QuotientPoint& p, const GroupElement& g);
QuotientPoint translate(const QuotientPoint& p, const LatticeElement& gamma);

// min over enumerated gamma of max(d(X), d(X^-1)) with X = rep_p^-1 gamma rep_q,
// taken factor-wise (the lattice is a product). +infinity when no enumerated
// gamma lands in the chart. Symmetric by construction.
double quotient_distance(const QuotientPoint& p, const QuotientPoint& q, double eps0 = 0.5);

// Symmetrized chart distance of a single-factor offset matrix X (factor 0 uses
// the triple chart, others the module chart); +infinity outside the chart.
double factor_chart_distance(const Eigen::Matrix2d& X, const Lattice& lat, int factor,
                             double eps0 = 0.5);

// Lower-bound proxy c_cal * (shortest vector of rep^T Z^2)^2, clamped to [0, 0.3].
// c_cal is calibrated once per lattice by deterministic sampling.
double injectivity_radius(const QuotientPoint& p);
double injectivity_calibration(const Lattice& lat);

// Shortest nonzero vector length of the lattice spanned by the columns.
double shortestVectorLen(const Eigen::Matrix2d& basisCols);

enum class Tri { Fail = 0, Pass = 1, Inconclusive = 2 };

struct CheckReport {
  Tri verdict = Tri::Inconclusive;
  std::string note;
  double witness_a = 0, witness_b = 0;
  double gridStep = 0;
};

// Sampled injectivity condition: along u-orbit windows [-m, m] of lifts in the
// rho-ball, no non-identity lattice element brings two window points within rho.
CheckReport check_IC(const QuotientPoint& p, double rho, double m, double gridStep = 0);

/// Sampled flow-balanced-recurrence: every grid T in [T0, Tmax] has some grid
// t in [cT, T] with injectivity_radius(flow_a(p, t)) >= r0.
CheckReport check_FBR(const QuotientPoint& p, double T0, double c, double r0, double Tmax,
                      double gridStep = 0);

}  // namespace horolab
