#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "horolab/blocks.hpp"
#include "horolab/quotient.hpp"
#include "horolab/timechange.hpp"

namespace horolab {

// One Monte-Carlo sample with its per-condition verdicts.
struct GoodPoint {
  QuotientPoint x;
  bool uniformContinuity = false;
  bool deviation = false;
  bool injectivity = false;
  bool recurrence = false;
  bool retained = false;
};

struct GoodSetOptions {
  std::uint64_t seed = 1;
  double m0 = 1.5;         // orbit-segment scale, > 1
  double rho = 0.05;       // lift-uniqueness radius
  double etaEmp = 0.2;     // deviation exponent
  double b = 0.02;         // separation exponent feeding the window ratio
  double kappaTilde = 16.0;
  double r0Cap = 0.05;     // practical ceiling for the recurrence radius
  double ucModulus = 4.0;  // allowed stretch of psi between close samples
  double ucRadius = 0.3;   // neighbor radius for the continuity proxy
  double tMaxFactor = 32;  // deviation grid reaches m0 * tMaxFactor
  double fbrTmax = 4.0;    // recurrence horizon beyond T0
};

struct GoodSetParams {
  bool ok = false;
  std::string note;
  double omega = 0, m0 = 0, rho = 0, T0 = 0, r0 = 0;
  double r0Formula = 0;  // constant-chain value before the practical cap
  double cb = 0;         // recurrence window ratio (1 + eta - b) / (1 + eta)
  double m = 0;          // 2 C^4 m0
  double Ctau = 1;       // certified time-change norm
  double sN = 0;         // orbit-scale bound m / omega
  double retention = 0;
  double target = 0;  // 1 - omega
  int inconclusive = 0;
  std::vector<GoodPoint> points;
};

// Monte-Carlo retention experiment: samples points of the quotient and keeps
// those passing the continuity proxy, the sub-polynomial deviation bound on a
// doubling grid, and the injectivity and recurrence checks on the psi-image.
GoodSetParams sample_good_points(const TimeChange& alpha1, const TimeChange& alpha2,
                                 const ConjugacyMap& psi, double omega, int budget,
                                 const Lattice& lat,
                                 const GoodSetOptions& opts = GoodSetOptions{});

struct TransportOptions {
  double delta = 0.25;    // admissible chart distance of g1 from the identity
  double spreadTol = 1e-6;
  std::vector<double> relationT = {1.3, 3.1};
  int relationSamples = 3;
  double eps0 = 0.5;
};

struct TransportResult {
  bool ok = false;
  std::string note;
  GroupElement Phi;
  double c = 1;  // measured ratio in g1 u^{ct} = u^t g1
  std::vector<QuotientPoint> samples;
  std::vector<double> beta;       // per-sample u-component of the transported offset
  double cosetSpread = 0;         // variation of the non-u components across samples
  double normaliserResidual = 0;  // max |Phi u^{ct} - u^t Phi| over sampled t
  double cocycleResidual = 0;     // beta(x u^t) - beta(x) vs z(xg, ct) - c z(x, t)
  std::string csv;                // sample,beta,offset_dist
};

// Solves psi(x g1) = psi(x) Phi u^{beta(x)} across samples: the common
// normaliser part Phi is the component-wise median projected back onto the
// normaliser, beta is the leftover u-coordinate per sample.
TransportResult normaliser_transport(const TimeChange& alpha1, const TimeChange& alpha2,
                                     const ConjugacyMap& psi, const GroupElement& g1,
                                     const std::vector<QuotientPoint>& samples,
                                     const TransportOptions& opts = TransportOptions{});

struct CohomologyReport {
  bool ok = false;
  std::string note;
  double maxResidual = 0;
  std::vector<double> tGrid, lhs, rhs, residual;
  std::string csv;  // t,lhs,rhs,residual
};

// Evaluates both sides of the transfer identity
//   int_0^t alpha1(x u^s g) ds - int_0^{z(x,t)} alpha2(psi(x) u^s Phi) ds
//     = f(x u^t) - f(x),    f(y) = (1/c) int_0^{beta(y)} alpha2(psi(y) Phi u^s) ds,
// and returns the worst deviation over the grid.
CohomologyReport cohomology_residual(const TimeChange& alpha1, const TimeChange& alpha2,
                                     const ConjugacyMap& psi,
                                     const TransportResult& transport,
                                     const GroupElement& g, const QuotientPoint& x,
                                     const std::vector<double>& tGrid);

struct PsiTReport {
  bool ok = false;
  std::string note;
  std::vector<double> tGrid;
  std::vector<std::vector<double>> dist;  // [sample][t]
  double fittedRate = 0;      // least-squares slope of log distance against t
  bool monotoneTrend = false; // negative fitted slope restricted to t >= 2
  double maxDistance = 0;
  double equivarianceResidual = 0;  // d(zeta(x u^t), zeta(x) u^t) on samples
  std::string csv;                  // sample,t,distance
};

// Distance curves t -> d(psi_t(x), zeta(x)) for the renormalized conjugacy
// against its algebraic part, with a pooled exponential-rate fit.
PsiTReport psi_t_convergence(const ConjugacyMap& psi, const ConjugacyMap& zeta,
                             const std::vector<QuotientPoint>& samples,
                             const std::vector<double>& tGrid);

}  // namespace horolab
