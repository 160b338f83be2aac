#pragma once

#include "horolab/tracking.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace horolab {

// Ordered disjoint closed subintervals of an ambient interval.
struct IntervalCollection {
  Interval ambient{0, 0};
  std::vector<Interval> members;

  // Members sorted, pairwise disjoint, contained in the ambient interval.
  bool valid(std::string* why = nullptr) const;
  double density() const;
  double largestMember() const;
};

void write_collection(std::ostream& os, const IntervalCollection& coll);

// Certified upper bound on the largest coefficient magnitude over degree-k
// polynomials with sup-norm 1 on [0,1]. Duality at the k+1 Chebyshev extrema
// already gives a valid bound; a 1.5 inflation adds conditioning margin.
// Independent of the value dimension under the max-coordinate norm.
double norm_equivalence_constant(int k, int dim = 1);

// Growth factor for one bridged gap: kappa_k * 2^k * (k+1). Valid once the
// first interval ends at 1 or later.
double norm_hop_factor(int k);

struct CoeffBoundReport {
  bool hypothesesOk = false;
  std::string note;
  double kappa = 0;
  double kappaPrime = 0;
  std::vector<double> observed;  // |c_i| in the max-coordinate norm
  std::vector<double> allowed;   // C kappa kappaPrime^(h-1) sbar_h^(-i+1-eta+(h-1)kb)
  std::vector<char> coeffPass;
  bool allPass = false;
};

// Coefficient bounds for a vector-valued polynomial (coeffs[i] = coordinates
// of the degree-i coefficient) bounded by max(eps, C s^(1-eta)) on every
// member of a b-close collection whose first interval is [0, sbar_1] with
// sbar_1 >= 1 and eps <= C sbar_1^(1-eta). Hypothesis violations are reported
// as such and never counted as bound failures.
CoeffBoundReport check_coeff_bounds(const std::vector<std::vector<double>>& coeffs,
                                    const IntervalCollection& intervals, double C,
                                    double eps, double eta, double b,
                                    double kappaPrimeOverride = 0);

struct SolovayReport {
  bool hypothesesOk = false;
  std::string note;
  double density = 0;
  std::optional<Interval> giant;  // member of length >= (3/4) of the ambient
};

// Checks b-separation of all pairs, density > 1 - theta, and that every
// complement component (end pieces included) has length >= 1; when all hold,
// returns the largest member if it covers at least 3/4 of the ambient.
SolovayReport solovay_find_block(const IntervalCollection& coll, double b, double theta);

// Largest theta on a 0.01 grid not falsified by a randomized adversarial
// search over collections that satisfy the separation and gap conditions yet
// contain no 3/4-ambient member. Empirical, not a proof; deterministic per
// seed, and trial streams are nested so more trials never raise the estimate.
double solovay_estimate_theta(double b, int trials, uint64_t seed);

}  // namespace horolab
