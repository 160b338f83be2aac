#pragma once

#include <optional>
#include <vector>

#include "horolab/liealg.hpp"
#include "horolab/quotient.hpp"

namespace horolab {

// Domain of the shear tracking along the u flow: s with e^a - ubar*s > 0.
bool in_track_domain(const TrackParams& g, double s);
double track_domain_limit(const TrackParams& g);  // sup of the domain in s > 0

// Closest-return time on the target orbit and its derivative:
//   q(s) = s / (e^a - ubar*s) - u,   q'(s) = e^a / (e^a - ubar*s)^2.
double track_q(const TrackParams& g, double s);
double track_q_deriv(const TrackParams& g, double s);

// Evolved triple-chart coordinates: u^{-s} g_s u^{q(s)} = exp(a_s A) exp(ub_s Ubar).
void track_s_part(const TrackParams& g, double s, double& a_s, double& ub_s);

// Shear divergence ubar*s^2 + s*(1 - e^a); satisfies the exact delay relation
// (q(s) - s + u) * (e^a - ubar*s) = r_s(s).
double r_s_value(const TrackParams& g, double s);

// Transport polynomials of the transverse part: poly[i] evaluates to the
// lowest-weight coefficient of module i after conjugation by u^{-s},
// poly[i][k] = c_{k,i} (-1)^k / k!.
std::vector<std::vector<double>> r_m_polys(const TrackParams& g);
double poly_eval(const std::vector<double>& poly, double s);
double poly_eval_max(const std::vector<std::vector<double>>& polys, double s);

// Largest s such that on [0, s] the transverse transport stays within eps and
// the shear divergence stays within t^{1-eta} + eps. Infinite for pure-u
// offsets; the march is certified by local derivative bounds.
struct TrackingWindow {
  double l_m;
  double l_s;
  double l;  // min(l_m, l_s)
};
TrackingWindow l_eps_window(const TrackParams& g, double eps, double eta);

// Connected components of the relaxed sub-level set on [0, L]:
//   { s : max_i |poly_i(s)| <= kt*eps  and  |r_s(s)| <= kt*(s^{1-eta} + eps) }.
struct Interval {
  double lo;
  double hi;
  double length() const { return hi - lo; }
};
std::vector<Interval> sublevel_components(const TrackParams& g, double eps, double eta,
                                          double kappaTilde, double L);

// Chart lift of the offset between two nearby quotient points: the per-factor
// deck choice minimizing the chart distance, decomposed into chart parameters.
struct RelativeLift {
  GroupElement offset;
  TrackParams params;
  double dist;
};
std::optional<RelativeLift> relative_lift(const QuotientPoint& x, const QuotientPoint& y,
                                          double eps0 = 0.5);

}  // namespace horolab
