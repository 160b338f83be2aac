#include "horolab/tracking.hpp"

#include <cmath>
#include <stdexcept>

namespace horolab {

bool in_track_domain(const TrackParams& g, double s) {
  return std::exp(g.a) - g.ubar * s > 0;
}

double track_domain_limit(const TrackParams& g) {
  if (g.ubar <= 0) return infinity();
  return std::exp(g.a) / g.ubar;
}

double track_q(const TrackParams& g, double s) {
  const double den = std::exp(g.a) - g.ubar * s;
  return s / den - g.u;
}

double track_q_deriv(const TrackParams& g, double s) {
  const double den = std::exp(g.a) - g.ubar * s;
  return std::exp(g.a) / (den * den);
}

void track_s_part(const TrackParams& g, double s, double& a_s, double& ub_s) {
  const double den = std::exp(g.a) - g.ubar * s;
  a_s = -g.a + 2.0 * std::log(den);
  ub_s = std::exp(-g.a) * g.ubar * den;
}

double r_s_value(const TrackParams& g, double s) {
  return g.ubar * s * s + s * (1.0 - std::exp(g.a));
}

std::vector<std::vector<double>> r_m_polys(const TrackParams& g) {
  std::vector<std::vector<double>> polys(g.c.size());
  for (size_t i = 0; i < g.c.size(); ++i) {
    polys[i].resize(g.c[i].size());
    double fact = 1.0, sign = 1.0;
    for (size_t k = 0; k < g.c[i].size(); ++k) {
      if (k > 0) {
        fact *= static_cast<double>(k);
        sign = -sign;
      }
      polys[i][k] = g.c[i][k] * sign / fact;
    }
  }
  return polys;
}

double poly_eval(const std::vector<double>& poly, double s) {
  double v = 0;
  for (size_t k = poly.size(); k-- > 0;) v = v * s + poly[k];
  return v;
}

double poly_eval_max(const std::vector<std::vector<double>>& polys, double s) {
  double m = 0;
  for (const auto& p : polys) m = std::max(m, std::abs(poly_eval(p, s)));
  return m;
}

namespace {

double polyDerivBound(const std::vector<double>& poly, double s) {
  double b = 0, pw = 1.0;
  for (size_t k = 1; k < poly.size(); ++k) {
    b += static_cast<double>(k) * std::abs(poly[k]) * pw;
    pw *= s;
  }
  return b;
}

constexpr double kFarHorizon = 1e12;

// First s > 0 where margin(s) < 0, certified by the local derivative bound of
// the tracked value (the allowance is nondecreasing, so ignoring its growth is
// conservative). Returns +infinity when no violation occurs before the horizon.
template <typename Margin, typename DerivBound>
double firstViolation(Margin margin, DerivBound derivBound) {
  double s = 0.0;
  double m = margin(s);
  if (m < 0) return 0.0;
  for (int it = 0; it < 2000000; ++it) {
    const double cap = 0.25 * (1.0 + s);
    const double lb = derivBound(s + cap);
    double step = lb > 0 ? 0.45 * m / lb : cap;
    step = std::min(step, cap);
    step = std::max(step, 1e-9 * (1.0 + s));
    const double sn = s + step;
    const double mn = margin(sn);
    if (mn < 0) {
      double lo = s, hi = sn;
      for (int b = 0; b < 200 && hi - lo > 1e-10 * (1.0 + lo); ++b) {
        const double mid = (lo + hi) / 2;
        (margin(mid) >= 0 ? lo : hi) = mid;
      }
      return (lo + hi) / 2;
    }
    s = sn;
    m = mn;
    if (s > kFarHorizon) return infinity();
  }
  throw std::runtime_error("window march failed to terminate");
}

}  // namespace

TrackingWindow l_eps_window(const TrackParams& g, double eps, double eta) {
  const auto polys = r_m_polys(g);
  TrackingWindow w{};
  w.l_m = firstViolation(
      [&](double s) { return eps - poly_eval_max(polys, s); },
      [&](double s) {
        double b = 0;
        for (const auto& p : polys) b = std::max(b, polyDerivBound(p, s));
        return b;
      });
  const double ea = std::exp(g.a);
  w.l_s = firstViolation(
      [&](double s) {
        return std::pow(s, 1.0 - eta) + eps - std::abs(r_s_value(g, s));
      },
      [&](double s) { return 2.0 * std::abs(g.ubar) * s + std::abs(1.0 - ea); });
  w.l = std::min(w.l_m, w.l_s);
  return w;
}

std::vector<Interval> sublevel_components(const TrackParams& g, double eps, double eta,
                                          double kappaTilde, double L) {
  const auto polys = r_m_polys(g);
  const double ea = std::exp(g.a);
  auto margin = [&](double s) {
    const double mm = kappaTilde * eps - poly_eval_max(polys, s);
    const double ms =
        kappaTilde * (std::pow(s, 1.0 - eta) + eps) - std::abs(r_s_value(g, s));
    return std::min(mm, ms);
  };
  // Lipschitz part of the margin rate (polynomials and the shear value).
  auto valueRate = [&](double s) {
    double b = 2.0 * std::abs(g.ubar) * s + std::abs(1.0 - ea);
    for (const auto& p : polys) b = std::max(b, polyDerivBound(p, s));
    return b;
  };

  std::vector<Interval> comps;
  double s = 0.0;
  double m = margin(s);
  bool inside = m >= 0;
  double start = inside ? 0.0 : -1.0;
  for (int it = 0; it < 4000000 && s < L; ++it) {
    const double cap = std::min(0.25 * (1.0 + s), L - s);
    const double lb = valueRate(s + cap);
    // No sign flip within the step: kT*step^{1-eta} + lb*step <= 0.45|m|.
    const double am = std::abs(m);
    double step = cap;
    if (lb > 0) step = std::min(step, 0.225 * am / lb);
    step = std::min(step, std::pow(0.225 * am / kappaTilde, 1.0 / (1.0 - eta)));
    step = std::max(step, std::min(1e-9 * (1.0 + s), cap));
    const double sn = std::min(s + step, L);
    const double mn = margin(sn);
    if ((mn >= 0) != inside) {
      double lo = s, hi = sn;
      for (int b = 0; b < 200 && hi - lo > 1e-10 * (1.0 + lo); ++b) {
        const double mid = (lo + hi) / 2;
        ((margin(mid) >= 0) == inside ? lo : hi) = mid;
      }
      const double cross = (lo + hi) / 2;
      if (inside)
        comps.push_back({start, cross});
      else
        start = cross;
      inside = mn >= 0;
    }
    s = sn;
    m = mn;
  }
  if (inside) comps.push_back({start, L});
  std::vector<Interval> out;
  for (const auto& c : comps)
    if (c.hi - c.lo > 1e-9 * (1.0 + c.lo)) out.push_back(c);
  return out;
}

std::optional<RelativeLift> relative_lift(const QuotientPoint& x, const QuotientPoint& y,
                                          double eps0) {
  const Lattice& lat = *x.lat;
  GroupElement offset = GroupElement::identity(lat.frame->dims);
  for (int fac = 0; fac < lat.factors; ++fac) {
    const Eigen::Matrix2d A = x.rep.f[fac];
    const Eigen::Matrix2d B = y.rep.f[fac];
    const Eigen::Matrix2d Ainv =
        (Eigen::Matrix2d() << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0)).finished();
    double best = infinity();
    Eigen::Matrix2d bestX;
    for (const auto& gm : lat.enumeration()) {
      Eigen::Matrix2d G;
      G << static_cast<double>(gm[0]), static_cast<double>(gm[1]),
          static_cast<double>(gm[2]), static_cast<double>(gm[3]);
      const Eigen::Matrix2d X = Ainv * G * B;
      if ((X - Eigen::Matrix2d::Identity()).squaredNorm() > 1.6) continue;
      const double d = factor_chart_distance(X, lat, fac, eps0);
      if (d < best) {
        best = d;
        bestX = X;
      }
    }
    if (std::isinf(best)) return std::nullopt;
    offset.f[fac] = bestX;
  }
  RelativeLift lift;
  lift.offset = offset;
  try {
    lift.params = decompose_near_identity(offset, *lat.frame, eps0);
  } catch (const OutsideChartError&) {
    return std::nullopt;
  }
  lift.dist = lift.params.dist();
  return lift;
}

}  // namespace horolab
