#include "horolab/quotient.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace horolab {

namespace {

using I64Mat = std::array<std::int64_t, 4>;

constexpr I64Mat kId{1, 0, 0, 1};

I64Mat mul(const I64Mat& a, const I64Mat& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
          a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

I64Mat inv(const I64Mat& a) { return {a[3], -a[1], -a[2], a[0]}; }  // det = 1

I64Mat neg(const I64Mat& a) { return {-a[0], -a[1], -a[2], -a[3]}; }

Eigen::Matrix2d toDouble(const I64Mat& a) {
  Eigen::Matrix2d m;
  m << static_cast<double>(a[0]), static_cast<double>(a[1]), static_cast<double>(a[2]),
      static_cast<double>(a[3]);
  return m;
}

I64Mat canonicalSign(const I64Mat& a) {
  for (std::int64_t v : a) {
    if (v > 0) return a;
    if (v < 0) return neg(a);
  }
  return a;
}

// Upper-half-plane coordinate of g (image of i under the Moebius action).
void halfPlane(const Eigen::Matrix2d& g, double& x, double& y) {
  const double a = g(0, 0), b = g(0, 1), c = g(1, 0), d = g(1, 1);
  const double den = c * c + d * d;
  x = (a * c + b * d) / den;
  y = (a * d - b * c) / den;
}

// Gauss reduction of one SL(2,R) factor; returns gamma with gamma*g reduced.
I64Mat reduceFactor(const Eigen::Matrix2d& g) {
  I64Mat gamma = kId;
  Eigen::Matrix2d cur = g;
  const I64Mat S{0, -1, 1, 0};
  for (int it = 0; it < 200; ++it) {
    double x, y;
    halfPlane(cur, x, y);
    const double n = std::floor(x + 0.5);
    if (n != 0) {
      if (std::abs(n) > 9e15) throw std::runtime_error("reduction overflow");
      I64Mat tn{1, -static_cast<std::int64_t>(n), 0, 1};
      gamma = mul(tn, gamma);
      cur = toDouble(tn) * cur;
      halfPlane(cur, x, y);
    }
    if (x * x + y * y < 1.0 - 1e-14) {
      gamma = mul(S, gamma);
      cur = toDouble(S) * cur;
      continue;
    }
    break;
  }
  // Tie rules: boundary representatives keep non-negative real part.
  double x, y;
  halfPlane(cur, x, y);
  if (x < -0.5 + 1e-12) {
    I64Mat t{1, 1, 0, 1};
    gamma = mul(t, gamma);
    cur = toDouble(t) * cur;
    halfPlane(cur, x, y);
  }
  if (x * x + y * y < 1.0 + 1e-12 && x < -1e-13) {
    gamma = mul(S, gamma);
  }
  return canonicalSign(gamma);
}

// Chart coordinates of a single SL2 factor relative to the triple:
// returns |a| + |ubar| + |u| or +infinity outside the chart.
double sChartDist(const Eigen::Matrix2d& X, double eps0) {
  if (!(X(0, 0) > 1e-12)) return infinity();
  const double a = 2.0 * std::log(X(0, 0));
  const double u = X(0, 1) / X(0, 0);
  const double ub = X(1, 0) * X(0, 0);
  const double d = std::abs(a) + std::abs(ub) + std::abs(u);
  return d < eps0 ? d : infinity();
}

double sChartDistSym(const Eigen::Matrix2d& X, double eps0) {
  const double det = X(0, 0) * X(1, 1) - X(0, 1) * X(1, 0);
  if (!(std::abs(det - 1.0) < 1e-6)) return infinity();
  Eigen::Matrix2d Xi;
  Xi << X(1, 1), -X(0, 1), -X(1, 0), X(0, 0);
  return std::max(sChartDist(X, eps0), sChartDist(Xi, eps0));
}

// Module-chart distance for a non-triple factor: max |coefficient| of log X in
// the frame's (orthonormal) module basis restricted to that factor.
double mChartDist(const Eigen::Matrix2d& X, const Sl2Frame& frame, int factor, double eps0) {
  const double det = X(0, 0) * X(1, 1) - X(0, 1) * X(1, 0);
  if (!(std::abs(det - 1.0) < 1e-6)) return infinity();
  if (X(0, 0) + X(1, 1) <= -2.0 + 1e-9) return infinity();
  Eigen::Matrix2d L = Eigen::Matrix2d(X).log();
  if (!L.allFinite()) return infinity();
  double dmax = 0;
  for (const auto& mod : frame.modules)
    for (const auto& e : mod.E) {
      const double c = (e.f[factor].array() * L.array()).sum();
      dmax = std::max(dmax, std::abs(c));
    }
  return dmax < eps0 ? dmax : infinity();
}

double mChartDistSym(const Eigen::Matrix2d& X, const Sl2Frame& frame, int factor,
                     double eps0) {
  Eigen::Matrix2d Xi;
  Xi << X(1, 1), -X(0, 1), -X(1, 0), X(0, 0);
  return std::max(mChartDist(X, frame, factor, eps0), mChartDist(Xi, frame, factor, eps0));
}

double factorChartDistSym(const Eigen::Matrix2d& X, const Lattice& lat, int factor,
                          double eps0) {
  if (factor == 0) return sChartDistSym(X, eps0);
  return mChartDistSym(X, *lat.frame, factor, eps0);
}

std::vector<I64Mat> buildEnumeration(int wordLength) {
  const I64Mat S{0, -1, 1, 0};
  const I64Mat T{1, 1, 0, 1};
  const I64Mat Ti{1, -1, 0, 1};
  std::set<I64Mat> seen{kId};
  std::vector<I64Mat> frontier{kId};
  for (int len = 0; len < wordLength; ++len) {
    std::vector<I64Mat> next;
    for (const auto& w : frontier)
      for (const auto& gen : {S, T, Ti}) {
        I64Mat v = mul(w, gen);
        if (seen.insert(v).second) next.push_back(v);
      }
    frontier = std::move(next);
  }
  // Close under negation (-I = S^2 is present, but keep the closure explicit).
  std::vector<I64Mat> all(seen.begin(), seen.end());
  for (const auto& w : all) seen.insert(neg(w));
  return std::vector<I64Mat>(seen.begin(), seen.end());
}

}  // namespace

LatticeElement latticeIdentity(int factors) {
  LatticeElement e;
  e.f.assign(factors, kId);
  return e;
}

LatticeElement latticeMul(const LatticeElement& a, const LatticeElement& b) {
  LatticeElement r;
  r.f.resize(a.f.size());
  for (size_t i = 0; i < a.f.size(); ++i) r.f[i] = mul(a.f[i], b.f[i]);
  return r;
}

LatticeElement latticeInv(const LatticeElement& a) {
  LatticeElement r;
  r.f.resize(a.f.size());
  for (size_t i = 0; i < a.f.size(); ++i) r.f[i] = inv(a.f[i]);
  return r;
}

GroupElement latticeToGroup(const LatticeElement& a) {
  GroupElement g;
  g.f.reserve(a.f.size());
  for (const auto& m : a.f) g.f.push_back(toDouble(m));
  return g;
}

const Lattice& Lattice::sl2z() {
  static const Lattice lat{"sl2z", 1, &frame_sl2(), 8};
  return lat;
}

const Lattice& Lattice::sl2z_x_sl2z() {
  static const Lattice lat{"sl2z_x_sl2z", 2, &frame_sl2_x_sl2(), 8};
  return lat;
}

const Lattice& Lattice::byName(const std::string& name) {
  if (name == "sl2z") return sl2z();
  if (name == "sl2z_x_sl2z") return sl2z_x_sl2z();
  throw std::invalid_argument("unknown lattice '" + name +
                              "' (catalog: sl2z, sl2z_x_sl2z)");
}

const std::vector<I64Mat>& Lattice::enumeration() const {
  static const std::map<int, std::vector<I64Mat>> cache = [] {
    std::map<int, std::vector<I64Mat>> c;
    c[8] = buildEnumeration(8);
    return c;
  }();
  auto it = cache.find(wordLength);
  if (it != cache.end()) return it->second;
  static std::map<int, std::vector<I64Mat>> extra;
  auto& slot = extra[wordLength];
  if (slot.empty()) slot = buildEnumeration(wordLength);
  return slot;
}

const std::vector<I64Mat>& Lattice::bridgeSet() const {
  static std::map<int, std::vector<I64Mat>> cache;
  auto& slot = cache[wordLength];
  if (slot.empty()) {
    for (const auto& g : enumeration()) {
      std::int64_t mx = 0;
      for (std::int64_t v : g) mx = std::max(mx, std::abs(v));
      if (mx <= 3) slot.push_back(g);
    }
  }
  return slot;
}

ReduceResult reduce(const GroupElement& g, const Lattice& lat) {
  ReduceResult r;
  r.gamma.f.resize(lat.factors);
  r.point.lat = &lat;
  r.point.rep.f.resize(lat.factors);
  for (int i = 0; i < lat.factors; ++i) {
    I64Mat gm = reduceFactor(g.f[i]);
    Eigen::Matrix2d rep = toDouble(gm) * g.f[i];
    // Canonical representative sign: -I is a deck move, so g and -g must map
    // to the same rep. Flip so the first significant entry is positive.
    for (int k = 0; k < 4; ++k) {
      const double v = rep(k % 2, k / 2);
      if (v > 1e-9) break;
      if (v < -1e-9) {
        gm = neg(gm);
        rep = -rep;
        break;
      }
    }
    r.gamma.f[i] = gm;
    r.point.rep.f[i] = rep;
  }
  return r;
}

QuotientPoint makePoint(const GroupElement& g, const Lattice& lat) {
  return reduce(g, lat).point;
}

QuotientPoint flow_u(const QuotientPoint& p, double t) {
  GroupElement g = p.rep;
  g.f[0](0, 1) += t * g.f[0](0, 0);
  g.f[0](1, 1) += t * g.f[0](1, 0);
  return reduce(g, *p.lat).point;
}

QuotientPoint flow_a(const QuotientPoint& p, double t) {
  GroupElement g = p.rep;
  const double e = std::exp(t / 2.0);
  g.f[0].col(0) *= e;
  g.f[0].col(1) /= e;
  return reduce(g, *p.lat).point;
}

QuotientPoint rmul(const QuotientPoint& p, const GroupElement& g) {
  GroupElement h = p.rep;
  for (size_t i = 0; i < h.f.size(); ++i) h.f[i] = h.f[i] * g.f[i];
  return reduce(h, *p.lat).point;
}

QuotientPoint translate(const QuotientPoint& p, const LatticeElement& gamma) {
  GroupElement h = p.rep;
  for (size_t i = 0; i < h.f.size(); ++i) h.f[i] = toDouble(gamma.f[i]) * h.f[i];
  return reduce(h, *p.lat).point;
}

double factor_chart_distance(const Eigen::Matrix2d& X, const Lattice& lat, int factor,
                             double eps0) {
  return factorChartDistSym(X, lat, factor, eps0);
}

double quotient_distance(const QuotientPoint& p, const QuotientPoint& q, double eps0) {
  const Lattice& lat = *p.lat;
  double dist = 0;
  for (int fac = 0; fac < lat.factors; ++fac) {
    const Eigen::Matrix2d A = p.rep.f[fac];
    const Eigen::Matrix2d B = q.rep.f[fac];
    const Eigen::Matrix2d Ainv = (Eigen::Matrix2d() << A(1, 1), -A(0, 1), -A(1, 0),
                                  A(0, 0)).finished();
    double best = infinity();
    for (const auto& gm : lat.enumeration()) {
      const Eigen::Matrix2d X = Ainv * toDouble(gm) * B;
      // Cheap screen: the chart ball maps into a small Frobenius ball around I.
      const double fd = (X - Eigen::Matrix2d::Identity()).squaredNorm();
      if (fd > 1.6) continue;
      best = std::min(best, factorChartDistSym(X, lat, fac, eps0));
      if (best == 0) break;
    }
    dist = std::max(dist, best);
    if (std::isinf(dist)) return infinity();
  }
  return dist;
}

double shortestVectorLen(const Eigen::Matrix2d& basisCols) {
  Eigen::Vector2d b1 = basisCols.col(0), b2 = basisCols.col(1);
  for (int it = 0; it < 200; ++it) {
    if (b1.squaredNorm() > b2.squaredNorm()) std::swap(b1, b2);
    const double mu = std::round(b2.dot(b1) / b1.squaredNorm());
    if (mu == 0) break;
    b2 -= mu * b1;
  }
  return std::min(b1.norm(), b2.norm());
}

double injectivity_calibration(const Lattice& lat) {
  static std::map<std::string, double> cache;
  auto it = cache.find(lat.kind);
  if (it != cache.end()) return it->second;

  const Lattice& base = Lattice::sl2z();
  double cal = infinity();
  // Deterministic sample sweep: bulk points and cusp-ward pushes.
  std::vector<QuotientPoint> samples;
  {
    const Sl2Frame& fr = frame_sl2();
    for (int k = 0; k < 8; ++k) {
      GroupElement g = expm(fr.U * (0.37 * k)) * expm(fr.Ubar * (0.11 * k)) *
                       expm(fr.A * (0.21 * k - 0.7));
      samples.push_back(makePoint(g, base));
    }
    QuotientPoint p0 = makePoint(expm(fr.U * 0.3) * expm(fr.Ubar * 0.2), base);
    for (double t : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5})
      samples.push_back(flow_a(p0, t));
  }
  for (const auto& p : samples) {
    const Eigen::Matrix2d A = p.rep.f[0];
    const Eigen::Matrix2d Ainv =
        (Eigen::Matrix2d() << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0)).finished();
    double dmin = infinity();
    for (const auto& gm : base.enumeration()) {
      if (gm == kId || gm == neg(kId)) continue;
      const Eigen::Matrix2d X = Ainv * toDouble(gm) * A;
      if ((X - Eigen::Matrix2d::Identity()).squaredNorm() > 1.6) continue;
      dmin = std::min(dmin, sChartDistSym(X, 0.5));
    }
    const double sv = shortestVectorLen(p.rep.f[0].transpose());
    if (std::isfinite(dmin) && sv > 0) cal = std::min(cal, dmin / (sv * sv));
  }
  if (!std::isfinite(cal)) cal = 0.25;
  cal = std::clamp(0.9 * cal, 1e-3, 1.0);
  cache[lat.kind] = cal;
  return cal;
}

double injectivity_radius(const QuotientPoint& p) {
  const double cal = injectivity_calibration(*p.lat);
  double sv = infinity();
  for (const auto& m : p.rep.f) sv = std::min(sv, shortestVectorLen(m.transpose()));
  return std::clamp(cal * sv * sv, 0.0, 0.3);
}

namespace {

struct CellKey {
  int cx, cy;
  bool operator<(const CellKey& o) const {
    return cx != o.cx ? cx < o.cx : cy < o.cy;
  }
};

void mobius(const I64Mat& g, double x, double y, double& ox, double& oy) {
  // (a z + b) / (c z + d)
  const double a = static_cast<double>(g[0]), b = static_cast<double>(g[1]);
  const double c = static_cast<double>(g[2]), d = static_cast<double>(g[3]);
  const double cr = c * x + d, ci = c * y;
  const double den = cr * cr + ci * ci;
  const double nr = a * x + b, ni = a * y;
  ox = (nr * cr + ni * ci) / den;
  oy = (ni * cr - nr * ci) / den;
}

}  // namespace

CheckReport check_IC(const QuotientPoint& p, double rho, double m, double gridStep) {
  CheckReport rep;
  if (rho <= 0 || m <= 0) {
    rep.verdict = Tri::Pass;
    rep.note = "trivial window";
    return rep;
  }
  const double step = gridStep > 0 ? gridStep : std::min(rho / 2.0, 0.25);
  rep.gridStep = step;
  if (step > rho) {
    rep.verdict = Tri::Inconclusive;
    rep.note = "grid coarser than rho";
    return rep;
  }
  const Lattice& lat = *p.lat;
  const Sl2Frame& fr = *lat.frame;
  const int nt = static_cast<int>(std::floor(m / step));
  const int win = 2 * nt + 1;

  std::vector<GroupElement> offsets;
  offsets.push_back(GroupElement::identity(fr.dims));
  offsets.push_back(expm(fr.U * (0.4 * rho)));
  offsets.push_back(expm(fr.U * (-0.4 * rho)));
  offsets.push_back(expm(fr.Ubar * (0.4 * rho)));
  offsets.push_back(expm(fr.A * (0.4 * rho)));

  for (const auto& off : offsets) {
    GroupElement y = p.rep;
    for (size_t i = 0; i < y.f.size(); ++i) y.f[i] = y.f[i] * off.f[i];

    // Reduce all window points once; factors beyond 0 do not move under u.
    std::vector<Eigen::Matrix2d> red(win);
    std::vector<I64Mat> gam(win);
    std::vector<double> zx(win), zy(win);
    double ymax = 0;
    for (int i = -nt; i <= nt; ++i) {
      Eigen::Matrix2d gmat = y.f[0];
      const double t = i * step;
      gmat.col(1) += t * gmat.col(0);
      I64Mat g = reduceFactor(gmat);
      red[i + nt] = toDouble(g) * gmat;
      gam[i + nt] = g;
      halfPlane(red[i + nt], zx[i + nt], zy[i + nt]);
      ymax = std::max(ymax, zy[i + nt]);
    }
    // Non-leading factors: candidate deck moves that keep the factor within rho.
    std::vector<std::vector<I64Mat>> tailCands(lat.factors > 1 ? lat.factors - 1 : 0);
    for (int fac = 1; fac < lat.factors; ++fac) {
      const Eigen::Matrix2d A = y.f[fac];
      const Eigen::Matrix2d Ainv =
          (Eigen::Matrix2d() << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0)).finished();
      for (const auto& gm : lat.bridgeSet()) {
        const Eigen::Matrix2d X = Ainv * toDouble(gm) * A;
        if ((X - Eigen::Matrix2d::Identity()).squaredNorm() > 1.6) continue;
        if (mChartDist(X, fr, fac, 0.5) <= rho) tailCands[fac - 1].push_back(gm);
      }
    }

    // Spatial hash of the reduced window points in the half plane: a chart
    // collision at scale rho keeps |z_i - gamma z_j| within a few rho * height.
    const double cell = std::max(0.02, 3.0 * rho * std::max(1.0, ymax));
    std::map<CellKey, std::vector<int>> hash;
    for (int j = 0; j < win; ++j)
      hash[{static_cast<int>(std::floor(zx[j] / cell)),
            static_cast<int>(std::floor(zy[j] / cell))}]
          .push_back(j);

    for (int i = 0; i < win; ++i) {
      const Eigen::Matrix2d& R1 = red[i];
      const Eigen::Matrix2d R1inv =
          (Eigen::Matrix2d() << R1(1, 1), -R1(0, 1), -R1(1, 0), R1(0, 0)).finished();
      for (const auto& br : lat.bridgeSet()) {
        double vx, vy;
        mobius(inv(br), zx[i], zy[i], vx, vy);
        if (vy <= 0 || vy > 4.0 * std::max(1.0, ymax)) continue;
        const int cx = static_cast<int>(std::floor(vx / cell));
        const int cy = static_cast<int>(std::floor(vy / cell));
        for (int dx = -1; dx <= 1; ++dx)
          for (int dy = -1; dy <= 1; ++dy) {
            auto it = hash.find({cx + dx, cy + dy});
            if (it == hash.end()) continue;
            for (int j : it->second) {
              const Eigen::Matrix2d X = R1inv * toDouble(br) * red[j];
              if ((X - Eigen::Matrix2d::Identity()).squaredNorm() > 1.6) continue;
              if (sChartDist(X, 0.5) > rho) continue;
              const I64Mat g0 = mul(inv(gam[i]), mul(br, gam[j]));
              const bool leadTrivial = canonicalSign(g0) == kId;
              bool hit = false;
              if (lat.factors == 1) {
                hit = !leadTrivial;
              } else {
                for (int fac = 1; fac < lat.factors && !hit; ++fac)
                  for (const auto& tc : tailCands[fac - 1])
                    if (!(leadTrivial && canonicalSign(tc) == kId)) {
                      hit = true;
                      break;
                    }
              }
              if (hit) {
                rep.verdict = Tri::Fail;
                rep.note = "deck collision witness";
                rep.witness_a = (i - nt) * step;
                rep.witness_b = (j - nt) * step;
                return rep;
              }
            }
          }
      }
    }
  }
  rep.verdict = Tri::Pass;
  rep.note = "no collision on sampled grid";
  return rep;
}

CheckReport check_FBR(const QuotientPoint& p, double T0, double c, double r0, double Tmax,
                      double gridStep) {
  CheckReport rep;
  if (Tmax < T0) {
    rep.verdict = Tri::Inconclusive;
    rep.note = "empty T range";
    return rep;
  }
  const double step = gridStep > 0 ? gridStep : std::max(0.05, (Tmax - T0) / 200.0);
  rep.gridStep = step;
  for (double T = T0; T <= Tmax + 1e-12; T += step) {
    const double lo = c <= 1.0 ? c * T : T / c;
    const double inner = std::max((T - lo) / 8.0, 1e-3);
    bool ok = false;
    int tested = 0;
    for (double t = lo; t <= T + 1e-12; t += inner) {
      ++tested;
      if (injectivity_radius(flow_a(p, t)) >= r0) {
        ok = true;
        break;
      }
    }
    if (tested == 0) {
      rep.verdict = Tri::Inconclusive;
      rep.note = "window contained no grid point";
      rep.witness_a = T;
      return rep;
    }
    if (!ok) {
      rep.verdict = Tri::Fail;
      rep.note = "no recurrence time in window";
      rep.witness_a = T;
      return rep;
    }
  }
  rep.verdict = Tri::Pass;
  rep.note = "recurrence found for every sampled T";
  return rep;
}

}  // namespace horolab
