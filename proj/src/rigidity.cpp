#include "horolab/rigidity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace horolab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

GroupElement uPow(const Sl2Frame& fr, double t) {
  GroupElement g = GroupElement::identity(fr.dims);
  for (std::size_t k = 0; k < g.f.size(); ++k) {
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(fr.dims[k], fr.dims[k]);
    for (int p = 1; p <= fr.dims[k]; ++p) {
      term = term * fr.U.f[k] * (t / p);
      if (term.cwiseAbs().maxCoeff() == 0.0) break;
      g.f[k] += term;
    }
  }
  return g;
}

int unipotentFactor(const Sl2Frame& fr) {
  for (std::size_t k = 0; k < fr.U.f.size(); ++k)
    if (fr.U.f[k].cwiseAbs().maxCoeff() > 0) return static_cast<int>(k);
  return 0;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct OffsetResult {
  bool ok = false;
  GroupElement X;
  double dist = kInf;
};

// Smallest chart offset X with q = p * X in the quotient, over enumerated
// deck translates taken factor by factor.
OffsetResult bestOffset(const QuotientPoint& p, const QuotientPoint& q, double eps0) {
  OffsetResult out;
  const Lattice& lat = *p.lat;
  const Sl2Frame& fr = *lat.frame;
  const std::size_t nf = p.rep.f.size();

  std::vector<std::vector<std::pair<double, Eigen::Matrix2d>>> cands(nf);
  for (std::size_t k = 0; k < nf; ++k) {
    const Eigen::Matrix2d A = p.rep.f[k];
    Eigen::Matrix2d Ainv;
    Ainv << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0);
    const Eigen::Matrix2d B = q.rep.f[k];
    for (const auto& gm : lat.enumeration()) {
      Eigen::Matrix2d G;
      G << static_cast<double>(gm[0]), static_cast<double>(gm[1]),
          static_cast<double>(gm[2]), static_cast<double>(gm[3]);
      const Eigen::Matrix2d X = Ainv * (G * B);
      if ((X - Eigen::Matrix2d::Identity()).squaredNorm() > 2.5) continue;
      const double d = factor_chart_distance(X, lat, static_cast<int>(k), 0.6);
      if (!std::isfinite(d)) continue;
      cands[k].push_back({d, X});
    }
    if (cands[k].empty()) return out;
    std::sort(cands[k].begin(), cands[k].end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (cands[k].size() > 4) cands[k].resize(4);
  }

  std::vector<std::size_t> idx(nf, 0);
  while (true) {
    GroupElement X;
    X.f.reserve(nf);
    for (std::size_t k = 0; k < nf; ++k) X.f.push_back(cands[k][idx[k]].second);
    const double d = group_distance(X, fr, eps0);
    if (d < out.dist) {
      out.ok = true;
      out.dist = d;
      out.X = X;
    }
    std::size_t k = 0;
    while (k < nf && ++idx[k] == cands[k].size()) idx[k++] = 0;
    if (k == nf) break;
  }
  return out;
}

GroupElement sampleElement(Rng& rng, const Lattice& lat) {
  const Sl2Frame& fr = *lat.frame;
  GroupElement g;
  g.f.reserve(fr.dims.size());
  for (std::size_t k = 0; k < fr.dims.size(); ++k) {
    const int d = fr.dims[k];
    if (d == 2) {
      const double x = rng.uniform(-0.5, 0.5);
      const double yLo = 0.9, yHi = 2.5;
      const double y = 1.0 / (1.0 / yLo - rng.uniform() * (1.0 / yLo - 1.0 / yHi));
      const double th = rng.uniform(0.0, 6.283185307179586);
      Eigen::MatrixXd m(2, 2);
      const double sy = std::sqrt(y);
      m << sy * std::cos(th) + x * (-std::sin(th)) / sy,
          sy * std::sin(th) + x * std::cos(th) / sy, -std::sin(th) / sy,
          std::cos(th) / sy;
      g.f.push_back(m);
    } else {
      AlgebraElement xi = AlgebraElement::zeroLike(fr.dims);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) xi.f[k](i, j) = rng.uniform(-0.2, 0.2);
      xi.f[k].diagonal().array() -= xi.f[k].trace() / d;
      g.f.push_back(expm(xi).f[k]);
    }
  }
  return g;
}

}  // namespace

GoodSetParams sample_good_points(const TimeChange& alpha1, const TimeChange& alpha2,
                                 const ConjugacyMap& psi, double omega, int budget,
                                 const Lattice& lat, const GoodSetOptions& opts) {
  GoodSetParams out;
  out.omega = omega;
  out.rho = opts.rho;
  if (omega <= 0) {
    out.note = "impossible target: omega must be positive";
    return out;
  }
  if (budget < 1) {
    out.note = "budget must be at least 1";
    return out;
  }
  if (alpha1.lower <= 0 || alpha2.lower <= 0) {
    out.note = "time changes must be bounded away from zero";
    return out;
  }
  out.target = 1.0 - omega;
  out.Ctau = std::max({1.0, alpha1.upper, 1.0 / alpha1.lower, alpha2.upper,
                       1.0 / alpha2.lower});
  out.m0 = opts.m0;
  if (out.m0 <= out.Ctau) out.m0 = 1.5 * out.Ctau;
  out.m = 2.0 * std::pow(out.Ctau, 4.0) * out.m0;
  out.T0 = 0.5 * std::log(out.m0 / out.Ctau);
  out.cb = (1.0 + opts.etaEmp - opts.b) / (1.0 + opts.etaEmp);
  out.r0Formula = 20.0 * corollary_kappa(*lat.frame, opts.kappaTilde) * out.Ctau *
                  std::pow(out.m0, -(opts.etaEmp - 2.0 * opts.b) / 12.0);
  out.r0 = std::min(out.r0Formula, opts.r0Cap);
  out.sN = out.m / omega;

  Rng rng(opts.seed);
  std::vector<QuotientPoint> retainedPts, retainedImages;
  int retained = 0;
  for (int i = 0; i < budget; ++i) {
    GoodPoint gp;
    gp.x = makePoint(sampleElement(rng, lat), lat);
    const QuotientPoint img = psi(gp.x);

    gp.deviation = true;
    {
      OrbitIntegral xi1(alpha1, gp.x);
      OrbitIntegral xi2(alpha2, img);
      for (double t = out.m0; t <= out.m0 * opts.tMaxFactor * (1 + 1e-12); t *= 2) {
        const double bound = std::pow(out.Ctau, -4.0) * std::pow(t, 1.0 - opts.etaEmp);
        if (std::abs(xi1.value(t) - t) > bound || std::abs(xi2.value(t) - t) > bound) {
          gp.deviation = false;
          break;
        }
      }
    }

    const CheckReport ic = check_IC(img, out.rho, out.m);
    gp.injectivity = ic.verdict == Tri::Pass;
    const CheckReport fbr = check_FBR(img, out.T0, out.cb, out.r0, out.T0 + opts.fbrTmax);
    gp.recurrence = fbr.verdict == Tri::Pass;
    if (ic.verdict == Tri::Inconclusive) ++out.inconclusive;
    if (fbr.verdict == Tri::Inconclusive) ++out.inconclusive;

    gp.uniformContinuity = true;
    double best = kInf;
    int bestJ = -1;
    for (std::size_t j = 0; j < retainedPts.size(); ++j) {
      if (gp.x.rep.frobDist(retainedPts[j].rep) > 1.0) continue;
      const double d = quotient_distance(gp.x, retainedPts[j]);
      if (d < best) {
        best = d;
        bestJ = static_cast<int>(j);
      }
    }
    if (bestJ >= 0 && best < opts.ucRadius) {
      const double dImg = quotient_distance(img, retainedImages[bestJ]);
      gp.uniformContinuity = dImg <= opts.ucModulus * best + 1e-9;
    }

    gp.retained = gp.uniformContinuity && gp.deviation && gp.injectivity && gp.recurrence;
    if (gp.retained) {
      ++retained;
      retainedPts.push_back(gp.x);
      retainedImages.push_back(img);
    }
    out.points.push_back(std::move(gp));
  }

  out.retention = static_cast<double>(retained) / budget;
  if (out.retention < 0.5) {
    out.note = "configuration rejected: retention " + std::to_string(out.retention) +
               " is below 1/2";
    return out;
  }
  out.ok = true;
  return out;
}

TransportResult normaliser_transport(const TimeChange& alpha1, const TimeChange& alpha2,
                                     const ConjugacyMap& psi, const GroupElement& g1,
                                     const std::vector<QuotientPoint>& samples,
                                     const TransportOptions& opts) {
  TransportResult out;
  if (samples.empty() || samples[0].lat == nullptr) {
    out.note = "samples must share a lattice";
    return out;
  }
  const Lattice& lat = *samples[0].lat;
  for (const auto& s : samples)
    if (s.lat != &lat) {
      out.note = "samples must share a lattice";
      return out;
    }
  const Sl2Frame& fr = *lat.frame;
  if (g1.f.size() != fr.dims.size()) {
    out.note = "g1 does not match the frame";
    return out;
  }
  const int uF = unipotentFactor(fr);
  if (fr.dims[static_cast<std::size_t>(uF)] != 2) {
    out.note = "transport requires a 2x2 unipotent factor";
    return out;
  }
  const Eigen::MatrixXd& gm = g1.f[static_cast<std::size_t>(uF)];
  const double scale = std::max(1.0, gm.cwiseAbs().maxCoeff());
  if (std::abs(gm(1, 0)) > 1e-9 * scale || gm(0, 0) <= 0 ||
      std::abs(gm(0, 0) * gm(1, 1) - 1.0) > 1e-9) {
    out.note = "g1 does not normalise the unipotent direction";
    return out;
  }
  const double p1 = gm(0, 0);
  out.c = 1.0 / (p1 * p1);
  if (out.c <= 0.5 || out.c >= 2.0) {
    out.note = "renormalisation ratio outside (1/2, 2)";
    return out;
  }
  if (!(group_distance(g1, fr, std::max(0.5, 4.0 * opts.delta)) < opts.delta)) {
    out.note = "g1 too far from the identity";
    return out;
  }

  out.samples = samples;
  const std::size_t n = samples.size();
  std::vector<GroupElement> offsets(n);
  std::vector<double> offsetDist(n);
  std::vector<QuotientPoint> images(n), imagesG(n);
  for (std::size_t i = 0; i < n; ++i) {
    images[i] = psi(samples[i]);
    imagesG[i] = psi(rmul(samples[i], g1));
    const OffsetResult h = bestOffset(images[i], imagesG[i], opts.eps0);
    if (!h.ok) {
      out.note = "no chart offset between transported samples";
      return out;
    }
    offsets[i] = h.X;
    offsetDist[i] = h.dist;
  }

  const std::size_t nf = fr.dims.size();
  std::vector<Eigen::MatrixXd> med(nf);
  for (std::size_t k = 0; k < nf; ++k) {
    const int d = fr.dims[k];
    med[k].resize(d, d);
    for (int r = 0; r < d; ++r)
      for (int cIdx = 0; cIdx < d; ++cIdx) {
        std::vector<double> vals(n);
        for (std::size_t i = 0; i < n; ++i) vals[i] = offsets[i].f[k](r, cIdx);
        med[k](r, cIdx) = median(vals);
      }
  }

  double spread = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < nf; ++k)
      for (int r = 0; r < fr.dims[k]; ++r)
        for (int cIdx = 0; cIdx < fr.dims[k]; ++cIdx) {
          if (static_cast<int>(k) == uF && r == 0 && cIdx == 1) continue;
          spread = std::max(spread, std::abs(offsets[i].f[k](r, cIdx) - med[k](r, cIdx)));
        }
  out.cosetSpread = spread;

  // One Newton step toward the closest normaliser element.
  double p = med[static_cast<std::size_t>(uF)](0, 0);
  {
    const double d11 = p, m21 = med[static_cast<std::size_t>(uF)](1, 0),
                 d22 = med[static_cast<std::size_t>(uF)](1, 1);
    (void)m21;
    const double grad = -2.0 * (d11 - p) + 2.0 * (d22 - 1.0 / p) / (p * p);
    const double hess =
        2.0 + 2.0 * (1.0 / std::pow(p, 4) - 2.0 * (d22 - 1.0 / p) / std::pow(p, 3));
    if (hess > 0) p -= grad / hess;
  }
  if (p <= 0) {
    out.note = "degenerate normaliser projection";
    return out;
  }
  const double q = med[static_cast<std::size_t>(uF)](0, 1);

  out.Phi = GroupElement::identity(fr.dims);
  for (std::size_t k = 0; k < nf; ++k) {
    if (static_cast<int>(k) == uF) {
      out.Phi.f[k] << p, q, 0.0, 1.0 / p;
    } else {
      const double det = med[k].determinant();
      if (det <= 0) {
        out.note = "degenerate factor median";
        return out;
      }
      out.Phi.f[k] = med[k] / std::pow(det, 1.0 / fr.dims[k]);
    }
  }

  out.beta.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.beta[i] = (offsets[i].f[static_cast<std::size_t>(uF)](0, 1) - q) / p;

  for (double t : {0.7, -1.3, 2.9})
    out.normaliserResidual =
        std::max(out.normaliserResidual,
                 (out.Phi * uPow(fr, out.c * t)).frobDist(uPow(fr, t) * out.Phi));

  const std::size_t nRel = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::max(0, opts.relationSamples)));
  for (std::size_t i = 0; i < nRel; ++i) {
    TransferCocycle zx(alpha1, alpha2, samples[i], images[i]);
    TransferCocycle zxg(alpha1, alpha2, rmul(samples[i], g1), imagesG[i]);
    for (double t : opts.relationT) {
      const QuotientPoint y = flow_u(samples[i], t);
      const OffsetResult h = bestOffset(psi(y), psi(rmul(y, g1)), opts.eps0);
      if (!h.ok) {
        out.note = "no chart offset between transported samples";
        return out;
      }
      const double betaY = (h.X.f[static_cast<std::size_t>(uF)](0, 1) - q) / p;
      const double res =
          std::abs((betaY - out.beta[i]) - (zxg.z(out.c * t) - out.c * zx.z(t)));
      out.cocycleResidual = std::max(out.cocycleResidual, res);
    }
  }

  std::ostringstream csv;
  csv.precision(15);
  csv << "sample,beta,offset_dist\n";
  for (std::size_t i = 0; i < n; ++i)
    csv << i << "," << out.beta[i] << "," << offsetDist[i] << "\n";
  out.csv = csv.str();

  if (spread > opts.spreadTol) {
    out.note = "transport-inconsistent: non-u components vary by " +
               std::to_string(spread);
    return out;
  }
  out.ok = true;
  return out;
}

CohomologyReport cohomology_residual(const TimeChange& alpha1, const TimeChange& alpha2,
                                     const ConjugacyMap& psi,
                                     const TransportResult& transport,
                                     const GroupElement& g, const QuotientPoint& x,
                                     const std::vector<double>& tGrid) {
  CohomologyReport out;
  if (x.lat == nullptr) {
    out.note = "point must carry a lattice";
    return out;
  }
  if (tGrid.empty()) {
    out.note = "empty grid";
    return out;
  }
  const Sl2Frame& fr = *x.lat->frame;
  const int uF = unipotentFactor(fr);
  const double c = transport.c;
  if (c <= 0.5 || c >= 2.0) {
    out.note = "renormalisation ratio outside (1/2, 2)";
    return out;
  }
  const double p = transport.Phi.f[static_cast<std::size_t>(uF)](0, 0);
  const double q = transport.Phi.f[static_cast<std::size_t>(uF)](0, 1);

  const QuotientPoint xg = rmul(x, g);
  OrbitIntegral lhsInt(alpha1, xg);
  const QuotientPoint psix = psi(x);
  TransferCocycle z(alpha1, alpha2, x, psix);
  OrbitIntegral rhsInt(alpha2, rmul(psix, transport.Phi));

  auto transferF = [&](const QuotientPoint& y) {
    const QuotientPoint iy = psi(y);
    const OffsetResult h = bestOffset(iy, psi(rmul(y, g)), 0.5);
    if (!h.ok) throw std::runtime_error("no chart offset along the grid");
    const double beta = (h.X.f[static_cast<std::size_t>(uF)](0, 1) - q) / p;
    OrbitIntegral fi(alpha2, rmul(iy, transport.Phi));
    return fi.value(beta) / c;
  };

  try {
    const double f0 = transferF(x);
    for (double t : tGrid) {
      const double lhs = lhsInt.value(c * t) / c;
      const double rhs = rhsInt.value(c * z.z(t)) / c + transferF(flow_u(x, t)) - f0;
      out.tGrid.push_back(t);
      out.lhs.push_back(lhs);
      out.rhs.push_back(rhs);
      out.residual.push_back(std::abs(lhs - rhs));
      out.maxResidual = std::max(out.maxResidual, std::abs(lhs - rhs));
    }
  } catch (const std::runtime_error& e) {
    out.note = e.what();
    return out;
  }

  std::ostringstream csv;
  csv.precision(15);
  csv << "t,lhs,rhs,residual\n";
  for (std::size_t i = 0; i < out.tGrid.size(); ++i)
    csv << out.tGrid[i] << "," << out.lhs[i] << "," << out.rhs[i] << ","
        << out.residual[i] << "\n";
  out.csv = csv.str();
  out.ok = std::isfinite(out.maxResidual);
  return out;
}

PsiTReport psi_t_convergence(const ConjugacyMap& psi, const ConjugacyMap& zeta,
                             const std::vector<QuotientPoint>& samples,
                             const std::vector<double>& tGrid) {
  PsiTReport out;
  if (samples.empty() || tGrid.empty()) {
    out.note = "samples and grid must be nonempty";
    return out;
  }
  out.tGrid = tGrid;
  out.dist.resize(samples.size());

  std::vector<double> fitT, fitL, fitT2, fitL2;
  std::ostringstream csv;
  csv.precision(15);
  csv << "sample,t,distance\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const QuotientPoint zi = zeta(samples[i]);
    for (double t : tGrid) {
      const double d = quotient_distance(renormalized_conjugacy(psi, samples[i], t), zi);
      out.dist[i].push_back(d);
      out.maxDistance = std::max(out.maxDistance, d);
      csv << i << "," << t << "," << d << "\n";
      if (d > 1e-11) {
        fitT.push_back(t);
        fitL.push_back(std::log(d));
        if (t >= 2.0) {
          fitT2.push_back(t);
          fitL2.push_back(std::log(d));
        }
      }
    }
    for (double t : {0.7, 2.4})
      out.equivarianceResidual =
          std::max(out.equivarianceResidual,
                   quotient_distance(zeta(flow_u(samples[i], t)), flow_u(zi, t)));
  }

  auto slope = [](const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= n;
    my /= n;
    double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
      num += (xs[i] - mx) * (ys[i] - my);
      den += (xs[i] - mx) * (xs[i] - mx);
    }
    return den > 0 ? num / den : 0.0;
  };
  out.fittedRate = fitT.size() >= 2 ? slope(fitT, fitL) : 0.0;
  out.monotoneTrend = fitT2.size() >= 2 ? slope(fitT2, fitL2) < 0.0 : true;
  out.csv = csv.str();
  out.ok = std::isfinite(out.maxDistance) && out.monotoneTrend;
  return out;
}

}  // namespace horolab
