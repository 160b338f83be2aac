#include "horolab/timechange.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "horolab/rng.hpp"

namespace horolab {

namespace {

constexpr double kGlNode[5] = {0.14887433898163121088, 0.43339539412924719080,
                              0.67940956829902440623, 0.86506336668898451073,
                              0.97390652851717172008};
constexpr double kGlWeight[5] = {0.29552422471475287017, 0.26926671930999635509,
                                0.21908636251598204400, 0.14945134915058059315,
                                0.06667134430868813759};

}  // namespace

double BumpProfile::value(double r) const {
  const double s = (r - center) / width;
  const double s2 = s * s;
  if (s2 >= 1.0 - 1e-12) return 0.0;
  return amplitude * std::exp(1.0 - 1.0 / (1.0 - s2));
}

double BumpProfile::deriv(double r) const {
  const double s = (r - center) / width;
  const double s2 = s * s;
  if (s2 >= 1.0 - 1e-12) return 0.0;
  const double q = 1.0 - s2;
  return value(r) * (-2.0 * s / (q * q)) / width;
}

double BumpProfile::planeIntegral() const {
  const double lo = std::max(0.0, center - width);
  const double hi = center + width;
  const int panels = 64;
  const double h = (hi - lo) / panels;
  double total = 0;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * h, half = h / 2;
    for (int k = 0; k < 5; ++k)
      for (double sgn : {-1.0, 1.0}) {
        const double r = mid + sgn * half * kGlNode[k];
        total += kGlWeight[k] * half * value(r) * r;
      }
  }
  return 6.283185307179586477 * total;
}

void LatticeSumObservable::rawSum(const Eigen::Matrix2d& rep, double& val,
                                  double& der) const {
  // Lattice basis: columns of rep^T, i.e. the rows of rep.
  Eigen::Vector2d b1(rep(0, 0), rep(0, 1));
  Eigen::Vector2d b2(rep(1, 0), rep(1, 1));
  for (int it = 0; it < 200; ++it) {
    if (b1.squaredNorm() > b2.squaredNorm()) std::swap(b1, b2);
    const double mu = std::round(b2.dot(b1) / b1.squaredNorm());
    if (mu == 0) break;
    b2 -= mu * b1;
  }
  const double R = phi_.center + phi_.width;
  const double n1 = b1.norm();
  const int nMax = static_cast<int>(std::floor(R * n1)) + 1;
  const double proj = b2.dot(b1) / b1.squaredNorm();
  const int mSpan = static_cast<int>(std::floor(R / n1)) + 1;
  val = 0;
  der = 0;
  for (int n = -nMax; n <= nMax; ++n) {
    const double mc = -n * proj;
    const int mLo = static_cast<int>(std::floor(mc)) - mSpan;
    const int mHi = static_cast<int>(std::ceil(mc)) + mSpan;
    for (int m = mLo; m <= mHi; ++m) {
      if (m == 0 && n == 0) continue;
      const Eigen::Vector2d w = m * b1 + n * b2;
      const double r = w.norm();
      if (r <= phi_.center - phi_.width || r >= R) continue;
      val += phi_.value(r);
      der += phi_.deriv(r) * w(0) * w(1) / r;
    }
  }
}

double LatticeSumObservable::value(const QuotientPoint& p) const {
  double v, d;
  valueAndDerivative(p, v, d);
  return v;
}

double LatticeSumObservable::uDerivative(const QuotientPoint& p) const {
  double v, d;
  valueAndDerivative(p, v, d);
  return d;
}

void LatticeSumObservable::valueAndDerivative(const QuotientPoint& p, double& val,
                                              double& der) const {
  rawSum(p.rep.f[0], val, der);
  if (sat_ > 0) {
    const double c = std::cosh(val / sat_);
    der /= c * c;
    val = sat_ * std::tanh(val / sat_);
  }
}

double LatticeSumObservable::exactMean() const {
  if (sat_ > 0)
    throw std::logic_error("closed-form mean requires the uncompressed sum");
  return phi_.planeIntegral();
}

TimeChange unit_time_change() {
  TimeChange tc;
  tc.alpha = [](const QuotientPoint&) { return 1.0; };
  tc.lower = 1.0;
  tc.upper = 1.0;
  return tc;
}

TimeChange coboundary_time_change(const LatticeSumObservable& f, double lower,
                                  double upper) {
  TimeChange tc;
  tc.alpha = [f](const QuotientPoint& p) { return 1.0 + f.uDerivative(p); };
  tc.lower = lower;
  tc.upper = upper;
  return tc;
}

OrbitIntegral::OrbitIntegral(TimeChange tc, QuotientPoint base, double unitTol)
    : tc_(std::move(tc)), base_(std::move(base)), unitTol_(unitTol) {
  pos_.push_back(base_);
  neg_.push_back(base_);
  posPrefix_.push_back(0.0);
  negPrefix_.push_back(0.0);
}

const QuotientPoint& OrbitIntegral::anchor(int n) {
  if (n >= 0) {
    while (static_cast<int>(pos_.size()) <= n) {
      const int k = static_cast<int>(pos_.size()) - 1;
      posPrefix_.push_back(posPrefix_[k] + segment(pos_[k], 0.0, 1.0));
      pos_.push_back(flow_u(pos_[k], 1.0));
    }
    return pos_[n];
  }
  const int a = -n;
  while (static_cast<int>(neg_.size()) <= a) {
    const int k = static_cast<int>(neg_.size()) - 1;
    QuotientPoint prev = flow_u(neg_[k], -1.0);
    negPrefix_.push_back(negPrefix_[k] - segment(prev, 0.0, 1.0));
    neg_.push_back(prev);
  }
  return neg_[a];
}

double OrbitIntegral::evalAt(const Eigen::Matrix2d& lead, const QuotientPoint& anch,
                             double t) {
  ++evals_;
  GroupElement g = anch.rep;
  g.f[0] = lead;
  g.f[0].col(1) += t * lead.col(0);
  const double a = tc_.alpha(reduce(g, *anch.lat).point);
  if (tc_.lower > 0 &&
      (a < tc_.lower - 1e-12 || a > tc_.upper + 1e-12))
    throw std::runtime_error("time change left its certified bracket");
  return a;
}

double OrbitIntegral::panel(const Eigen::Matrix2d& lead, const QuotientPoint& anch,
                            double a, double b) {
  const double mid = (a + b) / 2, half = (b - a) / 2;
  double total = 0;
  for (int k = 0; k < 5; ++k)
    for (double sgn : {-1.0, 1.0})
      total += kGlWeight[k] * evalAt(lead, anch, mid + sgn * half * kGlNode[k]);
  return total * half;
}

double OrbitIntegral::adapt(const Eigen::Matrix2d& lead, const QuotientPoint& anch,
                            double a, double b, double whole, double tol, int depth) {
  const double mid = (a + b) / 2;
  const double left = panel(lead, anch, a, mid);
  const double right = panel(lead, anch, mid, b);
  if (std::abs(whole - (left + right)) <= tol || depth >= 24)
    return left + right;
  return adapt(lead, anch, a, mid, left, tol / 2, depth + 1) +
         adapt(lead, anch, mid, b, right, tol / 2, depth + 1);
}

double OrbitIntegral::segment(const QuotientPoint& anch, double a, double b) {
  if (b <= a) return 0.0;
  const Eigen::Matrix2d lead = anch.rep.f[0];
  const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / 0.25)));
  const double h = (b - a) / panels;
  double total = 0;
  for (int p = 0; p < panels; ++p) {
    const double pa = a + p * h, pb = a + (p + 1) * h;
    const double whole = panel(lead, anch, pa, pb);
    total += adapt(lead, anch, pa, pb, whole, unitTol_ * h, 0);
  }
  return total;
}

double OrbitIntegral::value(double t) {
  const int n = static_cast<int>(std::floor(t));
  const double frac = t - n;
  anchor(n);
  const double prefix = n >= 0 ? posPrefix_[n] : negPrefix_[-n];
  if (frac == 0.0) return prefix;
  return prefix + segment(anchor(n), 0.0, frac);
}

QuotientPoint OrbitIntegral::at(double t) {
  const int n = static_cast<int>(std::floor(t));
  return flow_u(anchor(n), t - n);
}

double OrbitIntegral::inverse(double s) {
  if (!(tc_.lower > 0))
    throw std::logic_error("inverse requires a positive time change");
  double lo = std::min(s / tc_.lower, s / tc_.upper);
  double hi = std::max(s / tc_.lower, s / tc_.upper);
  const double tol = 1e-13 * (1.0 + std::abs(s));
  double t = std::clamp(s, lo, hi);
  for (int it = 0; it < 80; ++it) {
    const double F = value(t) - s;
    if (std::abs(F) <= tol) return t;
    if (F > 0)
      hi = std::min(hi, t);
    else
      lo = std::max(lo, t);
    const double slope = tc_.alpha(at(t));
    double next = t - F / slope;
    if (!(next > lo && next < hi)) next = (lo + hi) / 2;
    t = next;
  }
  return t;
}

QuotientPoint ConjugacyTestbed::psi(const QuotientPoint& p) const {
  return flow_u(p, f.value(p));
}

double ConjugacyTestbed::exactXi(const QuotientPoint& p, double t) const {
  return t + f.value(flow_u(p, t)) - f.value(p);
}

ConjugacyTestbed make_coboundary_testbed() {
  // Amplitude and compression chosen so the u derivative stays within
  // [-0.114, 0.114] on dense orbit sweeps; the bracket keeps 1.7x headroom.
  ConjugacyTestbed tb{LatticeSumObservable(BumpProfile{0.005, 1.0, 0.15}, 0.01),
                      TimeChange{}, unit_time_change()};
  tb.alpha1 = coboundary_time_change(tb.f, 0.8, 1.2);
  return tb;
}

DeviationReport deviation_exponent(const LatticeSumObservable& f, const Lattice& lat,
                                   Rng& rng, double Tmin, double Tmax, int bases,
                                   int gridPoints) {
  DeviationReport rep;
  const double mean = f.exactMean();
  rep.times.resize(gridPoints);
  rep.meanAbs.assign(gridPoints, 0.0);
  for (int k = 0; k < gridPoints; ++k)
    rep.times[k] = Tmin * std::pow(Tmax / Tmin, gridPoints > 1
                                                    ? static_cast<double>(k) /
                                                          (gridPoints - 1)
                                                    : 0.0);
  TimeChange h;
  h.alpha = [&f, mean](const QuotientPoint& p) { return f.value(p) - mean; };
  h.lower = 0;  // signed integrand: no bracket, no inverse
  h.upper = 0;

  const Sl2Frame& fr = *lat.frame;
  for (int b = 0; b < bases; ++b) {
    GroupElement g = expm(fr.U * rng.uniform(0.0, 1.0)) *
                     expm(fr.Ubar * rng.uniform(-0.5, 0.5)) *
                     expm(fr.A * rng.uniform(-0.8, 0.8));
    OrbitIntegral cur(h, makePoint(g, lat));
    for (int k = 0; k < gridPoints; ++k)
      rep.meanAbs[k] += std::abs(cur.value(rep.times[k]));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 0; k < gridPoints; ++k) {
    rep.meanAbs[k] /= bases;
    const double x = std::log(rep.times[k]);
    const double y = std::log(std::max(rep.meanAbs[k], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = gridPoints;
  rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return rep;
}

}  // namespace horolab
