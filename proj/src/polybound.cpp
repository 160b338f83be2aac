#include "horolab/polybound.hpp"

#include "horolab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace horolab {

namespace {

constexpr double kPi = 3.14159265358979323846;

double memberLen(const Interval& j) { return j.hi - j.lo; }

// Pairwise separation d(J', J'') >= min(|J'|, |J''|)^(1+b). Members are
// sorted, so once a row's distance exceeds its own length bound the remaining
// pairs of that row hold as well.
bool separationOk(const std::vector<Interval>& ms, double b, std::string* why) {
  for (size_t i = 0; i < ms.size(); ++i) {
    const double li = memberLen(ms[i]);
    const double rowBound = std::pow(li, 1 + b);
    for (size_t j = i + 1; j < ms.size(); ++j) {
      const double d = ms[j].lo - ms[i].hi;
      if (d >= rowBound) break;
      const double need = std::pow(std::min(li, memberLen(ms[j])), 1 + b);
      if (d < need * (1 - 1e-12)) {
        if (why)
          *why = "separation fails between members " + std::to_string(i) + " and " +
                 std::to_string(j);
        return false;
      }
    }
  }
  return true;
}

// Every connected component of the complement, end pieces included, has
// length >= 1 (or is empty).
bool gapsOk(const Interval& ambient, const std::vector<Interval>& ms, std::string* why) {
  auto gapFine = [](double g) { return g <= 1e-9 || g >= 1 - 1e-9; };
  if (!gapFine(ms.front().lo - ambient.lo)) {
    if (why) *why = "left end component shorter than 1";
    return false;
  }
  if (!gapFine(ambient.hi - ms.back().hi)) {
    if (why) *why = "right end component shorter than 1";
    return false;
  }
  for (size_t j = 0; j + 1 < ms.size(); ++j) {
    if (ms[j + 1].lo - ms[j].hi < 1 - 1e-9) {
      if (why) *why = "complement component after member " + std::to_string(j) + " shorter than 1";
      return false;
    }
  }
  return true;
}

double vnorm(const std::vector<std::vector<double>>& coeffs, size_t i) {
  double m = 0;
  for (double v : coeffs[i]) m = std::max(m, std::abs(v));
  return m;
}

double evalNorm(const std::vector<std::vector<double>>& coeffs, double s) {
  double m = 0;
  for (size_t coord = 0; coord < coeffs[0].size(); ++coord) {
    double v = 0;
    for (size_t i = coeffs.size(); i-- > 0;) v = v * s + coeffs[i][coord];
    m = std::max(m, std::abs(v));
  }
  return m;
}

struct Candidate {
  IntervalCollection coll;
  bool ok = false;
};

// Assembles members of the given lengths with the given gaps between them,
// flush against both ambient ends.
IntervalCollection assembleFlush(const std::vector<double>& lens,
                                 const std::vector<double>& gaps) {
  IntervalCollection coll;
  double cursor = 0;
  for (size_t i = 0; i < lens.size(); ++i) {
    if (i > 0) cursor += gaps[i - 1];
    coll.members.push_back({cursor, cursor + lens[i]});
    cursor += lens[i];
  }
  coll.ambient = {0, cursor};
  return coll;
}

// One adversarial attempt: a collection satisfying the separation and gap
// conditions whose largest member stays strictly below 3/4 of the ambient.
Candidate adversarialTrial(double b, Rng& rng) {
  Candidate cand;
  const int family = static_cast<int>(rng.below(3));
  const double pad = std::pow(10.0, rng.uniform(-7, -3));
  std::vector<double> lens, gaps;
  if (family == 0) {
    // One near-3/4 member padded with unit satellites across unit gaps.
    const int k = std::min(4000, 1 + static_cast<int>(std::exp(rng.uniform(0.0, std::log(4000.0)))));
    const double shave = std::pow(10.0, rng.uniform(-6, -2));
    double satTotal = 0;
    std::vector<double> sats(k);
    for (double& s : sats) satTotal += (s = rng.uniform(0.9, 1.0));
    const double gapTotal = k * (1 + pad);
    const double giant = 3 * (1 - shave) / (1 + 3 * shave) * (satTotal + gapTotal);
    const size_t gi = rng.below(static_cast<uint64_t>(k) + 1);
    for (size_t i = 0; i <= static_cast<size_t>(k); ++i) {
      if (i == gi) lens.push_back(giant);
      if (i < static_cast<size_t>(k)) lens.push_back(sats[i]);
    }
    gaps.assign(k, 1 + pad);
  } else if (family == 1) {
    // Equal members.
    const int n = 2 + static_cast<int>(rng.below(49));
    const double L = rng.uniform(0.1, 10.0);
    lens.assign(n, L);
    gaps.assign(n - 1, std::max(1.0, std::pow(L, 1 + b)) * (1 + pad));
  } else {
    // Geometrically growing members.
    const int n = 2 + static_cast<int>(rng.below(20));
    const double ratio = rng.uniform(1.05, 3.0);
    double len = rng.uniform(0.5, 2.0);
    for (int i = 0; i < n; ++i, len *= ratio) lens.push_back(len);
    for (int i = 0; i + 1 < n; ++i)
      gaps.push_back(std::max(1.0, std::pow(std::min(lens[i], lens[i + 1]), 1 + b)) * (1 + pad));
  }
  cand.coll = assembleFlush(lens, gaps);
  std::string why;
  cand.ok = cand.coll.valid(&why) && separationOk(cand.coll.members, b, &why) &&
            gapsOk(cand.coll.ambient, cand.coll.members, &why) &&
            cand.coll.largestMember() <
                0.75 * (cand.coll.ambient.hi - cand.coll.ambient.lo) * (1 - 1e-12);
  return cand;
}

}  // namespace

bool IntervalCollection::valid(std::string* why) const {
  if (members.empty()) {
    if (why) *why = "no members";
    return false;
  }
  const double tol = 1e-9 * (1 + std::abs(ambient.lo) + std::abs(ambient.hi));
  for (size_t i = 0; i < members.size(); ++i) {
    if (!(members[i].lo < members[i].hi)) {
      if (why) *why = "member " + std::to_string(i) + " is empty";
      return false;
    }
    if (i > 0 && !(members[i].lo > members[i - 1].hi)) {
      if (why) *why = "members " + std::to_string(i - 1) + " and " + std::to_string(i) + " overlap";
      return false;
    }
  }
  if (members.front().lo < ambient.lo - tol || members.back().hi > ambient.hi + tol) {
    if (why) *why = "members leave the ambient interval";
    return false;
  }
  return true;
}

double IntervalCollection::density() const {
  const double len = ambient.hi - ambient.lo;
  if (len <= 0) return 0;
  double covered = 0;
  for (const auto& m : members) covered += memberLen(m);
  return covered / len;
}

double IntervalCollection::largestMember() const {
  double m = 0;
  for (const auto& j : members) m = std::max(m, memberLen(j));
  return m;
}

void write_collection(std::ostream& os, const IntervalCollection& coll) {
  os.precision(17);
  os << "ambient " << coll.ambient.lo << ' ' << coll.ambient.hi << '\n';
  for (const auto& m : coll.members) os << "member " << m.lo << ' ' << m.hi << '\n';
}

double norm_equivalence_constant(int k, int dim) {
  if (k < 0 || k > 8) throw std::invalid_argument("degree out of range [0, 8]");
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
  if (k == 0) return 1.0;
  std::vector<double> nodes(k + 1);
  for (int j = 0; j <= k; ++j) nodes[j] = (1 + std::cos(j * kPi / k)) / 2;
  double worst = 0;
  std::vector<double> rowSum(k + 1, 0.0);
  for (int j = 0; j <= k; ++j) {
    std::vector<double> num{1.0};
    double den = 1;
    for (int m = 0; m <= k; ++m) {
      if (m == j) continue;
      den *= nodes[j] - nodes[m];
      std::vector<double> next(num.size() + 1, 0.0);
      for (size_t i = 0; i < num.size(); ++i) {
        next[i] -= num[i] * nodes[m];
        next[i + 1] += num[i];
      }
      num = std::move(next);
    }
    for (size_t i = 0; i < num.size(); ++i) rowSum[i] += std::abs(num[i] / den);
  }
  for (double v : rowSum) worst = std::max(worst, v);
  return 1.5 * worst;
}

double norm_hop_factor(int k) {
  return norm_equivalence_constant(k) * std::ldexp(1.0, k) * (k + 1);
}

CoeffBoundReport check_coeff_bounds(const std::vector<std::vector<double>>& coeffsIn,
                                    const IntervalCollection& intervals, double C,
                                    double eps, double eta, double b,
                                    double kappaPrimeOverride) {
  CoeffBoundReport rep;
  auto fail = [&rep](const std::string& why) {
    rep.note = why;
    return rep;
  };
  std::vector<std::vector<double>> coeffs = coeffsIn;
  if (coeffs.empty()) coeffs = {{0.0}};
  const int k = static_cast<int>(coeffs.size()) - 1;
  if (k > 8) return fail("degree above 8");
  for (const auto& row : coeffs)
    if (row.empty() || row.size() != coeffs[0].size()) return fail("ragged coefficient rows");
  if (!(C > 0) || !(eps >= 0) || !(eta > 0) || !(eta <= 1) || !(b > 0))
    return fail("invalid parameters");
  std::string why;
  if (!intervals.valid(&why)) return fail(why);
  const auto& ms = intervals.members;
  if (std::abs(ms.front().lo) > 1e-9) return fail("first interval must start at 0");
  const double sbar1 = ms.front().hi;
  if (sbar1 < 1 - 1e-12) return fail("first interval must reach 1");
  if (eps > C * std::pow(sbar1, 1 - eta) * (1 + 1e-12))
    return fail("eps exceeds the allowance at the end of the first interval");
  for (size_t j = 0; j + 1 < ms.size(); ++j) {
    const double gap = ms[j + 1].lo - ms[j].hi;
    if (gap > std::pow(ms[j].hi, 1 + b) * (1 + 1e-12))
      return fail("gap after member " + std::to_string(j) + " is not b-close");
  }
  for (size_t j = 0; j < ms.size(); ++j) {
    const double mid = (ms[j].lo + ms[j].hi) / 2, half = (ms[j].hi - ms[j].lo) / 2;
    for (int n = 0; n <= 65; ++n) {
      const double s = n == 65 ? ms[j].lo : mid + half * std::cos(n * kPi / 64);
      const double allow = std::max(eps, C * std::pow(std::max(s, 0.0), 1 - eta));
      if (evalNorm(coeffs, s) > allow * (1 + 1e-9) + 1e-12)
        return fail("polynomial exceeds the allowance on member " + std::to_string(j));
    }
  }

  rep.hypothesesOk = true;
  rep.kappa = norm_equivalence_constant(k);
  rep.kappaPrime = kappaPrimeOverride > 0 ? kappaPrimeOverride : norm_hop_factor(k);
  const double h = static_cast<double>(ms.size());
  const double sbarH = ms.back().hi;
  rep.allPass = true;
  for (int i = 0; i <= k; ++i) {
    const double allowed = C * rep.kappa * std::pow(rep.kappaPrime, h - 1) *
                           std::pow(sbarH, -i + 1 - eta + (h - 1) * k * b);
    const double observed = vnorm(coeffs, i);
    rep.allowed.push_back(allowed);
    rep.observed.push_back(observed);
    const bool ok = observed <= allowed * (1 + 1e-12);
    rep.coeffPass.push_back(ok ? 1 : 0);
    rep.allPass = rep.allPass && ok;
  }
  return rep;
}

SolovayReport solovay_find_block(const IntervalCollection& coll, double b, double theta) {
  SolovayReport rep;
  std::string why;
  if (!coll.valid(&why)) {
    rep.note = why;
    return rep;
  }
  rep.density = coll.density();
  if (!separationOk(coll.members, b, &why)) {
    rep.note = why;
    return rep;
  }
  if (!(rep.density > 1 - theta)) {
    rep.note = "density not above 1 - theta";
    return rep;
  }
  if (!gapsOk(coll.ambient, coll.members, &why)) {
    rep.note = why;
    return rep;
  }
  rep.hypothesesOk = true;
  const Interval* best = nullptr;
  for (const auto& m : coll.members)
    if (!best || memberLen(m) > memberLen(*best)) best = &m;
  if (best && memberLen(*best) >= 0.75 * (coll.ambient.hi - coll.ambient.lo) * (1 - 1e-12))
    rep.giant = *best;
  return rep;
}

double solovay_estimate_theta(double b, int trials, uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("trials must be positive");
  if (!(b > 0)) throw std::invalid_argument("b must be positive");
  RngFactory fac(seed);
  double bestDensity = 0;
  for (int t = 0; t < trials; ++t) {
    Rng rng = fac.stream(static_cast<uint64_t>(t));
    Candidate cand = adversarialTrial(b, rng);
    if (cand.ok) bestDensity = std::max(bestDensity, cand.coll.density());
  }
  const int m = std::min(99, static_cast<int>(std::floor((1 - bestDensity) * 100 + 1e-9)));
  return m < 1 ? 0.0 : m / 100.0;
}

}  // namespace horolab
