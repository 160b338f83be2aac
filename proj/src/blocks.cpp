#include "horolab/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace horolab {

namespace {

Eigen::Matrix2d intMat(const std::array<std::int64_t, 4>& m) {
  Eigen::Matrix2d g;
  g << static_cast<double>(m[0]), static_cast<double>(m[1]),
      static_cast<double>(m[2]), static_cast<double>(m[3]);
  return g;
}

// Exact u-flow element: the flow generator is nilpotent in every frame the
// lattices use, so the exponential series terminates within dim terms.
GroupElement uPow(const Sl2Frame& fr, double t) {
  GroupElement g = GroupElement::identity(fr.dims);
  for (std::size_t k = 0; k < g.f.size(); ++k) {
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(fr.dims[k], fr.dims[k]);
    for (int p = 1; p <= fr.dims[k]; ++p) {
      term = term * fr.U.f[k] * (t / p);
      if (term.squaredNorm() == 0.0) break;
      g.f[k] += term;
    }
  }
  return g;
}

struct LiftCand {
  LatticeElement deck;
  GroupElement lift;
  TrackParams params;
  double dist = std::numeric_limits<double>::infinity();
};

// All lattice translates of yCand that land in the chart around xLift,
// nearest first. deck is relative to yCand itself: lift = deck * yCand.
std::vector<LiftCand> enumerateLifts(const GroupElement& xLift, const GroupElement& yCand,
                                     const Lattice& lat, const Sl2Frame& fr) {
  const ReduceResult rx = reduce(xLift, lat);
  const ReduceResult ry = reduce(yCand, lat);
  std::vector<Eigen::Matrix2d> Ainv(lat.factors), B(lat.factors);
  std::vector<std::vector<std::array<std::int64_t, 4>>> keep(lat.factors);
  for (int fac = 0; fac < lat.factors; ++fac) {
    const Eigen::Matrix2d A = rx.point.rep.f[fac];
    Ainv[fac] << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0);
    B[fac] = ry.point.rep.f[fac];
    std::vector<std::pair<double, std::array<std::int64_t, 4>>> scored;
    for (const auto& gm : lat.enumeration()) {
      const Eigen::Matrix2d X = Ainv[fac] * intMat(gm) * B[fac];
      if ((X - Eigen::Matrix2d::Identity()).squaredNorm() > 2.5) continue;
      const double d = factor_chart_distance(X, lat, fac, 0.6);
      if (std::isinf(d)) continue;
      scored.emplace_back(d, gm);
    }
    if (scored.empty()) return {};
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (scored.size() > 4) scored.resize(4);
    keep[fac].reserve(scored.size());
    for (const auto& s : scored) keep[fac].push_back(s.second);
  }
  std::vector<LiftCand> out;
  std::vector<std::size_t> idx(lat.factors, 0);
  while (true) {
    LatticeElement gp;
    gp.f.resize(lat.factors);
    GroupElement X;
    X.f.reserve(lat.factors);
    for (int fac = 0; fac < lat.factors; ++fac) {
      gp.f[fac] = keep[fac][idx[fac]];
      X.f.push_back(Ainv[fac] * intMat(gp.f[fac]) * B[fac]);
    }
    try {
      LiftCand c;
      c.params = decompose_near_identity(X, fr, 0.5);
      c.deck = latticeMul(latticeInv(rx.gamma), latticeMul(gp, ry.gamma));
      c.lift = latticeToGroup(c.deck) * yCand;
      c.dist = c.params.dist();
      out.push_back(std::move(c));
    } catch (const OutsideChartError&) {
    }
    int pos = lat.factors - 1;
    while (pos >= 0) {
      if (++idx[pos] < keep[pos].size()) break;
      idx[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  std::sort(out.begin(), out.end(),
            [](const LiftCand& a, const LiftCand& b) { return a.dist < b.dist; });
  return out;
}

int memberIndexAt(const std::vector<Interval>& ms, double s) {
  for (std::size_t i = 0; i < ms.size(); ++i)
    if (s >= ms[i].lo - 1e-9 && s <= ms[i].hi + 1e-9) return static_cast<int>(i);
  int best = 0;
  for (std::size_t i = 0; i < ms.size(); ++i)
    if (ms[i].lo <= s) best = static_cast<int>(i);
  return best;
}

// Rightmost r in [lo, hi] with D(r) <= rho, located by a right-to-left coarse
// walk, a fine walk inside the first crossing bracket, and bisection to 1e-6.
// Returns NaN when no point of the segment satisfies the bound.
template <typename Fn>
double scanMember(const Fn& D, double lo, double hi, double rho, double fine) {
  if (hi < lo) return std::numeric_limits<double>::quiet_NaN();
  if (D(hi) <= rho) return hi;
  if (hi - lo < 1e-15) return std::numeric_limits<double>::quiet_NaN();
  const double coarse = std::max(fine, std::min(1.0, (hi - lo) / 64.0));
  double above = hi;
  double at = hi - coarse;
  while (true) {
    if (at < lo) at = lo;
    if (D(at) <= rho) break;
    above = at;
    if (at <= lo) return std::numeric_limits<double>::quiet_NaN();
    at -= coarse;
  }
  double sat = at;
  double r = above - fine;
  while (r > at + 1e-15) {
    if (D(r) <= rho) {
      sat = r;
      break;
    }
    above = r;
    r -= fine;
  }
  double a = sat, b = above;
  while (b - a > 1e-6) {
    const double mid = 0.5 * (a + b);
    if (D(mid) <= rho) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return a;
}

struct NoLift {
  std::string msg;
};

std::string joinStrings(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

}  // namespace

BuildBlocksResult build_blocks(const QuotientPoint& x, const QuotientPoint& y,
                               const TauFn& tau, const IntervalCollection& A_set,
                               double rho, double eps, double eta) {
  BuildBlocksResult out;
  if (x.lat == nullptr || y.lat == nullptr || x.lat != y.lat) {
    out.note = "points must share a lattice";
    return out;
  }
  const Lattice& lat = *x.lat;
  const Sl2Frame& fr = *lat.frame;
  std::string why;
  if (!A_set.valid(&why)) {
    out.note = "invalid member collection: " + why;
    return out;
  }
  if (!(rho > 0.0) || rho > eps / 2.0 * (1.0 + 1e-12)) {
    out.note = "rho must lie in (0, eps/2]";
    return out;
  }
  if (!(eta > 0.0 && eta < 1.0)) {
    out.note = "eta must lie in (0, 1)";
    return out;
  }
  const auto& ms = A_set.members;
  if (std::abs(ms.front().lo) > 1e-9) {
    out.note = "members must start at 0";
    return out;
  }
  if (std::abs(tau(0.0)) > 1e-9) {
    out.note = "tau(0) must vanish";
    return out;
  }
  const double lambdaS = ms.back().hi;
  const double fineStep = std::min(rho / 4.0, 0.05);

  const GroupElement x1 = x.rep;
  GroupElement yBase;
  double sLeft = 0.0;
  int stall = 0;

  auto pick = [&](const GroupElement& xl, const GroupElement& yc, double r) -> LiftCand {
    auto cands = enumerateLifts(xl, yc, lat, fr);
    if (cands.empty() || cands[0].dist > rho + 1e-9) {
      std::ostringstream os;
      os << "no lift within rho at r=" << r;
      if (!cands.empty()) os << " (closest " << cands[0].dist << ")";
      throw NoLift{os.str()};
    }
    if (cands.size() >= 2 && cands[1].dist <= rho) {
      std::ostringstream os;
      os << "ambiguous lift at r=" << r << ": lattice translates at distances "
         << cands[0].dist << " and " << cands[1].dist << " are both within rho";
      throw std::runtime_error(os.str());
    }
    return cands[0];
  };

  while (true) {
    if (out.blocks.size() > 100000) {
      out.note = "block count exceeds 100000";
      return out;
    }
    const double tLeft = out.blocks.empty() ? 0.0 : tau(sLeft);
    const GroupElement xj = x1 * uPow(fr, sLeft);
    LiftCand cand;
    try {
      if (out.blocks.empty()) {
        cand = pick(xj, y.rep, sLeft);
        yBase = cand.lift;
        cand.deck = latticeIdentity(lat.factors);
      } else {
        cand = pick(xj, yBase * uPow(fr, tLeft), sLeft);
      }
    } catch (const NoLift& e) {
      out.note = e.msg;
      return out;
    }

    const TrackingWindow w = l_eps_window(cand.params, eps, eta);
    const double cap = sLeft + w.l;
    const GroupElement G = xj.inverse() * cand.lift;
    auto D = [&](double r) {
      const GroupElement X = uPow(fr, -(r - sLeft)) * G * uPow(fr, tau(r) - tLeft);
      return group_distance(X, fr, 0.5);
    };

    const int mi0 = memberIndexAt(ms, sLeft);
    double sBar = sLeft;
    int miFound = mi0;
    char reason = 'r';
    bool found = false;
    for (int mi = static_cast<int>(ms.size()) - 1; mi >= mi0 && !found; --mi) {
      const double lo = std::max(ms[mi].lo, sLeft);
      const double hi = std::min(ms[mi].hi, cap);
      if (hi < lo) continue;
      const double rstar = scanMember(D, lo, hi, rho, fineStep);
      if (std::isnan(rstar)) continue;
      sBar = rstar;
      miFound = mi;
      if (rstar >= ms[mi].hi - 1e-12) {
        reason = 'A';
      } else if (std::isfinite(cap) && rstar >= cap - 1e-12) {
        reason = 'w';
      } else {
        reason = 'r';
      }
      found = true;
    }

    Block b;
    b.s = sLeft;
    b.s_bar = sBar;
    b.t = tLeft;
    b.t_bar = (sBar == sLeft) ? tLeft : tau(sBar);
    b.x_lift = xj;
    b.y_lift = cand.lift;
    b.deck = cand.deck;
    b.offset = cand.params;
    b.offset_dist = cand.dist;
    b.window = w.l;
    b.end_reason = reason;
    out.liftSlackMax = std::max(out.liftSlackMax, std::max(0.0, cand.dist - rho));
    out.blocks.push_back(std::move(b));

    if (sBar >= lambdaS - 1e-12) break;
    const double sNext =
        (sBar >= ms[miFound].hi - 1e-12) ? ms[miFound + 1].lo : sBar;
    if (sNext - sLeft < 1e-5) {
      if (++stall >= 3) {
        std::ostringstream os;
        os << "shadowing stalls near r=" << sBar
           << ": the pair leaves rho with no alternative lift";
        out.note = os.str();
        return out;
      }
    } else {
      stall = 0;
    }
    sLeft = sNext;
  }

  out.equivClass.assign(out.blocks.size(), -1);
  std::vector<int> reps;
  for (std::size_t j = 0; j < out.blocks.size(); ++j) {
    for (int r : reps) {
      if (out.blocks[static_cast<std::size_t>(r)].deck == out.blocks[j].deck) {
        out.equivClass[j] = r;
        break;
      }
    }
    if (out.equivClass[j] < 0) {
      out.equivClass[j] = static_cast<int>(j);
      reps.push_back(static_cast<int>(j));
    }
  }
  out.ok = true;
  return out;
}

bool block_equiv(const Block& b1, const Block& b2, const Sl2Frame& frame, double tol) {
  const GroupElement lhs = b1.y_lift * uPow(frame, b2.t - b1.t);
  return group_distance(lhs.inverse() * b2.y_lift, frame, 0.5) <= tol;
}

InvariantReport check_block_invariants(const BuildBlocksResult& run, const QuotientPoint& x,
                                       const TauFn& tau, const IntervalCollection& A_set,
                                       double rho, double eps, double eta, double m) {
  InvariantReport rep;
  const Sl2Frame& fr = *x.lat->frame;
  const auto& bs = run.blocks;
  auto flag = [&](const std::ostringstream& os) { rep.violations.push_back(os.str()); };

  for (const auto& mem : A_set.members) {
    double cur = mem.lo;
    const double tol = 1e-6 * (1.0 + std::abs(mem.hi));
    for (const auto& b : bs) {
      if (b.s_bar < cur - tol) continue;
      if (b.s > cur + tol) break;
      cur = std::max(cur, b.s_bar);
    }
    if (cur < mem.hi - tol) {
      std::ostringstream os;
      os << "member [" << mem.lo << ", " << mem.hi << "] not covered beyond " << cur;
      flag(os);
    }
  }

  for (std::size_t j = 0; j < bs.size(); ++j) {
    const Block& b = bs[j];
    {
      const GroupElement want = x.rep * uPow(fr, b.s);
      double d = 0.0;
      for (std::size_t k = 0; k < want.f.size(); ++k)
        d = std::max(d, (want.f[k] - b.x_lift.f[k]).template lpNorm<Eigen::Infinity>());
      if (d > 1e-9 * (1.0 + std::abs(b.s))) {
        std::ostringstream os;
        os << "block " << j << ": x lift drifts from the exact u-orbit by " << d;
        flag(os);
      }
    }
    if (b.offset_dist > rho + 1e-9) {
      std::ostringstream os;
      os << "block " << j << ": left-end distance " << b.offset_dist << " exceeds rho";
      flag(os);
    }
    if (std::isfinite(b.window) && b.s_bar - b.s > b.window + 1e-6) {
      std::ostringstream os;
      os << "block " << j << ": length " << b.s_bar - b.s << " exceeds its window " << b.window;
      flag(os);
    }
    if (std::abs(tau(b.s) - b.t) > 1e-9 * (1.0 + std::abs(b.t)) ||
        std::abs(tau(b.s_bar) - b.t_bar) > 1e-9 * (1.0 + std::abs(b.t_bar))) {
      std::ostringstream os;
      os << "block " << j << ": recorded reparametrised times disagree with tau";
      flag(os);
    }
    bool inA = false;
    for (const auto& mem : A_set.members)
      if (b.s >= mem.lo - 1e-6 && b.s <= mem.hi + 1e-6) inA = true;
    if (!inA) {
      std::ostringstream os;
      os << "block " << j << ": left end " << b.s << " is not a sampled point";
      flag(os);
    }
    {
      const GroupElement G = b.x_lift.inverse() * b.y_lift;
      const GroupElement rebuilt = assemble(fr, b.offset);
      double d = 0.0;
      for (std::size_t k = 0; k < G.f.size(); ++k)
        d = std::max(d, (G.f[k] - rebuilt.f[k]).template lpNorm<Eigen::Infinity>());
      if (d > 1e-8) {
        std::ostringstream os;
        os << "block " << j << ": stored offset parameters disagree with the lifts by " << d;
        flag(os);
      }
    }
  }

  for (std::size_t j = 0; j < bs.size(); ++j) {
    for (std::size_t k = j + 1; k < bs.size(); ++k) {
      const bool deckEq = bs[j].deck == bs[k].deck;
      const bool chartEq = block_equiv(bs[j], bs[k], fr, 1e-6);
      const bool classEq = run.equivClass[j] == run.equivClass[k];
      if (deckEq != chartEq || deckEq != classEq) {
        std::ostringstream os;
        os << "blocks " << j << " and " << k << ": equivalence tests disagree";
        flag(os);
      }
      if (deckEq) {
        try {
          const GroupElement inv = bs[j].y_lift.inverse() * bs[j].x_lift;
          const TrackParams ip = decompose_near_identity(inv, fr, 0.5);
          const double li = l_eps_window(ip, eps, eta).l;
          if (std::isfinite(li)) {
            if (bs[k].s - bs[j].s < li * (1.0 - 1e-9) - 1e-6) {
              std::ostringstream os;
              os << "equivalent blocks " << j << " and " << k << ": spacing "
                 << bs[k].s - bs[j].s << " is below the reverse window " << li;
              flag(os);
            }
          } else {
            std::ostringstream os;
            os << "equivalent blocks " << j << " and " << k
               << ": reverse window is infinite yet the pair is split";
            flag(os);
          }
        } catch (const OutsideChartError&) {
          std::ostringstream os;
          os << "blocks " << j << " and " << k << ": reverse offset left the chart";
          flag(os);
        }
        if (m > 0.0 && !(bs[k].s - bs[j].s > m)) {
          std::ostringstream os;
          os << "equivalent blocks " << j << " and " << k << ": spacing at most m";
          flag(os);
        }
      } else {
        const double sg = bs[k].s - bs[j].s_bar;
        const double tg = bs[k].t - bs[j].t_bar;
        if (m > 0.0 && !(std::max(sg, tg) > m)) {
          std::ostringstream os;
          os << "inequivalent blocks " << j << " and " << k << ": gap at most m";
          flag(os);
        }
        if (sg > 0.0 &&
            std::abs(tg - sg) > 4.0 * std::pow(sg, 1.0 - eta) * (1.0 + 1e-9) + 1e-9) {
          std::ostringstream os;
          os << "inequivalent blocks " << j << " and " << k << ": delay " << tg - sg
             << " violates the gap bound";
          flag(os);
        }
      }
    }
  }

  rep.pass = rep.violations.empty();
  return rep;
}

SuperblockResult superblocks(const std::vector<Block>& blocks,
                             const std::vector<int>& equivClass, const Sl2Frame& fr,
                             const IntervalCollection& A_set, double b, double eps,
                             double eta, double kappaTilde, double m) {
  SuperblockResult out;
  out.itemPass = {false, false, false, false};
  out.itemNotes.assign(4, "not evaluated");
  if (blocks.empty() || blocks.size() != equivClass.size()) {
    out.note = "class labels must match a nonempty block list";
    return out;
  }
  const int n = static_cast<int>(blocks.size());
  const double lambdaS = A_set.members.empty() ? 0.0 : A_set.members.back().hi;
  const int Dbound = fr.componentBound();

  int i = 0;
  while (i < n) {
    const Block& lead = blocks[static_cast<std::size_t>(i)];
    const double span = std::max(lambdaS - lead.s, lead.s_bar - lead.s);
    const std::vector<Interval> comps =
        sublevel_components(lead.offset, eps, eta, kappaTilde, span);
    if (comps.empty()) {
      out.note = "empty sub-level at block " + std::to_string(i);
      return out;
    }
    auto locate = [&](int k) -> int {
      const double lo = blocks[static_cast<std::size_t>(k)].s - lead.s;
      const double hi = blocks[static_cast<std::size_t>(k)].s_bar - lead.s;
      for (std::size_t c = 0; c < comps.size(); ++c) {
        const double tol = 1e-6 * (1.0 + std::abs(comps[c].hi));
        if (lo >= comps[c].lo - tol && hi <= comps[c].hi + tol) return static_cast<int>(c);
      }
      return -1;
    };
    if (locate(i) != 0) {
      out.note = "kappa_tilde too small: block " + std::to_string(i) +
                 " is not inside the first sub-level component";
      return out;
    }
    std::size_t prefix = comps.size();
    for (std::size_t c = 0; c + 1 < comps.size(); ++c) {
      const double gap = comps[c + 1].lo - comps[c].hi;
      const double need = std::pow(std::max(comps[c].hi, 0.0), 1.0 + b);
      if (gap > need * (1.0 + 1e-12)) {
        prefix = c + 1;
        break;
      }
    }
    int jmax = i, kmax = 0;
    for (int k = i + 1; k < n; ++k) {
      if (equivClass[static_cast<std::size_t>(k)] != equivClass[static_cast<std::size_t>(i)])
        continue;
      const int c = locate(k);
      if (c < 0) {
        out.note = "kappa_tilde too small: block " + std::to_string(k) +
                   " is not inside one sub-level component";
        return out;
      }
      if (c < static_cast<int>(prefix) && k > jmax) {
        jmax = k;
        kmax = c;
      }
    }
    Superblock sb;
    sb.leader = i;
    sb.hull = {lead.s, blocks[static_cast<std::size_t>(jmax)].s_bar};
    for (int k = i; k <= jmax; ++k) sb.blockIndices.push_back(k);
    for (int c = 0; c <= kmax; ++c) {
      sb.componentIndices.push_back(c);
      sb.components.push_back({comps[static_cast<std::size_t>(c)].lo + lead.s,
                               comps[static_cast<std::size_t>(c)].hi + lead.s});
    }
    if (static_cast<int>(sb.componentIndices.size()) > Dbound) {
      out.note = "more b-close components than the component bound at block " +
                 std::to_string(i);
      return out;
    }
    out.supers.push_back(std::move(sb));
    i = jmax + 1;
  }

  {
    std::vector<std::string> bad;
    for (const auto& mem : A_set.members) {
      double cur = mem.lo;
      const double tol = 1e-6 * (1.0 + std::abs(mem.hi));
      for (const auto& sb : out.supers) {
        if (sb.hull.hi < cur - tol) continue;
        if (sb.hull.lo > cur + tol) break;
        cur = std::max(cur, sb.hull.hi);
      }
      if (cur < mem.hi - tol) {
        std::ostringstream os;
        os << "member [" << mem.lo << ", " << mem.hi << "] uncovered beyond " << cur;
        bad.push_back(os.str());
      }
    }
    out.itemPass[0] = bad.empty();
    out.itemNotes[0] = bad.empty() ? "sampled set covered" : joinStrings(bad, "; ");
  }

  {
    std::vector<std::string> bad;
    for (std::size_t si = 0; si < out.supers.size(); ++si) {
      const Superblock& sb = out.supers[si];
      const Block& lead = blocks[static_cast<std::size_t>(sb.leader)];
      if (static_cast<int>(sb.components.size()) > Dbound) {
        std::ostringstream os;
        os << "superblock " << si << ": " << sb.components.size()
           << " components exceed the bound " << Dbound;
        bad.push_back(os.str());
      }
      for (std::size_t c = 0; c + 1 < sb.components.size(); ++c) {
        const double gap = sb.components[c + 1].lo - sb.components[c].hi;
        const double localHi = sb.components[c].hi - lead.s;
        const double need = std::pow(std::max(localHi, 0.0), 1.0 + b);
        if (gap > need * (1.0 + 1e-9) + 1e-12) {
          std::ostringstream os;
          os << "superblock " << si << ": components " << c << " and " << c + 1
             << " are not b-close";
          bad.push_back(os.str());
        }
      }
      for (int k : sb.blockIndices) {
        if (equivClass[static_cast<std::size_t>(k)] !=
            equivClass[static_cast<std::size_t>(sb.leader)])
          continue;
        const Block& blk = blocks[static_cast<std::size_t>(k)];
        bool inside = false;
        for (const auto& comp : sb.components) {
          const double tol = 1e-6 * (1.0 + std::abs(comp.hi));
          if (blk.s >= comp.lo - tol && blk.s_bar <= comp.hi + tol) inside = true;
        }
        if (!inside) {
          std::ostringstream os;
          os << "superblock " << si << ": equivalent block " << k
             << " escapes the recorded components";
          bad.push_back(os.str());
        }
      }
    }
    out.itemPass[1] = bad.empty();
    out.itemNotes[1] = bad.empty() ? "component counts and containments hold"
                                   : joinStrings(bad, "; ");
  }

  {
    std::vector<std::string> bad;
    for (std::size_t p = 0; p < out.supers.size(); ++p) {
      for (std::size_t q = p + 1; q < out.supers.size(); ++q) {
        const int lp = out.supers[p].leader, lq = out.supers[q].leader;
        if (equivClass[static_cast<std::size_t>(lp)] !=
            equivClass[static_cast<std::size_t>(lq)])
          continue;
        const double gap = out.supers[q].hull.lo - out.supers[p].hull.hi;
        const double need =
            std::pow(std::min(out.supers[p].hull.length(), out.supers[q].hull.length()),
                     1.0 + b);
        if (gap < need * (1.0 - 1e-9)) {
          std::ostringstream os;
          os << "equivalent superblocks " << p << " and " << q << ": gap " << gap
             << " below " << need;
          bad.push_back(os.str());
        }
      }
    }
    out.itemPass[2] = bad.empty();
    out.itemNotes[2] = bad.empty() ? "equivalent superblocks are separated"
                                   : joinStrings(bad, "; ");
  }

  {
    std::vector<std::string> bad;
    for (std::size_t p = 0; p < out.supers.size(); ++p) {
      for (std::size_t q = p + 1; q < out.supers.size(); ++q) {
        const double gap = out.supers[q].hull.lo - out.supers[p].hull.hi;
        if (m > 0.0 && gap < m / 5.0 * (1.0 - 1e-9)) {
          std::ostringstream os;
          os << "superblocks " << p << " and " << q << ": gap " << gap << " below m/5";
          bad.push_back(os.str());
        }
      }
    }
    out.itemPass[3] = bad.empty();
    out.itemNotes[3] = bad.empty() ? "all gaps reach m/5" : joinStrings(bad, "; ");
  }

  out.ok = out.note.empty() && out.itemPass[0] && out.itemPass[1] && out.itemPass[2] &&
           out.itemPass[3];
  return out;
}

double corollary_kappa(const Sl2Frame& fr, double kappaTilde) {
  const int D = fr.componentBound();
  double best = 0.0;
  for (const auto& mod : fr.modules) {
    const int k = mod.d;
    const double cand = kappaTilde * norm_equivalence_constant(k) *
                        std::pow(norm_hop_factor(k), D - 1) * std::pow(4.0 / 3.0, k);
    best = std::max(best, cand);
  }
  const double shear = 4.0 * kappaTilde * norm_equivalence_constant(2) *
                       std::pow(norm_hop_factor(2), D - 1) * std::pow(4.0 / 3.0, 2.0);
  return std::max(best, shear);
}

BasicLemmaOutput basic_lemma_pipeline(const QuotientPoint& x, const QuotientPoint& y,
                                      const TauFn& tau, const IntervalCollection& A_set,
                                      const BasicLemmaConfig& cfg) {
  BasicLemmaOutput out;
  const Lattice& lat = *x.lat;
  const Sl2Frame& fr = *lat.frame;
  std::ostringstream mf;
  mf << std::setprecision(12);
  const double lambda = A_set.ambient.hi;
  out.lambda = lambda;
  const double kappa = cfg.kappa > 0.0 ? cfg.kappa : corollary_kappa(fr, cfg.kappaTilde);
  mf << "lattice: " << lat.kind << "\n"
     << "lambda: " << lambda << "\n"
     << "rho: " << cfg.rho << "\n"
     << "eps: " << cfg.eps << "\n"
     << "eta: " << cfg.eta << "\n"
     << "b: " << cfg.b << "\n"
     << "theta: " << cfg.theta << "\n"
     << "m: " << cfg.m << "\n"
     << "kappa: " << kappa << "\n"
     << "kappa_tilde: " << cfg.kappaTilde << "\n";

  auto finish = [&](const std::string& stage, const std::string& note, bool found) {
    out.stage = stage;
    out.note = note;
    out.found = found;
    mf << "stage: " << stage << "\n";
    if (!note.empty()) mf << "note: " << note << "\n";
    mf << "found: " << (found ? "true" : "false") << "\n";
    out.manifest = mf.str();
    std::ostringstream cs;
    cs << std::setprecision(15);
    cs << "kind,index,s,s_bar,t,t_bar,equiv_class,superblock,components\n";
    std::vector<int> sbOf(out.blockStage.blocks.size(), -1);
    for (std::size_t si = 0; si < out.superStage.supers.size(); ++si)
      for (int k : out.superStage.supers[si].blockIndices)
        sbOf[static_cast<std::size_t>(k)] = static_cast<int>(si);
    for (std::size_t j = 0; j < out.blockStage.blocks.size(); ++j) {
      const Block& b = out.blockStage.blocks[j];
      cs << "block," << j << "," << b.s << "," << b.s_bar << "," << b.t << "," << b.t_bar
         << "," << out.blockStage.equivClass[j] << ","
         << (sbOf[j] >= 0 ? std::to_string(sbOf[j]) : std::string()) << ",\n";
    }
    for (std::size_t si = 0; si < out.superStage.supers.size(); ++si) {
      const Superblock& sb = out.superStage.supers[si];
      cs << "superblock," << si << "," << sb.hull.lo << "," << sb.hull.hi << ",,,"
         << out.blockStage.equivClass[static_cast<std::size_t>(sb.leader)] << "," << si
         << "," << sb.components.size() << "\n";
    }
    out.csv = cs.str();
    return out;
  };

  std::string why;
  if (!A_set.valid(&why))
    return finish("hypotheses", "invalid member collection: " + why, false);
  if (std::abs(A_set.ambient.lo) > 1e-9)
    return finish("hypotheses", "range must start at 0", false);
  if (std::abs(A_set.members.front().lo) > 1e-9)
    return finish("hypotheses", "0 must be a sampled point", false);
  if (A_set.members.back().hi < lambda - 1e-9)
    return finish("hypotheses", "the range end must be a sampled point", false);
  if (!(lambda > cfg.m))
    return finish("hypotheses", "the range must exceed m", false);
  if (!(cfg.rho > 0.0) || cfg.rho > cfg.eps / 2.0 * (1.0 + 1e-12))
    return finish("hypotheses", "rho must lie in (0, eps/2]", false);
  if (cfg.eps > 0.1 * (1.0 + 1e-9))
    return finish("hypotheses", "eps must stay at or below the module tolerance 0.1", false);
  {
    const int degree = std::max(fr.maxModuleDegree(), 2);
    const double bMax = cfg.eta / (2.0 * fr.componentBound() * degree);
    mf << "b_max: " << bMax << "\n";
    if (cfg.b > bMax * (1.0 + 1e-12))
      return finish("hypotheses", "b too large for the component bound", false);
  }
  const double density = A_set.density();
  mf << "density: " << density << "\n";
  if (!(density > 1.0 - cfg.theta / 8.0))
    return finish("hypotheses", "density not above 1 - theta/8", false);
  if (std::abs(tau(0.0)) > 1e-9)
    return finish("hypotheses", "tau(0) must vanish", false);

  std::vector<double> rs;
  {
    double total = 0.0;
    for (const auto& mem : A_set.members) total += mem.length();
    for (const auto& mem : A_set.members) {
      const int ni = std::max(
          2, static_cast<int>(std::lround(cfg.hypothesisSamples * mem.length() / total)));
      for (int q = 0; q < ni; ++q)
        rs.push_back(mem.lo + mem.length() * q / (ni - 1));
    }
    std::sort(rs.begin(), rs.end());
  }
  std::vector<double> ts(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) ts[i] = tau(rs[i]);
  for (std::size_t i = 0; i + 1 < rs.size(); ++i) {
    if (rs[i + 1] > rs[i] + 1e-12 && !(ts[i + 1] > ts[i])) {
      std::ostringstream os;
      os << "tau fails to increase near r=" << rs[i];
      return finish("hypotheses", os.str(), false);
    }
  }
  {
    double worst = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const double d = quotient_distance(flow_u(x, rs[i]), flow_u(y, ts[i]));
      worst = std::max(worst, d);
      if (!(d < cfg.rho * (1.0 + 1e-9))) {
        std::ostringstream os;
        os << "pair distance " << d << " reaches rho at r=" << rs[i];
        mf << "max_pair_distance: " << worst << "\n";
        return finish("hypotheses", os.str(), false);
      }
    }
    mf << "max_pair_distance: " << worst << "\n";
  }
  for (std::size_t i = 0; i < rs.size(); ++i) {
    for (std::size_t j = i + 1; j < rs.size(); ++j) {
      const double dr = rs[j] - rs[i];
      const double dt = ts[j] - ts[i];
      if (dr <= cfg.m && dt <= cfg.m) continue;
      if (std::abs(dt - dr) > 4.0 * std::pow(std::max(dr, 0.0), 1.0 - cfg.eta) *
                                  (1.0 + 1e-9) +
                              1e-12) {
        std::ostringstream os;
        os << "delay hypothesis fails between r=" << rs[i] << " and r=" << rs[j];
        return finish("hypotheses", os.str(), false);
      }
    }
  }
  {
    int inconclusive = 0;
    const int nIC = std::max(1, cfg.icSamples);
    for (int k = 0; k < nIC; ++k) {
      const std::size_t idx =
          rs.empty() ? 0
                     : static_cast<std::size_t>(k) * (rs.size() - 1) /
                           static_cast<std::size_t>(std::max(1, nIC - 1));
      const CheckReport ic = check_IC(flow_u(x, rs[idx]), cfg.rho, cfg.m);
      if (ic.verdict == Tri::Fail) {
        std::ostringstream os;
        os << "injectivity fails at r=" << rs[idx] << ": " << ic.note;
        return finish("hypotheses", os.str(), false);
      }
      if (ic.verdict == Tri::Inconclusive) ++inconclusive;
    }
    mf << "ic_checked: " << nIC << "\n";
    if (inconclusive) mf << "ic_inconclusive: " << inconclusive << "\n";
    mf << "fbr: not sampled (separation is re-verified directly)\n";
  }

  out.blockStage = build_blocks(x, y, tau, A_set, cfg.rho, cfg.eps, cfg.eta);
  mf << "blocks: " << out.blockStage.blocks.size() << "\n"
     << "lift_slack_max: " << out.blockStage.liftSlackMax << "\n";
  if (!out.blockStage.ok) return finish("build_blocks", out.blockStage.note, false);

  const InvariantReport ir =
      check_block_invariants(out.blockStage, x, tau, A_set, cfg.rho, cfg.eps, cfg.eta, cfg.m);
  if (!ir.pass) return finish("invariants", joinStrings(ir.violations, "; "), false);

  out.superStage = superblocks(out.blockStage.blocks, out.blockStage.equivClass, fr, A_set,
                               cfg.b, cfg.eps, cfg.eta, cfg.kappaTilde, cfg.m);
  mf << "superblocks: " << out.superStage.supers.size() << "\n";
  if (!out.superStage.ok) {
    std::string note = out.superStage.note;
    if (note.empty()) note = joinStrings(out.superStage.itemNotes, "; ");
    return finish("superblocks", note, false);
  }

  IntervalCollection hulls;
  hulls.ambient = {0.0, lambda};
  for (const auto& sb : out.superStage.supers) hulls.members.push_back(sb.hull);
  out.solovay = solovay_find_block(hulls, cfg.b, cfg.theta);
  mf << "solovay_density: " << out.solovay.density << "\n";
  if (!out.solovay.hypothesesOk) return finish("solovay", out.solovay.note, false);
  if (!out.solovay.giant)
    return finish("solovay", "no hull of three-quarter length", false);

  const Interval J = *out.solovay.giant;
  mf << "winner: [" << J.lo << ", " << J.hi << "]\n";
  int win = -1;
  for (std::size_t si = 0; si < out.superStage.supers.size(); ++si) {
    const Interval& h = out.superStage.supers[si].hull;
    if (std::abs(h.lo - J.lo) <= 1e-9 * (1.0 + std::abs(J.lo)) &&
        std::abs(h.hi - J.hi) <= 1e-9 * (1.0 + std::abs(J.hi)))
      win = static_cast<int>(si);
  }
  if (win < 0)
    return finish("extract", "winning interval does not match a superblock", false);
  const Block& lead =
      out.blockStage.blocks[static_cast<std::size_t>(out.superStage.supers
                                                         [static_cast<std::size_t>(win)]
                                                             .leader)];
  out.s_bar = lead.s;
  out.g = lead.offset;

  auto addBound = [&](const std::string& name, double obs, double allow) {
    BoundCheck bc;
    bc.name = name;
    bc.observed = obs;
    bc.allowed = allow;
    bc.pass = obs <= allow * (1.0 + 1e-9) + 1e-15;
    mf << "bound " << name << ": observed=" << obs << " allowed=" << allow
       << (bc.pass ? " pass" : " fail") << "\n";
    out.bounds.push_back(bc);
  };
  addBound("u", std::abs(out.g.u), cfg.eps);
  addBound("a", std::abs(out.g.a), kappa * std::pow(lambda, -cfg.eta / 2.0));
  addBound("ubar", std::abs(out.g.ubar), kappa * std::pow(lambda, -1.0 - cfg.eta / 2.0));
  for (std::size_t i = 0; i < out.g.c.size(); ++i) {
    for (std::size_t j = 0; j < out.g.c[i].size(); ++j) {
      std::ostringstream nm;
      nm << "c[" << i << "][" << j << "]";
      addBound(nm.str(), std::abs(out.g.c[i][j]),
               kappa * cfg.eps * std::pow(lambda, -static_cast<double>(j) + cfg.eta / 2.0));
    }
  }
  out.boundsPass = true;
  for (const auto& bc : out.bounds) out.boundsPass = out.boundsPass && bc.pass;
  if (!out.boundsPass) return finish("extract", "parameter bounds fail", false);

  const QuotientPoint lhs = rmul(flow_u(x, out.s_bar), assemble(fr, out.g));
  const QuotientPoint rhs = flow_u(y, tau(out.s_bar));
  out.reconstructionError = quotient_distance(lhs, rhs);
  mf << "reconstruction_error: " << out.reconstructionError << "\n";
  if (!(out.reconstructionError <= cfg.reconstructTol))
    return finish("reconstruct", "reconstruction exceeds tolerance", false);
  return finish("done", "", true);
}

PushReport push_a_distance(const GroupElement& x_lift, const GroupElement& y_lift,
                           const Sl2Frame& frame, double L, double r, double eta,
                           double kappa) {
  PushReport rep;
  if (!(L > 1.0) || !(r > 0.0 && r < 1.0) || !(eta > 0.0 && eta < 1.0) ||
      !(kappa > 0.0)) {
    rep.note = "parameters out of range";
    return rep;
  }
  const GroupElement X = x_lift.inverse() * y_lift;
  TrackParams p;
  try {
    p = decompose_near_identity(X, frame, 10.0);
  } catch (const OutsideChartError&) {
    rep.note = "offset outside the chart";
    return rep;
  }
  const double eps = 0.1;
  const double tf = 1.0 + 1e-9;
  std::vector<std::string> bad;
  if (std::abs(p.u) > eps * tf) bad.push_back("u");
  if (std::abs(p.a) > kappa * std::pow(L, -eta / 2.0) * tf) bad.push_back("a");
  if (std::abs(p.ubar) > kappa * std::pow(L, -1.0 - eta / 2.0) * tf) bad.push_back("ubar");
  for (std::size_t i = 0; i < p.c.size(); ++i)
    for (std::size_t j = 0; j < p.c[i].size(); ++j)
      if (std::abs(p.c[i][j]) >
          kappa * eps * std::pow(L, -static_cast<double>(j) + eta / 2.0) * tf) {
        std::ostringstream os;
        os << "c[" << i << "][" << j << "]";
        bad.push_back(os.str());
      }
  if (!bad.empty()) {
    rep.note =
        "offset parameters exceed the extracted-offset bounds: " + joinStrings(bad, ", ");
    return rep;
  }
  rep.hypothesesOk = true;
  rep.T = (1.0 + r) * std::log(L);
  const GroupElement pushed = expm(frame.A * (-rep.T)) * X * expm(frame.A * rep.T);
  rep.allowed =
      3.0 * kappa * (std::pow(L, -0.5 + (r + eta) / 2.0) + std::pow(L, -eta / 2.0 + r));
  rep.measured = group_distance(pushed, frame, std::max(10.0, 2.0 * rep.allowed));
  rep.pass = rep.measured <= rep.allowed * (1.0 + 1e-9);
  rep.slack = rep.allowed - rep.measured;
  return rep;
}

QuotientPoint renormalized_conjugacy(const ConjugacyMap& psi, const QuotientPoint& p,
                                     double t) {
  return flow_a(psi(flow_a(p, -t)), t);
}

}  // namespace horolab
