#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "horolab/polybound.hpp"
#include "horolab/quotient.hpp"
#include "horolab/tracking.hpp"

namespace horolab {

// Monotone time pairing between the two orbits; must satisfy tau(0) = 0.
using TauFn = std::function<double(double)>;

// One maximal shadowing window [s, s_bar]: on the sampled points of the window
// the lift pair stays within rho, and the length never exceeds the tracking
// window of the left-end offset.
struct Block {
  double s = 0, s_bar = 0;
  double t = 0, t_bar = 0;      // tau images of the endpoints
  GroupElement x_lift, y_lift;  // lifts at the left endpoint
  LatticeElement deck;          // y_lift = deck * (y_base * u^t)
  TrackParams offset;           // chart parameters of x_lift^{-1} y_lift
  double offset_dist = 0;       // chart distance at the left endpoint
  double window = 0;            // tracking window of the offset
  char end_reason = '?';        // 'w' window cap, 'r' rho crossing, 'A' end of members
};

struct BuildBlocksResult {
  bool ok = false;
  std::string note;
  std::vector<Block> blocks;
  std::vector<int> equivClass;  // index of the first block sharing the deck
  double liftSlackMax = 0;      // max over blocks of (offset_dist - rho), clamped at 0
};

// Maximal disjoint shadowing blocks along the pair (x u^r, y u^{tau(r)}), r in
// the member intervals of A_set. Left endpoints are sampled points; suprema are
// located by a right-to-left scan of the members with bisection refined to 1e-6.
// The x lifts advance by exact group multiplication; each y lift is the unique
// lattice translate within rho (two translates within rho throw, naming r).
BuildBlocksResult build_blocks(const QuotientPoint& x, const QuotientPoint& y,
                               const TauFn& tau, const IntervalCollection& A_set,
                               double rho, double eps, double eta);

// True iff y_lift of b2 continues the u orbit of b1's y lift: the chart
// distance between b1.y_lift * u^{t2 - t1} and b2.y_lift is at most tol.
bool block_equiv(const Block& b1, const Block& b2, const Sl2Frame& frame,
                 double tol = 1e-6);

struct InvariantReport {
  bool pass = false;
  std::vector<std::string> violations;
};

// Re-derives the structural guarantees of a block run: members covered, chain
// consistency of the x lifts, left endpoints within rho, lengths within the
// tracking window, agreement of deck equality with the chart equivalence,
// spacing of equivalent pairs, and the delay bound of inequivalent pairs.
InvariantReport check_block_invariants(const BuildBlocksResult& run,
                                       const QuotientPoint& x, const TauFn& tau,
                                       const IntervalCollection& A_set, double rho,
                                       double eps, double eta, double m);

struct Superblock {
  Interval hull{0, 0};
  int leader = 0;                     // index of the leading block
  std::vector<int> blockIndices;      // all blocks absorbed into the hull
  std::vector<int> componentIndices;  // prefix of sub-level components used
  std::vector<Interval> components;   // those components, in absolute time
};

struct SuperblockResult {
  bool ok = false;
  std::string note;
  std::vector<Superblock> supers;
  std::array<bool, 4> itemPass{false, false, false, false};
  std::vector<std::string> itemNotes;
};

// Merges equivalent blocks along b-close prefixes of the leader's relaxed
// sub-level components: for each leader, locate its equivalent followers in
// the components, extend through the last b-close component containing one,
// hull through the last block it contains, and restart after it. The four
// output guarantees (members covered, at most componentBound() b-close
// components per hull, b-separation of equivalent hulls, pairwise gaps of at
// least m/5) are re-verified independently after construction.
SuperblockResult superblocks(const std::vector<Block>& blocks,
                             const std::vector<int>& equivClass,
                             const Sl2Frame& frame, const IntervalCollection& A_set,
                             double b, double eps, double eta, double kappaTilde,
                             double m);

// Bound constant for the extracted-offset conclusion, assembled from the
// coefficient norm constants, the hop factors, the sub-level relaxation, and
// the 3/4 winner-length ratio.
double corollary_kappa(const Sl2Frame& frame, double kappaTilde);

struct BasicLemmaConfig {
  double rho = 0.05;
  double eps = 0.1;
  double eta = 0.2;
  double b = 0.02;
  double theta = 0.12;
  double m = 2.0;
  double kappa = 0;        // 0: computed from the frame via corollary_kappa
  double kappaTilde = 16.0;
  int hypothesisSamples = 160;  // grid size for the sampled hypotheses
  int icSamples = 4;            // injectivity-condition samples (0 disables)
  double reconstructTol = 1e-6;
};

struct BoundCheck {
  std::string name;
  double observed = 0;
  double allowed = 0;
  bool pass = false;
};

struct BasicLemmaOutput {
  bool found = false;
  std::string stage;  // last stage reached; "done" on success
  std::string note;
  double lambda = 0;
  double s_bar = 0;  // left end of the winning hull, a sampled point
  TrackParams g;     // offset parameters extracted there
  std::vector<BoundCheck> bounds;
  bool boundsPass = false;
  double reconstructionError = 0;
  BuildBlocksResult blockStage;
  SuperblockResult superStage;
  SolovayReport solovay;
  std::string manifest;  // constants, hypothesis checks, stage outcomes
  std::string csv;       // one row per block and per superblock
};

// Gate the sampled hypotheses, build blocks, merge superblocks, find a hull of
// length at least three quarters of the range, extract the offset at its left
// end, check the four parameter bounds, and re-verify the reconstruction
// downstairs. Failures return found=false labeled with the stage.
BasicLemmaOutput basic_lemma_pipeline(const QuotientPoint& x, const QuotientPoint& y,
                                      const TauFn& tau, const IntervalCollection& A_set,
                                      const BasicLemmaConfig& cfg);

struct PushReport {
  bool hypothesesOk = false;
  std::string note;
  double T = 0;
  double measured = 0;
  double allowed = 0;
  double slack = 0;
  bool pass = false;
};

// Distance growth under the diagonal push a^{(1+r) log L} for an offset whose
// chart parameters satisfy the extracted-offset bounds at scale L (the u and
// module coefficients are gauged against the fixed module tolerance 0.1):
// measured distance against 3*kappa*(L^{-1/2+(r+eta)/2} + L^{-eta/2+r}).
PushReport push_a_distance(const GroupElement& x_lift, const GroupElement& y_lift,
                           const Sl2Frame& frame, double L, double r, double eta,
                           double kappa);

using ConjugacyMap = std::function<QuotientPoint(const QuotientPoint&)>;

// Renormalized graph map psi_t(x) = psi(x a^{-t}) a^t.
QuotientPoint renormalized_conjugacy(const ConjugacyMap& psi, const QuotientPoint& p,
                                     double t);

}  // namespace horolab
