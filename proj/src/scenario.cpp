#include "horolab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "horolab/blocks.hpp"
#include "horolab/rigidity.hpp"
#include "horolab/rng.hpp"
#include "json.hpp"

namespace horolab {
namespace {

using nlohmann::json;

const std::vector<ScenarioInfo>& catalog() {
  static const std::vector<ScenarioInfo> entries = {
      {"basic-lemma",
       "gates sampled hypotheses, builds shadowing blocks, merges superblocks, selects a "
       "three-quarter hull, extracts the offset at its left end, and checks the four "
       "parameter bounds"},
      {"cohomology",
       "checks the transfer identity relating the two orbit integrals through a "
       "normaliser element against the transported offset integral"},
      {"deviation",
       "estimates the growth exponent of centred orbit integrals of the lattice-sum "
       "observable against the unipotent time"},
      {"polybound-suite",
       "tabulates the coefficient norm constants and verifies coefficient bounds for "
       "polynomials bounded on separated interval collections"},
      {"psi-t",
       "renormalizes a conjugacy along the diagonal flow and measures convergence to "
       "its commuting limit"},
      {"solovay",
       "estimates the density threshold below which a separated interval collection "
       "must contain a three-quarter member, and demonstrates the selection"},
      {"tracking-suite",
       "traces the sheared relative motion of nearby unipotent orbits, its "
       "closest-return time, and the sub-level windows where tracking persists"},
      {"transport",
       "solves for the constant group element and scalar offsets carrying a conjugacy "
       "across a normaliser element, and checks the offset cocycle relation"},
      {"triple-check",
       "verifies the bracket table, chart round trip, and diagonal renormalization "
       "identity of the selected frame"},
  };
  return entries;
}

bool knownScenario(const std::string& name) {
  for (const auto& e : catalog())
    if (e.name == name) return true;
  return false;
}

double knob(const ExperimentConfig& cfg, const std::string& name, double fallback) {
  const auto it = cfg.knobs.find(name);
  return it == cfg.knobs.end() ? fallback : it->second;
}

json finiteOr(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? json("inf") : json("-inf");
}

json configJson(const ExperimentConfig& cfg) {
  json j;
  j["scenario"] = cfg.scenario;
  j["frame"] = cfg.frame;
  j["lattice"] = cfg.lattice;
  j["time_change"] = cfg.timeChange;
  j["conjugacy"] = cfg.conjugacy;
  j["constants"] = {{"eps", cfg.eps},         {"rho", cfg.rho},
                    {"eta", cfg.eta},         {"b", cfg.b},
                    {"theta", cfg.theta},     {"m0", cfg.m0},
                    {"kappa_tilde", cfg.kappaTilde}, {"omega", cfg.omega},
                    {"tolerance", cfg.tolerance}};
  j["seed"] = cfg.seed;
  j["out"] = cfg.outDir;
  j["knobs"] = cfg.knobs;
  return j;
}

json ledgerJson(const ExperimentConfig& cfg, double Ctau) {
  json j;
  j["eta"] = cfg.eta;
  j["b"] = cfg.b;
  j["c_b"] = (1.0 + cfg.eta - cfg.b) / (1.0 + cfg.eta);
  j["theta"] = cfg.theta;
  j["omega"] = cfg.omega;
  j["m0"] = cfg.m0;
  j["rho"] = cfg.rho;
  j["C_tau"] = Ctau;
  j["m"] = 2.0 * std::pow(Ctau, 4.0) * cfg.m0;
  j["units"] = "unipotent flow time; other constants dimensionless";
  return j;
}

GroupElement uElem(const Sl2Frame& fr, double t) {
  GroupElement g = GroupElement::identity(fr.dims);
  for (std::size_t k = 0; k < g.f.size(); ++k) g.f[k] += t * fr.U.f[k];
  return g;
}

GroupElement bulkElement(Rng& rng, const Sl2Frame& fr) {
  GroupElement g;
  g.f.reserve(fr.dims.size());
  for (std::size_t k = 0; k < fr.dims.size(); ++k) {
    const double x = rng.uniform(-0.5, 0.5);
    const double y = 1.0 / (1.0 / 0.9 - rng.uniform() * (1.0 / 0.9 - 1.0 / 2.5));
    const double th = rng.uniform(0.0, 6.283185307179586);
    const double sy = std::sqrt(y);
    Eigen::MatrixXd m(2, 2);
    m << sy * std::cos(th) - x * std::sin(th) / sy,
        sy * std::sin(th) + x * std::cos(th) / sy, -std::sin(th) / sy,
        std::cos(th) / sy;
    g.f.push_back(m);
  }
  return g;
}

struct ScenarioOutput {
  bool pass = true;
  std::string note;
  json results;
  std::vector<std::pair<std::string, std::string>> artifacts;
};

ScenarioOutput runTripleCheck(const ExperimentConfig& cfg) {
  ScenarioOutput out;
  const Sl2Frame& fr = catalogFrame(cfg.frame);
  std::ostringstream csv;
  csv.precision(15);
  csv << "check,residual\n";

  const double bAU = (fr.A.bracket(fr.U) - fr.U).frob();
  const double bAUbar = (fr.A.bracket(fr.Ubar) + fr.Ubar).frob();
  const double bUUbar = (fr.U.bracket(fr.Ubar) - fr.A * 2.0).frob();
  csv << "bracket_AU," << bAU << "\nbracket_AUbar," << bAUbar << "\nbracket_UUbar,"
      << bUUbar << "\n";

  Rng rng(cfg.seed);
  double roundTrip = 0;
  for (int trial = 0; trial < 5; ++trial) {
    TrackParams p;
    p.a = rng.uniform(-0.1, 0.1);
    p.ubar = rng.uniform(-0.1, 0.1);
    p.u = rng.uniform(-0.1, 0.1);
    for (const auto& mod : fr.modules) {
      std::vector<double> row(static_cast<std::size_t>(mod.d) + 1);
      for (auto& c : row) c = rng.uniform(-0.05, 0.05);
      p.c.push_back(row);
    }
    const TrackParams back = decompose_near_identity(assemble(fr, p), fr, 0.5);
    roundTrip = std::max({roundTrip, std::abs(p.a - back.a),
                          std::abs(p.ubar - back.ubar), std::abs(p.u - back.u)});
    for (std::size_t i = 0; i < p.c.size(); ++i)
      for (std::size_t jj = 0; jj < p.c[i].size(); ++jj)
        roundTrip = std::max(roundTrip, std::abs(p.c[i][jj] - back.c[i][jj]));
  }
  csv << "chart_round_trip," << roundTrip << "\n";

  double renorm = 0;
  for (const auto& [s, t] : std::vector<std::pair<double, double>>{
           {0.7, 0.4}, {-0.3, 1.1}, {1.3, -0.8}}) {
    const GroupElement lhs = expm(fr.A * (-t)) * expm(fr.U * s) * expm(fr.A * t);
    renorm = std::max(renorm, lhs.frobDist(expm(fr.U * (s * std::exp(-t)))));
  }
  csv << "diagonal_renormalization," << renorm << "\n";

  const double worst = std::max({bAU, bAUbar, bUUbar, roundTrip, renorm});
  out.results["bracket_residual"] = std::max({bAU, bAUbar, bUUbar});
  out.results["chart_round_trip"] = roundTrip;
  out.results["diagonal_renormalization"] = renorm;
  out.results["component_bound"] = fr.componentBound();
  out.results["param_count"] = fr.paramCount();
  out.pass = worst <= cfg.tolerance;
  if (!out.pass) out.note = "frame identity residual exceeds tolerance";
  out.artifacts.push_back({"triple-check.csv", csv.str()});
  return out;
}

ScenarioOutput runDeviation(const ExperimentConfig& cfg) {
  ScenarioOutput out;
  const Lattice& lat = Lattice::byName(cfg.lattice);
  const LatticeSumObservable f(
      BumpProfile{knob(cfg, "amplitude", 0.02), knob(cfg, "center", 1.0),
                  knob(cfg, "width", 0.15)},
      0.0);
  Rng rng(cfg.seed);
  const double tmin = knob(cfg, "t_min", 1e2), tmax = knob(cfg, "t_max", 1e4);
  const int bases = static_cast<int>(knob(cfg, "bases", 4));
  const int grid = static_cast<int>(knob(cfg, "grid", 10));
  const DeviationReport rep = deviation_exponent(f, lat, rng, tmin, tmax, bases, grid);

  std::ostringstream csv;
  csv.precision(15);
  csv << "T,mean_abs\n";
  for (std::size_t i = 0; i < rep.times.size(); ++i)
    csv << rep.times[i] << "," << rep.meanAbs[i] << "\n";
  out.artifacts.push_back({"deviation.csv", csv.str()});

  const double slopeMax = knob(cfg, "slope_max", 0.95);
  out.results["slope"] = rep.slope;
  out.results["slope_max"] = slopeMax;
  out.results["t_min"] = tmin;
  out.results["t_max"] = tmax;
  out.pass = rep.slope <= slopeMax;
  if (!out.pass) out.note = "deviation exponent exceeds the sublinear threshold";
  return out;
}

ScenarioOutput runTrackingSuite(const ExperimentConfig& cfg) {
  ScenarioOutput out;
  const Sl2Frame& fr = catalogFrame(cfg.frame);
  TrackParams g;
  g.a = knob(cfg, "a", -0.002);
  g.ubar = knob(cfg, "ubar", 1e-4);
  g.u = knob(cfg, "u", 0.003);
  for (const auto& mod : fr.modules)
    g.c.push_back(std::vector<double>(static_cast<std::size_t>(mod.d) + 1, 0.0));

  const double limit = track_domain_limit(g);
  const double L = std::isfinite(limit) ? std::min(knob(cfg, "L", 0.8 * limit), 0.9 * limit)
                                        : knob(cfg, "L", 900.0);
  const auto polys = r_m_polys(g);
  std::ostringstream csv;
  csv.precision(15);
  csv << "s,q,a_s,ub_s,r_s,poly_max\n";
  double delayResidual = 0;
  const int rows = 240;
  for (int i = 0; i <= rows; ++i) {
    const double s = L * i / rows;
    const double q = track_q(g, s);
    double a_s = 0, ub_s = 0;
    track_s_part(g, s, a_s, ub_s);
    const double rs = r_s_value(g, s);
    csv << s << "," << q << "," << a_s << "," << ub_s << "," << rs << ","
        << poly_eval_max(polys, s) << "\n";
    const double lhs = (q - s + g.u) * (std::exp(g.a) - g.ubar * s);
    delayResidual = std::max(delayResidual, std::abs(lhs - rs) / std::max(1.0, std::abs(rs)));
  }
  out.artifacts.push_back({"tracking-suite.csv", csv.str()});

  const TrackingWindow win = l_eps_window(g, cfg.eps, cfg.eta);
  const auto comps = sublevel_components(g, cfg.eps, cfg.eta, cfg.kappaTilde, L);
  bool sorted = true;
  for (std::size_t i = 0; i + 1 < comps.size(); ++i)
    if (comps[i].hi > comps[i + 1].lo) sorted = false;
  json jc = json::array();
  for (const auto& c : comps) jc.push_back({{"lo", c.lo}, {"hi", c.hi}});

  out.results["L"] = L;
  out.results["domain_limit"] = finiteOr(limit);
  out.results["delay_residual"] = delayResidual;
  out.results["window_l_m"] = finiteOr(win.l_m);
  out.results["window_l_s"] = finiteOr(win.l_s);
  out.results["window_l"] = finiteOr(win.l);
  out.results["sublevel_components"] = jc;
  out.pass = delayResidual <= cfg.tolerance && sorted;
  if (!out.pass) out.note = "closest-return delay relation violated on the grid";
  return out;
}

ScenarioOutput runPolyboundSuite(const ExperimentConfig& cfg) {
  ScenarioOutput out;
  std::ostringstream csv;
  csv.precision(15);
  csv << "degree,norm_constant,hop_factor\n";
  for (int k = 0; k <= 3; ++k)
    csv << k << "," << norm_equivalence_constant(k) << "," << norm_hop_factor(k) << "\n";

  Rng rng(cfg.seed);
  const int trials = static_cast<int>(knob(cfg, "trials", 30));
  int pass = 0, hypotheses = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const int k = rng.rangeInt(1, 3);
    const double s1 = rng.uniform(1.5, 2.5);
    const double gap = rng.uniform(0.3, 0.9) * std::pow(s1, 1.0 + cfg.b);
    const double len2 = rng.uniform(2.0, 5.0);
    IntervalCollection coll;
    coll.members = {{0.0, s1}, {s1 + gap, s1 + gap + len2}};
    coll.ambient = {0.0, s1 + gap + len2};

    std::vector<std::vector<double>> coeffs(static_cast<std::size_t>(k) + 1);
    for (auto& c : coeffs) c = {rng.uniform(-1.0, 1.0)};
    double worst = 0;
    for (const auto& member : coll.members)
      for (int i = 0; i <= 400; ++i) {
        const double s = member.lo + (member.hi - member.lo) * i / 400.0;
        double val = 0, pw = 1;
        for (const auto& c : coeffs) {
          val += c[0] * pw;
          pw *= s;
        }
        worst = std::max(worst, std::abs(val) /
                                    std::max(cfg.eps, std::pow(s, 1.0 - cfg.eta)));
      }
    if (worst > 0)
      for (auto& c : coeffs) c[0] /= 1.02 * worst;

    const CoeffBoundReport rep =
        check_coeff_bounds(coeffs, coll, 1.0, cfg.eps, cfg.eta, cfg.b);
    if (rep.hypothesesOk) {
      ++hypotheses;
      if (rep.allPass) ++pass;
    }
  }

  out.results["trials"] = trials;
  out.results["hypotheses_ok"] = hypotheses;
  out.results["bounds_pass"] = pass;
  const double thetaEstimate =
      solovay_estimate_theta(cfg.b, static_cast<int>(knob(cfg, "theta_trials", 60)),
                             cfg.seed);
  out.results["theta_estimate"] = thetaEstimate;
  out.pass = hypotheses == trials && pass == hypotheses && thetaEstimate > 0;
  if (!out.pass) out.note = "a coefficient bound or hypothesis check failed";
  out.artifacts.push_back({"polybound-suite.csv", csv.str()});
  return out;
}

ScenarioOutput runSolovay(const ExperimentConfig& cfg) {
  ScenarioOutput out;
  const int trials = static_cast<int>(knob(cfg, "trials", 200));
  const double estimate = solovay_estimate_theta(cfg.b, trials, cfg.seed);

  IntervalCollection demo{{0.0, 100.0}, {{1.0, 96.0}}};
  const SolovayReport rep = solovay_find_block(demo, cfg.b, cfg.theta);

  std::ostringstream csv;
  csv.precision(15);
  csv << "member,lo,hi\n";
  for (std::size_t i = 0; i < demo.members.size(); ++i)
    csv << i << "," << demo.members[i].lo << "," << demo.members[i].hi << "\n";
  out.artifacts.push_back({"solovay.csv", csv.str()});

  out.results["theta_estimate"] = estimate;
  out.results["trials"] = trials;
  out.results["demo_density"] = rep.density;
  out.results["demo_found"] = rep.giant.has_value();
  if (rep.giant) {
    out.results["demo_giant"] = {{"lo", rep.giant->lo}, {"hi", rep.giant->hi}};
    const double ratio = rep.giant->length() / demo.ambient.length();
    out.results["demo_ratio"] = ratio;
    out.pass = rep.hypothesesOk && ratio >= 0.75 && estimate > 0;
  } else {
    out.pass = false;
  }
  if (!out.pass) out.note = "giant member selection failed on the demonstration";
  return out;
}

ScenarioOutput runBasicLemma(const ExperimentConfig& cfg) {
  ScenarioOutput out;
  const Lattice& lat = Lattice::byName(cfg.lattice);
  const Sl2Frame& fr = *lat.frame;
  const ConjugacyTestbed tb = make_coboundary_testbed();

  GroupElement base;
  Eigen::MatrixXd m(2, 2);
  m << 1.3, 0.45, 0.7, (1.0 + 0.45 * 0.7) / 1.3;
  base.f.assign(fr.dims.size(), Eigen::MatrixXd::Identity(2, 2));
  base.f[0] = m;
  const QuotientPoint x = makePoint(base, lat);
  const QuotientPoint y = rmul(x, uElem(fr, knob(cfg, "offset_u", 0.003)));

  TauFn tau;
  std::shared_ptr<TransferCocycle> tc;
  if (cfg.timeChange == "coboundary") {
    tc = std::make_shared<TransferCocycle>(tb.alpha1, tb.alpha1, x, y);
    tau = [tc](double r) { return tc->z(r); };
  } else {
    tau = [](double r) { return r; };
  }

  IntervalCollection A;
  A.ambient = {0.0, knob(cfg, "range", 160.0)};
  A.members = {A.ambient};

  BasicLemmaConfig blc;
  blc.rho = cfg.rho;
  blc.eps = cfg.eps;
  blc.eta = cfg.eta;
  blc.b = cfg.b;
  blc.theta = cfg.theta;
  blc.kappaTilde = cfg.kappaTilde;
  blc.m = knob(cfg, "m", 2.0);
  blc.hypothesisSamples = static_cast<int>(knob(cfg, "hypothesis_samples", 80));
  blc.icSamples = static_cast<int>(knob(cfg, "ic_samples", 2));

  const BasicLemmaOutput rep = basic_lemma_pipeline(x, y, tau, A, blc);
  out.results["found"] = rep.found;
  out.results["stage"] = rep.stage;
  out.results["lambda"] = rep.lambda;
  out.results["s_bar"] = rep.s_bar;
  out.results["bounds_pass"] = rep.boundsPass;
  out.results["reconstruction_error"] = rep.reconstructionError;
  json jb = json::array();
  for (const auto& bc : rep.bounds)
    jb.push_back({{"name", bc.name},
                  {"observed", bc.observed},
                  {"allowed", bc.allowed},
                  {"pass", bc.pass}});
  out.results["bounds"] = jb;
  out.results["pipeline_manifest"] = rep.manifest;
  out.artifacts.push_back({"basic-lemma.csv", rep.csv});
  out.pass = rep.found;
  out.note = rep.found ? "" : "pipeline stalled at stage " + rep.stage;
  return out;
}

struct ConjugacySetup {
  TimeChange a1, a2;
  ConjugacyMap psi;
  double Ctau = 1;
};

ConjugacySetup makeSetup(const ExperimentConfig& cfg, const ConjugacyTestbed& tb) {
  ConjugacySetup s;
  if (cfg.timeChange == "coboundary") {
    s.a1 = tb.alpha1;
    s.a2 = tb.alpha2;
  } else {
    s.a1 = unit_time_change();
    s.a2 = unit_time_change();
  }
  if (cfg.conjugacy == "coboundary") {
    s.psi = [&tb](const QuotientPoint& p) { return tb.psi(p); };
  } else {
    s.psi = [](const QuotientPoint& p) { return p; };
  }
  s.Ctau = std::max({1.0, s.a1.upper, 1.0 / s.a1.lower, s.a2.upper, 1.0 / s.a2.lower});
  return s;
}

json transportJson(const TransportResult& tr) {
  json j;
  j["ok"] = tr.ok;
  j["c"] = tr.c;
  j["coset_spread"] = tr.cosetSpread;
  j["normaliser_residual"] = tr.normaliserResidual;
  j["cocycle_residual"] = tr.cocycleResidual;
  double betaMax = 0;
  for (double b : tr.beta) betaMax = std::max(betaMax, std::abs(b));
  j["beta_max"] = betaMax;
  if (!tr.Phi.f.empty()) {
    const Eigen::MatrixXd& u = tr.Phi.f[0];
    j["phi_u_factor"] = {u(0, 0), u(0, 1), u(1, 0), u(1, 1)};
  }
  if (!tr.note.empty()) j["note"] = tr.note;
  return j;
}

ScenarioOutput runTransport(const ExperimentConfig& cfg) {
  ScenarioOutput out;
  const Lattice& lat = Lattice::byName(cfg.lattice);
  const Sl2Frame& fr = *lat.frame;
  const ConjugacyTestbed tb = make_coboundary_testbed();
  const ConjugacySetup s = makeSetup(cfg, tb);

  const GroupElement g1 =
      expm(fr.A * knob(cfg, "g1_a", 0.01)) * uElem(fr, knob(cfg, "g1_u", 0.0));
  Rng rng(cfg.seed);
  std::vector<QuotientPoint> samples;
  const int n = static_cast<int>(knob(cfg, "samples", 5));
  for (int i = 0; i < n; ++i) samples.push_back(makePoint(bulkElement(rng, fr), lat));

  const TransportResult tr = normaliser_transport(s.a1, s.a2, s.psi, g1, samples);
  out.results = transportJson(tr);
  out.artifacts.push_back({"transport.csv", tr.csv});
  out.pass = tr.ok;
  out.note = tr.note;
  return out;
}

ScenarioOutput runCohomology(const ExperimentConfig& cfg) {
  ScenarioOutput out;
  const Lattice& lat = Lattice::byName(cfg.lattice);
  const Sl2Frame& fr = *lat.frame;
  const ConjugacyTestbed tb = make_coboundary_testbed();
  const ConjugacySetup s = makeSetup(cfg, tb);

  const GroupElement g1 =
      expm(fr.A * knob(cfg, "g1_a", 0.01)) * uElem(fr, knob(cfg, "g1_u", 0.0));
  Rng rng(cfg.seed);
  std::vector<QuotientPoint> samples;
  const int n = static_cast<int>(knob(cfg, "samples", 5));
  for (int i = 0; i < n; ++i) samples.push_back(makePoint(bulkElement(rng, fr), lat));

  const TransportResult tr = normaliser_transport(s.a1, s.a2, s.psi, g1, samples);
  out.results["transport"] = transportJson(tr);
  out.artifacts.push_back({"transport.csv", tr.csv});
  if (!tr.ok) {
    out.pass = false;
    out.note = tr.note;
    return out;
  }

  std::vector<double> grid;
  const int points = static_cast<int>(knob(cfg, "grid", 20));
  const double tmax = knob(cfg, "t_max", 100.0);
  for (int i = 1; i <= points; ++i) grid.push_back(tmax * i / points);
  const CohomologyReport rep =
      cohomology_residual(s.a1, s.a2, s.psi, tr, g1, samples[0], grid);
  out.results["max_residual"] = rep.maxResidual;
  out.results["grid_points"] = points;
  out.results["t_max"] = tmax;
  out.artifacts.push_back({"cohomology.csv", rep.csv});
  const double tol = knob(cfg, "residual_tol", 1e-5);
  out.results["residual_tol"] = tol;
  out.pass = rep.ok && rep.maxResidual <= tol;
  out.note = rep.ok ? (out.pass ? "" : "transfer identity residual exceeds tolerance")
                    : rep.note;
  return out;
}

ScenarioOutput runPsiT(const ExperimentConfig& cfg) {
  ScenarioOutput out;
  const Lattice& lat = Lattice::byName(cfg.lattice);
  const Sl2Frame& fr = *lat.frame;
  const ConjugacyTestbed tb = make_coboundary_testbed();
  const ConjugacySetup s = makeSetup(cfg, tb);
  const ConjugacyMap zeta = [](const QuotientPoint& p) { return p; };

  Rng rng(cfg.seed);
  std::vector<QuotientPoint> samples;
  const int n = static_cast<int>(knob(cfg, "samples", 6));
  for (int i = 0; i < n; ++i) samples.push_back(makePoint(bulkElement(rng, fr), lat));
  std::vector<double> grid;
  const double tmax = knob(cfg, "t_max", 12.0), step = knob(cfg, "t_step", 1.0);
  for (double t = 0; t <= tmax + 1e-9; t += step) grid.push_back(t);

  const PsiTReport rep = psi_t_convergence(s.psi, zeta, samples, grid);
  const double envelope = knob(cfg, "envelope", 0.01);
  bool decay = true;
  for (std::size_t i = 0; i < rep.dist.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j)
      if (rep.dist[i][j] > envelope * std::exp(-grid[j]) * (1 + 1e-3) + 1e-12)
        decay = false;

  out.results["fitted_rate"] = rep.fittedRate;
  out.results["monotone_trend"] = rep.monotoneTrend;
  out.results["max_distance"] = rep.maxDistance;
  out.results["equivariance_residual"] = rep.equivarianceResidual;
  out.results["envelope"] = envelope;
  out.results["envelope_pass"] = decay;
  out.artifacts.push_back({"psi-t.csv", rep.csv});
  out.pass = rep.ok && decay && rep.equivarianceResidual <= 1e-6;
  if (!out.pass) out.note = "renormalized conjugacy failed the decay envelope";
  return out;
}

bool needsLattice(const std::string& scenario) {
  return scenario == "basic-lemma" || scenario == "cohomology" ||
         scenario == "deviation" || scenario == "psi-t" || scenario == "transport";
}

}  // namespace

std::vector<ScenarioInfo> list_scenarios() { return catalog(); }

ValidationReport validate_config(const ExperimentConfig& cfg) {
  ValidationReport rep;
  auto err = [&rep](const std::string& m) { rep.errors.push_back(m); };

  if (!knownScenario(cfg.scenario)) err("scenario: unknown name '" + cfg.scenario + "'");
  const Sl2Frame* fr = nullptr;
  try {
    fr = &catalogFrame(cfg.frame);
  } catch (const std::exception&) {
    err("frame: unknown name '" + cfg.frame + "'");
  }
  bool latticeOk = false;
  try {
    (void)Lattice::byName(cfg.lattice);
    latticeOk = true;
  } catch (const std::exception&) {
    err("lattice: unknown name '" + cfg.lattice + "'");
  }
  if (latticeOk && fr && needsLattice(cfg.scenario)) {
    const std::string want = cfg.lattice == "sl2z" ? "sl2" : "sl2_x_sl2";
    if (cfg.frame != want)
      err("lattice: '" + cfg.lattice + "' quotients the frame '" + want + "', not '" +
          cfg.frame + "'");
  }
  if (cfg.timeChange != "unit" && cfg.timeChange != "coboundary")
    err("time_change: must be 'unit' or 'coboundary'");
  if (cfg.conjugacy != "identity" && cfg.conjugacy != "coboundary")
    err("conjugacy: must be 'identity' or 'coboundary'");
  if ((cfg.timeChange == "coboundary" || cfg.conjugacy == "coboundary") &&
      needsLattice(cfg.scenario) && cfg.lattice != "sl2z")
    err("conjugacy: the coboundary testbed lives on lattice 'sl2z'");

  if (!(cfg.eps > 0 && cfg.eps < 0.1)) err("constants.eps: must lie in (0, 1/10)");
  if (!(cfg.rho > 0 && cfg.rho <= cfg.eps / 2))
    err("constants.rho: must lie in (0, eps/2]");
  if (!(cfg.eta > 0 && cfg.eta < 1)) err("constants.eta: must lie in (0, 1)");
  if (fr && cfg.eta > 0) {
    int maxd = 1;
    for (const auto& mod : fr->modules) maxd = std::max(maxd, std::max(mod.d, 1));
    const double bound = cfg.eta / (2.0 * fr->componentBound() * maxd);
    if (!(cfg.b > 0 && cfg.b < bound))
      err("constants.b: must lie in (0, " + std::to_string(bound) +
          ") for this frame's coefficient growth");
  }
  if (!(cfg.theta > 0 && cfg.theta < 1)) err("constants.theta: must lie in (0, 1)");
  if (!(cfg.m0 > 0)) err("constants.m0: must be positive");
  if (!(cfg.kappaTilde >= 1)) err("constants.kappa_tilde: must be at least 1");
  if (!(cfg.omega > 0 && cfg.omega < 1)) err("constants.omega: must lie in (0, 1)");
  if (!(cfg.tolerance > 0)) err("constants.tolerance: must be positive");
  for (const auto& [k, v] : cfg.knobs)
    if (!std::isfinite(v)) err("knobs." + k + ": must be finite");

  rep.ok = rep.errors.empty();
  return rep;
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config: not valid structured text: ") +
                             e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config: top level must be an object");

  ExperimentConfig cfg;
  std::vector<std::string> errors;
  auto str = [&](const json& v, const char* field, std::string& into) {
    if (v.is_string())
      into = v.get<std::string>();
    else
      errors.push_back(std::string(field) + ": must be a string");
  };
  auto num = [&](const json& v, const std::string& field, double& into) {
    if (v.is_number())
      into = v.get<double>();
    else
      errors.push_back(field + ": must be a number");
  };

  for (const auto& [key, value] : j.items()) {
    if (key == "scenario") str(value, "scenario", cfg.scenario);
    else if (key == "frame") str(value, "frame", cfg.frame);
    else if (key == "lattice") str(value, "lattice", cfg.lattice);
    else if (key == "time_change") str(value, "time_change", cfg.timeChange);
    else if (key == "conjugacy") str(value, "conjugacy", cfg.conjugacy);
    else if (key == "out") str(value, "out", cfg.outDir);
    else if (key == "seed") {
      if (value.is_number_unsigned())
        cfg.seed = value.get<std::uint64_t>();
      else
        errors.push_back("seed: must be a non-negative integer");
    } else if (key == "constants") {
      if (!value.is_object()) {
        errors.push_back("constants: must be an object");
        continue;
      }
      for (const auto& [ck, cv] : value.items()) {
        const std::string field = "constants." + ck;
        if (ck == "eps") num(cv, field, cfg.eps);
        else if (ck == "rho") num(cv, field, cfg.rho);
        else if (ck == "eta") num(cv, field, cfg.eta);
        else if (ck == "b") num(cv, field, cfg.b);
        else if (ck == "theta") num(cv, field, cfg.theta);
        else if (ck == "m0") num(cv, field, cfg.m0);
        else if (ck == "kappa_tilde") num(cv, field, cfg.kappaTilde);
        else if (ck == "omega") num(cv, field, cfg.omega);
        else if (ck == "tolerance") num(cv, field, cfg.tolerance);
        else errors.push_back(field + ": unknown constant");
      }
    } else if (key == "knobs") {
      if (!value.is_object()) {
        errors.push_back("knobs: must be an object");
        continue;
      }
      for (const auto& [kk, kv] : value.items()) {
        if (kv.is_number())
          cfg.knobs[kk] = kv.get<double>();
        else
          errors.push_back("knobs." + kk + ": must be a number");
      }
    } else {
      errors.push_back(key + ": unknown field");
    }
  }
  if (!errors.empty()) {
    std::string joined = "config invalid:";
    for (const auto& e : errors) joined += "\n  " + e;
    throw std::runtime_error(joined);
  }
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) { return configJson(cfg).dump(2); }

RunResult run_scenario(const ExperimentConfig& cfg) {
  RunResult res;
  res.scenario = cfg.scenario;

  const ValidationReport v = validate_config(cfg);
  if (!v.ok) {
    json j;
    j["scenario"] = cfg.scenario;
    j["status"] = "invalid-config";
    j["errors"] = v.errors;
    res.manifest = j.dump(2);
    res.exitCode = 2;
    res.note = "configuration invalid";
    return res;
  }

  ScenarioOutput out;
  try {
    if (cfg.scenario == "triple-check") out = runTripleCheck(cfg);
    else if (cfg.scenario == "deviation") out = runDeviation(cfg);
    else if (cfg.scenario == "tracking-suite") out = runTrackingSuite(cfg);
    else if (cfg.scenario == "polybound-suite") out = runPolyboundSuite(cfg);
    else if (cfg.scenario == "solovay") out = runSolovay(cfg);
    else if (cfg.scenario == "basic-lemma") out = runBasicLemma(cfg);
    else if (cfg.scenario == "transport") out = runTransport(cfg);
    else if (cfg.scenario == "cohomology") out = runCohomology(cfg);
    else out = runPsiT(cfg);
  } catch (const std::exception& e) {
    out.pass = false;
    out.note = std::string("stage error in ") + cfg.scenario + ": " + e.what();
  }

  const ConjugacyTestbed tb = make_coboundary_testbed();
  const double Ctau =
      cfg.timeChange == "coboundary"
          ? std::max({1.0, tb.alpha1.upper, 1.0 / tb.alpha1.lower, tb.alpha2.upper,
                      1.0 / tb.alpha2.lower})
          : 1.0;

  json manifest;
  manifest["scenario"] = cfg.scenario;
  manifest["status"] = out.pass ? "ok" : "hypothesis-failed";
  if (!out.note.empty()) manifest["note"] = out.note;
  manifest["config"] = configJson(cfg);
  manifest["constants_ledger"] = ledgerJson(cfg, Ctau);
  manifest["results"] = out.results;
  json names = json::array();
  for (const auto& [name, body] : out.artifacts) {
    (void)body;
    names.push_back(name);
  }
  manifest["artifacts"] = names;
  res.manifest = manifest.dump(2);
  res.artifacts = out.artifacts;
  res.note = out.note;
  res.exitCode = out.pass ? 0 : 1;

  if (!cfg.outDir.empty()) {
    std::filesystem::create_directories(cfg.outDir);
    std::ofstream mf(std::filesystem::path(cfg.outDir) / "manifest.json");
    mf << res.manifest << "\n";
    for (const auto& [name, body] : res.artifacts) {
      std::ofstream af(std::filesystem::path(cfg.outDir) / name);
      af << body;
    }
  }
  return res;
}

}  // namespace horolab
