#include "horolab/liealg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace horolab {

namespace {

std::vector<int> dimsOf(const std::vector<Eigen::MatrixXd>& f) {
  std::vector<int> d;
  d.reserve(f.size());
  for (const auto& m : f) d.push_back(static_cast<int>(m.rows()));
  return d;
}

int flatSize(const std::vector<int>& dims) {
  int n = 0;
  for (int d : dims) n += d * d;
  return n;
}

Eigen::VectorXd flatten(const std::vector<Eigen::MatrixXd>& f) {
  Eigen::VectorXd v(flatSize(dimsOf(f)));
  int at = 0;
  for (const auto& m : f) {
    const int n = static_cast<int>(m.size());
    v.segment(at, n) = Eigen::Map<const Eigen::VectorXd>(m.data(), n);
    at += n;
  }
  return v;
}

std::vector<Eigen::MatrixXd> unflatten(const Eigen::VectorXd& v, const std::vector<int>& dims) {
  std::vector<Eigen::MatrixXd> f;
  f.reserve(dims.size());
  int at = 0;
  for (int d : dims) {
    f.emplace_back(Eigen::Map<const Eigen::MatrixXd>(v.data() + at, d, d));
    at += d * d;
  }
  return f;
}

}  // namespace

AlgebraElement AlgebraElement::zeroLike(const std::vector<int>& dims) {
  std::vector<Eigen::MatrixXd> f;
  f.reserve(dims.size());
  for (int d : dims) f.push_back(Eigen::MatrixXd::Zero(d, d));
  return AlgebraElement(std::move(f));
}

AlgebraElement AlgebraElement::operator+(const AlgebraElement& o) const {
  AlgebraElement r = *this;
  for (size_t i = 0; i < f.size(); ++i) r.f[i] += o.f[i];
  return r;
}

AlgebraElement AlgebraElement::operator-(const AlgebraElement& o) const {
  AlgebraElement r = *this;
  for (size_t i = 0; i < f.size(); ++i) r.f[i] -= o.f[i];
  return r;
}

AlgebraElement AlgebraElement::operator*(double s) const {
  AlgebraElement r = *this;
  for (auto& m : r.f) m *= s;
  return r;
}

double AlgebraElement::frob() const {
  double s = 0;
  for (const auto& m : f) s += m.squaredNorm();
  return std::sqrt(s);
}

double AlgebraElement::dot(const AlgebraElement& o) const {
  double s = 0;
  for (size_t i = 0; i < f.size(); ++i) s += (f[i].array() * o.f[i].array()).sum();
  return s;
}

AlgebraElement AlgebraElement::bracket(const AlgebraElement& o) const {
  AlgebraElement r = *this;
  for (size_t i = 0; i < f.size(); ++i) r.f[i] = f[i] * o.f[i] - o.f[i] * f[i];
  return r;
}

AlgebraElement AlgebraElement::transpose() const {
  AlgebraElement r = *this;
  for (auto& m : r.f) m = m.transpose().eval();
  return r;
}

GroupElement GroupElement::identity(const std::vector<int>& dims) {
  std::vector<Eigen::MatrixXd> f;
  f.reserve(dims.size());
  for (int d : dims) f.push_back(Eigen::MatrixXd::Identity(d, d));
  return GroupElement(std::move(f));
}

GroupElement GroupElement::operator*(const GroupElement& o) const {
  GroupElement r = *this;
  for (size_t i = 0; i < f.size(); ++i) r.f[i] = f[i] * o.f[i];
  return r;
}

GroupElement GroupElement::inverse() const {
  GroupElement r = *this;
  for (auto& m : r.f) m = m.inverse().eval();
  return r;
}

double GroupElement::frobDistToIdentity() const {
  double s = 0;
  for (const auto& m : f)
    s += (m - Eigen::MatrixXd::Identity(m.rows(), m.cols())).squaredNorm();
  return std::sqrt(s);
}

double GroupElement::frobDist(const GroupElement& o) const {
  double s = 0;
  for (size_t i = 0; i < f.size(); ++i) s += (f[i] - o.f[i]).squaredNorm();
  return std::sqrt(s);
}

GroupElement expm(const AlgebraElement& x) {
  GroupElement g;
  g.f.reserve(x.f.size());
  for (const auto& m : x.f) g.f.push_back(m.exp());
  return g;
}

AlgebraElement logm(const GroupElement& g) {
  AlgebraElement x;
  x.f.reserve(g.f.size());
  for (const auto& m : g.f) {
    Eigen::MatrixXd l = m.log();
    if (!l.allFinite()) throw OutsideChartError("matrix logarithm ill-defined for factor");
    x.f.push_back(std::move(l));
  }
  return x;
}

Eigen::VectorXd vecAll(const GroupElement& g) { return flatten(g.f); }

TripleReport verify_sl2_triple(const AlgebraElement& U, const AlgebraElement& A,
                               const AlgebraElement& Ubar, double tol) {
  TripleReport r;
  r.res_AU = (A.bracket(U) - U).frob();
  r.res_AUbar = (A.bracket(Ubar) + Ubar).frob();
  r.res_UUbar = (U.bracket(Ubar) - A * 2.0).frob();
  r.pass = r.res_AU <= tol && r.res_AUbar <= tol && r.res_UUbar <= tol;
  return r;
}

Eigen::VectorXd Sl2Frame::coords(const AlgebraElement& x) const {
  return chartQR.solve(flatten(x.f));
}

AlgebraElement Sl2Frame::fromParams(const TrackParams& p, bool modulePartOnly) const {
  AlgebraElement x = AlgebraElement::zeroLike(dims);
  for (size_t i = 0; i < modules.size(); ++i)
    for (size_t j = 0; j < modules[i].E.size(); ++j)
      x = x + modules[i].E[j] * p.c[i][j];
  if (!modulePartOnly) x = x + A * p.a + Ubar * p.ubar + U * p.u;
  return x;
}

namespace {

// Orthonormal basis of the ambient algebra (traceless per factor), as columns of
// a flat-coordinate matrix. Off-diagonal unit matrices plus an orthonormalized
// diagonal-traceless block per factor.
Eigen::MatrixXd ambientBasis(const std::vector<int>& dims) {
  const int nf = flatSize(dims);
  int cols = 0;
  for (int d : dims) cols += d * d - 1;
  Eigen::MatrixXd B(nf, cols);
  B.setZero();
  int col = 0, at = 0;
  for (int d : dims) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;
        B(at + j * d + i, col++) = 1.0;  // column-major within the factor
      }
    if (d > 1) {
      Eigen::MatrixXd H(d, d - 1);
      H.setZero();
      for (int k = 0; k + 1 < d; ++k) {
        H(k, k) = 1.0;
        H(k + 1, k) = -1.0;
      }
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(H);
      Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d - 1);
      for (int k = 0; k + 1 < d; ++k) {
        for (int i = 0; i < d; ++i) B(at + i * d + i, col) = Q(i, k);
        ++col;
      }
    }
    at += d * d;
  }
  return B;
}

// Matrix of ad(X) in the given orthonormal ambient coordinates.
Eigen::MatrixXd adMatrix(const AlgebraElement& X, const Eigen::MatrixXd& B,
                         const std::vector<int>& dims) {
  const int n = static_cast<int>(B.cols());
  Eigen::MatrixXd M(n, n);
  for (int j = 0; j < n; ++j) {
    AlgebraElement bj(unflatten(B.col(j), dims));
    M.col(j) = B.transpose() * flatten(X.bracket(bj).f);
  }
  return M;
}

bool flatLexGreater(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (int i = 0; i < a.size(); ++i) {
    const double x = std::abs(a[i]) < 1e-11 ? 0.0 : a[i];
    const double y = std::abs(b[i]) < 1e-11 ? 0.0 : b[i];
    if (x != y) return x > y;
  }
  return false;
}

}  // namespace

Sl2Frame build_jordan_basis(const AlgebraElement& U, const AlgebraElement& A,
                            const AlgebraElement& Ubar, const std::vector<int>& dims,
                            const std::string& name, double tol) {
  TripleReport tr = verify_sl2_triple(U, A, Ubar, tol);
  if (!tr.pass)
    throw std::invalid_argument("sl2 triple residuals exceed tolerance for frame " + name);

  Sl2Frame fr;
  fr.name = name;
  fr.dims = dims;
  fr.U = U;
  fr.A = A;
  fr.Ubar = Ubar;

  const Eigen::MatrixXd B = ambientBasis(dims);
  const int namb = static_cast<int>(B.cols());

  Eigen::MatrixXd S(B.rows(), 3);
  S.col(0) = flatten(U.f);
  S.col(1) = flatten(A.f);
  S.col(2) = flatten(Ubar.f);
  Eigen::MatrixXd Samb = B.transpose() * S;
  if ((B * Samb - S).norm() > tol)
    throw std::invalid_argument("triple does not lie in the ambient algebra");

  // The complement is ad-invariant only if the triple span is transpose-closed.
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> sqr(Samb);
    for (const AlgebraElement* X : {&U, &A, &Ubar}) {
      Eigen::VectorXd t = B.transpose() * flatten(X->transpose().f);
      if ((Samb * sqr.solve(t) - t).norm() > tol)
        throw std::invalid_argument("triple span is not transpose-closed; complement "
                                    "would not be invariant");
    }
  }

  // Orthogonal complement of the triple span, in ambient coordinates.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Samb);
  Eigen::MatrixXd Qfull = qr.householderQ();
  Eigen::MatrixXd M = Qfull.rightCols(namb - 3);
  const int mdim = namb - 3;

  std::vector<JordanModule> modules;
  if (mdim > 0) {
    const Eigen::MatrixXd adA = adMatrix(A, B, dims);
    const Eigen::MatrixXd adU = adMatrix(U, B, dims);
    Eigen::MatrixXd Am = M.transpose() * adA * M;
    Am = 0.5 * (Am + Am.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Am);
    const Eigen::VectorXd ev = es.eigenvalues();
    const Eigen::MatrixXd V = es.eigenvectors();

    // Cluster eigenvalues into weight spaces.
    std::vector<std::pair<double, std::vector<int>>> spaces;
    for (int i = 0; i < ev.size(); ++i) {
      if (!spaces.empty() && std::abs(ev[i] - spaces.back().first) < 1e-6)
        spaces.back().second.push_back(i);
      else
        spaces.push_back({ev[i], {i}});
    }
    for (auto& sp : spaces) {
      double mean = 0;
      for (int i : sp.second) mean += ev[i];
      mean /= static_cast<double>(sp.second.size());
      double snapped = std::round(mean * 2.0) / 2.0;
      if (std::abs(mean - snapped) > 1e-6)
        throw std::runtime_error("weight not a half-integer; cannot complete strings");
      sp.first = snapped;
    }
    auto spaceBasis = [&](double w) -> Eigen::MatrixXd {
      for (const auto& sp : spaces)
        if (std::abs(sp.first - w) < 0.25) {
          Eigen::MatrixXd Vw(mdim, sp.second.size());
          for (size_t k = 0; k < sp.second.size(); ++k) Vw.col(k) = V.col(sp.second[k]);
          return Vw;
        }
      return Eigen::MatrixXd(mdim, 0);
    };

    const Eigen::MatrixXd adUm = M.transpose() * adU * M;

    // Module tops: kernel of ad(U) inside each nonnegative weight space.
    struct Top {
      int d;
      Eigen::VectorXd mcoord;
      Eigen::VectorXd flat;
    };
    std::vector<Top> tops;
    for (const auto& sp : spaces) {
      if (sp.first < -1e-9) continue;
      Eigen::MatrixXd Vw = spaceBasis(sp.first);
      if (Vw.cols() == 0) continue;
      Eigen::MatrixXd Bw = adUm * Vw;
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(Bw, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      for (int k = 0; k < Vw.cols(); ++k) {
        const double s = k < sv.size() ? sv[k] : 0.0;
        if (s > 1e-8) continue;
        Eigen::VectorXd v = Vw * svd.matrixV().col(k);
        Eigen::VectorXd flat = B * (M * v);
        for (int i = 0; i < flat.size(); ++i) {
          if (std::abs(flat[i]) > 1e-9) {
            if (flat[i] < 0) {
              v = -v;
              flat = -flat;
            }
            break;
          }
        }
        tops.push_back({static_cast<int>(std::lround(sp.first * 2.0)), v, flat});
      }
    }
    std::sort(tops.begin(), tops.end(), [](const Top& a, const Top& b) {
      if (a.d != b.d) return a.d > b.d;
      return flatLexGreater(a.flat, b.flat);
    });

    int total = 0;
    for (const auto& top : tops) {
      JordanModule mod;
      mod.d = top.d;
      mod.E.push_back(AlgebraElement(unflatten(top.flat, dims)));
      Eigen::VectorXd prev = top.mcoord;
      for (int j = 1; j <= top.d; ++j) {
        const double w = top.d / 2.0 - j;
        Eigen::MatrixXd Vw = spaceBasis(w);
        if (Vw.cols() == 0)
          throw std::runtime_error("missing weight space; cannot complete strings");
        Eigen::MatrixXd Bw = adUm * Vw;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Bw, Eigen::ComputeThinU | Eigen::ComputeThinV);
        Eigen::VectorXd z = svd.solve(prev);
        if ((Bw * z - prev).norm() > 1e-8)
          throw std::runtime_error("string descent failed; cannot complete strings");
        Eigen::VectorXd v = Vw * z;
        mod.E.push_back(AlgebraElement(unflatten(B * (M * v), dims)));
        prev = v;
      }
      total += mod.d + 1;
      modules.push_back(std::move(mod));
    }
    if (total != mdim)
      throw std::runtime_error("module dimensions do not fill the complement");
  }
  fr.modules = std::move(modules);

  const int np = fr.paramCount();
  Eigen::MatrixXd CB(flatSize(dims), np);
  int col = 0;
  for (const auto& mod : fr.modules)
    for (const auto& e : mod.E) CB.col(col++) = flatten(e.f);
  CB.col(col++) = flatten(A.f);
  CB.col(col++) = flatten(Ubar.f);
  CB.col(col++) = flatten(U.f);
  fr.chartBasis = CB;
  fr.chartQR.compute(CB);
  return fr;
}

namespace {

Sl2Frame makeSl2() {
  Eigen::MatrixXd u(2, 2), a(2, 2), ub(2, 2);
  u << 0, 1, 0, 0;
  a << 0.5, 0, 0, -0.5;
  ub << 0, 0, 1, 0;
  return build_jordan_basis(AlgebraElement({u}), AlgebraElement({a}), AlgebraElement({ub}),
                            {2}, "sl2");
}

Sl2Frame makeSl2xSl2() {
  Eigen::MatrixXd u(2, 2), a(2, 2), ub(2, 2), z = Eigen::MatrixXd::Zero(2, 2);
  u << 0, 1, 0, 0;
  a << 0.5, 0, 0, -0.5;
  ub << 0, 0, 1, 0;
  return build_jordan_basis(AlgebraElement({u, z}), AlgebraElement({a, z}),
                            AlgebraElement({ub, z}), {2, 2}, "sl2_x_sl2");
}

Sl2Frame makeSl3() {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(3, 3), a = Eigen::MatrixXd::Zero(3, 3),
                  ub = Eigen::MatrixXd::Zero(3, 3);
  u(0, 1) = 1;
  a(0, 0) = 0.5;
  a(1, 1) = -0.5;
  ub(1, 0) = 1;
  return build_jordan_basis(AlgebraElement({u}), AlgebraElement({a}), AlgebraElement({ub}),
                            {3}, "sl3");
}

}  // namespace

const Sl2Frame& frame_sl2() {
  static const Sl2Frame f = makeSl2();
  return f;
}

const Sl2Frame& frame_sl2_x_sl2() {
  static const Sl2Frame f = makeSl2xSl2();
  return f;
}

const Sl2Frame& frame_sl3() {
  static const Sl2Frame f = makeSl3();
  return f;
}

const Sl2Frame& catalogFrame(const std::string& name) {
  if (name == "sl2") return frame_sl2();
  if (name == "sl2_x_sl2") return frame_sl2_x_sl2();
  if (name == "sl3") return frame_sl3();
  throw std::invalid_argument("unknown frame '" + name +
                              "' (catalog: sl2, sl2_x_sl2, sl3)");
}

GroupElement assemble(const Sl2Frame& frame, const TrackParams& p) {
  GroupElement g = expm(frame.fromParams(p, true));
  g = g * expm(frame.A * p.a);
  g = g * expm(frame.Ubar * p.ubar);
  g = g * expm(frame.U * p.u);
  return g;
}

namespace {

TrackParams emptyParams(const Sl2Frame& frame) {
  TrackParams p;
  p.c.resize(frame.modules.size());
  for (size_t i = 0; i < frame.modules.size(); ++i)
    p.c[i].assign(frame.modules[i].d + 1, 0.0);
  return p;
}

// Closed-form chart inverse for a single SL(2) factor carrying the triple:
// exp(aA)exp(ub Ubar)exp(u U) = [[e^{a/2}, e^{a/2}u], [e^{-a/2}ub, e^{-a/2}(1+ub*u)]].
bool sl2ChartInverse(const Eigen::MatrixXd& g, double& a, double& ubar, double& u) {
  if (g(0, 0) <= 1e-12) return false;
  a = 2.0 * std::log(g(0, 0));
  u = g(0, 1) / g(0, 0);
  ubar = g(1, 0) * g(0, 0);
  return true;
}

Eigen::VectorXd packParams(const TrackParams& p) {
  std::vector<double> v;
  for (const auto& row : p.c) v.insert(v.end(), row.begin(), row.end());
  v.push_back(p.a);
  v.push_back(p.ubar);
  v.push_back(p.u);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<int>(v.size()));
}

TrackParams unpackParams(const Sl2Frame& frame, const Eigen::VectorXd& v) {
  TrackParams p = emptyParams(frame);
  int at = 0;
  for (auto& row : p.c)
    for (auto& x : row) x = v[at++];
  p.a = v[at++];
  p.ubar = v[at++];
  p.u = v[at++];
  return p;
}

}  // namespace

TrackParams decompose_near_identity(const GroupElement& g, const Sl2Frame& frame,
                                    double eps0) {
  // Factor-split fast path: triple on factor 0 (an SL2 block), modules elsewhere.
  const bool sl2Lead = frame.dims[0] == 2 && frame.U.f[0](0, 1) == 1.0;
  bool split = sl2Lead;
  for (size_t i = 1; i < frame.dims.size() && split; ++i)
    if (frame.U.f[i].norm() != 0 || frame.A.f[i].norm() != 0 || frame.Ubar.f[i].norm() != 0)
      split = false;
  for (const auto& mod : frame.modules)
    for (const auto& e : mod.E)
      if (e.f[0].norm() != 0) split = false;

  if (split) {
    TrackParams p = emptyParams(frame);
    if (!sl2ChartInverse(g.f[0], p.a, p.ubar, p.u))
      throw OutsideChartError("outside decomposition chart (degenerate leading entry)");
    if (frame.dims.size() > 1) {
      GroupElement rest;
      rest.f.assign(g.f.begin(), g.f.end());
      rest.f[0] = Eigen::MatrixXd::Identity(2, 2);
      AlgebraElement xi = logm(rest);  // throws when the log is ill-defined
      Eigen::VectorXd co = frame.coords(xi);
      int at = 0;
      for (auto& row : p.c)
        for (auto& x : row) x = co[at++];
      // The chart uses a product of exponentials; on split frames the module
      // exponential is the whole factor, so coordinates are exact.
    }
    if (p.dist() >= eps0)
      throw OutsideChartError("outside decomposition chart (distance >= eps0)");
    return p;
  }

  // General case: damped Gauss-Newton on the chart map, seeded by the principal log.
  TrackParams p = emptyParams(frame);
  try {
    AlgebraElement xi = logm(g);
    Eigen::VectorXd co = frame.coords(xi);
    p = unpackParams(frame, co);
  } catch (const OutsideChartError&) {
    throw OutsideChartError("outside decomposition chart (no principal logarithm)");
  }

  const Eigen::VectorXd target = vecAll(g);
  Eigen::VectorXd x = packParams(p);
  const int np = static_cast<int>(x.size());
  auto residual = [&](const Eigen::VectorXd& v) {
    return Eigen::VectorXd(vecAll(assemble(frame, unpackParams(frame, v))) - target);
  };
  Eigen::VectorXd F = residual(x);
  const double scale = std::max(1.0, target.norm());
  for (int it = 0; it < 80 && F.lpNorm<Eigen::Infinity>() > 1e-14 * scale; ++it) {
    Eigen::MatrixXd J(F.size(), np);
    for (int j = 0; j < np; ++j) {
      Eigen::VectorXd xp = x;
      const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
      xp[j] += h;
      J.col(j) = (residual(xp) - F) / h;
    }
    Eigen::MatrixXd JtJ = J.transpose() * J;
    JtJ.diagonal().array() += 1e-12 * JtJ.diagonal().maxCoeff() + 1e-300;
    Eigen::VectorXd step = JtJ.ldlt().solve(-J.transpose() * F);
    double lambda = 1.0;
    bool improved = false;
    for (int k = 0; k < 25; ++k) {
      Eigen::VectorXd xn = x + lambda * step;
      Eigen::VectorXd Fn = residual(xn);
      if (Fn.norm() < F.norm()) {
        x = xn;
        F = Fn;
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) break;
  }
  if (F.lpNorm<Eigen::Infinity>() > 1e-9 * scale)
    throw OutsideChartError("outside decomposition chart (no solution found)");
  p = unpackParams(frame, x);
  if (p.dist() >= eps0)
    throw OutsideChartError("outside decomposition chart (distance >= eps0)");
  return p;
}

double group_distance(const GroupElement& g, const Sl2Frame& frame, double eps0) {
  try {
    return decompose_near_identity(g, frame, eps0).dist();
  } catch (const OutsideChartError&) {
    return infinity();
  }
}

}  // namespace horolab
