#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace horolab {

// Elements of a product of matrix groups / algebras, stored factor by factor.
struct AlgebraElement {
  std::vector<Eigen::MatrixXd> f;

  AlgebraElement() = default;
  explicit AlgebraElement(std::vector<Eigen::MatrixXd> fac) : f(std::move(fac)) {}

  static AlgebraElement zeroLike(const std::vector<int>& dims);

  AlgebraElement operator+(const AlgebraElement& o) const;
  AlgebraElement operator-(const AlgebraElement& o) const;
  AlgebraElement operator*(double s) const;
  double frob() const;
  double dot(const AlgebraElement& o) const;
  AlgebraElement bracket(const AlgebraElement& o) const;
  AlgebraElement transpose() const;
};

struct GroupElement {
  std::vector<Eigen::MatrixXd> f;

  GroupElement() = default;
  explicit GroupElement(std::vector<Eigen::MatrixXd> fac) : f(std::move(fac)) {}

  static GroupElement identity(const std::vector<int>& dims);

  GroupElement operator*(const GroupElement& o) const;
  GroupElement inverse() const;
  double frobDistToIdentity() const;
  double frobDist(const GroupElement& o) const;
};

GroupElement expm(const AlgebraElement& x);
AlgebraElement logm(const GroupElement& g);  // principal; throws if ill-defined

// One irreducible piece of the complement: E[0..d] with ad(U)E[j] = E[j-1],
// ad(U)E[0] = 0, ad(A)E[j] = (d/2 - j)E[j].
struct JordanModule {
  int d = 0;
  std::vector<AlgebraElement> E;
};

// Coordinates in the chart g = exp(sum c[i][j] E_{j,i}) * exp(a A) * exp(ubar Ubar) * exp(u U).
struct TrackParams {
  std::vector<std::vector<double>> c;
  double a = 0, ubar = 0, u = 0;

  double maxModuleCoeff() const {
    double m = 0;
    for (const auto& row : c)
      for (double v : row) m = std::max(m, std::abs(v));
    return m;
  }
  double sPartDist() const { return std::abs(a) + std::abs(ubar) + std::abs(u); }
  double dist() const { return std::max(maxModuleCoeff(), sPartDist()); }
};

struct TripleReport {
  bool pass = false;
  double res_AU = 0;     // ||[A,U] - U||
  double res_AUbar = 0;  // ||[A,Ubar] + Ubar||
  double res_UUbar = 0;  // ||[U,Ubar] - 2A||
};

TripleReport verify_sl2_triple(const AlgebraElement& U, const AlgebraElement& A,
                               const AlgebraElement& Ubar, double tol = 1e-9);

struct Sl2Frame {
  std::string name;
  std::vector<int> dims;  // factor sizes; factor i is sl(dims[i])
  AlgebraElement U, A, Ubar;
  std::vector<JordanModule> modules;

  // Full chart basis [E_{0,0}..E_{d,last}, A, Ubar, U] as stacked column vectors,
  // with a prefactored solver for coordinate extraction.
  Eigen::MatrixXd chartBasis;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> chartQR;

  int mDim() const {
    int n = 0;
    for (const auto& mod : modules) n += mod.d + 1;
    return n;
  }
  int maxModuleDegree() const {
    int d = 0;
    for (const auto& mod : modules) d = std::max(d, mod.d);
    return d;
  }
  // Component count for covering arguments: 2 * prod over modules of max(d, 1).
  int componentBound() const {
    long long p = 1;
    for (const auto& mod : modules) p *= std::max(mod.d, 1);
    return static_cast<int>(2 * p);
  }
  int paramCount() const { return mDim() + 3; }

  // Coordinates of x in the chart basis (least squares; residual must be tiny).
  Eigen::VectorXd coords(const AlgebraElement& x) const;
  AlgebraElement fromParams(const TrackParams& p, bool modulePartOnly) const;
};

// Builds the module decomposition of the orthogonal complement of span{U,A,Ubar}
// inside the product of sl(dims[i]). Requires the span to be transpose-closed so
// that the complement is invariant.
Sl2Frame build_jordan_basis(const AlgebraElement& U, const AlgebraElement& A,
                            const AlgebraElement& Ubar, const std::vector<int>& dims,
                            const std::string& name = "custom", double tol = 1e-9);

// Catalog frames.
const Sl2Frame& frame_sl2();
const Sl2Frame& frame_sl2_x_sl2();
const Sl2Frame& frame_sl3();
const Sl2Frame& catalogFrame(const std::string& name);  // throws on unknown name

class OutsideChartError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

GroupElement assemble(const Sl2Frame& frame, const TrackParams& p);

// Inverts the chart near the identity (damped Newton, closed forms where exact).
// Throws OutsideChartError if no solution with dist < eps0 is found.
TrackParams decompose_near_identity(const GroupElement& g, const Sl2Frame& frame,
                                    double eps0 = 0.5);

// max(max |c|, |a|+|ubar|+|u|) in the chart; +infinity outside it.
double group_distance(const GroupElement& g, const Sl2Frame& frame, double eps0 = 0.5);

inline double infinity() { return std::numeric_limits<double>::infinity(); }

// Flattened view of all factors (for Newton residuals).
Eigen::VectorXd vecAll(const GroupElement& g);

}  // namespace horolab
