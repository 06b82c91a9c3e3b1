#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mftg/rng.hpp"

namespace mftg {

// Mass-conservation tolerance used by every constructor in the project.
inline constexpr double kPmfTol = 1e-12;

// Probability mass function over the atoms 0..size-1 of a finite set held in
// canonical order (for product sets: lexicographic over integer tuples, first
// coordinate most significant).
class FinitePmf {
 public:
  FinitePmf() = default;
  explicit FinitePmf(std::vector<double> weights);

  static FinitePmf uniform(int n);
  static FinitePmf dirac(int n, int atom);
  // Normalizes a nonnegative vector with positive total mass.
  static FinitePmf normalized(std::vector<double> weights);

  int size() const { return static_cast<int>(w_.size()); }
  double operator[](int k) const { return w_[k]; }
  std::span<const double> weights() const { return w_; }

  // Index of the single unit-mass atom, or -1 if not a Dirac measure.
  int dirac_atom(double tol = 0.0) const;

  bool operator==(const FinitePmf& other) const = default;

 private:
  std::vector<double> w_;
};

// Largest absolute entrywise difference; sizes must match.
double linf_distance(const FinitePmf& a, const FinitePmf& b);

// Conditional laws: one pmf over `cols` targets per source atom. Rows over
// zero-mass source atoms may stay undefined.
class KernelMatrix {
 public:
  KernelMatrix() = default;
  KernelMatrix(int rows, int cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  void set_row(int r, const FinitePmf& pmf);
  bool row_defined(int r) const { return defined_[r] != 0; }
  // Weight of target a given source x; row must be defined.
  double at(int x, int a) const;
  FinitePmf row(int x) const;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> p_;
  std::vector<std::uint8_t> defined_;
};

// Nonnegative reweighting vector; must match the pmf it perturbs in length.
class PerturbationVector {
 public:
  explicit PerturbationVector(std::vector<double> entries);
  int size() const { return static_cast<int>(z_.size()); }
  double operator[](int k) const { return z_[k]; }

 private:
  std::vector<double> z_;
};

// What sends the perturbed measure to uniform. The default fires only when
// the normalizer sum Z_k mu_k vanishes, a null event under exponential Z;
// the literal variant fires whenever any single coordinate of Z is zero,
// even off the support of mu. Both return the exact uniform pmf.
enum class ZeroRule { kNormalizerTrigger, kLiteralTrigger };

// [Z mu]_k = Z_k mu_k / sum_j Z_j mu_j, uniform when the rule fires.
FinitePmf perturb(const FinitePmf& mu, const PerturbationVector& z,
                  ZeroRule rule = ZeroRule::kNormalizerTrigger);

// Smallest atom k with u < cumulative mass through k; u in [0,1). Boundary
// values of u fall into the next atom's half-open interval.
int inverse_cdf_sample(const FinitePmf& mu, double u);

// Product measure over the Cartesian product in canonical order.
FinitePmf product(std::span<const FinitePmf> factors);

// Sums out the dropped coordinates of a joint pmf with the given product
// shape; `keep` is a strictly increasing list of coordinate indices.
FinitePmf marginal(const FinitePmf& joint, std::span<const int> shape,
                   std::span<const int> keep);

// Splits a joint over X x A (x-major layout) into its X marginal and the
// conditional kernel; rows at zero-mass x stay undefined.
struct Disintegration {
  FinitePmf base;
  KernelMatrix kernel;
};
Disintegration disintegrate(const FinitePmf& joint, int nx, int na);

// joint(x,a) = base(x) * kernel(a|x); kernel may be undefined off supp(base).
FinitePmf mix(const FinitePmf& base, const KernelMatrix& kernel);

// E[[Z mu]] for Z with i.i.d. unit-exponential entries, computed per
// supported atom k as the integral over t in [0, inf) of
//   mu_k/(1+mu_k t) * prod_j 1/(1+mu_j t)   (product over supp(mu)),
// mapped to [0,1) by t = s/(1-s) and evaluated with composite Gauss panels
// doubled until successive estimates differ by < 1e-10 (node cap 2^20).
FinitePmf perturbed_mean_quadrature(const FinitePmf& mu);

// Monte Carlo estimate of the same mean; fills per-component standard errors
// when `se_out` is non-null. Oracle companion to the quadrature.
std::vector<double> perturbed_mean_mc(const FinitePmf& mu, int samples, Stream& stream,
                                      ZeroRule rule = ZeroRule::kNormalizerTrigger,
                                      std::vector<double>* se_out = nullptr);

}  // namespace mftg
