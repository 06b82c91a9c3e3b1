#include "mftg/pmf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mftg/errors.hpp"

namespace mftg {

namespace {

void check_mass(std::span<const double> w, const char* who) {
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw InvariantViolation(std::string(who) + ": negative or non-finite weight");
    total += x;
  }
  if (std::abs(total - 1.0) > kPmfTol)
    throw InvariantViolation(std::string(who) + ": mass " + std::to_string(total) +
                             " not 1 within 1e-12");
}

}  // namespace

FinitePmf::FinitePmf(std::vector<double> weights) : w_(std::move(weights)) {
  if (w_.empty()) throw InvariantViolation("FinitePmf: empty support");
  check_mass(w_, "FinitePmf");
}

FinitePmf FinitePmf::uniform(int n) {
  if (n <= 0) throw InvariantViolation("FinitePmf::uniform: n must be positive");
  return FinitePmf(std::vector<double>(n, 1.0 / n));
}

FinitePmf FinitePmf::dirac(int n, int atom) {
  if (atom < 0 || atom >= n) throw InvariantViolation("FinitePmf::dirac: atom out of range");
  std::vector<double> w(n, 0.0);
  w[atom] = 1.0;
  return FinitePmf(std::move(w));
}

FinitePmf FinitePmf::normalized(std::vector<double> weights) {
  double total = 0.0;
  for (double x : weights) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw InvariantViolation("FinitePmf::normalized: negative or non-finite weight");
    total += x;
  }
  if (total <= 0.0) throw InvariantViolation("FinitePmf::normalized: zero total mass");
  for (double& x : weights) x /= total;
  return FinitePmf(std::move(weights));
}

int FinitePmf::dirac_atom(double tol) const {
  int atom = -1;
  for (int k = 0; k < size(); ++k) {
    if (w_[k] > tol) {
      if (atom >= 0) return -1;
      atom = k;
    }
  }
  if (atom >= 0 && std::abs(w_[atom] - 1.0) <= tol) return atom;
  return -1;
}

double linf_distance(const FinitePmf& a, const FinitePmf& b) {
  if (a.size() != b.size()) throw UsageError("linf_distance: size mismatch");
  double d = 0.0;
  for (int k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

KernelMatrix::KernelMatrix(int rows, int cols)
    : rows_(rows), cols_(cols), p_(static_cast<std::size_t>(rows) * cols, 0.0),
      defined_(rows, 0) {
  if (rows <= 0 || cols <= 0) throw InvariantViolation("KernelMatrix: empty shape");
}

void KernelMatrix::set_row(int r, const FinitePmf& pmf) {
  if (r < 0 || r >= rows_) throw UsageError("KernelMatrix::set_row: row out of range");
  if (pmf.size() != cols_) throw UsageError("KernelMatrix::set_row: width mismatch");
  std::copy_n(pmf.weights().data(), cols_, p_.begin() + static_cast<std::size_t>(r) * cols_);
  defined_[r] = 1;
}

double KernelMatrix::at(int x, int a) const {
  if (!row_defined(x)) throw InvariantViolation("KernelMatrix: row undefined");
  return p_[static_cast<std::size_t>(x) * cols_ + a];
}

FinitePmf KernelMatrix::row(int x) const {
  if (!row_defined(x)) throw InvariantViolation("KernelMatrix: row undefined");
  auto begin = p_.begin() + static_cast<std::size_t>(x) * cols_;
  return FinitePmf(std::vector<double>(begin, begin + cols_));
}

PerturbationVector::PerturbationVector(std::vector<double> entries) : z_(std::move(entries)) {
  for (double x : z_)
    if (!(x >= 0.0) || !std::isfinite(x))
      throw InvariantViolation("PerturbationVector: entries must be finite and >= 0");
}

FinitePmf perturb(const FinitePmf& mu, const PerturbationVector& z, ZeroRule rule) {
  if (mu.size() != z.size()) throw UsageError("perturb: dimension mismatch");
  const int n = mu.size();
  if (rule == ZeroRule::kLiteralTrigger) {
    for (int k = 0; k < n; ++k)
      if (z[k] == 0.0) return FinitePmf::uniform(n);
  }
  std::vector<double> w(n);
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    w[k] = z[k] * mu[k];
    total += w[k];
  }
  if (total == 0.0) return FinitePmf::uniform(n);
  for (double& x : w) x /= total;
  return FinitePmf(std::move(w));
}

int inverse_cdf_sample(const FinitePmf& mu, double u) {
  if (!(u >= 0.0 && u < 1.0)) throw UsageError("inverse_cdf_sample: u outside [0,1)");
  double cum = 0.0;
  int last_supported = 0;
  for (int k = 0; k < mu.size(); ++k) {
    if (mu[k] > 0.0) last_supported = k;
    cum += mu[k];
    if (u < cum) return k;
  }
  // Rounding can leave cum slightly below 1; land on the last carried atom.
  return last_supported;
}

FinitePmf product(std::span<const FinitePmf> factors) {
  if (factors.empty()) throw UsageError("product: empty factor list");
  std::vector<double> w{1.0};
  for (const FinitePmf& f : factors) {
    std::vector<double> next;
    next.reserve(w.size() * f.size());
    for (double a : w)
      for (int k = 0; k < f.size(); ++k) next.push_back(a * f[k]);
    w = std::move(next);
  }
  return FinitePmf(std::move(w));
}

FinitePmf marginal(const FinitePmf& joint, std::span<const int> shape,
                   std::span<const int> keep) {
  std::size_t total = 1;
  for (int s : shape) {
    if (s <= 0) throw UsageError("marginal: bad shape");
    total *= static_cast<std::size_t>(s);
  }
  if (static_cast<std::size_t>(joint.size()) != total)
    throw UsageError("marginal: shape does not match joint size");
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] < 0 || keep[i] >= static_cast<int>(shape.size()) ||
        (i > 0 && keep[i] <= keep[i - 1]))
      throw UsageError("marginal: invalid coordinate set");
  }
  int out_size = 1;
  for (int c : keep) out_size *= shape[c];
  if (keep.empty()) throw UsageError("marginal: empty coordinate set");

  // Strides of each coordinate in the row-major joint layout.
  std::vector<std::size_t> stride(shape.size(), 1);
  for (int c = static_cast<int>(shape.size()) - 2; c >= 0; --c)
    stride[c] = stride[c + 1] * static_cast<std::size_t>(shape[c + 1]);

  std::vector<double> out(out_size, 0.0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    int out_idx = 0;
    for (std::size_t c = 0, kpos = 0; c < shape.size(); ++c) {
      int v = static_cast<int>(rem / stride[c]);
      rem %= stride[c];
      if (kpos < keep.size() && static_cast<int>(c) == keep[kpos]) {
        out_idx = out_idx * shape[c] + v;
        ++kpos;
      }
    }
    out[out_idx] += joint[static_cast<int>(flat)];
  }
  return FinitePmf(std::move(out));
}

Disintegration disintegrate(const FinitePmf& joint, int nx, int na) {
  if (nx <= 0 || na <= 0 || joint.size() != nx * na)
    throw UsageError("disintegrate: shape does not match joint size");
  std::vector<double> base(nx, 0.0);
  for (int x = 0; x < nx; ++x)
    for (int a = 0; a < na; ++a) base[x] += joint[x * na + a];
  KernelMatrix kernel(nx, na);
  for (int x = 0; x < nx; ++x) {
    if (base[x] <= 0.0) continue;
    std::vector<double> row(na);
    for (int a = 0; a < na; ++a) row[a] = joint[x * na + a] / base[x];
    kernel.set_row(x, FinitePmf::normalized(std::move(row)));
  }
  return {FinitePmf(std::move(base)), std::move(kernel)};
}

FinitePmf mix(const FinitePmf& base, const KernelMatrix& kernel) {
  if (base.size() != kernel.rows()) throw UsageError("mix: base/kernel shape mismatch");
  const int na = kernel.cols();
  std::vector<double> joint(static_cast<std::size_t>(base.size()) * na, 0.0);
  for (int x = 0; x < base.size(); ++x) {
    if (base[x] == 0.0) continue;
    if (!kernel.row_defined(x))
      throw InvariantViolation("mix: kernel undefined on a supported atom");
    for (int a = 0; a < na; ++a) joint[static_cast<std::size_t>(x) * na + a] = base[x] * kernel.at(x, a);
  }
  return FinitePmf(std::move(joint));
}

namespace {

// 16-point Gauss-Legendre rule on [-1,1].
constexpr int kGaussN = 16;
constexpr double kGaussX[kGaussN] = {
    -0.9894009349916499, -0.9445750230732326, -0.8656312023878318, -0.7554044083550030,
    -0.6178762444026438, -0.4580167776572274, -0.2816035507792589, -0.0950125098376374,
    0.0950125098376374,  0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
    0.7554044083550030,  0.8656312023878318,  0.9445750230732326,  0.9894009349916499};
constexpr double kGaussW[kGaussN] = {
    0.0271524594117541, 0.0622535239386479, 0.0951585116824928, 0.1246289712555339,
    0.1495959888165767, 0.1691565193950025, 0.1826034150449236, 0.1894506104550685,
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

// Integrand vector at t: component c is mu_c/(1+mu_c t) * prod_j 1/(1+mu_j t)
// over the support atoms; shared product factored out.
void integrand_at(const std::vector<double>& supp_w, double t, std::vector<double>& out) {
  double prod = 1.0;
  for (double m : supp_w) prod /= 1.0 + m * t;
  for (std::size_t c = 0; c < supp_w.size(); ++c)
    out[c] = prod * supp_w[c] / (1.0 + supp_w[c] * t);
}

}  // namespace

FinitePmf perturbed_mean_quadrature(const FinitePmf& mu) {
  std::vector<int> supp;
  std::vector<double> supp_w;
  for (int k = 0; k < mu.size(); ++k)
    if (mu[k] > 0.0) {
      supp.push_back(k);
      supp_w.push_back(mu[k]);
    }
  const int ns = static_cast<int>(supp.size());
  if (ns == 1) return FinitePmf::dirac(mu.size(), supp[0]);

  constexpr int kMaxNodes = 1 << 20;
  std::vector<double> integral(ns, 0.0), prev(ns, 0.0), f(ns, 0.0);
  bool converged = false;
  for (int panels = 1; panels * kGaussN <= kMaxNodes; panels *= 2) {
    std::fill(integral.begin(), integral.end(), 0.0);
    const double h = 1.0 / panels;
    for (int p = 0; p < panels; ++p) {
      const double mid = (p + 0.5) * h;
      for (int g = 0; g < kGaussN; ++g) {
        const double s = mid + 0.5 * h * kGaussX[g];
        const double one_minus = 1.0 - s;
        const double t = s / one_minus;
        integrand_at(supp_w, t, f);
        const double jac = 1.0 / (one_minus * one_minus);
        const double wgt = 0.5 * h * kGaussW[g] * jac;
        for (int c = 0; c < ns; ++c) integral[c] += wgt * f[c];
      }
    }
    if (panels > 1) {
      double delta = 0.0;
      for (int c = 0; c < ns; ++c) delta = std::max(delta, std::abs(integral[c] - prev[c]));
      if (delta < 1e-10) {
        converged = true;
        break;
      }
    }
    prev = integral;
  }
  if (!converged)
    throw InvariantViolation("perturbed_mean_quadrature: no convergence within node budget");

  std::vector<double> out(mu.size(), 0.0);
  for (int c = 0; c < ns; ++c) out[supp[c]] = integral[c];
  double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9)
    throw InvariantViolation("perturbed_mean_quadrature: component sum off by >1e-9");
  return FinitePmf::normalized(std::move(out));
}

std::vector<double> perturbed_mean_mc(const FinitePmf& mu, int samples, Stream& stream,
                                      ZeroRule rule, std::vector<double>* se_out) {
  if (samples <= 0) throw UsageError("perturbed_mean_mc: samples must be positive");
  const int n = mu.size();
  std::vector<double> mean(n, 0.0), m2(n, 0.0), z(n);
  for (int s = 0; s < samples; ++s) {
    for (int k = 0; k < n; ++k) z[k] = stream.next_exponential();
    FinitePmf draw = perturb(mu, PerturbationVector(z), rule);
    // Welford update keeps the variance pass single.
    for (int k = 0; k < n; ++k) {
      const double d = draw[k] - mean[k];
      mean[k] += d / (s + 1);
      m2[k] += d * (draw[k] - mean[k]);
    }
  }
  if (se_out) {
    se_out->assign(n, 0.0);
    if (samples > 1)
      for (int k = 0; k < n; ++k)
        (*se_out)[k] = std::sqrt(m2[k] / (samples - 1) / samples);
  }
  return mean;
}

}  // namespace mftg
