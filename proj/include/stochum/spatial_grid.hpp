#ifndef STOCHUM_SPATIAL_GRID_HPP
#define STOCHUM_SPATIAL_GRID_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace stochum {

using SpatialField = std::vector<double>;

// Uniform interior grid on D = (0, L) with homogeneous Dirichlet conditions.
//
// Interior points x_i = (i+1) h, i = 0..n-1, h = L/(n+1). The L2(D) product
// is the composite-rectangle quadrature h * sum(f g). The control region
// G = [g_lo, g_hi] acts through a 0/1 indicator at grid points; membership is
// closed-interval with a relative slack of 1e-9 h so that grid points landing
// on a region endpoint are included regardless of rounding in (i+1)*h.
class SpatialGrid {
 public:
  SpatialGrid(int n, double length, double g_lo, double g_hi)
      : n_(n), length_(length), g_lo_(g_lo), g_hi_(g_hi) {
    if (n < 1) throw std::invalid_argument("SpatialGrid: n must be >= 1");
    if (!(length > 0.0)) throw std::invalid_argument("SpatialGrid: L must be > 0");
    if (!(g_lo >= 0.0 && g_lo < g_hi && g_hi <= length))
      throw std::invalid_argument(
          "SpatialGrid: control region must satisfy 0 <= g_lo < g_hi <= L");
    h_ = length / (n + 1);
    mask_.resize(n);
    const double slack = 1e-9 * h_;
    for (int i = 0; i < n; ++i) {
      const double xi = x(i);
      mask_[i] = (xi >= g_lo - slack && xi <= g_hi + slack) ? 1.0 : 0.0;
    }
  }

  int n() const { return n_; }
  double length() const { return length_; }
  double h() const { return h_; }
  double quad_weight() const { return h_; }
  double control_lo() const { return g_lo_; }
  double control_hi() const { return g_hi_; }
  double x(int i) const { return (i + 1) * h_; }
  std::span<const double> mask() const { return mask_; }

  std::size_t control_point_count() const {
    std::size_t c = 0;
    for (double m : mask_) c += (m != 0.0);
    return c;
  }

  // Dirichlet 3-point Laplacian: (f_{i-1} - 2 f_i + f_{i+1}) / h^2.
  void laplacian(std::span<const double> f, std::span<double> out) const {
    check_size(f.size());
    check_size(out.size());
    const double inv_h2 = 1.0 / (h_ * h_);
    for (int i = 0; i < n_; ++i) {
      const double left = (i > 0) ? f[i - 1] : 0.0;
      const double right = (i + 1 < n_) ? f[i + 1] : 0.0;
      out[i] = (left - 2.0 * f[i] + right) * inv_h2;
    }
  }

  SpatialField laplacian(const SpatialField& f) const {
    SpatialField out(n_);
    laplacian(f, out);
    return out;
  }

  void apply_mask(std::span<double> f) const {
    check_size(f.size());
    for (int i = 0; i < n_; ++i) f[i] *= mask_[i];
  }

  SpatialField control_mask(SpatialField f) const {
    apply_mask(f);
    return f;
  }

  double inner(std::span<const double> f, std::span<const double> g) const {
    check_size(f.size());
    check_size(g.size());
    double s = 0.0;
    for (int i = 0; i < n_; ++i) s += f[i] * g[i];
    return h_ * s;
  }

  double norm(std::span<const double> f) const {
    return std::sqrt(inner(f, f));
  }

  // Discrete Dirichlet eigenpair: s_i = sin(k pi x_i / L),
  // lambda_k = (2/h^2)(1 - cos(k pi h / L)).
  SpatialField sine_mode(int k) const {
    if (k < 1 || k > n_) throw std::invalid_argument("sine_mode: 1 <= k <= n");
    SpatialField f(n_);
    for (int i = 0; i < n_; ++i)
      f[i] = std::sin(k * M_PI * x(i) / length_);
    return f;
  }

  double sine_eigenvalue(int k) const {
    return 2.0 / (h_ * h_) * (1.0 - std::cos(k * M_PI * h_ / length_));
  }

 private:
  void check_size(std::size_t s) const {
    if (s != static_cast<std::size_t>(n_))
      throw std::invalid_argument("SpatialGrid: field size mismatch");
  }

  int n_;
  double length_;
  double g_lo_, g_hi_;
  double h_;
  std::vector<double> mask_;
};

inline SpatialGrid build_grid(int n, double length, double g_lo, double g_hi) {
  return SpatialGrid(n, length, g_lo, g_hi);
}

// Factorization of (I - dt * Lap_h), the implicit heat step. The matrix is
// symmetric positive definite tridiagonal with constant stencil, so a single
// Thomas elimination pass is precomputed and reused for every node solve.
class ImplicitHeatSolver {
 public:
  ImplicitHeatSolver(const SpatialGrid& grid, double dt)
      : n_(grid.n()) {
    if (!(dt > 0.0)) throw std::invalid_argument("ImplicitHeatSolver: dt > 0");
    const double r = dt / (grid.h() * grid.h());
    diag_ = 1.0 + 2.0 * r;
    off_ = -r;
    // Forward-elimination pivots for the constant-coefficient tridiagonal.
    pivot_.resize(n_);
    double d = diag_;
    pivot_[0] = d;
    for (int i = 1; i < n_; ++i) {
      d = diag_ - off_ * off_ / d;
      pivot_[i] = d;
    }
  }

  int n() const { return n_; }

  void solve_in_place(std::span<double> rhs) const {
    if (rhs.size() != static_cast<std::size_t>(n_))
      throw std::invalid_argument("ImplicitHeatSolver: size mismatch");
    for (int i = 1; i < n_; ++i) rhs[i] -= off_ / pivot_[i - 1] * rhs[i - 1];
    rhs[n_ - 1] /= pivot_[n_ - 1];
    for (int i = n_ - 2; i >= 0; --i)
      rhs[i] = (rhs[i] - off_ * rhs[i + 1]) / pivot_[i];
  }

 private:
  int n_;
  double diag_, off_;
  std::vector<double> pivot_;
};

}  // namespace stochum

#endif  // STOCHUM_SPATIAL_GRID_HPP
