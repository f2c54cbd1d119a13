#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dmsim/error.hpp"

namespace dmsim {

/// Tensor-product cell-centred mesh on an interval (0,Lx) or a rectangle
/// (0,Lx)x(0,Ly). Cells are numbered x-fastest: index = i + nx*j.
class Grid {
 public:
  Grid() = default;

  static Grid line(double length, int n) { return Grid(1, {length, 1.0}, {n, 1}); }
  static Grid rect(double lx, int nx, double ly, int ny) { return Grid(2, {lx, ly}, {nx, ny}); }

  int dim() const noexcept { return dim_; }
  int cells(int axis) const noexcept { return n_[axis]; }
  double length(int axis) const noexcept { return len_[axis]; }
  double spacing(int axis) const noexcept { return len_[axis] / n_[axis]; }
  double min_spacing() const noexcept {
    return dim_ == 1 ? spacing(0) : std::min(spacing(0), spacing(1));
  }
  std::size_t size() const noexcept { return static_cast<std::size_t>(n_[0]) * n_[1]; }
  double cell_volume() const noexcept { return dim_ == 1 ? spacing(0) : spacing(0) * spacing(1); }
  double measure() const noexcept { return dim_ == 1 ? len_[0] : len_[0] * len_[1]; }

  double center(int axis, int i) const noexcept { return (i + 0.5) * spacing(axis); }
  std::size_t index(int i, int j = 0) const noexcept {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(n_[0]) * j;
  }

  /// Same mesh with every cell count multiplied by `factor`.
  Grid refined(int factor) const {
    return dim_ == 1 ? line(len_[0], n_[0] * factor)
                     : rect(len_[0], n_[0] * factor, len_[1], n_[1] * factor);
  }

  std::string describe() const {
    std::string s = std::to_string(dim_) + "D " + std::to_string(n_[0]);
    if (dim_ == 2) s += "x" + std::to_string(n_[1]);
    return s + " cells";
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Grid(int dim, std::array<double, 2> len, std::array<int, 2> n) : dim_(dim), len_(len), n_(n) {
    for (int a = 0; a < dim_; ++a) {
      if (!(len_[a] > 0.0) || !std::isfinite(len_[a]))
        throw ContractError("grid length must be positive and finite");
      if (n_[a] < 2) throw ContractError("grid needs at least 2 cells per axis");
    }
  }

  int dim_ = 1;
  std::array<double, 2> len_{1.0, 1.0};
  std::array<int, 2> n_{2, 1};
};

/// Cell-averaged scalar field living on a Grid.
class Field {
 public:
  Field() = default;
  Field(const Grid& g, double value) : grid_(g), values_(g.size(), value) {}
  Field(const Grid& g, std::vector<double> values) : grid_(g), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw ContractError("field size does not match grid");
  }

  /// Samples f at cell centres; f receives (x, y) with y = 0 in 1D.
  static Field sample(const Grid& g, const std::function<double(double, double)>& f) {
    Field out(g, 0.0);
    const int ny = g.dim() == 1 ? 1 : g.cells(1);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < g.cells(0); ++i)
        out.values_[g.index(i, j)] = f(g.center(0, i), g.dim() == 1 ? 0.0 : g.center(1, j));
    return out;
  }

  const Grid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  std::span<const double> values() const& noexcept { return values_; }
  std::span<double> values() & noexcept { return values_; }
  // A span into a temporary would dangle, e.g. in a range-for over f(x).values().
  std::span<const double> values() const&& = delete;

  double min() const;
  double max() const;
  bool all_finite() const;

  friend bool operator==(const Field&, const Field&) = default;

 private:
  Grid grid_;
  std::vector<double> values_;
};

inline double Field::min() const {
  double m = values_.empty() ? 0.0 : values_[0];
  for (double x : values_) m = std::min(m, x);
  return m;
}

inline double Field::max() const {
  double m = values_.empty() ? 0.0 : values_[0];
  for (double x : values_) m = std::max(m, x);
  return m;
}

inline bool Field::all_finite() const {
  for (double x : values_)
    if (!std::isfinite(x)) return false;
  return true;
}

/// Face-centred values per axis, boundary faces included (and held at 0).
/// x-faces: (nx+1)*ny entries, index i + (nx+1)*j with i the face between
/// cells i-1 and i. y-faces: nx*(ny+1) entries, index i + nx*j.
struct FaceField {
  Grid grid;
  std::array<std::vector<double>, 2> faces;

  std::size_t x_face(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(grid.cells(0) + 1) * j;
  }
  std::size_t y_face(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(grid.cells(0)) * j;
  }
};

inline void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw ContractError("fields live on different grids");
}

inline void require_on_grid(const Grid& g, const Field& f) {
  require_same_grid(g, f.grid());
  if (f.size() != g.size()) throw ContractError("field size does not match grid");
}

/// Applies fn(c, nb, inv_h2) to every interior cell/neighbour pair, once per
/// ordered pair, i.e. both orientations of every interior face.
template <class Fn>
inline void for_each_neighbour(const Grid& g, Fn&& fn) {
  const int nx = g.cells(0);
  const int ny = g.dim() == 1 ? 1 : g.cells(1);
  const double ihx2 = 1.0 / (g.spacing(0) * g.spacing(0));
  const double ihy2 = g.dim() == 1 ? 0.0 : 1.0 / (g.spacing(1) * g.spacing(1));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t c = g.index(i, j);
      if (i > 0) fn(c, g.index(i - 1, j), ihx2);
      if (i + 1 < nx) fn(c, g.index(i + 1, j), ihx2);
      if (g.dim() == 2) {
        if (j > 0) fn(c, g.index(i, j - 1), ihy2);
        if (j + 1 < ny) fn(c, g.index(i, j + 1), ihy2);
      }
    }
  }
}

/// Cell-centred second-order Laplacian with zero-flux boundary faces.
inline Field laplacian_apply(const Grid& g, const Field& f) {
  require_on_grid(g, f);
  Field out(g, 0.0);
  for_each_neighbour(g, [&](std::size_t c, std::size_t nb, double ih2) {
    out[c] += (f[nb] - f[c]) * ih2;
  });
  return out;
}

/// Normal differences on every face; boundary faces are 0.
inline FaceField gradient_faces(const Grid& g, const Field& f) {
  require_on_grid(g, f);
  FaceField out{g, {}};
  const int nx = g.cells(0);
  const int ny = g.dim() == 1 ? 1 : g.cells(1);
  out.faces[0].assign(static_cast<std::size_t>(nx + 1) * ny, 0.0);
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i)
      out.faces[0][out.x_face(i, j)] = (f[g.index(i, j)] - f[g.index(i - 1, j)]) / g.spacing(0);
  if (g.dim() == 2) {
    out.faces[1].assign(static_cast<std::size_t>(nx) * (ny + 1), 0.0);
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        out.faces[1][out.y_face(i, j)] = (f[g.index(i, j)] - f[g.index(i, j - 1)]) / g.spacing(1);
  }
  return out;
}

/// Midpoint quadrature: sum of cell values times cell volume.
inline double integrate(const Grid& g, const Field& f) {
  require_on_grid(g, f);
  double s = 0.0;
  for (double x : f.values()) s += x;
  return s * g.cell_volume();
}

/// Volume-weighted inner product.
inline double inner(const Grid& g, const Field& a, const Field& b) {
  require_on_grid(g, a);
  require_on_grid(g, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s * g.cell_volume();
}

/// Cellwise map of one field.
template <class Fn>
inline Field map(const Field& a, Fn&& fn) {
  Field out(a.grid(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i]);
  return out;
}

/// Cellwise map of two fields on the same grid.
template <class Fn>
inline Field zip(const Field& a, const Field& b, Fn&& fn) {
  require_same_grid(a.grid(), b.grid());
  Field out(a.grid(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
  return out;
}

/// Block-averages a field onto the grid coarsened by `factor` per axis.
inline Field restrict_to(const Field& fine, int factor) {
  const Grid& g = fine.grid();
  if (factor < 1 || g.cells(0) % factor != 0 || (g.dim() == 2 && g.cells(1) % factor != 0))
    throw ContractError("restriction factor must divide the cell counts");
  if (factor == 1) return fine;
  const Grid coarse = g.dim() == 1 ? Grid::line(g.length(0), g.cells(0) / factor)
                                   : Grid::rect(g.length(0), g.cells(0) / factor, g.length(1),
                                                g.cells(1) / factor);
  Field out(coarse, 0.0);
  const int ny = g.dim() == 1 ? 1 : g.cells(1);
  const int fy = g.dim() == 1 ? 1 : factor;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < g.cells(0); ++i)
      out[coarse.index(i / factor, j / fy)] += fine[g.index(i, j)];
  const double w = 1.0 / (g.dim() == 1 ? factor : factor * factor);
  for (auto& x : out.values()) x *= w;
  return out;
}

/// L1(Omega) distance of two fields on the same grid.
inline double l1_distance(const Field& a, const Field& b) {
  require_same_grid(a.grid(), b.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s * a.grid().cell_volume();
}

}  // namespace dmsim
