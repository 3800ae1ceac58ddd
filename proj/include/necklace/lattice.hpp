#pragma once

#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "necklace/error.hpp"

namespace necklace {

/// Which sub-model of the necklace is discretized.
///  - full:      link, upper and lower semicircle stored separately.
///  - symmetric: u+ == u-, one semicircle stored with doubled weight.
///  - line:      homogeneous real line, no vertices.
enum class Mode { full, symmetric, line };

inline std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::full: return "full";
    case Mode::symmetric: return "symmetric";
    case Mode::line: return "line";
  }
  return "unknown";
}

inline Mode mode_from_string(std::string_view name) {
  if (name == "full") return Mode::full;
  if (name == "symmetric") return Mode::symmetric;
  if (name == "line") return Mode::line;
  throw ConfigError("unknown lattice mode '" + std::string(name) + "' (expected full|symmetric|line)");
}

/// Edge of a necklace cell: the straight link and the two semicircles.
enum class Edge { link, upper, lower };

/// P1 element of the cell template. Node `b` lives `cell_offset` cells to the right of node `a`.
struct Element {
  std::size_t a = 0;
  std::size_t b = 0;
  int cell_offset = 0;
  double weight = 1.0;  // edge multiplicity (2 for the folded semicircle pair)
};

/// Geometry of one 2π period cell: local nodes, positions in [0, 2π), lumped weights and the
/// element template. Shared by the periodic lattice and by the one-cell Bloch eigenproblem.
class CellGeometry {
 public:
  CellGeometry(int m, Mode mode) : m_(m), mode_(mode), h_(std::numbers::pi / m) {
    if (m < 2) throw ConfigError("cell needs m >= 2 subintervals per edge, got " + std::to_string(m));
    build();
  }

  int m() const noexcept { return m_; }
  Mode mode() const noexcept { return mode_; }
  double h() const noexcept { return h_; }
  std::size_t size() const noexcept { return positions_.size(); }
  double position(std::size_t local) const { return positions_.at(local); }
  double weight(std::size_t local) const { return weights_.at(local); }
  bool is_vertex(std::size_t local) const { return vertex_.at(local); }
  const std::vector<double>& positions() const noexcept { return positions_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<Element>& elements() const noexcept { return elements_; }

  /// Metric length of one cell as seen by the inner product (3π on the necklace, 2π on the line).
  double length() const noexcept {
    return mode_ == Mode::line ? 2.0 * std::numbers::pi : 3.0 * std::numbers::pi;
  }

  /// Local node of point `point` in [0, m] along `edge`, plus the cell shift (0 or 1) of that node.
  std::pair<std::size_t, int> node_on_edge(Edge edge, int point) const {
    if (point < 0 || point > m_) throw ConfigError("edge point index out of range");
    const auto m = static_cast<std::size_t>(m_);
    const auto p = static_cast<std::size_t>(point);
    if (edge == Edge::link) return {p, 0};
    if (point == m_) return {0, 1};
    if (mode_ == Mode::full && edge == Edge::lower && point > 0) return {2 * m - 1 + p, 0};
    return {m + p, 0};
  }

  bool operator==(const CellGeometry& other) const noexcept {
    return m_ == other.m_ && mode_ == other.mode_;
  }

 private:
  void add_chain(std::size_t first, std::size_t count, double w) {
    for (std::size_t i = 0; i < count; ++i) elements_.push_back({first + i, first + i + 1, 0, w});
  }

  void build() {
    const auto m = static_cast<std::size_t>(m_);
    const double pi = std::numbers::pi;
    switch (mode_) {
      case Mode::line: {
        for (std::size_t j = 0; j < 2 * m; ++j) {
          positions_.push_back(static_cast<double>(j) * h_);
          weights_.push_back(h_);
          vertex_.push_back(false);
        }
        add_chain(0, 2 * m - 1, 1.0);
        elements_.push_back({2 * m - 1, 0, 1, 1.0});
        break;
      }
      case Mode::symmetric: {
        // nodes: 0 vertex, 1..m-1 link, m vertex, m+1..2m-1 folded circle
        for (std::size_t j = 0; j < 2 * m; ++j) {
          positions_.push_back(static_cast<double>(j) * h_);
          const bool v = (j == 0 || j == m);
          vertex_.push_back(v);
          weights_.push_back(v ? 1.5 * h_ : (j < m ? h_ : 2.0 * h_));
        }
        add_chain(0, m, 1.0);
        add_chain(m, m - 1, 2.0);
        elements_.push_back({2 * m - 1, 0, 1, 2.0});
        break;
      }
      case Mode::full: {
        // nodes: 0 vertex, 1..m-1 link, m vertex, m+1..2m-1 upper, 2m..3m-2 lower
        for (std::size_t j = 0; j <= m; ++j) {
          positions_.push_back(static_cast<double>(j) * h_);
          const bool v = (j == 0 || j == m);
          vertex_.push_back(v);
          weights_.push_back(v ? 1.5 * h_ : h_);
        }
        for (int circle = 0; circle < 2; ++circle) {
          for (std::size_t j = 1; j < m; ++j) {
            positions_.push_back(pi + static_cast<double>(j) * h_);
            vertex_.push_back(false);
            weights_.push_back(h_);
          }
        }
        add_chain(0, m, 1.0);
        // upper: m -> m+1 -> ... -> 2m-1 -> next vertex 0
        elements_.push_back({m, m + 1, 0, 1.0});
        add_chain(m + 1, m - 2, 1.0);
        elements_.push_back({2 * m - 1, 0, 1, 1.0});
        // lower: m -> 2m -> ... -> 3m-2 -> next vertex 0
        elements_.push_back({m, 2 * m, 0, 1.0});
        add_chain(2 * m, m - 2, 1.0);
        elements_.push_back({3 * m - 2, 0, 1, 1.0});
        break;
      }
    }
  }

  int m_;
  Mode mode_;
  double h_;
  std::vector<double> positions_;
  std::vector<double> weights_;
  std::vector<bool> vertex_;
  std::vector<Element> elements_;
};

/// N periodic cells of the necklace (or of the line) with shared vertex DOFs.
/// Global index = cell * dofs_per_cell + local; the right vertex of cell N-1 is vertex 0 of cell 0.
class NecklaceLattice {
 public:
  NecklaceLattice(std::size_t n_cells, int m, Mode mode) : cell_(m, mode), n_cells_(n_cells) {
    if (n_cells < 2)
      throw ConfigError("lattice needs n_cells >= 2 (periodic wrap would self-couple a vertex), got " +
                        std::to_string(n_cells));
  }

  const CellGeometry& cell() const noexcept { return cell_; }
  std::size_t n_cells() const noexcept { return n_cells_; }
  int m() const noexcept { return cell_.m(); }
  Mode mode() const noexcept { return cell_.mode(); }
  double h() const noexcept { return cell_.h(); }
  std::size_t dofs_per_cell() const noexcept { return cell_.size(); }
  std::size_t dof_count() const noexcept { return n_cells_ * cell_.size(); }
  double domain_length() const noexcept {
    return 2.0 * std::numbers::pi * static_cast<double>(n_cells_);
  }
  double total_length() const noexcept { return cell_.length() * static_cast<double>(n_cells_); }

  std::size_t index(std::size_t cell, std::size_t local) const noexcept {
    return (cell % n_cells_) * cell_.size() + local;
  }
  std::size_t cell_of(std::size_t global) const noexcept { return global / cell_.size(); }
  std::size_t local_of(std::size_t global) const noexcept { return global % cell_.size(); }

  /// Global DOF of point `point` in [0, m] on `edge` of `cell`; edge ends resolve to shared vertices.
  std::size_t dof_index(std::size_t cell, Edge edge, int point) const {
    const auto [local, shift] = cell_.node_on_edge(edge, point);
    return index(cell + static_cast<std::size_t>(shift), local);
  }

  /// Coordinate along the unfolded axis, in [0, 2π n_cells).
  double position(std::size_t global) const {
    return 2.0 * std::numbers::pi * static_cast<double>(cell_of(global)) + cell_.position(local_of(global));
  }
  double weight(std::size_t global) const { return cell_.weight(local_of(global)); }

  bool operator==(const NecklaceLattice& other) const noexcept {
    return n_cells_ == other.n_cells_ && cell_ == other.cell_;
  }

 private:
  CellGeometry cell_;
  std::size_t n_cells_;
};

using LatticePtr = std::shared_ptr<const NecklaceLattice>;

inline LatticePtr build_lattice(std::size_t n_cells, int m, Mode mode) {
  return std::make_shared<const NecklaceLattice>(n_cells, m, mode);
}

}  // namespace necklace
