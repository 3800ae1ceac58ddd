#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <vector>

#include "necklace/fft.hpp"
#include "necklace/field.hpp"

namespace necklace {

/// ũ(l_k, x_j) on the discrete Brillouin zone l_k = k/N - 1/2, k = 0..N-1, for every cell node x_j.
class BlochField {
 public:
  BlochField(CellGeometry cell, std::size_t n_cells)
      : cell_(std::move(cell)), n_cells_(n_cells), values_(n_cells * cell_.size()) {
    if (n_cells < 2) throw ConfigError("Bloch field needs at least 2 wavenumbers");
  }

  const CellGeometry& cell() const noexcept { return cell_; }
  std::size_t n_l() const noexcept { return n_cells_; }
  std::size_t n_points() const noexcept { return cell_.size(); }
  double l(std::size_t k) const noexcept {
    return static_cast<double>(k) / static_cast<double>(n_cells_) - 0.5;
  }

  std::complex<double>& at(std::size_t k, std::size_t j) noexcept { return values_[k * cell_.size() + j]; }
  const std::complex<double>& at(std::size_t k, std::size_t j) const noexcept {
    return values_[k * cell_.size() + j];
  }
  std::vector<std::complex<double>>& storage() noexcept { return values_; }
  const std::vector<std::complex<double>>& storage() const noexcept { return values_; }

  /// ũ at l_k + shift for an integer shift, by ũ(l + 1, x) = ũ(l, x) e^{-ix}.
  std::complex<double> at_shifted(std::size_t k, long shift, std::size_t j) const {
    return at(k, j) * std::polar(1.0, -static_cast<double>(shift) * cell_.position(j));
  }

  bool same_grid(const BlochField& other) const noexcept {
    return cell_ == other.cell_ && n_cells_ == other.n_cells_;
  }

 private:
  CellGeometry cell_;
  std::size_t n_cells_;
  std::vector<std::complex<double>> values_;
};

/// ũ(l_k, x_j) = Σ_n u_n(x_j) e^{-i l_k (x_j + 2πn)}, evaluated as a DFT over the cell index.
template <class Scalar>
BlochField bloch_transform(const BasicGraphField<Scalar>& u) {
  const auto& lat = u.lattice();
  const std::size_t n = lat.n_cells();
  const std::size_t d = lat.dofs_per_cell();
  BlochField out(lat.cell(), n);
  ComplexFft fft(n);
  std::vector<std::complex<double>> col(n), spec(n);
  for (std::size_t j = 0; j < d; ++j) {
    // e^{-i l_k 2πn} = (-1)^n e^{-2πikn/N}
    for (std::size_t c = 0; c < n; ++c) {
      const std::complex<double> v = u[lat.index(c, j)];
      col[c] = (c % 2 == 0) ? v : -v;
    }
    fft.forward(col, spec);
    const double x = lat.cell().position(j);
    for (std::size_t k = 0; k < n; ++k) out.at(k, j) = spec[k] * std::polar(1.0, -out.l(k) * x);
  }
  return out;
}

/// u_n(x_j) = (1/N) Σ_k e^{i l_k (x_j + 2πn)} ũ(l_k, x_j), the exact inverse of `bloch_transform`.
inline ComplexGraphField inverse_bloch(const BlochField& ub, LatticePtr lattice) {
  const auto& lat = *lattice;
  if (!(lat.cell() == ub.cell()) || lat.n_cells() != ub.n_l())
    throw ConfigError("Bloch field grid does not match the lattice");
  const std::size_t n = lat.n_cells();
  ComplexGraphField out(lattice);
  ComplexFft fft(n);
  std::vector<std::complex<double>> spec(n), col(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < lat.dofs_per_cell(); ++j) {
    const double x = lat.cell().position(j);
    for (std::size_t k = 0; k < n; ++k) spec[k] = ub.at(k, j) * std::polar(1.0, ub.l(k) * x);
    fft.backward(spec, col);
    for (std::size_t c = 0; c < n; ++c) out[lat.index(c, j)] = (c % 2 == 0 ? inv_n : -inv_n) * col[c];
  }
  return out;
}

/// Real part of the inverse transform; throws if the imaginary residue exceeds `tolerance` times
/// the field's sup norm (a spectrum without conjugate symmetry).
inline GraphField inverse_bloch_real(const BlochField& ub, LatticePtr lattice, double tolerance = 1e-12) {
  const ComplexGraphField z = inverse_bloch(ub, lattice);
  GraphField out(lattice);
  double scale = 0, residue = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = z[i].real();
    scale = std::max(scale, std::abs(z[i]));
    residue = std::max(residue, std::abs(z[i].imag()));
  }
  if (residue > tolerance * std::max(scale, 1e-300))
  {
    std::ostringstream msg;
    msg << "inverse Bloch transform has imaginary residue " << residue << " (sup " << scale << ")";
    throw SolverError(msg.str());
  }
  return out;
}

/// (ũ * ṽ)(l_k) = (1/N) Σ_{k'} ũ(l_k - l_{k'}) ṽ(l_{k'}), continued across the zone edge
/// quasi-periodically. Equals the transform of the pointwise product exactly for even N.
inline BlochField bloch_convolve(const BlochField& ub, const BlochField& vb) {
  if (!ub.same_grid(vb)) throw ConfigError("Bloch convolution needs identical grids");
  const std::size_t n = ub.n_l();
  if (n % 2 != 0) throw ConfigError("Bloch convolution needs an even number of wavenumbers");
  BlochField out(ub.cell(), n);
  const long ln = static_cast<long>(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < ub.n_points(); ++j) {
    for (long k = 0; k < ln; ++k) {
      std::complex<double> s = 0;
      for (long kp = 0; kp < ln; ++kp) {
        long q = k - kp + ln / 2;  // l_k - l_{k'} = l_q
        long shift = 0;
        if (q >= ln) {
          q -= ln;
          shift = 1;
        } else if (q < 0) {
          q += ln;
          shift = -1;
        }
        const auto uq = shift == 0 ? ub.at(static_cast<std::size_t>(q), j)
                                   : ub.at_shifted(static_cast<std::size_t>(q), shift, j);
        s += uq * vb.at(static_cast<std::size_t>(kp), j);
      }
      out.at(static_cast<std::size_t>(k), j) = s * inv_n;
    }
  }
  return out;
}

/// Lumped-mass inner product on one cell for wavenumber index k.
inline std::complex<double> bloch_cell_inner(const BlochField& ub, const BlochField& vb, std::size_t k) {
  std::complex<double> s = 0;
  for (std::size_t j = 0; j < ub.n_points(); ++j)
    s += ub.cell().weight(j) * std::conj(ub.at(k, j)) * vb.at(k, j);
  return s;
}

}  // namespace necklace
