#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <utility>
#include <vector>

#include "necklace/lattice.hpp"

namespace necklace {

/// Values of a function on every lattice DOF. Vertex values are stored once, so continuity at
/// the vertices holds by construction.
template <class Scalar>
class BasicGraphField {
 public:
  using value_type = Scalar;

  BasicGraphField() = default;
  explicit BasicGraphField(LatticePtr lattice, Scalar fill = Scalar{})
      : lattice_(std::move(lattice)), values_(lattice_ ? lattice_->dof_count() : 0, fill) {}
  BasicGraphField(LatticePtr lattice, std::vector<Scalar> values)
      : lattice_(std::move(lattice)), values_(std::move(values)) {
    if (!lattice_ || values_.size() != lattice_->dof_count())
      throw ConfigError("field value count does not match the lattice DOF count");
  }

  const LatticePtr& lattice_ptr() const noexcept { return lattice_; }
  const NecklaceLattice& lattice() const { return *lattice_; }
  std::size_t size() const noexcept { return values_.size(); }

  Scalar& operator[](std::size_t i) noexcept { return values_[i]; }
  const Scalar& operator[](std::size_t i) const noexcept { return values_[i]; }
  std::span<Scalar> values() noexcept { return values_; }
  std::span<const Scalar> values() const noexcept { return values_; }
  std::vector<Scalar>& storage() noexcept { return values_; }
  const std::vector<Scalar>& storage() const noexcept { return values_; }

  /// Samples `fn(x, global_index)` at every DOF.
  template <class Fn>
  static BasicGraphField sample(LatticePtr lattice, Fn&& fn) {
    BasicGraphField out(lattice);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(lattice->position(i), i);
    return out;
  }

  BasicGraphField& operator+=(const BasicGraphField& other) {
    check_same_lattice(*this, other);
    for (std::size_t i = 0; i < size(); ++i) values_[i] += other.values_[i];
    return *this;
  }
  BasicGraphField& operator-=(const BasicGraphField& other) {
    check_same_lattice(*this, other);
    for (std::size_t i = 0; i < size(); ++i) values_[i] -= other.values_[i];
    return *this;
  }
  BasicGraphField& operator*=(Scalar s) {
    for (auto& v : values_) v *= s;
    return *this;
  }
  friend BasicGraphField operator+(BasicGraphField a, const BasicGraphField& b) { return a += b; }
  friend BasicGraphField operator-(BasicGraphField a, const BasicGraphField& b) { return a -= b; }
  friend BasicGraphField operator*(Scalar s, BasicGraphField a) { return a *= s; }
  friend BasicGraphField operator-(BasicGraphField a) { return a *= Scalar{-1}; }

  template <class Other>
  friend void check_same_lattice(const BasicGraphField& a, const BasicGraphField<Other>& b) {
    if (!a.lattice_ptr() || !b.lattice_ptr() ||
        (a.lattice_ptr() != b.lattice_ptr() && !(a.lattice() == b.lattice())))
      throw ConfigError("fields live on different lattices");
  }

 private:
  LatticePtr lattice_;
  std::vector<Scalar> values_;
};

using GraphField = BasicGraphField<double>;
using ComplexGraphField = BasicGraphField<std::complex<double>>;

namespace detail {
template <class T> T conj_if_complex(const T& v) { return v; }
template <class T> std::complex<T> conj_if_complex(const std::complex<T>& v) { return std::conj(v); }
}  // namespace detail

/// Lumped-mass inner product ⟨u, v⟩ = Σ w_i conj(u_i) v_i.
template <class Scalar>
Scalar inner_product(const BasicGraphField<Scalar>& u, const BasicGraphField<Scalar>& v) {
  check_same_lattice(u, v);
  const auto& cell = u.lattice().cell();
  const std::size_t dpc = cell.size();
  Scalar sum{};
  for (std::size_t i = 0; i < u.size(); ++i)
    sum += cell.weight(i % dpc) * detail::conj_if_complex(u[i]) * v[i];
  return sum;
}

template <class Scalar>
double l2_norm(const BasicGraphField<Scalar>& u) {
  return std::sqrt(std::abs(inner_product(u, u)));
}

template <class Scalar>
double sup_norm(const BasicGraphField<Scalar>& u) {
  double best = 0.0;
  for (const auto& v : u.values()) best = std::max(best, static_cast<double>(std::abs(v)));
  return best;
}

/// Pointwise product, the quadratic nonlinearity of the Boussinesq model acts component-wise.
inline GraphField pointwise_product(const GraphField& u, const GraphField& v) {
  check_same_lattice(u, v);
  GraphField out(u.lattice_ptr());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] * v[i];
  return out;
}

}  // namespace necklace
