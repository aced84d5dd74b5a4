#pragma once

// Finite observation windows of Z^d: flat row-major site indexing, bitset
// site sets, sup-norm balls and vertex boundaries. Free windows clip at the
// faces, Torus windows wrap. All window types are immutable once built and
// safe to share across replicas.

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "wormlab/points.hpp"

namespace wormlab {

enum class BoundaryKind { Free, Torus };

struct BoxGeometry {
  int d = 1;
  std::int64_t side = 1;
  BoundaryKind boundary = BoundaryKind::Free;
  Coord lo;  // smallest corner; window covers lo + [0, side)^d

  static BoxGeometry centered(int d, std::int64_t side, BoundaryKind b) {
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("BoxGeometry: d out of range");
    if (side < 1) throw std::invalid_argument("BoxGeometry: side must be >= 1");
    BoxGeometry g;
    g.d = d;
    g.side = side;
    g.boundary = b;
    for (int i = 0; i < d; ++i) g.lo[i] = static_cast<std::int32_t>(-(side / 2));
    return g;
  }

  std::int64_t num_sites() const {
    std::int64_t n = 1;
    for (int i = 0; i < d; ++i) n *= side;
    return n;
  }

  bool in_window(const Coord& c) const {
    for (int i = 0; i < d; ++i) {
      std::int64_t v = c[i] - lo[i];
      if (v < 0 || v >= side) return false;
    }
    return true;
  }

  // wraps under Torus; precondition in_window() under Free
  std::int64_t index_of(const Coord& c) const {
    std::int64_t idx = 0;
    for (int i = d - 1; i >= 0; --i) {
      std::int64_t v = c[i] - lo[i];
      if (boundary == BoundaryKind::Torus) {
        v %= side;
        if (v < 0) v += side;
      }
      idx = idx * side + v;
    }
    return idx;
  }

  Coord coord_of(std::int64_t idx) const {
    Coord c;
    for (int i = 0; i < d; ++i) {
      c[i] = static_cast<std::int32_t>(idx % side + lo[i]);
      idx /= side;
    }
    return c;
  }

  // neighbour along one axis/direction without allocation; -1 when the step
  // leaves a Free window
  std::int64_t neighbor_index(std::int64_t idx, int axis, int step) const {
    std::int64_t stride = 1;
    for (int i = 0; i < axis; ++i) stride *= side;
    std::int64_t pos = (idx / stride) % side;
    std::int64_t moved = pos + step;
    if (boundary == BoundaryKind::Torus) {
      moved %= side;
      if (moved < 0) moved += side;
    } else if (moved < 0 || moved >= side) {
      return -1;
    }
    return idx + (moved - pos) * stride;
  }

  // direction-neighbours of a site; under Free, steps leaving the window are
  // omitted, under Torus all 2d are present (possibly coinciding on tiny tori)
  std::vector<std::int64_t> neighbors(std::int64_t idx) const {
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(2 * d));
    for (int i = 0; i < d; ++i) {
      for (int step : {-1, 1}) {
        std::int64_t nb = neighbor_index(idx, i, step);
        if (nb >= 0) out.push_back(nb);
      }
    }
    return out;
  }
};

class SiteSet {
 public:
  SiteSet() = default;
  explicit SiteSet(const BoxGeometry& g)
      : geom_(g), bits_(static_cast<std::size_t>((g.num_sites() + 63) / 64), 0) {}

  const BoxGeometry& geometry() const { return geom_; }
  std::int64_t count() const { return count_; }
  bool empty() const { return count_ == 0; }

  bool test(std::int64_t idx) const {
    return (bits_[static_cast<std::size_t>(idx >> 6)] >> (idx & 63)) & 1u;
  }
  void set(std::int64_t idx) {
    std::uint64_t& w = bits_[static_cast<std::size_t>(idx >> 6)];
    std::uint64_t m = 1ULL << (idx & 63);
    if (!(w & m)) {
      w |= m;
      ++count_;
    }
  }
  bool test_coord(const Coord& c) const {
    if (geom_.boundary == BoundaryKind::Free && !geom_.in_window(c)) return false;
    return test(geom_.index_of(c));
  }
  void set_coord(const Coord& c) { set(geom_.index_of(c)); }

  std::vector<std::int64_t> indices() const {
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(count_));
    std::int64_t n = geom_.num_sites();
    for (std::int64_t i = 0; i < n; ++i)
      if (test(i)) out.push_back(i);
    return out;
  }

  bool is_subset_of(const SiteSet& other) const {
    for (std::size_t w = 0; w < bits_.size(); ++w)
      if (bits_[w] & ~other.bits_[w]) return false;
    return true;
  }

 private:
  BoxGeometry geom_;
  std::vector<std::uint64_t> bits_;
  std::int64_t count_ = 0;
};

// Sites y with |y - center| <= R inside the window. Under Free boundary the
// whole ball must fit; under Torus coordinates wrap.
inline SiteSet ball_sites(const Coord& center, int R, const BoxGeometry& geom) {
  if (R < 0) throw std::invalid_argument("ball_sites: negative radius");
  if (geom.boundary == BoundaryKind::Free) {
    for (int i = 0; i < geom.d; ++i) {
      if (center[i] - R < geom.lo[i] || center[i] + R > geom.lo[i] + geom.side - 1)
        throw std::out_of_range("ball_sites: ball exceeds Free window");
    }
  }
  SiteSet s(geom);
  for (const auto& c : enumerate_ball(center, R, geom.d)) s.set_coord(c);
  return s;
}

enum class BoundarySide { Interior, Exterior };

// Interior: sites of H with a direction-neighbour outside H.
// Exterior: sites outside H with a direction-neighbour inside H.
inline SiteSet boundary(const SiteSet& H, BoundarySide side) {
  const BoxGeometry& g = H.geometry();
  SiteSet out(g);
  std::int64_t n = g.num_sites();
  for (std::int64_t idx = 0; idx < n; ++idx) {
    bool in = H.test(idx);
    if (side == BoundarySide::Interior && !in) continue;
    if (side == BoundarySide::Exterior && in) continue;
    for (std::int64_t nb : g.neighbors(idx)) {
      if (H.test(nb) != in) {
        out.set(idx);
        break;
      }
    }
  }
  return out;
}

inline PointSet to_point_set(const SiteSet& s) {
  PointSet p(s.geometry().d);
  for (std::int64_t idx : s.indices()) p.insert(s.geometry().coord_of(idx));
  return p;
}

}  // namespace wormlab
