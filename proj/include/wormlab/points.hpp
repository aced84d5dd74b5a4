#pragma once

// Z^d coordinates and unbounded site sets. The lattice window types live in
// lattice.hpp; these are for walks and potential-theory sets that roam Z^d.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "wormlab/rng.hpp"

namespace wormlab {

inline constexpr int kMaxDim = 7;

// Coordinate vector; entries beyond the active dimension stay zero.
struct Coord {
  std::array<std::int32_t, kMaxDim> x{};

  std::int32_t& operator[](int i) { return x[static_cast<size_t>(i)]; }
  std::int32_t operator[](int i) const { return x[static_cast<size_t>(i)]; }
  bool operator==(const Coord& o) const { return x == o.x; }
};

inline Coord origin() { return Coord{}; }

inline Coord make_coord(std::initializer_list<std::int32_t> vals) {
  Coord c;
  int i = 0;
  for (auto v : vals) c[i++] = v;
  return c;
}

inline int sup_norm(const Coord& c, int d) {
  int m = 0;
  for (int i = 0; i < d; ++i) {
    int a = std::abs(c[i]);
    if (a > m) m = a;
  }
  return m;
}

inline int sup_dist(const Coord& a, const Coord& b, int d) {
  int m = 0;
  for (int i = 0; i < d; ++i) {
    int v = std::abs(a[i] - b[i]);
    if (v > m) m = v;
  }
  return m;
}

inline Coord add(const Coord& a, const Coord& b, int d) {
  Coord r = a;
  for (int i = 0; i < d; ++i) r[i] += b[i];
  return r;
}

inline Coord sub(const Coord& a, const Coord& b, int d) {
  Coord r = a;
  for (int i = 0; i < d; ++i) r[i] -= b[i];
  return r;
}

inline std::uint64_t coord_hash(const Coord& c, int d) {
  std::uint64_t h = 0x243F6A8885A308D3ULL;
  for (int i = 0; i < d; ++i)
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(c[i])));
  return h;
}

// Open-addressing hash set of coordinates. Grows by rehashing; lookups are a
// handful of probes at load factor <= 0.5, which is what the walk loops need.
class PointSet {
 public:
  explicit PointSet(int d = 1) : d_(d) { rehash(64); }

  int dim() const { return d_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<Coord>& items() const { return items_; }

  // bounding-box reject first: walkers spend most steps far from the set
  bool contains(const Coord& c) const {
    for (int i = 0; i < d_; ++i)
      if (c[i] < lo_[i] || c[i] > hi_[i]) return false;
    return index_of(c) >= 0;
  }

  // position in items(), -1 if absent
  std::int32_t index_of(const Coord& c) const {
    std::size_t mask = slots_.size() - 1;
    std::size_t i = coord_hash(c, d_) & mask;
    while (true) {
      std::int32_t s = slots_[i];
      if (s < 0) return -1;
      if (items_[static_cast<std::size_t>(s)] == c) return s;
      i = (i + 1) & mask;
    }
  }

  // returns true if newly inserted
  bool insert(const Coord& c) {
    if ((items_.size() + 1) * 2 > slots_.size()) rehash(slots_.size() * 2);
    std::size_t mask = slots_.size() - 1;
    std::size_t i = coord_hash(c, d_) & mask;
    while (true) {
      std::int32_t s = slots_[i];
      if (s < 0) {
        slots_[i] = static_cast<std::int32_t>(items_.size());
        items_.push_back(c);
        for (int k = 0; k < d_; ++k) {
          lo_[k] = std::min(lo_[k], c[k]);
          hi_[k] = std::max(hi_[k], c[k]);
        }
        return true;
      }
      if (items_[static_cast<std::size_t>(s)] == c) return false;
      i = (i + 1) & mask;
    }
  }

  // sup-norm diameter (0 for singletons and the empty set)
  int diameter() const {
    if (items_.empty()) return 0;
    int diam = 0;
    for (int i = 0; i < d_; ++i) {
      std::int32_t lo = items_[0][i], hi = items_[0][i];
      for (const auto& c : items_) {
        lo = std::min(lo, c[i]);
        hi = std::max(hi, c[i]);
      }
      diam = std::max(diam, static_cast<int>(hi - lo));
    }
    return diam;
  }

  // sites of the set with at least one nearest neighbour outside it
  std::vector<Coord> interior_boundary() const {
    std::vector<Coord> out;
    for (const auto& c : items_) {
      bool bnd = false;
      for (int i = 0; i < d_ && !bnd; ++i) {
        Coord p = c;
        p[i] += 1;
        if (!contains(p)) bnd = true;
        p[i] -= 2;
        if (!bnd && !contains(p)) bnd = true;
      }
      if (bnd) out.push_back(c);
    }
    return out;
  }

 private:
  void rehash(std::size_t n) {
    slots_.assign(n, -1);
    std::size_t mask = n - 1;
    for (std::size_t k = 0; k < items_.size(); ++k) {
      std::size_t i = coord_hash(items_[k], d_) & mask;
      while (slots_[i] >= 0) i = (i + 1) & mask;
      slots_[i] = static_cast<std::int32_t>(k);
    }
  }

  int d_;
  std::vector<Coord> items_;
  std::vector<std::int32_t> slots_;
  std::array<std::int32_t, kMaxDim> lo_{
      {INT32_MAX, INT32_MAX, INT32_MAX, INT32_MAX, INT32_MAX, INT32_MAX, INT32_MAX}};
  std::array<std::int32_t, kMaxDim> hi_{
      {INT32_MIN, INT32_MIN, INT32_MIN, INT32_MIN, INT32_MIN, INT32_MIN, INT32_MIN}};
};

inline PointSet make_point_set(int d, const std::vector<Coord>& pts) {
  PointSet s(d);
  for (const auto& c : pts) s.insert(c);
  return s;
}

// Sup-norm ball as a set, membership by norm test. Used where enumerating the
// ball would be wasteful (capacity of large balls).
struct BallSet {
  Coord center;
  int radius = 0;
  int d = 1;

  bool contains(const Coord& c) const { return sup_dist(c, center, d) <= radius; }
  int diameter() const { return 2 * radius; }

  double num_sites() const {
    double s = 1;
    for (int i = 0; i < d; ++i) s *= 2.0 * radius + 1.0;
    return s;
  }
  double shell_sites() const {
    if (radius == 0) return 1.0;
    double outer = 1, inner = 1;
    for (int i = 0; i < d; ++i) {
      outer *= 2.0 * radius + 1.0;
      inner *= 2.0 * radius - 1.0;
    }
    return outer - inner;
  }

  // uniform site of the shell {|c-center| = radius} by rejection from the cube
  Coord sample_shell(RngStream& rng) const {
    if (radius == 0) return center;
    while (true) {
      Coord c = center;
      bool on_shell = false;
      for (int i = 0; i < d; ++i) {
        std::int32_t off =
            static_cast<std::int32_t>(rng.below(2 * static_cast<std::uint64_t>(radius) + 1)) - radius;
        c[i] += off;
        if (off == radius || off == -radius) on_shell = true;
      }
      if (on_shell) return c;
    }
  }
};

inline std::vector<Coord> enumerate_ball(const Coord& center, int radius, int d) {
  std::vector<Coord> out;
  Coord c = center;
  for (int i = 0; i < d; ++i) c[i] -= radius;
  while (true) {
    out.push_back(c);
    int i = 0;
    for (; i < d; ++i) {
      if (c[i] < center[i] + radius) {
        c[i] += 1;
        break;
      }
      c[i] = center[i] - radius;
    }
    if (i == d) break;
  }
  return out;
}

}  // namespace wormlab
