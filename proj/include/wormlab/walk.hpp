#pragma once

// Simple random walk engine on Z^d. Trajectories pack one direction code per
// 4 bits (2d <= 14 for d <= 7), so clouds of millions of steps stay small.
// A worm of length 1 is just its start site (zero steps).

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "wormlab/points.hpp"
#include "wormlab/rng.hpp"

namespace wormlab {

inline constexpr std::uint64_t kNeverHit = std::numeric_limits<std::uint64_t>::max();

class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(int d, Coord start) : d_(d), start_(start) {}

  int dim() const { return d_; }
  const Coord& start() const { return start_; }
  std::uint64_t length() const { return steps_ + 1; }  // number of sites
  std::uint64_t steps() const { return steps_; }

  void push_step(unsigned dir) {
    if ((steps_ & 1) == 0) dirs_.push_back(static_cast<std::uint8_t>(dir & 0xF));
    else dirs_.back() |= static_cast<std::uint8_t>((dir & 0xF) << 4);
    ++steps_;
  }

  unsigned dir_at(std::uint64_t t) const {
    std::uint8_t b = dirs_[static_cast<std::size_t>(t >> 1)];
    return (t & 1) ? (b >> 4) : (b & 0xF);
  }

  // site after t steps, 0 <= t <= steps()
  Coord site(std::uint64_t t) const {
    Coord c = start_;
    for (std::uint64_t i = 0; i < t; ++i) apply_step(c, dir_at(i));
    return c;
  }

  // visits f(site, t) for t = 0..steps()
  template <class F>
  void for_each_site(F&& f) const {
    Coord c = start_;
    f(static_cast<const Coord&>(c), std::uint64_t{0});
    for (std::uint64_t t = 0; t < steps_; ++t) {
      apply_step(c, dir_at(t));
      f(static_cast<const Coord&>(c), t + 1);
    }
  }

  void apply_step(Coord& c, unsigned dir) const {
    c[static_cast<int>(dir >> 1)] += (dir & 1) ? 1 : -1;
  }

 private:
  int d_ = 1;
  Coord start_;
  std::uint64_t steps_ = 0;
  std::vector<std::uint8_t> dirs_;
};

inline Trajectory simulate_walk(const Coord& start, std::uint64_t n_steps, int d,
                                RngStream& rng) {
  Trajectory traj(d, start);
  std::uint64_t two_d = static_cast<std::uint64_t>(2 * d);
  for (std::uint64_t t = 0; t < n_steps; ++t)
    traj.push_step(static_cast<unsigned>(rng.below(two_d)));
  return traj;
}

struct HitResult {
  std::uint64_t hit_time = kNeverHit;
  Coord hit_site;
  bool hit() const { return hit_time != kNeverHit; }
};

enum class HitVariant { Entrance, Hitting };  // t >= 0 vs t >= 1

// earliest t <= t_max with traj.site(t) in K
template <class SetT>
HitResult first_hit(const Trajectory& traj, const SetT& K, std::uint64_t t_max,
                    HitVariant variant = HitVariant::Entrance) {
  HitResult res;
  std::uint64_t start_t = variant == HitVariant::Entrance ? 0 : 1;
  std::uint64_t last = std::min(t_max, traj.steps());
  Coord c = traj.start();
  for (std::uint64_t t = 0; t <= last; ++t) {
    if (t > 0) traj.apply_step(c, traj.dir_at(t - 1));
    if (t >= start_t && K.contains(c)) {
      res.hit_time = t;
      res.hit_site = c;
      return res;
    }
  }
  return res;
}

inline PointSet range_of_walk(const Trajectory& traj) {
  PointSet range(traj.dim());
  traj.for_each_site([&](const Coord& c, std::uint64_t) { range.insert(c); });
  return range;
}

// Incremental walker for hot estimator loops: one coordinate vector, a
// cheap running sup-norm relative to an anchor.
struct Walker {
  Coord pos;
  Coord anchor;
  int d = 1;
  int norm = 0;

  void reset(const Coord& start, const Coord& anchor_site, int dim) {
    pos = start;
    anchor = anchor_site;
    d = dim;
    norm = sup_dist(pos, anchor, d);
  }

  void step(RngStream& rng) {
    std::uint64_t dir = rng.below(static_cast<std::uint64_t>(2 * d));
    int axis = static_cast<int>(dir >> 1);
    std::int32_t before = pos[axis] - anchor[axis];
    pos[axis] += (dir & 1) ? 1 : -1;
    std::int32_t after = pos[axis] - anchor[axis];
    int a = after < 0 ? -after : after;
    if (a > norm) {
      norm = a;
    } else {
      int b = before < 0 ? -before : before;
      if (b == norm && a < b) norm = sup_dist(pos, anchor, d);
    }
  }
};

// Exact transition probabilities p_t(o, .) by sparse convolution, usable as a
// ground-truth oracle for small t. Entries below prune_below are dropped and
// their total recorded.
struct ExactKernel {
  PointSet support;
  std::vector<double> prob;    // aligned with support.items()
  double pruned_mass = 0;

  double at(const Coord& c) const {
    std::int32_t i = support.index_of(c);
    return i < 0 ? 0.0 : prob[static_cast<std::size_t>(i)];
  }
};

inline ExactKernel exact_kernel(int d, int t_steps, double prune_below = 0.0) {
  PointSet cur_idx(d);
  std::vector<double> cur_p{1.0};
  cur_idx.insert(Coord{});
  double pruned = 0;
  for (int t = 0; t < t_steps; ++t) {
    PointSet next_idx(d);
    std::vector<double> next_p;
    auto add = [&](const Coord& c, double p) {
      if (next_idx.insert(c)) next_p.push_back(p);
      else next_p[static_cast<std::size_t>(next_idx.index_of(c))] += p;
    };
    double w = 1.0 / (2 * d);
    for (std::size_t k = 0; k < cur_idx.items().size(); ++k) {
      const Coord& c = cur_idx.items()[k];
      double p = cur_p[k] * w;
      for (int i = 0; i < d; ++i) {
        Coord up = c, dn = c;
        up[i] += 1;
        dn[i] -= 1;
        add(up, p);
        add(dn, p);
      }
    }
    if (prune_below > 0) {
      PointSet kept_idx(d);
      std::vector<double> kept_p;
      for (std::size_t k = 0; k < next_idx.items().size(); ++k) {
        if (next_p[k] < prune_below) pruned += next_p[k];
        else {
          kept_idx.insert(next_idx.items()[k]);
          kept_p.push_back(next_p[k]);
        }
      }
      cur_idx = std::move(kept_idx);
      cur_p = std::move(kept_p);
    } else {
      cur_idx = std::move(next_idx);
      cur_p = std::move(next_p);
    }
  }
  ExactKernel out;
  out.support = std::move(cur_idx);
  out.prob = std::move(cur_p);
  out.pruned_mass = pruned;
  return out;
}

}  // namespace wormlab
