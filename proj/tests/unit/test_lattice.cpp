#include <doctest.h>

#include "wormlab/lattice.hpp"

using namespace wormlab;

TEST_CASE("ball sizes are (2R+1)^d under Free geometry") {
  auto g3 = BoxGeometry::centered(3, 11, BoundaryKind::Free);
  CHECK(ball_sites(Coord{}, 0, g3).count() == 1);

  auto g2 = BoxGeometry::centered(2, 11, BoundaryKind::Free);
  CHECK(ball_sites(Coord{}, 1, g2).count() == 9);

  auto g5 = BoxGeometry::centered(5, 7, BoundaryKind::Free);
  CHECK(ball_sites(Coord{}, 2, g5).count() == 3125);

  for (int R = 0; R <= 3; ++R) {
    auto g = BoxGeometry::centered(4, 9, BoundaryKind::Free);
    std::int64_t expect = 1;
    for (int i = 0; i < 4; ++i) expect *= 2 * R + 1;
    CHECK(ball_sites(Coord{}, R, g).count() == expect);
  }
}

TEST_CASE("ball exceeding a Free window is rejected") {
  auto g = BoxGeometry::centered(2, 5, BoundaryKind::Free);
  CHECK_THROWS_AS(ball_sites(Coord{}, 3, g), std::out_of_range);
  // the same ball wraps fine on a torus
  auto t = BoxGeometry::centered(2, 5, BoundaryKind::Torus);
  CHECK(ball_sites(Coord{}, 3, t).count() == 25);  // covers the whole torus
}

TEST_CASE("index <-> coordinate mapping is a bijection") {
  auto g = BoxGeometry::centered(3, 5, BoundaryKind::Torus);
  for (std::int64_t idx = 0; idx < g.num_sites(); ++idx)
    CHECK(g.index_of(g.coord_of(idx)) == idx);
}

TEST_CASE("boundary operators") {
  auto g = BoxGeometry::centered(2, 11, BoundaryKind::Free);

  SUBCASE("exterior boundary of a single site is its 2d neighbours") {
    SiteSet h(g);
    h.set_coord(Coord{});
    auto ext = boundary(h, BoundarySide::Exterior);
    CHECK(ext.count() == 4);
    CHECK_FALSE(ext.test_coord(Coord{}));
  }

  SUBCASE("interior boundary of ball(o,2) is the 16-site shell") {
    auto h = ball_sites(Coord{}, 2, g);
    auto in = boundary(h, BoundarySide::Interior);
    CHECK(in.count() == 16);
    for (std::int64_t idx : in.indices())
      CHECK(sup_norm(g.coord_of(idx), 2) == 2);
  }

  SUBCASE("empty set has empty boundaries") {
    SiteSet h(g);
    CHECK(boundary(h, BoundarySide::Interior).count() == 0);
    CHECK(boundary(h, BoundarySide::Exterior).count() == 0);
  }

  SUBCASE("interior boundary is a subset, exterior is disjoint") {
    auto h = ball_sites(make_coord({1, -2}), 2, g);
    auto in = boundary(h, BoundarySide::Interior);
    auto ext = boundary(h, BoundarySide::Exterior);
    CHECK(in.is_subset_of(h));
    for (std::int64_t idx : ext.indices()) CHECK_FALSE(h.test(idx));
  }
}

TEST_CASE("torus sites always expose 2d direction neighbours") {
  auto g = BoxGeometry::centered(3, 4, BoundaryKind::Torus);
  for (std::int64_t idx = 0; idx < g.num_sites(); ++idx)
    CHECK(g.neighbors(idx).size() == 6);
}

TEST_CASE("point set basics") {
  PointSet s(3);
  CHECK(s.insert(make_coord({1, 2, 3})));
  CHECK_FALSE(s.insert(make_coord({1, 2, 3})));
  CHECK(s.contains(make_coord({1, 2, 3})));
  CHECK_FALSE(s.contains(make_coord({1, 2, 4})));
  s.insert(make_coord({-4, 0, 0}));
  CHECK(s.diameter() == 5);

  // interior boundary of a 3-ball equals its shell
  PointSet ball(3);
  for (const auto& c : enumerate_ball(Coord{}, 2, 3)) ball.insert(c);
  auto bnd = ball.interior_boundary();
  CHECK(bnd.size() == 125 - 27);
}
