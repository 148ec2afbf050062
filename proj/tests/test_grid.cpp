#include <doctest.h>

#include <algorithm>
#include <set>

#include "msbayes/errors.hpp"
#include "msbayes/grid.hpp"

using namespace msbayes;

TEST_CASE("fine grid numbering") {
  const FineGrid g(4);
  CHECK(g.num_nodes() == 25);
  CHECK(g.num_cells() == 16);
  CHECK(g.h() == doctest::Approx(0.25));
  CHECK(g.node(2, 3) == 13);
  CHECK(g.node_row(13) == 2);
  CHECK(g.node_col(13) == 3);
  const auto corners = g.cell_nodes(g.cell(1, 2));
  CHECK(corners[0] == g.node(1, 2));
  CHECK(corners[1] == g.node(1, 3));
  CHECK(corners[2] == g.node(2, 3));
  CHECK(corners[3] == g.node(2, 2));
  const auto [x, y] = g.node_coord(g.node(1, 3));
  CHECK(x == doctest::Approx(0.75));
  CHECK(y == doctest::Approx(0.25));
  // 16 boundary nodes, 9 free ones
  CHECK(g.free_nodes().size() == 9);
  CHECK(g.on_boundary(g.node(0, 2)));
  CHECK_FALSE(g.on_boundary(g.node(2, 2)));
}

TEST_CASE("coarse neighborhoods cover one to four elements") {
  const FineGrid f(20);
  const CoarseGrid c(f, 4);
  CHECK(c.ratio() == 5);
  CHECK(c.H() == doctest::Approx(0.25));
  CHECK(c.num_neighborhoods() == 25);
  CHECK(c.neighborhood_elements(c.node(0, 0)).size() == 1);
  CHECK(c.neighborhood_elements(c.node(0, 2)).size() == 2);
  CHECK(c.neighborhood_elements(c.node(2, 2)).size() == 4);
  CHECK(c.neighborhood_cells(c.node(2, 2)).size() == 100);
  CHECK(c.neighborhood_nodes(c.node(2, 2)).size() == 121);
  CHECK(c.fine_node(c.node(1, 2)) == f.node(5, 10));

  // every fine cell belongs to exactly one element; each element lies in four neighborhoods
  std::vector<int> seen(f.num_cells(), 0);
  for (int e = 0; e < c.num_elements(); ++e) {
    for (int cell : c.element_cells(e)) {
      ++seen[cell];
      CHECK(c.element_of_cell(cell) == e);
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  std::vector<int> owners(c.num_elements(), 0);
  for (int i = 0; i < c.num_neighborhoods(); ++i) {
    for (int e : c.neighborhood_elements(i)) ++owners[e];
  }
  CHECK(std::all_of(owners.begin(), owners.end(), [](int n) { return n == 4; }));
}

TEST_CASE("coarse grid must divide the fine grid") {
  const FineGrid f(10);
  CHECK_THROWS_AS(CoarseGrid(f, 3), ConfigError);
  CHECK_THROWS_AS(build_grids(10, 0), ConfigError);
  CHECK_THROWS_AS(FineGrid(0), ConfigError);
}

TEST_CASE("time grid intervals") {
  const TimeGrid t(0.02, 1e-3, 4);
  CHECK(t.total_steps() == 20);
  CHECK(t.steps_per_interval() == 5);
  CHECK(t.first_step(0) == 1);
  CHECK(t.last_step(0) == 5);
  CHECK(t.first_step(3) == 16);
  CHECK(t.interval_end(3) == doctest::Approx(0.02));
  CHECK(t.interval_start(1) == doctest::Approx(0.005));
  CHECK_THROWS_AS(TimeGrid(0.02, 1e-3, 3), ConfigError);
  CHECK_THROWS_AS(TimeGrid(0.0205, 1e-3, 1), ConfigError);
  CHECK_THROWS_AS(TimeGrid(0.02, -1.0, 1), ConfigError);
}
