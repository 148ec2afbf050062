#include <doctest.h>

#include <cmath>
#include <fstream>

#include "msbayes/errors.hpp"
#include "msbayes/field.hpp"
#include "test_support.hpp"

using namespace msbayes;

TEST_CASE("generated field has the requested contrast") {
  FieldGeneratorParams p;
  p.n = 100;
  const auto f = generate_field(p);
  CHECK(f.n == 100);
  CHECK(f.kappa0.size() == 10000u);
  CHECK(f.min() == doctest::Approx(1.0));
  CHECK(f.max() == doctest::Approx(1e4));
  CHECK(f.contrast() == doctest::Approx(1e4));
  int marked = 0;
  for (std::size_t c = 0; c < f.kappa0.size(); ++c) {
    CHECK((f.inclusion[c] != 0) == (f.kappa0[c] > 1.0));
    marked += f.inclusion[c] != 0;
  }
  CHECK(marked > 0);
  CHECK(marked < 5000);
}

TEST_CASE("generator is deterministic in the seed") {
  FieldGeneratorParams p;
  p.n = 40;
  const auto a = generate_field(p);
  const auto b = generate_field(p);
  CHECK(a.kappa0 == b.kappa0);
  CHECK(a.hash() == b.hash());
  p.seed = 2;
  const auto c = generate_field(p);
  CHECK(a.kappa0 != c.kappa0);
  CHECK(a.hash() != c.hash());
}

TEST_CASE("modulation laws") {
  FieldGeneratorParams p;
  p.n = 30;
  auto f = generate_field(p);
  const double t = 0.01;
  f.modulation = Modulation::Literal;
  auto k = modulate(f, t);
  for (std::size_t c = 0; c < k.size(); ++c) CHECK(k[c] == doctest::Approx(f.kappa0[c] * std::exp(2.5)));

  f.modulation = Modulation::InclusionOnly;
  k = modulate(f, t);
  double hi = 0.0;
  double lo = 1e300;
  for (double v : k) {
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  }
  CHECK(std::abs(hi / lo / (f.contrast() * std::exp(250.0 * t)) - 1.0) < 1e-12);
  CHECK(parse_modulation("inclusion_only") == Modulation::InclusionOnly);
  CHECK(parse_modulation(to_string(Modulation::Literal)) == Modulation::Literal);
  CHECK_THROWS_AS(parse_modulation("sideways"), ConfigError);
}

TEST_CASE("csv and binary round trips") {
  const auto dir = testing::scratch_dir("field");
  FieldGeneratorParams p;
  p.n = 12;
  const auto f = generate_field(p);
  save_field_csv(f, (dir / "k.csv").string());
  save_field_binary(f, (dir / "k.kpf").string());
  const auto a = load_field((dir / "k.csv").string(), 12);
  const auto b = load_field((dir / "k.kpf").string(), 12);
  CHECK(a.kappa0 == f.kappa0);
  CHECK(b.kappa0 == f.kappa0);
  CHECK_THROWS_AS(load_field((dir / "k.csv").string(), 10), FormatError);
}

TEST_CASE("malformed field files") {
  const auto dir = testing::scratch_dir("field_bad");
  auto write = [&](const char* name, const char* text) {
    std::ofstream((dir / name).string()) << text;
    return (dir / name).string();
  };
  CHECK_THROWS_AS(load_field(write("ragged.csv", "1,2\n3\n")), FormatError);
  CHECK_THROWS_AS(load_field(write("word.csv", "1,x\n3,4\n")), FormatError);
  CHECK_THROWS_AS(load_field(write("neg.csv", "1,-2\n3,4\n")), DataError);
  CHECK_THROWS_AS(load_field(write("empty.csv", "")), FormatError);
  CHECK_THROWS_AS(load_field((dir / "missing.csv").string()), DataError);
}

TEST_CASE("uniform field") {
  const auto f = uniform_field(5, 3.0);
  CHECK(f.contrast() == doctest::Approx(1.0));
  CHECK(f.kappa0.size() == 25u);
}
