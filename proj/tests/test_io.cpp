#include "fplap/errors.hpp"
#include "fplap/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fpl;

TEST_SUITE("io")
{
  TEST_CASE("hashing")
  {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hash_hex(0xabcULL) == "0000000000000abc");
  }

  TEST_CASE("doubles round-trip")
  {
    for (double v : {0.1, 1. / 3., -2.5e-300, 7.282190656480475, 1e300})
      CHECK(std::stod(format_double(v)) == v);
  }

  TEST_CASE("csv round-trip")
  {
    CsvTable t{"00ff", {"x", "u"}, {{0.1, 1. / 3.}, {-0.5, 2e-17}}};
    std::stringstream ss;
    write_csv(ss, t);
    CHECK(ss.str().rfind("# config_hash=00ff\n", 0) == 0);
    auto back = read_csv(ss);
    CHECK(back.config_hash == "00ff");
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(column(back, "u")[0] == 1. / 3.);
    CHECK_THROWS_AS(column(back, "v"), ValidationError);

    std::stringstream ragged("x,u\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv(ragged), ValidationError);
    std::stringstream junk("x,u\n1,abc\n");
    CHECK_THROWS_AS(read_csv(junk), ValidationError);
  }

  TEST_CASE("grid functions must match the grid")
  {
    auto     d    = build_grid(-1., 1., 5);
    auto     path = std::filesystem::temp_directory_path() / "fplap_io_grid.csv";
    CsvTable t{"", {"x", "u"}, {}};
    for (int i = 0; i < 5; ++i)
      t.rows.push_back({d.node(i), double(i)});
    write_csv(path, t);
    auto u = read_grid_function(path, d);
    CHECK(u[4] == 4.);
    CHECK_THROWS_AS(read_grid_function(path, build_grid(-1., 1., 6)), ValidationError);
    CHECK_THROWS_AS(read_grid_function(path, build_grid(0., 1., 5)), ValidationError);
    std::filesystem::remove(path);
  }
}
